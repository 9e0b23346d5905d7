//! Rational Krylov bases V solving A·V − E·V·S = B·R.

use ndarray::{Array1, Array2};
use num_complex::Complex64;
use serde::Serialize;

use crate::daemodel::{DaeSystem, ProjectorKit};
use crate::error::{Error, Result};
use crate::numkernel::dense::fro;
use crate::numkernel::ShiftedFactorization;

/// Interpolation data (S, R): S is q×q, R is m×q.
#[derive(Clone, Debug)]
pub struct InterpData {
    pub s: Array2<f64>,
    pub r: Array2<f64>,
}

#[derive(Clone, Debug, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum BasisSource {
    Spark { a: f64, b: f64 },
    Shifts { shifts: Vec<[f64; 2]> },
}

#[derive(Clone, Debug)]
pub struct BasisV {
    pub v: Array2<f64>,
    pub source: BasisSource,
}

impl BasisV {
    /// 2-norm condition number of V (reported, never repaired).
    pub fn condition(&self) -> Result<f64> {
        let sv = crate::numkernel::dense::singular_values(&self.v)?;
        let last = sv.iter().cloned().fold(f64::INFINITY, f64::min);
        Ok(if last > 0.0 { sv[0] / last } else { f64::INFINITY })
    }
}

/// A descriptor system with replaced input and output matrices, typically
/// the strictly proper part (E, A, Π_l·B, C·Π_r) or a CURE residual.
#[derive(Clone, Debug)]
pub struct DeflatedSystem<'a> {
    pub sys: &'a DaeSystem,
    /// n×m input block.
    pub b: Array2<f64>,
    /// p×n output block.
    pub c: Array2<f64>,
}

impl<'a> DeflatedSystem<'a> {
    /// Strictly proper part of `sys`.
    pub fn new(sys: &'a DaeSystem, kit: &ProjectorKit) -> Result<Self> {
        Ok(DeflatedSystem {
            sys,
            b: kit.project_input(sys.b())?,
            c: kit.project_output(sys.c())?,
        })
    }

    pub fn with_input(&self, b: Array2<f64>) -> Self {
        DeflatedSystem {
            sys: self.sys,
            b,
            c: self.c.clone(),
        }
    }

    pub fn n(&self) -> usize {
        self.sys.n()
    }

    pub fn m(&self) -> usize {
        self.b.ncols()
    }

    pub fn p(&self) -> usize {
        self.c.nrows()
    }

    /// c·(sE − A)⁻¹·b.
    pub fn eval(&self, s: Complex64) -> Result<Array2<Complex64>> {
        let f = self.sys.factor(s)?;
        self.eval_with(&f)
    }

    pub fn eval_with(&self, f: &ShiftedFactorization) -> Result<Array2<Complex64>> {
        let mut g = Array2::zeros((self.p(), self.m()));
        for j in 0..self.m() {
            let x = f.solve_real_rhs(&self.b.column(j).to_vec())?;
            for i in 0..self.p() {
                let row = self.c.row(i);
                let mut acc = Complex64::new(0.0, 0.0);
                for (k, xk) in x.iter().enumerate() {
                    acc += xk * row[k];
                }
                g[[i, j]] = -acc;
            }
        }
        Ok(g)
    }
}

#[allow(clippy::large_enum_variant)]
enum ShiftPair {
    /// σ₂ = conj(σ₁), one complex factorization.
    Complex(ShiftedFactorization),
    Real(ShiftedFactorization, ShiftedFactorization),
    Confluent(ShiftedFactorization),
}

/// Solves A·W − E·W·S = F for S = [[a, 1], [a² − b, a]] without dividing by
/// σ₁ − σ₂, so it stays valid at confluence.
pub struct SparkOperator<'a> {
    sys: &'a DaeSystem,
    a: f64,
    b: f64,
    d2: f64,
    pair: ShiftPair,
}

impl<'a> SparkOperator<'a> {
    pub fn new(sys: &'a DaeSystem, a: f64, b: f64) -> Result<Self> {
        if !(a > 0.0 && b > 0.0) || !a.is_finite() || !b.is_finite() {
            return Err(Error::NonPositiveParams { a, b });
        }
        let d2 = a * a - b;
        let pair = if d2 == 0.0 {
            ShiftPair::Confluent(sys.factor(Complex64::new(a, 0.0))?)
        } else if d2 < 0.0 {
            ShiftPair::Complex(sys.factor(Complex64::new(a, (-d2).sqrt()))?)
        } else {
            let d = d2.sqrt();
            ShiftPair::Real(
                sys.factor(Complex64::new(a + d, 0.0))?,
                sys.factor(Complex64::new(a - d, 0.0))?,
            )
        };
        Ok(SparkOperator { sys, a, b, d2, pair })
    }

    pub fn params(&self) -> (f64, f64) {
        (self.a, self.b)
    }

    /// Shifts σ₁,₂ = a ± √(a² − b).
    pub fn shifts(&self) -> [Complex64; 2] {
        let r = Complex64::new(self.d2, 0.0).sqrt();
        let a = Complex64::new(self.a, 0.0);
        [a + r, a - r]
    }

    pub fn s_matrix(&self) -> Array2<f64> {
        ndarray::array![[self.a, 1.0], [self.d2, self.a]]
    }

    /// ½(A_σ₁⁻¹ + A_σ₂⁻¹)·f.
    pub fn sigma(&self, f: &[f64]) -> Result<Vec<f64>> {
        match &self.pair {
            ShiftPair::Complex(f1) => Ok(f1.solve_real_rhs(f)?.iter().map(|z| z.re).collect()),
            ShiftPair::Real(f1, f2) => {
                let x = f1.solve_real(f)?;
                let y = f2.solve_real(f)?;
                Ok(x.iter().zip(&y).map(|(p, q)| 0.5 * (p + q)).collect())
            }
            ShiftPair::Confluent(f1) => f1.solve_real(f),
        }
    }

    /// A_σ₂⁻¹·E·A_σ₁⁻¹·f.
    pub fn pi(&self, f: &[f64]) -> Result<Vec<f64>> {
        let e = self.sys.e();
        match &self.pair {
            ShiftPair::Complex(f1) => {
                let u = f1.solve_real_rhs(f)?;
                let eu = e.mul_vec_c(&u);
                Ok(f1.solve_conj_shift(&eu)?.iter().map(|z| z.re).collect())
            }
            ShiftPair::Real(f1, f2) => f2.solve_real(&e.mul_vec(&f1.solve_real(f)?)),
            ShiftPair::Confluent(f1) => f1.solve_real(&e.mul_vec(&f1.solve_real(f)?)),
        }
    }

    /// W = [Σf₁ + (a² − b)·Πf₂, Πf₁ + Σf₂].
    pub fn solve(&self, f1: &[f64], f2: &[f64]) -> Result<Array2<f64>> {
        let n = f1.len();
        let mut w = Array2::zeros((n, 2));
        let s1 = self.sigma(f1)?;
        let p1 = self.pi(f1)?;
        let (s2, p2) = if f2.iter().all(|&v| v == 0.0) {
            (vec![0.0; n], vec![0.0; n])
        } else {
            (self.sigma(f2)?, self.pi(f2)?)
        };
        for i in 0..n {
            w[[i, 0]] = s1[i] + self.d2 * p2[i];
            w[[i, 1]] = p1[i] + s2[i];
        }
        Ok(w)
    }
}

/// SPARK basis V = [Σb, Πb] with S = [[a, 1], [a² − b, a]] and R = [1, 0].
pub fn spark_basis(opsys: &DeflatedSystem, a: f64, b: f64) -> Result<(BasisV, InterpData)> {
    let op = SparkOperator::new(opsys.sys, a, b)?;
    spark_basis_with(&op, opsys)
}

pub fn spark_basis_with(op: &SparkOperator, opsys: &DeflatedSystem) -> Result<(BasisV, InterpData)> {
    if opsys.m() != 1 {
        return Err(Error::DimensionMismatch(format!(
            "SPARK needs a SISO input, got m = {}",
            opsys.m()
        )));
    }
    let bin = opsys.b.column(0).to_vec();
    let v = op.solve(&bin, &vec![0.0; bin.len()])?;
    let (a, b) = op.params();
    Ok((
        BasisV {
            v,
            source: BasisSource::Spark { a, b },
        },
        InterpData {
            s: op.s_matrix(),
            r: ndarray::array![[1.0, 0.0]],
        },
    ))
}

/// Re-expresses a SPARK basis in scaled modal coordinates V·T, T⁻¹·S·T,
/// R·T. For real shifts σ₊ = a + d, σ₋ = b/(a + d) (d² = a² − b) the new S
/// is diag(σ₊, σ₋) and the columns are scaled so that the PORK Gramian is
/// the unit-diagonal Cauchy matrix; for a complex pair a ± iω the new S is
/// [[a, ω], [−ω, a]]. Widely separated shifts make the original
/// coordinates nearly degenerate, which costs accuracy in the reduced
/// model; the span and the interpolation data are unchanged.
pub fn spark_modal_coordinates(a: f64, b: f64, basis: &BasisV, data: &InterpData) -> (BasisV, InterpData) {
    let d2 = a * a - b;
    let t = if d2 > 0.0 {
        let d = d2.sqrt();
        if d < 1e-6 * a {
            return (basis.clone(), data.clone());
        }
        let sp = a + d;
        let sm = b / (a + d);
        let (cp, cm) = ((2.0 * sp).sqrt(), (2.0 * sm).sqrt());
        ndarray::array![[cp, cm], [d * cp, -d * cm]]
    } else if d2 < 0.0 {
        ndarray::array![[1.0, 0.0], [0.0, (-d2).sqrt()]]
    } else {
        return (basis.clone(), data.clone());
    };
    let s = if d2 > 0.0 {
        let d = d2.sqrt();
        ndarray::array![[a + d, 0.0], [0.0, b / (a + d)]]
    } else {
        let w = (-d2).sqrt();
        ndarray::array![[a, w], [-w, a]]
    };
    (
        BasisV {
            v: basis.v.dot(&t),
            source: basis.source.clone(),
        },
        InterpData { s, r: data.r.dot(&t) },
    )
}

/// Tangential basis with columns (A − σᵢE)⁻¹·Π_l·B·rᵢ. A conjugate pair
/// (σ, r), (conj σ, conj r) contributes the real and imaginary parts of one
/// complex column, with the 2×2 block [[Re σ, Im σ], [−Im σ, Re σ]] in S.
pub fn tangential_basis(
    sys: &DaeSystem,
    kit: &ProjectorKit,
    shifts: &[(Complex64, Vec<Complex64>)],
) -> Result<(BasisV, InterpData)> {
    let n = sys.n();
    let m = sys.m();
    for (i, (si, ri)) in shifts.iter().enumerate() {
        if ri.len() != m {
            return Err(Error::DimensionMismatch(format!(
                "tangent {i} has length {}, expected {m}",
                ri.len()
            )));
        }
        if ri.iter().all(|z| z.norm() == 0.0) {
            return Err(Error::DimensionMismatch(format!("tangent {i} is zero")));
        }
        for (sj, _) in &shifts[..i] {
            if (si - sj).norm() <= 1e-14 * si.norm().max(1.0) {
                return Err(Error::DuplicateShift(*si));
            }
        }
    }
    let bdef = kit.project_input(sys.b())?;
    let q = shifts.len();
    let mut v = Array2::zeros((n, q));
    let mut s = Array2::zeros((q, q));
    let mut r = Array2::zeros((m, q));
    let mut used = vec![false; q];
    let mut col = 0;
    for i in 0..q {
        if used[i] {
            continue;
        }
        let (sigma, ri) = &shifts[i];
        used[i] = true;
        let br: Vec<Complex64> = (0..n).map(|k| (0..m).map(|j| ri[j] * bdef[[k, j]]).sum()).collect();
        let f = sys.factor(*sigma)?;
        let x = f.solve(&br)?;
        if sigma.im == 0.0 {
            if ri.iter().any(|z| z.im != 0.0) {
                return Err(Error::Unsupported("real shift with a complex tangent direction".into()));
            }
            v.column_mut(col).assign(&Array1::from_iter(x.iter().map(|z| z.re)));
            s[[col, col]] = sigma.re;
            r.column_mut(col).assign(&Array1::from_iter(ri.iter().map(|z| z.re)));
            col += 1;
            continue;
        }
        let partner = (0..q).find(|&j| {
            !used[j]
                && (shifts[j].0 - sigma.conj()).norm() <= 1e-14 * sigma.norm().max(1.0)
                && shifts[j]
                    .1
                    .iter()
                    .zip(ri)
                    .all(|(a, b)| (a - b.conj()).norm() <= 1e-14 * b.norm().max(1.0))
        });
        let Some(j) = partner else {
            return Err(Error::Unsupported(format!(
                "complex shift {sigma} needs its conjugate with the conjugate tangent"
            )));
        };
        used[j] = true;
        v.column_mut(col).assign(&Array1::from_iter(x.iter().map(|z| z.re)));
        v.column_mut(col + 1).assign(&Array1::from_iter(x.iter().map(|z| z.im)));
        s[[col, col]] = sigma.re;
        s[[col, col + 1]] = sigma.im;
        s[[col + 1, col]] = -sigma.im;
        s[[col + 1, col + 1]] = sigma.re;
        r.column_mut(col).assign(&Array1::from_iter(ri.iter().map(|z| z.re)));
        r.column_mut(col + 1)
            .assign(&Array1::from_iter(ri.iter().map(|z| z.im)));
        col += 2;
    }
    let list = shifts.iter().map(|(s, _)| [s.re, s.im]).collect();
    Ok((
        BasisV {
            v,
            source: BasisSource::Shifts { shifts: list },
        },
        InterpData { s, r },
    ))
}

/// ‖AV − EVS − BR‖_F / (‖A‖‖V‖ + ‖E‖‖V‖‖S‖ + ‖B‖‖R‖).
pub fn sylvester_residual(sys: &DaeSystem, b: &Array2<f64>, v: &Array2<f64>, data: &InterpData) -> Result<f64> {
    let (n, q) = v.dim();
    if n != sys.n() || data.s.dim() != (q, q) || data.r.ncols() != q || b.dim() != (n, data.r.nrows()) {
        return Err(Error::DimensionMismatch(format!(
            "V {:?}, S {:?}, R {:?}, B {:?}",
            v.dim(),
            data.s.dim(),
            data.r.dim(),
            b.dim()
        )));
    }
    let res = sys.a().mul_dense(v) - sys.e().mul_dense(&v.dot(&data.s)) - b.dot(&data.r);
    let nv = fro(v);
    let denom = sys.a().frobenius_norm() * nv + sys.e().frobenius_norm() * nv * fro(&data.s) + fro(b) * fro(&data.r);
    Ok(fro(&res) / denom.max(f64::MIN_POSITIVE))
}
