//! Pseudo-optimal rational Krylov reduction and its optimality checks.

use ndarray::{s, Array2};
use ndarray_linalg::Eig;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::h2analysis::{h2_inner_pole_residue, h2_norm_deflated, h2_norm_rom, rom_to_pole_residue};
use crate::interp::{BasisV, DeflatedSystem, InterpData};
use crate::numkernel::dense::{eig_pencil_dense, solve_many_c, solve_small_lyapunov_real, to_complex};

/// Where a reduced model came from.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub source: String,
    /// Shifts as (re, im) pairs.
    pub shifts: Vec<[f64; 2]>,
    pub step: Option<usize>,
}

impl Provenance {
    pub fn new(source: &str) -> Self {
        Provenance {
            source: source.to_string(),
            ..Default::default()
        }
    }

    pub fn polynomial() -> Self {
        Self::new("polynomial_part")
    }
}

/// G_r(s) = Cr(sEr − Ar)⁻¹Br + Dr.
#[derive(Clone, Debug)]
pub struct RomRealization {
    pub er: Array2<f64>,
    pub ar: Array2<f64>,
    pub br: Array2<f64>,
    pub cr: Array2<f64>,
    pub dr: Array2<f64>,
    pub provenance: Provenance,
}

impl RomRealization {
    pub fn order(&self) -> usize {
        self.ar.nrows()
    }

    pub fn m(&self) -> usize {
        self.br.ncols()
    }

    pub fn p(&self) -> usize {
        self.cr.nrows()
    }

    pub fn eval(&self, s: Complex64) -> Result<Array2<Complex64>> {
        let mut g = self.dr.mapv(|v| Complex64::new(v, 0.0));
        if self.order() == 0 {
            return Ok(g);
        }
        let pencil = to_complex(&self.er).mapv(|v| v * s) - to_complex(&self.ar);
        let x = solve_many_c(&pencil, &to_complex(&self.br)).map_err(|_| Error::SingularShift { shift: s })?;
        g += &to_complex(&self.cr).dot(&x);
        Ok(g)
    }

    /// Finite eigenvalues of (Er, Ar).
    pub fn poles(&self) -> Result<Vec<Complex64>> {
        if self.order() == 0 {
            return Ok(Vec::new());
        }
        Ok(eig_pencil_dense(&self.er, &self.ar)?
            .into_iter()
            .filter_map(|p| p.value)
            .collect())
    }

    pub fn is_stable(&self) -> Result<bool> {
        Ok(self.poles()?.iter().all(|p| p.re < 0.0))
    }

    /// Parallel connection: block-diagonal state, summed transfer functions.
    pub fn parallel(&self, other: &RomRealization) -> Result<RomRealization> {
        if self.m() != other.m() || self.p() != other.p() {
            return Err(Error::DimensionMismatch(
                "parallel connection of incompatible ROMs".into(),
            ));
        }
        let (q1, q2) = (self.order(), other.order());
        let q = q1 + q2;
        let mut out = RomRealization {
            er: Array2::zeros((q, q)),
            ar: Array2::zeros((q, q)),
            br: Array2::zeros((q, self.m())),
            cr: Array2::zeros((self.p(), q)),
            dr: &self.dr + &other.dr,
            provenance: Provenance::new("combined"),
        };
        out.er.slice_mut(s![..q1, ..q1]).assign(&self.er);
        out.er.slice_mut(s![q1.., q1..]).assign(&other.er);
        out.ar.slice_mut(s![..q1, ..q1]).assign(&self.ar);
        out.ar.slice_mut(s![q1.., q1..]).assign(&other.ar);
        out.br.slice_mut(s![..q1, ..]).assign(&self.br);
        out.br.slice_mut(s![q1.., ..]).assign(&other.br);
        out.cr.slice_mut(s![.., ..q1]).assign(&self.cr);
        out.cr.slice_mut(s![.., q1..]).assign(&other.cr);
        Ok(out)
    }
}

/// Solves S*Γ + ΓS = R*R and returns Er = Γ, Ar = −S*Γ, Br = −R*, Cr = c·V.
/// `c_proj` is the (already right-projected) p×n output matrix.
pub fn pork_input(basis: &BasisV, data: &InterpData, c_proj: &Array2<f64>) -> Result<RomRealization> {
    let q = data.s.nrows();
    if basis.v.ncols() != q || c_proj.ncols() != basis.v.nrows() {
        return Err(Error::DimensionMismatch(format!(
            "V {:?}, S {:?}, C {:?}",
            basis.v.dim(),
            data.s.dim(),
            c_proj.dim()
        )));
    }
    let gamma = solve_small_lyapunov_real(&data.s, &data.r)?;
    let ar = -data.s.t().dot(&gamma);
    let shifts = crate::numkernel::dense::eigenvalues(&to_complex(&data.s))?
        .into_iter()
        .map(|z| [z.re, z.im])
        .collect();
    Ok(RomRealization {
        ar,
        br: -data.r.t().to_owned(),
        cr: c_proj.dot(&basis.v),
        dr: Array2::zeros((c_proj.nrows(), data.r.nrows())),
        er: gamma,
        provenance: Provenance {
            source: "pork".into(),
            shifts,
            step: None,
        },
    })
}

/// Eigenpairs of S as (σᵢ, rᵢ = R·xᵢ).
fn shift_directions(data: &InterpData) -> Result<Vec<(Complex64, Vec<Complex64>)>> {
    let (vals, vecs) = crate::numkernel::dense::lapack_layout(&data.s).eig()?;
    let rc = to_complex(&data.r);
    Ok(vals
        .iter()
        .enumerate()
        .map(|(i, &sig)| (sig, rc.dot(&vecs.column(i)).to_vec()))
        .collect())
}

/// ‖(G(σᵢ) − G_r(σᵢ))rᵢ‖ / ‖G(σᵢ)rᵢ‖ for every shift.
pub fn check_interpolation(
    fom_eval: impl Fn(Complex64) -> Result<Array2<Complex64>>,
    rom: &RomRealization,
    data: &InterpData,
) -> Result<Vec<f64>> {
    shift_directions(data)?
        .into_iter()
        .map(|(sig, r)| {
            let rv = ndarray::Array1::from(r);
            let gf = fom_eval(sig)?.dot(&rv);
            let gr = rom.eval(sig)?.dot(&rv);
            let num: f64 = gf
                .iter()
                .zip(gr.iter())
                .map(|(x, y)| (x - y).norm_sqr())
                .sum::<f64>()
                .sqrt();
            let den: f64 = gf.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt();
            Ok(if den > 0.0 { num / den } else { num })
        })
        .collect()
}

/// Largest |⟨G − G_r, G_M⟩| / (‖G‖·‖G_M‖) over `trials` random output
/// matrices C_M for G_M = (I, −S*, R*, C_M).
pub fn check_orthogonality(
    fom: &DeflatedSystem,
    rom: &RomRealization,
    data: &InterpData,
    trials: usize,
    seed: u64,
) -> Result<f64> {
    let q = data.s.nrows();
    let p = fom.p();
    let g_norm = h2_norm_deflated(fom)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let err = |s: Complex64| -> Result<Array2<Complex64>> { Ok(fom.eval(s)? - rom.eval(s)?) };
    let mut worst: f64 = 0.0;
    for _ in 0..trials {
        let gm = RomRealization {
            er: Array2::eye(q),
            ar: -data.s.t().to_owned(),
            br: data.r.t().to_owned(),
            cr: Array2::from_shape_fn((p, q), |_| rng.gen_range(-1.0..1.0)),
            dr: Array2::zeros((p, data.r.nrows())),
            provenance: Provenance::new("test_space"),
        };
        let form = rom_to_pole_residue(&gm)?;
        let ip = h2_inner_pole_residue(err, &form)?;
        let scale = g_norm * h2_norm_rom(&gm)?;
        worst = worst.max(ip.norm() / scale.max(f64::MIN_POSITIVE));
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::daemodel::{DaeSystem, ProjectorKit};
    use crate::interp::{spark_basis, BasisSource};
    use ndarray::array;

    fn ode3() -> DaeSystem {
        let a = array![[-1.0, 0.5, 0.0], [0.0, -2.0, 1.0], [0.3, 0.0, -3.0]];
        let e = array![[1.0, 0.0, 0.0], [0.0, 2.0, 0.0], [0.0, 0.0, 1.0]];
        DaeSystem::from_dense(&e, &a, &array![[1.0], [0.0], [1.0]], &array![[1.0, 1.0, 0.0]], None).unwrap()
    }

    #[test]
    fn scalar_pork() {
        let basis = BasisV {
            v: array![[2.0]],
            source: BasisSource::Shifts {
                shifts: vec![[1.0, 0.0]],
            },
        };
        let data = InterpData {
            s: array![[1.0]],
            r: array![[1.0]],
        };
        let rom = pork_input(&basis, &data, &array![[3.0]]).unwrap();
        assert!((rom.er[[0, 0]] - 0.5).abs() < 1e-15);
        assert!((rom.ar[[0, 0]] + 0.5).abs() < 1e-15);
        assert_eq!(rom.br[[0, 0]], -1.0);
        assert_eq!(rom.cr[[0, 0]], 6.0);
        let poles = rom.poles().unwrap();
        assert!((poles[0] + 1.0).norm() < 1e-14);
    }

    #[test]
    fn double_pole_at_one_one() {
        let sys = ode3();
        let kit = ProjectorKit::build(&sys).unwrap();
        let op = DeflatedSystem::new(&sys, &kit).unwrap();
        let (v, data) = spark_basis(&op, 1.0, 1.0).unwrap();
        let rom = pork_input(&v, &data, &op.c).unwrap();
        for p in rom.poles().unwrap() {
            assert!((p + 1.0).norm() < 1e-6);
        }
    }

    #[test]
    fn interpolation_and_orthogonality() {
        let sys = ode3();
        let kit = ProjectorKit::build(&sys).unwrap();
        let op = DeflatedSystem::new(&sys, &kit).unwrap();
        let (v, data) = spark_basis(&op, 0.8, 1.3).unwrap();
        let rom = pork_input(&v, &data, &op.c).unwrap();
        let res = check_interpolation(|s| op.eval(s), &rom, &data).unwrap();
        assert!(res.iter().all(|&r| r < 1e-10), "{res:?}");
        assert!((res[0] - res[1]).abs() < 1e-12);
        assert!(check_orthogonality(&op, &rom, &data, 10, 3).unwrap() < 1e-10);

        let mut broken = rom.clone();
        broken.cr[[0, 0]] *= 1.01;
        let res = check_interpolation(|s| op.eval(s), &broken, &data).unwrap();
        assert!(res.iter().any(|&r| r > 1e-3));
    }

    #[test]
    fn parallel_sums_transfer() {
        let r1 = RomRealization {
            er: array![[1.0]],
            ar: array![[-1.0]],
            br: array![[1.0]],
            cr: array![[1.0]],
            dr: array![[0.0]],
            provenance: Provenance::new("a"),
        };
        let r2 = crate::daemodel::realize_constant_poly(&array![[0.25]]).unwrap();
        let t = r1.parallel(&r2).unwrap();
        let s = Complex64::new(0.0, 2.0);
        let want = 1.0 / (s + 1.0) + 0.25;
        assert!((t.eval(s).unwrap()[[0, 0]] - want).norm() < 1e-15);
    }
}
