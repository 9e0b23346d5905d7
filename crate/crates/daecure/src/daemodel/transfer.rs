use ndarray::{s, Array2};
use num_complex::Complex64;

use super::split::DenseSplit;
use super::{DaeSystem, ProjectorKit, StructureTag};
use crate::error::{Error, Result};
use crate::numkernel::dense::{fro, solve_many};
use crate::numkernel::shifted::RealFactorization;
use crate::numkernel::SparseMatrix;
use crate::pork::{Provenance, RomRealization};

/// G(s) = C(sE − A)⁻¹B + D.
pub fn eval_transfer(sys: &DaeSystem, s: Complex64) -> Result<Array2<Complex64>> {
    let f = sys.factor(s)?;
    let (p, m) = (sys.p(), sys.m());
    let mut g = sys.d().mapv(|v| Complex64::new(v, 0.0));
    for j in 0..m {
        let bj = sys.b().column(j);
        let x = f.solve_real_rhs(bj.as_slice().expect("contiguous"))?;
        let cx = sys.c().mul_vec_c(&x);
        for i in 0..p {
            g[[i, j]] -= cx[i];
        }
    }
    Ok(g)
}

/// G^sp(s) = C·Π_r·(sE − A)⁻¹·Π_l·B.
pub fn eval_strictly_proper(sys: &DaeSystem, kit: &ProjectorKit, s: Complex64) -> Result<Array2<Complex64>> {
    let f = sys.factor(s)?;
    let (p, m) = (sys.p(), sys.m());
    let bl = kit.project_input(sys.b())?;
    let mut g = Array2::zeros((p, m));
    for j in 0..m {
        let x = f.solve_real_rhs(&bl.column(j).to_vec())?;
        let x = kit.apply_complex(&x, |k, v| k.apply_pr(v))?;
        let cx = sys.c().mul_vec_c(&x);
        for i in 0..p {
            g[[i, j]] = -cx[i];
        }
    }
    Ok(g)
}

/// Polynomial part of the transfer function.
#[derive(Clone, Debug)]
pub enum PolyPart {
    Constant(Array2<f64>),
    StrictlyProper,
}

/// Extracts the polynomial part; only constant parts are supported.
pub fn polynomial_part(sys: &DaeSystem) -> Result<PolyPart> {
    let n = sys.n();
    match *sys.structure() {
        StructureTag::SemiExplicitIndex1 { n1 } => {
            // P = D − C·x with x = K⁻¹[0; B2], K = [[E11, E12], [A21, A22]].
            let e_top = sys.e().block(0, n1, 0, n);
            let a_bot = sys.a().block(n1, n, 0, n);
            let k = RealFactorization::new(&SparseMatrix::vstack(&e_top, &a_bot)?)
                .ok_or_else(|| Error::SingularSchurComplement("A22 - A21*inv(E11)*E12 is singular".into()))?;
            let mut p = sys.d().clone();
            for j in 0..sys.m() {
                let mut rhs = sys.b().column(j).to_vec();
                rhs[..n1].iter_mut().for_each(|v| *v = 0.0);
                let x = k
                    .solve(&rhs)
                    .ok_or_else(|| Error::SingularSchurComplement("solve with K failed".into()))?;
                let cx = sys.c().mul_vec(&x);
                for i in 0..sys.p() {
                    p[[i, j]] -= cx[i];
                }
            }
            Ok(nonzero_or_proper(p))
        }
        StructureTag::StokesIndex2 { n_v, .. } => stokes_poly_part(sys, n_v),
        StructureTag::GeneralDense => dense_poly_part(sys),
    }
}

fn nonzero_or_proper(p: Array2<f64>) -> PolyPart {
    if p.iter().all(|&v| v == 0.0) {
        PolyPart::StrictlyProper
    } else {
        PolyPart::Constant(p)
    }
}

/// Saddle-point route for E = [[E11, 0], [0, 0]], A = [[A11, A12], [A21, 0]].
///
/// With S = A21·E11⁻¹·A12 and N = −E11⁻¹·A12·S⁻¹·B2 the transfer function
/// splits as G(s) = G_sp(s) + P0 + s·P1 where
/// P1 = −C2·S⁻¹·B2 and P0 = D + C1·N − C2·S⁻¹·A21·E11⁻¹·(A11·N + B1).
/// Both S⁻¹ applications come from one sparse factorization of
/// K = [[E11, A12], [A21, 0]].
fn stokes_poly_part(sys: &DaeSystem, n_v: usize) -> Result<PolyPart> {
    let n = sys.n();
    let mut trip: Vec<(usize, usize, f64)> = sys.e().block(0, n_v, 0, n_v).triplets();
    trip.extend(
        sys.a()
            .block(0, n_v, n_v, n)
            .triplets()
            .into_iter()
            .map(|(r, c, v)| (r, n_v + c, v)),
    );
    trip.extend(
        sys.a()
            .block(n_v, n, 0, n_v)
            .triplets()
            .into_iter()
            .map(|(r, c, v)| (n_v + r, c, v)),
    );
    let k = RealFactorization::new(&SparseMatrix::from_triplets(n, n, &trip)?)
        .ok_or_else(|| Error::SingularSchurComplement("[[E11, A12], [A21, 0]] is singular".into()))?;
    let solve = |rhs: &[f64]| {
        k.solve(rhs)
            .ok_or_else(|| Error::SingularSchurComplement("saddle-point solve failed".into()))
    };
    let a11 = sys.a().block(0, n_v, 0, n_v);
    let (p_out, m_in) = (sys.p(), sys.m());
    let mut p0 = sys.d().clone();
    let mut p1 = Array2::<f64>::zeros((p_out, m_in));
    let mut scale1 = 0.0f64;
    for j in 0..m_in {
        let bj = sys.b().column(j).to_vec();
        // [N; S⁻¹B2] from K·[w; y] = [0; −B2].
        let mut rhs = vec![0.0; n];
        for (dst, src) in rhs[n_v..].iter_mut().zip(&bj[n_v..]) {
            *dst = -src;
        }
        let first = if bj[n_v..].iter().any(|&v| v != 0.0) {
            solve(&rhs)?
        } else {
            vec![0.0; n]
        };
        // [·; S⁻¹A21E11⁻¹f] from K·[w; y] = [f; 0] with f = A11·N + B1.
        let mut f = a11.mul_vec(&first[..n_v]);
        for (fi, bi) in f.iter_mut().zip(&bj[..n_v]) {
            *fi += bi;
        }
        f.resize(n, 0.0);
        let second = solve(&f)?;
        let mut x0 = first[..n_v].to_vec();
        x0.extend(second[n_v..].iter().map(|v| -v));
        let mut x1 = vec![0.0; n_v];
        x1.extend(first[n_v..].iter().map(|v| -v));
        let y0 = sys.c().mul_vec(&x0);
        let y1 = sys.c().mul_vec(&x1);
        scale1 = scale1.max(x1.iter().map(|v| v * v).sum::<f64>().sqrt());
        for i in 0..p_out {
            p0[[i, j]] += y0[i];
            p1[[i, j]] = y1[i];
        }
    }
    let tol = 1e-12 * sys.c().frobenius_norm() * scale1;
    if p1.iter().any(|v| v.abs() > tol) {
        return Err(Error::UnsupportedPolynomialPart(
            "transfer function has a term proportional to s (pressure input and output)".into(),
        ));
    }
    Ok(nonzero_or_proper(p0))
}

/// Desk-scale route: decouple the pencil and read off
/// P(s) = C_∞(sE_∞ − A_∞)⁻¹B_∞ + D, constant iff all Markov terms with
/// positive powers vanish.
fn dense_poly_part(sys: &DaeSystem) -> Result<PolyPart> {
    let (e, a, b, c) = sys.to_dense()?;
    let sp = DenseSplit::new(&e, &a)?;
    let ni = sp.n() - sp.n_f;
    if ni == 0 {
        return Ok(nonzero_or_proper(sys.d().clone()));
    }
    let (_, b_inf) = sp.split_input(&b);
    let (_, c_inf) = sp.split_output(&c);
    // (sE_∞ − A_∞)⁻¹ = −Σ_k s^k (A_∞⁻¹E_∞)^k A_∞⁻¹.
    let nil = solve_many(&sp.a_inf, &sp.e_inf)?;
    let mut term = solve_many(&sp.a_inf, &b_inf)?;
    let mut p = sys.d() - &c_inf.dot(&term);
    let scale = fro(&c_inf) * fro(&term) + fro(sys.d()) + f64::MIN_POSITIVE;
    for _ in 0..ni {
        term = nil.dot(&term);
        let markov = c_inf.dot(&term);
        if fro(&markov) > 1e-8 * scale {
            return Err(Error::UnsupportedPolynomialPart(
                "polynomial part has terms of positive degree".into(),
            ));
        }
    }
    p.mapv_inplace(|v| if v.abs() < 1e-14 * scale { 0.0 } else { v });
    Ok(nonzero_or_proper(p))
}

/// Realization (0, −I_r, B, C) of a constant matrix P = C·B with r = rank P.
pub fn realize_constant_poly(p: &Array2<f64>) -> Result<RomRealization> {
    use ndarray_linalg::SVD;
    let (rows, cols) = p.dim();
    let empty = |r: usize| RomRealization {
        er: Array2::zeros((r, r)),
        ar: -Array2::<f64>::eye(r),
        br: Array2::zeros((r, cols)),
        cr: Array2::zeros((rows, r)),
        dr: Array2::zeros((rows, cols)),
        provenance: Provenance::polynomial(),
    };
    if rows == 0 || cols == 0 || p.iter().all(|&v| v == 0.0) {
        return Ok(empty(0));
    }
    let (u, sv, vt) = crate::numkernel::dense::lapack_layout(p).svd(true, true)?;
    let u = u.ok_or_else(|| Error::Linalg("SVD without U".into()))?;
    let vt = vt.ok_or_else(|| Error::Linalg("SVD without Vt".into()))?;
    let tol = (rows.max(cols) as f64) * f64::EPSILON * sv[0];
    let r = sv.iter().filter(|&&x| x > tol).count();
    let mut rom = empty(r);
    for k in 0..r {
        let w = sv[k].sqrt();
        rom.cr.column_mut(k).assign(&(&u.column(k) * w));
        rom.br.row_mut(k).assign(&(&vt.row(k) * w));
    }
    debug_assert_eq!(rom.cr.slice(s![.., ..r]).dim(), (rows, r));
    Ok(rom)
}
