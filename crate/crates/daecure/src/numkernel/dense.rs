//! Small dense kernels: Sylvester and Lyapunov solvers, complex Schur form,
//! generalized eigenvalues of a pencil.

use ndarray::{s, Array1, Array2, ArrayView2};
use ndarray_linalg::{
    EigGeneralized, Factorize, FactorizeInto, GeneralizedEigenvalue, Inverse, ReciprocalConditionNum, Solve, SVD,
};
use num_complex::Complex64 as C64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

/// Largest m·k for which the Sylvester equation is solved through the
/// vectorized Kronecker system (whose matrix then has at most 250 000 entries).
pub const KRONECKER_LIMIT: usize = 500;

/// Copy in plain row-major layout. Owned slices with unit-length axes can
/// carry zero strides, which the LAPACK wrappers reject.
pub fn lapack_layout<T: Clone>(m: &Array2<T>) -> Array2<T> {
    Array2::from_shape_vec(m.dim(), m.iter().cloned().collect()).expect("shape matches element count")
}

pub fn to_complex(a: &Array2<f64>) -> Array2<C64> {
    a.mapv(|v| C64::new(v, 0.0))
}

pub fn real_part(a: &Array2<C64>) -> Array2<f64> {
    a.mapv(|v| v.re)
}

pub fn conj_t(a: &Array2<C64>) -> Array2<C64> {
    a.t().mapv(|v| v.conj())
}

pub fn fro_c(a: &Array2<C64>) -> f64 {
    a.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt()
}

pub fn fro(a: &Array2<f64>) -> f64 {
    a.iter().map(|v| v * v).sum::<f64>().sqrt()
}

/// Complex Schur decomposition A = Z·T·Zᴴ with T upper triangular.
pub fn complex_schur(a: &Array2<C64>) -> Result<(Array2<C64>, Array2<C64>)> {
    let n = a.nrows();
    if a.ncols() != n {
        return Err(Error::DimensionMismatch("Schur of a non-square matrix".into()));
    }
    if n == 0 {
        return Ok((Array2::zeros((0, 0)), Array2::zeros((0, 0))));
    }
    // Column-major copy for LAPACK.
    let mut buf: Vec<C64> = a.t().iter().copied().collect();
    let mut w = vec![C64::new(0.0, 0.0); n];
    let mut vs = vec![C64::new(0.0, 0.0); n * n];
    let mut rwork = vec![0.0f64; n];
    let mut bwork = vec![0i32; n];
    let ni = n as i32;
    let mut sdim = 0i32;
    let mut info = 0i32;
    let jobvs = b'V' as std::os::raw::c_char;
    let sort = b'N' as std::os::raw::c_char;
    let mut query = C64::new(0.0, 0.0);
    let lwork_query = -1i32;
    // SAFETY: all buffers are sized as zgees requires; Complex64 is repr(C)
    // with the same layout as LAPACK's double complex.
    unsafe {
        lapack_sys::zgees_(
            &jobvs,
            &sort,
            None,
            &ni,
            buf.as_mut_ptr() as *mut _,
            &ni,
            &mut sdim,
            w.as_mut_ptr() as *mut _,
            vs.as_mut_ptr() as *mut _,
            &ni,
            &mut query as *mut C64 as *mut _,
            &lwork_query,
            rwork.as_mut_ptr(),
            bwork.as_mut_ptr(),
            &mut info,
        );
    }
    let lwork = (query.re as i32).max(2 * n as i32);
    let mut work = vec![C64::new(0.0, 0.0); lwork as usize];
    unsafe {
        lapack_sys::zgees_(
            &jobvs,
            &sort,
            None,
            &ni,
            buf.as_mut_ptr() as *mut _,
            &ni,
            &mut sdim,
            w.as_mut_ptr() as *mut _,
            vs.as_mut_ptr() as *mut _,
            &ni,
            work.as_mut_ptr() as *mut _,
            &lwork,
            rwork.as_mut_ptr(),
            bwork.as_mut_ptr(),
            &mut info,
        );
    }
    if info != 0 {
        return Err(Error::Linalg(format!("zgees failed with info = {info}")));
    }
    let t = Array2::from_shape_vec((n, n), buf).expect("shape").reversed_axes();
    let z = Array2::from_shape_vec((n, n), vs).expect("shape").reversed_axes();
    Ok((t.as_standard_layout().to_owned(), z.as_standard_layout().to_owned()))
}

fn sylvester_residual(a: &Array2<C64>, b: &Array2<C64>, c: &Array2<C64>, x: &Array2<C64>) -> Array2<C64> {
    a.dot(x) + x.dot(b) + c
}

fn sylvester_kronecker(a: &Array2<C64>, b: &Array2<C64>, c: &Array2<C64>) -> Result<Array2<C64>> {
    let (m, k) = (a.nrows(), b.nrows());
    let mk = m * k;
    let mut kr = Array2::<C64>::zeros((mk, mk));
    for j in 0..k {
        for i in 0..m {
            let row = i + j * m;
            for p in 0..m {
                kr[[row, p + j * m]] += a[[i, p]];
            }
            for q in 0..k {
                kr[[row, i + q * m]] += b[[q, j]];
            }
        }
    }
    let mut rhs = Array1::<C64>::zeros(mk);
    for j in 0..k {
        for i in 0..m {
            rhs[i + j * m] = -c[[i, j]];
        }
    }
    let lu = kr.factorize_into().map_err(|_| Error::SpectraOverlap)?;
    let rc = lu.rcond().map_err(|_| Error::SpectraOverlap)?;
    if rc.is_nan() || rc <= 10.0 * f64::EPSILON {
        return Err(Error::SpectraOverlap);
    }
    let v = lu.solve_into(rhs).map_err(|_| Error::SpectraOverlap)?;
    let mut x = Array2::zeros((m, k));
    for j in 0..k {
        for i in 0..m {
            x[[i, j]] = v[i + j * m];
        }
    }
    Ok(x)
}

/// Solves T1·Y + Y·T2 + F = 0 with T1, T2 upper triangular.
fn sylvester_triangular(t1: &Array2<C64>, t2: &Array2<C64>, f: &Array2<C64>) -> Result<Array2<C64>> {
    let (m, k) = (t1.nrows(), t2.nrows());
    let scale = fro_c(t1) + fro_c(t2);
    let tiny = 1e3 * f64::EPSILON * scale.max(f64::MIN_POSITIVE);
    let mut y = Array2::<C64>::zeros((m, k));
    for j in 0..k {
        let mut rhs: Array1<C64> = f.column(j).mapv(|v| -v);
        for i in 0..j {
            let coef = t2[[i, j]];
            if coef != C64::new(0.0, 0.0) {
                let yi = y.column(i).to_owned();
                rhs.scaled_add(-coef, &yi);
            }
        }
        let shift = t2[[j, j]];
        for r in (0..m).rev() {
            let mut s = rhs[r];
            for c in r + 1..m {
                s -= t1[[r, c]] * y[[c, j]];
            }
            let d = t1[[r, r]] + shift;
            if d.norm() <= tiny {
                return Err(Error::SpectraOverlap);
            }
            y[[r, j]] = s / d;
        }
    }
    Ok(y)
}

fn sylvester_schur(a: &Array2<C64>, b: &Array2<C64>, c: &Array2<C64>) -> Result<Array2<C64>> {
    let (t1, z1) = complex_schur(a)?;
    let (t2, z2) = complex_schur(b)?;
    let f = conj_t(&z1).dot(c).dot(&z2);
    let y = sylvester_triangular(&t1, &t2, &f)?;
    Ok(z1.dot(&y).dot(&conj_t(&z2)))
}

/// Solves A·X + X·B + C = 0 (complex).
pub fn solve_dense_sylvester(a: &Array2<C64>, b: &Array2<C64>, c: &Array2<C64>) -> Result<Array2<C64>> {
    let (m, k) = (a.nrows(), b.nrows());
    if a.ncols() != m || b.ncols() != k || c.dim() != (m, k) {
        return Err(Error::DimensionMismatch(format!(
            "Sylvester shapes A {:?}, B {:?}, C {:?}",
            a.dim(),
            b.dim(),
            c.dim()
        )));
    }
    if m == 0 || k == 0 {
        return Ok(Array2::zeros((m, k)));
    }
    let solver = |cc: &Array2<C64>| {
        if m * k <= KRONECKER_LIMIT {
            sylvester_kronecker(a, b, cc)
        } else {
            sylvester_schur(a, b, cc)
        }
    };
    let mut x = solver(c)?;
    // One step of refinement tightens the residual for moderately conditioned problems.
    let r = sylvester_residual(a, b, c, &x);
    let bound = 1e-12 * (fro_c(a) * fro_c(&x) + fro_c(&x) * fro_c(b) + fro_c(c));
    if fro_c(&r) > bound {
        let dx = solver(&r)?;
        let x2 = &x + &dx;
        if fro_c(&sylvester_residual(a, b, c, &x2)) < fro_c(&r) {
            x = x2;
        }
    }
    if x.iter().any(|v| !v.re.is_finite() || !v.im.is_finite()) {
        return Err(Error::SpectraOverlap);
    }
    Ok(x)
}

/// Real Sylvester equation A·X + X·B + C = 0; the solution is real.
pub fn solve_dense_sylvester_real(a: &Array2<f64>, b: &Array2<f64>, c: &Array2<f64>) -> Result<Array2<f64>> {
    Ok(real_part(&solve_dense_sylvester(
        &to_complex(a),
        &to_complex(b),
        &to_complex(c),
    )?))
}

/// Relative residual in the norm used by the Sylvester contract.
pub fn sylvester_relative_residual(a: &Array2<C64>, b: &Array2<C64>, c: &Array2<C64>, x: &Array2<C64>) -> f64 {
    let r = sylvester_residual(a, b, c, x);
    fro_c(&r) / (fro_c(a) * fro_c(x) + fro_c(x) * fro_c(b) + fro_c(c)).max(f64::MIN_POSITIVE)
}

/// Eigenvalues of a square complex matrix.
pub fn eigenvalues(a: &Array2<C64>) -> Result<Vec<C64>> {
    use ndarray_linalg::EigVals;
    if a.nrows() == 0 {
        return Ok(Vec::new());
    }
    Ok(lapack_layout(a).eigvals()?.to_vec())
}

/// Solves S*·Γ + Γ·S − R*·R = 0 for Hermitian positive definite Γ.
pub fn solve_small_lyapunov(s: &Array2<C64>, r: &Array2<C64>) -> Result<Array2<C64>> {
    let q = s.nrows();
    if s.ncols() != q || r.ncols() != q {
        return Err(Error::DimensionMismatch("Lyapunov shapes".into()));
    }
    let eig = eigenvalues(s)?;
    if eig.iter().any(|l| l.re.is_nan() || l.re <= 0.0) {
        return Err(Error::NotAntistable);
    }
    let sh = conj_t(s);
    let rr = conj_t(r).dot(r).mapv(|v| -v);
    let g = solve_dense_sylvester(&sh, s, &rr)?;
    let g = (&g + &conj_t(&g)).mapv(|v| v * 0.5);
    use ndarray_linalg::{Cholesky, UPLO};
    g.cholesky(UPLO::Lower)
        .map_err(|_| Error::Linalg("Gramian is not positive definite: (-S*, R*) not controllable".into()))?;
    Ok(g)
}

/// Real variant of [`solve_small_lyapunov`].
pub fn solve_small_lyapunov_real(s: &Array2<f64>, r: &Array2<f64>) -> Result<Array2<f64>> {
    Ok(real_part(&solve_small_lyapunov(&to_complex(s), &to_complex(r))?))
}

/// Eigenvalue of a pencil: `None` marks an infinite eigenvalue.
#[derive(Clone, Debug)]
pub struct PencilEigen {
    pub value: Option<C64>,
    pub vector: Array1<C64>,
}

/// Default magnitude above which a balanced eigenvalue is reported infinite.
pub fn default_infinite_cutoff() -> f64 {
    1.0 / f64::EPSILON.sqrt()
}

/// Generalized eigenvalues of λE − A with the default infinity cutoff.
pub fn eig_pencil_dense(e: &Array2<f64>, a: &Array2<f64>) -> Result<Vec<PencilEigen>> {
    eig_pencil_dense_with_cutoff(e, a, default_infinite_cutoff())
}

/// Smallest singular value of A − λE relative to ‖A‖ + |λ|·‖E‖ at a few
/// random probe points; zero everywhere means the pencil is singular.
fn pencil_is_singular(e: &Array2<f64>, a: &Array2<f64>) -> Result<bool> {
    let n = a.nrows();
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
    let scale_a = fro(a);
    let scale_e = fro(e);
    let mut singular = true;
    for _ in 0..3 {
        let lam = rng.gen_range(-2.0..2.0) * (scale_a / scale_e.max(f64::MIN_POSITIVE)).max(1e-300);
        let m = a - &(e * lam);
        let (_, sv, _) = lapack_layout(&m).svd(false, false)?;
        let smin = sv[n - 1];
        if smin > 1e3 * f64::EPSILON * (scale_a + lam.abs() * scale_e) * (n as f64) {
            singular = false;
            break;
        }
    }
    Ok(singular)
}

/// Generalized eigenvalues with a configurable cutoff. The pencil is
/// balanced by scaling E and A to unit Frobenius norm; eigenvalues whose
/// balanced magnitude exceeds `cutoff` are reported infinite.
pub fn eig_pencil_dense_with_cutoff(e: &Array2<f64>, a: &Array2<f64>, cutoff: f64) -> Result<Vec<PencilEigen>> {
    let n = a.nrows();
    if a.ncols() != n || e.dim() != a.dim() {
        return Err(Error::DimensionMismatch("pencil shapes".into()));
    }
    if n == 0 {
        return Ok(Vec::new());
    }
    let na = fro(a);
    let ne = fro(e);
    if na == 0.0 || pencil_is_singular(e, a)? {
        return Err(Error::SingularPencil);
    }
    if ne == 0.0 {
        return Ok((0..n)
            .map(|i| {
                let mut v = Array1::zeros(n);
                v[i] = C64::new(1.0, 0.0);
                PencilEigen { value: None, vector: v }
            })
            .collect());
    }
    let ab = a / na;
    let eb = e / ne;
    let (vals, vecs) = (lapack_layout(&ab), lapack_layout(&eb)).eig_generalized(None)?;
    let mut out = Vec::with_capacity(n);
    for (i, gv) in vals.iter().enumerate() {
        let (alpha, beta) = match gv {
            GeneralizedEigenvalue::Finite(_, ab) => *ab,
            GeneralizedEigenvalue::Indeterminate(ab) => *ab,
        };
        if alpha.norm() < 1e3 * f64::EPSILON && beta.norm() < 1e3 * f64::EPSILON {
            return Err(Error::SingularPencil);
        }
        let v = vecs.column(i).to_owned();
        let value = if beta.norm() * cutoff < alpha.norm() {
            None
        } else {
            Some(alpha / beta * (na / ne))
        };
        out.push(PencilEigen { value, vector: v });
    }
    Ok(out)
}

/// Orthonormal basis of the column range and of the null space of a real
/// matrix, split at the given rank.
pub fn range_and_kernel(m: &Array2<f64>, rank: usize) -> Result<(Array2<f64>, Array2<f64>)> {
    let (u, _, vt) = lapack_layout(m).svd(true, true)?;
    let u = u.ok_or_else(|| Error::Linalg("SVD without U".into()))?;
    let vt = vt.ok_or_else(|| Error::Linalg("SVD without Vt".into()))?;
    let n = m.ncols();
    let range = u.slice(s![.., ..rank]).to_owned();
    let kernel = vt.slice(s![rank.., ..]).t().to_owned();
    debug_assert_eq!(kernel.ncols(), n - rank);
    Ok((range, kernel))
}

pub fn singular_values(m: &Array2<f64>) -> Result<Array1<f64>> {
    let (_, sv, _) = lapack_layout(m).svd(false, false)?;
    Ok(sv)
}

pub fn inverse(m: &Array2<f64>) -> Result<Array2<f64>> {
    Ok(lapack_layout(m).inv()?)
}

pub fn inverse_c(m: &Array2<C64>) -> Result<Array2<C64>> {
    Ok(lapack_layout(m).inv()?)
}

/// Relative residual of a dense LU solve on a fixed well-conditioned 48×48
/// matrix. A value far above machine precision means the linked LAPACK is
/// miscomputing (seen with some OpenBLAS kernel selections).
pub fn lapack_self_check() -> f64 {
    let n = 48;
    let m = Array2::from_shape_fn((n, n), |(i, j)| {
        0.1 * (1.7 * i as f64 + 0.3 * j as f64).sin() + if i == j { 3.0 } else { 0.0 }
    });
    match inverse(&m) {
        Ok(inv) => {
            let r = m.dot(&inv) - Array2::<f64>::eye(n);
            r.iter().fold(0.0, |acc, v| acc.max(v.abs()))
        }
        Err(_) => f64::INFINITY,
    }
}

/// Solves M·X = B for dense real M.
pub fn solve_many(m: &Array2<f64>, b: &Array2<f64>) -> Result<Array2<f64>> {
    let lu = lapack_layout(m).factorize()?;
    let mut x = Array2::zeros(b.dim());
    for j in 0..b.ncols() {
        let col = lu.solve(&b.column(j).to_owned())?;
        x.column_mut(j).assign(&col);
    }
    Ok(x)
}

/// Solves M·X = B for dense complex M.
pub fn solve_many_c(m: &Array2<C64>, b: &Array2<C64>) -> Result<Array2<C64>> {
    let lu = lapack_layout(m).factorize()?;
    let mut x = Array2::zeros(b.dim());
    for j in 0..b.ncols() {
        let col = lu.solve(&b.column(j).to_owned())?;
        x.column_mut(j).assign(&col);
    }
    Ok(x)
}

/// Block-diagonal concatenation.
pub fn block_diag(blocks: &[ArrayView2<f64>]) -> Array2<f64> {
    let r: usize = blocks.iter().map(|b| b.nrows()).sum();
    let c: usize = blocks.iter().map(|b| b.ncols()).sum();
    let mut out = Array2::zeros((r, c));
    let (mut i, mut j) = (0, 0);
    for b in blocks {
        out.slice_mut(s![i..i + b.nrows(), j..j + b.ncols()]).assign(b);
        i += b.nrows();
        j += b.ncols();
    }
    out
}
