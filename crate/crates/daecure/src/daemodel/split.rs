//! Dense decoupling of a regular pencil into finite and infinite parts.
//!
//! Right deflating subspaces are read off M = (A − μE)⁻¹E at a point μ in
//! the right half-plane: the finite subspace is the range of a power of M,
//! the infinite subspace its kernel. Mapping both through (A − μE) gives the
//! matching left subspaces. In the adapted bases the pencil becomes block
//! diagonal without ever forming a Weierstrass canonical form.

use ndarray::{s, Array2};

use crate::error::{Error, Result};
use crate::numkernel::dense::{eig_pencil_dense, fro, inverse, range_and_kernel, singular_values, solve_many};

/// Largest dimension handled by dense oracles.
pub const DESK_LIMIT: usize = 500;

#[derive(Clone, Debug)]
pub struct DenseSplit {
    pub n_f: usize,
    /// Right basis [finite | infinite].
    pub z: Array2<f64>,
    /// Left basis [finite | infinite].
    pub l: Array2<f64>,
    pub e_f: Array2<f64>,
    pub a_f: Array2<f64>,
    pub e_inf: Array2<f64>,
    pub a_inf: Array2<f64>,
    z_inv: Array2<f64>,
    l_inv: Array2<f64>,
}

impl DenseSplit {
    pub fn new(e: &Array2<f64>, a: &Array2<f64>) -> Result<Self> {
        let n = a.nrows();
        if n > DESK_LIMIT {
            return Err(Error::ScaleLimit { n, limit: DESK_LIMIT });
        }
        if e.dim() != (n, n) || a.dim() != (n, n) {
            return Err(Error::DimensionMismatch("pencil shapes".into()));
        }
        if n == 0 {
            let z = Array2::zeros((0, 0));
            return Ok(DenseSplit {
                n_f: 0,
                z: z.clone(),
                l: z.clone(),
                e_f: z.clone(),
                a_f: z.clone(),
                e_inf: z.clone(),
                a_inf: z.clone(),
                z_inv: z.clone(),
                l_inv: z,
            });
        }
        let ne = fro(e);
        let na = fro(a);
        let sv_e = singular_values(e)?;
        if ne > 0.0 && sv_e[n - 1] > 1e-12 * sv_e[0] {
            // Nonsingular E: everything is finite.
            let eye = Array2::eye(n);
            return Ok(DenseSplit {
                n_f: n,
                z: eye.clone(),
                l: eye.clone(),
                e_f: e.clone(),
                a_f: a.clone(),
                e_inf: Array2::zeros((0, 0)),
                a_inf: Array2::zeros((0, 0)),
                z_inv: eye.clone(),
                l_inv: eye,
            });
        }
        let n_f_qz = eig_pencil_dense(e, a)?.iter().filter(|p| p.value.is_some()).count();
        let mu = 1.1 * na / ne.max(f64::MIN_POSITIVE) + 1.0;
        let shifted = a - &(e * mu);
        let m = solve_many(&shifted, e)? * mu;
        let (n_f, power) = finite_rank(&m, n_f_qz)?;
        if n_f == n {
            return Err(Error::Linalg(
                "E is singular but no infinite eigenvalues were found".into(),
            ));
        }
        let (u_f, ker) = range_and_kernel(&power, n_f)?;
        let mut z = Array2::zeros((n, n));
        z.slice_mut(s![.., ..n_f]).assign(&u_f);
        z.slice_mut(s![.., n_f..]).assign(&ker);
        let l = shifted.dot(&z);
        let z_inv = inverse(&z)?;
        let l_inv = inverse(&l)?;
        let eh = l_inv.dot(e).dot(&z);
        let ah = l_inv.dot(a).dot(&z);
        Ok(DenseSplit {
            n_f,
            e_f: eh.slice(s![..n_f, ..n_f]).to_owned(),
            a_f: ah.slice(s![..n_f, ..n_f]).to_owned(),
            e_inf: eh.slice(s![n_f.., n_f..]).to_owned(),
            a_inf: ah.slice(s![n_f.., n_f..]).to_owned(),
            z,
            l,
            z_inv,
            l_inv,
        })
    }

    pub fn n(&self) -> usize {
        self.z.nrows()
    }

    /// Right finite spectral projector Z·diag(I, 0)·Z⁻¹.
    pub fn right_projector(&self) -> Array2<f64> {
        let nf = self.n_f;
        self.z.slice(s![.., ..nf]).dot(&self.z_inv.slice(s![..nf, ..]))
    }

    /// Left finite spectral projector L·diag(I, 0)·L⁻¹.
    pub fn left_projector(&self) -> Array2<f64> {
        let nf = self.n_f;
        self.l.slice(s![.., ..nf]).dot(&self.l_inv.slice(s![..nf, ..]))
    }

    /// Input matrix in the decoupled coordinates: (finite rows, infinite rows).
    pub fn split_input(&self, b: &Array2<f64>) -> (Array2<f64>, Array2<f64>) {
        let bh = self.l_inv.dot(b);
        (
            bh.slice(s![..self.n_f, ..]).to_owned(),
            bh.slice(s![self.n_f.., ..]).to_owned(),
        )
    }

    /// Output matrix in the decoupled coordinates: (finite cols, infinite cols).
    pub fn split_output(&self, c: &Array2<f64>) -> (Array2<f64>, Array2<f64>) {
        let ch = c.dot(&self.z);
        (
            ch.slice(s![.., ..self.n_f]).to_owned(),
            ch.slice(s![.., self.n_f..]).to_owned(),
        )
    }

    /// Maps a block living on the finite coordinates back: Z_f·X·Z_Hfᵀ style
    /// products are left to callers; this gives the right finite basis.
    pub fn right_finite_basis(&self) -> Array2<f64> {
        self.z.slice(s![.., ..self.n_f]).to_owned()
    }

    pub fn left_inverse_finite_rows(&self) -> Array2<f64> {
        self.l_inv.slice(s![..self.n_f, ..]).to_owned()
    }
}

/// Numerical rank with a relative cutoff.
fn numeric_rank(m: &Array2<f64>) -> Result<usize> {
    let sv = singular_values(m)?;
    if sv.is_empty() || sv[0] == 0.0 {
        return Ok(0);
    }
    Ok(sv.iter().filter(|&&x| x > 1e-10 * sv[0]).count())
}

/// The finite part has the dimension at which rank(Mᵏ) stabilizes; the
/// infinite part of M is nilpotent. The QZ count only breaks ties.
fn finite_rank(m: &Array2<f64>, hint: usize) -> Result<(usize, Array2<f64>)> {
    let n = m.nrows();
    let mut power = m.clone();
    let mut prev = numeric_rank(&power)?;
    for _ in 0..=n {
        let mut next = power.dot(m);
        let top = fro(&next);
        if top > 0.0 {
            next.mapv_inplace(|v| v / top);
        }
        let r = numeric_rank(&next)?;
        if r == prev {
            if r != hint {
                log::debug!("finite dimension {r} differs from the QZ count {hint}");
            }
            return Ok((r, next));
        }
        prev = r;
        power = next;
    }
    Err(Error::Linalg(
        "could not separate finite and infinite deflating subspaces".into(),
    ))
}
