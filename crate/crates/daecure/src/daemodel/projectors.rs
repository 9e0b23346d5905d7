//! Finite spectral projectors applied as maps, never as dense matrices
//! (except for the desk-scale unstructured case).
//!
//! Semi-explicit index 1: with K = [[E11, E12], [A21, A22]] (the top rows of
//! E stacked on the bottom rows of A) the Schur complement
//! S = A22 − A21·E11⁻¹·E12 is never formed; every projector needs one solve
//! with K or Kᵀ.
//!
//! Stokes-like index 2: with the saddle matrix [[E11, A12], [A21, 0]] the
//! operator Θ = I − E11⁻¹A12(A21E11⁻¹A12)⁻¹A21 and its relatives need one
//! saddle solve each; every projector needs two.

use ndarray::{Array1, Array2};
use num_complex::Complex64;

use super::split::DenseSplit;
use super::{DaeSystem, StructureTag};
use crate::error::{Error, Result};
use crate::numkernel::shifted::RealFactorization;
use crate::numkernel::SparseMatrix;

#[derive(Clone, Debug)]
enum Kind {
    Index1 {
        n1: usize,
        k: RealFactorization,
        a_top: SparseMatrix,
        a_bot: SparseMatrix,
    },
    Stokes {
        n_v: usize,
        saddle: RealFactorization,
        e11: SparseMatrix,
        a11: SparseMatrix,
        a12: SparseMatrix,
        a21: SparseMatrix,
    },
    Dense {
        pl: Array2<f64>,
        pr: Array2<f64>,
    },
}

/// Left and right finite spectral projectors and their transposes.
#[derive(Clone, Debug)]
pub struct ProjectorKit {
    n: usize,
    kind: Kind,
}

fn solve_failed(what: &str) -> Error {
    Error::SingularSchurComplement(format!("solve with {what} failed"))
}

impl ProjectorKit {
    /// Builds the projector maps and eagerly factors the blocks they need.
    pub fn build(sys: &DaeSystem) -> Result<Self> {
        let n = sys.n();
        let kind = match *sys.structure() {
            StructureTag::SemiExplicitIndex1 { n1 } => {
                let e11 = sys.e().block(0, n1, 0, n1);
                if n1 > 0 && RealFactorization::new(&e11).is_none() {
                    return Err(Error::StructureViolation("E11 is singular".into()));
                }
                let e_top = sys.e().block(0, n1, 0, n);
                let a_bot = sys.a().block(n1, n, 0, n);
                let kmat = SparseMatrix::vstack(&e_top, &a_bot)?;
                let k = RealFactorization::new(&kmat)
                    .ok_or_else(|| Error::SingularSchurComplement("A22 - A21*inv(E11)*E12 is singular".into()))?;
                Kind::Index1 {
                    n1,
                    k,
                    a_top: sys.a().block(0, n1, 0, n),
                    a_bot,
                }
            }
            StructureTag::StokesIndex2 { n_v, n_p } => {
                let e11 = sys.e().block(0, n_v, 0, n_v);
                if RealFactorization::new(&e11).is_none() {
                    return Err(Error::StructureViolation("E11 is singular".into()));
                }
                let a11 = sys.a().block(0, n_v, 0, n_v);
                let a12 = sys.a().block(0, n_v, n_v, n);
                let a21 = sys.a().block(n_v, n, 0, n_v);
                let saddle = SparseMatrix::from_blocks(&e11, &a12, &a21, &SparseMatrix::zeros(n_p, n_p))?;
                let saddle = RealFactorization::new(&saddle)
                    .ok_or_else(|| Error::SingularSchurComplement("A21*inv(E11)*A12 is singular".into()))?;
                Kind::Stokes {
                    n_v,
                    saddle,
                    e11,
                    a11,
                    a12,
                    a21,
                }
            }
            StructureTag::GeneralDense => {
                let (e, a, _, _) = sys.to_dense()?;
                let sp = DenseSplit::new(&e, &a)?;
                Kind::Dense {
                    pl: sp.left_projector(),
                    pr: sp.right_projector(),
                }
            }
        };
        Ok(ProjectorKit { n, kind })
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    /// Π_l^f·y
    pub fn apply_pl(&self, y: &[f64]) -> Result<Vec<f64>> {
        self.check(y)?;
        match &self.kind {
            Kind::Index1 { n1, k, a_top, .. } => {
                let n1 = *n1;
                let mut rhs = vec![0.0; self.n];
                rhs[n1..].copy_from_slice(&y[n1..]);
                let pw = k.solve(&rhs).ok_or_else(|| solve_failed("K"))?;
                let corr = a_top.mul_vec(&pw);
                let mut out = vec![0.0; self.n];
                for i in 0..n1 {
                    out[i] = y[i] - corr[i];
                }
                Ok(out)
            }
            Kind::Stokes {
                n_v, saddle, a11, a12, ..
            } => {
                let nv = *n_v;
                let mut rhs = vec![0.0; self.n];
                for i in nv..self.n {
                    rhs[i] = -y[i];
                }
                let zq = saddle.solve(&rhs).ok_or_else(|| solve_failed("saddle"))?;
                let a11z = a11.mul_vec(&zq[..nv]);
                let r: Vec<f64> = (0..nv).map(|i| y[i] + a11z[i]).collect();
                let mut rhs2 = vec![0.0; self.n];
                rhs2[..nv].copy_from_slice(&r);
                let zq2 = saddle.solve(&rhs2).ok_or_else(|| solve_failed("saddle"))?;
                let a12q = a12.mul_vec(&zq2[nv..]);
                let mut out = vec![0.0; self.n];
                for i in 0..nv {
                    out[i] = r[i] - a12q[i];
                }
                Ok(out)
            }
            Kind::Dense { pl, .. } => Ok(pl.dot(&Array1::from(y.to_vec())).to_vec()),
        }
    }

    /// (Π_l^f)ᵀ·z
    pub fn apply_pl_t(&self, z: &[f64]) -> Result<Vec<f64>> {
        self.check(z)?;
        match &self.kind {
            Kind::Index1 { n1, k, a_top, .. } => {
                let n1 = *n1;
                let rhs = a_top.tr_mul_vec(&z[..n1]);
                let pw = k.solve_transpose(&rhs).ok_or_else(|| solve_failed("K^T"))?;
                let mut out = vec![0.0; self.n];
                out[..n1].copy_from_slice(&z[..n1]);
                for i in n1..self.n {
                    out[i] = -pw[i];
                }
                Ok(out)
            }
            Kind::Stokes {
                n_v, saddle, e11, a11, ..
            } => {
                let nv = *n_v;
                let mut rhs = vec![0.0; self.n];
                rhs[..nv].copy_from_slice(&e11.tr_mul_vec(&z[..nv]));
                let u = saddle.solve_transpose(&rhs).ok_or_else(|| solve_failed("saddle^T"))?;
                let u = &u[..nv];
                let mut rhs2 = vec![0.0; self.n];
                rhs2[..nv].copy_from_slice(&a11.tr_mul_vec(u));
                let zq2 = saddle.solve_transpose(&rhs2).ok_or_else(|| solve_failed("saddle^T"))?;
                let mut out = vec![0.0; self.n];
                out[..nv].copy_from_slice(u);
                for i in nv..self.n {
                    out[i] = -zq2[i];
                }
                Ok(out)
            }
            Kind::Dense { pl, .. } => Ok(pl.t().dot(&Array1::from(z.to_vec())).to_vec()),
        }
    }

    /// Π_r^f·x
    pub fn apply_pr(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.check(x)?;
        match &self.kind {
            Kind::Index1 { n1, k, a_bot, .. } => {
                let n1 = *n1;
                let mut rhs = vec![0.0; self.n];
                rhs[n1..].copy_from_slice(&a_bot.mul_vec(x));
                let pw = k.solve(&rhs).ok_or_else(|| solve_failed("K"))?;
                Ok(x.iter().zip(&pw).map(|(a, b)| a - b).collect())
            }
            Kind::Stokes {
                n_v, saddle, e11, a11, ..
            } => {
                let nv = *n_v;
                let mut rhs = vec![0.0; self.n];
                rhs[..nv].copy_from_slice(&e11.mul_vec(&x[..nv]));
                let u = saddle.solve(&rhs).ok_or_else(|| solve_failed("saddle"))?;
                let u = &u[..nv];
                let mut rhs2 = vec![0.0; self.n];
                rhs2[..nv].copy_from_slice(&a11.mul_vec(u));
                let zq2 = saddle.solve(&rhs2).ok_or_else(|| solve_failed("saddle"))?;
                let mut out = vec![0.0; self.n];
                out[..nv].copy_from_slice(u);
                for i in nv..self.n {
                    out[i] = -zq2[i];
                }
                Ok(out)
            }
            Kind::Dense { pr, .. } => Ok(pr.dot(&Array1::from(x.to_vec())).to_vec()),
        }
    }

    /// (Π_r^f)ᵀ·y
    pub fn apply_pr_t(&self, y: &[f64]) -> Result<Vec<f64>> {
        self.check(y)?;
        match &self.kind {
            Kind::Index1 { k, a_bot, .. } => {
                let pw = k.solve_transpose(y).ok_or_else(|| solve_failed("K^T"))?;
                let n1 = self.n - a_bot.n_rows();
                let corr = a_bot.tr_mul_vec(&pw[n1..]);
                Ok(y.iter().zip(&corr).map(|(a, b)| a - b).collect())
            }
            Kind::Stokes {
                n_v, saddle, a11, a21, ..
            } => {
                let nv = *n_v;
                let mut rhs = vec![0.0; self.n];
                for i in nv..self.n {
                    rhs[i] = -y[i];
                }
                let zq = saddle.solve_transpose(&rhs).ok_or_else(|| solve_failed("saddle^T"))?;
                let a11z = a11.tr_mul_vec(&zq[..nv]);
                let c: Vec<f64> = (0..nv).map(|i| y[i] + a11z[i]).collect();
                let mut rhs2 = vec![0.0; self.n];
                rhs2[..nv].copy_from_slice(&c);
                let zq2 = saddle.solve_transpose(&rhs2).ok_or_else(|| solve_failed("saddle^T"))?;
                let a21q = a21.tr_mul_vec(&zq2[nv..]);
                let mut out = vec![0.0; self.n];
                for i in 0..nv {
                    out[i] = c[i] - a21q[i];
                }
                Ok(out)
            }
            Kind::Dense { pr, .. } => Ok(pr.t().dot(&Array1::from(y.to_vec())).to_vec()),
        }
    }

    fn check(&self, v: &[f64]) -> Result<()> {
        if v.len() != self.n {
            return Err(Error::DimensionMismatch(format!(
                "projector of size {} applied to a vector of length {}",
                self.n,
                v.len()
            )));
        }
        Ok(())
    }

    /// Applies a real map to a complex vector by linearity.
    pub fn apply_complex(
        &self,
        v: &[Complex64],
        f: impl Fn(&Self, &[f64]) -> Result<Vec<f64>>,
    ) -> Result<Vec<Complex64>> {
        let re: Vec<f64> = v.iter().map(|z| z.re).collect();
        let im: Vec<f64> = v.iter().map(|z| z.im).collect();
        let a = f(self, &re)?;
        let b = f(self, &im)?;
        Ok(a.into_iter().zip(b).map(|(x, y)| Complex64::new(x, y)).collect())
    }

    /// Π_l^f·B for every column of B.
    pub fn project_input(&self, b: &SparseMatrix) -> Result<Array2<f64>> {
        let mut out = Array2::zeros((self.n, b.n_cols()));
        for j in 0..b.n_cols() {
            let col = self.apply_pl(b.column(j).as_slice().expect("contiguous"))?;
            out.column_mut(j).assign(&Array1::from(col));
        }
        Ok(out)
    }

    /// C·Π_r^f, returned as a p×n dense matrix.
    pub fn project_output(&self, c: &SparseMatrix) -> Result<Array2<f64>> {
        let ct = c.transpose();
        let mut out = Array2::zeros((c.n_rows(), self.n));
        for i in 0..c.n_rows() {
            let row = self.apply_pr_t(ct.column(i).as_slice().expect("contiguous"))?;
            out.row_mut(i).assign(&Array1::from(row));
        }
        Ok(out)
    }
}
