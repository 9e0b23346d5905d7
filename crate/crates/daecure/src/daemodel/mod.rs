//! Descriptor systems E·x' = A·x + B·u, y = C·x + D·u: structure
//! classification, implicit spectral projectors, transfer evaluation.

mod projectors;
pub mod split;
mod transfer;

use ndarray::Array2;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numkernel::dense::fro;
use crate::numkernel::shifted::{factor_shifted_ordered, pencil_ordering, ShiftedFactorization};
use crate::numkernel::SparseMatrix;

pub use projectors::ProjectorKit;
pub use split::{DenseSplit, DESK_LIMIT};
pub use transfer::{eval_strictly_proper, eval_transfer, polynomial_part, realize_constant_poly, PolyPart};

/// Block structure of a descriptor system.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum StructureTag {
    /// E = [[E11, E12], [0, 0]] with an n1×n1 differential block.
    SemiExplicitIndex1 { n1: usize },
    /// E = [[E11, 0], [0, 0]], A = [[A11, A12], [A21, 0]] (velocity, pressure).
    StokesIndex2 { n_v: usize, n_p: usize },
    /// Unstructured; handled by dense oracles up to the desk limit.
    GeneralDense,
}

#[derive(Clone, Debug)]
pub struct DaeSystem {
    e: SparseMatrix,
    a: SparseMatrix,
    b: SparseMatrix,
    c: SparseMatrix,
    d: Array2<f64>,
    structure: StructureTag,
    n_f: usize,
    ordering: Vec<usize>,
}

impl DaeSystem {
    /// Validates shapes, declared zero blocks and regularity.
    pub fn new(
        e: SparseMatrix,
        a: SparseMatrix,
        b: SparseMatrix,
        c: SparseMatrix,
        d: Option<Array2<f64>>,
        structure: StructureTag,
    ) -> Result<Self> {
        let n = a.n_rows();
        if a.shape() != (n, n) || e.shape() != (n, n) {
            return Err(Error::DimensionMismatch(format!(
                "E is {:?} and A is {:?}; both must be square and equal",
                e.shape(),
                a.shape()
            )));
        }
        if b.n_rows() != n {
            return Err(Error::DimensionMismatch(format!(
                "B has {} rows, expected {n}",
                b.n_rows()
            )));
        }
        if c.n_cols() != n {
            return Err(Error::DimensionMismatch(format!(
                "C has {} columns, expected {n}",
                c.n_cols()
            )));
        }
        let (p, m) = (c.n_rows(), b.n_cols());
        let d = d.unwrap_or_else(|| Array2::zeros((p, m)));
        if d.dim() != (p, m) {
            return Err(Error::DimensionMismatch(format!(
                "D is {:?}, expected {:?}",
                d.dim(),
                (p, m)
            )));
        }
        let n_f = match &structure {
            StructureTag::SemiExplicitIndex1 { n1 } => {
                let n1 = *n1;
                if n1 > n {
                    return Err(Error::StructureViolation(format!(
                        "block size n1 = {n1} exceeds n = {n}"
                    )));
                }
                if !e.block(n1, n, 0, n).is_zero() {
                    return Err(Error::StructureViolation("E21/E22 (rows below n1) must be zero".into()));
                }
                n1
            }
            StructureTag::StokesIndex2 { n_v, n_p } => {
                let (nv, np) = (*n_v, *n_p);
                if nv + np != n {
                    return Err(Error::StructureViolation(format!(
                        "block sizes n_v + n_p = {} do not match n = {n}",
                        nv + np
                    )));
                }
                if np > nv {
                    return Err(Error::StructureViolation("n_p exceeds n_v".into()));
                }
                if !e.block(0, nv, nv, n).is_zero() {
                    return Err(Error::StructureViolation("E12 must be zero".into()));
                }
                if !e.block(nv, n, 0, n).is_zero() {
                    return Err(Error::StructureViolation("E21/E22 must be zero".into()));
                }
                if !a.block(nv, n, nv, n).is_zero() {
                    return Err(Error::StructureViolation("A22 must be zero".into()));
                }
                nv - np
            }
            StructureTag::GeneralDense => {
                if n > DESK_LIMIT {
                    return Err(Error::ScaleLimit { n, limit: DESK_LIMIT });
                }
                DenseSplit::new(&e.to_dense(), &a.to_dense())?.n_f
            }
        };
        let ordering = pencil_ordering(&a, &e);
        let sys = DaeSystem {
            e,
            a,
            b,
            c,
            d,
            structure,
            n_f,
            ordering,
        };
        sys.check_regular()?;
        Ok(sys)
    }

    /// A generic point off the real axis, scaled to the pencil.
    fn check_regular(&self) -> Result<()> {
        let n = self.n();
        if n == 0 {
            return Ok(());
        }
        let scale = self.a.frobenius_norm() / self.e.frobenius_norm().max(f64::MIN_POSITIVE);
        let scale = if scale.is_finite() && scale > 0.0 { scale } else { 1.0 };
        let probes = [
            Complex64::new(0.6180339887, 0.7303549963),
            Complex64::new(-0.3141592654, 1.3782494324),
        ];
        for p in probes {
            if self.factor(p * scale).is_ok() {
                return Ok(());
            }
        }
        Err(Error::SingularPencil)
    }

    pub fn n(&self) -> usize {
        self.a.n_rows()
    }

    pub fn m(&self) -> usize {
        self.b.n_cols()
    }

    pub fn p(&self) -> usize {
        self.c.n_rows()
    }

    pub fn n_f(&self) -> usize {
        self.n_f
    }

    pub fn e(&self) -> &SparseMatrix {
        &self.e
    }

    pub fn a(&self) -> &SparseMatrix {
        &self.a
    }

    pub fn b(&self) -> &SparseMatrix {
        &self.b
    }

    pub fn c(&self) -> &SparseMatrix {
        &self.c
    }

    pub fn d(&self) -> &Array2<f64> {
        &self.d
    }

    pub fn structure(&self) -> &StructureTag {
        &self.structure
    }

    /// Factorization of A − σE reusing the cached fill-reducing order.
    pub fn factor(&self, shift: Complex64) -> Result<ShiftedFactorization> {
        factor_shifted_ordered(&self.a, &self.e, shift, &self.ordering)
    }

    /// Dense copies (E, A, B, C) for desk-scale oracles.
    #[allow(clippy::type_complexity)]
    pub fn to_dense(&self) -> Result<(Array2<f64>, Array2<f64>, Array2<f64>, Array2<f64>)> {
        if self.n() > DESK_LIMIT {
            return Err(Error::ScaleLimit {
                n: self.n(),
                limit: DESK_LIMIT,
            });
        }
        Ok((
            self.e.to_dense(),
            self.a.to_dense(),
            self.b.to_dense(),
            self.c.to_dense(),
        ))
    }

    /// SISO subsystem from input `input` to output `output` (0-based).
    pub fn select_channel(&self, input: usize, output: usize) -> Result<DaeSystem> {
        if input >= self.m() || output >= self.p() {
            return Err(Error::DimensionMismatch(format!(
                "channel ({input}, {output}) outside {} inputs / {} outputs",
                self.m(),
                self.p()
            )));
        }
        let b = self.b.block(0, self.n(), input, input + 1);
        let c = self.c.block(output, output + 1, 0, self.n());
        let d = Array2::from_elem((1, 1), self.d[[output, input]]);
        Ok(DaeSystem {
            e: self.e.clone(),
            a: self.a.clone(),
            b,
            c,
            d,
            structure: self.structure.clone(),
            n_f: self.n_f,
            ordering: self.ordering.clone(),
        })
    }

    /// Descriptor system from dense matrices, tagged GeneralDense.
    pub fn from_dense(
        e: &Array2<f64>,
        a: &Array2<f64>,
        b: &Array2<f64>,
        c: &Array2<f64>,
        d: Option<Array2<f64>>,
    ) -> Result<DaeSystem> {
        DaeSystem::new(
            SparseMatrix::from_dense(e),
            SparseMatrix::from_dense(a),
            SparseMatrix::from_dense(b),
            SparseMatrix::from_dense(c),
            d,
            StructureTag::GeneralDense,
        )
    }

    /// Spectral scale used for stability margins: ‖A‖_F / ‖E‖_F.
    pub fn spectral_scale(&self) -> f64 {
        let s = self.a.frobenius_norm() / self.e.frobenius_norm().max(f64::MIN_POSITIVE);
        if s.is_finite() && s > 0.0 {
            s
        } else {
            1.0
        }
    }

    /// Dense D norm helper.
    pub fn d_norm(&self) -> f64 {
        fro(&self.d)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_nonzero_declared_block() {
        let e = SparseMatrix::from_triplets(2, 2, &[(0, 0, 1.0), (1, 1, 1.0)]).unwrap();
        let a = SparseMatrix::from_triplets(2, 2, &[(0, 0, -1.0), (1, 1, -1.0)]).unwrap();
        let b = SparseMatrix::from_triplets(2, 1, &[(0, 0, 1.0)]).unwrap();
        let c = SparseMatrix::from_triplets(1, 2, &[(0, 0, 1.0)]).unwrap();
        let r = DaeSystem::new(e, a, b, c, None, StructureTag::SemiExplicitIndex1 { n1: 1 });
        assert!(matches!(r, Err(Error::StructureViolation(_))));
    }

    #[test]
    fn singular_pencil_rejected() {
        let e = SparseMatrix::from_triplets(2, 2, &[(0, 0, 1.0)]).unwrap();
        let a = SparseMatrix::from_triplets(2, 2, &[(0, 0, -1.0)]).unwrap();
        let b = SparseMatrix::from_triplets(2, 1, &[(0, 0, 1.0)]).unwrap();
        let c = SparseMatrix::from_triplets(1, 2, &[(0, 0, 1.0)]).unwrap();
        let r = DaeSystem::new(e, a, b, c, None, StructureTag::SemiExplicitIndex1 { n1: 1 });
        assert!(r.is_err());
    }
}
