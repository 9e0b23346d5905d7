//! Numeric primitives: sparse storage and shifted factorizations, small
//! dense Sylvester and Lyapunov solvers, dense pencil eigenvalues.

pub mod dense;
pub mod lu;
pub mod shifted;
pub mod sparse;

pub use dense::{
    eig_pencil_dense, eig_pencil_dense_with_cutoff, solve_dense_sylvester, solve_dense_sylvester_real,
    solve_small_lyapunov, solve_small_lyapunov_real, PencilEigen,
};
pub use shifted::{factor_shifted, factor_shifted_ordered, pencil_ordering, ShiftedFactorization, TOL_SOLVE};
pub use sparse::SparseMatrix;
