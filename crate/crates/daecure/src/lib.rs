//! Reduction of sparse linear descriptor systems to small stable models by
//! H2 pseudo-optimal rational interpolation, with adaptive shift selection
//! and cumulative order growth.

pub mod bench_io;
pub mod cure;
pub mod daemodel;
pub mod error;
pub mod h2analysis;
pub mod interp;
pub mod numkernel;
pub mod pork;
pub mod spark;

pub use error::{Error, Result};
