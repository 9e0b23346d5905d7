//! Test-system generators and file interchange.

pub mod generators;
pub mod manifest;
pub mod mtx;
pub mod results;

pub use generators::{gen_ode_with_poles, gen_semi_explicit_index1, gen_stokes_index2};
pub use manifest::{read_system, write_system, Channel, Manifest};
pub use mtx::{format_matrix_market, parse_matrix_market, read_matrix_market, write_matrix_market};
pub use results::{
    log_grid, write_frequency_csv, write_frequency_csv_to, write_results, FrequencyResponse, HistoryRow, RunArtifacts,
};
