//! Result artifacts: frequency-response and H2-history CSV, ROM matrices,
//! JSON report.

use std::path::{Path, PathBuf};

use ndarray::Array2;
use num_complex::Complex64;
use rayon::prelude::*;
use serde::Serialize;

use super::manifest::{write_json, Manifest};
use super::mtx::write_dense_matrix_market;
use crate::daemodel::StructureTag;
use crate::error::{Error, Result};
use crate::pork::RomRealization;

/// Sampled responses of the full and reduced models on a common grid.
#[derive(Clone, Debug)]
pub struct FrequencyResponse {
    pub omega: Vec<f64>,
    pub fom: Vec<Array2<Complex64>>,
    pub rom: Vec<Array2<Complex64>>,
}

impl FrequencyResponse {
    /// Evaluates both models at s = iω for each ω; frequencies are
    /// processed in parallel.
    pub fn sample<F, G>(omega: &[f64], fom: F, rom: G) -> Result<Self>
    where
        F: Fn(Complex64) -> Result<Array2<Complex64>> + Sync,
        G: Fn(Complex64) -> Result<Array2<Complex64>> + Sync,
    {
        let pairs: Vec<(Array2<Complex64>, Array2<Complex64>)> = omega
            .par_iter()
            .map(|&w| {
                let s = Complex64::new(0.0, w);
                Ok((fom(s)?, rom(s)?))
            })
            .collect::<Result<_>>()?;
        let (fom, rom) = pairs.into_iter().unzip();
        Ok(FrequencyResponse {
            omega: omega.to_vec(),
            fom,
            rom,
        })
    }

    /// Largest relative pointwise error max_ω ‖G − G_r‖_F / ‖G‖_F.
    pub fn max_relative_error(&self) -> f64 {
        self.fom
            .iter()
            .zip(&self.rom)
            .map(|(g, r)| {
                let num: f64 = (g - r).iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
                let den: f64 = g.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
                num / den.max(f64::MIN_POSITIVE)
            })
            .fold(0.0, f64::max)
    }
}

/// Logarithmically spaced grid with `points` samples in [wmin, wmax].
pub fn log_grid(wmin: f64, wmax: f64, points: usize) -> Vec<f64> {
    match points {
        0 => Vec::new(),
        1 => vec![wmin],
        _ => {
            let (l0, l1) = (wmin.log10(), wmax.log10());
            (0..points)
                .map(|i| 10f64.powf(l0 + (l1 - l0) * i as f64 / (points - 1) as f64))
                .collect()
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct HistoryRow {
    pub k: usize,
    pub norm: f64,
    pub rel_increase: f64,
}

fn db(z: Complex64) -> f64 {
    20.0 * z.norm().max(f64::MIN_POSITIVE).log10()
}

fn csv_err(path: &Path, e: csv::Error) -> Error {
    Error::Io {
        path: path.display().to_string(),
        source: std::io::Error::other(e),
    }
}

/// Columns: omega, then for every channel `y{i}u{j}` the real part,
/// imaginary part and magnitude in dB of the full model, the reduced model
/// and their difference. Channel indices are 1-based.
pub fn write_frequency_csv(path: &Path, fr: &FrequencyResponse) -> Result<()> {
    let file = std::fs::File::create(path).map_err(|e| Error::Io {
        path: path.display().to_string(),
        source: e,
    })?;
    write_frequency_csv_to(file, fr, path)
}

/// Same layout as [`write_frequency_csv`] on any writer; `label` names the
/// destination in error messages.
pub fn write_frequency_csv_to<W: std::io::Write>(out: W, fr: &FrequencyResponse, label: &Path) -> Result<()> {
    let path = label;
    let mut w = csv::Writer::from_writer(out);
    let (p, m) = fr.fom.first().map(|g| g.dim()).unwrap_or((0, 0));
    let mut header = vec!["omega".to_string()];
    for i in 0..p {
        for j in 0..m {
            for model in ["fom", "rom", "err"] {
                for part in ["re", "im", "db"] {
                    header.push(format!("y{}u{}_{model}_{part}", i + 1, j + 1));
                }
            }
        }
    }
    w.write_record(&header).map_err(|e| csv_err(path, e))?;
    for (k, &omega) in fr.omega.iter().enumerate() {
        let mut row = vec![format!("{omega:e}")];
        for i in 0..p {
            for j in 0..m {
                let g = fr.fom[k][[i, j]];
                let r = fr.rom[k][[i, j]];
                for z in [g, r, g - r] {
                    row.push(format!("{:e}", z.re));
                    row.push(format!("{:e}", z.im));
                    row.push(format!("{:e}", db(z)));
                }
            }
        }
        w.write_record(&row).map_err(|e| csv_err(path, e))?;
    }
    w.flush().map_err(|e| Error::Io {
        path: path.display().to_string(),
        source: e,
    })
}

pub fn write_history_csv(path: &Path, rows: &[HistoryRow]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| csv_err(path, e))?;
    for r in rows {
        w.serialize(r).map_err(|e| csv_err(path, e))?;
    }
    w.flush().map_err(|e| Error::Io {
        path: path.display().to_string(),
        source: e,
    })
}

/// Writes Er, Ar, Br, Cr, Dr under `dir` as a descriptor system readable
/// by [`super::read_system`].
pub fn write_rom(dir: &Path, rom: &RomRealization) -> Result<PathBuf> {
    std::fs::create_dir_all(dir).map_err(|e| Error::Io {
        path: dir.display().to_string(),
        source: e,
    })?;
    write_dense_matrix_market(&dir.join("E.mtx"), &rom.er)?;
    write_dense_matrix_market(&dir.join("A.mtx"), &rom.ar)?;
    write_dense_matrix_market(&dir.join("B.mtx"), &rom.br)?;
    write_dense_matrix_market(&dir.join("C.mtx"), &rom.cr)?;
    write_dense_matrix_market(&dir.join("D.mtx"), &rom.dr)?;
    let man = Manifest {
        e: "E.mtx".into(),
        a: "A.mtx".into(),
        b: "B.mtx".into(),
        c: "C.mtx".into(),
        d: Some("D.mtx".into()),
        structure: StructureTag::GeneralDense,
        row_permutation: None,
        col_permutation: None,
        channel: None,
    };
    let path = dir.join("manifest.json");
    write_json(&path, &man)?;
    Ok(path)
}

/// Everything a reduction run leaves behind.
pub struct RunArtifacts<'a, R: Serialize> {
    pub report: &'a R,
    pub rom: &'a RomRealization,
    pub history: &'a [HistoryRow],
    pub frequency: Option<&'a FrequencyResponse>,
}

/// Writes `report.json`, `h2_history.csv`, `rom/` and, when sampled,
/// `frequency.csv` into `dir`.
pub fn write_results<R: Serialize>(artifacts: &RunArtifacts<'_, R>, dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::Io {
        path: dir.display().to_string(),
        source: e,
    })?;
    write_json(&dir.join("report.json"), artifacts.report)?;
    write_history_csv(&dir.join("h2_history.csv"), artifacts.history)?;
    write_rom(&dir.join("rom"), artifacts.rom)?;
    if let Some(fr) = artifacts.frequency {
        write_frequency_csv(&dir.join("frequency.csv"), fr)?;
    }
    Ok(())
}
