//! JSON manifest pointing at Matrix Market files.
//!
//! ```json
//! {
//!   "E": "E.mtx", "A": "A.mtx", "B": "B.mtx", "C": "C.mtx", "D": "D.mtx",
//!   "structure": { "kind": "semi_explicit_index1", "n1": 500 },
//!   "row_permutation": [0, 2, 1],
//!   "col_permutation": [0, 2, 1],
//!   "channel": { "input": 42, "output": 42 }
//! }
//! ```
//!
//! Paths are relative to the manifest. Permutations are 0-based with
//! `new[i] = old[perm[i]]`; rows permute E, A, B and columns permute E, A, C.
//! Channels are 1-based. `D`, permutations and `channel` are optional.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::mtx::{read_matrix_market, write_dense_matrix_market, write_matrix_market};
use crate::daemodel::{DaeSystem, StructureTag};
use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Channel {
    pub input: usize,
    pub output: usize,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Manifest {
    #[serde(rename = "E")]
    pub e: PathBuf,
    #[serde(rename = "A")]
    pub a: PathBuf,
    #[serde(rename = "B")]
    pub b: PathBuf,
    #[serde(rename = "C")]
    pub c: PathBuf,
    #[serde(rename = "D", default, skip_serializing_if = "Option::is_none")]
    pub d: Option<PathBuf>,
    pub structure: StructureTag,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub row_permutation: Option<Vec<usize>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub col_permutation: Option<Vec<usize>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub channel: Option<Channel>,
}

impl Manifest {
    pub fn load(path: &Path) -> Result<Manifest> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Io {
            path: path.display().to_string(),
            source: e,
        })?;
        serde_json::from_str(&text).map_err(|e| Error::Parse {
            line: e.line(),
            column: e.column(),
            message: format!("{}: {e}", path.display()),
        })
    }

    /// Every file the manifest references, resolved against `base`.
    pub fn files(&self, base: &Path) -> Vec<PathBuf> {
        let mut v = vec![
            base.join(&self.e),
            base.join(&self.a),
            base.join(&self.b),
            base.join(&self.c),
        ];
        if let Some(d) = &self.d {
            v.push(base.join(d));
        }
        v
    }
}

/// Loads, permutes, validates and optionally restricts to one channel.
pub fn read_system(manifest_path: &Path) -> Result<DaeSystem> {
    let man = Manifest::load(manifest_path)?;
    let base = manifest_path.parent().unwrap_or(Path::new("."));
    let mut e = read_matrix_market(&base.join(&man.e))?;
    let mut a = read_matrix_market(&base.join(&man.a))?;
    let mut b = read_matrix_market(&base.join(&man.b))?;
    let mut c = read_matrix_market(&base.join(&man.c))?;
    let d = match &man.d {
        Some(p) => Some(read_matrix_market(&base.join(p))?.to_dense()),
        None => None,
    };
    let n = a.n_rows();
    if man.row_permutation.is_some() || man.col_permutation.is_some() {
        let id: Vec<usize> = (0..n).collect();
        let rp = man.row_permutation.clone().unwrap_or_else(|| id.clone());
        let cp = man.col_permutation.clone().unwrap_or_else(|| id.clone());
        if rp.len() != n || cp.len() != n {
            return Err(Error::Manifest(format!("permutations must have length n = {n}")));
        }
        e = e.permute(&rp, &cp)?;
        a = a.permute(&rp, &cp)?;
        let in_id: Vec<usize> = (0..b.n_cols()).collect();
        let out_id: Vec<usize> = (0..c.n_rows()).collect();
        b = b.permute(&rp, &in_id)?;
        c = c.permute(&out_id, &cp)?;
    }
    let sys = DaeSystem::new(e, a, b, c, d, man.structure.clone())?;
    match &man.channel {
        Some(ch) => {
            if ch.input == 0 || ch.output == 0 {
                return Err(Error::Manifest("channel indices are 1-based".into()));
            }
            sys.select_channel(ch.input - 1, ch.output - 1)
        }
        None => Ok(sys),
    }
}

/// Writes E, A, B, C, D and `manifest.json` into `dir`; returns the
/// manifest path.
pub fn write_system(sys: &DaeSystem, dir: &Path) -> Result<PathBuf> {
    std::fs::create_dir_all(dir).map_err(|e| Error::Io {
        path: dir.display().to_string(),
        source: e,
    })?;
    write_matrix_market(&dir.join("E.mtx"), sys.e())?;
    write_matrix_market(&dir.join("A.mtx"), sys.a())?;
    write_matrix_market(&dir.join("B.mtx"), sys.b())?;
    write_matrix_market(&dir.join("C.mtx"), sys.c())?;
    let d = if sys.d().iter().any(|&v| v != 0.0) {
        write_dense_matrix_market(&dir.join("D.mtx"), sys.d())?;
        Some(PathBuf::from("D.mtx"))
    } else {
        None
    };
    let man = Manifest {
        e: "E.mtx".into(),
        a: "A.mtx".into(),
        b: "B.mtx".into(),
        c: "C.mtx".into(),
        d,
        structure: sys.structure().clone(),
        row_permutation: None,
        col_permutation: None,
        channel: None,
    };
    let path = dir.join("manifest.json");
    write_json(&path, &man)?;
    Ok(path)
}

pub(crate) fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let text = serde_json::to_string_pretty(value).expect("serializable value");
    std::fs::write(path, text + "\n").map_err(|e| Error::Io {
        path: path.display().to_string(),
        source: e,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bench_io::generators::gen_semi_explicit_index1;

    #[test]
    fn round_trip_preserves_pattern_and_values() {
        let dir = tempfile::tempdir().unwrap();
        let sys = gen_semi_explicit_index1(6, 3, 11).unwrap();
        let path = write_system(&sys, dir.path()).unwrap();
        let back = read_system(&path).unwrap();
        for (x, y) in [
            (sys.e(), back.e()),
            (sys.a(), back.a()),
            (sys.b(), back.b()),
            (sys.c(), back.c()),
        ] {
            assert_eq!(x.indptr(), y.indptr());
            assert_eq!(x.indices(), y.indices());
            assert_eq!(x.values(), y.values());
        }
        assert_eq!(back.structure(), sys.structure());
    }

    #[test]
    fn wrong_block_size_names_the_block() {
        let dir = tempfile::tempdir().unwrap();
        let sys = gen_semi_explicit_index1(4, 2, 3).unwrap();
        let path = write_system(&sys, dir.path()).unwrap();
        let mut man = Manifest::load(&path).unwrap();
        man.structure = StructureTag::SemiExplicitIndex1 { n1: 3 };
        write_json(&path, &man).unwrap();
        match read_system(&path) {
            Err(Error::StructureViolation(msg)) => assert!(msg.contains("E21"), "{msg}"),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn permutation_and_channel_selection() {
        use crate::numkernel::SparseMatrix;
        let dir = tempfile::tempdir().unwrap();
        // Diagonal 3-state system with two inputs and two outputs, stored
        // in reversed order.
        let e = SparseMatrix::identity(3);
        let a = SparseMatrix::from_triplets(3, 3, &[(0, 0, -3.0), (1, 1, -2.0), (2, 2, -1.0)]).unwrap();
        let b = SparseMatrix::from_triplets(3, 2, &[(0, 1, 1.0), (2, 0, 1.0)]).unwrap();
        let c = SparseMatrix::from_triplets(2, 3, &[(0, 2, 1.0), (1, 0, 5.0)]).unwrap();
        let sys = DaeSystem::new(e, a, b, c, None, StructureTag::GeneralDense).unwrap();
        let path = write_system(&sys, dir.path()).unwrap();
        let mut man = Manifest::load(&path).unwrap();
        man.row_permutation = Some(vec![2, 1, 0]);
        man.col_permutation = Some(vec![2, 1, 0]);
        man.channel = Some(Channel { input: 2, output: 2 });
        write_json(&path, &man).unwrap();
        let back = read_system(&path).unwrap();
        assert_eq!(back.a().get(0, 0), -1.0);
        assert_eq!((back.m(), back.p()), (1, 1));
        // u2 → y2 is 5/(s + 3).
        let g = crate::daemodel::eval_transfer(&back, num_complex::Complex64::new(1.0, 0.0)).unwrap();
        assert!((g[[0, 0]].re - 1.25).abs() < 1e-14);
    }

    #[test]
    fn malformed_json_reports_position() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("manifest.json");
        std::fs::write(&path, "{\n  \"E\": \"E.mtx\",\n  oops\n}").unwrap();
        assert!(matches!(read_system(&path), Err(Error::Parse { line: 3, .. })));
    }
}
