//! End-to-end runs of the `daecure` binary.

use std::path::Path;
use std::process::{Command, Output};

fn daecure(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_daecure"))
        .args(args)
        .env("DAECURE_THREADS", "2")
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn write(dir: &Path, name: &str, text: &str) {
    std::fs::write(dir.join(name), text).unwrap();
}

fn coord(rows: usize, cols: usize, entries: &[(usize, usize, f64)]) -> String {
    let mut s = format!(
        "%%MatrixMarket matrix coordinate real general\n{rows} {cols} {}\n",
        entries.len()
    );
    for (r, c, v) in entries {
        s += &format!("{r} {c} {v}\n");
    }
    s
}

/// Writes a system given 1-based coordinate entries and a structure tag.
#[allow(clippy::too_many_arguments)]
fn write_system(
    dir: &Path,
    n: usize,
    e: &[(usize, usize, f64)],
    a: &[(usize, usize, f64)],
    b: &[(usize, usize, f64)],
    c: &[(usize, usize, f64)],
    m: usize,
    structure: &str,
) {
    std::fs::create_dir_all(dir).unwrap();
    write(dir, "E.mtx", &coord(n, n, e));
    write(dir, "A.mtx", &coord(n, n, a));
    write(dir, "B.mtx", &coord(n, m, b));
    write(dir, "C.mtx", &coord(1, n, c));
    write(
        dir,
        "manifest.json",
        &format!(r#"{{"E": "E.mtx", "A": "A.mtx", "B": "B.mtx", "C": "C.mtx", "structure": {structure}}}"#),
    );
}

fn json(text: &str) -> serde_json::Value {
    serde_json::from_str(text).unwrap_or_else(|e| panic!("invalid JSON ({e}): {text}"))
}

#[test]
fn h2norm_of_first_order_lag() {
    let dir = tempfile::tempdir().unwrap();
    let sys = dir.path().join("rom");
    write_system(
        &sys,
        1,
        &[(1, 1, 1.0)],
        &[(1, 1, -1.0)],
        &[(1, 1, 1.0)],
        &[(1, 1, 1.0)],
        1,
        r#"{"kind": "general_dense"}"#,
    );
    let out = daecure(&["h2norm", sys.to_str().unwrap()]);
    assert!(out.status.success(), "{}", stderr(&out));
    assert_eq!(stdout(&out).trim(), "0.7071067811865476");
}

#[test]
fn generated_stokes_system_validates() {
    let dir = tempfile::tempdir().unwrap();
    let sys = dir.path().join("sys");
    let out = daecure(&[
        "gen",
        "--kind",
        "stokes2",
        "--m",
        "8",
        "--seed",
        "1",
        "--out",
        sys.to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{}", stderr(&out));
    let manifest = sys.join("manifest.json");
    assert_eq!(stdout(&out).trim(), manifest.to_str().unwrap());
    let out = daecure(&["validate", manifest.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0), "{}\n{}", stdout(&out), stderr(&out));
    let report = json(&stdout(&out));
    assert_eq!(report["passed"], true);
    assert_eq!(report["system"]["n"], 2 * 8 * 7 + 63);
    let names: Vec<&str> = report["checks"]
        .as_array()
        .unwrap()
        .iter()
        .map(|c| c["name"].as_str().unwrap())
        .collect();
    for name in [
        "lapack_self_check",
        "projector_idempotence",
        "projector_commutation",
        "finite_spectrum_stable",
    ] {
        assert!(names.contains(&name), "missing {name}");
    }
}

#[test]
fn validate_flags_an_unstable_system() {
    let dir = tempfile::tempdir().unwrap();
    let sys = dir.path().join("sys");
    write_system(
        &sys,
        1,
        &[(1, 1, 1.0)],
        &[(1, 1, 0.5)],
        &[(1, 1, 1.0)],
        &[(1, 1, 1.0)],
        1,
        r#"{"kind": "general_dense"}"#,
    );
    let out = daecure(&["validate", sys.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    assert_eq!(json(&stdout(&out))["passed"], false);
}

#[test]
fn reduce_index1_then_bode() {
    let dir = tempfile::tempdir().unwrap();
    let sys = dir.path().join("sys");
    let res = dir.path().join("results");
    let out = daecure(&[
        "gen",
        "--kind",
        "index1",
        "--n1",
        "60",
        "--n2",
        "15",
        "--seed",
        "4",
        "--out",
        sys.to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{}", stderr(&out));
    let manifest = sys.join("manifest.json");
    let args = [
        "reduce",
        "--manifest",
        manifest.to_str().unwrap(),
        "--tol",
        "1e-6",
        "--max-steps",
        "30",
        "--out",
        res.to_str().unwrap(),
        "--points",
        "40",
    ];
    let out = daecure(&args);
    assert!(out.status.success(), "{}", stderr(&out));

    let report = json(&std::fs::read_to_string(res.join("report.json")).unwrap());
    let k = report["steps"].as_u64().unwrap();
    assert!(k >= 1);
    assert_eq!(
        report["order"].as_u64().unwrap(),
        2 * k + 1,
        "order is 2k + 1 with a constant part"
    );
    assert_eq!(report["strictly_proper_order"].as_u64().unwrap(), 2 * k);
    assert_eq!(report["config"]["shifts_init"], serde_json::json!([1e-4, 1e-4]));
    assert_eq!(report["input_sha256"].as_str().unwrap().len(), 64);
    assert_eq!(report["checks"]["every_step_stable"], true);
    assert!(report["checks"]["max_interpolation_residual"].as_f64().unwrap() <= 1e-8);

    let history = std::fs::read_to_string(res.join("h2_history.csv")).unwrap();
    assert_eq!(history.lines().count() as u64, k + 1);
    let freq = std::fs::read_to_string(res.join("frequency.csv")).unwrap();
    assert_eq!(freq.lines().count(), 41);

    let csv = dir.path().join("bode.csv");
    let rom = res.join("rom");
    let out = daecure(&[
        "bode",
        "--manifest",
        manifest.to_str().unwrap(),
        "--rom",
        rom.to_str().unwrap(),
        "--wmin",
        "1e-2",
        "--wmax",
        "1e2",
        "--points",
        "200",
        "--out",
        csv.to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{}", stderr(&out));
    let text = std::fs::read_to_string(&csv).unwrap();
    let mut lines = text.lines();
    assert!(lines.next().unwrap().starts_with("omega,y1u1_fom_re"));
    assert_eq!(lines.count(), 200);

    // Same command on stdout.
    let out = daecure(&[
        "bode",
        "--manifest",
        manifest.to_str().unwrap(),
        "--rom",
        rom.to_str().unwrap(),
        "--points",
        "7",
    ]);
    assert!(out.status.success());
    assert_eq!(stdout(&out).lines().count(), 8);
}

#[test]
fn reduce_is_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let sys = dir.path().join("sys");
    daecure(&[
        "gen",
        "--kind",
        "stokes2",
        "--m",
        "5",
        "--seed",
        "3",
        "--out",
        sys.to_str().unwrap(),
    ]);
    let mut runs = Vec::new();
    for name in ["r1", "r2"] {
        let res = dir.path().join(name);
        let out = daecure(&[
            "reduce",
            "--manifest",
            sys.to_str().unwrap(),
            "--out",
            res.to_str().unwrap(),
            "--points",
            "0",
        ]);
        assert!(out.status.success(), "{}", stderr(&out));
        let report = json(&std::fs::read_to_string(res.join("report.json")).unwrap());
        assert!(!res.join("frequency.csv").exists());
        runs.push((
            report["input_sha256"].clone(),
            std::fs::read_to_string(res.join("rom/A.mtx")).unwrap(),
        ));
    }
    assert_eq!(runs[0], runs[1]);
}

#[test]
fn improper_index2_input_is_unsupported() {
    let dir = tempfile::tempdir().unwrap();
    let sys = dir.path().join("sys");
    // Two velocities, one pressure, with ports on the pressure: the
    // transfer function has a term linear in s.
    write_system(
        &sys,
        3,
        &[(1, 1, 1.0), (2, 2, 2.0)],
        &[
            (1, 1, -2.0),
            (1, 2, 0.5),
            (2, 2, -3.0),
            (1, 3, 1.0),
            (2, 3, -1.0),
            (3, 1, 1.0),
            (3, 2, -1.0),
        ],
        &[(1, 1, 1.0), (2, 1, 0.3), (3, 1, 0.8)],
        &[(1, 1, 0.7), (1, 2, -1.0), (1, 3, 0.6)],
        1,
        r#"{"kind": "stokes_index2", "n_v": 2, "n_p": 1}"#,
    );
    let out = daecure(&[
        "reduce",
        "--manifest",
        sys.to_str().unwrap(),
        "--out",
        dir.path().join("r").to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(2));
    let err = json(stderr(&out).lines().last().unwrap());
    assert_eq!(err["error"]["kind"], "UnsupportedPolynomialPart");
    assert_eq!(err["error"]["category"], "unsupported");
    assert!(err["error"]["message"]
        .as_str()
        .unwrap()
        .contains("Unsupported polynomial part"));
}

#[test]
fn multi_input_without_channel_is_unsupported() {
    let dir = tempfile::tempdir().unwrap();
    let sys = dir.path().join("sys");
    write_system(
        &sys,
        2,
        &[(1, 1, 1.0), (2, 2, 1.0)],
        &[(1, 1, -1.0), (2, 2, -2.0)],
        &[(1, 1, 1.0), (2, 2, 1.0)],
        &[(1, 1, 1.0), (1, 2, 1.0)],
        2,
        r#"{"kind": "general_dense"}"#,
    );
    let out = daecure(&[
        "reduce",
        "--manifest",
        sys.to_str().unwrap(),
        "--out",
        dir.path().join("r").to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(2), "{}", stderr(&out));
    assert!(stderr(&out).contains("channel"));
}

#[test]
fn io_and_parse_errors_exit_3() {
    let dir = tempfile::tempdir().unwrap();
    let out = daecure(&["h2norm", dir.path().join("missing.json").to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(3));
    assert_eq!(json(stderr(&out).lines().last().unwrap())["error"]["kind"], "IoError");

    let bad = dir.path().join("bad.json");
    std::fs::write(&bad, "{\n  \"E\": \"E.mtx\",\n  oops\n}").unwrap();
    let out = daecure(&["validate", bad.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(3));
    let err = json(stderr(&out).lines().last().unwrap());
    assert_eq!(err["error"]["kind"], "ParseError");
    assert!(err["error"]["message"].as_str().unwrap().contains("line 3"));
}

#[test]
fn bad_flags_are_rejected_by_the_parser() {
    let out = daecure(&["reduce", "--manifest", "x.json", "--shifts-init", "1e-4"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("comma-separated"));
}
