//! `daecure` command-line frontend.
//!
//! Exit codes: 0 success, 1 numerical failure (or a failed `validate`
//! check), 2 unsupported input, 3 I/O or parse error. Errors are printed to
//! stderr as one JSON object.

use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Parser, Subcommand, ValueEnum};
use num_complex::Complex64;
use serde::Serialize;
use sha2::{Digest, Sha256};

use daecure::bench_io::{
    gen_semi_explicit_index1, gen_stokes_index2, log_grid, read_system, write_frequency_csv, write_frequency_csv_to,
    write_results, write_system, FrequencyResponse, HistoryRow, Manifest, RunArtifacts,
};
use daecure::cure::{reduce_dae, CureConfig, CureReport};
use daecure::daemodel::{eval_transfer, polynomial_part, DaeSystem, DenseSplit, PolyPart, ProjectorKit, DESK_LIMIT};
use daecure::error::{Error, ErrorCategory, Result};
use daecure::h2analysis::{h2_norm_by_quadrature, h2_norm_dae};
use daecure::interp::DeflatedSystem;
use daecure::numkernel::dense::{eig_pencil_dense, lapack_self_check};
use daecure::spark::{HessianMode, Parametrization, SparkParams, TrustRegionConfig};

#[derive(Parser)]
#[command(
    name = "daecure",
    version,
    about = "H2-pseudo-optimal reduction of sparse descriptor systems"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Reduce a system with CUREd SPARK and write ROM, history and report.
    Reduce(ReduceArgs),
    /// Sample full and reduced frequency responses to CSV.
    Bode(BodeArgs),
    /// Print the H2 norm of the strictly proper part of a system.
    H2norm(H2normArgs),
    /// Check structure, projectors, stability and the linked LAPACK.
    Validate(ValidateArgs),
    /// Generate a structured test system.
    Gen(GenArgs),
}

#[derive(Clone, Copy, ValueEnum, Serialize)]
#[serde(rename_all = "snake_case")]
enum HessianArg {
    Fd,
    Analytic,
}

#[derive(Clone, Copy, ValueEnum, Serialize)]
#[serde(rename_all = "snake_case")]
enum ParamArg {
    Linear,
    Log,
}

#[derive(clap::Args, Serialize)]
struct ReduceArgs {
    /// System manifest (JSON) or a directory containing manifest.json.
    #[arg(long)]
    manifest: PathBuf,
    /// Stop when the relative increase of the ROM norm drops below this.
    #[arg(long, default_value_t = 1e-6)]
    tol: f64,
    #[arg(long, default_value_t = 30)]
    max_steps: usize,
    /// Output directory.
    #[arg(long, default_value = "results")]
    out: PathBuf,
    /// Initial SPARK parameters `a,b`.
    #[arg(long, default_value = "1e-4,1e-4", value_parser = parse_pair)]
    shifts_init: (f64, f64),
    /// Put a constant polynomial part into D_r instead of a singular-E block.
    #[arg(long)]
    fold_feedthrough: bool,
    /// Start each SPARK run at the previous step's optimum.
    #[arg(long)]
    warm_start: bool,
    #[arg(long, value_enum, default_value_t = HessianArg::Fd)]
    hessian: HessianArg,
    #[arg(long, value_enum, default_value_t = ParamArg::Linear)]
    parametrization: ParamArg,
    /// Frequency grid for frequency.csv; `--points 0` skips sampling.
    #[arg(long, default_value_t = 1e-2)]
    wmin: f64,
    #[arg(long, default_value_t = 1e4)]
    wmax: f64,
    #[arg(long, default_value_t = 200)]
    points: usize,
}

#[derive(clap::Args)]
struct BodeArgs {
    /// Full-order system manifest or directory.
    #[arg(long)]
    manifest: PathBuf,
    /// Reduced model manifest or directory (e.g. `results/rom`).
    #[arg(long)]
    rom: PathBuf,
    #[arg(long, default_value_t = 1e-2)]
    wmin: f64,
    #[arg(long, default_value_t = 1e2)]
    wmax: f64,
    #[arg(long, default_value_t = 200)]
    points: usize,
    /// CSV destination; stdout if omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(clap::Args)]
struct H2normArgs {
    /// Manifest or directory containing manifest.json.
    path: PathBuf,
    /// Relative tolerance of the quadrature used above the dense limit.
    #[arg(long, default_value_t = 1e-10)]
    rel_tol: f64,
}

#[derive(clap::Args)]
struct ValidateArgs {
    /// Manifest or directory containing manifest.json.
    path: PathBuf,
    /// Number of random probe vectors for the projector checks.
    #[arg(long, default_value_t = 4)]
    probes: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Clone, Copy, ValueEnum)]
enum GenKind {
    /// Semi-explicit index-1 system.
    Index1,
    /// Stokes-type index-2 system on an m×m grid.
    Stokes2,
}

#[derive(clap::Args)]
struct GenArgs {
    #[arg(long, value_enum)]
    kind: GenKind,
    /// Grid cells per direction (stokes2).
    #[arg(long, default_value_t = 12)]
    m: usize,
    /// Differential block size (index1).
    #[arg(long, default_value_t = 500)]
    n1: usize,
    /// Algebraic block size (index1).
    #[arg(long, default_value_t = 100)]
    n2: usize,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

fn parse_pair(s: &str) -> std::result::Result<(f64, f64), String> {
    let parts: Vec<&str> = s.split(',').map(str::trim).collect();
    let [a, b] = parts[..] else {
        return Err("expected two comma-separated numbers `a,b`".into());
    };
    let a: f64 = a.parse().map_err(|e| format!("{a}: {e}"))?;
    let b: f64 = b.parse().map_err(|e| format!("{b}: {e}"))?;
    if !(a > 0.0 && b > 0.0 && a.is_finite() && b.is_finite()) {
        return Err("both parameters must be positive".into());
    }
    Ok((a, b))
}

/// Accepts either a manifest file or a directory holding `manifest.json`.
fn manifest_path(p: &Path) -> PathBuf {
    if p.is_dir() {
        p.join("manifest.json")
    } else {
        p.to_path_buf()
    }
}

fn io_err(path: &Path, e: std::io::Error) -> Error {
    Error::Io {
        path: path.display().to_string(),
        source: e,
    }
}

/// SHA-256 over the manifest and every file it references, in order.
fn content_hash(manifest: &Path) -> Result<String> {
    let man = Manifest::load(manifest)?;
    let base = manifest.parent().unwrap_or(Path::new("."));
    let mut h = Sha256::new();
    for p in std::iter::once(manifest.to_path_buf()).chain(man.files(base)) {
        h.update(std::fs::read(&p).map_err(|e| io_err(&p, e))?);
    }
    Ok(h.finalize().iter().map(|b| format!("{b:02x}")).collect())
}

fn require_siso(sys: &DaeSystem) -> Result<()> {
    if sys.m() == 1 && sys.p() == 1 {
        Ok(())
    } else {
        Err(Error::Unsupported(format!(
            "CUREd SPARK is single-input single-output; the system has {} inputs and {} outputs (select a \"channel\" in the manifest)",
            sys.m(),
            sys.p()
        )))
    }
}

#[derive(Serialize)]
struct SystemInfo {
    n: usize,
    n_finite: usize,
    inputs: usize,
    outputs: usize,
    structure: daecure::daemodel::StructureTag,
}

impl SystemInfo {
    fn of(sys: &DaeSystem) -> Self {
        SystemInfo {
            n: sys.n(),
            n_finite: sys.n_f(),
            inputs: sys.m(),
            outputs: sys.p(),
            structure: sys.structure().clone(),
        }
    }
}

#[derive(Serialize)]
struct Checks {
    max_interpolation_residual: f64,
    every_step_stable: bool,
    rom_norms_nondecreasing: bool,
    final_rom_stable: bool,
    max_relative_frequency_error: Option<f64>,
}

#[derive(Serialize)]
struct Timings {
    load_s: f64,
    reduce_s: f64,
    sample_s: f64,
    total_s: f64,
}

#[derive(Serialize)]
struct ReduceReport<'a> {
    tool: &'static str,
    version: &'static str,
    config: &'a ReduceArgs,
    cure_config: &'a CureConfig,
    manifest: String,
    input_sha256: String,
    system: SystemInfo,
    /// Order of the combined ROM: 2k plus the rank of the polynomial block.
    order: usize,
    strictly_proper_order: usize,
    steps: usize,
    polynomial_part: Option<Vec<Vec<f64>>>,
    rom_h2_norm: f64,
    checks: Checks,
    cure: &'a CureReport,
    timings: Timings,
}

fn cmd_reduce(args: ReduceArgs) -> Result<()> {
    let t0 = Instant::now();
    let manifest = manifest_path(&args.manifest);
    let input_sha256 = content_hash(&manifest)?;
    let sys = read_system(&manifest)?;
    require_siso(&sys)?;
    let load_s = t0.elapsed().as_secs_f64();

    let cfg = CureConfig {
        tol_rel: args.tol,
        max_steps: args.max_steps,
        init: SparkParams::new(args.shifts_init.0, args.shifts_init.1)?,
        warm_start: args.warm_start,
        spark: TrustRegionConfig {
            hessian: match args.hessian {
                HessianArg::Fd => HessianMode::FiniteDifference,
                HessianArg::Analytic => HessianMode::Analytic,
            },
            parametrization: match args.parametrization {
                ParamArg::Linear => Parametrization::Linear,
                ParamArg::Log => Parametrization::Log,
            },
            ..TrustRegionConfig::default()
        },
        check_steps: true,
    };
    cfg.spark.validate()?;
    let t1 = Instant::now();
    let red = reduce_dae(&sys, &cfg, args.fold_feedthrough)?;
    let reduce_s = t1.elapsed().as_secs_f64();

    let t2 = Instant::now();
    let frequency = if args.points > 0 {
        let grid = log_grid(args.wmin, args.wmax, args.points);
        Some(FrequencyResponse::sample(
            &grid,
            |s| eval_transfer(&sys, s),
            |s| red.rom.eval(s),
        )?)
    } else {
        None
    };
    let sample_s = t2.elapsed().as_secs_f64();

    let steps = &red.report.steps;
    let history: Vec<HistoryRow> = steps
        .iter()
        .map(|s| HistoryRow {
            k: s.k,
            norm: s.norm,
            rel_increase: s.rel_increase,
        })
        .collect();
    let checks = Checks {
        max_interpolation_residual: steps
            .iter()
            .flat_map(|s| s.interpolation_residuals.iter().copied())
            .fold(0.0, f64::max),
        every_step_stable: steps.iter().all(|s| s.total_stable),
        rom_norms_nondecreasing: steps.windows(2).all(|w| w[1].norm >= w[0].norm * (1.0 - 1e-12)),
        final_rom_stable: red.strictly_proper.is_stable()?,
        max_relative_frequency_error: frequency.as_ref().map(|f| f.max_relative_error()),
    };
    let report = ReduceReport {
        tool: "daecure",
        version: env!("CARGO_PKG_VERSION"),
        config: &args,
        cure_config: &cfg,
        manifest: manifest.display().to_string(),
        input_sha256,
        system: SystemInfo::of(&sys),
        order: red.rom.order(),
        strictly_proper_order: red.strictly_proper.order(),
        steps: steps.len(),
        polynomial_part: red
            .polynomial
            .as_ref()
            .map(|p| p.outer_iter().map(|r| r.to_vec()).collect()),
        rom_h2_norm: steps.last().map_or(0.0, |s| s.norm),
        checks,
        cure: &red.report,
        timings: Timings {
            load_s,
            reduce_s,
            sample_s,
            total_s: t0.elapsed().as_secs_f64(),
        },
    };
    write_results(
        &RunArtifacts {
            report: &report,
            rom: &red.rom,
            history: &history,
            frequency: frequency.as_ref(),
        },
        &args.out,
    )?;
    println!(
        "{:?} after {} steps: order {} (strictly proper {}), ||G_r|| = {:.6e}; results in {}",
        red.report.status,
        steps.len(),
        report.order,
        report.strictly_proper_order,
        report.rom_h2_norm,
        args.out.display()
    );
    Ok(())
}

fn cmd_bode(args: BodeArgs) -> Result<()> {
    let fom = read_system(&manifest_path(&args.manifest))?;
    let rom = read_system(&manifest_path(&args.rom))?;
    if (fom.m(), fom.p()) != (rom.m(), rom.p()) {
        return Err(Error::DimensionMismatch(format!(
            "full model is {}x{}, reduced model is {}x{}",
            fom.p(),
            fom.m(),
            rom.p(),
            rom.m()
        )));
    }
    let grid = log_grid(args.wmin, args.wmax, args.points);
    let fr = FrequencyResponse::sample(&grid, |s| eval_transfer(&fom, s), |s| eval_transfer(&rom, s))?;
    match &args.out {
        Some(path) => write_frequency_csv(path, &fr),
        None => {
            let stdout = std::io::stdout();
            write_frequency_csv_to(stdout.lock(), &fr, Path::new("<stdout>"))
        }
    }
}

/// Dense Gramian route up to the desk limit, adaptive quadrature on the
/// deflated transfer function beyond it.
fn strictly_proper_norm(sys: &DaeSystem, rel_tol: f64) -> Result<f64> {
    if sys.n() <= DESK_LIMIT {
        return h2_norm_dae(sys);
    }
    let kit = ProjectorKit::build(sys)?;
    let opsys = DeflatedSystem::new(sys, &kit)?;
    let sq = h2_norm_by_quadrature(|s| opsys.eval(s), sys.spectral_scale().sqrt(), rel_tol)?;
    Ok(sq.max(0.0).sqrt())
}

fn cmd_h2norm(args: H2normArgs) -> Result<()> {
    let sys = read_system(&manifest_path(&args.path))?;
    if let PolyPart::Constant(p) = polynomial_part(&sys)? {
        let mag = p.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        log::warn!("constant part with max entry {mag:e} is excluded from the norm");
    }
    println!("{}", strictly_proper_norm(&sys, args.rel_tol)?);
    Ok(())
}

#[derive(Serialize)]
struct CheckOutcome {
    name: &'static str,
    passed: bool,
    detail: String,
}

#[derive(Serialize)]
struct ValidationReport {
    manifest: String,
    system: SystemInfo,
    passed: bool,
    checks: Vec<CheckOutcome>,
}

fn norm2(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum::<f64>().sqrt()
}

fn diff_norm(x: &[f64], y: &[f64]) -> f64 {
    x.iter().zip(y).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt()
}

/// Deterministic probe vectors in [−1, 1) from a splitmix-style sequence.
fn probe(n: usize, seed: u64) -> Vec<f64> {
    let mut state = seed.wrapping_mul(0x9E37_79B9_7F4A_7C15).wrapping_add(1);
    (0..n)
        .map(|_| {
            state = state.wrapping_add(0x9E37_79B9_7F4A_7C15);
            let mut z = state;
            z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
            z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
            z ^= z >> 31;
            (z >> 11) as f64 / (1u64 << 53) as f64 * 2.0 - 1.0
        })
        .collect()
}

fn validate_system(sys: &DaeSystem, probes: usize, seed: u64) -> Result<Vec<CheckOutcome>> {
    const TOL: f64 = 1e-8;
    let mut out = Vec::new();
    let lapack = lapack_self_check();
    out.push(CheckOutcome {
        name: "lapack_self_check",
        passed: lapack < 1e-12,
        detail: format!("inverse residual {lapack:.3e}"),
    });
    out.push(CheckOutcome {
        name: "structure",
        passed: true,
        detail: format!("{:?}, n = {}, finite dimension {}", sys.structure(), sys.n(), sys.n_f()),
    });

    let kit = ProjectorKit::build(sys)?;
    let n = sys.n();
    let (mut idem, mut comm) = (0.0f64, 0.0f64);
    for k in 0..probes {
        let x = probe(n, seed.wrapping_add(k as u64));
        let pl = kit.apply_pl(&x)?;
        let pr = kit.apply_pr(&x)?;
        idem = idem.max(diff_norm(&kit.apply_pl(&pl)?, &pl) / norm2(&pl).max(f64::MIN_POSITIVE));
        idem = idem.max(diff_norm(&kit.apply_pr(&pr)?, &pr) / norm2(&pr).max(f64::MIN_POSITIVE));
        // E·Π_r·x = Π_l·E·x.
        let lhs = sys.e().mul_vec(&pr);
        let rhs = kit.apply_pl(&sys.e().mul_vec(&x))?;
        let scale = norm2(&sys.e().mul_vec(&x)).max(norm2(&lhs)).max(f64::MIN_POSITIVE);
        comm = comm.max(diff_norm(&lhs, &rhs) / scale);
    }
    out.push(CheckOutcome {
        name: "projector_idempotence",
        passed: idem <= TOL,
        detail: format!("max relative defect {idem:.3e} over {probes} probes"),
    });
    out.push(CheckOutcome {
        name: "projector_commutation",
        passed: comm <= TOL,
        detail: format!("max relative defect {comm:.3e} over {probes} probes"),
    });

    out.push(match polynomial_part(sys) {
        Ok(PolyPart::StrictlyProper) => CheckOutcome {
            name: "polynomial_part",
            passed: true,
            detail: "strictly proper".into(),
        },
        Ok(PolyPart::Constant(p)) => CheckOutcome {
            name: "polynomial_part",
            passed: true,
            detail: format!(
                "constant, max entry {:.3e}",
                p.iter().fold(0.0f64, |m, v| m.max(v.abs()))
            ),
        },
        Err(e) => CheckOutcome {
            name: "polynomial_part",
            passed: false,
            detail: e.to_string(),
        },
    });

    out.push(if n <= DESK_LIMIT {
        let (e, a, _, _) = sys.to_dense()?;
        let split = DenseSplit::new(&e, &a)?;
        let eigs = eig_pencil_dense(&split.e_f, &split.a_f)?;
        let finite: Vec<Complex64> = eigs.iter().filter_map(|p| p.value).collect();
        let worst = finite.iter().map(|l| l.re).fold(f64::NEG_INFINITY, f64::max);
        CheckOutcome {
            name: "finite_spectrum_stable",
            passed: finite.len() == split.n_f && worst < 0.0,
            detail: format!("{} finite eigenvalues, max real part {worst:.6e}", finite.len()),
        }
    } else {
        CheckOutcome {
            name: "finite_spectrum_stable",
            passed: true,
            detail: format!("skipped: n = {n} exceeds the dense limit {DESK_LIMIT}"),
        }
    });
    Ok(out)
}

/// Returns whether every check passed.
fn cmd_validate(args: ValidateArgs) -> Result<bool> {
    let manifest = manifest_path(&args.path);
    let sys = read_system(&manifest)?;
    let checks = validate_system(&sys, args.probes.max(1), args.seed)?;
    let passed = checks.iter().all(|c| c.passed);
    let report = ValidationReport {
        manifest: manifest.display().to_string(),
        system: SystemInfo::of(&sys),
        passed,
        checks,
    };
    println!(
        "{}",
        serde_json::to_string_pretty(&report).expect("serializable report")
    );
    Ok(passed)
}

fn cmd_gen(args: GenArgs) -> Result<()> {
    let sys = match args.kind {
        GenKind::Index1 => {
            if args.n1 == 0 || args.n2 == 0 {
                return Err(Error::Unsupported("--n1 and --n2 must be positive".into()));
            }
            gen_semi_explicit_index1(args.n1, args.n2, args.seed)?
        }
        GenKind::Stokes2 => {
            if args.m < 3 {
                return Err(Error::Unsupported("--m must be at least 3".into()));
            }
            gen_stokes_index2(args.m, args.seed)?
        }
    };
    let path = write_system(&sys, &args.out)?;
    println!("{}", path.display());
    Ok(())
}

fn exit_code(cat: ErrorCategory) -> u8 {
    match cat {
        ErrorCategory::Numerical => 1,
        ErrorCategory::Unsupported => 2,
        ErrorCategory::Io => 3,
    }
}

fn report_error(e: &Error) -> ExitCode {
    let category = e.category();
    let body = serde_json::json!({
        "error": {
            "kind": e.kind(),
            "category": format!("{category:?}").to_lowercase(),
            "message": e.to_string(),
        }
    });
    let _ = writeln!(std::io::stderr(), "{body}");
    ExitCode::from(exit_code(category))
}

fn configure_threads() {
    let Ok(v) = std::env::var("DAECURE_THREADS") else {
        return;
    };
    match v.trim().parse::<usize>() {
        Ok(n) if n > 0 => {
            if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
                log::warn!("could not size the thread pool: {e}");
            }
        }
        _ => log::warn!("ignoring DAECURE_THREADS={v}: expected a positive integer"),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    configure_threads();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Reduce(a) => cmd_reduce(a).map(|_| true),
        Command::Bode(a) => cmd_bode(a).map(|_| true),
        Command::H2norm(a) => cmd_h2norm(a).map(|_| true),
        Command::Validate(a) => cmd_validate(a),
        Command::Gen(a) => cmd_gen(a).map(|_| true),
    };
    match result {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => report_error(&e),
    }
}
