//! Acceptance criteria 1 to 10, each printed as one PASS/FAIL line.
//!
//! Criterion 11 (BIPS/97) needs an external download; it runs only when
//! `DAECURE_BIPS97` points at a manifest of that model and is reported as
//! SKIP otherwise.

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::time::Instant;

use daecure::bench_io::{gen_ode_with_poles, gen_semi_explicit_index1, gen_stokes_index2, read_system};
use daecure::cure::{assemble_total, cured_spark, eval_cascade, reduce_dae, CureConfig, CureRecord};
use daecure::daemodel::{DaeSystem, ProjectorKit, StructureTag};
use daecure::h2analysis::{
    h2_error_norm, h2_inner_pole_residue, h2_inner_sylvester_dense, h2_norm_by_quadrature, h2_norm_dae,
    h2_norm_deflated, h2_norm_rom, rom_to_pole_residue, Descriptor,
};
use daecure::interp::{spark_basis, DeflatedSystem, InterpData};
use daecure::pork::{check_orthogonality, pork_input, Provenance, RomRealization};
use daecure::spark::{closed_form_gramian, spark, spark_cost, spark_gradient, SparkParams, TrustRegionConfig};
use daecure::{Error, Result};
use ndarray::{array, s, Array1, Array2};
use ndarray_linalg::{Eig, Inverse, Solve};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

struct Outcome {
    passed: bool,
    detail: String,
}

fn outcome(passed: bool, detail: impl Into<String>) -> Result<Outcome> {
    Ok(Outcome {
        passed,
        detail: detail.into(),
    })
}

fn fro(a: &Array2<f64>) -> f64 {
    a.iter().map(|v| v * v).sum::<f64>().sqrt()
}

fn fro_c(a: &Array2<Complex64>) -> f64 {
    a.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt()
}

fn rel_diff(x: &Array2<f64>, y: &Array2<f64>) -> f64 {
    fro(&(x - y)) / fro(y).max(f64::MIN_POSITIVE)
}

fn cplx(a: &Array2<f64>) -> Array2<Complex64> {
    a.mapv(|v| Complex64::new(v, 0.0))
}

/// Eigenvalues of Er⁻¹·Ar by plain LAPACK calls, independent of the
/// library's pencil routines.
fn rom_eigs(rom: &RomRealization) -> Vec<Complex64> {
    let m = rom.er.solve_into_many(&rom.ar);
    m.eig().expect("eig").0.to_vec()
}

trait SolveMany {
    fn solve_into_many(&self, b: &Array2<f64>) -> Array2<f64>;
}

impl SolveMany for Array2<f64> {
    fn solve_into_many(&self, b: &Array2<f64>) -> Array2<f64> {
        let mut x = Array2::zeros(b.dim());
        for j in 0..b.ncols() {
            x.column_mut(j)
                .assign(&self.solve(&b.column(j).to_owned()).expect("nonsingular"));
        }
        x
    }
}

/// Strictly proper FOM transfer value by a dense complex solve; the
/// constant part of a semi-explicit index-1 system is −C2·A22⁻¹·B2.
struct DenseOracle {
    e: Array2<Complex64>,
    a: Array2<Complex64>,
    b: Array2<Complex64>,
    c: Array2<Complex64>,
    constant: Array2<Complex64>,
}

impl DenseOracle {
    fn new(sys: &DaeSystem) -> Self {
        let (e, a, b, c) = (
            sys.e().to_dense(),
            sys.a().to_dense(),
            sys.b().to_dense(),
            sys.c().to_dense(),
        );
        let constant = match *sys.structure() {
            StructureTag::SemiExplicitIndex1 { n1 } => {
                let a22 = a.slice(s![n1.., n1..]).to_owned();
                let b2 = b.slice(s![n1.., ..]).to_owned();
                let c2 = c.slice(s![.., n1..]).to_owned();
                -c2.dot(&a22.solve_into_many(&b2))
            }
            _ => Array2::zeros((c.nrows(), b.ncols())),
        };
        DenseOracle {
            e: cplx(&e),
            a: cplx(&a),
            b: cplx(&b),
            c: cplx(&c),
            constant: cplx(&constant),
        }
    }

    fn eval(&self, s: Complex64) -> Array2<Complex64> {
        let k = self.e.mapv(|v| v * s) - &self.a;
        let mut x = Array2::zeros(self.b.dim());
        for j in 0..self.b.ncols() {
            x.column_mut(j)
                .assign(&k.solve(&self.b.column(j).to_owned()).expect("regular shift"));
        }
        self.c.dot(&x) - &self.constant
    }
}

/// ‖F‖ from adaptive quadrature of the pointwise values.
fn quad_norm(f: impl Fn(Complex64) -> Result<Array2<Complex64>>, omega0: f64) -> Result<f64> {
    h2_norm_by_quadrature(f, omega0, 1e-12)
}

fn totals(records: &[CureRecord]) -> Result<Vec<RomRealization>> {
    (1..=records.len()).map(|k| assemble_total(&records[..k])).collect()
}

/// Desk-scale systems shared by criteria 3, 4 and 8.
fn desk_systems() -> Vec<(&'static str, DaeSystem)> {
    vec![
        ("index-1 120+30", gen_semi_explicit_index1(120, 30, 11).unwrap()),
        ("index-1 40+10", gen_semi_explicit_index1(40, 10, 12).unwrap()),
        ("Stokes m=6", gen_stokes_index2(6, 13).unwrap()),
        ("Stokes m=8", gen_stokes_index2(8, 14).unwrap()),
        (
            "ODE n=12",
            gen_ode_with_poles(
                &[
                    -0.05, -0.2, -0.5, -1.0, -1.5, -2.0, -4.0, -7.0, -10.0, -20.0, -50.0, -100.0,
                ],
                15,
            )
            .unwrap(),
        ),
    ]
}

fn c1_interpolation() -> Result<Outcome> {
    let cases = [
        ("index-1 500+100", gen_semi_explicit_index1(500, 100, 1)?),
        ("Stokes m=12", gen_stokes_index2(12, 1)?),
    ];
    let mut passed = true;
    let mut parts = Vec::new();
    for (name, sys) in &cases {
        let t = Instant::now();
        let red = reduce_dae(sys, &CureConfig::default(), false)?;
        let secs = t.elapsed().as_secs_f64();
        let steps = &red.report.steps;
        let per_step = steps
            .iter()
            .flat_map(|s| s.interpolation_residuals.iter().copied())
            .fold(0.0, f64::max);
        let complete = steps.iter().all(|s| s.interpolation_residuals.len() == 2);
        // The total model interpolates the full strictly proper transfer
        // function at the shifts of all steps so far.
        let oracle = DenseOracle::new(sys);
        let mut cumulative: f64 = 0.0;
        for (k, total) in totals(&red.ledger.records)?.iter().enumerate() {
            for step in &steps[..=k] {
                for sh in &step.shifts {
                    let sigma = Complex64::new(sh[0], sh[1]);
                    let g = oracle.eval(sigma);
                    let r = total.eval(sigma)?;
                    cumulative = cumulative.max(fro_c(&(&g - &r)) / fro_c(&g));
                }
            }
        }
        let ok = complete && per_step <= 1e-8 && cumulative <= 1e-8 && secs < 60.0;
        passed &= ok;
        parts.push(format!(
            "{name}: {} steps, per-step max {per_step:.1e}, cumulative max {cumulative:.1e}, {secs:.1} s",
            steps.len()
        ));
    }
    outcome(passed, parts.join("; "))
}

fn fuzz_system(seed: u64) -> Result<(String, DaeSystem)> {
    let mut rng = ChaCha8Rng::seed_from_u64(1000 + seed);
    Ok(match seed % 3 {
        0 => {
            let (n1, n2) = (rng.gen_range(4..80), rng.gen_range(1..20));
            (format!("index-1 {n1}+{n2}"), gen_semi_explicit_index1(n1, n2, seed)?)
        }
        1 => {
            let m = rng.gen_range(3..8);
            (format!("Stokes m={m}"), gen_stokes_index2(m, seed)?)
        }
        _ => {
            let n = rng.gen_range(2..16);
            let poles: Vec<f64> = (0..n).map(|_| -(10f64.powf(rng.gen_range(-2.0..2.5)))).collect();
            (format!("ODE n={n}"), gen_ode_with_poles(&poles, seed)?)
        }
    })
}

fn c2_stability() -> Result<Outcome> {
    let cfg = CureConfig {
        max_steps: 8,
        ..Default::default()
    };
    let (mut violations, mut checked, mut failures) = (0usize, 0usize, Vec::new());
    for seed in 0..50 {
        let (name, sys) = fuzz_system(seed)?;
        match reduce_dae(&sys, &cfg, false) {
            Ok(red) => {
                for (step, total) in red.report.steps.iter().zip(totals(&red.ledger.records)?) {
                    checked += 1;
                    let eig_ok = rom_eigs(&total).iter().all(|l| l.re < 0.0);
                    if !eig_ok || !step.total_stable {
                        violations += 1;
                    }
                }
            }
            Err(e) => failures.push(format!("seed {seed} ({name}): {e}")),
        }
    }
    let detail = format!("{violations} violations over {checked} total models from 50 seeds");
    if failures.is_empty() {
        outcome(violations == 0, detail)
    } else {
        outcome(false, format!("{detail}; runs failed: {}", failures.join(", ")))
    }
}

fn c3_norm_decomposition() -> Result<Outcome> {
    let mut worst: f64 = 0.0;
    let mut count = 0;
    for (_, sys) in desk_systems() {
        assert!(sys.n() <= 200);
        let kit = ProjectorKit::build(&sys)?;
        let op = DeflatedSystem::new(&sys, &kit)?;
        let g2 = h2_norm_deflated(&op)?.powi(2);
        let (_, _, ledger) = cured_spark(&op, &CureConfig::default())?;
        for total in totals(&ledger.records)? {
            let r2 = h2_norm_rom(&total)?.powi(2);
            let e2 = h2_error_norm(&op, &total)?.powi(2);
            worst = worst.max((g2 - r2 - e2).abs() / g2);
            count += 1;
        }
    }
    outcome(
        worst <= 1e-6,
        format!("max |‖G‖² − ‖G_r‖² − ‖G − G_r‖²| / ‖G‖² = {worst:.1e} over {count} total models"),
    )
}

/// ⟨G − G_r, G_M⟩ for G_M = (I, −Sᵀ, Rᵀ, C_M) by the Sylvester route on the
/// augmented error realization.
fn orthogonality_by_sylvester(
    op: &DeflatedSystem,
    rom: &RomRealization,
    data: &InterpData,
    rng: &mut ChaCha8Rng,
    trials: usize,
) -> Result<f64> {
    let err = Descriptor::from_deflated(op)?.difference(&Descriptor::from_rom(rom))?;
    let g_norm = h2_norm_deflated(op)?;
    let q = data.s.nrows();
    let mut worst: f64 = 0.0;
    for _ in 0..trials {
        let gm = RomRealization {
            er: Array2::eye(q),
            ar: -data.s.t().to_owned(),
            br: data.r.t().to_owned(),
            cr: Array2::from_shape_fn((op.p(), q), |_| rng.gen_range(-1.0..1.0)),
            dr: Array2::zeros((op.p(), op.m())),
            provenance: Provenance::new("test_space"),
        };
        let ip = h2_inner_sylvester_dense(&err, &Descriptor::from_rom(&gm))?.value;
        worst = worst.max(ip.abs() / (g_norm * h2_norm_rom(&gm)?));
    }
    Ok(worst)
}

fn c4_orthogonality() -> Result<Outcome> {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let (mut by_residues, mut by_sylvester): (f64, f64) = (0.0, 0.0);
    let mut cases = 0;
    for (i, (_, sys)) in desk_systems().into_iter().enumerate() {
        let kit = ProjectorKit::build(&sys)?;
        let op = DeflatedSystem::new(&sys, &kit)?;
        // The SPARK optimum and two arbitrary parameter pairs: PORK is
        // pseudo-optimal for any (a, b).
        let opt = spark(&op, SparkParams::new(1e-4, 1e-4)?, &TrustRegionConfig::default())?;
        let mut models = vec![(opt.rom, opt.data)];
        for _ in 0..2 {
            let (a, b) = (
                10f64.powf(rng.gen_range(-1.0..1.5)),
                10f64.powf(rng.gen_range(-1.0..2.0)),
            );
            let (basis, data) = spark_basis(&op, a, b)?;
            models.push((pork_input(&basis, &data, &op.c)?, data));
        }
        for (rom, data) in &models {
            by_residues = by_residues.max(check_orthogonality(&op, rom, data, 10, 40 + i as u64)?);
            by_sylvester = by_sylvester.max(orthogonality_by_sylvester(&op, rom, data, &mut rng, 10)?);
            cases += 1;
        }
    }
    outcome(
        by_residues <= 1e-8 && by_sylvester <= 1e-8,
        format!(
            "max |⟨G − G_r, G_M⟩| / (‖G‖‖G_M‖) over 10 C_M each on {cases} models: pole-residue {by_residues:.1e}, Sylvester {by_sylvester:.1e}"
        ),
    )
}

/// Random stable ROM: Er symmetric positive definite and Ar with negative
/// definite symmetric part, so every eigenvalue of Er⁻¹Ar is in the open
/// left half-plane.
fn random_stable_rom(rng: &mut ChaCha8Rng, q: usize) -> RomRealization {
    let mut rand = |r: usize, c: usize| Array2::from_shape_fn((r, c), |_| rng.gen_range(-1.0..1.0));
    let m = rand(q, q);
    let er = m.dot(&m.t()) + Array2::<f64>::eye(q);
    let n = rand(q, q);
    let k = rand(q, q);
    let ar = -(n.dot(&n.t()) + Array2::<f64>::eye(q) * 0.2) + (&k - &k.t());
    RomRealization {
        er,
        ar,
        br: rand(q, 1),
        cr: rand(1, q),
        dr: Array2::zeros((1, 1)),
        provenance: Provenance::new("random"),
    }
}

fn c5_two_route_inner_product() -> Result<Outcome> {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let (mut routes, mut quad, mut sym, mut gram): (f64, f64, f64, f64) = (0.0, 0.0, 0.0, 0.0);
    for pair in 0..20u64 {
        let g = match pair % 3 {
            0 => gen_semi_explicit_index1(rng.gen_range(3..20), rng.gen_range(1..6), pair)?,
            1 => gen_stokes_index2(rng.gen_range(3..5), pair)?,
            _ => {
                let n = rng.gen_range(2..10);
                let poles: Vec<f64> = (0..n).map(|_| -(10f64.powf(rng.gen_range(-1.0..1.5)))).collect();
                gen_ode_with_poles(&poles, pair)?
            }
        };
        let q = rng.gen_range(1..7);
        let h = random_stable_rom(&mut rng, q);
        let kit = ProjectorKit::build(&g)?;
        let op = DeflatedSystem::new(&g, &kit)?;
        let scale = h2_norm_dae(&g)? * h2_norm_rom(&h)?;

        let sylv = h2_inner_sylvester_dense(&Descriptor::from_system(&g)?, &Descriptor::from_rom(&h))?;
        let residues = h2_inner_pole_residue(|s| op.eval(s), &rom_to_pole_residue(&h)?)?;
        routes = routes.max((sylv.value - residues.re).abs().max(residues.im.abs()) / scale);
        sym = sym.max((sylv.value - sylv.dual).abs() / scale);

        // Polarization of quadrature norms as a third, pointwise route.
        let w0 = g.spectral_scale().sqrt();
        let plus = quad_norm(|s| Ok(op.eval(s)? + h.eval(s)?), w0)?;
        let minus = quad_norm(|s| Ok(op.eval(s)? - h.eval(s)?), w0)?;
        quad = quad.max((sylv.value - 0.25 * (plus * plus - minus * minus)).abs() / scale);

        // Gramian symmetry trace(C·X·Cᵀ) = trace(Bᵀ·Y·B) for G itself.
        gram = gram.max(
            h2_inner_sylvester_dense(&Descriptor::from_system(&g)?, &Descriptor::from_system(&g)?)?.relative_gap(),
        );
    }
    outcome(
        routes <= 1e-8 && sym <= 1e-8 && quad <= 1e-8 && gram <= 1e-8,
        format!(
            "20 pairs, relative to ‖G‖‖H‖: Sylvester vs pole-residue {routes:.1e}, primal vs dual {sym:.1e}, vs quadrature {quad:.1e}; Gramian symmetry gap {gram:.1e}"
        ),
    )
}

/// Solves M·P + P·Mᵀ + Q = 0 for 2×2 matrices through the 4×4 Kronecker
/// system.
fn lyap2(m: &Array2<f64>, q: &Array2<f64>) -> Array2<f64> {
    let mut k = Array2::<f64>::zeros((4, 4));
    for i in 0..2 {
        for j in 0..2 {
            for l in 0..2 {
                // Row (i, j): Σ_l M[i,l]·P[l,j] + P[i,l]·M[j,l].
                k[[2 * i + j, 2 * l + j]] += m[[i, l]];
                k[[2 * i + j, 2 * i + l]] += m[[j, l]];
            }
        }
    }
    let rhs = Array1::from_iter(q.iter().map(|v| -v));
    let p = k.solve(&rhs).expect("Lyapunov operator is nonsingular");
    Array2::from_shape_vec((2, 2), p.to_vec()).unwrap()
}

fn c6_closed_form() -> Result<Outcome> {
    let sys = gen_semi_explicit_index1(30, 8, 6)?;
    let kit = ProjectorKit::build(&sys)?;
    let op = DeflatedSystem::new(&sys, &kit)?;
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let mut worst = [0.0f64; 4];
    for _ in 0..100 {
        // Uniform on (0, 10].
        let a = 10.0 - rng.gen_range(0.0..10.0);
        let b = 10.0 - rng.gen_range(0.0..10.0);
        let (basis, data) = spark_basis(&op, a, b)?;
        let rom = pork_input(&basis, &data, &op.c)?;
        let er = array![[a * a + b, -a], [-a, 1.0]] / (4.0 * a * b);
        let ar = array![[-2.0 * a, 1.0], [-1.0, 0.0]] / (4.0 * a);
        let br = array![[-1.0], [0.0]];
        let gramian = array![[4.0 * a, 4.0 * a * a], [4.0 * a * a, 4.0 * a * (a * a + b)]];
        let einv = rom.er.inv()?;
        let m = einv.dot(&rom.ar);
        let eb = einv.dot(&rom.br);
        let p = lyap2(&m, &eb.dot(&eb.t()));
        for (w, v) in worst.iter_mut().zip([
            rel_diff(&rom.er, &er),
            rel_diff(&rom.ar, &ar),
            rel_diff(&rom.br, &br),
            rel_diff(&p, &gramian).max(rel_diff(&closed_form_gramian(a, b), &gramian)),
        ]) {
            *w = w.max(v);
        }
    }
    let [e, a, b, g] = worst;
    outcome(
        worst.iter().all(|&w| w <= 1e-12),
        format!("100 (a, b): max relative deviation Er {e:.1e}, Ar {a:.1e}, br {b:.1e}, Gramian {g:.1e}"),
    )
}

fn c7_gradient() -> Result<Outcome> {
    let systems = [
        ("index-1 60+15", gen_semi_explicit_index1(60, 15, 7)?),
        ("Stokes m=5", gen_stokes_index2(5, 7)?),
        (
            "ODE n=6",
            gen_ode_with_poles(&[-0.3, -1.0, -2.0, -5.0, -9.0, -30.0], 7)?,
        ),
    ];
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut worst: f64 = 0.0;
    for (_, sys) in &systems {
        let kit = ProjectorKit::build(sys)?;
        let op = DeflatedSystem::new(sys, &kit)?;
        for _ in 0..25 {
            let a = 10f64.powf(rng.gen_range(-1.5..1.5));
            let b = 10f64.powf(rng.gen_range(-2.0..2.0));
            let (_, g) = spark_gradient(&op, SparkParams::new(a, b)?)?;
            let (ha, hb) = (1e-5 * a, 1e-5 * b);
            let cost = |a, b| spark_cost(&op, SparkParams::new(a, b)?);
            let fa = (cost(a + ha, b)? - cost(a - ha, b)?) / (2.0 * ha);
            let fb = (cost(a, b + hb)? - cost(a, b - hb)?) / (2.0 * hb);
            let err = ((g[0] - fa).powi(2) + (g[1] - fb).powi(2)).sqrt();
            worst = worst.max(err / (g[0].hypot(g[1])));
        }
    }
    outcome(
        worst <= 1e-5,
        format!("max relative error vs central differences over 75 points: {worst:.1e}"),
    )
}

fn c8_monotonicity() -> Result<Outcome> {
    let (mut norm_drop, mut err_rise, mut allpass): (f64, f64, f64) = (0.0, 0.0, 0.0);
    let mut runs = 0;
    for (_, sys) in desk_systems() {
        let kit = ProjectorKit::build(&sys)?;
        let op = DeflatedSystem::new(&sys, &kit)?;
        let (_, report, ledger) = cured_spark(&op, &CureConfig::default())?;
        runs += 1;
        let g_norm = h2_norm_deflated(&op)?;
        for w in report.steps.windows(2) {
            norm_drop = norm_drop.max((w[0].norm - w[1].norm) / g_norm);
        }
        let w0 = sys.spectral_scale().sqrt();
        let mut prev = g_norm;
        for total in totals(&ledger.records)? {
            let e = quad_norm(|s| Ok(op.eval(s)? - total.eval(s)?), w0)?;
            err_rise = err_rise.max((e - prev) / g_norm);
            prev = e;
        }
        // Five decades centred on the shift magnitudes of each factor.
        for rec in &ledger.records {
            let factor = rec.allpass_factor();
            let centre = rec
                .rom
                .provenance
                .shifts
                .iter()
                .map(|z| z[0].hypot(z[1]).ln())
                .sum::<f64>()
                / rec.rom.provenance.shifts.len() as f64;
            for i in 0..=50 {
                let omega = centre.exp() * 10f64.powf(-2.5 + 5.0 * i as f64 / 50.0);
                let g = factor.eval(Complex64::new(0.0, omega))?;
                allpass = allpass.max((g[[0, 0]].norm() - 1.0).abs());
            }
        }
    }
    outcome(
        norm_drop <= 0.0 && err_rise <= 1e-10 && allpass <= 1e-8,
        format!(
            "{runs} runs: largest ROM-norm decrease {:.1e}, largest error-norm increase {err_rise:.1e} (relative to ‖G‖, quadrature), all-pass |G̃(iω)| − 1 max {allpass:.1e}",
            norm_drop.max(0.0)
        ),
    )
}

fn c9_assembly() -> Result<Outcome> {
    let cfg = CureConfig {
        tol_rel: 0.0,
        max_steps: 10,
        ..Default::default()
    };
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let mut worst: f64 = 0.0;
    let mut reached = Vec::new();
    for sys in [gen_semi_explicit_index1(150, 40, 9)?, gen_stokes_index2(8, 9)?] {
        let kit = ProjectorKit::build(&sys)?;
        let op = DeflatedSystem::new(&sys, &kit)?;
        let (_, _, ledger) = cured_spark(&op, &cfg)?;
        reached.push(ledger.records.len());
        for k in 1..=ledger.records.len() {
            let total = assemble_total(&ledger.records[..k])?;
            for _ in 0..20 {
                let s = Complex64::new(0.0, 10f64.powf(rng.gen_range(-2.0..3.0)));
                let cascade = eval_cascade(&ledger.records[..k], s)?;
                worst = worst.max(fro_c(&(total.eval(s)? - &cascade)) / fro_c(&cascade));
            }
        }
    }
    outcome(
        worst <= 1e-10 && reached.iter().all(|&k| k == 10),
        format!("steps reached {reached:?}; max relative deviation over 20 frequencies per k: {worst:.1e}"),
    )
}

fn recovery(sys: &DaeSystem, steps: usize) -> Result<(usize, f64, f64)> {
    let kit = ProjectorKit::build(sys)?;
    let op = DeflatedSystem::new(sys, &kit)?;
    let cfg = CureConfig {
        tol_rel: 0.0,
        max_steps: steps,
        ..Default::default()
    };
    let (total, _, _) = cured_spark(&op, &cfg)?;
    let err = quad_norm(|s| Ok(op.eval(s)? - total.eval(s)?), 1.0)?;
    Ok((total.order(), err, h2_norm_deflated(&op)?))
}

fn c10_exact_recovery() -> Result<Outcome> {
    let complex2 = DaeSystem::from_dense(
        &Array2::eye(2),
        &array![[-0.5, 2.0], [-2.0, -0.5]],
        &array![[1.0], [0.4]],
        &array![[0.8, -1.1]],
        None,
    )?;
    let cases: [(&str, DaeSystem, usize); 4] = [
        ("order 2 real poles", gen_ode_with_poles(&[-1.0, -3.0], 10)?, 1),
        ("order 2 complex poles", complex2, 1),
        (
            "order 4 real poles",
            gen_ode_with_poles(&[-0.5, -1.0, -4.0, -10.0], 10)?,
            2,
        ),
        (
            "order 4 spread poles",
            gen_ode_with_poles(&[-0.1, -0.7, -3.0, -25.0], 11)?,
            2,
        ),
    ];
    let mut passed = true;
    let mut parts = Vec::new();
    for (name, sys, steps) in cases {
        let (order, err, g) = recovery(&sys, steps)?;
        let ok = order == sys.n() && err <= 1e-8;
        passed &= ok;
        parts.push(format!("{name}: {steps} step(s), error {err:.1e} (‖G‖ = {g:.2})"));
    }
    outcome(passed, parts.join("; "))
}

fn c11_bips97() -> Option<Result<Outcome>> {
    let path = std::env::var_os("DAECURE_BIPS97")?;
    Some((|| {
        let mut sys = read_system(std::path::Path::new(&path))?;
        if sys.m() > 1 || sys.p() > 1 {
            sys = sys.select_channel(41, 41)?;
        }
        let red = reduce_dae(&sys, &CureConfig::default(), false)?;
        let norm = red.report.steps.last().map_or(0.0, |s| s.norm);
        let rel = (norm - 0.97897).abs() / 0.97897;
        outcome(
            red.rom.order() == 33 && rel <= 0.01,
            format!(
                "order {} (expected 33), final ‖G_r,tot‖ = {norm:.5} ({:.2}% from 0.97897)",
                red.rom.order(),
                100.0 * rel
            ),
        )
    })())
}

fn report(id: u32, title: &str, run: impl FnOnce() -> Result<Outcome>) -> bool {
    let t = Instant::now();
    let res = catch_unwind(AssertUnwindSafe(run));
    let secs = t.elapsed().as_secs_f64();
    let (passed, detail) = match res {
        Ok(Ok(o)) => (o.passed, o.detail),
        Ok(Err(e)) => (false, format!("error {}: {e}", Error::kind(&e))),
        Err(p) => {
            let msg = p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_else(|| "panic".into());
            (false, format!("panicked: {msg}"))
        }
    };
    println!(
        "criterion {id:>2} {} {title} [{secs:.1} s]: {detail}",
        if passed { "PASS" } else { "FAIL" }
    );
    passed
}

fn main() {
    std::panic::set_hook(Box::new(|_| {}));
    println!("\nrunning acceptance criteria");
    let results = [
        report(1, "interpolation at every CURE step", c1_interpolation),
        report(2, "stability of every total model", c2_stability),
        report(3, "H2 error norm decomposition", c3_norm_decomposition),
        report(4, "orthogonality to the interpolation space", c4_orthogonality),
        report(5, "two-route H2 inner product", c5_two_route_inner_product),
        report(6, "closed-form SPARK reduced model", c6_closed_form),
        report(7, "analytic SPARK gradient", c7_gradient),
        report(8, "monotone norms and all-pass factors", c8_monotonicity),
        report(9, "total model equals the cascade", c9_assembly),
        report(10, "exact recovery of low-order systems", c10_exact_recovery),
    ];
    match c11_bips97() {
        Some(run) => {
            let ok = report(11, "BIPS/97 channel (42, 42)", || run);
            println!(
                "criterion 11 is optional; its result does not affect the exit status ({})",
                if ok { "pass" } else { "fail" }
            );
        }
        None => {
            println!("criterion 11 SKIP BIPS/97 reproduction: set DAECURE_BIPS97 to a manifest of the downloaded model")
        }
    }
    let failed = results.iter().filter(|&&ok| !ok).count();
    println!("acceptance: {} passed, {failed} failed\n", results.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
