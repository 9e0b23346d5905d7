//! Cumulative reduction: repeated SPARK steps on the residual system
//! (E, A, B⊥, C), accumulating a block-triangular total model.

use ndarray::{s, Array2};
use num_complex::Complex64;
use serde::Serialize;

use crate::daemodel::{polynomial_part, realize_constant_poly, DaeSystem, PolyPart, ProjectorKit};
use crate::error::{Error, Result};
use crate::h2analysis::h2_norm_rom;
use crate::interp::{BasisV, DeflatedSystem, InterpData};
use crate::numkernel::dense::solve_many;
use crate::pork::{check_interpolation, Provenance, RomRealization};
use crate::spark::{spark, SparkParams, SparkResult, SparkStatus, TrustRegionConfig};

/// One accepted CURE step.
#[derive(Clone, Debug)]
pub struct CureRecord {
    pub step: usize,
    pub params: SparkParams,
    pub basis: BasisV,
    pub data: InterpData,
    pub rom: RomRealization,
    pub cost: f64,
    pub degenerate: bool,
}

impl CureRecord {
    /// Factor G̃_r = (Er, Ar, Br, R, I).
    pub fn allpass_factor(&self) -> RomRealization {
        let m = self.rom.m();
        RomRealization {
            er: self.rom.er.clone(),
            ar: self.rom.ar.clone(),
            br: self.rom.br.clone(),
            cr: self.data.r.clone(),
            dr: Array2::eye(m),
            provenance: Provenance::new("allpass_factor"),
        }
    }
}

#[derive(Clone, Debug)]
pub struct CureLedger {
    pub k: usize,
    /// Current deflated input (n×m).
    pub b_perp: Array2<f64>,
    pub records: Vec<CureRecord>,
    pub total: Option<RomRealization>,
    /// ‖G_r,tot(k)‖ for k = 1, 2, …
    pub norms: Vec<f64>,
    pub rel_increase: Vec<f64>,
}

/// B⊥ = Π_l·B, no steps yet.
pub fn cure_init(opsys: &DeflatedSystem) -> CureLedger {
    CureLedger {
        k: 0,
        b_perp: opsys.b.clone(),
        records: Vec::new(),
        total: None,
        norms: Vec::new(),
        rel_increase: Vec::new(),
    }
}

/// Block-triangular assembly of the cascade
/// G_tot(k) = G_tot(k−1) + G_r(k)·G̃_r(k−1)···G̃_r(1).
pub fn assemble_total(records: &[CureRecord]) -> Result<RomRealization> {
    let first = records
        .first()
        .ok_or_else(|| Error::DimensionMismatch("assembly needs at least one step".into()))?;
    let (p, m) = (first.rom.p(), first.rom.m());
    let sizes: Vec<usize> = records.iter().map(|r| r.rom.order()).collect();
    let q: usize = sizes.iter().sum();
    let mut offs = vec![0usize];
    for s in &sizes {
        offs.push(offs.last().unwrap() + s);
    }
    let mut tot = RomRealization {
        er: Array2::zeros((q, q)),
        ar: Array2::zeros((q, q)),
        br: Array2::zeros((q, m)),
        cr: Array2::zeros((p, q)),
        dr: Array2::zeros((p, m)),
        provenance: Provenance {
            source: "cure_total".into(),
            shifts: records.iter().flat_map(|r| r.rom.provenance.shifts.clone()).collect(),
            step: Some(records.len()),
        },
    };
    for (j, rj) in records.iter().enumerate() {
        let (a, b) = (offs[j], offs[j + 1]);
        tot.er.slice_mut(s![a..b, a..b]).assign(&rj.rom.er);
        tot.ar.slice_mut(s![a..b, a..b]).assign(&rj.rom.ar);
        tot.br.slice_mut(s![a..b, ..]).assign(&rj.rom.br);
        tot.cr.slice_mut(s![.., a..b]).assign(&rj.rom.cr);
        for (i, ri) in records[..j].iter().enumerate() {
            let coupling = rj.rom.br.dot(&ri.data.r);
            tot.ar.slice_mut(s![a..b, offs[i]..offs[i + 1]]).assign(&coupling);
        }
    }
    Ok(tot)
}

/// Recursive cascade evaluation, independent of the assembled matrices.
pub fn eval_cascade(records: &[CureRecord], s: Complex64) -> Result<Array2<Complex64>> {
    let first = records
        .first()
        .ok_or_else(|| Error::DimensionMismatch("cascade needs at least one step".into()))?;
    let m = first.rom.m();
    let mut total = Array2::zeros((first.rom.p(), m));
    let mut chain = Array2::<Complex64>::eye(m);
    for r in records {
        total = total + r.rom.eval(s)?.dot(&chain);
        chain = r.allpass_factor().eval(s)?.dot(&chain);
    }
    Ok(total)
}

/// Appends a SPARK result, updates B⊥ ← B⊥ − E·V·Er⁻¹·Br and the norm
/// history of the re-assembled total model.
pub fn cure_step(
    ledger: &mut CureLedger,
    opsys: &DeflatedSystem,
    spark_out: &SparkResult,
    degenerate: bool,
) -> Result<()> {
    let rom = &spark_out.rom;
    let correction = opsys
        .sys
        .e()
        .mul_dense(&spark_out.basis.v)
        .dot(&solve_many(&rom.er, &rom.br)?);
    ledger.b_perp = &ledger.b_perp - &correction;
    ledger.k += 1;
    let mut rom = rom.clone();
    rom.provenance.step = Some(ledger.k);
    ledger.records.push(CureRecord {
        step: ledger.k,
        params: spark_out.params,
        basis: spark_out.basis.clone(),
        data: spark_out.data.clone(),
        rom,
        cost: spark_out.cost,
        degenerate,
    });
    let total = assemble_total(&ledger.records)?;
    let norm = h2_norm_rom(&total)?;
    let prev = ledger.norms.last().copied().unwrap_or(0.0);
    let rel = if norm > 0.0 { (norm - prev) / norm } else { 0.0 };
    ledger.norms.push(norm);
    ledger.rel_increase.push(rel);
    ledger.total = Some(total);
    Ok(())
}

#[derive(Clone, Debug, Serialize)]
pub struct CureConfig {
    pub tol_rel: f64,
    pub max_steps: usize,
    pub init: SparkParams,
    pub warm_start: bool,
    pub spark: TrustRegionConfig,
    /// Check interpolation at the shifts of every step.
    pub check_steps: bool,
}

impl Default for CureConfig {
    fn default() -> Self {
        CureConfig {
            tol_rel: 1e-6,
            max_steps: 30,
            init: SparkParams { a: 1e-4, b: 1e-4 },
            warm_start: false,
            spark: TrustRegionConfig::default(),
            check_steps: true,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum CureStatus {
    Converged,
    MaxSteps,
    Stagnated,
}

#[derive(Clone, Debug, Serialize)]
pub struct StepReport {
    pub k: usize,
    pub a: f64,
    pub b: f64,
    /// Shifts as (re, im).
    pub shifts: Vec<[f64; 2]>,
    pub cost: f64,
    pub norm: f64,
    pub rel_increase: f64,
    pub spark_status: SparkStatus,
    pub spark_iterations: usize,
    pub degenerate: bool,
    pub interpolation_residuals: Vec<f64>,
    pub total_stable: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct CureReport {
    pub status: CureStatus,
    pub order: usize,
    pub steps: Vec<StepReport>,
}

/// Runs CURE until the relative norm increase drops below `tol_rel`.
pub fn cured_spark(opsys: &DeflatedSystem, cfg: &CureConfig) -> Result<(RomRealization, CureReport, CureLedger)> {
    if opsys.m() != 1 || opsys.p() != 1 {
        return Err(Error::DimensionMismatch(format!(
            "CURE with SPARK needs a SISO system, got {} inputs and {} outputs",
            opsys.m(),
            opsys.p()
        )));
    }
    let mut ledger = cure_init(opsys);
    let mut steps = Vec::new();
    let mut status = CureStatus::MaxSteps;
    let mut flags = 0;
    let mut init = cfg.init;
    for _ in 0..cfg.max_steps {
        let residual = opsys.with_input(ledger.b_perp.clone());
        let res = spark(&residual, init, &cfg.spark)?;
        let reference = ledger.norms.last().map_or(1.0, |n| n * n).max(f64::MIN_POSITIVE);
        let degenerate = res.cost.abs() <= 1e-14 * reference;
        let interp = if cfg.check_steps {
            check_interpolation(|s| residual.eval(s), &res.rom, &res.data)?
        } else {
            Vec::new()
        };
        if cfg.warm_start {
            init = res.params;
        }
        cure_step(&mut ledger, opsys, &res, degenerate)?;
        let total = ledger.total.as_ref().expect("assembled");
        steps.push(StepReport {
            k: ledger.k,
            a: res.params.a,
            b: res.params.b,
            shifts: res.rom.provenance.shifts.clone(),
            cost: res.cost,
            norm: *ledger.norms.last().expect("pushed"),
            rel_increase: *ledger.rel_increase.last().expect("pushed"),
            spark_status: res.status,
            spark_iterations: res.trace.len(),
            degenerate,
            interpolation_residuals: interp,
            total_stable: total.is_stable()?,
        });
        flags = if degenerate { flags + 1 } else { 0 };
        if flags >= 2 {
            status = CureStatus::Stagnated;
            break;
        }
        if !degenerate && *ledger.rel_increase.last().expect("pushed") < cfg.tol_rel {
            status = CureStatus::Converged;
            break;
        }
    }
    if status == CureStatus::MaxSteps {
        log::warn!("CURE reached {} steps before the tolerance", cfg.max_steps);
    }
    let total = ledger.total.clone().expect("at least one step");
    let report = CureReport {
        status,
        order: total.order(),
        steps,
    };
    Ok((total, report, ledger))
}

/// Output of the full DAE pipeline.
#[derive(Clone, Debug)]
pub struct Reduction {
    /// Strictly proper part plus the polynomial part.
    pub rom: RomRealization,
    pub strictly_proper: RomRealization,
    /// Constant part of the transfer function, if nonzero.
    pub polynomial: Option<Array2<f64>>,
    pub report: CureReport,
    pub ledger: CureLedger,
}

/// Splits off the polynomial part, reduces the strictly proper part with
/// CUREd SPARK and recombines. With `fold_feedthrough` a constant part is
/// placed in the feedthrough instead of an order-rank(P) block.
pub fn reduce_dae(sys: &DaeSystem, cfg: &CureConfig, fold_feedthrough: bool) -> Result<Reduction> {
    let poly = match polynomial_part(sys)? {
        PolyPart::Constant(p) => Some(p),
        PolyPart::StrictlyProper => None,
    };
    let kit = ProjectorKit::build(sys)?;
    let opsys = DeflatedSystem::new(sys, &kit)?;
    let (sp, report, ledger) = cured_spark(&opsys, cfg)?;
    let rom = match &poly {
        Some(p) if fold_feedthrough => {
            let mut r = sp.clone();
            r.dr = &r.dr + p;
            r
        }
        Some(p) => sp.parallel(&realize_constant_poly(p)?)?,
        None => sp.clone(),
    };
    Ok(Reduction {
        rom,
        strictly_proper: sp,
        polynomial: poly,
        report,
        ledger,
    })
}
