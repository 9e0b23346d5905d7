//! Trust-region optimization of two SISO shifts σ₁,₂ = a ± √(a² − b),
//! maximizing the H2 norm of the pseudo-optimal reduced model.
//!
//! Derivatives of V come from differentiating A·V − E·V·S = b·R with
//! respect to (a, b): each derivative solves the same Sylvester equation
//! with right-hand side E·V·∂S, so no 1/(σ₁ − σ₂) terms appear.

use ndarray::{array, Array1, Array2};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::interp::{spark_basis_with, spark_modal_coordinates, BasisV, DeflatedSystem, InterpData, SparkOperator};
use crate::pork::{pork_input, RomRealization};

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct SparkParams {
    pub a: f64,
    pub b: f64,
}

impl SparkParams {
    pub fn new(a: f64, b: f64) -> Result<Self> {
        if !(a > 0.0 && b > 0.0 && a.is_finite() && b.is_finite()) {
            return Err(Error::NonPositiveParams { a, b });
        }
        Ok(SparkParams { a, b })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum HessianMode {
    /// Forward differences of the analytic gradient.
    FiniteDifference,
    Analytic,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Parametrization {
    /// Optimize (a, b) directly, rejecting steps that leave the orthant.
    Linear,
    /// Optimize (ln a, ln b).
    Log,
}

#[derive(Clone, Debug, Serialize)]
pub struct TrustRegionConfig {
    pub initial_radius: f64,
    pub min_radius: f64,
    pub max_radius: f64,
    pub eta1: f64,
    pub eta2: f64,
    pub shrink: f64,
    pub expand: f64,
    /// Stop when ‖(f·∂J/∂a, f²·∂J/∂b)‖ ≤ grad_tol·|J| with f = √(a² + b).
    pub grad_tol: f64,
    pub step_tol: f64,
    pub max_iter: usize,
    pub hessian: HessianMode,
    pub parametrization: Parametrization,
    /// Measure steps relative to the current iterate (‖diag(x)⁻¹·s‖ ≤ radius).
    pub relative_radius: bool,
}

impl Default for TrustRegionConfig {
    fn default() -> Self {
        TrustRegionConfig {
            initial_radius: 1.0,
            min_radius: 1e-14,
            max_radius: 1e10,
            eta1: 0.1,
            eta2: 0.75,
            shrink: 0.5,
            expand: 2.0,
            grad_tol: 1e-9,
            step_tol: 1e-12,
            max_iter: 200,
            hessian: HessianMode::FiniteDifference,
            parametrization: Parametrization::Linear,
            relative_radius: true,
        }
    }
}

impl TrustRegionConfig {
    pub fn validate(&self) -> Result<()> {
        let ok = 0.0 < self.eta1
            && self.eta1 < self.eta2
            && self.eta2 < 1.0
            && 0.0 < self.shrink
            && self.shrink < 1.0
            && self.expand > 1.0
            && self.initial_radius > 0.0
            && self.min_radius >= 0.0
            && self.max_radius >= self.initial_radius;
        if ok {
            Ok(())
        } else {
            Err(Error::Unsupported("inconsistent trust-region configuration".into()))
        }
    }
}

/// ROM controllability Gramian [[4a, 4a²], [4a², 4a(a² + b)]].
pub fn closed_form_gramian(a: f64, b: f64) -> Array2<f64> {
    array![[4.0 * a, 4.0 * a * a], [4.0 * a * a, 4.0 * a * (a * a + b)]]
}

fn d_gramian_a(a: f64, b: f64) -> Array2<f64> {
    array![[4.0, 8.0 * a], [8.0 * a, 12.0 * a * a + 4.0 * b]]
}

fn d_gramian_b(a: f64) -> Array2<f64> {
    array![[0.0, 0.0], [0.0, 4.0 * a]]
}

fn quad(x: &Array1<f64>, m: &Array2<f64>, y: &Array1<f64>) -> f64 {
    x.dot(&m.dot(y))
}

/// Right-hand side E·W·M for an n×2 block W and 2×2 M.
fn e_times(opsys: &DeflatedSystem, w: &Array2<f64>, m: &Array2<f64>) -> (Vec<f64>, Vec<f64>) {
    let ew = opsys.sys.e().mul_dense(w).dot(m);
    (ew.column(0).to_vec(), ew.column(1).to_vec())
}

struct Evaluation {
    j: f64,
    grad: [f64; 2],
    hess: Option<[[f64; 2]; 2]>,
    basis: BasisV,
    data: InterpData,
}

fn evaluate(opsys: &DeflatedSystem, p: SparkParams, order: u8) -> Result<Evaluation> {
    let op = SparkOperator::new(opsys.sys, p.a, p.b)?;
    let (basis, data) = spark_basis_with(&op, opsys)?;
    let c = opsys.c.row(0).to_owned();
    let cr = basis.v.t().dot(&c);
    let gamma = closed_form_gramian(p.a, p.b);
    let dga = d_gramian_a(p.a, p.b);
    let dgb = d_gramian_b(p.a);
    let j = -quad(&cr, &gamma, &cr);
    if order == 0 {
        return Ok(Evaluation {
            j,
            grad: [0.0, 0.0],
            hess: None,
            basis,
            data,
        });
    }
    let ds_a = array![[1.0, 0.0], [2.0 * p.a, 1.0]];
    let ds_b = array![[0.0, 0.0], [-1.0, 0.0]];
    let v = &basis.v;
    let (f1, f2) = e_times(opsys, v, &ds_a);
    let dva = op.solve(&f1, &f2)?;
    let (f1, f2) = e_times(opsys, v, &ds_b);
    let dvb = op.solve(&f1, &f2)?;
    let dca = dva.t().dot(&c);
    let dcb = dvb.t().dot(&c);
    let ga = -(2.0 * quad(&dca, &gamma, &cr) + quad(&cr, &dga, &cr));
    let gb = -(2.0 * quad(&dcb, &gamma, &cr) + quad(&cr, &dgb, &cr));
    let hess = if order >= 2 {
        let d2s_aa = array![[0.0, 0.0], [2.0, 0.0]];
        let zero = Array2::zeros((2, 2));
        let second = |dvi: &Array2<f64>, dsj: &Array2<f64>, dvj: &Array2<f64>, dsi: &Array2<f64>, d2s: &Array2<f64>| {
            let e = opsys.sys.e();
            let rhs = e.mul_dense(dvi).dot(dsj) + e.mul_dense(dvj).dot(dsi) + e.mul_dense(v).dot(d2s);
            op.solve(&rhs.column(0).to_vec(), &rhs.column(1).to_vec())
        };
        let caa = second(&dva, &ds_a, &dva, &ds_a, &d2s_aa)?.t().dot(&c);
        let cab = second(&dva, &ds_b, &dvb, &ds_a, &zero)?.t().dot(&c);
        let cbb = second(&dvb, &ds_b, &dvb, &ds_b, &zero)?.t().dot(&c);
        let d2g_aa = array![[0.0, 8.0], [8.0, 24.0 * p.a]];
        let d2g_ab = array![[0.0, 0.0], [0.0, 4.0]];
        let haa = -(2.0 * quad(&caa, &gamma, &cr)
            + 2.0 * quad(&dca, &gamma, &dca)
            + 4.0 * quad(&dca, &dga, &cr)
            + quad(&cr, &d2g_aa, &cr));
        let hab = -(2.0 * quad(&cab, &gamma, &cr)
            + 2.0 * quad(&dca, &gamma, &dcb)
            + 2.0 * quad(&dca, &dgb, &cr)
            + 2.0 * quad(&dcb, &dga, &cr)
            + quad(&cr, &d2g_ab, &cr));
        let hbb = -(2.0 * quad(&cbb, &gamma, &cr) + 2.0 * quad(&dcb, &gamma, &dcb) + 4.0 * quad(&dcb, &dgb, &cr));
        Some([[haa, hab], [hab, hbb]])
    } else {
        None
    };
    Ok(Evaluation {
        j,
        grad: [ga, gb],
        hess,
        basis,
        data,
    })
}

/// J(a, b) = −c_r·Γ·c_rᵀ with c_r = c·V.
pub fn spark_cost(opsys: &DeflatedSystem, p: SparkParams) -> Result<f64> {
    Ok(evaluate(opsys, p, 0)?.j)
}

/// (J, ∂J/∂a, ∂J/∂b).
pub fn spark_gradient(opsys: &DeflatedSystem, p: SparkParams) -> Result<(f64, [f64; 2])> {
    let e = evaluate(opsys, p, 1)?;
    Ok((e.j, e.grad))
}

/// Exact second derivatives of J in (a, b).
pub fn spark_hessian_analytic(opsys: &DeflatedSystem, p: SparkParams) -> Result<[[f64; 2]; 2]> {
    Ok(evaluate(opsys, p, 2)?.hess.expect("requested"))
}

/// Exact minimizer of gᵀs + ½sᵀHs over ‖s‖ ≤ radius for symmetric 2×2 H.
pub fn trust_region_step(g: [f64; 2], h: [[f64; 2]; 2], radius: f64) -> [f64; 2] {
    let (l1, l2, q1, q2) = sym_eig2(h);
    let gp = [q1[0] * g[0] + q1[1] * g[1], q2[0] * g[0] + q2[1] * g[1]];
    let step_at = |lam: f64| -> [f64; 2] {
        let c1 = if gp[0] == 0.0 { 0.0 } else { -gp[0] / (l1 + lam) };
        let c2 = if gp[1] == 0.0 { 0.0 } else { -gp[1] / (l2 + lam) };
        [c1 * q1[0] + c2 * q2[0], c1 * q1[1] + c2 * q2[1]]
    };
    let norm = |s: [f64; 2]| s[0].hypot(s[1]);
    if l1 > 0.0 {
        let s = step_at(0.0);
        if norm(s) <= radius {
            return s;
        }
    }
    let lo = (-l1).max(0.0);
    let scale = l1.abs().max(l2.abs()).max(f64::MIN_POSITIVE);
    let hard = gp[0].abs() <= 1e-14 * (gp[1].abs() + scale * radius) && l1 <= 0.0;
    if hard {
        // Only the curvature direction can reach the boundary.
        let c2 = if gp[1] == 0.0 { 0.0 } else { -gp[1] / (l2 + lo) };
        let base = [c2 * q2[0], c2 * q2[1]];
        let rem = radius * radius - c2 * c2;
        if rem >= 0.0 {
            let tau = rem.sqrt();
            return [base[0] + tau * q1[0], base[1] + tau * q1[1]];
        }
    }
    // ‖s(λ)‖ decreases on (lo, ∞): bisect ‖s(λ)‖ = radius.
    let gnorm = gp[0].hypot(gp[1]);
    let mut a = lo;
    let mut b = lo + gnorm / radius + scale;
    while norm(step_at(b)) > radius {
        b *= 2.0;
    }
    for _ in 0..200 {
        let mid = 0.5 * (a + b);
        if mid <= a || mid >= b {
            break;
        }
        if norm(step_at(mid)) > radius {
            a = mid;
        } else {
            b = mid;
        }
    }
    step_at(b)
}

/// Eigenvalues l1 ≤ l2 with unit eigenvectors of a symmetric 2×2 matrix.
fn sym_eig2(h: [[f64; 2]; 2]) -> (f64, f64, [f64; 2], [f64; 2]) {
    let (p, q, r) = (h[0][0], 0.5 * (h[0][1] + h[1][0]), h[1][1]);
    if q == 0.0 {
        return if p <= r {
            (p, r, [1.0, 0.0], [0.0, 1.0])
        } else {
            (r, p, [0.0, 1.0], [1.0, 0.0])
        };
    }
    let theta = 0.5 * (2.0 * q).atan2(p - r);
    let (s, c) = theta.sin_cos();
    let a = c * c * p + 2.0 * s * c * q + s * s * r;
    let b = s * s * p - 2.0 * s * c * q + c * c * r;
    let (va, vb) = ([c, s], [-s, c]);
    if a <= b {
        (a, b, va, vb)
    } else {
        (b, a, vb, va)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SparkStatus {
    GradientTolerance,
    StepTolerance,
    RadiusCollapse,
    MaxIterations,
}

impl SparkStatus {
    pub fn converged(self) -> bool {
        self != SparkStatus::MaxIterations
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct IterRecord {
    pub iter: usize,
    pub a: f64,
    pub b: f64,
    pub cost: f64,
    pub grad_norm: f64,
    pub radius: f64,
    pub ratio: f64,
    pub accepted: bool,
}

#[derive(Clone, Debug)]
pub struct SparkResult {
    pub params: SparkParams,
    pub cost: f64,
    pub basis: BasisV,
    pub data: InterpData,
    pub rom: RomRealization,
    pub trace: Vec<IterRecord>,
    pub status: SparkStatus,
}

struct Point {
    p: SparkParams,
    ev: Evaluation,
    /// Gradient and Hessian in the optimization coordinates.
    g: [f64; 2],
    h: [[f64; 2]; 2],
}

fn to_coords(p: SparkParams, mode: Parametrization) -> [f64; 2] {
    match mode {
        Parametrization::Linear => [p.a, p.b],
        Parametrization::Log => [p.a.ln(), p.b.ln()],
    }
}

fn from_coords(x: [f64; 2], mode: Parametrization) -> Option<SparkParams> {
    let (a, b) = match mode {
        Parametrization::Linear => (x[0], x[1]),
        Parametrization::Log => (x[0].exp(), x[1].exp()),
    };
    SparkParams::new(a, b).ok()
}

fn chain(p: SparkParams, g: [f64; 2], h: [[f64; 2]; 2], mode: Parametrization) -> ([f64; 2], [[f64; 2]; 2]) {
    match mode {
        Parametrization::Linear => (g, h),
        Parametrization::Log => {
            let d = [p.a, p.b];
            let gl = [d[0] * g[0], d[1] * g[1]];
            let mut hl = [[0.0; 2]; 2];
            for i in 0..2 {
                for j in 0..2 {
                    hl[i][j] = d[i] * d[j] * h[i][j] + if i == j { gl[i] } else { 0.0 };
                }
            }
            (gl, hl)
        }
    }
}

/// Gradient in units of the current frequency scale f = √(a² + b): a is a
/// frequency and b a squared frequency, so ‖(f·∂J/∂a, f²·∂J/∂b)‖ compared
/// against |J| gives a stopping test invariant under scaling of the transfer
/// function and of time. Unlike a·∂J/∂a, b·∂J/∂b it does not vanish as
/// b → 0.
fn scaled_gradient(pt: &Point) -> f64 {
    let f = (pt.p.a * pt.p.a + pt.p.b).sqrt();
    (f * pt.ev.grad[0]).hypot(f * f * pt.ev.grad[1])
}

fn build_point(opsys: &DeflatedSystem, p: SparkParams, cfg: &TrustRegionConfig) -> Result<Point> {
    let (ev, h) = match cfg.hessian {
        HessianMode::Analytic => {
            let ev = evaluate(opsys, p, 2)?;
            let h = ev.hess.expect("requested");
            (ev, h)
        }
        HessianMode::FiniteDifference => {
            let ev = evaluate(opsys, p, 1)?;
            let mut h = [[0.0; 2]; 2];
            for i in 0..2 {
                let mut q = p;
                let step = if i == 0 { 1e-5 * p.a } else { 1e-5 * p.b };
                if i == 0 {
                    q.a += step;
                } else {
                    q.b += step;
                }
                let gi = evaluate(opsys, q, 1)?.grad;
                for (row, (gk, g0)) in h.iter_mut().zip(gi.iter().zip(ev.grad)) {
                    row[i] = (gk - g0) / step;
                }
            }
            let off = 0.5 * (h[0][1] + h[1][0]);
            h[0][1] = off;
            h[1][0] = off;
            (ev, h)
        }
    };
    let (g, h) = chain(p, ev.grad, h, cfg.parametrization);
    Ok(Point { p, ev, g, h })
}

/// Trust-region iteration from `init`; the final model is the pseudo-optimal
/// ROM at the best accepted iterate.
pub fn spark(opsys: &DeflatedSystem, init: SparkParams, cfg: &TrustRegionConfig) -> Result<SparkResult> {
    cfg.validate()?;
    let init = SparkParams::new(init.a, init.b)?;
    let mode = cfg.parametrization;
    let mut cur = build_point(opsys, init, cfg)?;
    let mut radius = cfg.initial_radius;
    let mut trace = Vec::new();
    let mut status = SparkStatus::MaxIterations;
    for iter in 0..cfg.max_iter {
        let gnorm = cur.g[0].hypot(cur.g[1]);
        let x = to_coords(cur.p, mode);
        let xnorm = x[0].hypot(x[1]);
        if scaled_gradient(&cur) <= cfg.grad_tol * cur.ev.j.abs() {
            status = SparkStatus::GradientTolerance;
            break;
        }
        if radius <= cfg.min_radius {
            status = SparkStatus::RadiusCollapse;
            break;
        }
        let d = if cfg.relative_radius && mode == Parametrization::Linear {
            [x[0].abs(), x[1].abs()]
        } else {
            [1.0, 1.0]
        };
        let gs = [cur.g[0] * d[0], cur.g[1] * d[1]];
        let hs = [
            [cur.h[0][0] * d[0] * d[0], cur.h[0][1] * d[0] * d[1]],
            [cur.h[1][0] * d[1] * d[0], cur.h[1][1] * d[1] * d[1]],
        ];
        let st = trust_region_step(gs, hs, radius);
        let scaled_norm = st[0].hypot(st[1]);
        let s = [st[0] * d[0], st[1] * d[1]];
        let snorm = s[0].hypot(s[1]);
        let pred = -(cur.g[0] * s[0] + cur.g[1] * s[1])
            - 0.5
                * (s[0] * (cur.h[0][0] * s[0] + cur.h[0][1] * s[1]) + s[1] * (cur.h[1][0] * s[0] + cur.h[1][1] * s[1]));
        let cand = from_coords([x[0] + s[0], x[1] + s[1]], mode);
        let mut record = IterRecord {
            iter,
            a: cur.p.a,
            b: cur.p.b,
            cost: cur.ev.j,
            grad_norm: gnorm,
            radius,
            ratio: f64::NAN,
            accepted: false,
        };
        let trial = match cand {
            Some(p) if pred > 0.0 => match build_point(opsys, p, cfg) {
                Ok(pt) => Some(pt),
                Err(Error::SingularShift { .. }) => None,
                Err(e) => return Err(e),
            },
            _ => None,
        };
        let mut accepted = false;
        if let Some(pt) = trial {
            let ratio = (cur.ev.j - pt.ev.j) / pred;
            record.ratio = ratio;
            if ratio < cfg.eta1 {
                radius *= cfg.shrink;
            } else if ratio > cfg.eta2 && scaled_norm >= 0.99 * radius {
                radius = (radius * cfg.expand).min(cfg.max_radius);
            }
            if ratio >= cfg.eta1 && pt.ev.j <= cur.ev.j {
                cur = pt;
                accepted = true;
            }
        } else {
            radius *= cfg.shrink;
        }
        record.accepted = accepted;
        trace.push(record);
        if accepted && snorm <= cfg.step_tol * (1.0 + xnorm) {
            status = SparkStatus::StepTolerance;
            break;
        }
        // A step too small to change the iterate in floating point.
        if !accepted && snorm <= f64::EPSILON * xnorm {
            status = SparkStatus::StepTolerance;
            break;
        }
    }
    if status == SparkStatus::MaxIterations {
        log::warn!(
            "SPARK stopped after {} iterations without meeting a tolerance",
            cfg.max_iter
        );
    }
    log::debug!("SPARK finished at {:?} with status {:?}", cur.p, status);
    let (basis, data) = spark_modal_coordinates(cur.p.a, cur.p.b, &cur.ev.basis, &cur.ev.data);
    let rom = pork_input(&basis, &data, &opsys.c)?;
    Ok(SparkResult {
        params: cur.p,
        cost: cur.ev.j,
        basis,
        data,
        rom,
        trace,
        status,
    })
}
