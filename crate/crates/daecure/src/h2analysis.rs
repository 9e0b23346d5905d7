//! H2 inner products and norms: pole-residue sums, Gramian-type Sylvester
//! equations on the finite part of the pencil, and a quadrature oracle.

use ndarray::{s, Array2};
use ndarray_linalg::Eig;
use num_complex::Complex64;

use crate::daemodel::{DaeSystem, DenseSplit};
use crate::error::{Error, Result};
use crate::interp::DeflatedSystem;
use crate::numkernel::dense::{
    eigenvalues, fro, inverse, singular_values, solve_dense_sylvester_real, solve_many, to_complex,
};
use crate::pork::RomRealization;

/// G(s) = Σᵢ cᵢ·bᵢ / (s − λᵢ); row i of `b` is bᵢ, column i of `c` is cᵢ.
#[derive(Clone, Debug)]
pub struct PoleResidueForm {
    pub poles: Vec<Complex64>,
    pub b: Array2<Complex64>,
    pub c: Array2<Complex64>,
}

impl PoleResidueForm {
    pub fn eval(&self, s: Complex64) -> Array2<Complex64> {
        let (p, m) = (self.c.nrows(), self.b.ncols());
        let mut g = Array2::zeros((p, m));
        for (i, &l) in self.poles.iter().enumerate() {
            let w = 1.0 / (s - l);
            for r in 0..p {
                for k in 0..m {
                    g[[r, k]] += self.c[[r, i]] * self.b[[i, k]] * w;
                }
            }
        }
        g
    }
}

/// Eigen-decomposition of Er⁻¹Ar; residues cᵢ = Cr·xᵢ, bᵢ = (X⁻¹Er⁻¹Br)ᵢ.
pub fn rom_to_pole_residue(rom: &RomRealization) -> Result<PoleResidueForm> {
    let q = rom.order();
    if q == 0 {
        return Ok(PoleResidueForm {
            poles: Vec::new(),
            b: Array2::zeros((0, rom.m())),
            c: Array2::zeros((rom.p(), 0)),
        });
    }
    let sv = singular_values(&rom.er)?;
    if sv[q - 1] <= 1e-14 * sv[0] {
        return Err(Error::NotStrictlyProper);
    }
    let m = solve_many(&rom.er, &rom.ar)?;
    let (vals, x) = crate::numkernel::dense::lapack_layout(&m).eig()?;
    let scale = vals.iter().map(|z| z.norm()).fold(1.0, f64::max);
    for i in 0..q {
        for j in 0..i {
            if (vals[i] - vals[j]).norm() <= 1e-8 * scale {
                return Err(Error::DefectivePencil);
            }
        }
    }
    let xinv = crate::numkernel::dense::inverse_c(&x).map_err(|_| Error::DefectivePencil)?;
    let eb = to_complex(&solve_many(&rom.er, &rom.br)?);
    Ok(PoleResidueForm {
        poles: vals.to_vec(),
        b: xinv.dot(&eb),
        c: to_complex(&rom.cr).dot(&x),
    })
}

/// ⟨G, G_M⟩ = Σᵢ cᵢ*·G(−conj λᵢ)·bᵢ*.
pub fn h2_inner_pole_residue(
    eval_g: impl Fn(Complex64) -> Result<Array2<Complex64>>,
    gm: &PoleResidueForm,
) -> Result<Complex64> {
    let mut acc = Complex64::new(0.0, 0.0);
    for (i, l) in gm.poles.iter().enumerate() {
        let g = eval_g(-l.conj())?;
        for r in 0..g.nrows() {
            for k in 0..g.ncols() {
                acc += gm.c[[r, i]].conj() * g[[r, k]] * gm.b[[i, k]].conj();
            }
        }
    }
    Ok(acc)
}

/// Dense descriptor realization (E, A, B, C); the feedthrough is not part of
/// any H2 quantity and is dropped.
#[derive(Clone, Debug)]
pub struct Descriptor {
    pub e: Array2<f64>,
    pub a: Array2<f64>,
    pub b: Array2<f64>,
    pub c: Array2<f64>,
}

impl Descriptor {
    pub fn from_rom(rom: &RomRealization) -> Self {
        Descriptor {
            e: rom.er.clone(),
            a: rom.ar.clone(),
            b: rom.br.clone(),
            c: rom.cr.clone(),
        }
    }

    pub fn from_system(sys: &DaeSystem) -> Result<Self> {
        let (e, a, b, c) = sys.to_dense()?;
        Ok(Descriptor { e, a, b, c })
    }

    pub fn from_deflated(sys: &DeflatedSystem) -> Result<Self> {
        let (e, a, _, _) = sys.sys.to_dense()?;
        Ok(Descriptor {
            e,
            a,
            b: sys.b.clone(),
            c: sys.c.clone(),
        })
    }

    /// Realization of G − H.
    pub fn difference(&self, other: &Descriptor) -> Result<Self> {
        if self.b.ncols() != other.b.ncols() || self.c.nrows() != other.c.nrows() {
            return Err(Error::DimensionMismatch(
                "error system of incompatible realizations".into(),
            ));
        }
        let (n1, n2) = (self.a.nrows(), other.a.nrows());
        let n = n1 + n2;
        let mut out = Descriptor {
            e: Array2::zeros((n, n)),
            a: Array2::zeros((n, n)),
            b: Array2::zeros((n, self.b.ncols())),
            c: Array2::zeros((self.c.nrows(), n)),
        };
        out.e.slice_mut(s![..n1, ..n1]).assign(&self.e);
        out.e.slice_mut(s![n1.., n1..]).assign(&other.e);
        out.a.slice_mut(s![..n1, ..n1]).assign(&self.a);
        out.a.slice_mut(s![n1.., n1..]).assign(&other.a);
        out.b.slice_mut(s![..n1, ..]).assign(&self.b);
        out.b.slice_mut(s![n1.., ..]).assign(&other.b);
        out.c.slice_mut(s![.., ..n1]).assign(&self.c);
        out.c.slice_mut(s![.., n1..]).assign(&(-&other.c));
        Ok(out)
    }
}

/// Finite part in standard form: G_sp(s) = C_f(sI − M)⁻¹B_f, plus the maps
/// back to original coordinates.
struct FinitePart {
    m: Array2<f64>,
    b: Array2<f64>,
    c: Array2<f64>,
    /// X_orig = zf·X·zfᵀ.
    zf: Array2<f64>,
    /// Y_orig = wᵀ·Y·w with w = E_f⁻¹·L⁻¹ finite rows.
    w: Array2<f64>,
}

fn finite_part(d: &Descriptor) -> Result<FinitePart> {
    let sp = DenseSplit::new(&d.e, &d.a)?;
    let (bf, _) = sp.split_input(&d.b);
    let (cf, _) = sp.split_output(&d.c);
    let m = solve_many(&sp.e_f, &sp.a_f)?;
    let scale = fro(&d.a) / fro(&d.e).max(f64::MIN_POSITIVE);
    let margin = 1e-10 * if scale.is_finite() && scale > 0.0 { scale } else { 1.0 };
    if eigenvalues(&to_complex(&m))?.iter().any(|l| l.re >= -margin) {
        return Err(Error::NotStable);
    }
    Ok(FinitePart {
        b: solve_many(&sp.e_f, &bf)?,
        w: solve_many(&sp.e_f, &sp.left_inverse_finite_rows())?,
        zf: sp.right_finite_basis(),
        c: cf,
        m,
    })
}

/// Result of the Gramian-type route: primal and dual values with the
/// solutions X, Y in original coordinates.
#[derive(Clone, Debug)]
pub struct SylvesterInner {
    pub value: f64,
    pub dual: f64,
    pub x: Array2<f64>,
    pub y: Array2<f64>,
}

impl SylvesterInner {
    pub fn relative_gap(&self) -> f64 {
        (self.value - self.dual).abs() / self.value.abs().max(self.dual.abs()).max(f64::MIN_POSITIVE)
    }
}

/// ⟨G, H⟩ = trace(C·X·C_Hᵀ) = trace(Bᵀ·Y·B_H) with X, Y supported on the
/// finite deflating subspaces.
pub fn h2_inner_sylvester_dense(g: &Descriptor, h: &Descriptor) -> Result<SylvesterInner> {
    if g.b.ncols() != h.b.ncols() || g.c.nrows() != h.c.nrows() {
        return Err(Error::DimensionMismatch("inner product of incompatible systems".into()));
    }
    let fg = finite_part(g)?;
    let fh = finite_part(h)?;
    let xf = solve_dense_sylvester_real(&fg.m, &fh.m.t().to_owned(), &fg.b.dot(&fh.b.t()))?;
    let qf = solve_dense_sylvester_real(&fg.m.t().to_owned(), &fh.m, &fg.c.t().dot(&fh.c))?;
    let value = fg.c.dot(&xf).dot(&fh.c.t()).diag().sum();
    let dual = fg.b.t().dot(&qf).dot(&fh.b).diag().sum();
    Ok(SylvesterInner {
        value,
        dual,
        x: fg.zf.dot(&xf).dot(&fh.zf.t()),
        y: fg.w.t().dot(&qf).dot(&fh.w),
    })
}

/// ‖G‖ from the Gramian trace; tiny negative values from roundoff clamp to 0.
pub fn h2_norm_descriptor(d: &Descriptor) -> Result<f64> {
    Ok(h2_inner_sylvester_dense(d, d)?.value.max(0.0).sqrt())
}

/// ROM norm via Er⁻¹ and one Lyapunov solve of order q.
pub fn h2_norm_rom(rom: &RomRealization) -> Result<f64> {
    let q = rom.order();
    if q == 0 {
        return Ok(0.0);
    }
    let sv = singular_values(&rom.er)?;
    if sv[q - 1] <= 1e-14 * sv[0] {
        return h2_norm_descriptor(&Descriptor::from_rom(rom));
    }
    let einv = inverse(&rom.er)?;
    let m = einv.dot(&rom.ar);
    if eigenvalues(&to_complex(&m))?.iter().any(|l| l.re >= 0.0) {
        return Err(Error::NotStable);
    }
    let b = einv.dot(&rom.br);
    let x = solve_dense_sylvester_real(&m, &m.t().to_owned(), &b.dot(&b.t()))?;
    let v = rom.cr.dot(&x).dot(&rom.cr.t()).diag().sum();
    Ok(v.max(0.0).sqrt())
}

/// Norm of the strictly proper part of a desk-scale system.
pub fn h2_norm_dae(sys: &DaeSystem) -> Result<f64> {
    h2_norm_descriptor(&Descriptor::from_system(sys)?)
}

pub fn h2_norm_deflated(sys: &DeflatedSystem) -> Result<f64> {
    h2_norm_descriptor(&Descriptor::from_deflated(sys)?)
}

/// ‖G − G_r‖ from the augmented error realization.
pub fn h2_error_norm(fom: &DeflatedSystem, rom: &RomRealization) -> Result<f64> {
    h2_norm_descriptor(&Descriptor::from_deflated(fom)?.difference(&Descriptor::from_rom(rom))?)
}

#[allow(clippy::excessive_precision)]
const GK_NODES: [f64; 8] = [
    0.991455371120812639206854697526329,
    0.949107912342758524526189684047851,
    0.864864423359769072789712788640926,
    0.741531185599394439863864773280788,
    0.586087235467691130294144845693013,
    0.405845151377397166906606412076961,
    0.207784955007898467600689403773245,
    0.0,
];
#[allow(clippy::excessive_precision)]
const GK_WEIGHTS: [f64; 8] = [
    0.022935322010529224963732008058970,
    0.063092092629978553290700663189204,
    0.104790010322250183839876322541518,
    0.140653259715525918745189590510238,
    0.169004726639267902826583426598550,
    0.190350578064785409913256402421014,
    0.204432940075298892414161999234649,
    0.209482141084727828012999174891714,
];
#[allow(clippy::excessive_precision)]
const GAUSS_WEIGHTS: [f64; 4] = [
    0.129484966168869693270611432679082,
    0.279705391489276667901467771423780,
    0.381830050505118944950369775488975,
    0.417959183673469387755102040816327,
];

fn gk15(f: &dyn Fn(f64) -> Result<f64>, lo: f64, hi: f64) -> Result<(f64, f64)> {
    let c = 0.5 * (lo + hi);
    let h = 0.5 * (hi - lo);
    let mut kron = 0.0;
    let mut gauss = 0.0;
    for (i, (&x, &w)) in GK_NODES.iter().zip(&GK_WEIGHTS).enumerate() {
        let vals = if x == 0.0 {
            vec![f(c)?]
        } else {
            vec![f(c - h * x)?, f(c + h * x)?]
        };
        let sum: f64 = vals.iter().sum();
        kron += w * sum;
        if i % 2 == 1 {
            gauss += GAUSS_WEIGHTS[i / 2] * sum;
        }
    }
    Ok((kron * h, ((kron - gauss) * h).abs()))
}

/// ‖F‖² = (1/π)∫₀^∞ ‖F(iω)‖_F² dω for a real-coefficient F, by adaptive
/// Gauss–Kronrod after the map ω = ω₀·tan θ. Accurate for small ‖F‖ since
/// F is evaluated pointwise rather than as a difference of norms.
pub fn h2_norm_by_quadrature(
    eval: impl Fn(Complex64) -> Result<Array2<Complex64>>,
    omega0: f64,
    rel_tol: f64,
) -> Result<f64> {
    let half_pi = std::f64::consts::FRAC_PI_2;
    let f = |t: f64| -> Result<f64> {
        let c = t.cos();
        let w = omega0 * t.tan();
        let g = eval(Complex64::new(0.0, w))?;
        Ok(g.iter().map(|z| z.norm_sqr()).sum::<f64>() * omega0 / (c * c))
    };
    let pieces = 32;
    let mut intervals = Vec::new();
    for k in 0..pieces {
        let lo = half_pi * k as f64 / pieces as f64;
        let hi = half_pi * (k + 1) as f64 / pieces as f64;
        let (v, e) = gk15(&f, lo, hi)?;
        intervals.push((lo, hi, v, e));
    }
    for _ in 0..4000 {
        let total: f64 = intervals.iter().map(|i| i.2).sum();
        let err: f64 = intervals.iter().map(|i| i.3).sum();
        if err <= rel_tol * total.abs() || err <= f64::MIN_POSITIVE {
            break;
        }
        let (idx, _) = intervals
            .iter()
            .enumerate()
            .max_by(|a, b| a.1 .3.total_cmp(&b.1 .3))
            .expect("nonempty");
        let (lo, hi, _, _) = intervals.swap_remove(idx);
        let mid = 0.5 * (lo + hi);
        let (v1, e1) = gk15(&f, lo, mid)?;
        let (v2, e2) = gk15(&f, mid, hi)?;
        intervals.push((lo, mid, v1, e1));
        intervals.push((mid, hi, v2, e2));
    }
    let total: f64 = intervals.iter().map(|i| i.2).sum();
    Ok((total / std::f64::consts::PI).max(0.0).sqrt())
}
