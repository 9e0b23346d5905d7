//! Deterministic structured test systems.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::daemodel::{DaeSystem, StructureTag};
use crate::error::Result;
use crate::numkernel::SparseMatrix;

type Triplets = Vec<(usize, usize, f64)>;

fn random_sparse(rng: &mut ChaCha8Rng, rows: usize, cols: usize, per_row: usize, scale: f64) -> Triplets {
    let mut t = Vec::new();
    if cols == 0 {
        return t;
    }
    for r in 0..rows {
        for _ in 0..per_row {
            t.push((r, rng.gen_range(0..cols), scale * rng.gen_range(-1.0..1.0)));
        }
    }
    t
}

/// Upper bound on the spectral norm: √(‖M‖₁·‖M‖_∞).
fn norm2_bound(t: &Triplets, rows: usize, cols: usize) -> f64 {
    let mut rs = vec![0.0; rows];
    let mut cs = vec![0.0; cols];
    for &(r, c, v) in t {
        rs[r] += v.abs();
        cs[c] += v.abs();
    }
    let ri = rs.iter().cloned().fold(0.0, f64::max);
    let ci = cs.iter().cloned().fold(0.0, f64::max);
    (ri * ci).sqrt()
}

/// Semi-explicit index-1 DAE with E = [[I, 0], [0, 0]].
///
/// A11 = T + P with T tridiagonal negative definite (largest eigenvalue
/// below −1); A22 strictly diagonally dominant with margin at least 1. The
/// perturbation P and the coupling A12, A21 are scaled so that
/// ‖P‖ + ‖A12‖‖A21‖/min|A22| < 1/2, which keeps the Schur complement
/// A11 − A12·A22⁻¹·A21 (the finite dynamics) stable by a field-of-values
/// argument.
pub fn gen_semi_explicit_index1(n1: usize, n2: usize, seed: u64) -> Result<DaeSystem> {
    assert!(n1 >= 1 && n2 >= 1, "block sizes must be positive");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = n1 + n2;
    let mut e = Vec::new();
    for i in 0..n1 {
        e.push((i, i, 1.0));
    }
    let mut a = Vec::new();
    for i in 0..n1 {
        a.push((i, i, -3.0 - rng.gen::<f64>()));
        if i + 1 < n1 {
            a.push((i, i + 1, 1.0));
            a.push((i + 1, i, 1.0));
        }
    }
    let mut p = random_sparse(&mut rng, n1, n1, 1, 1.0);
    let mut a12 = random_sparse(&mut rng, n1, n2, 1, 1.0);
    let mut a21 = random_sparse(&mut rng, n2, n1, 1, 1.0);
    let mut a22 = Vec::new();
    let mut min_margin = f64::INFINITY;
    let off = random_sparse(&mut rng, n2, n2, 1, 0.5);
    let mut rowsum = vec![0.0; n2];
    for &(r, c, v) in &off {
        if r != c {
            rowsum[r] += v.abs();
            a22.push((r, c, v));
        }
    }
    for (i, s) in rowsum.iter().enumerate() {
        let d = s + 1.0 + rng.gen::<f64>();
        a22.push((i, i, -d));
        min_margin = min_margin.min(d - s);
    }
    let coupling = norm2_bound(&a12, n1, n2) * norm2_bound(&a21, n2, n1) / min_margin;
    let pert = norm2_bound(&p, n1, n1);
    let budget = 0.5;
    if pert + coupling > budget {
        let f = budget / (pert + coupling);
        p.iter_mut().for_each(|t| t.2 *= f);
        let g = f.sqrt();
        a12.iter_mut().for_each(|t| t.2 *= g);
        a21.iter_mut().for_each(|t| t.2 *= g);
    }
    a.extend(p);
    a.extend(a12.into_iter().map(|(r, c, v)| (r, n1 + c, v)));
    a.extend(a21.into_iter().map(|(r, c, v)| (n1 + r, c, v)));
    a.extend(a22.into_iter().map(|(r, c, v)| (n1 + r, n1 + c, v)));
    // SISO ports touching both blocks so the constant part is nonzero.
    let mut b = Vec::new();
    let mut c = Vec::new();
    for i in 0..n {
        if i % 3 == 0 || i == n1 {
            b.push((i, 0, rng.gen_range(0.5..1.5)));
        }
        if i % 4 == 1 || i == n1 {
            c.push((0, i, rng.gen_range(0.5..1.5)));
        }
    }
    DaeSystem::new(
        SparseMatrix::from_triplets(n, n, &e)?,
        SparseMatrix::from_triplets(n, n, &a)?,
        SparseMatrix::from_triplets(n, 1, &b)?,
        SparseMatrix::from_triplets(1, n, &c)?,
        None,
        StructureTag::SemiExplicitIndex1 { n1 },
    )
}

/// Stokes-type index-2 system on an m×m staggered grid of the unit square
/// with no-slip walls. Velocities live on interior cell faces, pressures at
/// cell centres with cell 0 pinned. A11 is the 5-point vector Laplacian,
/// A12 = −(discrete gradient), A21 = A12ᵀ. Ports touch velocities only.
pub fn gen_stokes_index2(m: usize, seed: u64) -> Result<DaeSystem> {
    assert!(m >= 3, "grid needs at least 3 cells per direction");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let h = 1.0 / m as f64;
    let h2 = 1.0 / (h * h);
    // u on vertical faces (i = 1..m−1, j = 0..m−1), v on horizontal faces.
    let nu = (m - 1) * m;
    let n_v = 2 * nu;
    let n_p = m * m - 1;
    let n = n_v + n_p;
    let u_idx = |i: usize, j: usize| (i - 1) + (m - 1) * j;
    let v_idx = |i: usize, j: usize| nu + i + m * (j - 1);
    let p_idx = |i: usize, j: usize| -> Option<usize> {
        let k = i + m * j;
        (k != 0).then(|| n_v + k - 1)
    };
    let mut a = Vec::new();
    // Laplacian on each velocity component; missing neighbours are walls.
    let lap = |a: &mut Triplets, row: usize, nbrs: [Option<usize>; 4]| {
        a.push((row, row, -4.0 * h2));
        for c in nbrs.into_iter().flatten() {
            a.push((row, c, h2));
        }
    };
    for j in 0..m {
        for i in 1..m {
            let nb = [
                (i > 1).then(|| u_idx(i - 1, j)),
                (i + 1 < m).then(|| u_idx(i + 1, j)),
                (j > 0).then(|| u_idx(i, j - 1)),
                (j + 1 < m).then(|| u_idx(i, j + 1)),
            ];
            lap(&mut a, u_idx(i, j), nb);
        }
    }
    for j in 1..m {
        for i in 0..m {
            let nb = [
                (i > 0).then(|| v_idx(i - 1, j)),
                (i + 1 < m).then(|| v_idx(i + 1, j)),
                (j > 1).then(|| v_idx(i, j - 1)),
                (j + 1 < m).then(|| v_idx(i, j + 1)),
            ];
            lap(&mut a, v_idx(i, j), nb);
        }
    }
    // A12 = −∇: u(i, j) couples cells (i−1, j) and (i, j).
    let inv_h = 1.0 / h;
    let mut grad = Vec::new();
    for j in 0..m {
        for i in 1..m {
            if let Some(p) = p_idx(i, j) {
                grad.push((u_idx(i, j), p, -inv_h));
            }
            if let Some(p) = p_idx(i - 1, j) {
                grad.push((u_idx(i, j), p, inv_h));
            }
        }
    }
    for j in 1..m {
        for i in 0..m {
            if let Some(p) = p_idx(i, j) {
                grad.push((v_idx(i, j), p, -inv_h));
            }
            if let Some(p) = p_idx(i, j - 1) {
                grad.push((v_idx(i, j), p, inv_h));
            }
        }
    }
    for &(r, c, v) in &grad {
        a.push((r, c, v));
        a.push((c, r, v));
    }
    let e: Triplets = (0..n_v).map(|i| (i, i, 1.0)).collect();
    let mut b = Vec::new();
    let mut c = Vec::new();
    for i in 0..n_v {
        if rng.gen::<f64>() < 0.2 {
            b.push((i, 0, rng.gen_range(-1.0..1.0)));
        }
        if rng.gen::<f64>() < 0.2 {
            c.push((0, i, rng.gen_range(-1.0..1.0)));
        }
    }
    if b.is_empty() {
        b.push((0, 0, 1.0));
    }
    if c.is_empty() {
        c.push((0, n_v - 1, 1.0));
    }
    DaeSystem::new(
        SparseMatrix::from_triplets(n, n, &e)?,
        SparseMatrix::from_triplets(n, n, &a)?,
        SparseMatrix::from_triplets(n, 1, &b)?,
        SparseMatrix::from_triplets(1, n, &c)?,
        None,
        StructureTag::StokesIndex2 { n_v, n_p },
    )
}

/// Stable ODE (E = I) with prescribed real poles, random input/output
/// weights and a random similarity, for exact-recovery checks.
pub fn gen_ode_with_poles(poles: &[f64], seed: u64) -> Result<DaeSystem> {
    use ndarray::Array2;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = poles.len();
    let t = Array2::from_shape_fn((n, n), |(i, j)| {
        rng.gen_range(-0.3..0.3) + if i == j { 1.0 } else { 0.0 }
    });
    let tinv = crate::numkernel::dense::inverse(&t)?;
    let a = t
        .dot(&Array2::from_diag(&ndarray::Array1::from(poles.to_vec())))
        .dot(&tinv);
    let b = t.dot(&Array2::from_shape_fn((n, 1), |_| rng.gen_range(0.5..1.5)));
    let c = Array2::from_shape_fn((1, n), |_| rng.gen_range(0.5..1.5)).dot(&tinv);
    DaeSystem::from_dense(&Array2::eye(n), &a, &b, &c, None)
}
