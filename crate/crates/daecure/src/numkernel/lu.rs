//! Left-looking sparse LU with threshold partial pivoting.
//!
//! Columns are processed in a fill-reducing order computed on the symmetrized
//! pattern. Each column is obtained by a sparse triangular solve whose
//! nonzero pattern comes from a depth-first reach over the columns of L
//! already computed. Row pivots prefer the diagonal of the reordered matrix
//! when it is within a threshold of the largest candidate.

use std::cmp::Reverse;
use std::collections::{BinaryHeap, HashSet};
use std::fmt::Debug;
use std::ops::{Add, AddAssign, Div, Mul, Neg, Sub, SubAssign};

use num_complex::Complex64;

/// Scalar field the factorization is generic over (real or complex).
pub trait Field:
    Copy
    + Send
    + Sync
    + Debug
    + PartialEq
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Div<Output = Self>
    + Neg<Output = Self>
    + AddAssign
    + SubAssign
    + 'static
{
    fn zero() -> Self;
    fn from_f64(x: f64) -> Self;
    fn modulus(self) -> f64;
}

impl Field for f64 {
    fn zero() -> Self {
        0.0
    }
    fn from_f64(x: f64) -> Self {
        x
    }
    fn modulus(self) -> f64 {
        self.abs()
    }
}

impl Field for Complex64 {
    fn zero() -> Self {
        Complex64::new(0.0, 0.0)
    }
    fn from_f64(x: f64) -> Self {
        Complex64::new(x, 0.0)
    }
    fn modulus(self) -> f64 {
        self.norm()
    }
}

/// Square matrix in compressed sparse column form.
#[derive(Clone, Debug)]
pub struct CscMatrix<T> {
    pub n: usize,
    pub colptr: Vec<usize>,
    pub rowind: Vec<usize>,
    pub values: Vec<T>,
}

impl<T: Field> CscMatrix<T> {
    /// Builds from triplets; duplicates are summed.
    pub fn from_triplets(n: usize, t: &[(usize, usize, T)]) -> Self {
        let mut counts = vec![0usize; n + 1];
        for &(_, c, _) in t {
            counts[c + 1] += 1;
        }
        for j in 0..n {
            counts[j + 1] += counts[j];
        }
        let mut next = counts.clone();
        let mut rows = vec![0usize; t.len()];
        let mut vals = vec![T::zero(); t.len()];
        for &(r, c, v) in t {
            rows[next[c]] = r;
            vals[next[c]] = v;
            next[c] += 1;
        }
        let mut colptr = vec![0];
        let mut rowind = Vec::with_capacity(t.len());
        let mut values = Vec::with_capacity(t.len());
        let mut col: Vec<(usize, T)> = Vec::new();
        for j in 0..n {
            col.clear();
            col.extend((counts[j]..counts[j + 1]).map(|k| (rows[k], vals[k])));
            col.sort_by_key(|e| e.0);
            let mut k = 0;
            while k < col.len() {
                let r = col[k].0;
                let mut v = T::zero();
                while k < col.len() && col[k].0 == r {
                    v += col[k].1;
                    k += 1;
                }
                rowind.push(r);
                values.push(v);
            }
            colptr.push(rowind.len());
        }
        CscMatrix {
            n,
            colptr,
            rowind,
            values,
        }
    }

    pub fn mul_vec(&self, x: &[T]) -> Vec<T> {
        let mut y = vec![T::zero(); self.n];
        for (j, &xj) in x.iter().enumerate().take(self.n) {
            for k in self.colptr[j]..self.colptr[j + 1] {
                y[self.rowind[k]] += self.values[k] * xj;
            }
        }
        y
    }

    pub fn tr_mul_vec(&self, x: &[T]) -> Vec<T> {
        (0..self.n)
            .map(|j| {
                let mut s = T::zero();
                for k in self.colptr[j]..self.colptr[j + 1] {
                    s += self.values[k] * x[self.rowind[k]];
                }
                s
            })
            .collect()
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().map(|v| v.modulus()).fold(0.0, f64::max)
    }

    /// Row scales r and column scales c such that every row and column of
    /// R⁻¹·A·C⁻¹ has largest entry 1 in modulus; empty lines get scale 1.
    pub fn equilibration(&self) -> (Vec<f64>, Vec<f64>) {
        let mut r = vec![0.0f64; self.n];
        for (&i, v) in self.rowind.iter().zip(&self.values) {
            r[i] = r[i].max(v.modulus());
        }
        r.iter_mut().filter(|x| **x == 0.0).for_each(|x| *x = 1.0);
        let mut c = vec![0.0f64; self.n];
        for (j, cj) in c.iter_mut().enumerate() {
            for k in self.colptr[j]..self.colptr[j + 1] {
                *cj = cj.max(self.values[k].modulus() / r[self.rowind[k]]);
            }
            if *cj == 0.0 {
                *cj = 1.0;
            }
        }
        (r, c)
    }
}

/// Minimum-degree ordering of the pattern of A + Aᵀ on an explicit
/// elimination graph. Adequate for the saddle-point and banded patterns
/// produced by discretized DAEs.
pub fn minimum_degree_order<T: Field>(a: &CscMatrix<T>) -> Vec<usize> {
    let n = a.n;
    let mut adj: Vec<HashSet<usize>> = vec![HashSet::new(); n];
    for j in 0..n {
        for k in a.colptr[j]..a.colptr[j + 1] {
            let i = a.rowind[k];
            if i != j {
                adj[i].insert(j);
                adj[j].insert(i);
            }
        }
    }
    let mut eliminated = vec![false; n];
    let mut heap: BinaryHeap<Reverse<(usize, usize)>> = (0..n).map(|v| Reverse((adj[v].len(), v))).collect();
    let mut order = Vec::with_capacity(n);
    while let Some(Reverse((deg, v))) = heap.pop() {
        if eliminated[v] || deg != adj[v].len() {
            continue;
        }
        eliminated[v] = true;
        order.push(v);
        let nbrs: Vec<usize> = adj[v].drain().collect();
        for &u in &nbrs {
            adj[u].remove(&v);
        }
        for (p, &u) in nbrs.iter().enumerate() {
            for &w in &nbrs[p + 1..] {
                if adj[u].insert(w) {
                    adj[w].insert(u);
                }
            }
        }
        for &u in &nbrs {
            heap.push(Reverse((adj[u].len(), u)));
        }
    }
    order
}

/// Numeric factorization P·A·Q = L·U with unit lower-triangular L.
#[derive(Clone, Debug)]
pub struct SparseLu<T> {
    n: usize,
    col_order: Vec<usize>,
    pivot_row: Vec<usize>,
    l_ptr: Vec<usize>,
    l_row: Vec<usize>,
    l_val: Vec<T>,
    u_ptr: Vec<usize>,
    u_step: Vec<usize>,
    u_val: Vec<T>,
    u_diag: Vec<T>,
    min_pivot_ratio: f64,
}

/// Fraction of the largest candidate the diagonal must reach to be kept as pivot.
const DIAGONAL_PREFERENCE: f64 = 0.1;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SingularMatrix {
    pub step: usize,
}

impl<T: Field> SparseLu<T> {
    /// Factors `a` using the supplied column order (a permutation of 0..n).
    /// Fails when a pivot column is numerically zero relative to the matrix scale.
    pub fn factor(a: &CscMatrix<T>, col_order: &[usize]) -> Result<Self, SingularMatrix> {
        let n = a.n;
        let scale = a.max_abs().max(f64::MIN_POSITIVE);
        let tiny = 64.0 * f64::EPSILON * scale;
        let none = usize::MAX;
        let mut pinv = vec![none; n];
        let mut pivot_row = vec![none; n];
        let mut l_ptr = vec![0usize];
        let mut l_row = Vec::new();
        let mut l_val = Vec::new();
        let mut u_ptr = vec![0usize];
        let mut u_step = Vec::new();
        let mut u_val = Vec::new();
        let mut u_diag = Vec::with_capacity(n);
        let mut x = vec![T::zero(); n];
        let mut mark = vec![usize::MAX; n];
        let mut topo: Vec<usize> = Vec::with_capacity(n);
        let mut stack: Vec<(usize, usize)> = Vec::new();
        let mut min_ratio = f64::INFINITY;

        for (k, &col) in col_order.iter().enumerate() {
            // Reach of the column pattern in the graph of L, in topological order.
            topo.clear();
            for p in a.colptr[col]..a.colptr[col + 1] {
                let start = a.rowind[p];
                if mark[start] == k {
                    continue;
                }
                mark[start] = k;
                stack.push((start, 0));
                while let Some(&mut (node, ref mut child)) = stack.last_mut() {
                    let s = pinv[node];
                    let mut pushed = false;
                    if s != none {
                        let (lo, hi) = (l_ptr[s], l_ptr[s + 1]);
                        while lo + *child < hi {
                            let r = l_row[lo + *child];
                            *child += 1;
                            if mark[r] != k {
                                mark[r] = k;
                                stack.push((r, 0));
                                pushed = true;
                                break;
                            }
                        }
                    }
                    if !pushed {
                        topo.push(node);
                        stack.pop();
                    }
                }
            }
            for p in a.colptr[col]..a.colptr[col + 1] {
                x[a.rowind[p]] = a.values[p];
            }
            // Triangular solve in reverse post-order.
            for &row in topo.iter().rev() {
                let s = pinv[row];
                if s == none {
                    continue;
                }
                let xr = x[row];
                if xr == T::zero() {
                    continue;
                }
                for q in l_ptr[s]..l_ptr[s + 1] {
                    let r = l_row[q];
                    let lv = l_val[q];
                    x[r] -= lv * xr;
                }
            }
            // Split into U part and pivot candidates.
            let mut best = none;
            let mut best_abs = -1.0;
            let mut diag_abs = -1.0;
            for &row in topo.iter() {
                if pinv[row] == none {
                    let m = x[row].modulus();
                    if m > best_abs {
                        best_abs = m;
                        best = row;
                    }
                    if row == col {
                        diag_abs = m;
                    }
                }
            }
            if best == none || best_abs <= tiny {
                return Err(SingularMatrix { step: k });
            }
            let piv = if diag_abs >= DIAGONAL_PREFERENCE * best_abs && diag_abs > tiny {
                col
            } else {
                best
            };
            let pv = x[piv];
            min_ratio = min_ratio.min(pv.modulus() / scale);
            for &row in topo.iter() {
                let s = pinv[row];
                if s != none {
                    if x[row] != T::zero() {
                        u_step.push(s);
                        u_val.push(x[row]);
                    }
                } else if row != piv && x[row] != T::zero() {
                    l_row.push(row);
                    l_val.push(x[row] / pv);
                }
                x[row] = T::zero();
            }
            u_ptr.push(u_step.len());
            l_ptr.push(l_row.len());
            u_diag.push(pv);
            pinv[piv] = k;
            pivot_row[k] = piv;
        }
        Ok(SparseLu {
            n,
            col_order: col_order.to_vec(),
            pivot_row,
            l_ptr,
            l_row,
            l_val,
            u_ptr,
            u_step,
            u_val,
            u_diag,
            min_pivot_ratio: min_ratio,
        })
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    /// Smallest pivot magnitude relative to the largest matrix entry.
    pub fn min_pivot_ratio(&self) -> f64 {
        self.min_pivot_ratio
    }

    pub fn fill(&self) -> usize {
        self.l_row.len() + self.u_step.len() + self.n
    }

    /// Solves A·x = b.
    pub fn solve(&self, b: &[T]) -> Vec<T> {
        let n = self.n;
        let mut w = b.to_vec();
        let mut z = vec![T::zero(); n];
        for k in 0..n {
            let zk = w[self.pivot_row[k]];
            z[k] = zk;
            if zk == T::zero() {
                continue;
            }
            for q in self.l_ptr[k]..self.l_ptr[k + 1] {
                let r = self.l_row[q];
                let lv = self.l_val[q];
                w[r] -= lv * zk;
            }
        }
        for k in (0..n).rev() {
            let zk = z[k] / self.u_diag[k];
            z[k] = zk;
            if zk == T::zero() {
                continue;
            }
            for q in self.u_ptr[k]..self.u_ptr[k + 1] {
                let s = self.u_step[q];
                let uv = self.u_val[q];
                z[s] -= uv * zk;
            }
        }
        let mut out = vec![T::zero(); n];
        for k in 0..n {
            out[self.col_order[k]] = z[k];
        }
        out
    }

    /// Solves Aᵀ·x = b (plain transpose, no conjugation).
    pub fn solve_transpose(&self, b: &[T]) -> Vec<T> {
        let n = self.n;
        let mut t = vec![T::zero(); n];
        for k in 0..n {
            let mut s = b[self.col_order[k]];
            for q in self.u_ptr[k]..self.u_ptr[k + 1] {
                s -= self.u_val[q] * t[self.u_step[q]];
            }
            t[k] = s / self.u_diag[k];
        }
        // Lᵀ is indexed by original rows; map them to steps through the pivot order.
        let mut step_of_row = vec![0usize; n];
        for k in 0..n {
            step_of_row[self.pivot_row[k]] = k;
        }
        for k in (0..n).rev() {
            let mut s = t[k];
            for q in self.l_ptr[k]..self.l_ptr[k + 1] {
                s -= self.l_val[q] * t[step_of_row[self.l_row[q]]];
            }
            t[k] = s;
        }
        let mut out = vec![T::zero(); n];
        for k in 0..n {
            out[self.pivot_row[k]] = t[k];
        }
        out
    }
}
