//! Sensor network graphs and consensus weight matrices.
//!
//! A weight matrix `W` is usable for running consensus when it satisfies
//!
//! ```text
//! 1^T W = 1^T,   W 1 = 1,   0 < sigma_2(W) < 1
//! ```
//!
//! in which case `W^n - J = (W - J)^n` with `J = 11^T / N`, and the
//! consensus error contracts by `sigma_2(W)` per multiplication.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::linalg::{singular_values, symmetric_eigenvalues, SquareMatrix};

/// Row/column sum tolerance for the stochasticity checks.
pub const STOCHASTIC_TOL: f64 = 1e-12;

/// Undirected sensor graph with a secure/insecure partition.
///
/// Sensors are indexed `0..n` internally; file formats use 1-based labels.
#[derive(Debug, Clone, PartialEq)]
pub struct NetworkTopology {
    n: usize,
    edges: Vec<(usize, usize)>,
    secure: Vec<bool>,
    neighbors: Vec<Vec<usize>>,
}

impl NetworkTopology {
    /// Builds a topology from 0-based edges and secure indices.
    ///
    /// Duplicate edges (in either orientation) are merged. Connectivity is
    /// not required here; it is checked when weights are built.
    pub fn new(n: usize, edges: &[(usize, usize)], secure: &[usize]) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidTopology("network must have at least one sensor"));
        }
        let mut norm = Vec::with_capacity(edges.len());
        for &(a, b) in edges {
            if a >= n || b >= n {
                return Err(Error::InvalidTopology("edge endpoint out of range"));
            }
            if a == b {
                return Err(Error::InvalidTopology("self-loops are not allowed"));
            }
            norm.push(if a < b { (a, b) } else { (b, a) });
        }
        norm.sort_unstable();
        norm.dedup();

        let mut is_secure = vec![false; n];
        for &s in secure {
            if s >= n {
                return Err(Error::InvalidTopology("secure sensor index out of range"));
            }
            is_secure[s] = true;
        }

        let mut neighbors = vec![Vec::new(); n];
        for &(a, b) in &norm {
            neighbors[a].push(b);
            neighbors[b].push(a);
        }
        Ok(Self { n, edges: norm, secure: is_secure, neighbors })
    }

    /// Same as [`NetworkTopology::new`] with 1-based labels.
    pub fn from_one_based(n: usize, edges: &[(usize, usize)], secure: &[usize]) -> Result<Self> {
        let mut e0 = Vec::with_capacity(edges.len());
        for &(a, b) in edges {
            if a == 0 || b == 0 {
                return Err(Error::InvalidTopology("sensor labels are 1-based"));
            }
            e0.push((a - 1, b - 1));
        }
        let mut s0 = Vec::with_capacity(secure.len());
        for &s in secure {
            if s == 0 {
                return Err(Error::InvalidTopology("sensor labels are 1-based"));
            }
            s0.push(s - 1);
        }
        Self::new(n, &e0, &s0)
    }

    /// Cycle `0 - 1 - ... - (n-1) - 0`.
    pub fn cycle(n: usize, secure: &[usize]) -> Result<Self> {
        let edges: Vec<_> = (0..n).map(|i| (i, (i + 1) % n)).collect();
        Self::new(n, &edges, secure)
    }

    /// Circulant graph where sensor `i` links to `i +/- 1, ..., i +/- reach`.
    pub fn circulant(n: usize, reach: usize, secure: &[usize]) -> Result<Self> {
        let mut edges = Vec::new();
        for i in 0..n {
            for d in 1..=reach {
                let j = (i + d) % n;
                if j != i {
                    edges.push((i, j));
                }
            }
        }
        Self::new(n, &edges, secure)
    }

    pub fn n_sensors(&self) -> usize {
        self.n
    }

    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    pub fn neighbors(&self, j: usize) -> &[usize] {
        &self.neighbors[j]
    }

    pub fn degree(&self, j: usize) -> usize {
        self.neighbors[j].len()
    }

    pub fn is_secure(&self, j: usize) -> bool {
        self.secure[j]
    }

    pub fn secure_mask(&self) -> &[bool] {
        &self.secure
    }

    pub fn secure_sensors(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.n).filter(|&j| self.secure[j])
    }

    pub fn insecure_sensors(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.n).filter(|&j| !self.secure[j])
    }

    pub fn n_secure(&self) -> usize {
        self.secure.iter().filter(|s| **s).count()
    }

    pub fn n_insecure(&self) -> usize {
        self.n - self.n_secure()
    }

    pub fn has_edge(&self, a: usize, b: usize) -> bool {
        let key = if a < b { (a, b) } else { (b, a) };
        self.edges.binary_search(&key).is_ok()
    }

    /// Number of connected components (iterative DFS).
    pub fn components(&self) -> usize {
        let mut seen = vec![false; self.n];
        let mut stack = Vec::new();
        let mut count = 0;
        for start in 0..self.n {
            if seen[start] {
                continue;
            }
            count += 1;
            seen[start] = true;
            stack.push(start);
            while let Some(v) = stack.pop() {
                for &w in &self.neighbors[v] {
                    if !seen[w] {
                        seen[w] = true;
                        stack.push(w);
                    }
                }
            }
        }
        count
    }

    pub fn is_connected(&self) -> bool {
        self.components() == 1
    }

    /// Graph Laplacian `D - A`.
    pub fn laplacian(&self) -> SquareMatrix {
        let mut l = SquareMatrix::zeros(self.n);
        for j in 0..self.n {
            l.set(j, j, self.degree(j) as f64);
        }
        for &(a, b) in &self.edges {
            l.set(a, b, -1.0);
            l.set(b, a, -1.0);
        }
        l
    }
}

/// Step size used to turn the Laplacian into `W = I - c L`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum LaplacianScaling {
    /// `c = 2 / (s_1^2 + s_{N-1}^2)` with `s_i` the singular values of `D - A`.
    #[default]
    SquaredSpectrum,
    /// `c = 2 / (s_1 + s_{N-1})`, the best constant edge weight.
    BestConstant,
}

/// Dense consensus weights plus a sparse row view for message passing.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightMatrix {
    dense: SquareMatrix,
    sigma2: f64,
    // CSR: row j reads (col, weight) pairs in row_ptr[j]..row_ptr[j+1].
    row_ptr: Vec<usize>,
    cols: Vec<usize>,
    vals: Vec<f64>,
}

impl WeightMatrix {
    /// Wraps an arbitrary square matrix; nothing is validated here.
    pub fn new(dense: SquareMatrix) -> Self {
        let n = dense.dim();
        let mut row_ptr = Vec::with_capacity(n + 1);
        let mut cols = Vec::new();
        let mut vals = Vec::new();
        row_ptr.push(0);
        for i in 0..n {
            for (j, &w) in dense.row(i).iter().enumerate() {
                if w != 0.0 {
                    cols.push(j);
                    vals.push(w);
                }
            }
            row_ptr.push(cols.len());
        }
        let sigma2 = second_singular_value(&dense);
        Self { dense, sigma2, row_ptr, cols, vals }
    }

    /// The exact averaging matrix `J`; one round reaches consensus.
    pub fn averaging(n: usize) -> Self {
        Self::new(SquareMatrix::averaging(n))
    }

    pub fn dim(&self) -> usize {
        self.dense.dim()
    }

    pub fn dense(&self) -> &SquareMatrix {
        &self.dense
    }

    /// Cached second-largest singular value.
    pub fn sigma2(&self) -> f64 {
        self.sigma2
    }

    /// `out = W x` using the sparse rows.
    #[inline]
    pub fn apply(&self, x: &[f64], out: &mut [f64]) {
        for (i, o) in out.iter_mut().enumerate() {
            let mut acc = 0.0;
            for p in self.row_ptr[i]..self.row_ptr[i + 1] {
                acc += self.vals[p] * x[self.cols[p]];
            }
            *o = acc;
        }
    }

    /// Number of stored nonzeros (cost of one message-passing round).
    pub fn nnz(&self) -> usize {
        self.vals.len()
    }
}

fn second_singular_value(m: &SquareMatrix) -> f64 {
    let sv = singular_values(m);
    sv.get(1).copied().unwrap_or(0.0)
}

/// `sigma_2(W)`, the second-largest singular value (0 for a 1x1 matrix).
pub fn sigma2(w: &SquareMatrix) -> f64 {
    second_singular_value(w)
}

/// `W = I - 2 (D - A) / (s_1^2 + s_{N-1}^2)` for a connected graph.
pub fn build_laplacian_weights(topology: &NetworkTopology) -> Result<WeightMatrix> {
    build_laplacian_weights_with(topology, LaplacianScaling::SquaredSpectrum)
}

pub fn build_laplacian_weights_with(
    topology: &NetworkTopology,
    scaling: LaplacianScaling,
) -> Result<WeightMatrix> {
    let n = topology.n_sensors();
    if n < 2 {
        return Err(Error::InvalidTopology("Laplacian weights need at least two sensors"));
    }
    let components = topology.components();
    if components > 1 {
        return Err(Error::DisconnectedGraph { components });
    }
    let l = topology.laplacian();
    // Laplacian is PSD, so its singular values are its eigenvalues.
    let ev = symmetric_eigenvalues(&l);
    let s1 = ev[0];
    let s_nm1 = ev[n - 2];
    let c = match scaling {
        LaplacianScaling::SquaredSpectrum => 2.0 / (s1 * s1 + s_nm1 * s_nm1),
        LaplacianScaling::BestConstant => 2.0 / (s1 + s_nm1),
    };
    let mut w = SquareMatrix::identity(n).sub(&l.scale(c));
    // Zero out structural zeros exactly so the sparsity pattern is clean.
    for i in 0..n {
        for j in 0..n {
            if i != j && !topology.has_edge(i, j) {
                w.set(i, j, 0.0);
            }
        }
    }
    let w = WeightMatrix::new(w);
    if !(w.sigma2() > STOCHASTIC_TOL && w.sigma2() < 1.0 - STOCHASTIC_TOL) {
        return Err(Error::SpectralGapViolation { sigma2: w.sigma2() });
    }
    Ok(w)
}

/// Outcome of checking a matrix against the consensus condition.
#[derive(Debug, Clone, PartialEq)]
pub struct ValidationReport {
    pub row_stochastic: bool,
    pub column_stochastic: bool,
    /// `None` when no topology was supplied.
    pub sparsity_ok: Option<bool>,
    pub spectral_gap_ok: bool,
    pub sigma2: f64,
    pub max_row_deviation: f64,
    pub max_column_deviation: f64,
}

impl ValidationReport {
    pub fn passed(&self) -> bool {
        self.row_stochastic
            && self.column_stochastic
            && self.spectral_gap_ok
            && self.sparsity_ok.unwrap_or(true)
    }
}

/// Checks row/column stochasticity, the sparsity pattern (if a topology is
/// given) and `0 < sigma_2 < 1`. Failures are reported, never raised.
pub fn validate_condition1(w: &SquareMatrix, topology: Option<&NetworkTopology>) -> ValidationReport {
    let n = w.dim();
    let mut max_row: f64 = 0.0;
    let mut max_col: f64 = 0.0;
    for i in 0..n {
        let r: f64 = w.row(i).iter().sum();
        let c: f64 = (0..n).map(|k| w.get(k, i)).sum();
        max_row = max_row.max(libm::fabs(r - 1.0));
        max_col = max_col.max(libm::fabs(c - 1.0));
    }
    let sparsity_ok = topology.map(|t| {
        t.n_sensors() == n
            && (0..n).all(|i| (0..n).all(|j| i == j || w.get(i, j) == 0.0 || t.has_edge(i, j)))
    });
    let s2 = sigma2(w);
    ValidationReport {
        row_stochastic: max_row <= STOCHASTIC_TOL,
        column_stochastic: max_col <= STOCHASTIC_TOL,
        sparsity_ok,
        spectral_gap_ok: s2 > STOCHASTIC_TOL && s2 < 1.0 - STOCHASTIC_TOL,
        sigma2: s2,
        max_row_deviation: max_row,
        max_column_deviation: max_col,
    }
}
