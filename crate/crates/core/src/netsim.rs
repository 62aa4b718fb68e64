//! Synchronous simulation of the communication layer.
//!
//! A [`Topology`] is an undirected connected graph. [`consensus_matrix`]
//! builds the mixing matrix `W = I - cL` with `c = 2 / (λ₂ + λ_max)`, and
//! [`average_consensus`] applies it a fixed number of rounds while a
//! [`RoundLedger`] records how many rounds each outer iteration spent.

use nalgebra::SymmetricEigen;
use serde::{Deserialize, Serialize};

use crate::error::{GravError, Result};
use crate::Matrix;

/// Laplacian eigenvalues at or below this are treated as zero.
pub const CONNECTIVITY_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum TopologyKind {
    Hypercube { dim: u32 },
    Cycle,
    Complete,
    Custom,
}

/// Named graph families accepted by [`build_topology`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum GraphFamily {
    Hypercube,
    Cycle,
    Complete,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Topology {
    m: usize,
    edges: Vec<(usize, usize)>,
    kind: TopologyKind,
}

impl Topology {
    pub fn hypercube(m: usize) -> Result<Self> {
        if m < 2 || !m.is_power_of_two() {
            return Err(GravError::InvalidParameter(format!(
                "hypercube size must be a power of two >= 2, got {m}"
            )));
        }
        let dim = m.trailing_zeros();
        let mut edges = Vec::with_capacity(m * dim as usize / 2);
        for u in 0..m {
            for bit in 0..dim {
                let v = u ^ (1 << bit);
                if u < v {
                    edges.push((u, v));
                }
            }
        }
        edges.sort_unstable();
        Ok(Topology {
            m,
            edges,
            kind: TopologyKind::Hypercube { dim },
        })
    }

    pub fn cycle(m: usize) -> Result<Self> {
        check_size(m)?;
        let mut edges: Vec<_> = (0..m).map(|u| ordered(u, (u + 1) % m)).collect();
        edges.sort_unstable();
        edges.dedup();
        Ok(Topology {
            m,
            edges,
            kind: TopologyKind::Cycle,
        })
    }

    pub fn complete(m: usize) -> Result<Self> {
        check_size(m)?;
        let edges = (0..m)
            .flat_map(|u| (u + 1..m).map(move |v| (u, v)))
            .collect();
        Ok(Topology {
            m,
            edges,
            kind: TopologyKind::Complete,
        })
    }

    /// A custom graph. Duplicate edges are merged; self-loops, out-of-range
    /// endpoints and disconnected graphs are rejected.
    pub fn from_edges(m: usize, edges: &[(usize, usize)]) -> Result<Self> {
        check_size(m)?;
        let mut list = Vec::with_capacity(edges.len());
        for &(u, v) in edges {
            if u == v {
                return Err(GravError::InvalidParameter(format!("self-loop at agent {u}")));
            }
            if u >= m || v >= m {
                return Err(GravError::InvalidParameter(format!(
                    "edge ({u}, {v}) out of range for {m} agents"
                )));
            }
            list.push(ordered(u, v));
        }
        list.sort_unstable();
        list.dedup();
        let topo = Topology {
            m,
            edges: list,
            kind: TopologyKind::Custom,
        };
        if !topo.is_connected() {
            return Err(GravError::Disconnected { lambda2: 0.0 });
        }
        Ok(topo)
    }

    /// Parses one `u,v` pair per line (0-indexed). Blank lines and lines
    /// starting with `#` are skipped.
    pub fn parse_edge_list(text: &str) -> Result<Vec<(usize, usize)>> {
        let mut edges = Vec::new();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let bad = || {
                GravError::InvalidParameter(format!(
                    "edge list line {}: expected `u,v`, got {line:?}",
                    lineno + 1
                ))
            };
            let (u, v) = line.split_once(',').ok_or_else(bad)?;
            let u = u.trim().parse().map_err(|_| bad())?;
            let v = v.trim().parse().map_err(|_| bad())?;
            edges.push((u, v));
        }
        Ok(edges)
    }

    /// Builds a custom topology from edge-list text; the agent count is one
    /// past the largest endpoint.
    pub fn from_edge_list(text: &str) -> Result<Self> {
        let edges = Self::parse_edge_list(text)?;
        let m = edges.iter().map(|&(u, v)| u.max(v) + 1).max().unwrap_or(0);
        Self::from_edges(m, &edges)
    }

    pub fn m(&self) -> usize {
        self.m
    }

    /// Edges as `(u, v)` with `u < v`, sorted.
    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    pub fn kind(&self) -> TopologyKind {
        self.kind
    }

    pub fn degree(&self, agent: usize) -> usize {
        self.edges
            .iter()
            .filter(|&&(u, v)| u == agent || v == agent)
            .count()
    }

    pub fn laplacian(&self) -> Matrix {
        let mut l = Matrix::zeros(self.m, self.m);
        for &(u, v) in &self.edges {
            l[(u, v)] -= 1.0;
            l[(v, u)] -= 1.0;
            l[(u, u)] += 1.0;
            l[(v, v)] += 1.0;
        }
        l
    }

    pub fn is_connected(&self) -> bool {
        if self.m == 0 {
            return false;
        }
        let mut adj = vec![Vec::new(); self.m];
        for &(u, v) in &self.edges {
            adj[u].push(v);
            adj[v].push(u);
        }
        let mut seen = vec![false; self.m];
        let mut stack = vec![0];
        seen[0] = true;
        while let Some(u) = stack.pop() {
            for &v in &adj[u] {
                if !seen[v] {
                    seen[v] = true;
                    stack.push(v);
                }
            }
        }
        seen.into_iter().all(|s| s)
    }

    /// `(λ₂, λ_max)` of the Laplacian, closed form where one is known.
    pub fn laplacian_extremes(&self) -> (f64, f64) {
        use std::f64::consts::PI;
        let m = self.m as f64;
        match self.kind {
            TopologyKind::Hypercube { dim } => (2.0, 2.0 * dim as f64),
            TopologyKind::Complete => (m, m),
            TopologyKind::Cycle if self.m == 2 => (2.0, 2.0),
            TopologyKind::Cycle => {
                let half = (self.m / 2) as f64;
                (
                    2.0 - 2.0 * (2.0 * PI / m).cos(),
                    2.0 - 2.0 * (2.0 * PI * half / m).cos(),
                )
            }
            TopologyKind::Custom => {
                let mut eig = SymmetricEigen::new(self.laplacian()).eigenvalues;
                eig.as_mut_slice().sort_by(f64::total_cmp);
                let lambda2 = if self.m > 1 { eig[1] } else { 0.0 };
                (lambda2, eig[self.m - 1])
            }
        }
    }
}

fn check_size(m: usize) -> Result<()> {
    if m < 2 {
        return Err(GravError::InvalidParameter(format!(
            "a topology needs at least 2 agents, got {m}"
        )));
    }
    Ok(())
}

fn ordered(u: usize, v: usize) -> (usize, usize) {
    if u < v { (u, v) } else { (v, u) }
}

pub fn build_topology(family: GraphFamily, size: usize) -> Result<Topology> {
    match family {
        GraphFamily::Hypercube => Topology::hypercube(size),
        GraphFamily::Cycle => Topology::cycle(size),
        GraphFamily::Complete => Topology::complete(size),
    }
}

/// The Laplacian step size `2 / (λ₂ + λ_max)`.
pub fn mixing_constant(topology: &Topology) -> Result<f64> {
    let (lambda2, lambda_max) = topology.laplacian_extremes();
    if lambda2 <= CONNECTIVITY_TOL {
        return Err(GravError::Disconnected { lambda2 });
    }
    Ok(2.0 / (lambda2 + lambda_max))
}

/// `W = I - cL` with the optimal constant `c`.
pub fn consensus_matrix(topology: &Topology) -> Result<Matrix> {
    let c = mixing_constant(topology)?;
    let m = topology.m();
    Ok(Matrix::identity(m, m) - topology.laplacian() * c)
}

/// Default rounds per outer iteration for a topology kind.
pub fn default_rounds(kind: TopologyKind) -> usize {
    match kind {
        TopologyKind::Hypercube { .. } => 10,
        TopologyKind::Cycle => 50,
        TopologyKind::Complete => 1,
        TopologyKind::Custom => 10,
    }
}

/// A validated mixing matrix plus the number of rounds run per call.
#[derive(Debug, Clone)]
pub struct ConsensusSpec {
    w: Matrix,
    rounds_per_iteration: usize,
    neighbors: Vec<Vec<(usize, f64)>>,
}

impl ConsensusSpec {
    /// Checks symmetry, unit row sums and `ρ(W - J/M) < 1`.
    pub fn new(w: Matrix, rounds_per_iteration: usize) -> Result<Self> {
        let m = w.nrows();
        if m == 0 || w.ncols() != m {
            return Err(GravError::DimensionMismatch {
                expected: (m, m),
                got: w.shape(),
            });
        }
        if rounds_per_iteration == 0 {
            return Err(GravError::InvalidParameter(
                "rounds per iteration must be positive".into(),
            ));
        }
        let scale = w.amax().max(1.0);
        let asym = (&w - w.transpose()).amax();
        if asym > 1e-12 * scale {
            return Err(GravError::InvalidParameter(format!(
                "mixing matrix is not symmetric (max asymmetry {asym:e})"
            )));
        }
        for i in 0..m {
            let row_sum: f64 = w.row(i).iter().sum();
            if (row_sum - 1.0).abs() > 1e-12 * scale {
                return Err(GravError::InvalidParameter(format!(
                    "mixing matrix row {i} sums to {row_sum}"
                )));
            }
        }
        let centered = &w - Matrix::from_element(m, m, 1.0 / m as f64);
        let rho = SymmetricEigen::new(centered).eigenvalues.amax();
        if rho >= 1.0 - CONNECTIVITY_TOL {
            return Err(GravError::Disconnected { lambda2: 1.0 - rho });
        }
        let neighbors = (0..m)
            .map(|i| {
                (0..m)
                    .filter(|&j| w[(i, j)] != 0.0)
                    .map(|j| (j, w[(i, j)]))
                    .collect()
            })
            .collect();
        Ok(ConsensusSpec {
            w,
            rounds_per_iteration,
            neighbors,
        })
    }

    /// Optimal Laplacian mixing on `topology`.
    pub fn for_topology(topology: &Topology, rounds_per_iteration: usize) -> Result<Self> {
        Self::new(consensus_matrix(topology)?, rounds_per_iteration)
    }

    pub fn w(&self) -> &Matrix {
        &self.w
    }

    pub fn m(&self) -> usize {
        self.w.nrows()
    }

    pub fn rounds_per_iteration(&self) -> usize {
        self.rounds_per_iteration
    }

    /// `ρ(W - J/M)`, the per-round contraction factor of disagreement.
    pub fn contraction(&self) -> f64 {
        let m = self.m();
        let centered = &self.w - Matrix::from_element(m, m, 1.0 / m as f64);
        SymmetricEigen::new(centered).eigenvalues.amax()
    }
}

/// Communication rounds spent, overall and per outer iteration.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct RoundLedger {
    total_rounds: usize,
    per_iteration: Vec<(usize, usize)>,
    current: usize,
}

impl RoundLedger {
    pub fn new() -> Self {
        Self::default()
    }

    /// Subsequent charges are attributed to iteration `t`.
    pub fn begin_iteration(&mut self, t: usize) {
        self.current = t;
    }

    pub fn charge(&mut self, rounds: usize) {
        self.total_rounds += rounds;
        match self.per_iteration.last_mut() {
            Some((t, r)) if *t == self.current => *r += rounds,
            _ => self.per_iteration.push((self.current, rounds)),
        }
    }

    pub fn total_rounds(&self) -> usize {
        self.total_rounds
    }

    pub fn per_iteration(&self) -> &[(usize, usize)] {
        &self.per_iteration
    }
}

/// Runs `spec.rounds_per_iteration()` synchronous rounds of
/// `x_i ← Σ_j W_ij x_j` and charges them to `ledger`.
pub fn average_consensus(
    states: &[Matrix],
    spec: &ConsensusSpec,
    ledger: &mut RoundLedger,
) -> Result<Vec<Matrix>> {
    if states.len() != spec.m() {
        return Err(GravError::DimensionMismatch {
            expected: (spec.m(), 1),
            got: (states.len(), 1),
        });
    }
    let shape = states[0].shape();
    if let Some(bad) = states.iter().find(|s| s.shape() != shape) {
        return Err(GravError::DimensionMismatch {
            expected: shape,
            got: bad.shape(),
        });
    }
    let mut current = states.to_vec();
    let mut next: Vec<Matrix> = vec![Matrix::zeros(shape.0, shape.1); states.len()];
    for _ in 0..spec.rounds_per_iteration {
        for (out, row) in next.iter_mut().zip(&spec.neighbors) {
            out.fill(0.0);
            for &(j, weight) in row {
                out.zip_apply(&current[j], |o, x| *o += weight * x);
            }
        }
        std::mem::swap(&mut current, &mut next);
    }
    ledger.charge(spec.rounds_per_iteration);
    Ok(current)
}
