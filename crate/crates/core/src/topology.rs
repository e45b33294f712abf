//! Communication graph of the battery network and its spectral quantities.
//!
//! The graph is undirected with 0/1 edge weights. Its Laplacian L
//! (l_ij = -a_ij off-diagonal, row degree on the diagonal) governs the
//! consensus estimators; the smallest positive eigenvalue (Fiedler value)
//! sets their convergence rate and steady-state error bounds.
//!
//! The state-decomposition scheme runs consensus on a virtual 2n-node graph
//! where every unit gains a private twin attached only to itself. Its
//! Laplacian has the block form
//!
//! ```text
//!   L' = | L + I   -I |
//!        |  -I      I |
//! ```
//!
//! which this module constructs exactly (integer arithmetic on f64).

use crate::error::{Error, Result};
use crate::linalg::{jacobi_eigh, Matrix};

/// Default absolute tolerance for symmetry checks.
pub const SYMMETRY_TOL: f64 = 1e-12;

/// Undirected communication graph plus the leader indicator vector b.
#[derive(Debug, Clone, PartialEq)]
pub struct Topology {
    n: usize,
    adjacency: Matrix,
    leaders: Vec<bool>,
    neighbors: Vec<Vec<usize>>,
}

impl Topology {
    /// Validate and build a topology from an explicit adjacency matrix.
    ///
    /// Requires a symmetric 0/1 matrix with zero diagonal. Connectivity is
    /// not enforced here; scenario validation rejects disconnected graphs.
    pub fn new(adjacency: Matrix, leaders: Vec<bool>) -> Result<Self> {
        let n = adjacency.n();
        if n == 0 {
            return Err(Error::InvalidScenario("unit count must be positive".into()));
        }
        if leaders.len() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                got: leaders.len(),
            });
        }
        for i in 0..n {
            let d = adjacency.get(i, i);
            if d != 0.0 {
                return Err(Error::SelfLoop { unit: i });
            }
            for j in (i + 1)..n {
                let a = adjacency.get(i, j);
                let b = adjacency.get(j, i);
                if a != b {
                    return Err(Error::AsymmetricAdjacency { i, j });
                }
                if a != 0.0 && a != 1.0 {
                    return Err(Error::NotZeroOne { i, j, value: a });
                }
            }
        }
        let neighbors = (0..n)
            .map(|i| {
                (0..n)
                    .filter(|&j| adjacency.get(i, j) != 0.0)
                    .collect::<Vec<_>>()
            })
            .collect();
        Ok(Self {
            n,
            adjacency,
            leaders,
            neighbors,
        })
    }

    /// Build from an undirected edge list (0-based pairs).
    pub fn from_edges(n: usize, edges: &[(usize, usize)], leaders: &[usize]) -> Result<Self> {
        let mut adj = Matrix::zeros(n);
        for &(i, j) in edges {
            if i >= n || j >= n {
                return Err(Error::InvalidScenario(format!(
                    "edge ({i}, {j}) references a unit outside 0..{n}"
                )));
            }
            if i == j {
                return Err(Error::SelfLoop { unit: i });
            }
            adj.set(i, j, 1.0);
            adj.set(j, i, 1.0);
        }
        let mut lead = vec![false; n];
        for &l in leaders {
            if l >= n {
                return Err(Error::InvalidScenario(format!(
                    "leader {l} outside 0..{n}"
                )));
            }
            lead[l] = true;
        }
        Self::new(adj, lead)
    }

    pub fn ring(n: usize, leaders: &[usize]) -> Result<Self> {
        let edges: Vec<_> = (0..n).map(|i| (i, (i + 1) % n)).collect();
        Self::from_edges(n, if n > 1 { &edges } else { &[] }, leaders)
    }

    pub fn path(n: usize, leaders: &[usize]) -> Result<Self> {
        let edges: Vec<_> = (0..n.saturating_sub(1)).map(|i| (i, i + 1)).collect();
        Self::from_edges(n, &edges, leaders)
    }

    pub fn complete(n: usize, leaders: &[usize]) -> Result<Self> {
        let mut edges = Vec::new();
        for i in 0..n {
            for j in (i + 1)..n {
                edges.push((i, j));
            }
        }
        Self::from_edges(n, &edges, leaders)
    }

    #[inline]
    pub fn n(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn neighbors(&self, i: usize) -> &[usize] {
        &self.neighbors[i]
    }

    pub fn degree(&self, i: usize) -> usize {
        self.neighbors[i].len()
    }

    pub fn adjacency(&self) -> &Matrix {
        &self.adjacency
    }

    pub fn leaders(&self) -> &[bool] {
        &self.leaders
    }

    pub fn is_leader(&self, i: usize) -> bool {
        self.leaders[i]
    }

    pub fn has_leader(&self) -> bool {
        self.leaders.iter().any(|&b| b)
    }

    /// Graph Laplacian: off-diagonal -a_ij, diagonal row degree.
    pub fn laplacian(&self) -> Matrix {
        let mut l = Matrix::zeros(self.n);
        for i in 0..self.n {
            for &j in &self.neighbors[i] {
                l.set(i, j, -1.0);
            }
            l.set(i, i, self.degree(i) as f64);
        }
        l
    }

    /// Edge list (i < j), 0-based.
    pub fn edges(&self) -> Vec<(usize, usize)> {
        let mut e = Vec::new();
        for i in 0..self.n {
            for &j in &self.neighbors[i] {
                if i < j {
                    e.push((i, j));
                }
            }
        }
        e
    }
}

/// Laplacian of the 2n-node twin graph used by the decomposed estimator:
/// `[[L + I, -I], [-I, I]]`. Row sums are exactly zero by construction.
pub fn decomposed_laplacian(l: &Matrix) -> Matrix {
    let n = l.n();
    let mut lp = Matrix::zeros(2 * n);
    for i in 0..n {
        for j in 0..n {
            lp.set(i, j, l.get(i, j));
        }
        lp.set(i, i, l.get(i, i) + 1.0);
        lp.set(i, n + i, -1.0);
        lp.set(n + i, i, -1.0);
        lp.set(n + i, n + i, 1.0);
    }
    lp
}

/// Sorted eigenvalues of a Laplacian-like matrix plus its smallest strictly
/// positive one (the Fiedler value for a connected graph).
#[derive(Debug, Clone)]
pub struct SpectralSummary {
    pub eigenvalues: Vec<f64>,
    pub fiedler: f64,
}

impl SpectralSummary {
    pub fn largest(&self) -> f64 {
        *self.eigenvalues.last().expect("non-empty spectrum")
    }
}

/// Eigenvalues sorted ascending and the smallest one above `tol`.
///
/// Errors on asymmetric input and, distinctly, on a missing spectral gap:
/// either no eigenvalue exceeds `tol` at all, or the zero eigenvalue is
/// repeated — which for a Laplacian means the graph is disconnected.
pub fn spectral_summary(m: &Matrix, tol: f64) -> Result<SpectralSummary> {
    let eigen = jacobi_eigh(m, tol.max(SYMMETRY_TOL), 256)?;
    let zero_modes = eigen.values.iter().filter(|v| v.abs() <= tol).count();
    if zero_modes >= 2 {
        return Err(Error::NoSpectralGap { tol });
    }
    let fiedler = eigen
        .values
        .iter()
        .copied()
        .find(|&v| v > tol)
        .ok_or(Error::NoSpectralGap { tol })?;
    Ok(SpectralSummary {
        eigenvalues: eigen.values,
        fiedler,
    })
}

/// Breadth-first connectivity check. Exact (no tolerance); this is the
/// authoritative validator, with the Fiedler sign used as a cross-check in
/// tests. A single node is vacuously connected.
pub fn validate_connected(topology: &Topology) -> bool {
    let n = topology.n();
    let mut seen = vec![false; n];
    let mut queue = std::collections::VecDeque::from([0usize]);
    seen[0] = true;
    let mut count = 1;
    while let Some(i) = queue.pop_front() {
        for &j in topology.neighbors(i) {
            if !seen[j] {
                seen[j] = true;
                count += 1;
                queue.push_back(j);
            }
        }
    }
    count == n
}
