//! Spatial network, migration operator and structural checks.
//!
//! A [`Network`] stores the nonnegative flow intensities `b[i][j]` (stock
//! fraction moved from node `i` to node `j` per unit time). The induced
//! [`MigrationOperator`] is `D + Bᵀ` where `D` is the diagonal of negated
//! row sums of `B`; its columns sum to zero, so migration conserves total
//! mass, and its off-diagonal entries are nonnegative (Metzler).

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::float::Float;

/// Directed weighted network of `n >= 2` nodes with zero diagonal,
/// nonnegative weights and a strongly connected support graph.
#[derive(Debug, Clone, PartialEq)]
pub struct Network<T> {
    n: usize,
    b: DMatrix<T>,
}

impl<T: Float> Network<T> {
    /// Validate a weight matrix and build the network.
    pub fn new(weights: DMatrix<T>) -> Result<Self> {
        let (rows, cols) = weights.shape();
        if rows != cols {
            return Err(Error::NotSquare { rows, cols });
        }
        let n = rows;
        if n < 2 {
            return Err(Error::DimensionMismatch {
                expected: 2,
                actual: n,
            });
        }
        for i in 0..n {
            let d = weights[(i, i)];
            if d != T::zero() {
                return Err(Error::NonzeroDiagonal {
                    node: i,
                    value: d.to_f64(),
                });
            }
            for j in 0..n {
                if weights[(i, j)] < T::zero() {
                    return Err(Error::NegativeWeight {
                        row: i,
                        col: j,
                        value: weights[(i, j)].to_f64(),
                    });
                }
            }
        }
        check_strong_connectivity(&weights)?;
        Ok(Self { n, b: weights })
    }

    /// Build a symmetric diffusion network: flow between two nodes is
    /// proportional to the difference of their stocks, so
    /// `alpha_i(x) = sum_j w_ji (x_j - x_i)`.
    pub fn fick(weights: DMatrix<T>) -> Result<Self> {
        let (rows, cols) = weights.shape();
        if rows != cols {
            return Err(Error::NotSquare { rows, cols });
        }
        for i in 0..rows {
            for j in (i + 1)..cols {
                if weights[(i, j)] != weights[(j, i)] {
                    return Err(Error::NotSymmetric { row: i, col: j });
                }
            }
        }
        Self::new(weights)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Flow intensities `b[i][j]` (outflow from `i` to `j`).
    pub fn weights(&self) -> &DMatrix<T> {
        &self.b
    }

    /// The migration operator `D + Bᵀ`.
    pub fn migration_operator(&self) -> MigrationOperator<T> {
        let n = self.n;
        let mut m = self.b.transpose();
        for i in 0..n {
            let mut outflow = T::zero();
            for j in 0..n {
                outflow += self.b[(i, j)];
            }
            m[(i, i)] -= outflow;
        }
        MigrationOperator { matrix: m }
    }

    /// Net inflow `alpha(x) = (D + Bᵀ)x`; its components sum to zero.
    pub fn net_inflow(&self, x: &DVector<T>) -> Result<DVector<T>> {
        if x.len() != self.n {
            return Err(Error::DimensionMismatch {
                expected: self.n,
                actual: x.len(),
            });
        }
        let mut alpha = DVector::zeros(self.n);
        for i in 0..self.n {
            let mut acc = T::zero();
            for j in 0..self.n {
                if j != i {
                    acc += self.b[(j, i)] * x[j] - self.b[(i, j)] * x[i];
                }
            }
            alpha[i] = acc;
        }
        Ok(alpha)
    }
}

/// The matrix `D + Bᵀ` mapping a stock vector to its net inter-node flow.
#[derive(Debug, Clone, PartialEq)]
pub struct MigrationOperator<T> {
    matrix: DMatrix<T>,
}

impl<T: Float> MigrationOperator<T> {
    pub fn matrix(&self) -> &DMatrix<T> {
        &self.matrix
    }

    pub fn n(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn apply(&self, x: &DVector<T>) -> DVector<T> {
        &self.matrix * x
    }

    /// Inflow weight into node `i` from node `j` (`b[j][i]`), read off the
    /// operator's off-diagonal.
    pub fn inflow(&self, into: usize, from: usize) -> T {
        self.matrix[(into, from)]
    }
}

/// Subset `F` of nodes hosting extractors; the remaining nodes are reserves.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ExtractionPattern {
    active: Vec<usize>,
    n: usize,
}

impl ExtractionPattern {
    /// Build a pattern from 0-based node indices (deduplicated, sorted).
    pub fn new(n: usize, nodes: &[usize]) -> Result<Self> {
        if nodes.is_empty() {
            return Err(Error::EmptyActiveSet);
        }
        let mut active: Vec<usize> = nodes.to_vec();
        active.sort_unstable();
        active.dedup();
        if let Some(&node) = active.iter().find(|&&i| i >= n) {
            return Err(Error::ActiveNodeOutOfRange { node, n });
        }
        Ok(Self { active, n })
    }

    /// All nodes active.
    pub fn all(n: usize) -> Self {
        Self {
            active: (0..n).collect(),
            n,
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Number of extractors `f = |F|`.
    pub fn f(&self) -> usize {
        self.active.len()
    }

    pub fn active(&self) -> &[usize] {
        &self.active
    }

    pub fn contains(&self, node: usize) -> bool {
        self.active.binary_search(&node).is_ok()
    }

    /// The rank-1 aggregation matrix with row `i` equal to the all-ones
    /// vector when `i` is active and zero otherwise, so `(E x)_i = <e, x>`
    /// on active rows.
    pub fn e_matrix<T: Float>(&self) -> DMatrix<T> {
        let mut e = DMatrix::zeros(self.n, self.n);
        for &i in &self.active {
            for j in 0..self.n {
                e[(i, j)] = T::one();
            }
        }
        e
    }

    /// Indicator vector of the active set.
    pub fn indicator<T: Float>(&self) -> DVector<T> {
        let mut xi = DVector::zeros(self.n);
        for &i in &self.active {
            xi[i] = T::one();
        }
        xi
    }
}

/// Smallest inflow weight into any active node: `min_{i in F} min_{j != i} b[j][i]`.
///
/// An affine feedback `theta <e, x>` keeps the state in the nonnegative
/// orthant from any start iff `theta` stays below this bound, so a zero
/// here means global admissibility is unattainable.
pub fn inflow_threshold<T: Float>(net: &Network<T>, pat: &ExtractionPattern) -> T {
    let b = net.weights();
    let mut bound = T::INFINITY;
    for &i in pat.active() {
        for j in 0..net.n() {
            if j != i {
                bound = bound.min(b[(j, i)]);
            }
        }
    }
    bound
}

/// Breadth-first reachability from node 0 and to node 0 (on the transpose);
/// together they certify strong connectivity.
fn check_strong_connectivity<T: Float>(b: &DMatrix<T>) -> Result<()> {
    let n = b.nrows();
    let reach = |forward: bool| -> Vec<bool> {
        let mut seen = vec![false; n];
        let mut queue = vec![0usize];
        seen[0] = true;
        while let Some(i) = queue.pop() {
            for j in 0..n {
                let w = if forward { b[(i, j)] } else { b[(j, i)] };
                if w > T::zero() && !seen[j] {
                    seen[j] = true;
                    queue.push(j);
                }
            }
        }
        seen
    };
    let fwd = reach(true);
    if let Some(node) = fwd.iter().position(|&s| !s) {
        return Err(Error::NotStronglyConnected {
            node,
            forward: true,
        });
    }
    let bwd = reach(false);
    if let Some(node) = bwd.iter().position(|&s| !s) {
        return Err(Error::NotStronglyConnected {
            node,
            forward: false,
        });
    }
    Ok(())
}
