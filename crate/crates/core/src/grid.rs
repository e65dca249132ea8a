//! Nodal grid functions and a few grid helpers shared by the solvers.

use crate::error::{Error, Result};

/// A function sampled at strictly increasing nodes and read back by
/// piecewise-linear interpolation.
#[derive(Debug, Clone, PartialEq)]
pub struct GridFunction {
    nodes: Vec<f64>,
    values: Vec<f64>,
}

impl GridFunction {
    pub fn new(nodes: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        if nodes.len() != values.len() {
            return Err(Error::GridMismatch(format!(
                "{} nodes but {} values",
                nodes.len(),
                values.len()
            )));
        }
        check_nodes(&nodes)?;
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument("non-finite grid value".into()));
        }
        Ok(Self { nodes, values })
    }

    /// Samples `f` at the given nodes.
    pub fn sample(nodes: &[f64], f: impl Fn(f64) -> f64) -> Result<Self> {
        Self::new(nodes.to_vec(), nodes.iter().map(|&x| f(x)).collect())
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn first(&self) -> f64 {
        self.values[0]
    }

    pub fn last(&self) -> f64 {
        self.values[self.values.len() - 1]
    }

    /// Linear interpolation; clamps outside the node range.
    pub fn eval(&self, x: f64) -> f64 {
        let i = locate(&self.nodes, x);
        let (x0, x1) = (self.nodes[i], self.nodes[i + 1]);
        let t = ((x - x0) / (x1 - x0)).clamp(0.0, 1.0);
        self.values[i] + t * (self.values[i + 1] - self.values[i])
    }

    pub fn same_grid(&self, other: &GridFunction) -> bool {
        self.nodes == other.nodes
    }
}

pub(crate) fn check_nodes(nodes: &[f64]) -> Result<()> {
    if nodes.len() < 2 {
        return Err(Error::GridMismatch("a grid needs at least two nodes".into()));
    }
    if nodes.iter().any(|x| !x.is_finite()) {
        return Err(Error::GridMismatch("non-finite node".into()));
    }
    if nodes.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::GridMismatch("nodes must be strictly increasing".into()));
    }
    Ok(())
}

/// Index `i` of the cell `[nodes[i], nodes[i+1]]` containing `x`
/// (clamped to the first/last cell).
pub(crate) fn locate(nodes: &[f64], x: f64) -> usize {
    let n = nodes.len();
    debug_assert!(n >= 2);
    match nodes.partition_point(|&p| p <= x) {
        0 => 0,
        k if k >= n => n - 2,
        k => k - 1,
    }
}

pub(crate) fn uniform_nodes(length: f64, cells: usize) -> Vec<f64> {
    let h = length / cells as f64;
    (0..=cells)
        .map(|i| if i == cells { length } else { i as f64 * h })
        .collect()
}

/// Simpson's rule on one interval; exact for cubics.
pub(crate) fn simpson(p: f64, q: f64, f: impl Fn(f64) -> f64) -> f64 {
    (q - p) / 6.0 * (f(p) + 4.0 * f(0.5 * (p + q)) + f(q))
}

/// Merges two sorted breakpoint lists restricted to `[lo, hi]`.
pub(crate) fn breakpoints(lo: f64, hi: f64, inner: &[f64]) -> Vec<f64> {
    let mut pts = Vec::with_capacity(inner.len() + 2);
    pts.push(lo);
    let start = inner.partition_point(|&p| p <= lo);
    for &p in &inner[start..] {
        if p >= hi {
            break;
        }
        pts.push(p);
    }
    pts.push(hi);
    pts
}
