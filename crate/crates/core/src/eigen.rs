//! The fiber eigenproblem with the eigenvalue in the soma boundary condition.
//!
//! The strong form is `-(a^2 phi')' = mu a sqrt(1+a'^2) phi` on `(0, ell)`,
//! sealed at `x = ell`, with a soma condition at `x = 0` that contains `mu`
//! itself. In variational form the soma turns into a point mass `A` in the
//! mass matrix and a `-A gamma` correction in the stiffness matrix:
//!
//! ```text
//! K[u, v] = int a^2 u' v' - A gamma u(0) v(0)
//! M[u, v] = int a sqrt(1+a'^2) u v + A u(0) v(0)
//! ```
//!
//! so the problem becomes the symmetric-definite pencil `K u = mu M u`, and
//! `K[v, v] / M[v, v]` is the Rayleigh quotient whose infimum is `mu_1`.
//! With hat functions on a 1D grid both matrices are tridiagonal; eigenvalues
//! are located by Sturm-sequence bisection and eigenvectors by inverse
//! iteration.

use crate::error::{Error, Result};
use crate::grid::{breakpoints, check_nodes, locate, simpson, uniform_nodes, GridFunction};
use crate::model::{PhysicalParams, TaperProfile};
use crate::tridiag::{norm2, SymTridiag};

/// Smallest admissible element count for [`assemble`].
pub const MIN_CELLS: usize = 8;

/// Residual level for `||K phi - mu M phi|| / ||M phi||`. Pairs are rejected
/// above `RESIDUAL_TOL * (1 + |mu|)`; at unit scale this is the plain bound.
pub const RESIDUAL_TOL: f64 = 1e-8;

/// An eigenvalue `mu_n` (numbered from 1) with its eigenfunction,
/// normalized so that `<phi, phi>_a = 1` and `phi(0) >= 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct EigenPair {
    pub index: usize,
    pub mu: f64,
    pub phi: GridFunction,
}

/// Stiffness and mass matrices of the pencil on a given grid.
#[derive(Debug, Clone)]
pub struct AssembledSystem {
    pub nodes: Vec<f64>,
    pub stiffness: SymTridiag,
    pub mass: SymTridiag,
    pub soma_weight: f64,
    pub gamma: f64,
}

impl AssembledSystem {
    pub fn dim(&self) -> usize {
        self.nodes.len()
    }

    /// Discrete Rayleigh quotient `v^T K v / v^T M v`.
    pub fn rayleigh(&self, v: &[f64]) -> Result<f64> {
        if v.len() != self.dim() {
            return Err(Error::GridMismatch(format!(
                "vector of length {} on a grid of {} nodes",
                v.len(),
                self.dim()
            )));
        }
        let den = self.mass.bilinear(v, v);
        if !(den > 0.0) {
            return Err(Error::InvalidArgument("Rayleigh quotient of the zero function".into()));
        }
        Ok(self.stiffness.bilinear(v, v) / den)
    }

    /// `||K phi - mu M phi|| / ||M phi||`.
    pub fn relative_residual(&self, mu: f64, phi: &[f64]) -> f64 {
        let r = self.stiffness.shifted_residual(&self.mass, mu, phi);
        norm2(&r) / norm2(&self.mass.mul_vec(phi))
    }
}

/// Assembles the pencil on `n_cells` uniform elements over `[0, ell]`.
pub fn assemble(a: &TaperProfile, params: &PhysicalParams, n_cells: usize) -> Result<AssembledSystem> {
    if n_cells < MIN_CELLS {
        return Err(Error::InvalidArgument(format!(
            "need at least {MIN_CELLS} cells, got {n_cells}"
        )));
    }
    assemble_on(a, params, &uniform_nodes(a.ell(), n_cells))
}

/// Assembles the pencil on an arbitrary grid spanning `[0, ell]`.
///
/// Element integrals are split at the taper breakpoints; on each piece the
/// integrands are polynomials of degree at most three, so Simpson's rule is
/// exact.
pub fn assemble_on(a: &TaperProfile, params: &PhysicalParams, nodes: &[f64]) -> Result<AssembledSystem> {
    params.validate()?;
    check_nodes(nodes)?;
    let ell = a.ell();
    if nodes[0] != 0.0 || (nodes[nodes.len() - 1] - ell).abs() > 1e-12 * ell {
        return Err(Error::GridMismatch(format!(
            "element grid must span [0, {ell}]"
        )));
    }
    let n = nodes.len();
    let mut stiffness = SymTridiag::zeros(n);
    let mut mass = SymTridiag::zeros(n);
    for j in 0..n - 1 {
        let (xl, xr) = (nodes[j], nodes[j + 1]);
        let h = xr - xl;
        let (mut k, mut m00, mut m01, mut m11) = (0.0, 0.0, 0.0, 0.0);
        for w in breakpoints(xl, xr, a.nodes()).windows(2) {
            let cell = locate(a.nodes(), 0.5 * (w[0] + w[1]));
            let stretch = (1.0 + a.slope(cell).powi(2)).sqrt();
            let r = |x: f64| a.radius_at_cell(cell, x);
            if r(w[0]) <= 0.0 || r(w[1]) <= 0.0 {
                return Err(Error::InvalidProfile("non-positive radius".into()));
            }
            let n0 = |x: f64| (xr - x) / h;
            let n1 = |x: f64| (x - xl) / h;
            k += simpson(w[0], w[1], |x| r(x) * r(x));
            m00 += simpson(w[0], w[1], |x| r(x) * stretch * n0(x) * n0(x));
            m01 += simpson(w[0], w[1], |x| r(x) * stretch * n0(x) * n1(x));
            m11 += simpson(w[0], w[1], |x| r(x) * stretch * n1(x) * n1(x));
        }
        let k = k / (h * h);
        stiffness.add_block(j, k, -k, k);
        mass.add_block(j, m00, m01, m11);
    }
    let soma = params.soma_weight();
    let gamma = params.gamma();
    stiffness.diag[0] -= soma * gamma;
    mass.diag[0] += soma;
    Ok(AssembledSystem {
        nodes: nodes.to_vec(),
        stiffness,
        mass,
        soma_weight: soma,
        gamma,
    })
}

/// The `k` smallest eigenpairs of `K u = mu M u`, in increasing order.
pub fn solve_spectrum(sys: &AssembledSystem, k: usize) -> Result<Vec<EigenPair>> {
    let n = sys.dim();
    if k == 0 || k > n {
        return Err(Error::InvalidArgument(format!(
            "requested {k} eigenpairs from a system of dimension {n}"
        )));
    }
    let count = |s: f64| sys.stiffness.shifted(&sys.mass, s).negative_pivots();

    // Every discrete Rayleigh quotient exceeds -gamma (the soma term is the
    // only negative contribution and it is dominated by A v(0)^2 in M).
    let lower = -sys.gamma - 1.0;
    let mut upper = 1.0_f64;
    while count(upper) < k {
        upper *= 4.0;
        if !upper.is_finite() {
            return Err(Error::EigenNonConvergence { index: k, residual: f64::NAN });
        }
    }
    let abs_tol = 1e-15 * (1.0 + sys.gamma);

    let mut pairs: Vec<EigenPair> = Vec::with_capacity(k);
    let mut vectors: Vec<Vec<f64>> = Vec::with_capacity(k);
    let mut lo_start = lower;
    for idx in 0..k {
        let (mut lo, mut hi) = (lo_start, upper);
        for _ in 0..300 {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi || hi - lo <= abs_tol + 4.0 * f64::EPSILON * mid.abs() {
                break;
            }
            if count(mid) > idx {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        let mu = 0.5 * (lo + hi);
        lo_start = lo;

        let (mu, phi) = inverse_iteration(sys, mu, &vectors, idx + 1)?;
        vectors.push(phi.clone());
        pairs.push(EigenPair {
            index: idx + 1,
            mu,
            phi: GridFunction::new(sys.nodes.clone(), phi)?,
        });
    }
    Ok(pairs)
}

fn inverse_iteration(
    sys: &AssembledSystem,
    mu: f64,
    previous: &[Vec<f64>],
    index: usize,
) -> Result<(f64, Vec<f64>)> {
    let n = sys.dim();
    let shifted = sys.stiffness.shifted(&sys.mass, mu);
    let mut x: Vec<f64> = (0..n)
        .map(|i| 1.0 + 0.5 * (0.618_033_988_75 * (i + 1) as f64).sin())
        .collect();
    let mut residual = f64::INFINITY;
    for iter in 0..8 {
        let rhs = sys.mass.mul_vec(&x);
        x = shifted.solve_pivoted(&rhs);
        for p in previous {
            let c = sys.mass.bilinear(p, &x);
            x.iter_mut().zip(p).for_each(|(xi, pi)| *xi -= c * pi);
        }
        let norm = sys.mass.bilinear(&x, &x).sqrt();
        if !(norm.is_finite() && norm > 0.0) {
            break;
        }
        x.iter_mut().for_each(|v| *v /= norm);
        if iter >= 1 {
            residual = sys.relative_residual(mu, &x);
            if residual <= 0.01 * RESIDUAL_TOL {
                break;
            }
        }
    }
    let mut mu = mu;
    if residual.is_finite() {
        (mu, x, residual) = refine(sys, mu, x, residual, previous);
    }
    if !(residual <= RESIDUAL_TOL * (1.0 + mu.abs())) {
        return Err(Error::EigenNonConvergence { index, residual });
    }
    if x[0] < 0.0 {
        x.iter_mut().for_each(|v| *v = -*v);
    }
    Ok((mu, x))
}

/// Residual correction with the residual accumulated in extended precision.
/// The shift is offset slightly so the correction solve stays well posed.
fn refine(
    sys: &AssembledSystem,
    mu: f64,
    x: Vec<f64>,
    residual: f64,
    previous: &[Vec<f64>],
) -> (f64, Vec<f64>, f64) {
    let (mut best_mu, mut best_x, mut best_res) = (mu, x, residual);
    for _ in 0..3 {
        let Ok(rq) = sys.rayleigh(&best_x) else { break };
        let r = sys.stiffness.shifted_residual(&sys.mass, rq, &best_x);
        let shift = rq + 1e-7 * rq.abs().max(1.0);
        let d = sys.stiffness.shifted(&sys.mass, shift).solve_pivoted(&r);
        let mut y: Vec<f64> = best_x.iter().zip(&d).map(|(a, b)| a - b).collect();
        for p in previous {
            let c = sys.mass.bilinear(p, &y);
            y.iter_mut().zip(p).for_each(|(yi, pi)| *yi -= c * pi);
        }
        let norm = sys.mass.bilinear(&y, &y).sqrt();
        if !(norm.is_finite() && norm > 0.0) {
            break;
        }
        y.iter_mut().for_each(|v| *v /= norm);
        let Ok(mu_y) = sys.rayleigh(&y) else { break };
        let res = sys.relative_residual(mu_y, &y);
        if res < best_res {
            (best_mu, best_x, best_res) = (mu_y, y, res);
        } else {
            break;
        }
    }
    (best_mu, best_x, best_res)
}

/// Convenience: assemble on `n_cells` elements and return the first `k`
/// eigenpairs.
pub fn spectrum(a: &TaperProfile, params: &PhysicalParams, n_cells: usize, k: usize) -> Result<Vec<EigenPair>> {
    solve_spectrum(&assemble(a, params, n_cells)?, k)
}

/// First eigenvalue on `n_cells` elements.
pub fn mu1(a: &TaperProfile, params: &PhysicalParams, n_cells: usize) -> Result<f64> {
    Ok(spectrum(a, params, n_cells, 1)?[0].mu)
}

/// Discrete Rayleigh quotient of `v` for profile `a`, assembled on `v`'s grid.
pub fn rayleigh(a: &TaperProfile, params: &PhysicalParams, v: &GridFunction) -> Result<f64> {
    assemble_on(a, params, v.nodes())?.rayleigh(v.values())
}

/// `mu_1` of a profile against the cylinder of radius `a0`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Mu1Comparison {
    pub mu1_a: f64,
    pub mu1_cyl: f64,
    pub margin: f64,
}

pub fn compare_mu1(a: &TaperProfile, a0: f64, params: &PhysicalParams, n_cells: usize) -> Result<Mu1Comparison> {
    let mu1_a = mu1(a, params, n_cells)?;
    let mu1_cyl = mu1(&TaperProfile::constant(a.ell(), a0)?, params, n_cells)?;
    Ok(Mu1Comparison {
        mu1_a,
        mu1_cyl,
        margin: mu1_a - mu1_cyl,
    })
}

/// Derivative of a simple eigenvalue with respect to each taper node radius.
///
/// For an `M`-normalized eigenvector, `d mu = phi^T (dK - mu dM) phi`. The
/// perturbation of node `i` moves `a` by its hat function `delta a` and the
/// slope by `+-1/dx` on the two adjacent cells, so
///
/// ```text
/// d mu / d a_i = int 2 a (delta a) phi'^2
///              - mu int [delta a sqrt(1+a'^2) + a a' (delta a') / sqrt(1+a'^2)] phi^2
/// ```
///
/// The soma entries do not depend on `a`.
pub fn eigenvalue_gradient(a: &TaperProfile, sys: &AssembledSystem, pair: &EigenPair) -> Vec<f64> {
    let nodes = &sys.nodes;
    let phi = pair.phi.values();
    let mu = pair.mu;
    let tx = a.nodes();
    let mut grad = vec![0.0; tx.len()];
    for j in 0..nodes.len() - 1 {
        let (xl, xr) = (nodes[j], nodes[j + 1]);
        let h = xr - xl;
        let dphi = (phi[j + 1] - phi[j]) / h;
        let phi_at = |x: f64| (phi[j] * (xr - x) + phi[j + 1] * (x - xl)) / h;
        for w in breakpoints(xl, xr, tx).windows(2) {
            let cell = locate(tx, 0.5 * (w[0] + w[1]));
            let dx = tx[cell + 1] - tx[cell];
            let s = a.slope(cell);
            let stretch = (1.0 + s * s).sqrt();
            let r = |x: f64| a.radius_at_cell(cell, x);
            // Hat pieces of the two nodes bounding this taper cell.
            let hats: [(usize, Box<dyn Fn(f64) -> f64>, f64); 2] = [
                (cell, Box::new(move |x| (tx[cell + 1] - x) / dx), -1.0 / dx),
                (cell + 1, Box::new(move |x| (x - tx[cell]) / dx), 1.0 / dx),
            ];
            for (node, da, dslope) in hats.iter() {
                let stiff = 2.0 * dphi * dphi * simpson(w[0], w[1], |x| r(x) * da(x));
                let massd = simpson(w[0], w[1], |x| {
                    let p = phi_at(x);
                    (da(x) * stretch + r(x) * s * dslope / stretch) * p * p
                });
                grad[*node] += stiff - mu * massd;
            }
        }
    }
    grad
}
