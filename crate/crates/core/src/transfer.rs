//! Steady transfer ratio in the reduced coordinate.
//!
//! After the substitution `y = int dx / a^2` the time-integrated potential
//! `w0(y)` solves a constant-diffusion two-point problem
//!
//! ```text
//! (1/2R_a) w0'' = G_m rho w0        on (0, ell1)
//! (pi/R_a) w0'(0) = A_s G_s w0(0) - 1,    w0'(ell1) = 0
//! ```
//!
//! and the transfer criterion is `T1(rho) = w0(0) / w0(ell1)`. Multiplying
//! by a test function and integrating by parts gives the weak form
//!
//! ```text
//! (1/2R_a) int w0' z' + G_m int rho w0 z + A G_s w0(0) z(0) = z(0) / (2 pi)
//! ```
//!
//! with `A = A_s / 2pi`. All boundary value problems here (the state, the two
//! adjoints and the Laplace-parameter family `w_p`) are discretized with
//! hat functions on the grid that carries `rho`, with `rho` constant per
//! cell. With that choice the adjoint identities hold exactly at the
//! discrete level, so the density `w0 f` integrated against a cell-wise
//! perturbation is the exact derivative of the discrete `T1`.

use crate::error::{Error, Result};
use crate::grid::GridFunction;
use crate::model::{PhysicalParams, RhoProfile};
use crate::tridiag::{dot, solve_m_matrix, SymTridiag};

/// Bilinear form `axial int u'z' + reaction int rho u z + boundary u(0)z(0)`,
/// kept both as a plain tridiagonal matrix and as off-diagonals plus row
/// sums for a cancellation-free solve.
struct Reduced {
    tri: SymTridiag,
    neg_off: Vec<f64>,
    row_sum: Vec<f64>,
}

impl Reduced {
    fn solve(&self, b: &[f64]) -> Vec<f64> {
        let m_matrix = self.neg_off.iter().all(|e| *e > 0.0)
            && self.row_sum.iter().all(|s| *s >= 0.0)
            && self.row_sum.iter().any(|s| *s > 0.0);
        if m_matrix {
            solve_m_matrix(&self.neg_off, &self.row_sum, b)
        } else {
            self.tri.solve_spd(b)
        }
    }

    fn dim(&self) -> usize {
        self.tri.dim()
    }
}

fn reduced_matrix(rho: &RhoProfile, axial: f64, reaction: f64, boundary: f64) -> Reduced {
    let n = rho.nodes().len();
    let mut tri = SymTridiag::zeros(n);
    let mut neg_off = vec![0.0; n - 1];
    let mut row_sum = vec![0.0; n];
    for (j, r) in rho.values().iter().enumerate() {
        let h = rho.cell_width(j);
        let k = axial / h;
        let c = reaction * r * h / 6.0;
        tri.add_block(j, k + 2.0 * c, -k + c, k + 2.0 * c);
        neg_off[j] = k - c;
        row_sum[j] += 3.0 * c;
        row_sum[j + 1] += 3.0 * c;
    }
    tri.diag[0] += boundary;
    row_sum[0] += boundary;
    Reduced { tri, neg_off, row_sum }
}

/// `int rho u z` as a matrix.
fn rho_mass(rho: &RhoProfile) -> SymTridiag {
    reduced_matrix(rho, 0.0, 1.0, 0.0).tri
}

fn state_matrix(rho: &RhoProfile, params: &PhysicalParams) -> Reduced {
    reduced_matrix(
        rho,
        1.0 / (2.0 * params.r_a),
        params.g_m,
        params.soma_weight() * params.g_s,
    )
}

fn soma_load(n: usize) -> Vec<f64> {
    let mut b = vec![0.0; n];
    b[0] = 1.0 / (2.0 * std::f64::consts::PI);
    b
}

/// Time-integrated potential `w0` on the grid of `rho`.
pub fn solve_w0(rho: &RhoProfile, params: &PhysicalParams) -> Result<GridFunction> {
    params.validate()?;
    let k = state_matrix(rho, params);
    let w = k.solve(&soma_load(k.dim()));
    GridFunction::new(rho.nodes().to_vec(), w)
}

/// `T1(rho) = w0(0) / w0(ell1)`.
pub fn transfer_t1(rho: &RhoProfile, params: &PhysicalParams) -> Result<f64> {
    let w = solve_w0(rho, params)?;
    Ok(w.first() / w.last())
}

/// Laplace-domain potential `w_p` for `p >= 0`; `p = 0` reproduces `w0`.
pub fn solve_wp(rho: &RhoProfile, params: &PhysicalParams, p: f64) -> Result<GridFunction> {
    params.validate()?;
    if !(p.is_finite() && p >= 0.0) {
        return Err(Error::InvalidArgument(format!("Laplace parameter must be >= 0, got {p}")));
    }
    let k = laplace_matrix(rho, params, p);
    let w = k.solve(&soma_load(k.dim()));
    GridFunction::new(rho.nodes().to_vec(), w)
}

fn laplace_matrix(rho: &RhoProfile, params: &PhysicalParams, p: f64) -> Reduced {
    let cp = params.c_m * p;
    reduced_matrix(
        rho,
        1.0 / (2.0 * params.r_a),
        cp + params.g_m,
        params.soma_weight() * (cp + params.g_s),
    )
}

/// `d w_p / dp` at `p = 0`, the first-order coefficient of `w_p - w0`.
pub fn laplace_derivative(rho: &RhoProfile, params: &PhysicalParams) -> Result<GridFunction> {
    params.validate()?;
    let w0 = solve_w0(rho, params)?;
    let dk = reduced_matrix(rho, 0.0, params.c_m, params.soma_weight() * params.c_m);
    let rhs: Vec<f64> = dk.tri.mul_vec(w0.values()).into_iter().map(|v| -v).collect();
    let d = state_matrix(rho, params).solve(&rhs);
    GridFunction::new(rho.nodes().to_vec(), d)
}

/// Energy `a_p(w, w)` of the Laplace-parameter form, evaluated exactly for
/// the piecewise-linear `w`.
pub fn laplace_energy(rho: &RhoProfile, params: &PhysicalParams, p: f64, w: &GridFunction) -> f64 {
    laplace_matrix(rho, params, p).tri.bilinear(w.values(), w.values())
}

/// Discrete `H^1` norm of a piecewise-linear function.
pub fn h1_norm(w: &GridFunction) -> f64 {
    let (y, v) = (w.nodes(), w.values());
    let mut s = 0.0;
    for j in 0..y.len() - 1 {
        let h = y[j + 1] - y[j];
        let d = v[j + 1] - v[j];
        s += d * d / h + h / 3.0 * (v[j] * v[j] + v[j] * v[j + 1] + v[j + 1] * v[j + 1]);
    }
    s.sqrt()
}

/// Adjoint states `(q1, q2)`:
///
/// ```text
/// (1/2R_a) q1'' = G_m rho (q1 - y),   (1/2R_a) q2'' = G_m rho (q2 - 1)
/// (pi/R_a) q'(0) = A_s G_s q(0),      q'(ell1) = 0
/// ```
pub fn solve_adjoints(rho: &RhoProfile, params: &PhysicalParams) -> Result<(GridFunction, GridFunction)> {
    params.validate()?;
    let k = state_matrix(rho, params);
    let mass = rho_mass(rho);
    let y = rho.nodes();
    let ones = vec![1.0; y.len()];
    let scale = |v: Vec<f64>| v.into_iter().map(|t| params.g_m * t).collect::<Vec<_>>();
    let q1 = k.solve(&scale(mass.mul_vec(y)));
    let q2 = k.solve(&scale(mass.mul_vec(&ones)));
    Ok((
        GridFunction::new(y.to_vec(), q1)?,
        GridFunction::new(y.to_vec(), q2)?,
    ))
}

/// State, adjoints and the gradient factor of `T1` at one `rho`.
#[derive(Debug, Clone)]
pub struct SteadyState {
    pub nodes: Vec<f64>,
    pub w0: Vec<f64>,
    pub q1: Vec<f64>,
    pub q2: Vec<f64>,
    /// Gradient factor `f`; the derivative density of `T1` is `w0 f`.
    pub f: Vec<f64>,
    /// `g = (q1 - y) / (q2 - 1)`.
    pub g: Vec<f64>,
    /// `A~ = 2 A G_s R_a`.
    pub a_tilde: f64,
}

impl SteadyState {
    pub fn compute(rho: &RhoProfile, params: &PhysicalParams) -> Result<Self> {
        let w = solve_w0(rho, params)?;
        let (q1, q2) = solve_adjoints(rho, params)?;
        let nodes = rho.nodes().to_vec();
        let a_tilde = 2.0 * params.soma_weight() * params.g_s * params.r_a;
        let (w_0, w_l) = (w.first(), w.last());
        let lead = 2.0 * params.r_a * params.g_m / (w_l * w_l);
        let f = nodes
            .iter()
            .zip(q1.values().iter().zip(q2.values()))
            .map(|(&y, (&a, &b))| lead * ((w_l - w_0) / a_tilde * (b - 1.0) - w_0 * (a - y)))
            .collect();
        let g = nodes
            .iter()
            .zip(q1.values().iter().zip(q2.values()))
            .map(|(&y, (&a, &b))| (a - y) / (b - 1.0))
            .collect();
        Ok(Self {
            nodes,
            w0: w.values().to_vec(),
            q1: q1.values().to_vec(),
            q2: q2.values().to_vec(),
            f,
            g,
            a_tilde,
        })
    }

    pub fn t1(&self) -> f64 {
        self.w0[0] / self.w0[self.w0.len() - 1]
    }

    /// Nodal values of the derivative density `w0 f`.
    pub fn density(&self) -> Vec<f64> {
        self.w0.iter().zip(&self.f).map(|(w, f)| w * f).collect()
    }

    /// `int_cell w0 f dy` for every cell, exact for the piecewise-linear
    /// `w0` and `f`. Summed against cell values of a perturbation `h`, this
    /// is `<dT1/drho, h>`.
    pub fn cell_gradient(&self) -> Vec<f64> {
        let (w, f, y) = (&self.w0, &self.f, &self.nodes);
        (0..y.len() - 1)
            .map(|j| {
                let h = y[j + 1] - y[j];
                h / 6.0 * (2.0 * w[j] * f[j] + w[j] * f[j + 1] + w[j + 1] * f[j] + 2.0 * w[j + 1] * f[j + 1])
            })
            .collect()
    }

    /// `<dT1/drho, h>` for a cell-wise constant perturbation.
    pub fn directional(&self, h: &[f64]) -> Result<f64> {
        if h.len() + 1 != self.nodes.len() {
            return Err(Error::GridMismatch(format!(
                "perturbation has {} cells, grid has {}",
                h.len(),
                self.nodes.len() - 1
            )));
        }
        Ok(dot(&self.cell_gradient(), h))
    }
}

/// Derivative density `y -> w0(y) f(y)` of `T1`.
pub fn gradient_t1(rho: &RhoProfile, params: &PhysicalParams) -> Result<GridFunction> {
    let st = SteadyState::compute(rho, params)?;
    GridFunction::new(st.nodes.clone(), st.density())
}

/// Two-level reduced profile: `M` on `[0, xi1)` and `a0^3` beyond.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BangBangProfile {
    pub xi1: f64,
    pub ell1: f64,
    pub a0: f64,
    pub m: f64,
    pub omega0: f64,
    pub omega_m: f64,
}

impl BangBangProfile {
    pub fn new(xi1: f64, ell1: f64, a0: f64, m: f64, params: &PhysicalParams) -> Result<Self> {
        if !(ell1 > 0.0 && (0.0..=ell1).contains(&xi1)) {
            return Err(Error::InvalidArgument(format!("need 0 <= xi1 <= ell1, got xi1 = {xi1}, ell1 = {ell1}")));
        }
        let floor = a0.powi(3);
        if !(m > floor) {
            return Err(Error::InvalidArgument(format!("upper level M = {m} must exceed a0^3 = {floor}")));
        }
        Ok(Self {
            xi1,
            ell1,
            a0,
            m,
            omega0: params.omega(floor),
            omega_m: params.omega(m),
        })
    }

    pub fn with_xi1(&self, xi1: f64) -> Self {
        Self { xi1, ..*self }
    }

    pub fn to_rho(&self, cells: usize) -> Result<RhoProfile> {
        RhoProfile::two_level(self.ell1, self.xi1, self.m, self.a0.powi(3), cells)
    }
}

/// Closed-form `T1` of a two-level profile.
pub fn bang_bang_t1(bb: &BangBangProfile) -> f64 {
    let (w0, wm, xi, l) = (bb.omega0, bb.omega_m, bb.xi1, bb.ell1);
    let r = w0 / wm;
    let (c0, s0) = ((w0 * xi).cosh(), (w0 * xi).sinh());
    let (cm, sm) = ((wm * xi).cosh(), (wm * xi).sinh());
    (w0 * l).cosh() * (c0 * cm - r * sm * s0) - (w0 * l).sinh() * (s0 * cm - r * sm * c0)
}

/// Closed-form `dT1/dxi1`, nonnegative and zero only at `xi1 = 0`.
pub fn bang_bang_dt1(bb: &BangBangProfile) -> f64 {
    let (w0, wm) = (bb.omega0, bb.omega_m);
    (wm * wm - w0 * w0) / wm * (wm * bb.xi1).sinh() * (w0 * (bb.ell1 - bb.xi1)).cosh()
}

/// `T1` of the two-level profile from the discretized boundary value problem.
pub fn bang_bang_numeric(bb: &BangBangProfile, params: &PhysicalParams, cells: usize) -> Result<f64> {
    transfer_t1(&bb.to_rho(cells)?, params)
}

/// Largest transition point allowed by `int rho <= s`.
pub fn max_transition(ell1: f64, a0: f64, m: f64, s: f64) -> f64 {
    let floor = a0.powi(3);
    ((s - floor * ell1) / (m - floor)).clamp(0.0, ell1)
}

/// One row of a transition-point sweep.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepRow {
    pub xi1: f64,
    pub t1_closed: f64,
    pub t1_numeric: f64,
    pub dt1: f64,
}

/// Evaluates closed form, discretized value and derivative on `points`
/// uniformly spaced transition points in `[0, xi_max]`.
pub fn sweep_xi(bb: &BangBangProfile, params: &PhysicalParams, xi_max: f64, points: usize, cells: usize) -> Result<Vec<SweepRow>> {
    use rayon::prelude::*;
    let points = points.max(2);
    (0..points)
        .into_par_iter()
        .map(|i| {
            let xi1 = xi_max * i as f64 / (points - 1) as f64;
            let b = bb.with_xi1(xi1);
            Ok(SweepRow {
                xi1,
                t1_closed: bang_bang_t1(&b),
                t1_numeric: bang_bang_numeric(&b, params, cells)?,
                dt1: bang_bang_dt1(&b),
            })
        })
        .collect()
}
