//! Constrained searches for the two attenuation criteria.
//!
//! * `mu1` is minimized over piecewise-linear radius profiles with the floor
//!   `a >= a0` and the lateral bound `int a sqrt(1+a'^2) <= S`. Gradients
//!   come from eigenvalue perturbation ([`eigen::eigenvalue_gradient`]).
//! * `T1` is minimized over cell-wise constant reduced weights with
//!   `a0^3 <= rho <= M` and `int rho <= S`, using the adjoint density
//!   `w0 f` from [`transfer::SteadyState`].
//!
//! Both runs share one projected-gradient loop with Armijo backtracking.
//! Projections are exact on the discretization: the box is a clamp and the
//! integral bound rescales the excess above the floor, so every iterate is
//! feasible.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::eigen;
use crate::error::{Error, Result};
use crate::model::{change_of_variable, check_class, PhysicalParams, RhoProfile, TaperProfile};
use crate::transfer::{self, bang_bang_t1, BangBangProfile, SteadyState};
use crate::transient;

/// Admissible shortfall below the cylinder value in a final report.
pub const GAP_TOL: f64 = 1e-8;

/// Fiber geometry and constraint levels.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Geometry {
    pub ell: f64,
    pub a0: f64,
    #[serde(rename = "S")]
    pub s: f64,
    /// Upper level for the reduced weight; only the `T` search uses it.
    #[serde(rename = "M", default, skip_serializing_if = "Option::is_none")]
    pub m: Option<f64>,
}

impl Geometry {
    pub fn validate(&self) -> Result<()> {
        check_class(self.ell, self.a0, self.s)?;
        if let Some(m) = self.m {
            if !(m > self.a0.powi(3)) {
                return Err(Error::InvalidArgument(format!(
                    "upper level M = {m} must exceed a0^3 = {}",
                    self.a0.powi(3)
                )));
            }
        }
        Ok(())
    }

    /// Reduced length of the cylinder, `ell / a0^2`.
    pub fn ell1(&self) -> f64 {
        self.ell / (self.a0 * self.a0)
    }
}

/// Discretization and stopping controls.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SearchConfig {
    /// Taper nodes for the `mu1` search.
    pub profile_nodes: usize,
    pub x_cells: usize,
    pub y_cells: usize,
    pub max_iter: usize,
    pub rel_tol: f64,
    pub seed: u64,
}

impl Default for SearchConfig {
    fn default() -> Self {
        Self {
            profile_nodes: 17,
            x_cells: 512,
            y_cells: 2048,
            max_iter: 500,
            rel_tol: 1e-10,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Criterion {
    #[serde(rename = "mu1")]
    Mu1,
    #[serde(rename = "T")]
    Transfer,
}

impl std::str::FromStr for Criterion {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "mu1" => Ok(Criterion::Mu1),
            "T" | "t" | "T1" => Ok(Criterion::Transfer),
            other => Err(Error::InvalidArgument(format!("unknown criterion {other:?}, expected mu1 or T"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum BestProfile {
    Taper(TaperProfile),
    Rho(RhoProfile),
}

/// Outcome of one constrained search.
#[derive(Debug, Clone)]
pub struct OptimizationReport {
    pub criterion: Criterion,
    pub best: BestProfile,
    pub best_value: f64,
    pub cylinder_value: f64,
    /// Criterion value after each accepted step (entry 0 is the start).
    pub history: Vec<f64>,
    /// Fraction of variables strictly inside the box, per accepted iterate.
    pub interior_history: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
    pub floor_fraction: f64,
    pub upper_fraction: f64,
    pub surface_active: bool,
    /// Sup-norm distance to the cylinder (`a0` for tapers, `a0^3` for `rho`).
    pub distance_to_cylinder: f64,
}

impl OptimizationReport {
    pub fn gap(&self) -> f64 {
        self.best_value - self.cylinder_value
    }

    /// No value below the cylinder beyond `tol`.
    pub fn respects_optimality(&self, tol: f64) -> bool {
        self.gap() >= -tol
    }

    /// Fraction of variables within `tol` of the cylinder value.
    pub fn fraction_near_cylinder(&self, a0: f64, tol: f64) -> f64 {
        let (vals, target) = match &self.best {
            BestProfile::Taper(t) => (t.radii().to_vec(), a0),
            BestProfile::Rho(r) => (r.values().to_vec(), a0.powi(3)),
        };
        vals.iter().filter(|v| (*v - target).abs() <= tol).count() as f64 / vals.len() as f64
    }

    pub fn summary(&self, profile_csv: Option<String>) -> ReportSummary {
        ReportSummary {
            criterion: self.criterion,
            best_value: self.best_value,
            cylinder_value: self.cylinder_value,
            gap: self.gap(),
            iterations: self.iterations,
            converged: self.converged,
            distance_to_cylinder: self.distance_to_cylinder,
            floor_fraction: self.floor_fraction,
            upper_fraction: self.upper_fraction,
            surface_active: self.surface_active,
            history: self.history.clone(),
            interior_history: self.interior_history.clone(),
            profile_csv,
        }
    }
}

/// Serializable view of a report.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ReportSummary {
    pub criterion: Criterion,
    pub best_value: f64,
    pub cylinder_value: f64,
    pub gap: f64,
    pub iterations: usize,
    pub converged: bool,
    pub distance_to_cylinder: f64,
    pub floor_fraction: f64,
    pub upper_fraction: f64,
    pub surface_active: bool,
    pub history: Vec<f64>,
    pub interior_history: Vec<f64>,
    pub profile_csv: Option<String>,
}

/// Clamps radii to the floor and, if the lateral bound is exceeded, shrinks
/// the excess `a - a0` by the largest factor that satisfies it.
pub fn project_taper(nodes: &[f64], radii: &[f64], a0: f64, s: f64) -> Result<TaperProfile> {
    let clamped: Vec<f64> = radii.iter().map(|r| r.max(a0)).collect();
    let profile = TaperProfile::new(nodes.to_vec(), clamped.clone())?;
    if profile.lateral_integral() <= s {
        return Ok(profile);
    }
    let shrink = |theta: f64| -> Result<TaperProfile> {
        TaperProfile::new(nodes.to_vec(), clamped.iter().map(|r| a0 + theta * (r - a0)).collect())
    };
    let (mut lo, mut hi) = (0.0, 1.0);
    for _ in 0..100 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if shrink(mid)?.lateral_integral() <= s {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    shrink(lo)
}

/// Box clamp to `[floor, upper]` followed by rescaling of the excess above
/// the floor so that `sum rho_j w_j <= s`. Idempotent on feasible points.
pub fn project_rho(values: &[f64], widths: &[f64], floor: f64, upper: f64, s: f64) -> Vec<f64> {
    let clamped: Vec<f64> = values.iter().map(|r| r.clamp(floor, upper)).collect();
    let total = |v: &[f64]| -> f64 { v.iter().zip(widths).map(|(r, w)| r * w).sum() };
    let excess_total = total(&clamped);
    if excess_total <= s {
        return clamped;
    }
    let scaled = |theta: f64| -> Vec<f64> { clamped.iter().map(|r| floor + theta * (r - floor)).collect() };
    let base: f64 = widths.iter().sum::<f64>() * floor;
    let excess = excess_total - base;
    let theta = if excess > 0.0 { ((s - base) / excess).max(0.0) } else { 0.0 };
    let v = scaled(theta);
    if total(&v) <= s {
        return v;
    }
    // Rounding left the total just over the bound.
    let (mut lo, mut hi) = (0.0, theta);
    for _ in 0..64 {
        let mid = 0.5 * (lo + hi);
        if total(&scaled(mid)) <= s {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    scaled(lo)
}

/// Random admissible taper with `nodes` uniform nodes.
pub fn random_taper(rng: &mut impl Rng, geom: &Geometry, nodes: usize) -> Result<TaperProfile> {
    let nodes = nodes.max(2);
    let x: Vec<f64> = (0..nodes).map(|i| geom.ell * i as f64 / (nodes - 1) as f64).collect();
    let r: Vec<f64> = (0..nodes).map(|_| geom.a0 * (1.0 + rng.gen_range(0.0..0.6))).collect();
    project_taper(&x, &r, geom.a0, geom.s)
}

/// Random admissible reduced weight on `cells` uniform cells of `[0, ell1]`.
pub fn random_rho(rng: &mut impl Rng, geom: &Geometry, upper: f64, cells: usize) -> Result<RhoProfile> {
    let floor = geom.a0.powi(3);
    let ell1 = geom.ell1();
    let raw: Vec<f64> = (0..cells).map(|_| rng.gen_range(floor..upper)).collect();
    let widths = vec![ell1 / cells as f64; cells];
    RhoProfile::uniform(ell1, project_rho(&raw, &widths, floor, upper, geom.s))
}

struct Descent {
    x: Vec<f64>,
    value: f64,
    history: Vec<f64>,
    interior_history: Vec<f64>,
    iterations: usize,
    converged: bool,
}

/// Projected gradient with Armijo backtracking.
///
/// `grad` returns directional-derivative coefficients; `metric` turns them
/// into an `L^2`-style step (`x - t grad / metric`).
fn projected_descent(
    x0: Vec<f64>,
    metric: &[f64],
    max_iter: usize,
    rel_tol: f64,
    value_and_grad: impl Fn(&[f64]) -> Result<(f64, Vec<f64>)>,
    value: impl Fn(&[f64]) -> Result<f64>,
    project: impl Fn(&[f64]) -> Result<Vec<f64>>,
    interior: impl Fn(&[f64]) -> f64,
) -> Result<Descent> {
    const ARMIJO: f64 = 1e-4;
    let mut x = project(&x0)?;
    let (mut f, mut g) = value_and_grad(&x)?;
    let mut history = vec![f];
    let mut interior_history = vec![interior(&x)];
    let mut step = 1.0;
    let mut converged = false;
    let mut iterations = 0;
    while iterations < max_iter {
        let mut accepted = None;
        for _ in 0..60 {
            let raw: Vec<f64> = x.iter().zip(&g).zip(metric).map(|((xi, gi), m)| xi - step * gi / m).collect();
            let trial = project(&raw)?;
            if trial == x {
                break;
            }
            let decrease: f64 = g.iter().zip(x.iter().zip(&trial)).map(|(gi, (a, b))| gi * (a - b)).sum();
            let ft = value(&trial)?;
            if ft <= f - ARMIJO * decrease.max(0.0) {
                accepted = Some((trial, ft));
                break;
            }
            step *= 0.5;
        }
        let Some((trial, ft)) = accepted else {
            converged = true;
            break;
        };
        iterations += 1;
        let rel = (f - ft).abs() / f.abs().max(f64::MIN_POSITIVE);
        x = trial;
        let (fv, gv) = value_and_grad(&x)?;
        f = fv;
        g = gv;
        history.push(f);
        interior_history.push(interior(&x));
        step = (2.0 * step).min(1e6);
        if rel < rel_tol {
            converged = true;
            break;
        }
    }
    Ok(Descent {
        x,
        value: f,
        history,
        interior_history,
        iterations,
        converged,
    })
}

/// Minimizes `mu1` over admissible tapers starting from `start` (or a
/// random admissible profile drawn from `cfg.seed`).
pub fn minimize_mu1(
    geom: &Geometry,
    params: &PhysicalParams,
    cfg: &SearchConfig,
    start: Option<TaperProfile>,
) -> Result<OptimizationReport> {
    geom.validate()?;
    params.validate()?;
    let start = match start {
        Some(s) => s,
        None => random_taper(&mut ChaCha8Rng::seed_from_u64(cfg.seed), geom, cfg.profile_nodes)?,
    };
    if (start.ell() - geom.ell).abs() > 1e-12 * geom.ell {
        return Err(Error::InvalidProfile(format!(
            "start profile has length {}, expected {}",
            start.ell(),
            geom.ell
        )));
    }
    let nodes = start.nodes().to_vec();
    let n = nodes.len();
    let metric: Vec<f64> = (0..n)
        .map(|i| {
            let l = if i > 0 { nodes[i] - nodes[i - 1] } else { 0.0 };
            let r = if i + 1 < n { nodes[i + 1] - nodes[i] } else { 0.0 };
            0.5 * (l + r)
        })
        .collect();
    let profile = |r: &[f64]| TaperProfile::new(nodes.clone(), r.to_vec());
    let value_and_grad = |r: &[f64]| -> Result<(f64, Vec<f64>)> {
        let a = profile(r)?;
        let sys = eigen::assemble(&a, params, cfg.x_cells)?;
        let pair = eigen::solve_spectrum(&sys, 1)?.remove(0);
        let grad = eigen::eigenvalue_gradient(&a, &sys, &pair);
        Ok((pair.mu, grad))
    };
    let value = |r: &[f64]| eigen::mu1(&profile(r)?, params, cfg.x_cells);
    let project = |r: &[f64]| Ok(project_taper(&nodes, r, geom.a0, geom.s)?.radii().to_vec());
    let interior = |r: &[f64]| r.iter().filter(|v| **v > geom.a0).count() as f64 / r.len() as f64;

    let run = projected_descent(
        start.radii().to_vec(),
        &metric,
        cfg.max_iter,
        cfg.rel_tol,
        value_and_grad,
        value,
        project,
        interior,
    )?;
    let best = profile(&run.x)?;
    let cylinder_value = eigen::mu1(&TaperProfile::constant(geom.ell, geom.a0)?, params, cfg.x_cells)?;
    let floor_fraction = run.x.iter().filter(|v| **v <= geom.a0).count() as f64 / n as f64;
    Ok(OptimizationReport {
        criterion: Criterion::Mu1,
        distance_to_cylinder: best.distance_to_constant(geom.a0),
        surface_active: best.lateral_integral() >= geom.s * (1.0 - 1e-9),
        best: BestProfile::Taper(best),
        best_value: run.value,
        cylinder_value,
        history: run.history,
        interior_history: run.interior_history,
        iterations: run.iterations,
        converged: run.converged,
        floor_fraction,
        upper_fraction: 0.0,
    })
}

/// Minimizes `T1` over `a0^3 <= rho <= M`, `int rho <= S` on the cylinder's
/// reduced length, starting from `start` (or a random admissible `rho`).
pub fn minimize_t1_bounded(
    geom: &Geometry,
    params: &PhysicalParams,
    cfg: &SearchConfig,
    start: Option<RhoProfile>,
) -> Result<OptimizationReport> {
    geom.validate()?;
    params.validate()?;
    let upper = geom
        .m
        .ok_or_else(|| Error::InvalidArgument("the T search needs an upper level M".into()))?;
    let floor = geom.a0.powi(3);
    let start = match start {
        Some(s) => s,
        None => random_rho(&mut ChaCha8Rng::seed_from_u64(cfg.seed), geom, upper, cfg.y_cells)?,
    };
    let template = start.clone();
    let widths: Vec<f64> = (0..template.cells()).map(|j| template.cell_width(j)).collect();
    let value_and_grad = |v: &[f64]| -> Result<(f64, Vec<f64>)> {
        let st = SteadyState::compute(&template.with_values(v.to_vec())?, params)?;
        Ok((st.t1(), st.cell_gradient()))
    };
    let value = |v: &[f64]| transfer::transfer_t1(&template.with_values(v.to_vec())?, params);
    let project = |v: &[f64]| Ok(project_rho(v, &widths, floor, upper, geom.s));
    let interior = |v: &[f64]| v.iter().filter(|r| **r > floor && **r < upper).count() as f64 / v.len() as f64;

    let run = projected_descent(
        start.values().to_vec(),
        &widths,
        cfg.max_iter,
        cfg.rel_tol,
        value_and_grad,
        value,
        project,
        interior,
    )?;
    let best = template.with_values(run.x.clone())?;
    let cylinder_value = transfer::transfer_t1(&RhoProfile::constant(template.ell1(), template.cells(), floor)?, params)?;
    let cells = run.x.len() as f64;
    Ok(OptimizationReport {
        criterion: Criterion::Transfer,
        distance_to_cylinder: run.x.iter().map(|v| (v - floor).abs()).fold(0.0, f64::max),
        surface_active: best.integral() >= geom.s * (1.0 - 1e-9),
        floor_fraction: run.x.iter().filter(|v| **v <= floor).count() as f64 / cells,
        upper_fraction: run.x.iter().filter(|v| **v >= upper).count() as f64 / cells,
        best: BestProfile::Rho(best),
        best_value: run.value,
        cylinder_value,
        history: run.history,
        interior_history: run.interior_history,
        iterations: run.iterations,
        converged: run.converged,
    })
}

/// Independent restarts, one per seed, run in parallel. Results are in
/// seed order.
pub fn multistart(
    criterion: Criterion,
    geom: &Geometry,
    params: &PhysicalParams,
    cfg: &SearchConfig,
    seeds: &[u64],
) -> Result<Vec<OptimizationReport>> {
    seeds
        .par_iter()
        .map(|&seed| {
            let cfg = SearchConfig { seed, ..*cfg };
            match criterion {
                Criterion::Mu1 => minimize_mu1(geom, params, &cfg, None),
                Criterion::Transfer => minimize_t1_bounded(geom, params, &cfg, None),
            }
        })
        .collect()
}

/// Best transition point within the two-level family allowed by the
/// integral bound: dense scan, then golden-section refinement around the
/// best sample.
pub fn optimal_transition(geom: &Geometry, params: &PhysicalParams) -> Result<(f64, f64)> {
    geom.validate()?;
    let upper = geom
        .m
        .ok_or_else(|| Error::InvalidArgument("the transition search needs M".into()))?;
    let ell1 = geom.ell1();
    let base = BangBangProfile::new(0.0, ell1, geom.a0, upper, params)?;
    let xi_max = transfer::max_transition(ell1, geom.a0, upper, geom.s);
    let t = |xi: f64| bang_bang_t1(&base.with_xi1(xi));
    const SAMPLES: usize = 400;
    let step = xi_max / SAMPLES as f64;
    let best = (0..=SAMPLES)
        .map(|i| i as f64 * step)
        .min_by(|a, b| t(*a).total_cmp(&t(*b)))
        .unwrap_or(0.0);
    let (mut lo, mut hi) = ((best - step).max(0.0), (best + step).min(xi_max));
    let phi = 0.5 * (5f64.sqrt() - 1.0);
    for _ in 0..100 {
        let c = hi - phi * (hi - lo);
        let d = lo + phi * (hi - lo);
        if t(c) <= t(d) {
            hi = d;
        } else {
            lo = c;
        }
    }
    let t_min = [0.0, best, lo, 0.5 * (lo + hi)].into_iter().map(t).fold(f64::INFINITY, f64::min);
    // Near a flat minimum values agree to rounding; ties go to the smaller point.
    let tie = t_min * (1.0 + 4.0 * f64::EPSILON);
    let xi = [0.0, best, lo, 0.5 * (lo + hi)]
        .into_iter()
        .find(|x| t(*x) <= tie)
        .unwrap_or(best);
    Ok((xi, t(xi)))
}

/// Cross-check between the two evaluation routes of `T` at the cylinder.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PullbackCheck {
    pub t_time_domain: f64,
    pub t1_reduced: f64,
    pub closed_form: f64,
    pub relative_gap: f64,
    /// The cylinder's reduced weight is the constant `a0^3`.
    pub in_image: bool,
    pub passed: bool,
}

/// Compares `T(a = a0)` from the modal expansion with `T1(rho = a0^3)`
/// from the reduced problem, and confirms that the constant weight is the
/// image of the cylinder.
pub fn verify_pullback(
    a0: f64,
    ell: f64,
    params: &PhysicalParams,
    x_cells: usize,
    y_cells: usize,
    n_modes: usize,
) -> Result<PullbackCheck> {
    const TOL: f64 = 1e-4;
    let cyl = TaperProfile::constant(ell, a0)?;
    let t_time_domain = transient::transfer_time_domain(&cyl, params, n_modes, x_cells)?;
    let floor = a0.powi(3);
    let cov = change_of_variable(&cyl, y_cells)?;
    let in_image = cov.rho.values().iter().all(|v| (v - floor).abs() <= 1e-12 * floor);
    let t1_reduced = transfer::transfer_t1(&RhoProfile::constant(cov.ell1, y_cells, floor)?, params)?;
    let closed_form = (params.omega(floor) * cov.ell1).cosh();
    let relative_gap = (t_time_domain - t1_reduced).abs() / t1_reduced;
    Ok(PullbackCheck {
        t_time_domain,
        t1_reduced,
        closed_form,
        relative_gap,
        in_image,
        passed: in_image && relative_gap <= TOL,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn params() -> PhysicalParams {
        PhysicalParams::new(1.0, 1.0, 1.0, 0.5, 2.0 * PI).unwrap()
    }

    fn geom() -> Geometry {
        Geometry { ell: 1.0, a0: 1.0, s: 2.0, m: Some(4.0) }
    }

    #[test]
    fn projections_are_feasible_and_idempotent() {
        let g = geom();
        let x: Vec<f64> = (0..9).map(|i| i as f64 / 8.0).collect();
        let r = vec![0.5, 3.0, 2.0, 1.0, 4.0, 1.2, 0.9, 2.5, 3.0];
        let p = project_taper(&x, &r, g.a0, g.s).unwrap();
        assert!(p.min_radius() >= g.a0);
        assert!(p.lateral_integral() <= g.s);
        let again = project_taper(&x, p.radii(), g.a0, g.s).unwrap();
        assert_eq!(again, p);

        let widths = vec![0.125; 8];
        let v = vec![9.0, 0.1, 3.0, 3.0, 2.0, 1.5, 4.0, 1.0];
        let q = project_rho(&v, &widths, 1.0, 4.0, 2.0);
        assert!(q.iter().all(|r| (1.0..=4.0).contains(r)));
        assert!(q.iter().zip(&widths).map(|(a, b)| a * b).sum::<f64>() <= 2.0);
        assert_eq!(project_rho(&q, &widths, 1.0, 4.0, 2.0), q);
    }

    #[test]
    fn cylinder_start_is_stationary() {
        let g = geom();
        let cfg = SearchConfig { x_cells: 128, ..Default::default() };
        let cyl = TaperProfile::from_fn(g.ell, 8, |_| g.a0).unwrap();
        let r = minimize_mu1(&g, &params(), &cfg, Some(cyl)).unwrap();
        assert_eq!(r.iterations, 0);
        assert!(r.converged);
        assert_eq!(r.best_value, r.cylinder_value);
    }

    #[test]
    fn infeasible_class_is_rejected() {
        let g = Geometry { s: 0.5, ..geom() };
        assert!(matches!(
            minimize_mu1(&g, &params(), &SearchConfig::default(), None),
            Err(Error::EmptyClass { .. })
        ));
        let g = Geometry { m: Some(0.5), ..geom() };
        assert!(minimize_t1_bounded(&g, &params(), &SearchConfig::default(), None).is_err());
    }

    #[test]
    fn criterion_parses() {
        assert_eq!("mu1".parse::<Criterion>().unwrap(), Criterion::Mu1);
        assert_eq!("T".parse::<Criterion>().unwrap(), Criterion::Transfer);
        assert!("x".parse::<Criterion>().is_err());
    }

    #[test]
    fn transition_family_prefers_zero() {
        let (xi, t) = optimal_transition(&geom(), &params()).unwrap();
        assert_eq!(xi, 0.0);
        assert!((t - (2f64).sqrt().cosh()).abs() < 1e-12);
    }

    #[test]
    fn pullback_on_desk_config() {
        let c = verify_pullback(1.0, 1.0, &params(), 2048, 2048, 64).unwrap();
        assert!(c.passed, "{c:?}");
    }
}
