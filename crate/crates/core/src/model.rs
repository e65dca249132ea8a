//! Physical constants, taper profiles and the reduced coordinate.
//!
//! A fiber is described entirely by its radius `a(x)` on `[0, ell]`. We keep
//! radii as piecewise-linear nodal data: the slope is constant on each cell,
//! so the lateral surface, the weighted inner product and the reduced
//! coordinate `y = int_0^x dt / a(t)^2` all have cell-exact closed forms.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{self, breakpoints, check_nodes, locate, simpson, GridFunction};

/// Electrical constants of the fiber and the soma.
///
/// Units follow the usual cable conventions: `R_a` in kOhm cm, `C_m` in
/// uF/cm^2, conductances in mS/cm^2 and the soma area `A_s` in cm^2.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhysicalParams {
    #[serde(rename = "R_a")]
    pub r_a: f64,
    #[serde(rename = "C_m")]
    pub c_m: f64,
    #[serde(rename = "G_m")]
    pub g_m: f64,
    #[serde(rename = "G_s")]
    pub g_s: f64,
    #[serde(rename = "A_s")]
    pub a_s: f64,
}

impl PhysicalParams {
    pub fn new(r_a: f64, c_m: f64, g_m: f64, g_s: f64, a_s: f64) -> Result<Self> {
        let p = Self {
            r_a,
            c_m,
            g_m,
            g_s,
            a_s,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        let named = [
            ("R_a", self.r_a),
            ("C_m", self.c_m),
            ("G_m", self.g_m),
            ("G_s", self.g_s),
            ("A_s", self.a_s),
        ];
        for (name, v) in named {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::InvalidParams(format!("{name} must be positive, got {v}")));
            }
        }
        if self.g_m < self.g_s {
            return Err(Error::InvalidParams(format!(
                "G_m = {} < G_s = {} makes gamma negative",
                self.g_m, self.g_s
            )));
        }
        Ok(())
    }

    /// `gamma = 2 R_a (G_m - G_s)`, the boundary coupling in the eigenproblem.
    pub fn gamma(&self) -> f64 {
        2.0 * self.r_a * (self.g_m - self.g_s)
    }

    /// `A = A_s / (2 pi)`, the point mass carried by the soma end.
    pub fn soma_weight(&self) -> f64 {
        self.a_s / (2.0 * PI)
    }

    /// Membrane rate `sqrt(2 R_a G_m level)` of a constant reduced profile.
    pub fn omega(&self, level: f64) -> f64 {
        (2.0 * self.r_a * self.g_m * level).sqrt()
    }
}

/// Piecewise-linear radius profile on `[0, ell]`.
#[derive(Debug, Clone, PartialEq)]
pub struct TaperProfile {
    x: Vec<f64>,
    a: Vec<f64>,
}

impl TaperProfile {
    pub fn new(x: Vec<f64>, a: Vec<f64>) -> Result<Self> {
        if x.len() != a.len() {
            return Err(Error::InvalidProfile(format!(
                "{} nodes but {} radii",
                x.len(),
                a.len()
            )));
        }
        check_nodes(&x).map_err(|e| Error::InvalidProfile(e.to_string()))?;
        if x[0] != 0.0 {
            return Err(Error::InvalidProfile("profile must start at x = 0".into()));
        }
        if let Some(r) = a.iter().find(|r| !(r.is_finite() && **r > 0.0)) {
            return Err(Error::InvalidProfile(format!("radius must be positive, got {r}")));
        }
        Ok(Self { x, a })
    }

    pub fn constant(ell: f64, radius: f64) -> Result<Self> {
        Self::new(vec![0.0, ell], vec![radius, radius])
    }

    /// Samples `f` on `cells + 1` uniform nodes.
    pub fn from_fn(ell: f64, cells: usize, f: impl Fn(f64) -> f64) -> Result<Self> {
        if cells == 0 {
            return Err(Error::InvalidProfile("need at least one cell".into()));
        }
        let x = grid::uniform_nodes(ell, cells);
        let a = x.iter().map(|&t| f(t)).collect();
        Self::new(x, a)
    }

    pub fn ell(&self) -> f64 {
        self.x[self.x.len() - 1]
    }

    pub fn nodes(&self) -> &[f64] {
        &self.x
    }

    pub fn radii(&self) -> &[f64] {
        &self.a
    }

    pub fn cells(&self) -> usize {
        self.x.len() - 1
    }

    pub fn slope(&self, cell: usize) -> f64 {
        (self.a[cell + 1] - self.a[cell]) / (self.x[cell + 1] - self.x[cell])
    }

    pub fn radius_at(&self, x: f64) -> f64 {
        let i = locate(&self.x, x);
        self.a[i] + self.slope(i) * (x - self.x[i])
    }

    /// Slope of the cell containing `x` (right-continuous at nodes).
    pub fn slope_at(&self, x: f64) -> f64 {
        self.slope(locate(&self.x, x))
    }

    pub fn min_radius(&self) -> f64 {
        self.a.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max_radius(&self) -> f64 {
        self.a.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    /// `int_0^ell a sqrt(1 + a'^2) dx`, the lateral surface without the
    /// `2 pi` factor. This is the quantity bounded by `S`.
    pub fn lateral_integral(&self) -> f64 {
        (0..self.cells())
            .map(|i| self.lateral_between(i, self.x[i], self.x[i + 1]))
            .sum()
    }

    /// `int a sqrt(1+a'^2)` over `[p, q]` inside cell `i`.
    fn lateral_between(&self, i: usize, p: f64, q: f64) -> f64 {
        let s = self.slope(i);
        let ap = self.a[i] + s * (p - self.x[i]);
        let aq = self.a[i] + s * (q - self.x[i]);
        0.5 * (ap + aq) * (q - p) * (1.0 + s * s).sqrt()
    }

    /// `int a sqrt(1+a'^2)` over an arbitrary `[p, q]` within `[0, ell]`.
    pub(crate) fn lateral_on(&self, p: f64, q: f64) -> f64 {
        let pts = breakpoints(p, q, &self.x);
        pts.windows(2)
            .map(|w| self.lateral_between(locate(&self.x, 0.5 * (w[0] + w[1])), w[0], w[1]))
            .sum()
    }

    /// Sup-norm distance to the constant radius `a0`.
    pub fn distance_to_constant(&self, a0: f64) -> f64 {
        self.a.iter().map(|r| (r - a0).abs()).fold(0.0, f64::max)
    }

    pub fn is_constant(&self, tol: f64) -> bool {
        self.max_radius() - self.min_radius() <= tol
    }
}

/// Lateral surface area `2 pi int a sqrt(1+a'^2)`, cell-exact.
pub fn surface_area(a: &TaperProfile) -> f64 {
    2.0 * PI * a.lateral_integral()
}

/// Outcome of an admissibility test, with the numbers behind it.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Admissibility {
    pub floor_ok: bool,
    pub surface_ok: bool,
    pub min_radius: f64,
    pub lateral_integral: f64,
}

impl Admissibility {
    pub fn admissible(&self) -> bool {
        self.floor_ok && self.surface_ok
    }
}

/// Checks the shape constraint class of radius floor `a0` and surface bound
/// `s` (the un-`2 pi`-scaled lateral integral).
pub fn is_admissible(a: &TaperProfile, a0: f64, s: f64) -> Result<Admissibility> {
    check_class(a.ell(), a0, s)?;
    let lateral = a.lateral_integral();
    let min_radius = a.min_radius();
    Ok(Admissibility {
        floor_ok: min_radius >= a0,
        surface_ok: lateral <= s * (1.0 + 1e-14),
        min_radius,
        lateral_integral: lateral,
    })
}

/// Rejects `S <= a0 * ell`, for which the class is empty or a single point.
pub fn check_class(ell: f64, a0: f64, s: f64) -> Result<()> {
    if !(a0.is_finite() && a0 > 0.0 && ell.is_finite() && ell > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "need a0 > 0 and ell > 0, got a0 = {a0}, ell = {ell}"
        )));
    }
    if !(s > a0 * ell) {
        return Err(Error::EmptyClass { s, floor: a0 * ell });
    }
    Ok(())
}

/// `<f, g>_a = A f(0) g(0) + int_0^ell a sqrt(1+a'^2) f g dx`.
///
/// `f` and `g` share one grid spanning `[0, ell]`; both are read as
/// piecewise-linear interpolants. The integral is computed by Simpson's rule
/// on the merged breakpoints of the function grid and the taper grid, which
/// is exact for this piecewise-cubic integrand.
pub fn inner_product_a(
    f: &GridFunction,
    g: &GridFunction,
    a: &TaperProfile,
    soma_weight: f64,
) -> Result<f64> {
    if !f.same_grid(g) {
        return Err(Error::GridMismatch("f and g live on different grids".into()));
    }
    let nodes = f.nodes();
    let ell = a.ell();
    let span_tol = 1e-12 * ell;
    if nodes[0].abs() > span_tol || (nodes[nodes.len() - 1] - ell).abs() > span_tol {
        return Err(Error::GridMismatch(format!(
            "grid spans [{}, {}] but the profile spans [0, {ell}]",
            nodes[0],
            nodes[nodes.len() - 1]
        )));
    }
    let mut total = soma_weight * f.first() * g.first();
    for j in 0..nodes.len() - 1 {
        let pts = breakpoints(nodes[j], nodes[j + 1], a.nodes());
        for w in pts.windows(2) {
            let cell = locate(a.nodes(), 0.5 * (w[0] + w[1]));
            let stretch = (1.0 + a.slope(cell).powi(2)).sqrt();
            total += simpson(w[0], w[1], |x| {
                a.radius_at_cell(cell, x) * stretch * f.eval(x) * g.eval(x)
            });
        }
    }
    Ok(total)
}

impl TaperProfile {
    pub(crate) fn radius_at_cell(&self, cell: usize, x: f64) -> f64 {
        self.a[cell] + self.slope(cell) * (x - self.x[cell])
    }
}

/// Reduced coordinate `y(x) = int_0^x dt / a(t)^2`, stored by its values at
/// the taper nodes and evaluated cell-exactly in between.
#[derive(Debug, Clone, PartialEq)]
pub struct ReducedCoordinate {
    profile: TaperProfile,
    y_nodes: Vec<f64>,
}

impl ReducedCoordinate {
    pub fn new(profile: &TaperProfile) -> Self {
        let mut y_nodes = Vec::with_capacity(profile.x.len());
        y_nodes.push(0.0);
        for i in 0..profile.cells() {
            let dx = profile.x[i + 1] - profile.x[i];
            let prev = y_nodes[i];
            y_nodes.push(prev + dx / (profile.a[i] * profile.a[i + 1]));
        }
        Self {
            profile: profile.clone(),
            y_nodes,
        }
    }

    /// `ell_1 = int_0^ell dt / a^2`.
    pub fn ell1(&self) -> f64 {
        self.y_nodes[self.y_nodes.len() - 1]
    }

    pub fn y_nodes(&self) -> &[f64] {
        &self.y_nodes
    }

    /// On a linear cell `a = a_i + s (x - x_i)` the antiderivative of `1/a^2`
    /// is `dx / (a_i a(x))`, valid for every slope including zero.
    pub fn y_of_x(&self, x: f64) -> f64 {
        let i = locate(&self.profile.x, x);
        let dx = x - self.profile.x[i];
        self.y_nodes[i] + dx / (self.profile.a[i] * self.profile.radius_at_cell(i, x))
    }

    /// Inverse map: `dx = dy a_i^2 / (1 - dy a_i s)` on the cell holding `y`.
    pub fn x_of_y(&self, y: f64) -> f64 {
        let i = locate(&self.y_nodes, y);
        let dy = y - self.y_nodes[i];
        let ai = self.profile.a[i];
        let s = self.profile.slope(i);
        self.profile.x[i] + dy * ai * ai / (1.0 - dy * ai * s)
    }

    /// Pointwise reduced weight `rho(y) = a^3 sqrt(1 + a'^2)` at `x(y)`.
    pub fn rho_at(&self, y: f64) -> f64 {
        let x = self.x_of_y(y);
        let i = locate(&self.y_nodes, y);
        let r = self.profile.radius_at_cell(i, x);
        r.powi(3) * (1.0 + self.profile.slope(i).powi(2)).sqrt()
    }

    /// Cell averages of `rho` on a uniform `y` grid. Since `dy = dx / a^2`,
    /// the integral of `rho` over `[y_j, y_{j+1}]` equals the lateral
    /// integral over the matching `x` interval, so averages are exact and
    /// the total `int rho dy` reproduces the lateral integral.
    pub fn rho_profile(&self, cells: usize) -> Result<RhoProfile> {
        if cells == 0 {
            return Err(Error::InvalidArgument("need at least one y cell".into()));
        }
        let ell1 = self.ell1();
        let nodes = grid::uniform_nodes(ell1, cells);
        let xs: Vec<f64> = nodes
            .iter()
            .enumerate()
            .map(|(j, &y)| if j == cells { self.profile.ell() } else { self.x_of_y(y) })
            .collect();
        let values = (0..cells)
            .map(|j| self.profile.lateral_on(xs[j], xs[j + 1]) / (nodes[j + 1] - nodes[j]))
            .collect();
        RhoProfile::new(nodes, values)
    }
}

/// Result of [`change_of_variable`].
#[derive(Debug, Clone)]
pub struct ChangeOfVariable {
    pub ell1: f64,
    pub coordinate: ReducedCoordinate,
    pub rho: RhoProfile,
}

/// Maps a taper profile to the reduced coordinate and its conductance
/// weight `rho`, resampled as cell averages on `y_cells` uniform cells.
pub fn change_of_variable(a: &TaperProfile, y_cells: usize) -> Result<ChangeOfVariable> {
    let coordinate = ReducedCoordinate::new(a);
    let rho = coordinate.rho_profile(y_cells)?;
    Ok(ChangeOfVariable {
        ell1: coordinate.ell1(),
        coordinate,
        rho,
    })
}

/// Reduced weight `rho(y)` on `[0, ell1]`, constant on each cell.
#[derive(Debug, Clone, PartialEq)]
pub struct RhoProfile {
    nodes: Vec<f64>,
    values: Vec<f64>,
}

impl RhoProfile {
    pub fn new(nodes: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        check_nodes(&nodes).map_err(|e| Error::InvalidProfile(e.to_string()))?;
        if nodes[0] != 0.0 {
            return Err(Error::InvalidProfile("reduced grid must start at y = 0".into()));
        }
        if values.len() + 1 != nodes.len() {
            return Err(Error::InvalidProfile(format!(
                "{} cells but {} values",
                nodes.len() - 1,
                values.len()
            )));
        }
        if let Some(v) = values.iter().find(|v| !(v.is_finite() && **v > 0.0)) {
            return Err(Error::InvalidProfile(format!("rho must be positive, got {v}")));
        }
        Ok(Self { nodes, values })
    }

    pub fn constant(ell1: f64, cells: usize, level: f64) -> Result<Self> {
        Self::uniform(ell1, vec![level; cells.max(1)])
    }

    pub fn uniform(ell1: f64, values: Vec<f64>) -> Result<Self> {
        Self::new(grid::uniform_nodes(ell1, values.len().max(1)), values)
    }

    /// Cell averages of a smooth `f` (5-point Gauss-Legendre per cell).
    pub fn from_fn(ell1: f64, cells: usize, f: impl Fn(f64) -> f64) -> Result<Self> {
        const GL: [(f64, f64); 5] = [
            (0.0, 0.568_888_888_888_888_9),
            (-0.538_469_310_105_683_1, 0.478_628_670_499_366_5),
            (0.538_469_310_105_683_1, 0.478_628_670_499_366_5),
            (-0.906_179_845_938_664, 0.236_926_885_056_189_1),
            (0.906_179_845_938_664, 0.236_926_885_056_189_1),
        ];
        let nodes = grid::uniform_nodes(ell1, cells.max(1));
        let values = nodes
            .windows(2)
            .map(|w| {
                let (c, r) = (0.5 * (w[0] + w[1]), 0.5 * (w[1] - w[0]));
                0.5 * GL.iter().map(|(t, wt)| wt * f(c + r * t)).sum::<f64>()
            })
            .collect();
        Self::new(nodes, values)
    }

    /// Two-level profile: `high` on `[0, xi1)`, `low` on `(xi1, ell1]`.
    /// The grid places a node exactly at `xi1`, splitting the cells in
    /// proportion to the two lengths.
    pub fn two_level(ell1: f64, xi1: f64, high: f64, low: f64, cells: usize) -> Result<Self> {
        if !(0.0..=ell1).contains(&xi1) {
            return Err(Error::InvalidArgument(format!("xi1 = {xi1} outside [0, {ell1}]")));
        }
        let cells = cells.max(2);
        let mut left = ((xi1 / ell1) * cells as f64).round() as usize;
        if xi1 > 0.0 {
            left = left.max(1);
        }
        if xi1 < ell1 {
            left = left.min(cells - 1);
        }
        let right = cells - left;
        let mut nodes = Vec::with_capacity(cells + 1);
        for i in 0..left {
            nodes.push(xi1 * i as f64 / left as f64);
        }
        for i in 0..=right {
            nodes.push(if i == right {
                ell1
            } else {
                xi1 + (ell1 - xi1) * i as f64 / right as f64
            });
        }
        let mut values = vec![high; left];
        values.extend(std::iter::repeat_n(low, right));
        Self::new(nodes, values)
    }

    pub fn ell1(&self) -> f64 {
        self.nodes[self.nodes.len() - 1]
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn cells(&self) -> usize {
        self.values.len()
    }

    pub fn cell_width(&self, j: usize) -> f64 {
        self.nodes[j + 1] - self.nodes[j]
    }

    pub fn with_values(&self, values: Vec<f64>) -> Result<Self> {
        Self::new(self.nodes.clone(), values)
    }

    pub fn integral(&self) -> f64 {
        self.values
            .iter()
            .enumerate()
            .map(|(j, v)| v * self.cell_width(j))
            .sum()
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    /// Membership in the reduced class: `rho >= a0^3`, `int rho <= s`, and
    /// `rho <= upper` when an upper level is given.
    pub fn is_admissible(&self, a0: f64, s: f64, upper: Option<f64>) -> bool {
        let floor = a0.powi(3);
        self.min() >= floor * (1.0 - 1e-14)
            && self.integral() <= s * (1.0 + 1e-14)
            && upper.is_none_or(|m| self.max() <= m * (1.0 + 1e-14))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn params() -> PhysicalParams {
        PhysicalParams::new(1.0, 1.0, 1.0, 0.5, 2.0 * PI).unwrap()
    }

    #[test]
    fn derived_constants() {
        let p = params();
        assert_relative_eq!(p.gamma(), 1.0);
        assert_relative_eq!(p.soma_weight(), 1.0);
        assert!(PhysicalParams::new(1.0, 1.0, 0.5, 1.0, 1.0).is_err());
        assert!(PhysicalParams::new(0.0, 1.0, 1.0, 1.0, 1.0).is_err());
    }

    #[test]
    fn surface_of_cylinder_and_cone() {
        let a0 = 0.7;
        let cyl = TaperProfile::constant(2.0, a0).unwrap();
        assert_relative_eq!(surface_area(&cyl), 2.0 * PI * a0 * 2.0, max_relative = 1e-15);
        let cone = TaperProfile::new(vec![0.0, 1.0], vec![a0, 2.0 * a0]).unwrap();
        let expected = 2.0 * PI * a0 * 1.5 * (1.0 + a0 * a0).sqrt();
        assert_relative_eq!(surface_area(&cone), expected, max_relative = 1e-15);
    }

    #[test]
    fn admissibility_cases() {
        let (a0, ell) = (1.0, 1.0);
        let cyl = TaperProfile::constant(ell, a0).unwrap();
        assert!(is_admissible(&cyl, a0, 2.0 * a0 * ell).unwrap().admissible());
        let thin = TaperProfile::constant(ell, a0 / 2.0).unwrap();
        let r = is_admissible(&thin, a0, 2.0).unwrap();
        assert!(!r.floor_ok && !r.admissible());
        let saw = TaperProfile::from_fn(ell, 40, |x| {
            a0 + if (x * 40.0).round() as i64 % 2 == 0 { 0.0 } else { 0.2 }
        })
        .unwrap();
        let r = is_admissible(&saw, a0, 2.0).unwrap();
        assert!(r.lateral_integral > 2.0);
        assert!(r.floor_ok && !r.surface_ok);
        assert!(matches!(is_admissible(&cyl, a0, 1.0), Err(Error::EmptyClass { .. })));
    }

    #[test]
    fn inner_product_trivial_cases() {
        let (a0, ell) = (1.3, 0.8);
        let cyl = TaperProfile::constant(ell, a0).unwrap();
        let nodes = grid::uniform_nodes(ell, 16);
        let one = GridFunction::sample(&nodes, |_| 1.0).unwrap();
        let zero = GridFunction::sample(&nodes, |_| 0.0).unwrap();
        let a = 0.9;
        assert_relative_eq!(
            inner_product_a(&one, &one, &cyl, a).unwrap(),
            a + a0 * ell,
            max_relative = 1e-14
        );
        assert_eq!(inner_product_a(&one, &zero, &cyl, a).unwrap(), 0.0);
        let other = GridFunction::sample(&grid::uniform_nodes(ell, 8), |_| 1.0).unwrap();
        assert!(inner_product_a(&one, &other, &cyl, a).is_err());
        let short = GridFunction::sample(&grid::uniform_nodes(0.5, 8), |_| 1.0).unwrap();
        assert!(inner_product_a(&short, &short, &cyl, a).is_err());
    }

    #[test]
    fn cylinder_reduces_to_constant_rho() {
        let c = 1.7;
        let cov = change_of_variable(&TaperProfile::constant(2.0, c).unwrap(), 64).unwrap();
        assert_relative_eq!(cov.ell1, 2.0 / (c * c), max_relative = 1e-15);
        for v in cov.rho.values() {
            assert_relative_eq!(*v, c.powi(3), max_relative = 1e-13);
        }
    }

    #[test]
    fn two_segment_rho_lies_between_node_levels() {
        let a = TaperProfile::new(vec![0.0, 0.4, 1.0], vec![1.0, 1.3, 1.1]).unwrap();
        let cov = change_of_variable(&a, 400).unwrap();
        let coord = &cov.coordinate;
        let y1 = coord.y_nodes()[1];
        for (j, v) in cov.rho.values().iter().enumerate() {
            let (lo, hi) = (cov.rho.nodes()[j], cov.rho.nodes()[j + 1]);
            let cell = if hi <= y1 { 0 } else if lo >= y1 { 1 } else { continue };
            let s: f64 = a.slope(cell);
            let stretch = (1.0 + s * s).sqrt();
            let (ra, rb) = (a.radii()[cell], a.radii()[cell + 1]);
            let (mn, mx) = (ra.min(rb).powi(3) * stretch, ra.max(rb).powi(3) * stretch);
            assert!(*v >= mn * (1.0 - 1e-12) && *v <= mx * (1.0 + 1e-12));
        }
        assert_relative_eq!(cov.rho.integral(), a.lateral_integral(), max_relative = 1e-12);
    }

    #[test]
    fn two_level_grid_has_node_at_transition() {
        let r = RhoProfile::two_level(1.0, 0.3137, 4.0, 1.0, 100).unwrap();
        assert!(r.nodes().contains(&0.3137));
        assert_relative_eq!(r.integral(), 4.0 * 0.3137 + 0.6863, max_relative = 1e-13);
        let r0 = RhoProfile::two_level(1.0, 0.0, 4.0, 1.0, 10).unwrap();
        assert_eq!(r0.max(), 1.0);
        let r1 = RhoProfile::two_level(1.0, 1.0, 4.0, 1.0, 10).unwrap();
        assert_eq!(r1.min(), 4.0);
    }
}
