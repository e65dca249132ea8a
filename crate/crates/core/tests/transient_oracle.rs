//! Modal expansion against a brute-force time stepper on a cylinder.
//!
//! The oracle is a vertex-centred finite-volume discretization of the cable
//! equation with the soma as a lumped capacitance at `x = 0`, advanced with
//! BDF2 from an impulse of unit charge on the soma.

use std::f64::consts::PI;

use dendrite_taper::model::{PhysicalParams, TaperProfile};
use dendrite_taper::transient::{ModalSolution, Stimulus};

struct Stepper {
    cap: Vec<f64>,
    // Conductance matrix rows: (lower, diag, upper).
    lower: Vec<f64>,
    diag: Vec<f64>,
    upper: Vec<f64>,
}

impl Stepper {
    fn new(p: &PhysicalParams, a: f64, ell: f64, n: usize) -> Self {
        let h = ell / n as f64;
        let axial = PI * a * a / (p.r_a * h);
        let mut cap = vec![2.0 * PI * a * h * p.c_m; n + 1];
        let mut diag = vec![2.0 * PI * a * h * p.g_m + 2.0 * axial; n + 1];
        cap[0] = PI * a * h * p.c_m + p.a_s * p.c_m;
        cap[n] = PI * a * h * p.c_m;
        diag[0] = PI * a * h * p.g_m + p.a_s * p.g_s + axial;
        diag[n] = PI * a * h * p.g_m + axial;
        Self {
            cap,
            lower: vec![-axial; n + 1],
            diag,
            upper: vec![-axial; n + 1],
        }
    }

    /// Solves `(alpha C + dt G) x = rhs` with the Thomas algorithm.
    fn solve(&self, alpha: f64, dt: f64, rhs: &[f64]) -> Vec<f64> {
        let n = rhs.len();
        let mut c = vec![0.0; n];
        let mut d = vec![0.0; n];
        for i in 0..n {
            let b = alpha * self.cap[i] + dt * self.diag[i];
            let l = if i > 0 { dt * self.lower[i] } else { 0.0 };
            let denom = b - l * if i > 0 { c[i - 1] } else { 0.0 };
            c[i] = if i + 1 < n { dt * self.upper[i] / denom } else { 0.0 };
            d[i] = (rhs[i] - l * if i > 0 { d[i - 1] } else { 0.0 }) / denom;
        }
        for i in (0..n - 1).rev() {
            d[i] -= c[i] * d[i + 1];
        }
        d
    }

    /// `(v0, vell)` sampled every `every` steps after `t_start`.
    fn run(&self, dt: f64, t_end: f64, t_start: f64, every: usize) -> Vec<(f64, f64, f64)> {
        let n = self.cap.len();
        let mut v = vec![0.0; n];
        v[0] = 1.0 / self.cap[0];
        // Backward Euler on a fine sub-grid damps the impulse before BDF2 starts.
        let sub = 20;
        let dts = dt / sub as f64;
        for _ in 0..sub {
            let rhs: Vec<f64> = v.iter().zip(&self.cap).map(|(x, c)| c * x).collect();
            v = self.solve(1.0, dts, &rhs);
        }
        let mut prev = {
            // One extra BE state one step earlier is not available, so take
            // the first BDF2 step from a BE step.
            let rhs: Vec<f64> = v.iter().zip(&self.cap).map(|(x, c)| c * x).collect();
            let next = self.solve(1.0, dt, &rhs);
            std::mem::replace(&mut v, next)
        };
        let mut t = 2.0 * dt;
        let mut out = Vec::new();
        let mut k = 0usize;
        while t <= t_end + 0.5 * dt {
            let rhs: Vec<f64> = (0..n)
                .map(|i| self.cap[i] * (2.0 * v[i] - 0.5 * prev[i]))
                .collect();
            let next = self.solve(1.5, dt, &rhs);
            prev = std::mem::replace(&mut v, next);
            t += dt;
            k += 1;
            if t >= t_start && k.is_multiple_of(every) {
                out.push((t, v[0], v[n - 1]));
            }
        }
        out
    }
}

fn compare(g_s: f64) {
    let p = PhysicalParams::new(1.0, 1.0, 1.0, g_s, 2.0 * PI).unwrap();
    let a = TaperProfile::constant(1.0, 1.0).unwrap();
    let sol = ModalSolution::from_profile(&a, &p, 2048, 64, Stimulus::Dirac).unwrap();
    let lambda1 = sol.lambdas()[0];
    let t_start = 0.1 / lambda1;
    let samples = Stepper::new(&p, 1.0, 1.0, 800).run(2e-5, 4.0 / lambda1, t_start, 500);
    assert!(samples.len() > 20);
    let mut worst: f64 = 0.0;
    for (t, v0, vl) in samples {
        let m0 = sol.evaluate_v(0.0, t).unwrap();
        let ml = sol.evaluate_v(1.0, t).unwrap();
        worst = worst.max((m0 - v0).abs() / v0.abs()).max((ml - vl).abs() / vl.abs());
    }
    assert!(worst <= 1e-3, "G_s = {g_s}: worst relative error {worst:e}");
}

#[test]
fn matches_time_stepper_without_soma_leak() {
    compare(1.0);
}

#[test]
fn matches_time_stepper_with_leaky_soma() {
    compare(0.5);
}

#[test]
fn mode_truncation_converges() {
    let p = PhysicalParams::new(1.0, 1.0, 1.0, 0.5, 2.0 * PI).unwrap();
    let a = TaperProfile::from_fn(1.0, 16, |x| 1.0 + 0.3 * (PI * x).sin().powi(2)).unwrap();
    let full = ModalSolution::from_profile(&a, &p, 1024, 128, Stimulus::Dirac).unwrap();
    let t = |n: usize| full.truncated(n).transfer().unwrap();
    let gaps: Vec<f64> = [4, 8, 16, 32, 64].iter().map(|&n| (t(n) - t(2 * n)).abs() / t(2 * n)).collect();
    assert!(gaps.windows(2).all(|w| w[1] < w[0]), "{gaps:?}");

    let one = full.truncated(1);
    let phi = &one.pairs()[0].phi;
    let ratio = one.transfer().unwrap();
    assert!((ratio - phi.first() / phi.last()).abs() <= 1e-12 * ratio);
}

#[test]
fn time_integrals_are_positive() {
    let p = PhysicalParams::new(1.0, 1.0, 1.0, 0.5, 2.0 * PI).unwrap();
    for k in 0..5 {
        let a = TaperProfile::from_fn(1.0, 8, |x| 1.0 + 0.1 * k as f64 * (1.0 + (5.0 * x + k as f64).sin())).unwrap();
        let sol = ModalSolution::from_profile(&a, &p, 512, 64, Stimulus::Dirac).unwrap();
        assert!(sol.time_integral(0.0).unwrap() > 0.0);
        assert!(sol.time_integral(1.0).unwrap() > 0.0);
    }
}
