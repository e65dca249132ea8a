//! Time-domain potential by eigenfunction expansion.
//!
//! With the eigenpairs of the soma-coupled problem, the potential along the
//! fiber is
//!
//! ```text
//! v(x, t) = 1/(2 pi C_m) sum_n phi_n(0) phi_n(x) (i0 * exp(-lambda_n .))(t)
//! lambda_n = (mu_n + 2 R_a G_m) / (2 R_a C_m)
//! ```
//!
//! For a Dirac stimulus the convolution is just `exp(-lambda_n t)` and the
//! time integral of each mode is `1/lambda_n`, which gives the transfer
//! ratio `T = sum phi_n(0)^2/lambda_n / sum phi_n(0) phi_n(ell)/lambda_n`
//! without any time stepping.

use std::f64::consts::PI;

use crate::eigen::{self, EigenPair};
use crate::error::{Error, Result};
use crate::model::{PhysicalParams, TaperProfile};

/// Default number of retained modes.
pub const DEFAULT_MODES: usize = 64;

/// Decay rate of a mode with eigenvalue `mu`.
pub fn lambda_of(mu: f64, params: &PhysicalParams) -> f64 {
    (mu + 2.0 * params.r_a * params.g_m) / (2.0 * params.r_a * params.c_m)
}

/// Injected current at the soma.
#[derive(Debug, Clone, PartialEq)]
pub enum Stimulus {
    /// Unit impulse at `t = 0`.
    Dirac,
    /// Piecewise-linear current through `(times, values)`, zero outside.
    Sampled { times: Vec<f64>, values: Vec<f64> },
}

impl Stimulus {
    pub fn sampled(times: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        if times.len() != values.len() || times.len() < 2 {
            return Err(Error::InvalidArgument("stimulus needs >= 2 matching samples".into()));
        }
        if times[0] < 0.0 || times.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::InvalidArgument(
                "stimulus times must be nonnegative and strictly increasing".into(),
            ));
        }
        Ok(Stimulus::Sampled { times, values })
    }

    /// `(i0 * exp(-lambda .))(t)`.
    fn convolve(&self, lambda: f64, t: f64) -> f64 {
        match self {
            Stimulus::Dirac => (-lambda * t).exp(),
            Stimulus::Sampled { times, values } => {
                let kernel = |s: f64, i: f64| i * (-lambda * (t - s)).exp();
                let mut acc = 0.0;
                for k in 0..times.len() - 1 {
                    let (s0, s1) = (times[k], times[k + 1]);
                    if s0 >= t {
                        break;
                    }
                    let (i0, mut i1, mut end) = (values[k], values[k + 1], s1);
                    if s1 > t {
                        i1 = i0 + (values[k + 1] - i0) * (t - s0) / (s1 - s0);
                        end = t;
                    }
                    acc += 0.5 * (end - s0) * (kernel(s0, i0) + kernel(end, i1));
                }
                acc
            }
        }
    }
}

/// Truncated modal expansion of the potential.
#[derive(Debug, Clone)]
pub struct ModalSolution {
    pairs: Vec<EigenPair>,
    lambdas: Vec<f64>,
    stimulus: Stimulus,
    c_m: f64,
    ell: f64,
}

impl ModalSolution {
    pub fn new(pairs: Vec<EigenPair>, params: &PhysicalParams, stimulus: Stimulus) -> Result<Self> {
        if pairs.is_empty() {
            return Err(Error::InvalidArgument("modal solution needs at least one mode".into()));
        }
        let lambdas: Vec<f64> = pairs.iter().map(|p| lambda_of(p.mu, params)).collect();
        if let Some((n, l)) = lambdas.iter().enumerate().find(|(_, l)| !(**l > 0.0)) {
            return Err(Error::Truncation(format!("mode {} has non-positive rate {l}", n + 1)));
        }
        if lambdas.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::Truncation("decay rates are not increasing".into()));
        }
        let ell = *pairs[0].phi.nodes().last().unwrap();
        Ok(Self {
            pairs,
            lambdas,
            stimulus,
            c_m: params.c_m,
            ell,
        })
    }

    /// Solves the eigenproblem on `x_cells` elements and keeps `n_modes`.
    pub fn from_profile(
        a: &TaperProfile,
        params: &PhysicalParams,
        x_cells: usize,
        n_modes: usize,
        stimulus: Stimulus,
    ) -> Result<Self> {
        let pairs = eigen::spectrum(a, params, x_cells, n_modes)?;
        Self::new(pairs, params, stimulus)
    }

    pub fn n_modes(&self) -> usize {
        self.pairs.len()
    }

    pub fn pairs(&self) -> &[EigenPair] {
        &self.pairs
    }

    pub fn lambdas(&self) -> &[f64] {
        &self.lambdas
    }

    pub fn ell(&self) -> f64 {
        self.ell
    }

    /// Keeps only the first `n` modes.
    pub fn truncated(&self, n: usize) -> Self {
        let n = n.clamp(1, self.pairs.len());
        Self {
            pairs: self.pairs[..n].to_vec(),
            lambdas: self.lambdas[..n].to_vec(),
            stimulus: self.stimulus.clone(),
            c_m: self.c_m,
            ell: self.ell,
        }
    }

    fn check_x(&self, x: f64) -> Result<()> {
        if !(0.0..=self.ell).contains(&x) {
            return Err(Error::InvalidArgument(format!("x = {x} outside [0, {}]", self.ell)));
        }
        Ok(())
    }

    /// `v(x, t)`, summed in ascending mode order.
    pub fn evaluate_v(&self, x: f64, t: f64) -> Result<f64> {
        if !(t > 0.0 && t.is_finite()) {
            return Err(Error::InvalidArgument(format!("time must be positive, got {t}")));
        }
        self.check_x(x)?;
        let sum: f64 = self
            .pairs
            .iter()
            .zip(&self.lambdas)
            .map(|(p, &l)| p.phi.first() * p.phi.eval(x) * self.stimulus.convolve(l, t))
            .sum();
        Ok(sum / (2.0 * PI * self.c_m))
    }

    /// `int_0^inf v(x, t) dt` for the Dirac stimulus.
    pub fn time_integral(&self, x: f64) -> Result<f64> {
        self.check_x(x)?;
        let sum: f64 = self
            .pairs
            .iter()
            .zip(&self.lambdas)
            .map(|(p, &l)| p.phi.first() * p.phi.eval(x) / l)
            .sum();
        Ok(sum / (2.0 * PI * self.c_m))
    }

    /// Size of the last retained term, `|phi_N(0) phi_N(x)| / lambda_N`.
    pub fn tail_estimate(&self, x: f64) -> f64 {
        let p = self.pairs.last().unwrap();
        (p.phi.first() * p.phi.eval(x)).abs() / self.lambdas.last().unwrap()
    }

    /// Transfer ratio `int v(0,t) dt / int v(ell,t) dt` of this expansion.
    pub fn transfer(&self) -> Result<f64> {
        let num = self.time_integral(0.0)?;
        let den = self.time_integral(self.ell)?;
        if !(den > 0.0) {
            return Err(Error::Truncation(format!(
                "time integral at the sealed end is {den:e} with {} modes",
                self.n_modes()
            )));
        }
        Ok(num / den)
    }

    /// Rows `(t, v(0,t), v(ell,t))`.
    pub fn time_series(&self, times: &[f64]) -> Result<Vec<[f64; 3]>> {
        times
            .iter()
            .map(|&t| Ok([t, self.evaluate_v(0.0, t)?, self.evaluate_v(self.ell, t)?]))
            .collect()
    }
}

/// Transfer ratio of a profile from the modal expansion with a Dirac
/// stimulus.
pub fn transfer_time_domain(a: &TaperProfile, params: &PhysicalParams, n_modes: usize, x_cells: usize) -> Result<f64> {
    ModalSolution::from_profile(a, params, x_cells, n_modes, Stimulus::Dirac)?.transfer()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn params() -> PhysicalParams {
        PhysicalParams::new(1.0, 1.0, 1.0, 0.5, 2.0 * PI).unwrap()
    }

    #[test]
    fn rate_formula() {
        let p = PhysicalParams::new(0.7, 1.3, 0.9, 0.4, 3.0).unwrap();
        assert_relative_eq!(lambda_of(0.0, &p), p.g_m / p.c_m, max_relative = 1e-15);
        assert_relative_eq!(lambda_of(-p.gamma(), &p), p.g_s / p.c_m, max_relative = 1e-14);
    }

    #[test]
    fn single_mode_is_one_term() {
        let p = params();
        let a = TaperProfile::from_fn(1.0, 16, |x| 1.0 + 0.3 * x).unwrap();
        let sol = ModalSolution::from_profile(&a, &p, 256, 1, Stimulus::Dirac).unwrap();
        let pair = &sol.pairs()[0];
        let (x, t) = (0.4, 0.7);
        let expected = pair.phi.first() * pair.phi.eval(x) * (-sol.lambdas()[0] * t).exp() / (2.0 * PI * p.c_m);
        assert_relative_eq!(sol.evaluate_v(x, t).unwrap(), expected, max_relative = 1e-15);
        assert_relative_eq!(sol.transfer().unwrap(), pair.phi.first() / pair.phi.last(), max_relative = 1e-14);
    }

    #[test]
    fn rejects_bad_arguments() {
        let p = params();
        let a = TaperProfile::constant(1.0, 1.0).unwrap();
        let sol = ModalSolution::from_profile(&a, &p, 64, 4, Stimulus::Dirac).unwrap();
        assert!(sol.evaluate_v(0.5, 0.0).is_err());
        assert!(sol.evaluate_v(1.5, 1.0).is_err());
        assert!(Stimulus::sampled(vec![0.0, 0.0], vec![1.0, 1.0]).is_err());
    }

    #[test]
    fn rates_are_positive_and_increasing() {
        let p = params();
        let a = TaperProfile::from_fn(1.0, 20, |x| 1.0 + 0.4 * (3.0 * x).sin().abs()).unwrap();
        let sol = ModalSolution::from_profile(&a, &p, 512, 32, Stimulus::Dirac).unwrap();
        assert!(sol.lambdas()[0] > p.g_s / p.c_m);
        assert!(sol.lambdas().windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn late_time_decay_follows_first_rate() {
        let p = params();
        let a = TaperProfile::from_fn(1.0, 8, |x| 1.0 + 0.2 * x).unwrap();
        let sol = ModalSolution::from_profile(&a, &p, 256, 16, Stimulus::Dirac).unwrap();
        let (t1, t2) = (8.0, 9.0);
        for x in [0.0, 1.0] {
            let slope = (sol.evaluate_v(x, t2).unwrap() / sol.evaluate_v(x, t1).unwrap()).ln() / (t2 - t1);
            assert_relative_eq!(slope, -sol.lambdas()[0], max_relative = 1e-6);
        }
    }

    #[test]
    fn short_pulse_approaches_impulse() {
        // A unit-area pulse of width w behaves like the impulse at t >> w.
        let p = params();
        let a = TaperProfile::constant(1.0, 1.0).unwrap();
        let dirac = ModalSolution::from_profile(&a, &p, 128, 16, Stimulus::Dirac).unwrap();
        let w = 1e-4;
        let pulse = Stimulus::sampled(vec![0.0, w / 2.0, w], vec![0.0, 2.0 / w, 0.0]).unwrap();
        let sol = ModalSolution::new(dirac.pairs().to_vec(), &p, pulse).unwrap();
        for x in [0.0, 0.5, 1.0] {
            let (a, b) = (sol.evaluate_v(x, 0.5).unwrap(), dirac.evaluate_v(x, 0.5).unwrap());
            assert_relative_eq!(a, b, max_relative = 1e-3);
        }
    }

    #[test]
    fn constant_current_reaches_steady_integral() {
        // Step current of unit amplitude: v(x, t) -> time integral of the
        // impulse response.
        let p = params();
        let a = TaperProfile::constant(1.0, 1.0).unwrap();
        let base = ModalSolution::from_profile(&a, &p, 256, 32, Stimulus::Dirac).unwrap();
        let times: Vec<f64> = (0..=4000).map(|k| k as f64 * 0.01).collect();
        let step = Stimulus::sampled(times.clone(), vec![1.0; times.len()]).unwrap();
        let sol = ModalSolution::new(base.pairs().to_vec(), &p, step).unwrap();
        let v = sol.evaluate_v(1.0, 40.0).unwrap();
        assert_relative_eq!(v, base.time_integral(1.0).unwrap(), max_relative = 1e-3);
    }
}
