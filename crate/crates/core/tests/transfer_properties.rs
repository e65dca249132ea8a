mod common;

use common::{desk, rng};
use dendrite_taper::grid::GridFunction;
use dendrite_taper::model::RhoProfile;
use dendrite_taper::optimize::{random_rho, Geometry};
use dendrite_taper::transfer::{
    bang_bang_dt1, bang_bang_numeric, bang_bang_t1, h1_norm, laplace_derivative, laplace_energy, solve_adjoints, solve_w0, solve_wp,
    transfer_t1, BangBangProfile, SteadyState,
};
use rand::Rng;

const FINE: usize = 16384;

fn diff(a: &GridFunction, b: &GridFunction) -> GridFunction {
    let v = a.values().iter().zip(b.values()).map(|(x, y)| x - y).collect();
    GridFunction::new(a.nodes().to_vec(), v).unwrap()
}

fn smooth_rho(r: &mut impl Rng, ell1: f64, cells: usize) -> RhoProfile {
    let (c1, c2, k) = (r.gen_range(0.0..2.0), r.gen_range(0.0..1.0), r.gen_range(1.0..6.0));
    RhoProfile::from_fn(ell1, cells, |y| 1.0 + c1 * (k * y).sin().powi(2) + c2 * y).unwrap()
}

#[test]
fn constant_weight_hand_solutions() {
    for (g_s, level, ell1) in [(1.0, 1.0, 1.0), (0.5, 2.5, 0.8), (0.3, 1.0, 1.7)] {
        let p = desk(g_s);
        let om = p.omega(level);
        let rho = RhoProfile::constant(ell1, FINE, level).unwrap();

        // w0 = alpha (cosh(om y) - tanh(om ell1) sinh(om y)); alpha from the soma condition.
        let alpha = 1.0
            / (2.0 * std::f64::consts::PI)
            / (p.soma_weight() * p.g_s + om * (om * ell1).tanh() / (2.0 * p.r_a));
        let w = solve_w0(&rho, &p).unwrap();
        for (y, v) in w.nodes().iter().zip(w.values()).step_by(257) {
            let exact = alpha * ((om * y).cosh() - (om * ell1).tanh() * (om * y).sinh());
            assert!((v - exact).abs() <= 1e-8 * exact, "w0({y}): {v} vs {exact}");
        }
        let t1 = transfer_t1(&rho, &p).unwrap();
        assert!((t1 - (om * ell1).cosh()).abs() <= 1e-8 * t1);

        // q2 - 1 = beta cosh(om (ell1 - y)), q2'(0) = A~ q2(0).
        let at = 2.0 * p.soma_weight() * p.g_s * p.r_a;
        let beta = -at / (om * (om * ell1).sinh() + at * (om * ell1).cosh());
        let (_, q2) = solve_adjoints(&rho, &p).unwrap();
        for (y, v) in q2.nodes().iter().zip(q2.values()).step_by(257) {
            let exact = beta * (om * (ell1 - y)).cosh();
            assert!((v - 1.0 - exact).abs() <= 1e-8 * exact.abs(), "q2({y}): {} vs {exact}", v - 1.0);
        }
        assert!(q2.last() < 1.0);
    }
}

#[test]
fn upper_level_everywhere() {
    let p = desk(1.0);
    let rho = RhoProfile::constant(1.0, 2048, 4.0).unwrap();
    let t1 = transfer_t1(&rho, &p).unwrap();
    assert!((t1 - (p.omega(4.0)).cosh()).abs() <= 1e-6 * t1);
}

#[test]
fn ratio_g_is_increasing_with_known_slope() {
    let p = desk(0.5);
    let rho = smooth_rho(&mut rng(1), 1.0, 2048);
    let (q1, q2) = solve_adjoints(&rho, &p).unwrap();
    let y = q1.nodes();
    let g: Vec<f64> = (0..y.len()).map(|i| (q1.values()[i] - y[i]) / (q2.values()[i] - 1.0)).collect();
    assert!(g.windows(2).all(|w| w[1] > w[0]));
    let end = q2.last() - 1.0;
    for i in (1..y.len() - 1).step_by(64) {
        let fd = (g[i + 1] - g[i - 1]) / (y[i + 1] - y[i - 1]);
        let exact = -end / (q2.values()[i] - 1.0).powi(2);
        assert!(exact > 0.0);
        assert!((fd - exact).abs() <= 1e-4 * exact, "y = {}: {fd} vs {exact}", y[i]);
    }
}

#[test]
fn random_weights_exceed_cylinder() {
    let p = desk(1.0);
    let g = Geometry { ell: 1.0, a0: 1.0, s: 2.0, m: Some(4.0) };
    let floor = (p.omega(1.0) * g.ell1()).cosh();
    let mut r = rng(2);
    for _ in 0..20 {
        let rho = random_rho(&mut r, &g, 4.0, 512).unwrap();
        assert!(rho.is_admissible(1.0, 2.0, Some(4.0)));
        assert!(transfer_t1(&rho, &p).unwrap() > floor);
    }
}

#[test]
fn adjoint_gradient_matches_step_halving() {
    let p = desk(0.5);
    let mut r = rng(4);
    for _ in 0..10 {
        let rho = smooth_rho(&mut r, 1.0, 512);
        let h: Vec<f64> = (0..rho.cells()).map(|_| r.gen_range(-1.0..1.0)).collect();
        let st = SteadyState::compute(&rho, &p).unwrap();
        let exact = st.directional(&h).unwrap();
        let t = |e: f64| {
            let v = rho.values().iter().zip(&h).map(|(a, b)| a + e * b).collect();
            transfer_t1(&rho.with_values(v).unwrap(), &p).unwrap()
        };
        let mut eps = 1e-2;
        let mut prev = (t(eps) - t(-eps)) / (2.0 * eps);
        for _ in 0..12 {
            eps *= 0.5;
            let fd = (t(eps) - t(-eps)) / (2.0 * eps);
            let settled = (fd - prev).abs() <= 1e-7 * fd.abs();
            prev = fd;
            if settled {
                break;
            }
        }
        assert!((prev - exact).abs() <= 1e-4 * exact.abs(), "{prev} vs {exact}");
    }
}

#[test]
fn laplace_family_converges_and_is_coercive() {
    let p = desk(0.5);
    let a0: f64 = 1.0;
    let rho = smooth_rho(&mut rng(6), 1.0, 2048);
    assert!(rho.min() >= a0.powi(3));
    let w0 = solve_w0(&rho, &p).unwrap();
    let floor = (1.0 / (2.0 * p.r_a)).min(a0.powi(3) * p.g_m);
    let mut errs = Vec::new();
    for k in 0..=10 {
        let s = 0.5f64.powi(k);
        let wp = solve_wp(&rho, &p, s).unwrap();
        errs.push(h1_norm(&diff(&wp, &w0)));
        let energy = laplace_energy(&rho, &p, s, &wp);
        assert!(energy >= floor * h1_norm(&wp).powi(2));
    }
    // The error is p |K_p^{-1} B w0| with K_p increasing in p, so e(p)/p
    // rises toward its limit as p decreases: first order, approached from below.
    let c0 = h1_norm(&laplace_derivative(&rho, &p).unwrap());
    assert!(errs.windows(2).all(|w| w[1] < w[0]));
    let mut last = 0.0;
    for (k, e) in errs.iter().enumerate() {
        let scaled = e / 0.5f64.powi(k as i32) / c0;
        assert!(scaled <= 1.0 && scaled > last, "{scaled}");
        last = scaled;
    }
    assert!(1.0 - last <= 2e-3);
}

#[test]
fn two_level_closed_form() {
    let p = desk(1.0);
    for m in [2.0, 4.0, 8.0] {
        let base = BangBangProfile::new(0.0, 1.0, 1.0, m, &p).unwrap();
        let mut last = bang_bang_t1(&base);
        for k in 1..=8 {
            let bb = base.with_xi1(0.125 * k as f64);
            let t = bang_bang_t1(&bb);
            assert!(t > last);
            last = t;
            let num = bang_bang_numeric(&bb, &p, 2048).unwrap();
            assert!((num - t).abs() <= 1e-6 * t);
            let e = 1e-5;
            let fd = (bang_bang_t1(&base.with_xi1(bb.xi1 + e)) - bang_bang_t1(&base.with_xi1(bb.xi1 - e))) / (2.0 * e);
            let d = bang_bang_dt1(&bb);
            assert!(d > 0.0 && (fd - d).abs() <= 1e-6 * d);
        }
    }
}
