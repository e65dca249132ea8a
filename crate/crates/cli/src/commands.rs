use std::fs::{self, File};
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use dendrite_taper::eigen;
use dendrite_taper::io::{self, fmt_f64};
use dendrite_taper::model::{change_of_variable, TaperProfile};
use dendrite_taper::optimize::{self, BestProfile, Criterion, ReportSummary, GAP_TOL};
use dendrite_taper::transfer::{self, BangBangProfile, SteadyState};
use dendrite_taper::transient::{self, ModalSolution, Stimulus};
use serde::Serialize;

use crate::config::RunConfig;
use crate::CliError;

const ROUTE_TOL: f64 = 1e-4;

/// Whether a command's built-in checks passed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Outcome {
    pub passed: bool,
}

pub struct Context {
    pub cfg: RunConfig,
    pub out: PathBuf,
}

impl Context {
    fn file(&self, name: &str) -> Result<BufWriter<File>, CliError> {
        fs::create_dir_all(&self.out).map_err(dendrite_taper::Error::from)?;
        Ok(BufWriter::new(File::create(self.out.join(name)).map_err(dendrite_taper::Error::from)?))
    }

    fn profile(&self) -> Result<TaperProfile, CliError> {
        let g = self.cfg.geometry();
        match &self.cfg.profile {
            Some(path) => {
                let a = io::read_profile_file(path)?;
                if (a.ell() - g.ell).abs() > 1e-12 * g.ell {
                    return Err(CliError::Config(format!(
                        "{}: profile length {} differs from ell = {}",
                        path.display(),
                        a.ell(),
                        g.ell
                    )));
                }
                Ok(a)
            }
            None => Ok(TaperProfile::constant(g.ell, g.a0)?),
        }
    }

    fn sub(&self, name: &str) -> Context {
        Context {
            cfg: self.cfg.clone(),
            out: self.out.join(name),
        }
    }
}

fn verdict(ok: bool) -> &'static str {
    if ok {
        "PASS"
    } else {
        "FAIL"
    }
}

pub fn eigen(ctx: &Context) -> Result<Outcome, CliError> {
    let cfg = &ctx.cfg;
    let p = cfg.params();
    let a = ctx.profile()?;
    let pairs = eigen::spectrum(&a, p, cfg.x_cells, cfg.modes)?;
    io::write_spectrum(ctx.file("spectrum.csv")?, &pairs)?;
    io::write_eigenfunctions(ctx.file("eigenfunctions.csv")?, &pairs)?;

    let gamma = p.gamma();
    let mu1 = pairs[0].mu;
    println!("gamma = {}", fmt_f64(gamma));
    println!("mu1 = {}", fmt_f64(mu1));
    let mut passed = true;
    if let Some(mu2) = pairs.get(1).map(|q| q.mu) {
        println!("mu2 = {}", fmt_f64(mu2));
        if gamma > 0.0 {
            let ok = -gamma < mu1 && mu1 < 0.0 && mu2 > 0.0;
            println!("sign bounds -gamma < mu1 < 0 < mu2: {}", verdict(ok));
            passed &= ok;
        }
    }
    if gamma == 0.0 {
        let ok = mu1.abs() <= 1e-8;
        println!("mu1 vanishes for gamma = 0: {}", verdict(ok));
        passed &= ok;
    }
    if !a.is_constant(0.0) {
        let cmp = eigen::compare_mu1(&a, cfg.geometry().a0, p, cfg.x_cells)?;
        println!("mu1 of cylinder = {}", fmt_f64(cmp.mu1_cyl));
        println!("margin mu1(a) - mu1(a0) = {}", fmt_f64(cmp.margin));
        if gamma > 0.0 {
            let ok = cmp.margin > 0.0;
            println!("cylinder has the smaller mu1: {}", verdict(ok));
            passed &= ok;
        }
    }
    Ok(Outcome { passed })
}

pub fn transfer(ctx: &Context) -> Result<Outcome, CliError> {
    let cfg = &ctx.cfg;
    let p = cfg.params();
    let g = cfg.geometry();
    let a = ctx.profile()?;
    let t = transient::transfer_time_domain(&a, p, cfg.modes, cfg.x_cells)?;
    let cov = change_of_variable(&a, cfg.y_cells)?;
    let state = SteadyState::compute(&cov.rho, p)?;
    let t1 = state.t1();
    io::write_state(ctx.file("state.csv")?, &state)?;
    io::write_rho(ctx.file("rho.csv")?, &cov.rho)?;

    let cylinder = (p.omega(g.a0.powi(3)) * g.ell1()).cosh();
    let gap = (t - t1).abs() / t1;
    println!("T (time domain) = {}", fmt_f64(t));
    println!("T1 (reduced) = {}", fmt_f64(t1));
    println!("relative gap = {}", fmt_f64(gap));
    println!("cosh(omega0 ell1) = {}", fmt_f64(cylinder));
    let routes = gap <= ROUTE_TOL;
    let above = t1 >= cylinder * (1.0 - 1e-6);
    println!("routes agree within {ROUTE_TOL:e}: {}", verdict(routes));
    println!("T1 at least the cylinder value: {}", verdict(above));
    Ok(Outcome { passed: routes && above })
}

pub fn transient(ctx: &Context) -> Result<Outcome, CliError> {
    let cfg = &ctx.cfg;
    let a = ctx.profile()?;
    let sol = ModalSolution::from_profile(&a, cfg.params(), cfg.x_cells, cfg.modes, Stimulus::Dirac)?;
    let lambda1 = sol.lambdas()[0];
    let t_max = cfg.t_max.unwrap_or(5.0 / lambda1);
    let n = cfg.time_points;
    let times: Vec<f64> = (1..=n).map(|k| t_max * k as f64 / n as f64).collect();
    let series = sol.time_series(&times)?;
    io::write_time_series(ctx.file("time_series.csv")?, &series)?;
    println!("modes = {}", sol.n_modes());
    println!("lambda1 = {}", fmt_f64(lambda1));
    println!("T = {}", fmt_f64(sol.transfer()?));
    Ok(Outcome { passed: true })
}

pub fn sweep_xi(ctx: &Context) -> Result<Outcome, CliError> {
    let cfg = &ctx.cfg;
    let p = cfg.params();
    let g = cfg.geometry();
    let m = g
        .m
        .ok_or_else(|| CliError::Config("sweep-xi needs the upper level M".into()))?;
    let ell1 = g.ell1();
    let base = BangBangProfile::new(0.0, ell1, g.a0, m, p)?;
    let xi_max = transfer::max_transition(ell1, g.a0, m, g.s);
    let rows = transfer::sweep_xi(&base, p, xi_max, cfg.xi_points, cfg.y_cells)?;
    io::write_sweep(ctx.file("sweep.csv")?, &rows)?;

    let monotone = rows.windows(2).all(|w| w[1].t1_closed >= w[0].t1_closed);
    let gap = rows
        .iter()
        .map(|r| (r.t1_closed - r.t1_numeric).abs() / r.t1_closed)
        .fold(0.0, f64::max);
    println!("xi1 range = [0, {}]", fmt_f64(xi_max));
    println!("max relative gap closed vs numeric = {}", fmt_f64(gap));
    println!("T1_closed nondecreasing: {}", verdict(monotone));
    Ok(Outcome { passed: monotone })
}

#[derive(Serialize)]
struct RestartRow {
    seed: u64,
    best_value: f64,
    gap: f64,
    iterations: usize,
    converged: bool,
    distance_to_cylinder: f64,
}

#[derive(Serialize)]
struct OptimizeOutput {
    #[serde(flatten)]
    report: ReportSummary,
    seed: u64,
    restarts: Vec<RestartRow>,
}

pub fn optimize(ctx: &Context, criterion: Criterion) -> Result<Outcome, CliError> {
    let cfg = &ctx.cfg;
    let geom = cfg.geometry();
    if criterion == Criterion::Transfer && geom.m.is_none() {
        return Err(CliError::Config("the T criterion needs the upper level M".into()));
    }
    let seeds: Vec<u64> = (0..cfg.restarts as u64).map(|k| cfg.seed + k).collect();
    let reports = optimize::multistart(criterion, geom, cfg.params(), &cfg.search(), &seeds)?;
    let (best_idx, best) = reports
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.best_value.total_cmp(&b.1.best_value))
        .expect("at least one restart");

    let profile_name = match &best.best {
        BestProfile::Taper(a) => {
            io::write_profile(ctx.file("profile.csv")?, a)?;
            "profile.csv"
        }
        BestProfile::Rho(r) => {
            io::write_rho(ctx.file("rho.csv")?, r)?;
            "rho.csv"
        }
    };
    let output = OptimizeOutput {
        report: best.summary(Some(profile_name.to_string())),
        seed: seeds[best_idx],
        restarts: reports
            .iter()
            .zip(&seeds)
            .map(|(r, &seed)| RestartRow {
                seed,
                best_value: r.best_value,
                gap: r.gap(),
                iterations: r.iterations,
                converged: r.converged,
                distance_to_cylinder: r.distance_to_cylinder,
            })
            .collect(),
    };
    io::write_json(ctx.file("report.json")?, &output)?;

    let passed = reports.iter().all(|r| r.respects_optimality(GAP_TOL));
    let tag = match criterion {
        Criterion::Mu1 => "mu1",
        Criterion::Transfer => "T",
    };
    println!("criterion = {tag}");
    println!("best value = {}", fmt_f64(best.best_value));
    println!("cylinder value = {}", fmt_f64(best.cylinder_value));
    println!("gap = {}", fmt_f64(best.gap()));
    println!("distance to cylinder = {}", fmt_f64(best.distance_to_cylinder));
    println!("no value below the cylinder (tol {GAP_TOL:e}): {}", verdict(passed));
    Ok(Outcome { passed })
}

pub fn check_all(ctx: &Context) -> Result<Outcome, CliError> {
    type Step = fn(&Context) -> Result<Outcome, CliError>;
    let steps: [(&str, Step); 7] = [
        ("eigen", eigen),
        ("transfer", transfer),
        ("transient", transient),
        ("sweep-xi", sweep_xi),
        ("optimize-mu1", |c| optimize(c, Criterion::Mu1)),
        ("optimize-T", |c| optimize(c, Criterion::Transfer)),
        ("pullback", pullback),
    ];
    let mut results = Vec::new();
    for (name, step) in steps {
        println!("== {name}");
        let outcome = step(&ctx.sub(name))?;
        results.push((name, outcome.passed));
    }
    println!("== summary");
    for (name, ok) in &results {
        println!("{name}: {}", verdict(*ok));
    }
    Ok(Outcome {
        passed: results.iter().all(|r| r.1),
    })
}

fn pullback(ctx: &Context) -> Result<Outcome, CliError> {
    let cfg = &ctx.cfg;
    let g = cfg.geometry();
    let c = optimize::verify_pullback(g.a0, g.ell, cfg.params(), cfg.x_cells, cfg.y_cells, cfg.modes)?;
    io::write_json(ctx.file("pullback.json")?, &c)?;
    println!("T (time domain, cylinder) = {}", fmt_f64(c.t_time_domain));
    println!("T1 (reduced, a0^3) = {}", fmt_f64(c.t1_reduced));
    println!("relative gap = {}", fmt_f64(c.relative_gap));
    println!("constant weight is the cylinder's image: {}", verdict(c.in_image));
    println!("pullback: {}", verdict(c.passed));
    Ok(Outcome { passed: c.passed })
}

pub fn output_dir(path: Option<&Path>) -> PathBuf {
    path.map(Path::to_path_buf).unwrap_or_else(|| PathBuf::from("out"))
}
