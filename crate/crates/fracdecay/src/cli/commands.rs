//! Subcommand implementations.

use std::path::Path;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use super::config::{ExperimentConfig, PotentialKindConfig};
use super::output::{self, Row};
use crate::decay::{self, DecayReport};
use crate::error::{Error, Result};
use crate::exponents::{self, CertificateOutcome, DecayClass, PenalizationPlan, Q};
use crate::fraclap;
use crate::model::{self, Potential, ProblemParams};
use crate::solver::{self, MarginSample, PenalizedProblem, SolverSettings};

/// Decay class of the configured potential with `omega` kept exact.
fn class_of(cfg: &ExperimentConfig) -> DecayClass {
    let two_s = Q::from_integer(2.into()) * &cfg.params.s.rational;
    match cfg.potential.kind {
        PotentialKindConfig::Log => DecayClass::Log,
        PotentialKindConfig::Compact => DecayClass::Fast,
        PotentialKindConfig::Constant => DecayClass::Slow(Q::from_integer(0.into())),
        PotentialKindConfig::Power | PotentialKindConfig::Tabulated => {
            let w = cfg.potential.omega.rational.clone();
            if w > two_s {
                DecayClass::Fast
            } else {
                DecayClass::Slow(w)
            }
        }
    }
}

fn class_name(class: &DecayClass) -> String {
    match class {
        DecayClass::Fast => "fast".into(),
        DecayClass::Slow(w) => format!("slow, omega = {w}"),
        DecayClass::UpperSlow(w) => format!("upper-slow, omega = {w}"),
        DecayClass::Log => "logarithmic".into(),
    }
}

fn show(q: &Q) -> String {
    format!("{q} ({:.6})", exponents::to_f64(q))
}

/// Admissible `(params, potential)` or the list of violations.
fn checked(params: &ProblemParams, pot: &Potential) -> Result<()> {
    let rep = model::validate(params, pot);
    for w in &rep.warnings {
        eprintln!("warning: {w}");
    }
    if rep.is_admissible() {
        Ok(())
    } else {
        Err(Error::Inadmissible(rep.violations.join("; ")))
    }
}

pub fn thresholds(cfg: &ExperimentConfig) -> Result<()> {
    let n = cfg.params.n;
    let s = &cfg.params.s.rational;
    let p = &cfg.params.p.rational;
    let omega = &cfg.potential.omega.rational;
    let table = exponents::thresholds(n, s, None)?;
    let class = class_of(cfg);
    println!("N = {n}, s = {s}, class: {}", class_name(&class));
    println!("2_s^*     = {}", show(&table.critical));
    println!("q_*       = {}", show(&table.q_star));
    match exponents::q_omega(n, s, omega) {
        Ok(q) => println!("q_omega   = {}   (omega = {omega})", show(&q)),
        Err(_) => println!("q_omega   = n/a   (omega = {omega} outside [0, 2s])"),
    }
    let p_star = exponents::threshold_p_star(n, s, &class)?;
    println!("p_*       = {}", show(&p_star));
    let two = Q::from_integer(2.into());
    if !(p > &two && p < &table.critical) {
        return Err(Error::Inadmissible(format!("2 < p < 2_s^* fails (p = {p})")));
    }
    let verdict = if *p > p_star {
        "above p_*: positive solutions exist"
    } else if *p < p_star {
        "below p_*: no positive solution"
    } else {
        "equal to p_*: open problem"
    };
    println!("p         = {}   {verdict}", show(p));
    Ok(())
}

pub fn certify(cfg: &ExperimentConfig) -> Result<()> {
    let n = cfg.params.n;
    let s = &cfg.params.s.rational;
    let p = &cfg.params.p.rational;
    let class = class_of(cfg);
    match exponents::nonexistence_certificate(n, s, p, &class)? {
        CertificateOutcome::Certificate(c) => {
            println!("regime:     {:?}", c.regime);
            println!("steps:      {}", c.steps);
            println!("step:       {}", c.step);
            println!("mu trace:");
            for (i, mu) in c.mu_trace.iter().enumerate() {
                println!("  mu_{:<3} = {mu:.12}", i + 1);
            }
            println!("mu*         = {:.12}", c.terminal_mu_star);
            println!("mu* p       = {:.12} < N = {n}", c.terminal_mu_star * c.p);
            println!("witness:    {}", c.witness());
            let ok = c.check(cfg.params.s.value);
            println!("certificate check: {}", if ok { "valid" } else { "INVALID" });
            if ok {
                Ok(())
            } else {
                Err(Error::Tolerance {
                    requested: 0.0,
                    achieved: f64::NAN,
                })
            }
        }
        CertificateOutcome::NotApplicable { reason } => {
            let p_star = exponents::threshold_p_star(n, s, &class)?;
            Err(Error::Classification(format!(
                "certificate not applicable: {reason} (p = {p}, p_* = {p_star})"
            )))
        }
    }
}

pub fn amu(cfg: &ExperimentConfig, mus: &[f64], n: Option<u32>, s: Option<f64>, tol: Option<f64>) -> Result<()> {
    let n = n.unwrap_or(cfg.params.n);
    let s = s.unwrap_or(cfg.params.s.value);
    let tol = tol.unwrap_or(fraclap::AMU_TOL);
    println!("{:>12} {:>22} {:>12}  {:<16} far field", "mu", "A_mu", "err. est.", "regime");
    let mut first_error = None;
    for &mu in mus {
        let (regime, far) = fraclap::regime_of(n, s, mu);
        match fraclap::amu_with_tol(n, s, mu, tol) {
            Ok(a) => println!(
                "{mu:>12.6} {:>22.15e} {:>12.3e}  {:<16} {far}",
                a.value,
                a.quadrature_error_estimate,
                format!("{regime:?}")
            ),
            Err(e) => {
                println!("{mu:>12.6} {:>22} {:>12}  {:<16} {far}", e.to_string(), "", format!("{regime:?}"));
                first_error.get_or_insert(e);
            }
        }
    }
    first_error.map_or(Ok(()), Err)
}

pub fn fraclap_eval(
    cfg: &ExperimentConfig,
    mu: f64,
    radii: &[f64],
    n: Option<u32>,
    s: Option<f64>,
    tol: Option<f64>,
) -> Result<()> {
    let n = n.unwrap_or(cfg.params.n);
    let s = s.unwrap_or(cfg.params.s.value);
    let rel = tol.unwrap_or(1e-8);
    let (regime, far) = fraclap::regime_of(n, s, mu);
    println!("N = {n}, s = {s}, mu = {mu}: {regime:?}, far field {far}");
    println!("{:>14} {:>22} {:>22} {:>22}", "r", "w_mu(r)", "(-Delta)^s w_mu", "r^(mu+2s) * value");
    for &r in radii {
        let v = fraclap::fraclap_w_rel(n, s, mu, r, rel)?;
        let w = (1.0 + r * r).powf(-mu / 2.0);
        println!("{r:>14.6e} {w:>22.15e} {v:>22.15e} {:>22.15e}", r.powf(mu + 2.0 * s) * v);
    }
    Ok(())
}

fn settings_with(cfg: &ExperimentConfig, tol: Option<f64>) -> SolverSettings {
    let mut st = cfg.settings();
    if let Some(t) = tol {
        st.tol = t;
    }
    st
}

fn base_row(params: &ProblemParams, omega: f64) -> Row {
    Row {
        n: params.n,
        s: params.s,
        p: params.p,
        omega,
        eps: params.eps,
        ..Row::default()
    }
}

fn fill_plan(row: &mut Row, plan: &PenalizationPlan) {
    row.theta = Some(plan.theta);
    row.tau = Some(plan.tau);
    row.mu = Some(plan.mu);
}

fn fill_decay(row: &mut Row, d: &DecayReport) {
    row.gamma_fit = Some(d.fitted_gamma);
    row.r_squared = Some(d.r_squared);
    row.gamma_pred_lo = Some(d.predicted.lower_exponent.value());
    row.gamma_pred_hi = Some(d.predicted.upper_exponent.value());
    row.verdict = d.verdict.as_str().to_string();
}

#[derive(Serialize)]
struct SolveMetadata<'a> {
    params: ProblemParams,
    potential: &'a Potential,
    settings: &'a SolverSettings,
    seed: u64,
    plan: Option<PenalizationPlan>,
    eps: Option<f64>,
    energy: Option<f64>,
    residual: Option<f64>,
    iterations: Option<usize>,
    tail_exponent: Option<f64>,
    tail_coefficient: Option<f64>,
    margin: Option<f64>,
    margin_argmax: Option<f64>,
    decay: Option<&'a DecayReport>,
    trace: Vec<MarginSample>,
    error: Option<String>,
}

/// Outcome of `solve`: the CSV row and the output directory.
pub struct SolveOutput {
    pub row: Row,
    pub dir: std::path::PathBuf,
}

pub fn solve(cfg: &ExperimentConfig, tol: Option<f64>) -> Result<SolveOutput> {
    let params = cfg.problem();
    let pot = cfg.potential()?;
    let settings = settings_with(cfg, tol);
    checked(&params, &pot)?;
    let dir = cfg.output.dir.clone();
    std::fs::create_dir_all(&dir)?;
    let start = Instant::now();
    let mut row = base_row(&params, pot.omega);
    let mut meta = SolveMetadata {
        params,
        potential: &pot,
        settings: &settings,
        seed: cfg.seed,
        plan: None,
        eps: None,
        energy: None,
        residual: None,
        iterations: None,
        tail_exponent: None,
        tail_coefficient: None,
        margin: None,
        margin_argmax: None,
        decay: None,
        trace: Vec::new(),
        error: None,
    };
    let outcome = solver::feasible_plan(&params, &pot).and_then(|plan| {
        row.feasible = true;
        fill_plan(&mut row, &plan);
        meta.plan = Some(plan);
        solver::solve_with_plan(&params, &plan, &pot, &settings)
    });
    row.wall_seconds = start.elapsed().as_secs_f64();
    let result = match outcome {
        Ok(sol) => {
            let st = &sol.state;
            row.eps = sol.eps;
            row.margin = Some(sol.margin.margin);
            row.energy = Some(st.energy);
            row.residual = Some(st.residual_norm);
            fill_decay(&mut row, &sol.decay);
            output::write_profile(&dir.join("profile.txt"), &st.profile)?;
            if cfg.output.plot {
                let r0 = 0.5 * st.profile.grid.r_max;
                let script = output::profile_plot_script("profile.txt", sol.decay.fitted_gamma, (r0, st.profile.eval(r0)));
                std::fs::write(dir.join("profile.gp"), script)?;
            }
            println!(
                "eps = {:.6e}  energy = {:.6e}  residual = {:.3e}  margin = {:.4}  gamma = {:.4} (predicted [{}, {}])  verdict = {}",
                sol.eps,
                st.energy,
                st.residual_norm,
                sol.margin.margin,
                sol.decay.fitted_gamma,
                sol.decay.predicted.lower_exponent.value(),
                sol.decay.predicted.upper_exponent.value(),
                sol.decay.verdict.as_str()
            );
            meta.eps = Some(sol.eps);
            meta.params.eps = sol.eps;
            meta.energy = Some(st.energy);
            meta.residual = Some(st.residual_norm);
            meta.iterations = Some(st.iterations);
            meta.tail_exponent = Some(st.profile.tail_exponent);
            meta.tail_coefficient = Some(st.profile.tail_coefficient);
            meta.margin = Some(sol.margin.margin);
            meta.margin_argmax = Some(sol.margin.argmax);
            meta.trace = sol.trace.clone();
            write_solve_files(cfg, &dir, &row, &SolveMetadata { decay: Some(&sol.decay), ..meta })?;
            Ok(())
        }
        Err(e) => {
            row.error_class = e.class().to_string();
            row.verdict = if row.feasible { "not_converged" } else { "infeasible" }.into();
            if let Error::NoPassingEps { trace, .. } = &e {
                meta.trace = trace
                    .iter()
                    .map(|&(eps, margin)| MarginSample { eps, margin, error: None })
                    .collect();
            }
            meta.error = Some(e.to_string());
            write_solve_files(cfg, &dir, &row, &meta)?;
            Err(e)
        }
    };
    result.map(|()| SolveOutput { row, dir })
}

fn write_solve_files(cfg: &ExperimentConfig, dir: &Path, row: &Row, meta: &SolveMetadata) -> Result<()> {
    output::write_json(&dir.join("metadata.json"), meta)?;
    if cfg.output.csv {
        output::write_csv(&dir.join("solve.csv"), std::slice::from_ref(row))?;
    }
    Ok(())
}

/// The sweep axes `(p, omega, eps)`, each falling back to the single
/// configured value.
fn sweep_axes(cfg: &ExperimentConfig) -> Result<(Vec<f64>, Vec<f64>, Vec<f64>)> {
    let sw = &cfg.sweep;
    if sw.omega.is_some() && !matches!(cfg.potential.kind, PotentialKindConfig::Power | PotentialKindConfig::Tabulated) {
        return Err(Error::Config(
            "sweep.omega needs potential.kind = \"power\" or \"tabulated\"".into(),
        ));
    }
    let axis = |v: &Option<super::config::Values>, fallback: f64| match v {
        Some(v) => v.expand(),
        None => Ok(vec![fallback]),
    };
    Ok((
        axis(&sw.p, cfg.params.p.value)?,
        axis(&sw.omega, cfg.potential.omega.value)?,
        axis(&sw.eps, cfg.params.eps.unwrap_or(0.01))?,
    ))
}

fn sweep_cell(cfg: &ExperimentConfig, settings: &SolverSettings, p: f64, omega: f64, eps: f64) -> Row {
    let start = Instant::now();
    let params = ProblemParams::new(cfg.params.n, cfg.params.s.value, p, eps);
    let mut row = base_row(&params, omega);
    let run = |row: &mut Row| -> Result<()> {
        let pot = cfg.potential_with(omega)?;
        let rep = model::validate(&params, &pot);
        if !rep.is_admissible() {
            return Err(Error::Inadmissible(rep.violations.join("; ")));
        }
        match solver::feasible_plan(&params, &pot) {
            Ok(plan) => {
                row.feasible = true;
                fill_plan(row, &plan);
                let state = solver::solve_penalized(&params, &plan, &pot, settings)?;
                let m = solver::depenalization_check(&state, &params, &plan, &pot);
                row.margin = Some(m.margin);
                row.energy = Some(state.energy);
                row.residual = Some(state.residual_norm);
                let pred = solver::prediction_for(params.n, params.s, p, &pot)?;
                let window = decay::default_window(pot.well_radius, settings.r_max);
                let d = decay::report(&state.profile, &pred, window, decay::END_TO_END_TOL)?;
                fill_decay(row, &d);
                Ok(())
            }
            Err(e @ Error::BelowThreshold { .. }) => {
                // Below the threshold the forced plan must fail de-penalization.
                row.error_class = e.class().to_string();
                row.verdict = "infeasible".into();
                let plan = solver::forced_plan(&params, &pot)?;
                fill_plan(row, &plan);
                let state = solver::solve_penalized(&params, &plan, &pot, settings)?;
                let m = solver::depenalization_check(&state, &params, &plan, &pot);
                row.margin = Some(m.margin);
                row.energy = Some(state.energy);
                row.residual = Some(state.residual_norm);
                row.verdict = if m.passed {
                    "nonexistence_violated"
                } else {
                    "nonexistence_consistent"
                }
                .into();
                Ok(())
            }
            Err(e) => Err(e),
        }
    };
    if let Err(e) = run(&mut row) {
        if row.error_class.is_empty() {
            row.error_class = e.class().to_string();
        }
        if row.verdict.is_empty() {
            row.verdict = if row.feasible { "not_converged" } else { "infeasible" }.into();
        }
    }
    row.wall_seconds = start.elapsed().as_secs_f64();
    row
}

/// Runs every cell; failures are recorded in their rows.
pub fn sweep(cfg: &ExperimentConfig, tol: Option<f64>) -> Result<Vec<Row>> {
    let (ps, omegas, epss) = sweep_axes(cfg)?;
    let mut settings = settings_with(cfg, tol);
    if settings.self_test {
        let n = cfg.params.n;
        let s = cfg.params.s.value;
        let pot = cfg.potential_with(omegas[0])?;
        let gamma = solver::initial_tail_exponent(n, s, ps[0], &pot);
        solver::assemble_checked(&settings.grid()?, n, s, gamma)?;
        settings.self_test = false;
    }
    let mut cells = Vec::with_capacity(ps.len() * omegas.len() * epss.len());
    for &p in &ps {
        for &w in &omegas {
            cells.extend(epss.iter().map(|&e| (p, w, e)));
        }
    }
    let rows: Vec<Row> = cells
        .par_iter()
        .map(|&(p, w, e)| sweep_cell(cfg, &settings, p, w, e))
        .collect();
    let dir = &cfg.output.dir;
    std::fs::create_dir_all(dir)?;
    if cfg.output.csv {
        output::write_csv(&dir.join("sweep.csv"), &rows)?;
    }
    if cfg.output.plot {
        std::fs::write(dir.join("sweep.gp"), output::sweep_plot_script("sweep.csv"))?;
    }
    println!(
        "{:>8} {:>8} {:>10} {:>9} {:>12} {:>9}  {:<24} {}",
        "p", "omega", "eps", "feasible", "margin", "gamma", "verdict", "error"
    );
    for r in &rows {
        let opt = |v: Option<f64>, prec: usize| v.map_or("-".to_string(), |x| format!("{x:.prec$}"));
        println!(
            "{:>8.4} {:>8.4} {:>10.4e} {:>9} {:>12} {:>9}  {:<24} {}",
            r.p,
            r.omega,
            r.eps,
            r.feasible,
            opt(r.margin, 4),
            opt(r.gamma_fit, 4),
            r.verdict,
            r.error_class
        );
    }
    Ok(rows)
}

/// Operator self-test on `w_μ` for `μ ∈ {1, N−2s, N+1}` and a finite
/// difference check of the penalized gradient along seeded directions.
pub fn selftest(cfg: &ExperimentConfig, tol: Option<f64>) -> Result<()> {
    let n = cfg.params.n;
    let s = cfg.params.s.value;
    let settings = cfg.settings();
    let grid = settings.grid()?;
    let limit = tol.unwrap_or(solver::SELF_TEST_TOL);
    let mut failed = None;
    for mu in [1.0, n as f64 - 2.0 * s, n as f64 + 1.0] {
        let op = solver::assemble_operator(&grid, n, s, mu)?;
        let rep = solver::operator_self_test(&op, mu)?;
        let ok = rep.max_rel <= limit;
        println!(
            "{} operator on w_mu, mu = {mu:.4}: max rel. error {:.3e} at r = {:.4} ({} nodes)",
            if ok { "PASS" } else { "FAIL" },
            rep.max_rel,
            rep.at,
            rep.checked
        );
        if !ok {
            failed.get_or_insert(Error::SelfTest {
                max_rel: rep.max_rel,
                at: rep.at,
            });
        }
    }
    let params = ProblemParams::new(n, s, cfg.params.p.value, cfg.params.eps.unwrap_or(0.1));
    let pot = cfg.potential()?;
    let plan = solver::feasible_plan(&params, &pot).or_else(|_| solver::forced_plan(&params, &pot))?;
    let gamma = solver::initial_tail_exponent(n, s, params.p, &pot);
    let op = solver::assemble_operator(&grid, n, s, gamma)?;
    let problem = PenalizedProblem::new(params, plan, &pot, op)?;
    let worst = gradient_check(&problem, cfg.seed, 10);
    let ok = worst <= 1e-5;
    println!(
        "{} gradient check, 10 directions (seed {}): max rel. error {worst:.3e}",
        if ok { "PASS" } else { "FAIL" },
        cfg.seed
    );
    if !ok {
        failed.get_or_insert(Error::Tolerance {
            requested: 1e-5,
            achieved: worst,
        });
    }
    failed.map_or(Ok(()), Err)
}

/// Largest relative gap between central differences of the energy and the
/// gradient along `count` random directions at a bump-shaped profile.
pub fn gradient_check(problem: &PenalizedProblem, seed: u64, count: usize) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let eps = problem.params.eps;
    let u: Vec<f64> = problem
        .op
        .grid
        .nodes
        .iter()
        .map(|r| 2.0 * (1.0 + (r / eps).powi(2)).powf(-0.5 * problem.op.gamma))
        .collect();
    let (_, g) = solver::penalized_energy_and_gradient(problem, &u);
    let mut worst = 0.0f64;
    for _ in 0..count {
        let d: Vec<f64> = u.iter().map(|&x| rng.gen_range(-1.0..1.0) * (x + 1e-3)).collect();
        let h = 1e-6;
        let shifted = |sign: f64| -> Vec<f64> { u.iter().zip(&d).map(|(a, b)| a + sign * h * b).collect() };
        let jp = solver::penalized_energy_and_gradient(problem, &shifted(1.0)).0;
        let jm = solver::penalized_energy_and_gradient(problem, &shifted(-1.0)).0;
        let fd = (jp - jm) / (2.0 * h);
        let exact: f64 = g.iter().zip(&d).map(|(a, b)| a * b).sum();
        worst = worst.max((fd - exact).abs() / exact.abs().max(1e-300));
    }
    worst
}
