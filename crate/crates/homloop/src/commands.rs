//! The seven subcommands. Each writes its artifacts before reporting a contract violation.

use std::f64::consts::PI;
use std::path::PathBuf;

use homloop_core::dichotomy::{build_dichotomy, projection_bound_check, ConstantGrid, DichotomyData};
use homloop_core::flow::Direction;
use homloop_core::leaves::{homoclinic_orbit, Homoclinic, Leaves};
use homloop_core::loopmap::{directed_distance, BarrierCurve, DirectedChart, LoopContext, LoopResult, SessionParams};
use homloop_core::melnikov::Melnikov;
use homloop_core::psys::{classify_scenario, compute_spectrum, rate_constants, OrientationHint, RateConstants, SaddleSpectrum};
use homloop_core::scaling::{dulac_probe, fit_exponents, keymissed_suite, Law, ScalingReport};
use homloop_core::{PiecewiseSystem, Point2, Side};
use log::info;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde_json::{json, Map, Value};

use crate::config::ExperimentConfig;
use crate::error::CliError;
use crate::output::{cascade_json, cascade_meta, fmt17, num, nums, point, Csv, OutDir};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Command {
    Classify,
    Melnikov,
    Leaves,
    Barriers,
    Loop,
    Scaling,
    Stability,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Classify => "classify",
            Command::Melnikov => "melnikov",
            Command::Leaves => "leaves",
            Command::Barriers => "barriers",
            Command::Loop => "loop",
            Command::Scaling => "scaling",
            Command::Stability => "stability",
        }
    }
}

/// Runs one subcommand and returns the written files.
pub fn run(cmd: Command, cfg: &ExperimentConfig, out: &OutDir) -> Result<Vec<PathBuf>, CliError> {
    info!("{} on {}", cmd.name(), cfg.system.builtin.as_deref().unwrap_or("inline system"));
    let s = Setup::new(cfg)?;
    match cmd {
        Command::Classify => classify(&s, out),
        Command::Melnikov => melnikov(&s, out),
        Command::Leaves => leaves(&s, out),
        Command::Barriers => barriers(&s, out),
        Command::Loop => loops(&s, out),
        Command::Scaling => scaling(&s, out),
        Command::Stability => stability(&s, out),
    }
}

struct Setup<'a> {
    cfg: &'a ExperimentConfig,
    sys: PiecewiseSystem,
    spec: SaddleSpectrum,
    rates: RateConstants,
    mu: f64,
}

impl<'a> Setup<'a> {
    fn new(cfg: &'a ExperimentConfig) -> Result<Self, CliError> {
        let sys = cfg.build_system()?;
        sys.validate()?;
        let spec = compute_spectrum(&sys, &OrientationHint::default())?;
        let rates = rate_constants(&spec);
        let mu = cfg.session.mu.unwrap_or(rates.mu0);
        if mu > rates.mu0 * (1.0 + 1e-12) {
            return Err(CliError::Invalid { field: "session.mu".into(), msg: format!("{mu} exceeds mu0 = {}", rates.mu0) });
        }
        Ok(Setup { cfg, sys, spec, rates, mu })
    }

    fn gamma(&self) -> Result<Homoclinic, CliError> {
        Ok(homoclinic_orbit(&self.sys.unperturbed(), &self.spec)?)
    }

    fn leaves(&self, gamma: &Homoclinic) -> Leaves {
        let lv = Leaves::new(&self.sys, &self.spec, gamma);
        let c = homloop_core::leaves::LeafConfig { tol: self.cfg.tolerances.flow_tol(), ..lv.cfg };
        lv.with_config(c)
    }

    fn dichotomy(&self) -> Result<DichotomyData, CliError> {
        Ok(build_dichotomy(&self.sys, &self.spec, self.sys.epsilon, ConstantGrid::default())?)
    }

    fn cascade(&self, leaves: &Leaves, dich: &DichotomyData) -> Result<SessionParams, CliError> {
        Ok(SessionParams::derive(leaves, dich, &self.rates, self.mu, self.cfg.session.beta)?)
    }

    fn context(&self) -> Result<LoopContext, CliError> {
        info!("building loop context");
        Ok(LoopContext::with_options(&self.sys, self.mu, self.cfg.session.beta, Some(self.cfg.tolerances.flow_tol()))?)
    }

    fn directions(&self) -> Vec<Direction> {
        match self.cfg.session.direction.as_str() {
            "fwd" => vec![Direction::Fwd],
            "bwd" => vec![Direction::Bwd],
            _ => vec![Direction::Fwd, Direction::Bwd],
        }
    }
}

fn dir_name(d: Direction) -> &'static str {
    match d {
        Direction::Fwd => "fwd",
        Direction::Bwd => "bwd",
    }
}

fn rates_json(r: &RateConstants) -> Value {
    json!({
        "sigma_fwd_plus": num(r.sigma_fwd_plus),
        "sigma_fwd_minus": num(r.sigma_fwd_minus),
        "sigma_fwd": num(r.sigma_fwd),
        "sigma_bwd_plus": num(r.sigma_bwd_plus),
        "sigma_bwd_minus": num(r.sigma_bwd_minus),
        "sigma_bwd": num(r.sigma_bwd),
        "Sigma_fwd_plus": num(r.big_sigma_fwd_plus),
        "Sigma_bwd_minus": num(r.big_sigma_bwd_minus),
        "Sigma_fwd": num(r.big_sigma_fwd),
        "Sigma_bwd": num(r.big_sigma_bwd),
        "lambda_lo": num(r.lambda_lo),
        "lambda_hi": num(r.lambda_hi),
        "mu0": num(r.mu0),
        "sigma_fb": num(r.sigma_fb),
    })
}

fn tolerances_json(cfg: &ExperimentConfig) -> Value {
    let t = &cfg.tolerances;
    json!({ "rtol": num(t.rtol), "atol": num(t.atol), "crossing": num(t.crossing) })
}

/// Cascade as JSON, or the reason it could not be resolved.
fn cascade_or_error(c: &Result<SessionParams, CliError>) -> Value {
    match c {
        Ok(p) => cascade_json(p),
        Err(e) => json!({ "error": e.to_string() }),
    }
}

fn cascade_meta_or_error(c: &Result<SessionParams, CliError>) -> Vec<(&'static str, String)> {
    match c {
        Ok(p) => cascade_meta(p),
        Err(e) => vec![("cascade_error", e.to_string().replace('\n', " "))],
    }
}

fn classify(s: &Setup, out: &OutDir) -> Result<Vec<PathBuf>, CliError> {
    let gamma = s.gamma()?;
    let rep = classify_scenario(&s.sys, &s.spec, &gamma)?;
    let cascade = s.dichotomy().and_then(|d| s.cascade(&s.leaves(&gamma), &d));
    let sp = &s.spec;
    let v = json!({
        "system": s.sys.name,
        "epsilon": num(s.sys.epsilon),
        "scenario": rep.scenario.name(),
        "f0_ok": rep.f0_ok,
        "f1_ok": rep.f1_ok,
        "f2_ok": rep.f2_ok,
        "g_ok": rep.g_ok,
        "k_transversality": num(rep.k_transversality),
        "k_transversality_plus": num(rep.k_transversality_plus),
        "k_transversality_minus": num(rep.k_transversality_minus),
        "sliding_near_origin": rep.sliding_near_origin,
        "probe_distance": num(rep.probe_distance),
        "spectrum": {
            "lambda_u_plus": num(sp.lambda_u_plus),
            "lambda_s_plus": num(sp.lambda_s_plus),
            "lambda_u_minus": num(sp.lambda_u_minus),
            "lambda_s_minus": num(sp.lambda_s_minus),
            "v_u_plus": point(sp.v_u_plus),
            "v_s_plus": point(sp.v_s_plus),
            "v_u_minus": point(sp.v_u_minus),
            "v_s_minus": point(sp.v_s_minus),
        },
        "gamma0": point(gamma.gamma0),
        "rates": rates_json(&s.rates),
        "tolerances": tolerances_json(s.cfg),
        "cascade": cascade_or_error(&cascade),
    });
    Ok(vec![out.write_json("classify.json", &v)?])
}

fn melnikov(s: &Setup, out: &OutDir) -> Result<Vec<PathBuf>, CliError> {
    if s.sys.g.is_none() {
        return Err(CliError::Invalid { field: "system.perturbation".into(), msg: "melnikov needs a perturbation g".into() });
    }
    let gamma = s.gamma()?;
    let mel = Melnikov::new(&s.sys, &gamma)?;
    let period = s.sys.g_period.unwrap_or(2.0 * PI);
    let n = s.cfg.session.alpha_samples;
    let alphas: Vec<f64> = (0..=n).map(|k| period * k as f64 / n as f64).collect();
    let prof = mel.profile(&alphas);
    let cascade = s.dichotomy().and_then(|d| s.cascade(&s.leaves(&gamma), &d));
    let mut csv = Csv::new(&cascade_meta_or_error(&cascade), &["alpha", "M"]);
    for (a, v) in prof.alphas.iter().zip(&prof.values) {
        csv.row(&[fmt17(*a), fmt17(*v)]);
    }
    let pairs = |z: &[(f64, f64)]| -> Value { Value::Array(z.iter().map(|(a, d)| json!({ "alpha": num(*a), "slope": num(*d) })).collect()) };
    let v = json!({
        "period": num(period),
        "t_mel": num(prof.t_mel),
        "zeros": pairs(&prof.zeros),
        "degenerate": pairs(&prof.degenerate),
        "tolerances": tolerances_json(s.cfg),
        "cascade": cascade_or_error(&cascade),
    });
    Ok(vec![out.write_csv("melnikov.csv", &csv)?, out.write_json("melnikov_zeros.json", &v)?])
}

/// Random (side, t, s, ξ) with |t - s| ≤ 8 inside the measured grid.
fn dichotomy_samples(grid: &ConstantGrid, n: usize, seed: u64) -> Vec<(Side, f64, f64, Point2)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|_| {
            let side = if rng.gen_bool(0.5) { Side::Plus } else { Side::Minus };
            let t = rng.gen_range(grid.t_lo + 8.0..grid.t_hi - 8.0);
            let s = t + rng.gen_range(-8.0..8.0);
            let th = rng.gen_range(0.0..2.0 * PI);
            (side, t, s, homloop_core::pt(th.cos(), th.sin()))
        })
        .collect()
}

fn leaves(s: &Setup, out: &OutDir) -> Result<Vec<PathBuf>, CliError> {
    let gamma = s.gamma()?;
    let lv = s.leaves(&gamma);
    let chart = DirectedChart::for_loop(&s.sys, gamma.gamma0)?;
    let dich = s.dichotomy()?;
    let cascade = s.cascade(&lv, &dich);
    let taus = &s.cfg.session.tau_grid;
    let rows: Vec<Result<(Point2, Point2, f64), CliError>> = taus
        .par_iter()
        .map(|&tau| {
            let ps = lv.p_s(tau)?;
            let pu = lv.p_u(tau)?;
            let d = directed_distance(&chart, pu, ps)?;
            Ok((ps, pu, d))
        })
        .collect();
    let mut csv = Csv::new(&cascade_meta_or_error(&cascade), &["tau", "ps_x1", "ps_x2", "pu_x1", "pu_x2", "splitting"]);
    for (tau, r) in taus.iter().zip(rows) {
        let (ps, pu, d) = r?;
        csv.row(&[fmt17(*tau), fmt17(ps.x1), fmt17(ps.x2), fmt17(pu.x1), fmt17(pu.x2), fmt17(d)]);
    }
    let samples = dichotomy_samples(&dich.grid, s.cfg.session.dichotomy_samples, s.cfg.session.seed);
    let proj = projection_bound_check(&s.sys, &dich, &samples)?;
    let v = json!({
        "seed": s.cfg.session.seed,
        "k_eps": num(dich.k_eps_est),
        "k1": num(dich.k1_est),
        "k2": num(dich.k2_est),
        "projection_check": {
            "samples": proj.samples,
            "max_ratio_s": num(proj.max_ratio_s),
            "max_ratio_u": num(proj.max_ratio_u),
            "violations": proj.violations,
        },
        "tolerances": tolerances_json(s.cfg),
        "cascade": cascade_or_error(&cascade),
    });
    let files = vec![out.write_csv("leaves.csv", &csv)?, out.write_json("leaves.json", &v)?];
    if proj.violations > 0 {
        return Err(CliError::Contract(format!("{} dichotomy projection bound violations", proj.violations)));
    }
    Ok(files)
}

fn curve_json(c: &BarrierCurve) -> Value {
    json!({ "name": c.name, "p": point(c.p), "q": point(c.q), "end": point(c.end), "points": c.path.len() })
}

fn barriers(s: &Setup, out: &OutDir) -> Result<Vec<PathBuf>, CliError> {
    let ctx = s.context()?;
    let b = &ctx.barriers;
    let mut csv = Csv::new(&cascade_meta(&ctx.params), &["curve", "index", "x1", "x2"]);
    for c in b.curves() {
        for (k, p) in c.path.iter().enumerate() {
            csv.row(&[c.name.to_string(), k.to_string(), fmt17(p.x1), fmt17(p.x2)]);
        }
    }
    let bands: Vec<Value> = b
        .bands
        .iter()
        .map(|x| json!({ "what": x.what, "value": num(x.value), "lo": num(x.lo), "hi": num(x.hi), "ok": x.ok() }))
        .collect();
    let flow: Vec<Value> = b
        .flow
        .iter()
        .map(|f| json!({ "curve": f.curve, "samples": f.samples, "violations": f.violations, "worst": num(f.worst) }))
        .collect();
    let v = json!({
        "beta": num(b.beta),
        "mu": num(b.mu),
        "epsilon": num(b.eps),
        "kappa": num(b.kappa),
        "zeta": { "u_a": point(b.zeta.u_a), "s_a": point(b.zeta.s_a), "u_b": point(b.zeta.u_b), "s_b": point(b.zeta.s_b) },
        "curves": b.curves().iter().map(|c| curve_json(c)).collect::<Vec<_>>(),
        "bands": bands,
        "flow": flow,
        "gamma_clearance": num(b.gamma_clearance),
        "tolerances": tolerances_json(s.cfg),
        "cascade": cascade_json(&ctx.params),
    });
    let files = vec![out.write_csv("barriers.csv", &csv)?, out.write_json("barriers.json", &v)?];
    b.verify()?;
    Ok(files)
}

type Cell = (Direction, f64, f64);

fn cells(s: &Setup) -> Vec<Cell> {
    let mut v = Vec::new();
    for dir in s.directions() {
        for &tau in &s.cfg.session.tau_grid {
            for &d in &s.cfg.session.d_grid {
                v.push((dir, tau, d));
            }
        }
    }
    v
}

fn run_cells(ctx: &LoopContext, cells: &[Cell]) -> Vec<Result<LoopResult, homloop_core::Error>> {
    info!("{} loop runs", cells.len());
    cells
        .par_iter()
        .map(|&(dir, tau, d)| match dir {
            Direction::Fwd => homloop_core::loopmap::loop_forward(ctx, d, tau),
            Direction::Bwd => homloop_core::loopmap::loop_backward(ctx, d, tau),
        })
        .collect()
}

pub const LOOP_HEADER: [&str; 20] = [
    "direction", "d", "tau", "T_half", "T_one", "D_half", "D_one", "T1", "T2", "T3", "T4", "D1", "D2", "D3", "D4",
    "sup_dev_first", "sup_dev_second", "segments_resolved", "roundtrip", "status",
];

fn loops(s: &Setup, out: &OutDir) -> Result<Vec<PathBuf>, CliError> {
    let ctx = s.context()?;
    let cells = cells(s);
    let res = run_cells(&ctx, &cells);
    let mut csv = Csv::new(&cascade_meta(&ctx.params), &LOOP_HEADER);
    let mut contract = None;
    let mut failure = None;
    for (&(dir, tau, d), r) in cells.iter().zip(&res) {
        match r {
            Ok(r) => {
                let mut row = vec![dir_name(dir).to_string(), fmt17(d), fmt17(tau), fmt17(r.t_half), fmt17(r.t_one), fmt17(r.d_half), fmt17(r.d_one)];
                row.extend(r.segment_times.iter().map(|x| fmt17(*x)));
                row.extend(r.segment_disps.iter().map(|x| fmt17(*x)));
                row.push(fmt17(r.sup_dev_first_half));
                row.push(fmt17(r.sup_dev_second_half));
                row.push(r.segments_resolved.to_string());
                let rt = match dir {
                    Direction::Fwd => homloop_core::loopmap::roundtrip_check(&ctx, d, tau).map(fmt17).unwrap_or_else(|_| "NaN".into()),
                    Direction::Bwd => "NaN".into(),
                };
                row.push(rt);
                row.push("ok".into());
                csv.row(&row);
            }
            Err(e) => {
                let mut row = vec![dir_name(dir).to_string(), fmt17(d), fmt17(tau)];
                row.extend((0..16).map(|_| "NaN".to_string()));
                row.push(e.to_string().replace(',', ";"));
                csv.row(&row);
                if e.is_contract_violation() {
                    contract.get_or_insert_with(|| e.to_string());
                } else {
                    failure.get_or_insert_with(|| e.clone());
                }
            }
        }
    }
    let files = vec![out.write_csv("loops.csv", &csv)?];
    if let Some(c) = contract {
        return Err(CliError::Contract(c));
    }
    if let Some(e) = failure {
        return Err(e.into());
    }
    Ok(files)
}

fn law_json(name: &str, l: &Law) -> Value {
    json!({
        "name": name,
        "slope": num(l.fit.slope),
        "half_width": num(l.fit.half_width),
        "se": num(l.fit.se),
        "intercept": num(l.fit.intercept),
        "n": l.fit.n,
        "theory": num(l.theory),
        "mu_effective": num(l.mu_effective),
        "pass": l.pass,
    })
}

fn report_json(r: &ScalingReport) -> Value {
    let mut m = Map::new();
    m.insert("d_grid".into(), nums(&r.d_grid));
    m.insert("tau_grid".into(), nums(&r.tau_grid));
    m.insert("laws".into(), Value::Array(r.laws().iter().map(|(n, l)| law_json(n, l)).collect()));
    m.insert("all_pass".into(), Value::Bool(r.all_pass()));
    Value::Object(m)
}

fn scaling(s: &Setup, out: &OutDir) -> Result<Vec<PathBuf>, CliError> {
    let ctx = s.context()?;
    let cells = cells(s);
    let res = run_cells(&ctx, &cells);
    let mut ok = Vec::with_capacity(res.len());
    for r in res {
        ok.push(r?);
    }
    let split = |tau: Option<f64>| -> (Vec<LoopResult>, Vec<LoopResult>) {
        let keep = |r: &&LoopResult| tau.map_or(true, |t| r.tau == t);
        (
            ok.iter().filter(|r| r.direction == Direction::Fwd).filter(keep).cloned().collect(),
            ok.iter().filter(|r| r.direction == Direction::Bwd).filter(keep).cloned().collect(),
        )
    };
    let (f, b) = split(None);
    let pooled = fit_exponents(&f, &b, &s.rates, s.mu)?;
    let mut per_tau = Vec::new();
    let mut spread: f64 = 0.0;
    if s.cfg.session.tau_grid.len() > 1 {
        let reps: Vec<ScalingReport> = s
            .cfg
            .session
            .tau_grid
            .iter()
            .map(|&t| {
                let (f, b) = split(Some(t));
                fit_exponents(&f, &b, &s.rates, s.mu)
            })
            .collect::<Result<_, _>>()?;
        for (k, (name, _)) in pooled.laws().iter().enumerate() {
            let slopes: Vec<f64> = reps.iter().map(|r| r.laws()[k].1.fit.slope).collect();
            let lo = slopes.iter().cloned().fold(f64::INFINITY, f64::min);
            let hi = slopes.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            info!("{name}: tau spread {}", hi - lo);
            spread = spread.max(hi - lo);
        }
        per_tau = reps.iter().map(report_json).collect();
    }
    let km = keymissed_suite(&ok, &s.rates, s.mu);
    let v = json!({
        "pooled": report_json(&pooled),
        "per_tau": per_tau,
        "tau_spread": num(spread),
        "keymissed": { "loops": km.rows.len(), "violations": km.violations, "worst_ratio": num(km.worst_ratio) },
        "theory": rates_json(&s.rates),
        "mu_used": num(s.mu),
        "tolerances": tolerances_json(s.cfg),
        "cascade": cascade_json(&ctx.params),
    });
    let files = vec![out.write_json("scaling.json", &v)?];
    if !pooled.all_pass() {
        let bad: Vec<&str> = pooled.laws().iter().filter(|(_, l)| !l.pass).map(|(n, _)| *n).collect();
        return Err(CliError::Contract(format!("scaling laws outside their bands: {}", bad.join(" "))));
    }
    if km.violations > 0 {
        return Err(CliError::Contract(format!("{} sup-deviation bound violations", km.violations)));
    }
    Ok(files)
}

fn stability(s: &Setup, out: &OutDir) -> Result<Vec<PathBuf>, CliError> {
    if s.sys.epsilon != 0.0 {
        return Err(CliError::Invalid { field: "system.epsilon".into(), msg: "stability needs epsilon = 0".into() });
    }
    let ctx = s.context()?;
    let p = dulac_probe(&ctx, s.cfg.session.n_loops)?;
    let v = json!({
        "div_at_origin_plus": num(p.div_at_origin_plus),
        "div_at_origin_minus": num(p.div_at_origin_minus),
        "div_integral_along_gamma": num(p.div_integral_along_gamma),
        "prediction": p.prediction.name(),
        "empirical_contraction": num(p.empirical_contraction),
        "displacements": nums(&p.displacements),
        "escaped": p.escaped,
        "consistent": p.consistent(),
        "tolerances": tolerances_json(s.cfg),
        "cascade": cascade_json(&ctx.params),
    });
    let files = vec![out.write_json("stability.json", &v)?];
    if !p.consistent() {
        return Err(CliError::Contract(format!("{} prediction but contraction ratio {}", p.prediction.name(), p.empirical_contraction)));
    }
    Ok(files)
}
