//! Exponent fits of the loop batches, the sup-deviation suite and the Dulac stability probe.

use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::flow::Direction;
use crate::geom::{m, Point2};
use crate::leaves::LeafKind;
use crate::loopmap::{loop_forward, loop_orbit, LoopContext, LoopResult};
use crate::psys::{RateConstants, Side};
use crate::quad::integrate;

/// Least-squares line y = intercept + slope·x.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Fit {
    pub slope: f64,
    pub intercept: f64,
    /// standard error of the slope
    pub se: f64,
    /// 2·se
    pub half_width: f64,
    pub n: usize,
}

pub fn fit_line(xs: &[f64], ys: &[f64]) -> Fit {
    let n = xs.len();
    let nf = n as f64;
    let mx = xs.iter().sum::<f64>() / nf;
    let my = ys.iter().sum::<f64>() / nf;
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ssr: f64 = xs.iter().zip(ys).map(|(x, y)| (y - intercept - slope * x) * (y - intercept - slope * x)).sum();
    let se = if n > 2 { m::sqrt(ssr / (nf - 2.0) / sxx) } else { f64::INFINITY };
    Fit { slope, intercept, se, half_width: 2.0 * se, n }
}

/// One fitted law against its theoretical value.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Law {
    pub fit: Fit,
    pub theory: f64,
    /// max(μ, 3·se)
    pub mu_effective: f64,
    pub pass: bool,
}

impl Law {
    fn new(fit: Fit, theory: f64, mu: f64) -> Self {
        let mu_effective = mu.max(3.0 * fit.se);
        Law { fit, theory, mu_effective, pass: (fit.slope - theory).abs() <= mu_effective }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ScalingReport {
    pub d_grid: Vec<f64>,
    pub tau_grid: Vec<f64>,
    pub sigma_fwd: Option<Law>,
    pub sigma_fwd_plus: Option<Law>,
    pub big_sigma_fwd: Option<Law>,
    pub big_sigma_fwd_plus: Option<Law>,
    pub sigma_bwd: Option<Law>,
    pub sigma_bwd_minus: Option<Law>,
    pub big_sigma_bwd: Option<Law>,
    pub big_sigma_bwd_minus: Option<Law>,
    pub theory: RateConstants,
    pub mu_used: f64,
}

impl ScalingReport {
    /// (name, law) for every fitted quantity.
    pub fn laws(&self) -> Vec<(&'static str, Law)> {
        let all = [
            ("sigma_fwd", self.sigma_fwd),
            ("sigma_fwd_plus", self.sigma_fwd_plus),
            ("Sigma_fwd", self.big_sigma_fwd),
            ("Sigma_fwd_plus", self.big_sigma_fwd_plus),
            ("sigma_bwd", self.sigma_bwd),
            ("sigma_bwd_minus", self.sigma_bwd_minus),
            ("Sigma_bwd", self.big_sigma_bwd),
            ("Sigma_bwd_minus", self.big_sigma_bwd_minus),
        ];
        all.iter().filter_map(|(n, l)| l.map(|l| (*n, l))).collect()
    }

    pub fn all_pass(&self) -> bool {
        self.laws().iter().all(|(_, l)| l.pass)
    }
}

fn sorted_unique(v: impl Iterator<Item = f64>) -> Vec<f64> {
    let mut v: Vec<f64> = v.collect();
    v.sort_by(|a, b| a.partial_cmp(b).unwrap_or(core::cmp::Ordering::Equal));
    v.dedup();
    v
}

/// Grid admissible for a fit: ≥ 5 values spanning ≥ 1.5 decades.
fn grid_ok(ds: &[f64]) -> bool {
    ds.len() >= 5 && m::ln(ds[ds.len() - 1] / ds[0]) / m::ln(10.0) >= 1.5 - 1e-12
}

/// Fits the four laws of one direction: (σ, σ_half, Σ, Σ_half).
fn fit_direction(rows: &[&LoopResult]) -> [Fit; 4] {
    let lnd: Vec<f64> = rows.iter().map(|r| m::ln(r.d)).collect();
    let absln: Vec<f64> = lnd.iter().map(|x| -x).collect();
    let ln_one: Vec<f64> = rows.iter().map(|r| m::ln(r.d_one)).collect();
    let ln_half: Vec<f64> = rows.iter().map(|r| m::ln(r.d_half)).collect();
    let t_one: Vec<f64> = rows.iter().map(|r| r.t_one).collect();
    let t_half: Vec<f64> = rows.iter().map(|r| r.t_half).collect();
    [fit_line(&lnd, &ln_one), fit_line(&lnd, &ln_half), fit_line(&absln, &t_one), fit_line(&absln, &t_half)]
}

fn keep(rs: &[LoopResult]) -> Vec<&LoopResult> {
    rs.iter().filter(|r| r.d <= 1e-2 * (1.0 + 1e-12)).collect()
}

/// Fits σ, σ_half, Σ, Σ_half for the forward and (if given) backward batches. Only d ≤ 1e-2
/// enters the fits.
pub fn fit_exponents(fwd: &[LoopResult], bwd: &[LoopResult], theory: &RateConstants, mu: f64) -> Result<ScalingReport> {
    let f = keep(fwd);
    let b = keep(bwd);
    if f.is_empty() && b.is_empty() {
        return Err(Error::InsufficientGrid);
    }
    for rows in [&f, &b] {
        if rows.is_empty() {
            continue;
        }
        if rows.iter().any(|r| !(r.d_one > 0.0) || !(r.d_half > 0.0)) {
            return Err(Error::DegenerateInput("loop displacements must be positive"));
        }
        if !grid_ok(&sorted_unique(rows.iter().map(|r| r.d))) {
            return Err(Error::InsufficientGrid);
        }
    }
    let t = theory;
    let mut rep = ScalingReport {
        d_grid: sorted_unique(f.iter().chain(b.iter()).map(|r| r.d)),
        tau_grid: sorted_unique(f.iter().chain(b.iter()).map(|r| r.tau)),
        sigma_fwd: None,
        sigma_fwd_plus: None,
        big_sigma_fwd: None,
        big_sigma_fwd_plus: None,
        sigma_bwd: None,
        sigma_bwd_minus: None,
        big_sigma_bwd: None,
        big_sigma_bwd_minus: None,
        theory: *theory,
        mu_used: mu,
    };
    if !f.is_empty() {
        let [a, b2, c, d] = fit_direction(&f);
        rep.sigma_fwd = Some(Law::new(a, t.sigma_fwd, mu));
        rep.sigma_fwd_plus = Some(Law::new(b2, t.sigma_fwd_plus, mu));
        rep.big_sigma_fwd = Some(Law::new(c, t.big_sigma_fwd, mu));
        rep.big_sigma_fwd_plus = Some(Law::new(d, t.big_sigma_fwd_plus, mu));
    }
    if !b.is_empty() {
        let [a, b2, c, d] = fit_direction(&b);
        rep.sigma_bwd = Some(Law::new(a, t.sigma_bwd, mu));
        rep.sigma_bwd_minus = Some(Law::new(b2, t.sigma_bwd_minus, mu));
        rep.big_sigma_bwd = Some(Law::new(c, t.big_sigma_bwd, mu));
        rep.big_sigma_bwd_minus = Some(Law::new(d, t.big_sigma_bwd_minus, mu));
    }
    Ok(rep)
}

#[derive(Clone, Debug, PartialEq)]
pub struct KeymissedRow {
    pub direction: Direction,
    pub d: f64,
    pub tau: f64,
    pub bound: f64,
    pub first: f64,
    pub second: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct KeymissedReport {
    pub rows: Vec<KeymissedRow>,
    pub violations: usize,
    /// max over rows of sup_dev / bound
    pub worst_ratio: f64,
}

/// sup_dev ≤ d^{σ^fwd_+ - μ} forward and ≤ d^{σ^bwd_- - μ} backward.
pub fn keymissed_suite(loops: &[LoopResult], theory: &RateConstants, mu: f64) -> KeymissedReport {
    let mut rows = Vec::with_capacity(loops.len());
    let mut violations = 0;
    let mut worst: f64 = 0.0;
    for r in loops {
        let sigma = match r.direction {
            Direction::Fwd => theory.sigma_fwd_plus,
            Direction::Bwd => theory.sigma_bwd_minus,
        };
        let bound = m::powf(r.d, sigma - mu);
        let w = r.sup_dev_first_half.max(r.sup_dev_second_half);
        if !(w <= bound) {
            violations += 1;
        }
        worst = worst.max(w / bound);
        rows.push(KeymissedRow { direction: r.direction, d: r.d, tau: r.tau, bound, first: r.sup_dev_first_half, second: r.sup_dev_second_half });
    }
    KeymissedReport { rows, violations, worst_ratio: worst }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Prediction {
    StableInside,
    UnstableInside,
    Indeterminate,
}

impl Prediction {
    pub fn name(self) -> &'static str {
        match self {
            Prediction::StableInside => "stable_inside",
            Prediction::UnstableInside => "unstable_inside",
            Prediction::Indeterminate => "indeterminate",
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct StabilityProbe {
    pub div_at_origin_plus: f64,
    pub div_at_origin_minus: f64,
    /// ∫ div f±(γ(t)) dt with the side-appropriate field
    pub div_integral_along_gamma: f64,
    pub prediction: Prediction,
    /// (d_n / d_0)^{1/n} of the iterated return map
    pub empirical_contraction: f64,
    pub displacements: Vec<f64>,
    /// The orbit left the region before n loops.
    pub escaped: bool,
}

impl StabilityProbe {
    /// StableInside ⟺ ratio < 1; ratios within 5% of 1 are neutral.
    pub fn consistent(&self) -> bool {
        let r = self.empirical_contraction;
        match self.prediction {
            Prediction::StableInside => r < 1.0,
            Prediction::UnstableInside => self.escaped || r > 1.0,
            Prediction::Indeterminate => (r - 1.0).abs() <= 0.05,
        }
    }
}

const DIV_ZERO: f64 = 1e-10;

/// Sign rules on the divergence at the origin and along γ. Mixed signs fall back to the
/// saddle ratio σ^fwd (contracting iff > 1), which reduces to the divergence rule when f⁺ = f⁻.
pub fn dulac_prediction(div_plus: f64, div_minus: f64, integral: f64, sigma_fwd: f64) -> Prediction {
    let sgn = |x: f64| if x > DIV_ZERO { 1 } else if x < -DIV_ZERO { -1 } else { 0 };
    match (sgn(div_plus), sgn(div_minus)) {
        (-1, -1) => Prediction::StableInside,
        (1, 1) => Prediction::UnstableInside,
        (0, 0) => match sgn(integral) {
            -1 => Prediction::StableInside,
            1 => Prediction::UnstableInside,
            _ => Prediction::Indeterminate,
        },
        _ => match sgn(sigma_fwd - 1.0) {
            1 => Prediction::StableInside,
            -1 => Prediction::UnstableInside,
            _ => Prediction::Indeterminate,
        },
    }
}

/// Divergence data along γ and the iterated ε = 0 return map from d₀ = 1e-3.
pub fn dulac_probe(ctx: &LoopContext, n_loops: usize) -> Result<StabilityProbe> {
    if ctx.sys.epsilon != 0.0 {
        return Err(Error::DegenerateInput("the Dulac probe needs eps = 0"));
    }
    let sys = &ctx.sys;
    let o = Point2::ZERO;
    let dp = sys.jac_f(Side::Plus, o).trace();
    let dm = sys.jac_f(Side::Minus, o).trace();
    let gamma = &ctx.gamma;
    let mut div = |t: f64| {
        let x = gamma.eval(t);
        let side = sys.side_of(x).unwrap_or(if t > 0.0 { Side::Plus } else { Side::Minus });
        sys.jac_f(side, x).trace()
    };
    // the integrand decays like e^{-λ|t|} only when div(0) = 0; truncate where γ is negligible
    let t_span = gamma.t_span;
    let mut integral = 0.0;
    let pieces = 16;
    for k in 0..pieces {
        let a = -t_span + 2.0 * t_span * k as f64 / pieces as f64;
        let b = a + 2.0 * t_span / pieces as f64;
        integral += integrate(&mut div, a, b, 1e-12, 200).value;
    }
    let prediction = dulac_prediction(dp, dm, integral, ctx.rates.sigma_fwd);

    let d0 = 1e-3f64.min(ctx.params.delta);
    let mut d = d0;
    let mut tau = 0.0;
    let mut disps = alloc::vec![d0];
    let mut escaped = false;
    for _ in 0..n_loops {
        match loop_forward(ctx, d, tau) {
            Ok(r) => {
                d = r.d_one;
                tau = r.t_one_abs();
                disps.push(d);
            }
            Err(Error::LeftRegion { .. }) | Err(Error::DegenerateInput(_)) => {
                escaped = true;
                break;
            }
            Err(e) => return Err(e),
        }
    }
    let n = disps.len() - 1;
    let ratio = if n > 0 { m::powf(disps[n] / d0, 1.0 / n as f64) } else { f64::NAN };
    Ok(StabilityProbe {
        div_at_origin_plus: dp,
        div_at_origin_minus: dm,
        div_integral_along_gamma: integral,
        prediction,
        empirical_contraction: ratio,
        displacements: disps,
        escaped,
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct EllMismatchRow {
    pub d: f64,
    /// ‖P_f^+(d,τ) - x(T^f_1+τ, τ; P_s(τ))‖, NaN when S̃⁺ is missed
    pub junction: f64,
    pub junction_bound: f64,
    /// sup over θ ∈ [0, T^f_1] of ‖x(θ+τ,τ;Q_s) - x(θ+τ,τ;P_s)‖
    pub first_arc: f64,
    pub first_arc_bound: f64,
    pub resolved: bool,
}

impl EllMismatchRow {
    pub fn holds(&self) -> bool {
        !self.resolved || (self.junction <= self.junction_bound && self.first_arc <= self.first_arc_bound)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct EllMismatchReport {
    pub tau: f64,
    pub delta: f64,
    pub mu1: f64,
    pub rows: Vec<EllMismatchRow>,
    pub violations: usize,
}

/// First-arc mismatch against d·δ^{-μ₁/2} and d·δ^{-μ₁}. Rows whose orbit misses S̃⁺ are
/// reported as unresolved.
pub fn ell_mismatch_suite(ctx: &LoopContext, d_grid: &[f64], tau: f64) -> Result<EllMismatchReport> {
    let delta = ctx.params.delta;
    let mu1 = ctx.params.mu1;
    let stable = ctx.leaves.leaf_orbit(tau, LeafKind::Stable, 1e-9)?;
    let mut rows = Vec::with_capacity(d_grid.len());
    for &d in d_grid {
        let jb = d * m::powf(delta, -0.5 * mu1);
        let fb = d * m::powf(delta, -mu1);
        if d == 0.0 {
            rows.push(EllMismatchRow { d, junction: 0.0, junction_bound: jb, first_arc: 0.0, first_arc_bound: fb, resolved: true });
            continue;
        }
        let (r, tr) = loop_orbit(ctx, d, tau, Direction::Fwd)?;
        if !r.segments_resolved {
            rows.push(EllMismatchRow { d, junction: f64::NAN, junction_bound: jb, first_arc: f64::NAN, first_arc_bound: fb, resolved: false });
            continue;
        }
        let t1 = r.segment_times[0];
        let pf = tr.point(tau + t1)?;
        let junction = pf.dist(stable.eval(tau + t1));
        let n = 256;
        let mut arc: f64 = 0.0;
        for k in 0..=n {
            let t = tau + t1 * k as f64 / n as f64;
            arc = arc.max(tr.point(t)?.dist(stable.eval(t)));
        }
        rows.push(EllMismatchRow { d, junction, junction_bound: jb, first_arc: arc, first_arc_bound: fb, resolved: true });
    }
    let violations = rows.iter().filter(|r| !r.holds()).count();
    Ok(EllMismatchReport { tau, delta, mu1, rows, violations })
}
