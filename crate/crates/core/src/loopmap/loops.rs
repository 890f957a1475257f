//! Forward and backward loop maps around Γ with their segment decomposition.

use alloc::sync::Arc;
use alloc::vec::Vec;

use crate::dichotomy::{build_dichotomy, ConstantGrid, DichotomyData};
use crate::error::{Error, Result};
use crate::flow::{integrate, AcceptFn, Direction, FlowTol, Section, SectionDir, SectionFn, StopSet, Termination, Trajectory, SWITCH_ID};
use crate::geom::{m, Point2};
use crate::leaves::{coords, homoclinic_orbit, Homoclinic, LeafConfig, LeafKind, Leaves};
use crate::loopmap::barriers::{build_barriers, BarrierSet};
use crate::loopmap::chart::{AnchorSide, DirectedChart};
use crate::loopmap::params::SessionParams;
use crate::psys::{compute_spectrum, rate_constants, OrientationHint, PiecewiseSystem, RateConstants, SaddleSpectrum, Side};

const S_PLUS: u32 = 1;
const S_MINUS: u32 = 2;

/// Everything a loop run needs, built once per (system, ε, μ, β).
#[derive(Clone, Debug)]
pub struct LoopContext {
    pub sys: PiecewiseSystem,
    pub spec: SaddleSpectrum,
    pub rates: RateConstants,
    pub gamma: Homoclinic,
    pub chart: DirectedChart,
    pub leaves: Leaves,
    pub dich: DichotomyData,
    pub params: SessionParams,
    pub barriers: BarrierSet,
}

impl LoopContext {
    pub fn new(sys: &PiecewiseSystem, mu: f64) -> Result<Self> {
        Self::with_beta(sys, mu, None)
    }

    pub fn with_beta(sys: &PiecewiseSystem, mu: f64, beta: Option<f64>) -> Result<Self> {
        Self::with_options(sys, mu, beta, None)
    }

    /// `tol` replaces the leaf and loop integration tolerances.
    pub fn with_options(sys: &PiecewiseSystem, mu: f64, beta: Option<f64>, tol: Option<FlowTol>) -> Result<Self> {
        sys.validate()?;
        let spec = compute_spectrum(sys, &OrientationHint::default())?;
        let rates = rate_constants(&spec);
        let gamma = homoclinic_orbit(&sys.unperturbed(), &spec)?;
        let chart = DirectedChart::for_loop(sys, gamma.gamma0)?;
        let mut leaves = Leaves::new(sys, &spec, &gamma);
        if let Some(tol) = tol {
            let cfg = LeafConfig { tol, ..leaves.cfg };
            leaves = leaves.with_config(cfg);
        }
        let dich = build_dichotomy(sys, &spec, sys.epsilon, ConstantGrid::default())?;
        let params = SessionParams::derive(&leaves, &dich, &rates, mu, beta)?;
        let barriers = build_barriers(sys, &gamma, &chart, &rates, params.beta, mu)?;
        Ok(LoopContext { sys: sys.clone(), spec, rates, gamma, chart, leaves, dich, params, barriers })
    }

    fn horizon(&self, d: f64) -> f64 {
        10.0 * (m::ln(d).abs() + 10.0) / self.rates.lambda_lo
    }

    fn transversal(&self, id: u32) -> Section {
        let w = 1.0 / self.params.big_l;
        let (e1, e2) = if id == S_PLUS { (self.spec.v_u_plus, self.spec.v_s_plus) } else { (self.spec.v_s_minus, self.spec.v_u_minus) };
        let f: SectionFn = Arc::new(move |x| coords(x, e1, e2).1 - w);
        let acc: AcceptFn = Arc::new(move |x| coords(x, e1, e2).0.abs() <= w);
        Section::new(id, f, SectionDir::Either, false).accept(acc)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct LoopResult {
    pub direction: Direction,
    pub d: f64,
    pub tau: f64,
    /// Start point Q_s(d, τ) (forward) or Q_u(d, τ) (backward).
    pub start: Point2,
    /// |𝒯_{±½} - τ|
    pub t_half: f64,
    /// |𝒯_{±1} - τ|
    pub t_one: f64,
    pub p_half: Point2,
    pub p_one: Point2,
    /// ‖𝒫_{±½}‖
    pub d_half: f64,
    /// 𝒟(𝒫₁, P_u(𝒯₁)) forward, 𝒟(𝒫₋₁, P_s(𝒯₋₁)) backward
    pub d_one: f64,
    /// T_1..T_4; NaN when an S̃ segment is missed.
    pub segment_times: [f64; 4],
    /// D_1..D_4 (magnitudes); NaN when an S̃ segment is missed.
    pub segment_disps: [f64; 4],
    pub segments_resolved: bool,
    pub sup_dev_first_half: f64,
    pub sup_dev_second_half: f64,
}

impl LoopResult {
    /// Signed crossing times 𝒯_{±½}, 𝒯_{±1}.
    pub fn t_half_abs(&self) -> f64 {
        self.tau + self.direction.sign() * self.t_half
    }

    pub fn t_one_abs(&self) -> f64 {
        self.tau + self.direction.sign() * self.t_one
    }
}

fn first_hit(tr: &Trajectory, id: u32, a: f64, b: f64) -> Option<(f64, Point2)> {
    let (lo, hi) = (a.min(b), a.max(b));
    tr.hits_of(id).find(|h| h.t > lo && h.t < hi).map(|h| (h.t, h.point))
}

fn sup_dev(tr: &Trajectory, other: &dyn Fn(f64) -> Point2, a: f64, b: f64) -> Result<f64> {
    let n = 256;
    let mut sup: f64 = 0.0;
    for k in 0..=n {
        let t = a + (b - a) * k as f64 / n as f64;
        sup = sup.max(tr.point(t)?.dist(other(t)));
    }
    Ok(sup)
}

fn check_region(tr: &Trajectory, inside: &dyn Fn(Point2) -> bool) -> Result<()> {
    let n = 256;
    for k in 0..=n {
        let t = tr.t_start + (tr.t_end - tr.t_start) * k as f64 / n as f64;
        let x = tr.point(t)?;
        if !inside(x) {
            return Err(Error::LeftRegion { t, at: x });
        }
    }
    Ok(())
}

/// Shared body of both loop directions.
fn run_loop(ctx: &LoopContext, d: f64, tau: f64, dir: Direction) -> Result<(LoopResult, Trajectory)> {
    if !(d > 0.0) || d > ctx.params.delta {
        return Err(Error::DegenerateInput("d must lie in (0, delta]"));
    }
    let fwd = dir == Direction::Fwd;
    let (first_kind, second_kind) = if fwd { (LeafKind::Stable, LeafKind::Unstable) } else { (LeafKind::Unstable, LeafKind::Stable) };
    let lv = &ctx.leaves;
    let anchor = lv.anchor_on_l0(tau, first_kind)?;
    let q = ctx.chart.point_at_distance(anchor, d, AnchorSide::Inner)?;
    let stops = StopSet::horizon(ctx.horizon(d))
        .switches(2)
        .escape(10.0 * (1.0 + ctx.gamma.diameter()))
        .section(ctx.transversal(S_PLUS))
        .section(ctx.transversal(S_MINUS));
    let tr = integrate(&ctx.sys, tau, q, dir, &stops, &lv.cfg.tol)?;
    match tr.termination {
        Termination::HitTarget(SWITCH_ID) => {}
        Termination::SlidingDetected { t, point } => return Err(Error::SlidingDetected { t, at: point }),
        _ => {
            let t = tr.t_end;
            return Err(Error::LeftRegion { t, at: tr.end_point() });
        }
    }
    // side pattern: Ω⁺ then Ω⁻ forward, Ω⁻ then Ω⁺ backward
    let (s1, s2) = if fwd { (Side::Plus, Side::Minus) } else { (Side::Minus, Side::Plus) };
    let c1 = tr.crossings[0];
    let c2 = tr.crossings[1];
    if c1.from_side != s1 || c1.to_side != s2 || c2.from_side != s2 {
        return Err(Error::LeftRegion { t: c1.t, at: c1.point });
    }
    // 𝒫_{±½} must be on L^in
    if ctx.chart.arclength(c1.point)? <= 0.0 || ctx.gamma.inside(c1.point) != Some(true) {
        return Err(Error::LeftRegion { t: c1.t, at: c1.point });
    }
    let region = |x: Point2| if fwd { ctx.barriers.in_k_fwd(x) } else { ctx.barriers.in_k_bwd(x) };
    check_region(&tr, &region)?;

    let (t_half_abs, t_one_abs) = (c1.t, c2.t);
    let p_one = c2.point;
    let target = lv.anchor_on_l0(t_one_abs, second_kind)?;
    let d_one = ctx.chart.arclength(target)? - ctx.chart.arclength(p_one)?;

    let first = lv.leaf_orbit(tau, first_kind, 1e-9)?;
    let second = lv.leaf_orbit(t_one_abs, second_kind, 1e-9)?;
    let dev1 = sup_dev(&tr, &|t| first.eval(t), tau, t_half_abs)?;
    let dev2 = sup_dev(&tr, &|t| second.eval(t), t_half_abs, t_one_abs)?;

    // segments through S̃: S̃⁺ then S̃⁻ forward, the reverse backward
    let (id1, id2) = if fwd { (S_PLUS, S_MINUS) } else { (S_MINUS, S_PLUS) };
    let h1 = first_hit(&tr, id1, tau, t_half_abs);
    let h2 = first_hit(&tr, id2, t_half_abs, t_one_abs);
    let mut times = [f64::NAN; 4];
    let mut disps = [f64::NAN; 4];
    disps[1] = c1.point.norm();
    disps[3] = d_one;
    let resolved = h1.is_some() && h2.is_some();
    if let (Some((ta, pa)), Some((tb, pb))) = (h1, h2) {
        let big_l = ctx.params.big_l;
        let sg = dir.sign();
        times = [sg * (ta - tau), sg * (t_half_abs - ta), sg * (tb - t_half_abs), sg * (t_one_abs - tb)];
        let offset = |id: u32, p: Point2, t: f64, kind: LeafKind| -> Result<f64> {
            let pi = lv.anchor_on_s(t, big_l, kind)?;
            let (e1, e2) = if id == S_PLUS { (ctx.spec.v_u_plus, ctx.spec.v_s_plus) } else { (ctx.spec.v_s_minus, ctx.spec.v_u_minus) };
            Ok((coords(p, e1, e2).0 - coords(pi, e1, e2).0).abs())
        };
        disps[0] = offset(id1, pa, ta, first_kind)?;
        disps[2] = offset(id2, pb, tb, second_kind)?;
    }
    let res = LoopResult {
        direction: dir,
        d,
        tau,
        start: q,
        t_half: (t_half_abs - tau).abs(),
        t_one: (t_one_abs - tau).abs(),
        p_half: c1.point,
        p_one,
        d_half: c1.point.norm(),
        d_one,
        segment_times: times,
        segment_disps: disps,
        segments_resolved: resolved,
        sup_dev_first_half: dev1,
        sup_dev_second_half: dev2,
    };
    Ok((res, tr))
}

/// A loop together with the integrated orbit from the start point to 𝒫_{±1}.
pub fn loop_orbit(ctx: &LoopContext, d: f64, tau: f64, dir: Direction) -> Result<(LoopResult, Trajectory)> {
    run_loop(ctx, d, tau, dir)
}

/// One forward loop from Q_s(d, τ) back to L⁰.
pub fn loop_forward(ctx: &LoopContext, d: f64, tau: f64) -> Result<LoopResult> {
    run_loop(ctx, d, tau, Direction::Fwd).map(|r| r.0)
}

/// One backward loop from Q_u(d, τ). Integrating backward in time is the same as integrating
/// the time-reversed system forward.
pub fn loop_backward(ctx: &LoopContext, d: f64, tau: f64) -> Result<LoopResult> {
    run_loop(ctx, d, tau, Direction::Bwd).map(|r| r.0)
}

/// ‖x(τ, 𝒯₁; 𝒫₁) - Q_s(d, τ)‖ after a forward loop.
pub fn roundtrip_check(ctx: &LoopContext, d: f64, tau: f64) -> Result<f64> {
    let r = loop_forward(ctx, d, tau)?;
    let t1 = r.t_one_abs();
    let stops = StopSet::horizon(t1 - tau);
    let back = integrate(&ctx.sys, t1, r.p_one, Direction::Bwd, &stops, &ctx.leaves.cfg.tol)?;
    if back.termination != Termination::TimeHorizon {
        return Err(Error::LeftRegion { t: back.t_end, at: back.end_point() });
    }
    Ok(back.point(tau)?.dist(r.start))
}

/// Forward loops over a d grid (one τ), in grid order.
pub fn loop_batch(ctx: &LoopContext, ds: &[f64], tau: f64, dir: Direction) -> Vec<Result<LoopResult>> {
    ds.iter()
        .map(|&d| match dir {
            Direction::Fwd => loop_forward(ctx, d, tau),
            Direction::Bwd => loop_backward(ctx, d, tau),
        })
        .collect()
}
