//! Barrier curves Z^{fwd/bwd, in/out} and the trapping regions K^fwd, K^bwd.
//!
//! Each curve is an orbit of one of the autonomous rotated fields f_a = f + ε𝒦 f^⊥ and
//! f_b = f - ε𝒦 f^⊥, started on L⁰ at distance β from γ(0).

use alloc::sync::Arc;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::flow::{integrate, Direction, FlowTol, Section, SectionDir, StopSet, Termination, Trajectory, SWITCH_ID};
use crate::geom::{m, Point2};
use crate::leaves::Homoclinic;
use crate::loopmap::chart::{AnchorSide, DirectedChart};
use crate::psys::{compute_spectrum, kappa_bound, OrientationHint, PiecewiseSystem, RateConstants, SaddleSpectrum};

const OUT_ID: u32 = 7;

/// Autonomous field f + rot·f^⊥ (rot = ±ε𝒦 times the inward orientation).
pub fn rotated_system(sys: &PiecewiseSystem, rot: f64) -> PiecewiseSystem {
    let mut r = sys.unperturbed();
    r.g = None;
    r.g_jac = None;
    r.gamma_exact = None;
    r.jac_plus = None;
    r.jac_minus = None;
    let fp = sys.f_plus.clone();
    let fm = sys.f_minus.clone();
    r.f_plus = Arc::new(move |x| {
        let f = fp(x);
        f + rot * f.rot90()
    });
    r.f_minus = Arc::new(move |x| {
        let f = fm(x);
        f + rot * f.rot90()
    });
    r
}

/// First L⁰ hits of the leaves of f_a and f_b.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ZetaPoints {
    pub u_a: Point2,
    pub s_a: Point2,
    pub u_b: Point2,
    pub s_b: Point2,
}

#[derive(Clone, Debug)]
pub struct BarrierCurve {
    pub name: &'static str,
    /// Ordered P → Q → R for the inner curves and O → P → Q for the outer ones.
    pub path: Vec<Point2>,
    pub p: Point2,
    pub q: Point2,
    /// R for the inner curves, O for the outer ones.
    pub end: Point2,
    rot: f64,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BandCheck {
    pub what: &'static str,
    pub value: f64,
    pub lo: f64,
    pub hi: f64,
}

impl BandCheck {
    pub fn ok(&self) -> bool {
        self.value >= self.lo && self.value <= self.hi
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FlowCheck {
    pub curve: &'static str,
    pub samples: usize,
    pub violations: usize,
    /// Smallest ⟨F, n⟩/‖F‖ with n the normal towards the required side.
    pub worst: f64,
}

#[derive(Clone, Debug)]
pub struct BarrierSet {
    pub beta: f64,
    pub mu: f64,
    pub eps: f64,
    pub kappa: f64,
    pub zeta: ZetaPoints,
    pub z_fwd_in: BarrierCurve,
    pub z_fwd_out: BarrierCurve,
    pub z_bwd_in: BarrierCurve,
    pub z_bwd_out: BarrierCurve,
    pub bands: Vec<BandCheck>,
    pub flow: Vec<FlowCheck>,
    /// min distance from Γ of all four curves
    pub gamma_clearance: f64,
    outer_fwd: Vec<Point2>,
    inner_fwd: Vec<Point2>,
    outer_bwd: Vec<Point2>,
    inner_bwd: Vec<Point2>,
    gamma: Homoclinic,
}

pub fn point_in_polygon(p: Point2, poly: &[Point2]) -> bool {
    let n = poly.len();
    let mut inside = false;
    for i in 0..n {
        let a = poly[i];
        let b = poly[(i + 1) % n];
        if (a.x2 > p.x2) != (b.x2 > p.x2) {
            let x = a.x1 + (p.x2 - a.x2) / (b.x2 - a.x2) * (b.x1 - a.x1);
            if x > p.x1 {
                inside = !inside;
            }
        }
    }
    inside
}

impl BarrierSet {
    pub fn in_k_fwd(&self, x: Point2) -> bool {
        point_in_polygon(x, &self.outer_fwd) && !point_in_polygon(x, &self.inner_fwd)
    }

    pub fn in_k_bwd(&self, x: Point2) -> bool {
        point_in_polygon(x, &self.outer_bwd) && !point_in_polygon(x, &self.inner_bwd)
    }

    /// K_A: the part of K inside the loop. The split uses Γ in place of W̃(τ).
    pub fn in_k_fwd_a(&self, x: Point2) -> bool {
        self.in_k_fwd(x) && self.gamma.inside(x) != Some(false)
    }

    pub fn in_k_fwd_b(&self, x: Point2) -> bool {
        self.in_k_fwd(x) && self.gamma.inside(x) != Some(true)
    }

    pub fn in_k_bwd_a(&self, x: Point2) -> bool {
        self.in_k_bwd(x) && self.gamma.inside(x) != Some(false)
    }

    pub fn in_k_bwd_b(&self, x: Point2) -> bool {
        self.in_k_bwd(x) && self.gamma.inside(x) != Some(true)
    }

    pub fn curves(&self) -> [&BarrierCurve; 4] {
        [&self.z_fwd_in, &self.z_fwd_out, &self.z_bwd_in, &self.z_bwd_out]
    }

    /// First band or flow-direction failure as a BandViolation.
    pub fn verify(&self) -> Result<()> {
        if let Some(b) = self.bands.iter().find(|b| !b.ok()) {
            return Err(Error::BandViolation { what: b.what, value: b.value, lo: b.lo, hi: b.hi });
        }
        if let Some(f) = self.flow.iter().find(|f| f.violations > 0) {
            return Err(Error::BandViolation { what: "flow direction", value: f.worst, lo: -1e-9, hi: f64::INFINITY });
        }
        Ok(())
    }
}

fn tol() -> FlowTol {
    FlowTol::with_ode(1e-12, 1e-15)
}

fn samples(tr: &Trajectory) -> Vec<Point2> {
    tr.sample_times(3).into_iter().filter_map(|t| tr.point(t).ok()).collect()
}

fn leaf_hit(sys: &PiecewiseSystem, spec: &SaddleSpectrum, gamma: &Homoclinic, unstable: bool) -> Result<Point2> {
    let eta = 1e-8;
    let (p0, dir) = if unstable { (eta * spec.v_u_minus, Direction::Fwd) } else { (eta * spec.v_s_plus, Direction::Bwd) };
    let stops = StopSet::horizon(60.0 / spec.lambda_u_minus.min(-spec.lambda_s_plus) + 40.0).switches(1);
    let tr = integrate(sys, 0.0, p0, dir, &stops, &tol())?;
    match tr.termination {
        Termination::HitTarget(SWITCH_ID) if tr.end_point().dist(gamma.gamma0) < 0.1 * gamma.diameter() => Ok(tr.end_point()),
        Termination::SlidingDetected { t, point } => Err(Error::SlidingDetected { t, at: point }),
        _ => Err(Error::WrongSection),
    }
}

/// Point of L⁰ on the given side with ‖P - γ(0)‖ = β.
fn start_point(chart: &DirectedChart, gamma0: Point2, beta: f64, side: AnchorSide) -> Result<Point2> {
    let (mut lo, mut hi) = (0.0, 4.0 * beta);
    let far = chart.point_at_distance(gamma0, hi, side)?;
    if far.dist(gamma0) < beta {
        return Err(Error::OutOfChart);
    }
    for _ in 0..80 {
        let mid = 0.5 * (lo + hi);
        if chart.point_at_distance(gamma0, mid, side)?.dist(gamma0) < beta {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    chart.point_at_distance(gamma0, 0.5 * (lo + hi), side)
}

fn inner_curve(name: &'static str, sys: &PiecewiseSystem, p: Point2, dir: Direction, rot: f64) -> Result<BarrierCurve> {
    let stops = StopSet::horizon(400.0).switches(2);
    let tr = integrate(sys, 0.0, p, dir, &stops, &tol())?;
    match tr.termination {
        Termination::HitTarget(SWITCH_ID) => {}
        Termination::SlidingDetected { t, point } => return Err(Error::SlidingDetected { t, at: point }),
        _ => return Err(Error::WrongSection),
    }
    Ok(BarrierCurve { name, path: samples(&tr), p, q: tr.crossings[0].point, end: tr.end_point(), rot })
}

fn out_section(e: Point2) -> Section {
    Section::new(OUT_ID, Arc::new(move |x: Point2| e.wedge(x)), SectionDir::Either, true).accept(Arc::new(move |x: Point2| x.dot(e) > 0.0))
}

fn outer_curve(name: &'static str, sys: &PiecewiseSystem, spec: &SaddleSpectrum, p: Point2, rot: f64) -> Result<BarrierCurve> {
    let run = |dir: Direction, e: Point2| -> Result<Trajectory> {
        let stops = StopSet::horizon(400.0).switches(1).section(out_section(e));
        let tr = integrate(sys, 0.0, p, dir, &stops, &tol())?;
        match tr.termination {
            Termination::HitTarget(OUT_ID) => Ok(tr),
            Termination::SlidingDetected { t, point } => Err(Error::SlidingDetected { t, at: point }),
            _ => Err(Error::WrongSection),
        }
    };
    let back = run(Direction::Bwd, spec.v_u_minus + spec.v_s_minus)?;
    let fwd = run(Direction::Fwd, spec.v_u_plus + spec.v_s_plus)?;
    let mut path = samples(&back);
    path.reverse();
    path.pop();
    path.extend(samples(&fwd));
    Ok(BarrierCurve { name, path, p, q: fwd.end_point(), end: back.end_point(), rot })
}

/// Ω⁰ from `a` to `b` sampled through the chart.
fn section_path(chart: &DirectedChart, a: Point2, b: Point2) -> Result<Vec<Point2>> {
    let sa = chart.arclength(a)?;
    let sb = chart.arclength(b)?;
    let n = 64;
    (1..n).map(|k| chart.curve(sa + (sb - sa) * k as f64 / n as f64)).collect()
}

fn polygons(chart: &DirectedChart, zin: &BarrierCurve, zout: &BarrierCurve) -> Result<(Vec<Point2>, Vec<Point2>)> {
    let mut outer = zout.path.clone();
    outer.push(Point2::ZERO);
    let mut inner = zin.path.clone();
    if zin.end.dist(zin.p) > 1e-12 {
        inner.extend(section_path(chart, zin.end, zin.p)?);
    }
    Ok((outer, inner))
}

fn band(what: &'static str, value: f64, beta: f64, sigma: f64, mu: f64) -> BandCheck {
    BandCheck { what, value, lo: m::powf(beta, sigma + mu), hi: m::powf(beta, sigma - mu) }
}

/// Normal of the curve at x pointing into the region, found by probing membership on both sides.
fn inward_normal(curve: &BarrierCurve, sys: &PiecewiseSystem, x: Point2, h: f64, inside: &dyn Fn(Point2) -> bool) -> Option<Point2> {
    let side = sys.side_of(x)?;
    let f = sys.f(side, x);
    let t = f + curve.rot * f.rot90();
    let n = t.rot90().unit();
    match (inside(x + h * n), inside(x - h * n)) {
        (true, false) => Some(n),
        (false, true) => Some(-n),
        _ => None,
    }
}

/// Sign test of the true field across a curve at 32 arclength samples and 8 times.
fn flow_check(curve: &BarrierCurve, sys: &PiecewiseSystem, beta: f64, into: bool, inside: &dyn Fn(Point2) -> bool) -> FlowCheck {
    let path = &curve.path;
    let mut cum = Vec::with_capacity(path.len());
    cum.push(0.0);
    for i in 1..path.len() {
        let l = cum[i - 1] + path[i].dist(path[i - 1]);
        cum.push(l);
    }
    let total = *cum.last().unwrap_or(&0.0);
    let period = sys.g_period.unwrap_or(2.0 * core::f64::consts::PI);
    let n = 32;
    let mut violations = 0;
    let mut worst = f64::INFINITY;
    let mut j = 0;
    for k in 0..n {
        let target = total * (k as f64 + 0.5) / n as f64;
        while j + 2 < cum.len() && cum[j + 1] < target {
            j += 1;
        }
        let len = cum[j + 1] - cum[j];
        let fr = if len > 0.0 { (target - cum[j]) / len } else { 0.0 };
        let x = path[j] + fr * (path[j + 1] - path[j]);
        let nrm = match inward_normal(curve, sys, x, 1e-4 * beta, inside) {
            Some(n) => n,
            None => {
                violations += 1;
                worst = f64::NEG_INFINITY;
                continue;
            }
        };
        let side = match sys.side_of(x) {
            Some(s) => s,
            None => continue,
        };
        for i in 0..8 {
            let t = period * i as f64 / 8.0;
            let fv = sys.field(side, t, x);
            let s = fv.dot(nrm) / fv.norm();
            let s = if into { s } else { -s };
            worst = worst.min(s);
            if s < -1e-9 {
                violations += 1;
            }
        }
    }
    FlowCheck { curve: curve.name, samples: n, violations, worst }
}

/// Builds the four barrier curves for the perturbed system `sys` (ε taken from `sys`).
pub fn build_barriers(sys: &PiecewiseSystem, gamma: &Homoclinic, chart: &DirectedChart, rates: &RateConstants, beta: f64, mu: f64) -> Result<BarrierSet> {
    let eps = sys.epsilon;
    if eps > 0.0 && beta < m::powf(eps, 0.5 * rates.sigma_fb) {
        return Err(Error::DegenerateInput("beta below eps^(sigma_fb/2)"));
    }
    let kappa = if eps > 0.0 { kappa_bound(sys, gamma)? } else { 0.0 };
    let rot = eps * kappa * gamma.inward_rotation;
    let sys_a = rotated_system(sys, rot);
    let sys_b = rotated_system(sys, -rot);
    let hint = OrientationHint::default();
    let spec_a = compute_spectrum(&sys_a, &hint)?;
    let spec_b = compute_spectrum(&sys_b, &hint)?;
    let zeta = ZetaPoints {
        u_a: leaf_hit(&sys_a, &spec_a, gamma, true)?,
        s_a: leaf_hit(&sys_a, &spec_a, gamma, false)?,
        u_b: leaf_hit(&sys_b, &spec_b, gamma, true)?,
        s_b: leaf_hit(&sys_b, &spec_b, gamma, false)?,
    };
    let g0 = gamma.gamma0;
    let p_in = start_point(chart, g0, beta, AnchorSide::Inner)?;
    let p_out = start_point(chart, g0, beta, AnchorSide::Outer)?;
    // P must lie beyond the ζ-point it is measured from
    let w = gamma.w;
    if (p_in - zeta.s_a).dot(w) <= 0.0 || (p_out - zeta.u_b).dot(w) >= 0.0 || (p_in - zeta.u_b).dot(w) <= 0.0 || (p_out - zeta.s_a).dot(w) >= 0.0 {
        return Err(Error::DegenerateInput("beta too small for the leaf splitting"));
    }
    let z_fwd_in = inner_curve("z_fwd_in", &sys_a, p_in, Direction::Fwd, rot)?;
    let z_fwd_out = outer_curve("z_fwd_out", &sys_b, &spec_b, p_out, -rot)?;
    let z_bwd_in = inner_curve("z_bwd_in", &sys_b, p_in, Direction::Bwd, -rot)?;
    let z_bwd_out = outer_curve("z_bwd_out", &sys_a, &spec_a, p_out, rot)?;

    let (outer_fwd, inner_fwd) = polygons(chart, &z_fwd_in, &z_fwd_out)?;
    let (outer_bwd, inner_bwd) = polygons(chart, &z_bwd_in, &z_bwd_out)?;

    let r = rates;
    let mut bands = Vec::new();
    bands.push(band("|Q_fwd_in|", z_fwd_in.q.norm(), beta, r.sigma_fwd_plus, mu));
    bands.push(band("|Q_fwd_out|", z_fwd_out.q.norm(), beta, r.sigma_fwd_plus, mu));
    bands.push(band("|R_fwd_in - gamma0|", z_fwd_in.end.dist(g0), beta, r.sigma_fwd, mu));
    bands.push(band("|O_fwd_out|", z_fwd_out.end.norm(), beta, r.sigma_bwd_minus, mu));
    bands.push(band("|Q_bwd_in|", z_bwd_in.q.norm(), beta, r.sigma_bwd_minus, mu));
    bands.push(band("|Q_bwd_out|", z_bwd_out.q.norm(), beta, r.sigma_bwd_minus, mu));
    bands.push(band("|R_bwd_in - gamma0|", z_bwd_in.end.dist(g0), beta, r.sigma_bwd, mu));
    bands.push(band("|O_bwd_out|", z_bwd_out.end.norm(), beta, r.sigma_bwd_minus, mu));

    let curves = [&z_fwd_in, &z_fwd_out, &z_bwd_in, &z_bwd_out];
    let mut clearance = f64::INFINITY;
    let mut reach: f64 = 0.0;
    for c in curves {
        for (i, x) in c.path.iter().enumerate() {
            if i % 4 != 0 {
                continue;
            }
            let d = gamma.distance(*x);
            clearance = clearance.min(d);
            reach = reach.max(d);
        }
    }
    bands.push(BandCheck { what: "K reach from Gamma", value: reach, lo: 0.0, hi: m::powf(beta, r.sigma_lo - mu) });

    let mut set = BarrierSet {
        beta,
        mu,
        eps,
        kappa,
        zeta,
        z_fwd_in,
        z_fwd_out,
        z_bwd_in,
        z_bwd_out,
        bands,
        flow: Vec::new(),
        gamma_clearance: clearance,
        outer_fwd,
        inner_fwd,
        outer_bwd,
        inner_bwd,
        gamma: gamma.clone(),
    };
    let kf = |x: Point2| set.in_k_fwd(x);
    let kb = |x: Point2| set.in_k_bwd(x);
    let flow = alloc::vec![
        flow_check(&set.z_fwd_in, sys, beta, true, &kf),
        flow_check(&set.z_fwd_out, sys, beta, true, &kf),
        flow_check(&set.z_bwd_in, sys, beta, false, &kb),
        flow_check(&set.z_bwd_out, sys, beta, false, &kb),
    ];
    set.flow = flow;
    Ok(set)
}
