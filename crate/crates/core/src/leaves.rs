//! The unperturbed homoclinic loop and the perturbed stable/unstable leaf anchors.
//!
//! Anchors are found by shooting: a point η·v on the linear leaf is launched at time T and
//! integrated towards the section; T is adjusted until the section is hit exactly at the
//! requested time. Transverse launch errors are contracted by the saddle, so the anchor error
//! is dominated by the integrator tolerance.

use alloc::sync::Arc;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::flow::{integrate, Direction, FlowTol, Section, SectionDir, StopSet, Termination, Trajectory, SWITCH_ID};
use crate::geom::{m, Point2};
use crate::psys::{Curve, PiecewiseSystem, SaddleSpectrum, Side};

#[derive(Clone)]
pub struct Homoclinic {
    pub gamma: Curve,
    pub gamma0: Point2,
    /// c₀* with ‖γ(t)‖ ≤ (c₀*/4) e^{λ t} on each half line.
    pub decay_c0: f64,
    /// Γ sampled from t = -t_span to t_span and closed through the origin.
    pub polyline: Vec<Point2>,
    pub t_span: f64,
    /// +1 if the quarter turn of f points into E^in, -1 otherwise.
    pub inward_rotation: f64,
    /// Unit tangent of Ω⁰ at γ(0) pointing into E^in.
    pub w: Point2,
    pub lambda_u_minus: f64,
    pub lambda_s_plus: f64,
    pub analytic: bool,
    diam: f64,
}

impl core::fmt::Debug for Homoclinic {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        f.debug_struct("Homoclinic").field("gamma0", &self.gamma0).field("analytic", &self.analytic).finish()
    }
}

fn seg_dist(p: Point2, a: Point2, b: Point2) -> f64 {
    let ab = b - a;
    let l2 = ab.norm2();
    if l2 == 0.0 {
        return p.dist(a);
    }
    let s = ((p - a).dot(ab) / l2).clamp(0.0, 1.0);
    p.dist(a + s * ab)
}

impl Homoclinic {
    pub fn eval(&self, t: f64) -> Point2 {
        (self.gamma)(t)
    }

    pub fn diameter(&self) -> f64 {
        self.diam
    }

    pub fn distance(&self, p: Point2) -> f64 {
        let n = self.polyline.len();
        (0..n).map(|i| seg_dist(p, self.polyline[i], self.polyline[(i + 1) % n])).fold(f64::INFINITY, f64::min)
    }

    /// E^in membership by ray casting; `None` when `p` is numerically on Γ.
    pub fn inside(&self, p: Point2) -> Option<bool> {
        if self.distance(p) < 1e-9 * self.diam {
            return None;
        }
        let n = self.polyline.len();
        let mut inside = false;
        for i in 0..n {
            let a = self.polyline[i];
            let b = self.polyline[(i + 1) % n];
            if (a.x2 > p.x2) != (b.x2 > p.x2) {
                let x = a.x1 + (p.x2 - a.x2) / (b.x2 - a.x2) * (b.x1 - a.x1);
                if x > p.x1 {
                    inside = !inside;
                }
            }
        }
        Some(inside)
    }

    /// `n` points equally spaced in arclength with unit normals.
    pub fn uniform_arclength_samples(&self, n: usize) -> Vec<(Point2, Point2)> {
        let pl = &self.polyline;
        let k = pl.len();
        let mut cum = Vec::with_capacity(k + 1);
        cum.push(0.0);
        for i in 0..k {
            let l = cum[i] + pl[i].dist(pl[(i + 1) % k]);
            cum.push(l);
        }
        let total = cum[k];
        let mut out = Vec::with_capacity(n);
        let mut j = 0;
        for s in 0..n {
            let target = total * s as f64 / n as f64;
            while j + 1 < k && cum[j + 1] < target {
                j += 1;
            }
            let a = pl[j];
            let b = pl[(j + 1) % k];
            let len = cum[j + 1] - cum[j];
            let f = if len > 0.0 { (target - cum[j]) / len } else { 0.0 };
            let tang = (b - a).unit();
            out.push((a + f * (b - a), tang.rot90()));
        }
        out
    }
}

fn build(sys: &PiecewiseSystem, spec: &SaddleSpectrum, gamma: Curve, analytic: bool) -> Result<Homoclinic> {
    let lu = spec.lambda_u_minus;
    let ls = spec.lambda_s_plus;
    let g0 = gamma(0.0);
    // sample until ‖γ‖ is negligible on both ends
    let t_span = 30.0 / lu.min(-ls);
    let n = 4000;
    let mut polyline = Vec::with_capacity(n + 2);
    for i in 0..=n {
        let t = -t_span + 2.0 * t_span * i as f64 / n as f64;
        polyline.push(gamma(t));
    }
    polyline.push(Point2::ZERO);
    let mut c0: f64 = 0.0;
    for i in 0..=n {
        let t = -t_span + 2.0 * t_span * i as f64 / n as f64;
        let lam = if t < 0.0 { lu } else { ls };
        c0 = c0.max(4.0 * polyline[i].norm() * m::exp(-lam * t));
    }
    let stride = 8;
    let sub: Vec<Point2> = polyline.iter().step_by(stride).copied().collect();
    let mut diam: f64 = 0.0;
    for (i, a) in sub.iter().enumerate() {
        for b in &sub[i + 1..] {
            diam = diam.max(a.dist(*b));
        }
    }
    let mut h = Homoclinic {
        gamma,
        gamma0: g0,
        decay_c0: c0,
        polyline,
        t_span,
        inward_rotation: 1.0,
        w: Point2::ZERO,
        lambda_u_minus: lu,
        lambda_s_plus: ls,
        analytic,
        diam,
    };
    // orientation of the quarter turn and of the tangent w
    let probe = 1e-3 * diam;
    let f0 = sys.f(Side::Plus, g0);
    let r = f0.rot90().unit();
    h.inward_rotation = match h.inside(g0 + probe * r) {
        Some(true) => 1.0,
        Some(false) => -1.0,
        None => return Err(Error::ProbeAmbiguous),
    };
    let tang = sys.switch_grad(g0).rot90().unit();
    h.w = match h.inside(g0 + probe * tang) {
        Some(true) => tang,
        Some(false) => -tang,
        None => return Err(Error::ProbeAmbiguous),
    };
    // assumption K
    let n0 = sys.switch_grad(g0);
    let kp = n0.dot(sys.f(Side::Plus, g0));
    let km = n0.dot(sys.f(Side::Minus, g0));
    if !(kp > 0.0 && km > 0.0) {
        return Err(Error::NonTransversalCrossing { t: 0.0, at: g0, transversality: kp.min(km) });
    }
    for k in 1..=40 {
        let t = 0.25 * k as f64;
        if sys.side_of(h.eval(t)) == Some(Side::Minus) || sys.side_of(h.eval(-t)) == Some(Side::Plus) {
            return Err(Error::InvalidSystem("homoclinic does not follow the Ω⁻ then Ω⁺ pattern"));
        }
    }
    Ok(h)
}

/// γ for built-ins (closed form), otherwise by matching the unstable and stable branches on Ω⁰.
pub fn homoclinic_orbit(sys: &PiecewiseSystem, spec: &SaddleSpectrum) -> Result<Homoclinic> {
    let sys0 = sys.unperturbed();
    if let Some(g) = &sys0.gamma_exact {
        return build(&sys0, spec, g.clone(), true);
    }
    let tol = FlowTol::with_ode(1e-13, 1e-16);
    let eta = 1e-7;
    let stops = StopSet::horizon(200.0).switches(1).escape(1e6);
    let u = integrate(&sys0, 0.0, eta * spec.v_u_minus, Direction::Fwd, &stops, &tol)?;
    let s = integrate(&sys0, 0.0, eta * spec.v_s_plus, Direction::Bwd, &stops, &tol)?;
    for tr in [&u, &s] {
        match tr.termination {
            Termination::HitTarget(SWITCH_ID) => {}
            Termination::SlidingDetected { t, point } => return Err(Error::SlidingDetected { t, at: point }),
            _ => return Err(Error::NoConnection { mismatch: f64::INFINITY }),
        }
    }
    let mismatch = u.end_point().dist(s.end_point());
    if mismatch > 1e-9 {
        return Err(Error::NoConnection { mismatch });
    }
    let tu = u.t_end;
    let ts = s.t_end;
    let (lu, vu) = (spec.lambda_u_minus, spec.v_u_minus);
    let (ls, vs) = (spec.lambda_s_plus, spec.v_s_plus);
    let u = Arc::new(u);
    let s = Arc::new(s);
    let gamma: Curve = Arc::new(move |t: f64| {
        if t < 0.0 {
            let r = t + tu;
            if r >= 0.0 {
                u.point(r).unwrap_or(u.end_point())
            } else {
                eta * m::exp(lu * r) * vu
            }
        } else {
            let r = t + ts;
            if r <= 0.0 {
                s.point(r).unwrap_or(s.end_point())
            } else {
                eta * m::exp(ls * r) * vs
            }
        }
    });
    build(&sys0, spec, gamma, false)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum LeafKind {
    Stable,
    Unstable,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LeafConfig {
    pub eta0: f64,
    pub t_horizon: f64,
    /// Radius of the reference section L⁰ around γ(0).
    pub delta_l: f64,
    pub tol: FlowTol,
}

impl LeafConfig {
    pub fn for_system(spec: &SaddleSpectrum, gamma: &Homoclinic) -> Self {
        let lo = spec.lambda_u_plus.min(spec.lambda_u_minus).min(-spec.lambda_s_plus).min(-spec.lambda_s_minus);
        LeafConfig {
            eta0: 1e-4,
            t_horizon: 30.0f64.max(8.0 / lo),
            delta_l: 0.1 * gamma.diameter(),
            tol: FlowTol::with_ode(1e-13, 1e-16),
        }
    }
}

/// Orbit on a leaf produced by one shooting run.
#[derive(Clone, Debug)]
pub struct LeafOrbit {
    pub kind: LeafKind,
    /// Time at which the orbit sits on the target section.
    pub tau: f64,
    pub anchor: Point2,
    pub launch_time: f64,
    pub eta: f64,
    pub traj: Trajectory,
    lambda: f64,
    v: Point2,
}

impl LeafOrbit {
    /// Position at time t (stable: t ≥ τ, unstable: t ≤ τ). Past the launch point the linear
    /// leaf is used.
    pub fn eval(&self, t: f64) -> Point2 {
        let beyond = match self.kind {
            LeafKind::Stable => t > self.launch_time,
            LeafKind::Unstable => t < self.launch_time,
        };
        if beyond {
            return self.eta * m::exp(self.lambda * (t - self.launch_time)) * self.v;
        }
        let (a, b) = (self.traj.t_start.min(self.traj.t_end), self.traj.t_start.max(self.traj.t_end));
        let tc = t.clamp(a, b);
        self.traj.point(tc).unwrap_or(self.anchor)
    }
}

#[derive(Clone, Copy, Debug)]
enum Target {
    L0,
    /// S̃ segment with offset 1/L.
    Transversal(f64),
}

/// Solver context for anchors of one (possibly perturbed) system.
#[derive(Clone, Debug)]
pub struct Leaves {
    pub sys: PiecewiseSystem,
    pub spec: SaddleSpectrum,
    pub gamma: Homoclinic,
    pub cfg: LeafConfig,
}

/// Coordinates of x in the basis (e1, e2).
pub fn coords(x: Point2, e1: Point2, e2: Point2) -> (f64, f64) {
    let det = e1.wedge(e2);
    (x.wedge(e2) / det, e1.wedge(x) / det)
}

impl Leaves {
    pub fn new(sys: &PiecewiseSystem, spec: &SaddleSpectrum, gamma: &Homoclinic) -> Self {
        Leaves { sys: sys.clone(), spec: *spec, gamma: gamma.clone(), cfg: LeafConfig::for_system(spec, gamma) }
    }

    pub fn with_config(mut self, cfg: LeafConfig) -> Self {
        self.cfg = cfg;
        self
    }

    fn shoot_once(&self, kind: LeafKind, target: Target, launch: f64, eta: f64) -> Result<Trajectory> {
        let (v, dir) = match kind {
            LeafKind::Stable => (self.spec.v_s_plus, Direction::Bwd),
            LeafKind::Unstable => (self.spec.v_u_minus, Direction::Fwd),
        };
        let horizon = self.cfg.t_horizon + 20.0 * (1.0 + m::ln(1.0 / eta));
        let mut stops = StopSet::horizon(horizon).switches(1).escape(10.0 * (1.0 + self.gamma.diameter()));
        if let Target::Transversal(w) = target {
            // stable: coefficient along v_s^+ grows backwards to w; unstable: along v_u^- forwards
            let (e1, e2) = match kind {
                LeafKind::Stable => (self.spec.v_u_plus, self.spec.v_s_plus),
                LeafKind::Unstable => (self.spec.v_s_minus, self.spec.v_u_minus),
            };
            let f: crate::flow::SectionFn = Arc::new(move |x| coords(x, e1, e2).1 - w);
            let acc: crate::flow::AcceptFn = Arc::new(move |x| coords(x, e1, e2).0.abs() <= w);
            stops = stops.section(Section::new(1, f, SectionDir::Increasing, true).accept(acc));
        }
        let tr = integrate(&self.sys, launch, eta * v, dir, &stops, &self.cfg.tol)?;
        match (target, tr.termination) {
            (Target::L0, Termination::HitTarget(SWITCH_ID)) => {
                if tr.end_point().dist(self.gamma.gamma0) > self.cfg.delta_l {
                    return Err(Error::WrongSection);
                }
                Ok(tr)
            }
            (Target::Transversal(_), Termination::HitTarget(1)) => Ok(tr),
            (_, Termination::SlidingDetected { t, point }) => Err(Error::SlidingDetected { t, at: point }),
            (Target::L0, _) => Err(Error::WrongSection),
            (Target::Transversal(_), _) => Err(Error::MissedTransversal),
        }
    }

    fn shoot(&self, kind: LeafKind, target: Target, tau: f64, eta: f64) -> Result<LeafOrbit> {
        let mut launch = tau;
        let mut tr = self.shoot_once(kind, target, launch, eta)?;
        let mut miss = f64::INFINITY;
        for _ in 0..40 {
            let err = tau - tr.t_end;
            miss = err.abs();
            if miss <= 1e-13 * (1.0 + tau.abs()) {
                break;
            }
            launch += err;
            tr = self.shoot_once(kind, target, launch, eta)?;
        }
        if miss > 1e-10 * (1.0 + tau.abs()) {
            return Err(Error::NotConverged { what: "leaf launch time", residual: miss });
        }
        let (lambda, v) = match kind {
            LeafKind::Stable => (self.spec.lambda_s_plus, self.spec.v_s_plus),
            LeafKind::Unstable => (self.spec.lambda_u_minus, self.spec.v_u_minus),
        };
        Ok(LeafOrbit { kind, tau, anchor: tr.end_point(), launch_time: launch, eta, traj: tr, lambda, v })
    }

    /// Leaf orbit reaching L⁰ at time τ, launched at distance η from the origin.
    pub fn leaf_orbit(&self, tau: f64, kind: LeafKind, eta: f64) -> Result<LeafOrbit> {
        self.shoot(kind, Target::L0, tau, eta)
    }

    /// P_s(τ) or P_u(τ), Richardson-extrapolated over η₀, η₀/2, η₀/4.
    pub fn anchor_on_l0(&self, tau: f64, kind: LeafKind) -> Result<Point2> {
        let e = self.cfg.eta0;
        let p1 = self.shoot(kind, Target::L0, tau, e)?.anchor;
        let p2 = self.shoot(kind, Target::L0, tau, 0.5 * e)?.anchor;
        let p3 = self.shoot(kind, Target::L0, tau, 0.25 * e)?.anchor;
        let r23 = p3 + (1.0 / 3.0) * (p3 - p2);
        let r12 = p2 + (1.0 / 3.0) * (p2 - p1);
        let disagreement = r23.dist(r12);
        if disagreement > 1e-8 {
            return Err(Error::NotConverged { what: "leaf anchor extrapolation", residual: disagreement });
        }
        let p = r23;
        // put the extrapolated point back on Ω⁰
        let gv = self.sys.switch_value(p);
        let gr = self.sys.switch_grad(p);
        Ok(p - (gv / gr.norm2()) * gr)
    }

    pub fn p_s(&self, tau: f64) -> Result<Point2> {
        self.anchor_on_l0(tau, LeafKind::Stable)
    }

    pub fn p_u(&self, tau: f64) -> Result<Point2> {
        self.anchor_on_l0(tau, LeafKind::Unstable)
    }

    /// π_s(t) ∈ W^s(t) ∩ S̃⁺ or π_u(t) ∈ W^u(t) ∩ S̃⁻, with S̃ at offset 1/L.
    pub fn anchor_on_s(&self, t: f64, big_l: f64, kind: LeafKind) -> Result<Point2> {
        if !(big_l > 0.0) || self.cfg.eta0 >= 1.0 / big_l {
            return Err(Error::DegenerateInput("transversal offset must exceed the shooting offset"));
        }
        Ok(self.shoot(kind, Target::Transversal(1.0 / big_l), t, self.cfg.eta0)?.anchor)
    }

    /// Leaf orbit through π_s(τ) / π_u(τ) on S̃ at offset 1/L.
    pub fn leaf_orbit_on_s(&self, tau: f64, big_l: f64, kind: LeafKind, eta: f64) -> Result<LeafOrbit> {
        if !(big_l > 0.0) || eta >= 1.0 / big_l {
            return Err(Error::DegenerateInput("transversal offset must exceed the shooting offset"));
        }
        self.shoot(kind, Target::Transversal(1.0 / big_l), tau, eta)
    }

    /// sup over [τ - window, τ] (unstable) or [τ, τ + window] (stable) of ‖x - γ(· - τ)‖.
    pub fn shadowing_deviation(&self, tau: f64, kind: LeafKind, window: f64) -> Result<f64> {
        let orbit = self.leaf_orbit(tau, kind, 1e-9)?;
        let n = 400;
        let mut sup: f64 = 0.0;
        for k in 0..=n {
            let th = window * k as f64 / n as f64;
            let th = if kind == LeafKind::Stable { th } else { -th };
            sup = sup.max(orbit.eval(tau + th).dist(self.gamma.eval(th)));
        }
        Ok(sup)
    }
}

/// Free-function form of [`Leaves::anchor_on_l0`].
pub fn leaf_anchor_on_l0(leaves: &Leaves, tau: f64, kind: LeafKind) -> Result<Point2> {
    leaves.anchor_on_l0(tau, kind)
}

pub fn leaf_anchor_on_s(leaves: &Leaves, tau: f64, varpi: f64, kind: LeafKind) -> Result<Point2> {
    leaves.anchor_on_s(tau, m::ln(varpi).abs(), kind)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::builtins;
    use crate::psys::{compute_spectrum, OrientationHint};

    fn duffing() -> (PiecewiseSystem, SaddleSpectrum, Homoclinic) {
        let sys = builtins::duffing();
        let spec = compute_spectrum(&sys, &OrientationHint::default()).unwrap();
        let h = homoclinic_orbit(&sys, &spec).unwrap();
        (sys, spec, h)
    }

    #[test]
    fn duffing_loop_geometry() {
        let (_, _, h) = duffing();
        assert!((h.gamma0 - crate::geom::pt(1.5, 0.0)).norm() < 1e-15);
        assert!((h.diameter() - 1.5).abs() < 1e-3);
        assert_eq!(h.inside(crate::geom::pt(1.0, 0.0)), Some(true));
        assert_eq!(h.inside(crate::geom::pt(-0.1, 0.0)), Some(false));
        assert!((h.w - crate::geom::pt(-1.0, 0.0)).norm() < 1e-15);
        assert_eq!(h.inward_rotation, -1.0);
    }

    #[test]
    fn shooting_reproduces_analytic_loop() {
        let (sys, spec, h) = duffing();
        let mut s = sys.clone();
        s.gamma_exact = None;
        let num = homoclinic_orbit(&s, &spec).unwrap();
        assert!(num.gamma0.dist(h.gamma0) < 1e-9);
        for k in -8..=8 {
            let t = 0.75 * k as f64;
            assert!(num.eval(t).dist(h.eval(t)) < 1e-7, "t = {t}");
        }
    }

    #[test]
    fn unperturbed_anchors_sit_on_gamma0() {
        let (sys, spec, h) = duffing();
        let lv = Leaves::new(&sys, &spec, &h);
        for tau in [0.0, 1.0, 10.0] {
            assert!(lv.p_s(tau).unwrap().dist(h.gamma0) < 1e-8);
            assert!(lv.p_u(tau).unwrap().dist(h.gamma0) < 1e-8);
        }
    }
}
