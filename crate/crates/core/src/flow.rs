//! Event-driven integration of the piecewise system.
//!
//! Each accepted step is scanned for sign changes of `G` and of the caller's section
//! functions; the earliest event is refined on the dense polynomial and polished with exact
//! Runge-Kutta trial steps. At a switching event the stepper restarts on the new side.
//! Backward integration runs the time-reversed system `y' = -F(-s, y)`.

use alloc::sync::Arc;
use alloc::vec::Vec;
use core::cell::Cell;

use crate::error::{Error, Result};
use crate::geom::{Mat2, Point2};
use crate::ode::{DenseStep, Dop853, Tolerances};
use crate::psys::{PiecewiseSystem, Side};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Direction {
    Fwd,
    Bwd,
}

impl Direction {
    pub fn sign(self) -> f64 {
        match self {
            Direction::Fwd => 1.0,
            Direction::Bwd => -1.0,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FlowTol {
    pub ode: Tolerances,
    /// |G| accepted at a refined crossing.
    pub crossing: f64,
    pub transversality_floor: f64,
    /// Interior dense samples scanned per step.
    pub samples: usize,
}

impl Default for FlowTol {
    fn default() -> Self {
        FlowTol { ode: Tolerances::default(), crossing: 1e-12, transversality_floor: 1e-10, samples: 4 }
    }
}

impl FlowTol {
    pub fn with_ode(rtol: f64, atol: f64) -> Self {
        FlowTol { ode: Tolerances::new(rtol, atol), ..Default::default() }
    }
}

/// Section id reserved for the switching curve.
pub const SWITCH_ID: u32 = 0;
const CONVERGE_ID: u32 = u32::MAX;
const ESCAPE_ID: u32 = u32::MAX - 1;

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Termination {
    TimeHorizon,
    HitTarget(u32),
    SlidingDetected { t: f64, point: Point2 },
    LeftDomain,
    Converged,
}

/// Crossing direction measured along the direction of integration.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SectionDir {
    Increasing,
    Decreasing,
    Either,
}

pub type SectionFn = Arc<dyn Fn(Point2) -> f64 + Send + Sync>;
pub type AcceptFn = Arc<dyn Fn(Point2) -> bool + Send + Sync>;

#[derive(Clone)]
pub struct Section {
    pub id: u32,
    pub func: SectionFn,
    pub dir: SectionDir,
    pub accept: Option<AcceptFn>,
    pub terminal: bool,
}

impl Section {
    pub fn new(id: u32, func: SectionFn, dir: SectionDir, terminal: bool) -> Self {
        assert!(id != SWITCH_ID, "section id 0 is reserved for the switching curve");
        Section { id, func, dir, accept: None, terminal }
    }

    pub fn accept(mut self, f: AcceptFn) -> Self {
        self.accept = Some(f);
        self
    }
}

#[derive(Clone, Default)]
pub struct StopSet {
    /// Length of the time window (always positive, direction given separately).
    pub horizon: f64,
    pub sections: Vec<Section>,
    /// Stop (HitTarget(SWITCH_ID)) after this many switching crossings.
    pub max_switches: Option<usize>,
    /// Stop (Converged) once ‖x‖ drops below this radius.
    pub converge_radius: Option<f64>,
    /// Stop (LeftDomain) once ‖x‖ exceeds this radius.
    pub escape_radius: Option<f64>,
}

impl StopSet {
    pub fn horizon(h: f64) -> Self {
        StopSet { horizon: h, ..Default::default() }
    }

    pub fn section(mut self, s: Section) -> Self {
        self.sections.push(s);
        self
    }

    pub fn switches(mut self, n: usize) -> Self {
        self.max_switches = Some(n);
        self
    }

    pub fn converge(mut self, r: f64) -> Self {
        self.converge_radius = Some(r);
        self
    }

    pub fn escape(mut self, r: f64) -> Self {
        self.escape_radius = Some(r);
        self
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CrossingEvent {
    pub t: f64,
    pub point: Point2,
    /// (∇G)ᵀF of the incoming side's field.
    pub transversality: f64,
    pub from_side: Side,
    pub to_side: Side,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SectionHit {
    pub id: u32,
    pub t: f64,
    pub point: Point2,
}

#[derive(Clone, Debug)]
pub struct Segment<const N: usize> {
    pub side: Side,
    /// Internal (integration) time at the segment ends.
    pub s_start: f64,
    pub s_end: f64,
    pub steps: Vec<DenseStep<N>>,
}

#[derive(Clone, Debug)]
pub struct Trajectory<const N: usize = 2> {
    pub direction: Direction,
    pub segments: Vec<Segment<N>>,
    pub crossings: Vec<CrossingEvent>,
    /// Set when the orbit starts on Ω⁰.
    pub start_crossing: Option<CrossingEvent>,
    pub hits: Vec<SectionHit>,
    pub t_start: f64,
    pub t_end: f64,
    pub y_start: [f64; N],
    pub y_end: [f64; N],
    pub termination: Termination,
    pub n_steps: usize,
}

impl<const N: usize> Trajectory<N> {
    fn s_of(&self, t: f64) -> f64 {
        self.direction.sign() * t
    }

    pub fn contains(&self, t: f64) -> bool {
        let (a, b) = if self.t_start <= self.t_end { (self.t_start, self.t_end) } else { (self.t_end, self.t_start) };
        let slack = 1e-12 * (1.0 + a.abs().max(b.abs()));
        t >= a - slack && t <= b + slack
    }

    pub fn state(&self, t: f64) -> Result<[f64; N]> {
        if !self.contains(t) {
            return Err(Error::IntervalOutOfRange { t });
        }
        if t == self.t_end {
            return Ok(self.y_end);
        }
        if t == self.t_start {
            return Ok(self.y_start);
        }
        let s = self.s_of(t);
        let k = self.segments.partition_point(|seg| seg.s_end < s).min(self.segments.len() - 1);
        let seg = &self.segments[k];
        if seg.steps.is_empty() {
            return Ok(self.y_end);
        }
        let j = seg.steps.partition_point(|st| st.t1() < s).min(seg.steps.len() - 1);
        Ok(seg.steps[j].eval(s))
    }

    pub fn point(&self, t: f64) -> Result<Point2> {
        Ok(Point2::from_slice(&self.state(t)?))
    }

    pub fn side_at(&self, t: f64) -> Option<Side> {
        let s = self.s_of(t);
        self.segments.iter().find(|seg| s >= seg.s_start && s <= seg.s_end).map(|seg| seg.side)
    }

    pub fn end_point(&self) -> Point2 {
        Point2::from_slice(&self.y_end)
    }

    pub fn start_point(&self) -> Point2 {
        Point2::from_slice(&self.y_start)
    }

    /// Physical times of all step nodes plus `per_step` interior points, in integration order.
    pub fn sample_times(&self, per_step: usize) -> Vec<f64> {
        let sg = self.direction.sign();
        let mut out = Vec::new();
        out.push(self.t_start);
        for seg in &self.segments {
            for st in &seg.steps {
                let a = st.t0.max(seg.s_start);
                let b = st.t1().min(seg.s_end);
                if b <= a {
                    continue;
                }
                for k in 1..=per_step + 1 {
                    out.push(sg * (a + (b - a) * k as f64 / (per_step + 1) as f64));
                }
            }
        }
        out
    }

    pub fn hits_of(&self, id: u32) -> impl Iterator<Item = &SectionHit> {
        self.hits.iter().filter(move |h| h.id == id)
    }
}

fn side_sign_value(sys: &PiecewiseSystem, side: Side, x: Point2) -> f64 {
    side.sign() * sys.switch_value(x)
}

/// Illinois iteration on [a, b] with fa, fb of opposite sign.
pub(crate) fn illinois(f: &mut dyn FnMut(f64) -> f64, mut a: f64, mut fa: f64, mut b: f64, mut fb: f64) -> f64 {
    let mut side = 0i32;
    for _ in 0..200 {
        let c = (a * fb - b * fa) / (fb - fa);
        let c = if c.is_finite() && c > a.min(b) && c < a.max(b) { c } else { 0.5 * (a + b) };
        let fc = f(c);
        if fc == 0.0 {
            return c;
        }
        if (fc > 0.0) == (fb > 0.0) {
            b = c;
            fb = fc;
            if side == -1 {
                fa *= 0.5;
            }
            side = -1;
        } else {
            a = c;
            fa = fc;
            if side == 1 {
                fb *= 0.5;
            }
            side = 1;
        }
        if (b - a).abs() <= 4.0 * f64::EPSILON * (1.0 + a.abs().max(b.abs())) {
            break;
        }
    }
    if fa.abs() < fb.abs() {
        a
    } else {
        b
    }
}

#[derive(Clone, Copy)]
enum Monitor {
    Switch,
    Sec(usize),
}

fn crosses(dir: SectionDir, prev: f64, cur: f64) -> bool {
    let inc = prev < 0.0 && cur >= 0.0;
    let dec = prev > 0.0 && cur <= 0.0;
    match dir {
        SectionDir::Increasing => inc,
        SectionDir::Decreasing => dec,
        SectionDir::Either => inc || dec,
    }
}

/// Integrate an extended state whose first two components are the position.
///
/// `rhs(side, t, y)` is the physical-time right-hand side.
pub fn integrate_ext<const N: usize, R>(
    sys: &PiecewiseSystem,
    rhs: R,
    tau: f64,
    y0: [f64; N],
    dir: Direction,
    stops: &StopSet,
    tol: &FlowTol,
    start_side: Option<Side>,
) -> Result<Trajectory<N>>
where
    R: Fn(Side, f64, &[f64; N]) -> [f64; N],
{
    assert!(N >= 2);
    let sg = dir.sign();
    let p0 = Point2::from_slice(&y0);
    let phys = |side: Side, t: f64, x: Point2| sys.field(side, t, x);

    let mut sections: Vec<Section> = stops.sections.clone();
    if let Some(r) = stops.converge_radius {
        let r2 = r * r;
        sections.push(Section { id: CONVERGE_ID, func: Arc::new(move |x| x.norm2() - r2), dir: SectionDir::Decreasing, accept: None, terminal: true });
    }
    if let Some(r) = stops.escape_radius {
        let r2 = r * r;
        sections.push(Section { id: ESCAPE_ID, func: Arc::new(move |x| x.norm2() - r2), dir: SectionDir::Increasing, accept: None, terminal: true });
    }

    // initial side
    let mut start_crossing = None;
    let side0 = if let Some(s) = start_side {
        s
    } else if sys.switch_value(p0).abs() > tol.crossing {
        sys.side_of(p0).unwrap()
    } else {
        let n = sys.switch_grad(p0);
        let a = sg * n.dot(phys(Side::Plus, tau, p0));
        let b = sg * n.dot(phys(Side::Minus, tau, p0));
        let fl = tol.transversality_floor;
        let chosen = if a > fl && b > fl {
            Side::Plus
        } else if a < -fl && b < -fl {
            Side::Minus
        } else if a < -fl && b > fl {
            return Ok(Trajectory {
                direction: dir,
                segments: Vec::new(),
                crossings: Vec::new(),
                start_crossing: None,
                hits: Vec::new(),
                t_start: tau,
                t_end: tau,
                y_start: y0,
                y_end: y0,
                termination: Termination::SlidingDetected { t: tau, point: p0 },
                n_steps: 0,
            });
        } else {
            return Err(Error::NonTransversalCrossing { t: tau, at: p0, transversality: a.abs().min(b.abs()) });
        };
        let from = chosen.other();
        start_crossing = Some(CrossingEvent {
            t: tau,
            point: p0,
            transversality: n.dot(phys(from, tau, p0)),
            from_side: from,
            to_side: chosen,
        });
        chosen
    };

    let side_cell = Cell::new(side0);
    let internal = |s: f64, y: &[f64; N]| -> [f64; N] {
        let mut d = rhs(side_cell.get(), sg * s, y);
        if sg < 0.0 {
            for v in d.iter_mut() {
                *v = -*v;
            }
        }
        d
    };
    let s0 = sg * tau;
    let s_final = s0 + stops.horizon;
    let mut stepper = Dop853::new(internal, s0, y0, tol.ode);

    let mut segments: Vec<Segment<N>> = Vec::new();
    let mut cur = Segment { side: side0, s_start: s0, s_end: s0, steps: Vec::new() };
    let mut crossings = Vec::new();
    let mut hits = Vec::new();
    let n_sec = sections.len();

    let eval_monitors = |side: Side, x: Point2, out: &mut Vec<f64>| {
        out.clear();
        out.push(side_sign_value(sys, side, x));
        for s in sections.iter() {
            out.push((s.func)(x));
        }
    };
    let mut prev_vals: Vec<f64> = Vec::with_capacity(n_sec + 1);
    eval_monitors(side0, p0, &mut prev_vals);
    // never trigger on the start point itself
    for v in prev_vals.iter_mut().skip(1) {
        if v.abs() < tol.crossing {
            *v = 0.0;
        }
    }
    let mut just_restarted = start_crossing.is_some() || prev_vals[0].abs() <= tol.crossing;
    let mut cur_vals: Vec<f64> = Vec::with_capacity(n_sec + 1);

    let finish = |segments: Vec<Segment<N>>, crossings, hits, y_end: [f64; N], s_end: f64, term, n_steps| Trajectory {
        direction: dir,
        segments,
        crossings,
        start_crossing,
        hits,
        t_start: tau,
        t_end: sg * s_end,
        y_start: y0,
        y_end,
        termination: term,
        n_steps,
    };

    if stops.horizon <= 0.0 {
        segments.push(cur);
        return Ok(finish(segments, crossings, hits, y0, s0, Termination::TimeHorizon, 0));
    }

    loop {
        let sa = stepper.t();
        let ya = stepper.y();
        let dense = stepper.step(s_final)?;
        let sb = dense.t1();
        cur.steps.push(dense.clone());
        let side = side_cell.get();

        let ns = tol.samples + 1;
        let mut prev_s = sa;
        let mut k = 1;
        let mut event: Option<(Monitor, f64)> = None;
        'scan: while k <= ns {
            let sk = if k == ns { sb } else { sa + (sb - sa) * k as f64 / ns as f64 };
            let xk = Point2::from_slice(&dense.eval(sk));
            eval_monitors(side, xk, &mut cur_vals);
            // earliest event in (prev_s, sk]
            let mut best: Option<(Monitor, f64)> = None;
            let consider = |mon: Monitor, root: f64, best: &mut Option<(Monitor, f64)>| {
                if best.map_or(true, |(_, b)| root < b) {
                    *best = Some((mon, root));
                }
            };
            if cur_vals[0] < 0.0 {
                if just_restarted && prev_s == sa && prev_vals[0] <= tol.crossing {
                    let p = Point2::from_slice(&ya);
                    return Err(Error::NonTransversalCrossing { t: sg * sa, at: p, transversality: prev_vals[0] });
                }
                let mut f = |s: f64| side_sign_value(sys, side, Point2::from_slice(&dense.eval(s)));
                let r = illinois(&mut f, prev_s, prev_vals[0].max(f64::MIN_POSITIVE), sk, cur_vals[0]);
                consider(Monitor::Switch, r, &mut best);
            }
            for (i, sec) in sections.iter().enumerate() {
                let (pv, cv) = (prev_vals[i + 1], cur_vals[i + 1]);
                if crosses(sec.dir, pv, cv) {
                    let func = sec.func.clone();
                    let mut f = |s: f64| func(Point2::from_slice(&dense.eval(s)));
                    let r = illinois(&mut f, prev_s, pv, sk, cv);
                    consider(Monitor::Sec(i), r, &mut best);
                }
            }
            match best {
                None => {
                    core::mem::swap(&mut prev_vals, &mut cur_vals);
                    prev_s = sk;
                    k += 1;
                }
                Some((Monitor::Sec(i), r)) if !sections[i].terminal || !accepted(&sections[i], &dense, r) => {
                    if accepted(&sections[i], &dense, r) {
                        hits.push(SectionHit { id: sections[i].id, t: sg * r, point: Point2::from_slice(&dense.eval(r)) });
                    }
                    // resume scanning just after the hit
                    let xr = Point2::from_slice(&dense.eval(r));
                    eval_monitors(side, xr, &mut prev_vals);
                    prev_vals[i + 1] = 0.0;
                    prev_s = r;
                }
                Some(ev) => {
                    event = Some(ev);
                    break 'scan;
                }
            }
        }
        just_restarted = false;

        let (mon, r) = match event {
            None => {
                if sb >= s_final {
                    cur.s_end = sb;
                    let y_end = stepper.y();
                    segments.push(cur);
                    let n = stepper.n_steps;
                    return Ok(finish(segments, crossings, hits, y_end, sb, Termination::TimeHorizon, n));
                }
                cur.s_end = sb;
                continue;
            }
            Some(e) => e,
        };

        // exact state at the event by trial steps from the step start
        stepper.reset(sa, ya);
        let value = |mon: Monitor, x: Point2| match mon {
            Monitor::Switch => sys.switch_value(x),
            Monitor::Sec(i) => (sections[i].func)(x),
        };
        let grad = |mon: Monitor, x: Point2| match mon {
            Monitor::Switch => sys.switch_grad(x),
            Monitor::Sec(i) => crate::psys::fd_gradient(&*sections[i].func, x),
        };
        let mut s_ev = r;
        let mut y_ev = stepper.trial(s_ev - sa);
        for _ in 0..3 {
            let x = Point2::from_slice(&y_ev);
            let v = value(mon, x);
            let vel = Point2::from_slice(&stepper.eval_rhs(s_ev, &y_ev));
            let dv = grad(mon, x).dot(vel);
            if dv == 0.0 || v == 0.0 {
                break;
            }
            let ds = -v / dv;
            if !(ds.abs() <= (sb - sa)) {
                break;
            }
            s_ev += ds;
            y_ev = stepper.trial(s_ev - sa);
            if ds.abs() < 1e-15 * (1.0 + s_ev.abs()) {
                break;
            }
        }
        let x_ev = Point2::from_slice(&y_ev);
        cur.s_end = s_ev;

        match mon {
            Monitor::Sec(i) => {
                let id = sections[i].id;
                hits.push(SectionHit { id, t: sg * s_ev, point: x_ev });
                segments.push(cur);
                let term = match id {
                    CONVERGE_ID => Termination::Converged,
                    ESCAPE_ID => Termination::LeftDomain,
                    _ => Termination::HitTarget(id),
                };
                if id == CONVERGE_ID || id == ESCAPE_ID {
                    hits.pop();
                }
                let n = stepper.n_steps;
                return Ok(finish(segments, crossings, hits, y_ev, s_ev, term, n));
            }
            Monitor::Switch => {
                let t_ev = sg * s_ev;
                if sys.switch_value(x_ev).abs() > tol.crossing.max(1e3 * f64::EPSILON) {
                    return Err(Error::NotConverged { what: "crossing refinement", residual: sys.switch_value(x_ev).abs() });
                }
                let n = sys.switch_grad(x_ev);
                let tin = n.dot(phys(side, t_ev, x_ev));
                let to = side.other();
                let tout = n.dot(phys(to, t_ev, x_ev));
                let fl = tol.transversality_floor;
                if tin.abs() < fl || tout.abs() < fl {
                    return Err(Error::NonTransversalCrossing { t: t_ev, at: x_ev, transversality: tin.abs().min(tout.abs()) });
                }
                segments.push(cur);
                if tin * tout < 0.0 {
                    let nst = stepper.n_steps;
                    return Ok(finish(
                        segments,
                        crossings,
                        hits,
                        y_ev,
                        s_ev,
                        Termination::SlidingDetected { t: t_ev, point: x_ev },
                        nst,
                    ));
                }
                crossings.push(CrossingEvent { t: t_ev, point: x_ev, transversality: tin, from_side: side, to_side: to });
                if let Some(m) = stops.max_switches {
                    if crossings.len() >= m {
                        let nst = stepper.n_steps;
                        return Ok(finish(segments, crossings, hits, y_ev, s_ev, Termination::HitTarget(SWITCH_ID), nst));
                    }
                }
                side_cell.set(to);
                stepper.reset(s_ev, y_ev);
                cur = Segment { side: to, s_start: s_ev, s_end: s_ev, steps: Vec::new() };
                eval_monitors(to, x_ev, &mut prev_vals);
                for v in prev_vals.iter_mut().skip(1) {
                    if v.abs() < tol.crossing {
                        *v = 0.0;
                    }
                }
                just_restarted = true;
                if s_ev >= s_final {
                    segments.push(cur);
                    let nst = stepper.n_steps;
                    return Ok(finish(segments, crossings, hits, y_ev, s_ev, Termination::TimeHorizon, nst));
                }
            }
        }
    }
}

fn accepted<const N: usize>(sec: &Section, dense: &DenseStep<N>, r: f64) -> bool {
    match &sec.accept {
        None => true,
        Some(a) => a(Point2::from_slice(&dense.eval(r))),
    }
}

pub fn integrate(sys: &PiecewiseSystem, tau: f64, p: Point2, dir: Direction, stops: &StopSet, tol: &FlowTol) -> Result<Trajectory> {
    integrate_from(sys, tau, p, dir, stops, tol, None)
}

pub fn integrate_from(
    sys: &PiecewiseSystem,
    tau: f64,
    p: Point2,
    dir: Direction,
    stops: &StopSet,
    tol: &FlowTol,
    side: Option<Side>,
) -> Result<Trajectory> {
    if !p.is_finite() {
        return Err(Error::DegenerateInput("non-finite initial point"));
    }
    integrate_ext(sys, |sd, t, y: &[f64; 2]| sys.field(sd, t, Point2::from_slice(y)).to_array(), tau, p.to_array(), dir, stops, tol, side)
}

/// Φ_{τ2,τ1}(q): the state at τ2 of the orbit through q at τ1.
pub fn flow_map(sys: &PiecewiseSystem, tau1: f64, tau2: f64, q: Point2, tol: &FlowTol) -> Result<Point2> {
    if tau1 == tau2 {
        return Ok(q);
    }
    let dir = if tau2 > tau1 { Direction::Fwd } else { Direction::Bwd };
    let tr = integrate(sys, tau1, q, dir, &StopSet::horizon((tau2 - tau1).abs()), tol)?;
    match tr.termination {
        Termination::SlidingDetected { t, point } => Err(Error::SlidingDetected { t, at: point }),
        _ => Ok(tr.end_point()),
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FundamentalMatrix {
    pub t: f64,
    pub s: f64,
    pub matrix: Mat2,
    /// ∫_s^t tr Df(x(r)) dr
    pub trace_integral: f64,
    /// base point x(t)
    pub x: Point2,
}

/// X(t, s) along `base`, restarted across crossings with the new side's Jacobian.
pub fn variational_flow(sys: &PiecewiseSystem, base: &Trajectory, t: f64, s: f64, tol: &FlowTol) -> Result<FundamentalMatrix> {
    if !base.contains(t) {
        return Err(Error::IntervalOutOfRange { t });
    }
    if !base.contains(s) {
        return Err(Error::IntervalOutOfRange { t: s });
    }
    let xs = base.point(s)?;
    if t == s {
        return Ok(FundamentalMatrix { t, s, matrix: Mat2::IDENTITY, trace_integral: 0.0, x: xs });
    }
    let side = base.side_at(s);
    let dir = if t > s { Direction::Fwd } else { Direction::Bwd };
    let y0 = [xs.x1, xs.x2, 1.0, 0.0, 0.0, 1.0, 0.0];
    let rhs = |sd: Side, r: f64, y: &[f64; 7]| -> [f64; 7] {
        let x = Point2::from_slice(y);
        let f = sys.field(sd, r, x);
        let j = sys.field_jac(sd, r, x);
        let xm = Mat2::new(y[2], y[3], y[4], y[5]);
        let d = j.mul(&xm);
        [f.x1, f.x2, d.a11, d.a12, d.a21, d.a22, j.trace()]
    };
    // start side: follow the base trajectory when s sits on Ω⁰
    let start_side = if sys.switch_value(xs).abs() <= tol.crossing { None } else { side };
    let tr = integrate_ext(sys, rhs, s, y0, dir, &StopSet::horizon((t - s).abs()), tol, start_side)?;
    if let Termination::SlidingDetected { t, point } = tr.termination {
        return Err(Error::SlidingDetected { t, at: point });
    }
    let y = tr.y_end;
    Ok(FundamentalMatrix { t, s, matrix: Mat2::new(y[2], y[3], y[4], y[5]), trace_integral: y[6], x: Point2::from_slice(&y) })
}
