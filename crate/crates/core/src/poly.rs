//! Bivariate polynomial fields, with optional trigonometric time factors for g.

use alloc::sync::Arc;
use alloc::vec::Vec;

use crate::geom::{m, pt, Mat2, Point2};
use crate::psys::PiecewiseSystem;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Trig {
    One,
    Cos,
    Sin,
}

/// c · x^i · y^j · trig(ω t + φ)
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Term {
    pub c: f64,
    pub i: u32,
    pub j: u32,
    pub trig: Trig,
    pub omega: f64,
    pub phase: f64,
}

impl Term {
    pub fn mono(c: f64, i: u32, j: u32) -> Term {
        Term { c, i, j, trig: Trig::One, omega: 0.0, phase: 0.0 }
    }

    fn time_factor(&self, t: f64) -> f64 {
        match self.trig {
            Trig::One => 1.0,
            Trig::Cos => m::cos(self.omega * t + self.phase),
            Trig::Sin => m::sin(self.omega * t + self.phase),
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct Poly {
    pub terms: Vec<Term>,
}

fn pw(x: f64, n: u32) -> f64 {
    m::powi(x, n as i32)
}

impl Poly {
    pub fn new(terms: Vec<Term>) -> Poly {
        Poly { terms }
    }

    pub fn eval(&self, t: f64, x: Point2) -> f64 {
        self.terms.iter().map(|k| k.c * pw(x.x1, k.i) * pw(x.x2, k.j) * k.time_factor(t)).sum()
    }

    pub fn grad(&self, t: f64, x: Point2) -> Point2 {
        let mut g = Point2::ZERO;
        for k in &self.terms {
            let tf = k.c * k.time_factor(t);
            if k.i > 0 {
                g.x1 += tf * k.i as f64 * pw(x.x1, k.i - 1) * pw(x.x2, k.j);
            }
            if k.j > 0 {
                g.x2 += tf * k.j as f64 * pw(x.x1, k.i) * pw(x.x2, k.j - 1);
            }
        }
        g
    }

    pub fn is_autonomous(&self) -> bool {
        self.terms.iter().all(|k| k.trig == Trig::One || k.omega == 0.0)
    }

    /// Common period of the time factors, when they share one.
    pub fn period(&self) -> Option<f64> {
        let om: Vec<f64> = self.terms.iter().filter(|k| k.trig != Trig::One && k.omega != 0.0).map(|k| k.omega.abs()).collect();
        let first = *om.first()?;
        if om.iter().all(|&w| (w - first).abs() < 1e-15 * first) {
            Some(2.0 * core::f64::consts::PI / first)
        } else {
            None
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct PolyField {
    pub x1: Poly,
    pub x2: Poly,
}

impl PolyField {
    pub fn eval(&self, t: f64, x: Point2) -> Point2 {
        pt(self.x1.eval(t, x), self.x2.eval(t, x))
    }

    pub fn jac(&self, t: f64, x: Point2) -> Mat2 {
        let a = self.x1.grad(t, x);
        let b = self.x2.grad(t, x);
        Mat2::new(a.x1, a.x2, b.x1, b.x2)
    }
}

/// Build a piecewise system from polynomial data. `g` terms may carry time factors.
pub fn poly_system(name: &str, f_plus: PolyField, f_minus: PolyField, switch: Poly, g: Option<PolyField>, eps: f64) -> PiecewiseSystem {
    let smooth = f_plus == f_minus;
    let fp = Arc::new(f_plus);
    let fm = Arc::new(f_minus);
    let sw = Arc::new(switch);
    let (a, b, c, d) = (fp.clone(), fp.clone(), fm.clone(), fm.clone());
    let (s1, s2) = (sw.clone(), sw);
    let mut sys = PiecewiseSystem::smooth(
        name,
        Arc::new(move |x| a.eval(0.0, x)),
        Some(Arc::new(move |x| b.jac(0.0, x))),
        Arc::new(move |x| s1.eval(0.0, x)),
        Some(Arc::new(move |x| s2.grad(0.0, x))),
    );
    if !smooth {
        sys.f_minus = Arc::new(move |x| c.eval(0.0, x));
        sys.jac_minus = Some(Arc::new(move |x| d.jac(0.0, x)));
    }
    if let Some(g) = g {
        let period = if g.x1.is_autonomous() && g.x2.is_autonomous() {
            None
        } else {
            let mut t = g.x1.terms.clone();
            t.extend(g.x2.terms.iter().copied());
            Poly::new(t).period()
        };
        let g = Arc::new(g);
        let gj = g.clone();
        sys = sys.with_perturbation(Arc::new(move |t, x, _e| g.eval(t, x)), Some(Arc::new(move |t, x, _e| gj.jac(t, x))), period);
    }
    sys.epsilon = eps;
    sys
}
