//! Arclength chart on Ω⁰ and the directed distance 𝒟(Q, P) = ℓ(P) - ℓ(Q).

use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::geom::{pt, Point2};
use crate::ode::{solve_dense, DenseSolution, Tolerances};
use crate::psys::PiecewiseSystem;

/// Which way from the anchor a point at distance d is placed.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum AnchorSide {
    /// Towards the origin (ℓ decreases), the E^in side of γ(0).
    Inner,
    Outer,
}

/// Ω⁰ parametrized by arclength s from the origin, positive towards γ(0).
#[derive(Clone, Debug)]
pub struct DirectedChart {
    sys: PiecewiseSystem,
    orient: f64,
    pos: DenseSolution<2>,
    neg: DenseSolution<2>,
    /// Coarse samples (s, c(s)) for Newton starts.
    table: Vec<(f64, Point2)>,
    pub s_min: f64,
    pub s_max: f64,
    pub tol: f64,
}

fn branch(sys: &PiecewiseSystem, orient: f64, len: f64) -> Result<DenseSolution<2>> {
    let s = sys.clone();
    let tol = Tolerances { rtol: 1e-13, atol: 1e-15, h_max: 0.05 * len.max(1e-3), max_steps: 200_000 };
    solve_dense(
        move |_t, y: &[f64; 2]| {
            let g = s.switch_grad(pt(y[0], y[1]));
            let n = g.norm();
            if n == 0.0 {
                return [f64::NAN, f64::NAN];
            }
            let v = (orient / n) * g.rot90();
            [v.x1, v.x2]
        },
        0.0,
        [0.0, 0.0],
        len,
        tol,
    )
}

impl DirectedChart {
    /// Chart covering [-neg_len, pos_len]; `gamma0` fixes the orientation.
    pub fn new(sys: &PiecewiseSystem, gamma0: Point2, pos_len: f64, neg_len: f64) -> Result<Self> {
        let g = sys.switch_grad(Point2::ZERO);
        let first = if g.rot90().dot(gamma0) >= 0.0 { 1.0 } else { -1.0 };
        for orient in [first, -first] {
            let pos = branch(sys, orient, pos_len)?;
            let neg = branch(sys, -orient, neg_len)?;
            let mut c = DirectedChart {
                sys: sys.clone(),
                orient,
                pos,
                neg,
                table: Vec::new(),
                s_min: -neg_len,
                s_max: pos_len,
                tol: 1e-9 * (1.0 + gamma0.norm()),
            };
            let n = 4000;
            for i in 0..=n {
                let s = c.s_min + (c.s_max - c.s_min) * i as f64 / n as f64;
                let p = c.curve(s)?;
                c.table.push((s, p));
            }
            if c.arclength(gamma0).is_ok() {
                return Ok(c);
            }
        }
        Err(Error::OutOfChart)
    }

    /// Default chart for a loop through `gamma0`: twice its distance forward, half backward.
    pub fn for_loop(sys: &PiecewiseSystem, gamma0: Point2) -> Result<Self> {
        let r = gamma0.norm();
        DirectedChart::new(sys, gamma0, 2.0 * r, 0.5 * r)
    }

    pub fn orientation(&self) -> f64 {
        self.orient
    }

    pub fn curve(&self, s: f64) -> Result<Point2> {
        let y = if s >= 0.0 { self.pos.eval(s) } else { self.neg.eval(-s) };
        y.map(|y| pt(y[0], y[1])).ok_or(Error::OutOfChart)
    }

    /// Oriented unit tangent at c(s).
    pub fn tangent(&self, s: f64) -> Result<Point2> {
        let c = self.curve(s)?;
        Ok(self.orient * self.sys.switch_grad(c).unit().rot90())
    }

    /// ℓ(Q) for Q on Ω⁰.
    pub fn arclength(&self, q: Point2) -> Result<f64> {
        let gq = self.sys.switch_value(q).abs();
        if gq > self.tol * self.sys.switch_grad(q).norm().max(1e-300) {
            return Err(Error::OffSection { residual: gq });
        }
        let (mut s, _) = self
            .table
            .iter()
            .map(|&(s, p)| (s, p.dist(q)))
            .fold((0.0, f64::INFINITY), |a, b| if b.1 < a.1 { b } else { a });
        for _ in 0..50 {
            let step = (q - self.curve(s)?).dot(self.tangent(s)?);
            s = (s + step).clamp(self.s_min, self.s_max);
            if step.abs() < 1e-15 * (1.0 + s.abs()) {
                break;
            }
        }
        let res = self.curve(s)?.dist(q);
        if res > 10.0 * self.tol {
            return Err(Error::OutOfChart);
        }
        Ok(s)
    }

    /// Point with arclength ℓ(anchor) ∓ d, projected onto Ω⁰.
    pub fn point_at_distance(&self, anchor: Point2, d: f64, side: AnchorSide) -> Result<Point2> {
        let s0 = self.arclength(anchor)?;
        let s = match side {
            AnchorSide::Inner => s0 - d,
            AnchorSide::Outer => s0 + d,
        };
        if s < self.s_min || s > self.s_max {
            return Err(Error::OutOfChart);
        }
        let mut p = self.curve(s)?;
        for _ in 0..3 {
            let g = self.sys.switch_grad(p);
            p = p - (self.sys.switch_value(p) / g.norm2()) * g;
        }
        Ok(p)
    }
}

/// 𝒟(Q, P) = ℓ(P) - ℓ(Q).
pub fn directed_distance(chart: &DirectedChart, q: Point2, p: Point2) -> Result<f64> {
    Ok(chart.arclength(p)? - chart.arclength(q)?)
}

pub fn point_at_distance(chart: &DirectedChart, anchor: Point2, d: f64, side: AnchorSide) -> Result<Point2> {
    chart.point_at_distance(anchor, d, side)
}
