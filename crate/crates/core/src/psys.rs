//! Piecewise-smooth planar systems `x' = f±(x) + ε g(t, x, ε)` split by `G = 0`,
//! their saddle spectrum at the origin and the derived rate constants.

use alloc::string::String;
use alloc::sync::Arc;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::geom::{m, pt, Mat2, Point2};
use crate::leaves::Homoclinic;

pub type VecField = Arc<dyn Fn(Point2) -> Point2 + Send + Sync>;
pub type JacField = Arc<dyn Fn(Point2) -> Mat2 + Send + Sync>;
pub type Perturbation = Arc<dyn Fn(f64, Point2, f64) -> Point2 + Send + Sync>;
pub type PertJac = Arc<dyn Fn(f64, Point2, f64) -> Mat2 + Send + Sync>;
pub type ScalarField = Arc<dyn Fn(Point2) -> f64 + Send + Sync>;
pub type Curve = Arc<dyn Fn(f64) -> Point2 + Send + Sync>;

/// `Plus` is the open set `{G > 0}`, `Minus` is `{G < 0}`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Side {
    Plus,
    Minus,
}

impl Side {
    pub fn other(self) -> Side {
        match self {
            Side::Plus => Side::Minus,
            Side::Minus => Side::Plus,
        }
    }

    pub fn sign(self) -> f64 {
        match self {
            Side::Plus => 1.0,
            Side::Minus => -1.0,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Side::Plus => "plus",
            Side::Minus => "minus",
        }
    }
}

#[derive(Clone)]
pub struct PiecewiseSystem {
    pub name: String,
    pub f_plus: VecField,
    pub f_minus: VecField,
    pub jac_plus: Option<JacField>,
    pub jac_minus: Option<JacField>,
    pub g: Option<Perturbation>,
    pub g_jac: Option<PertJac>,
    pub switch: ScalarField,
    pub grad_switch: Option<VecField>,
    pub epsilon: f64,
    pub holder_alpha: f64,
    pub r_order: f64,
    /// Time period of `g` when known (used for sampling grids).
    pub g_period: Option<f64>,
    /// Closed-form homoclinic when the system is a built-in.
    pub gamma_exact: Option<Curve>,
}

impl core::fmt::Debug for PiecewiseSystem {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        f.debug_struct("PiecewiseSystem")
            .field("name", &self.name)
            .field("epsilon", &self.epsilon)
            .field("perturbed", &self.g.is_some())
            .finish()
    }
}

/// Central 4th-order difference step as a function of the base point.
fn fd_step(x: Point2) -> f64 {
    m::cbrt(f64::EPSILON) * (1.0 + x.norm())
}

pub fn fd_jacobian(f: &dyn Fn(Point2) -> Point2, x: Point2) -> Mat2 {
    let h = fd_step(x);
    let col = |e: Point2| {
        let a = f(x + 2.0 * h * e);
        let b = f(x + h * e);
        let c = f(x - h * e);
        let d = f(x - 2.0 * h * e);
        (1.0 / (12.0 * h)) * (8.0 * (b - c) - (a - d))
    };
    Mat2::from_cols(col(pt(1.0, 0.0)), col(pt(0.0, 1.0)))
}

pub fn fd_gradient(g: &dyn Fn(Point2) -> f64, x: Point2) -> Point2 {
    let h = fd_step(x);
    let d = |e: Point2| {
        (8.0 * (g(x + h * e) - g(x - h * e)) - (g(x + 2.0 * h * e) - g(x - 2.0 * h * e))) / (12.0 * h)
    };
    pt(d(pt(1.0, 0.0)), d(pt(0.0, 1.0)))
}

impl PiecewiseSystem {
    /// A system with the same field on both sides.
    pub fn smooth(name: &str, f: VecField, jac: Option<JacField>, switch: ScalarField, grad: Option<VecField>) -> Self {
        PiecewiseSystem {
            name: name.into(),
            f_plus: f.clone(),
            f_minus: f,
            jac_plus: jac.clone(),
            jac_minus: jac,
            g: None,
            g_jac: None,
            switch,
            grad_switch: grad,
            epsilon: 0.0,
            holder_alpha: 1.0,
            r_order: 2.0,
            g_period: None,
            gamma_exact: None,
        }
    }

    pub fn with_epsilon(&self, eps: f64) -> Self {
        let mut s = self.clone();
        s.epsilon = eps;
        s
    }

    pub fn with_perturbation(&self, g: Perturbation, g_jac: Option<PertJac>, period: Option<f64>) -> Self {
        let mut s = self.clone();
        s.g = Some(g);
        s.g_jac = g_jac;
        s.g_period = period;
        s
    }

    /// Same system with the perturbation dropped (ε = 0 semantics).
    pub fn unperturbed(&self) -> Self {
        self.with_epsilon(0.0)
    }

    pub fn is_smooth_hint(&self) -> bool {
        Arc::ptr_eq(&self.f_plus, &self.f_minus)
    }

    pub fn switch_value(&self, x: Point2) -> f64 {
        (self.switch)(x)
    }

    pub fn switch_grad(&self, x: Point2) -> Point2 {
        match &self.grad_switch {
            Some(g) => g(x),
            None => fd_gradient(&*self.switch, x),
        }
    }

    pub fn side_of(&self, x: Point2) -> Option<Side> {
        let v = self.switch_value(x);
        if v > 0.0 {
            Some(Side::Plus)
        } else if v < 0.0 {
            Some(Side::Minus)
        } else {
            None
        }
    }

    pub fn f(&self, side: Side, x: Point2) -> Point2 {
        match side {
            Side::Plus => (self.f_plus)(x),
            Side::Minus => (self.f_minus)(x),
        }
    }

    pub fn jac_f(&self, side: Side, x: Point2) -> Mat2 {
        let j = match side {
            Side::Plus => &self.jac_plus,
            Side::Minus => &self.jac_minus,
        };
        match j {
            Some(j) => j(x),
            None => {
                let f = match side {
                    Side::Plus => self.f_plus.clone(),
                    Side::Minus => self.f_minus.clone(),
                };
                fd_jacobian(&*f, x)
            }
        }
    }

    /// g(t, x, ε) without the ε factor; zero when no perturbation is attached.
    pub fn pert(&self, t: f64, x: Point2) -> Point2 {
        match &self.g {
            Some(g) => g(t, x, self.epsilon),
            None => Point2::ZERO,
        }
    }

    pub fn pert_at(&self, t: f64, x: Point2, eps: f64) -> Point2 {
        match &self.g {
            Some(g) => g(t, x, eps),
            None => Point2::ZERO,
        }
    }

    pub fn pert_jac(&self, t: f64, x: Point2) -> Mat2 {
        match (&self.g, &self.g_jac) {
            (None, _) => Mat2::ZERO,
            (Some(_), Some(j)) => j(t, x, self.epsilon),
            (Some(g), None) => {
                let g = g.clone();
                let eps = self.epsilon;
                fd_jacobian(&move |y| g(t, y, eps), x)
            }
        }
    }

    /// Full right-hand side on the given side.
    pub fn field(&self, side: Side, t: f64, x: Point2) -> Point2 {
        let f = self.f(side, x);
        if self.epsilon == 0.0 || self.g.is_none() {
            f
        } else {
            f + self.epsilon * self.pert(t, x)
        }
    }

    pub fn field_jac(&self, side: Side, t: f64, x: Point2) -> Mat2 {
        let j = self.jac_f(side, x);
        if self.epsilon == 0.0 || self.g.is_none() {
            j
        } else {
            j.add(&self.pert_jac(t, x).scale(self.epsilon))
        }
    }

    /// Check the standing invariants: G(0)=0 with ∇G(0)≠0, F0, G and Jacobian consistency.
    pub fn validate(&self) -> Result<()> {
        let o = Point2::ZERO;
        if self.switch_value(o).abs() > 1e-12 {
            return Err(Error::InvalidSystem("G(0) != 0"));
        }
        if self.switch_grad(o).norm() < 1e-12 {
            return Err(Error::InvalidSystem("grad G(0) = 0"));
        }
        if self.f(Side::Plus, o).norm() > 1e-12 || self.f(Side::Minus, o).norm() > 1e-12 {
            return Err(Error::InvalidSystem("origin is not an equilibrium of f (F0)"));
        }
        if !(self.epsilon >= 0.0) || !self.epsilon.is_finite() {
            return Err(Error::InvalidSystem("epsilon must be finite and >= 0"));
        }
        if !(self.holder_alpha > 0.0 && self.holder_alpha <= 1.0) {
            return Err(Error::InvalidSystem("holder_alpha must lie in (0, 1]"));
        }
        if !(self.r_order > 1.0) {
            return Err(Error::InvalidSystem("smoothness order r must exceed 1"));
        }
        if self.g.is_some() {
            for k in 0..16 {
                let t = -7.5 + k as f64;
                for eps in [0.0, self.epsilon] {
                    if self.pert_at(t, o, eps).norm() > 1e-12 {
                        return Err(Error::InvalidSystem("g(t, 0, eps) != 0 (assumption G)"));
                    }
                }
            }
        }
        for side in [Side::Plus, Side::Minus] {
            for p in [pt(0.3, -0.2), pt(-0.4, 0.1), pt(1.1, 0.35), pt(0.0, 0.0)] {
                let f = match side {
                    Side::Plus => self.f_plus.clone(),
                    Side::Minus => self.f_minus.clone(),
                };
                let fd = fd_jacobian(&*f, p);
                let j = self.jac_f(side, p);
                if j.sub(&fd).max_abs() > 1e-6 * (1.0 + fd.max_abs()) {
                    return Err(Error::InvalidSystem("Jacobian disagrees with finite differences"));
                }
            }
        }
        Ok(())
    }

    /// Time-reversed system `y' = -F(-s, y)`.
    pub fn reversed(&self) -> PiecewiseSystem {
        let fp = self.f_plus.clone();
        let fm = self.f_minus.clone();
        let mut r = self.clone();
        r.name = alloc::format!("{}-reversed", self.name);
        r.f_plus = Arc::new(move |x| -fp(x));
        r.f_minus = Arc::new(move |x| -fm(x));
        r.jac_plus = self.jac_plus.clone().map(|j| -> JacField { Arc::new(move |x| j(x).scale(-1.0)) });
        r.jac_minus = self.jac_minus.clone().map(|j| -> JacField { Arc::new(move |x| j(x).scale(-1.0)) });
        r.g = self.g.clone().map(|g| -> Perturbation { Arc::new(move |s, x, e| -g(-s, x, e)) });
        r.g_jac = self.g_jac.clone().map(|j| -> PertJac { Arc::new(move |s, x, e| j(-s, x, e).scale(-1.0)) });
        r.gamma_exact = self.gamma_exact.clone().map(|c| -> Curve { Arc::new(move |s| c(-s)) });
        r
    }
}

/// Optional homoclinic direction data used to check the eigenvector orientation.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct OrientationHint {
    /// lim γ'/|γ'| as t → -∞
    pub departure: Option<Point2>,
    /// lim γ'/|γ'| as t → +∞
    pub arrival: Option<Point2>,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SaddleSpectrum {
    pub lambda_s_plus: f64,
    pub lambda_u_plus: f64,
    pub lambda_s_minus: f64,
    pub lambda_u_minus: f64,
    pub v_s_plus: Point2,
    pub v_u_plus: Point2,
    pub v_s_minus: Point2,
    pub v_u_minus: Point2,
    pub c_u_perp_plus: f64,
    pub c_u_perp_minus: f64,
    pub c_s_perp_plus: f64,
    pub c_s_perp_minus: f64,
    pub grad_g0: Point2,
}

impl SaddleSpectrum {
    pub fn lambda_u(&self, side: Side) -> f64 {
        match side {
            Side::Plus => self.lambda_u_plus,
            Side::Minus => self.lambda_u_minus,
        }
    }

    pub fn lambda_s(&self, side: Side) -> f64 {
        match side {
            Side::Plus => self.lambda_s_plus,
            Side::Minus => self.lambda_s_minus,
        }
    }

    pub fn v_u(&self, side: Side) -> Point2 {
        match side {
            Side::Plus => self.v_u_plus,
            Side::Minus => self.v_u_minus,
        }
    }

    pub fn v_s(&self, side: Side) -> Point2 {
        match side {
            Side::Plus => self.v_s_plus,
            Side::Minus => self.v_s_minus,
        }
    }
}

const C_PERP_TOL: f64 = 1e-8;

pub fn compute_spectrum(sys: &PiecewiseSystem, hint: &OrientationHint) -> Result<SaddleSpectrum> {
    let o = Point2::ZERO;
    let grad = sys.switch_grad(o);
    let eig = |side: Side| -> Result<(f64, f64, Point2, Point2)> {
        let j = sys.jac_f(side, o);
        let (ls, lu) = j.real_eigenvalues().ok_or(Error::NotASaddle { side: side.name() })?;
        if !(ls < 0.0 && lu > 0.0) {
            return Err(Error::NotASaddle { side: side.name() });
        }
        Ok((ls, lu, j.eigenvector(ls), j.eigenvector(lu)))
    };
    let (ls_p, lu_p, mut vs_p, mut vu_p) = eig(Side::Plus)?;
    let (ls_m, lu_m, mut vs_m, mut vu_m) = eig(Side::Minus)?;

    // F1: c_u^- < 0 < c_u^+ and c_s^- < 0 < c_s^+
    let orient = |v: &mut Point2, want_positive: bool, which: &'static str| -> Result<f64> {
        let c = grad.dot(*v);
        if c.abs() < C_PERP_TOL {
            return Err(Error::TangentEigenvector { which, value: c });
        }
        if (c > 0.0) != want_positive {
            *v = -*v;
        }
        Ok(grad.dot(*v))
    };
    let c_u_m = orient(&mut vu_m, false, "v_u^-")?;
    let c_u_p = orient(&mut vu_p, true, "v_u^+")?;
    let c_s_m = orient(&mut vs_m, false, "v_s^-")?;
    let c_s_p = orient(&mut vs_p, true, "v_s^+")?;

    if let Some(dep) = hint.departure {
        if dep.dot(vu_m) <= 0.0 {
            return Err(Error::OrientationMismatch("homoclinic departure opposes v_u^- fixed by F1"));
        }
    }
    if let Some(arr) = hint.arrival {
        if arr.dot(vs_p) >= 0.0 {
            return Err(Error::OrientationMismatch("homoclinic arrival is not along -v_s^+"));
        }
    }
    Ok(SaddleSpectrum {
        lambda_s_plus: ls_p,
        lambda_u_plus: lu_p,
        lambda_s_minus: ls_m,
        lambda_u_minus: lu_m,
        v_s_plus: vs_p,
        v_u_plus: vu_p,
        v_s_minus: vs_m,
        v_u_minus: vu_m,
        c_u_perp_plus: c_u_p,
        c_u_perp_minus: c_u_m,
        c_s_perp_plus: c_s_p,
        c_s_perp_minus: c_s_m,
        grad_g0: grad,
    })
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RateConstants {
    pub sigma_fwd_plus: f64,
    pub sigma_fwd_minus: f64,
    pub sigma_fwd: f64,
    pub sigma_bwd_plus: f64,
    pub sigma_bwd_minus: f64,
    pub sigma_bwd: f64,
    pub sigma_lo: f64,
    pub sigma_hi: f64,
    pub big_sigma_fwd_plus: f64,
    pub big_sigma_bwd_minus: f64,
    pub big_sigma_fwd: f64,
    pub big_sigma_bwd: f64,
    pub big_sigma_lo: f64,
    pub big_sigma_hi: f64,
    pub lambda_lo: f64,
    pub lambda_hi: f64,
    pub mu0: f64,
    pub sigma_fb: f64,
}

pub fn rate_constants(s: &SaddleSpectrum) -> RateConstants {
    let lup = s.lambda_u_plus;
    let lsp = s.lambda_s_plus.abs();
    let lum = s.lambda_u_minus;
    let lsm = s.lambda_s_minus.abs();
    let sigma_fwd_plus = lsp / (lup + lsp);
    let sigma_fwd_minus = (lum + lsm) / lum;
    let sigma_fwd = sigma_fwd_plus * sigma_fwd_minus;
    let sigma_bwd_plus = 1.0 / sigma_fwd_plus;
    let sigma_bwd_minus = 1.0 / sigma_fwd_minus;
    let sigma_bwd = sigma_bwd_plus * sigma_bwd_minus;
    let sigma_lo = sigma_fwd_plus.min(sigma_bwd_minus);
    let sigma_hi = sigma_fwd_plus.max(sigma_bwd_minus);
    let big_sigma_fwd_plus = 1.0 / (lup + lsp);
    let big_sigma_bwd_minus = 1.0 / (lum + lsm);
    let big_sigma_fwd = (lum + lsp) / (lum * (lup + lsp));
    let big_sigma_bwd = (lum + lsp) / (lsp * (lum + lsm));
    let lambda_lo = lup.min(lsp).min(lum).min(lsm);
    let lambda_hi = lup.max(lsp).max(lum).max(lsm);
    let mu0 = 0.25 * big_sigma_fwd_plus.min(big_sigma_bwd_minus).min(sigma_lo * sigma_lo);
    RateConstants {
        sigma_fwd_plus,
        sigma_fwd_minus,
        sigma_fwd,
        sigma_bwd_plus,
        sigma_bwd_minus,
        sigma_bwd,
        sigma_lo,
        sigma_hi,
        big_sigma_fwd_plus,
        big_sigma_bwd_minus,
        big_sigma_fwd,
        big_sigma_bwd,
        big_sigma_lo: big_sigma_fwd.min(big_sigma_bwd),
        big_sigma_hi: big_sigma_fwd.max(big_sigma_bwd),
        lambda_lo,
        lambda_hi,
        mu0,
        sigma_fb: sigma_fwd.min(sigma_bwd),
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Scenario {
    S1,
    S2,
    S3,
    S4,
    Undetermined,
}

impl Scenario {
    pub fn name(self) -> &'static str {
        match self {
            Scenario::S1 => "S1",
            Scenario::S2 => "S2",
            Scenario::S3 => "S3",
            Scenario::S4 => "S4",
            Scenario::Undetermined => "Undetermined",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AssumptionReport {
    pub f0_ok: bool,
    pub f1_ok: bool,
    pub f2_ok: bool,
    pub g_ok: bool,
    pub k_transversality: f64,
    pub k_transversality_plus: f64,
    pub k_transversality_minus: f64,
    pub scenario: Scenario,
    pub sliding_near_origin: bool,
    pub probe_distance: f64,
}

fn angle(v: Point2) -> f64 {
    let a = libm::atan2(v.x2, v.x1);
    if a < 0.0 {
        a + 2.0 * core::f64::consts::PI
    } else {
        a
    }
}

/// Whether `p` lies in the sector swept counter-clockwise from direction `a` to direction `b`.
fn in_ccw_sector(a: Point2, b: Point2, p: Point2) -> bool {
    let tau = 2.0 * core::f64::consts::PI;
    let wrap = |x: f64| x - tau * m::floor(x / tau);
    let ab = wrap(angle(b) - angle(a));
    let ap = wrap(angle(p) - angle(a));
    ap > 0.0 && ap < ab
}

/// F2: v_s^+ and v_s^- lie in different components of the plane cut by the two unstable half-lines.
pub fn f2_holds(spec: &SaddleSpectrum) -> bool {
    in_ccw_sector(spec.v_u_minus, spec.v_u_plus, spec.v_s_plus)
        != in_ccw_sector(spec.v_u_minus, spec.v_u_plus, spec.v_s_minus)
}

/// Attracting or repelling sliding on Ω⁰ near the origin, probed at `d` on both branches.
pub fn sliding_near_origin(sys: &PiecewiseSystem, d: f64) -> bool {
    let g0 = sys.switch_grad(Point2::ZERO);
    let tangent = g0.rot90().unit();
    for sgn in [1.0, -1.0] {
        let mut p = sgn * d * tangent;
        // project onto G = 0 along the gradient
        for _ in 0..20 {
            let gv = sys.switch_value(p);
            let gr = sys.switch_grad(p);
            if gr.norm2() == 0.0 {
                break;
            }
            p -= (gv / gr.norm2()) * gr;
            if gv.abs() < 1e-15 {
                break;
            }
        }
        let n = sys.switch_grad(p);
        let a = n.dot(sys.f(Side::Plus, p));
        let b = n.dot(sys.f(Side::Minus, p));
        if a * b < 0.0 {
            return true;
        }
    }
    false
}

pub fn classify_scenario(sys: &PiecewiseSystem, spec: &SaddleSpectrum, gamma: &Homoclinic) -> Result<AssumptionReport> {
    let o = Point2::ZERO;
    let f0_ok = sys.f(Side::Plus, o).norm() < 1e-12 && sys.f(Side::Minus, o).norm() < 1e-12;
    let f1_ok = spec.c_u_perp_minus < 0.0
        && spec.c_u_perp_plus > 0.0
        && spec.c_s_perp_minus < 0.0
        && spec.c_s_perp_plus > 0.0;
    let g_ok = match &sys.g {
        None => true,
        Some(g) => (0..32).all(|k| g(-8.0 + 0.5 * k as f64, o, sys.epsilon).norm() < 1e-12),
    };
    let f2_ok = f2_holds(spec);
    let g0 = gamma.gamma0;
    let n = sys.switch_grad(g0);
    let kp = n.dot(sys.f(Side::Plus, g0));
    let km = n.dot(sys.f(Side::Minus, g0));

    let mut d = 1e-4 * gamma.diameter();
    let mut scenario = None;
    for _ in 0..=8 {
        let a = gamma.inside(d * spec.v_u_plus);
        let b = gamma.inside(d * spec.v_s_minus);
        if let (Some(a), Some(b)) = (a, b) {
            scenario = Some(match (a, b) {
                (false, false) => Scenario::S1,
                (true, true) => Scenario::S2,
                (true, false) => Scenario::S3,
                (false, true) => Scenario::S4,
            });
            break;
        }
        d *= 0.5;
    }
    let scenario = scenario.ok_or(Error::ProbeAmbiguous)?;
    let sliding = sliding_near_origin(sys, d) || matches!(scenario, Scenario::S3 | Scenario::S4);
    Ok(AssumptionReport {
        f0_ok,
        f1_ok,
        f2_ok,
        g_ok,
        k_transversality: kp.min(km),
        k_transversality_plus: kp,
        k_transversality_minus: km,
        scenario,
        sliding_near_origin: sliding,
        probe_distance: d,
    })
}

/// f rotated by a quarter turn, oriented so that γ + c f^⊥ enters E^in for small c > 0.
pub fn perp_field(sys: &PiecewiseSystem, gamma: &Homoclinic, side: Side, x: Point2) -> Result<Point2> {
    let f = sys.f(side, x);
    if f.norm() < 1e-14 {
        return Err(Error::ZeroField { at: x });
    }
    Ok(gamma.inward_rotation * f.rot90())
}

/// 𝒦 = 2 sup |g| / |f±| on a deterministic grid of B(Γ, 1) × time.
pub fn kappa_bound(sys: &PiecewiseSystem, gamma: &Homoclinic) -> Result<f64> {
    let g = match &sys.g {
        None => return Ok(0.0),
        Some(g) => g.clone(),
    };
    let t_span = sys.g_period.unwrap_or(8.0 * core::f64::consts::PI);
    let samples = gamma.uniform_arclength_samples(64);
    let mut sup: f64 = 0.0;
    for (p, normal) in samples {
        for j in 0..16 {
            let off = -1.0 + 2.0 * j as f64 / 15.0;
            let x = p + off * normal;
            let side = sys.side_of(x).unwrap_or(Side::Plus);
            let sides: Vec<Side> = if sys.side_of(x).is_none() { alloc::vec![Side::Plus, Side::Minus] } else { alloc::vec![side] };
            for s in sides {
                let fx = sys.f(s, x).norm();
                if fx < 1e-12 {
                    return Err(Error::FieldVanishesOnGrid);
                }
                for k in 0..32 {
                    let t = t_span * k as f64 / 32.0;
                    sup = sup.max(g(t, x, 0.0).norm() / fx);
                }
            }
        }
    }
    Ok(2.0 * sup)
}
