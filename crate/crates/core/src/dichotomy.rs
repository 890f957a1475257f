//! Exponential dichotomy of the frozen-at-origin linear systems ẋ = F^±_x(0, t, ε) x.
//!
//! Principal solutions are kept in log scale: a unit direction v and ρ = ln‖w‖ with
//! v' = A v - (vᵀA v) v and ρ' = vᵀA v, renormalized every time unit.

use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::flow::{integrate, Direction, StopSet, Termination, SWITCH_ID};
use crate::geom::{m, pt, Mat2, Point2};
use crate::leaves::{LeafKind, Leaves};
use crate::ode::{solve, DenseSolution, Dop853, Tolerances};
use crate::psys::{PiecewiseSystem, SaddleSpectrum, Side};

fn ode_tol() -> Tolerances {
    Tolerances { rtol: 1e-13, atol: 1e-15, h_max: 0.25, max_steps: 2_000_000 }
}

/// F^±_x(0, t, ε)
pub fn frozen_matrix(sys: &PiecewiseSystem, side: Side, eps: f64, t: f64) -> Mat2 {
    let a = sys.jac_f(side, Point2::ZERO);
    if eps == 0.0 || sys.g.is_none() {
        a
    } else {
        a.add(&sys.pert_jac(t, Point2::ZERO).scale(eps))
    }
}

/// Principal solution in log scale, valid on [t_lo, t_hi].
#[derive(Clone, Debug)]
pub struct LogSolution {
    sol: DenseSolution<3>,
    /// internal time u = sign·t
    sign: f64,
    rho0: f64,
    pub t_lo: f64,
    pub t_hi: f64,
}

impl LogSolution {
    fn raw(&self, t: f64) -> [f64; 3] {
        let u = self.sign * t.clamp(self.t_lo, self.t_hi);
        self.sol.eval(u).unwrap_or([f64::NAN; 3])
    }

    pub fn direction(&self, t: f64) -> Point2 {
        let y = self.raw(t);
        pt(y[0], y[1]).unit()
    }

    /// ln‖w(t)‖ with ‖w(0)‖ = 1.
    pub fn log_norm(&self, t: f64) -> f64 {
        self.raw(t)[2] - self.rho0
    }

    pub fn w(&self, t: f64) -> Point2 {
        m::exp(self.log_norm(t)) * self.direction(t)
    }
}

fn propagate(sys: &PiecewiseSystem, side: Side, eps: f64, v0: Point2, t_from: f64, t_to: f64) -> Result<LogSolution> {
    let sign = if t_to >= t_from { 1.0 } else { -1.0 };
    let s = sys.clone();
    let rhs = move |u: f64, y: &[f64; 3]| {
        let a = frozen_matrix(&s, side, eps, sign * u);
        let v = pt(y[0], y[1]);
        let av = a.apply(v);
        let q = v.dot(av);
        let dv = av - q * v;
        [sign * dv.x1, sign * dv.x2, sign * q]
    };
    let (u0, u1) = (sign * t_from, sign * t_to);
    let v0 = v0.unit();
    let mut st = Dop853::new(rhs, u0, [v0.x1, v0.x2, 0.0], ode_tol());
    let mut steps = Vec::new();
    let mut b = u0;
    while b < u1 {
        b = (b + 1.0).min(u1);
        while st.t() < b {
            steps.push(st.step(b)?);
        }
        let y = st.y();
        let v = pt(y[0], y[1]).unit();
        st.reset(b, [v.x1, v.x2, y[2]]);
    }
    let sol = DenseSolution { steps };
    let mut ls = LogSolution { sol, sign, rho0: 0.0, t_lo: t_from.min(t_to), t_hi: t_from.max(t_to) };
    ls.rho0 = ls.raw(0.0)[2];
    Ok(ls)
}

/// w_u, w_s of one side on [t_lo, t_hi] (extended to contain 0).
#[derive(Clone, Debug)]
pub struct PrincipalSolutions {
    pub side: Side,
    pub eps: f64,
    pub w_u: LogSolution,
    pub w_s: LogSolution,
    pub lambda_u: f64,
    pub lambda_s: f64,
    pub v_u: Point2,
    pub v_s: Point2,
}

impl PrincipalSolutions {
    pub fn z_u(&self, t: f64, s: f64) -> f64 {
        m::exp(self.w_u.log_norm(t) - self.w_u.log_norm(s))
    }

    pub fn z_s(&self, t: f64, s: f64) -> f64 {
        m::exp(self.w_s.log_norm(t) - self.w_s.log_norm(s))
    }

    pub fn v_u_at(&self, t: f64) -> Point2 {
        self.w_u.direction(t)
    }

    pub fn v_s_at(&self, t: f64) -> Point2 {
        self.w_s.direction(t)
    }

    /// P(τ): projection onto span v_s(τ) along v_u(τ).
    pub fn projection(&self, tau: f64) -> Mat2 {
        let vs = self.v_s_at(tau);
        let vu = self.v_u_at(tau);
        // P ξ = (ξ ∧ v_u)/(v_s ∧ v_u) v_s
        let k = 1.0 / vs.wedge(vu);
        Mat2::outer(vs, pt(vu.x2, -vu.x1)).scale(k)
    }
}

/// Principal solutions of (eq-lin)± on `range`.
pub fn principal_solutions(sys: &PiecewiseSystem, spec: &SaddleSpectrum, side: Side, range: (f64, f64), eps: f64) -> Result<PrincipalSolutions> {
    let (lo, hi) = (range.0.min(0.0), range.1.max(0.0));
    let lu = spec.lambda_u(side);
    let ls = spec.lambda_s(side);
    let burn = (30.0 / (lu - ls)).max(10.0);
    let u1 = propagate(sys, side, eps, spec.v_u(side), lo - burn, hi)?;
    let u2 = propagate(sys, side, eps, spec.v_u(side), lo - 2.0 * burn, hi)?;
    let s1 = propagate(sys, side, eps, spec.v_s(side), hi + burn, lo)?;
    let s2 = propagate(sys, side, eps, spec.v_s(side), hi + 2.0 * burn, lo)?;
    let du = u1.direction(lo).dist(u2.direction(lo));
    let ds = s1.direction(hi).dist(s2.direction(hi));
    if du > 1e-8 || ds > 1e-8 {
        return Err(Error::HorizonTooShort);
    }
    Ok(PrincipalSolutions { side, eps, w_u: u1, w_s: s1, lambda_u: lu, lambda_s: ls, v_u: spec.v_u(side), v_s: spec.v_s(side) })
}

/// Transfer matrix X(t)X(s)⁻¹ of the frozen system by direct integration (independent of the
/// principal solutions).
pub fn transfer_matrix(sys: &PiecewiseSystem, side: Side, eps: f64, t: f64, s: f64) -> Result<Mat2> {
    let sign = if t >= s { 1.0 } else { -1.0 };
    let sy = sys.clone();
    let y = solve(
        move |u: f64, y: &[f64; 4]| {
            let a = frozen_matrix(&sy, side, eps, sign * u);
            let x = Mat2::new(y[0], y[1], y[2], y[3]);
            let d = a.mul(&x).scale(sign);
            [d.a11, d.a12, d.a21, d.a22]
        },
        sign * s,
        [1.0, 0.0, 0.0, 1.0],
        sign * t,
        ode_tol(),
    )?;
    Ok(Mat2::new(y[0], y[1], y[2], y[3]))
}

/// Grid on which the dichotomy constants are measured.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ConstantGrid {
    pub t_lo: f64,
    pub t_hi: f64,
    pub step: f64,
    pub max_gap: f64,
}

impl Default for ConstantGrid {
    fn default() -> Self {
        ConstantGrid { t_lo: -25.0, t_hi: 25.0, step: 1.0, max_gap: 50.0 }
    }
}

#[derive(Clone, Debug)]
pub struct DichotomyData {
    pub eps: f64,
    pub plus: PrincipalSolutions,
    pub minus: PrincipalSolutions,
    /// Measured k·ε: sup of |ln z - λ(t-s)|/|t-s| over pairs with |t-s| ≥ 20.
    pub k_eps_est: f64,
    /// k₁ making Eq. (defzused) hold on the grid with the measured kε.
    pub k1_est: f64,
    /// 2·sup of ‖P(τ)‖, ‖I - P(τ)‖.
    pub k2_est: f64,
    /// sup ‖v(t) - v‖ / ε (0 when ε = 0).
    pub c_est: f64,
    pub grid: ConstantGrid,
}

impl DichotomyData {
    pub fn side(&self, side: Side) -> &PrincipalSolutions {
        match side {
            Side::Plus => &self.plus,
            Side::Minus => &self.minus,
        }
    }

    pub fn z_u(&self, side: Side, t: f64, s: f64) -> f64 {
        self.side(side).z_u(t, s)
    }

    pub fn z_s(&self, side: Side, t: f64, s: f64) -> f64 {
        self.side(side).z_s(t, s)
    }

    pub fn projection(&self, side: Side, tau: f64) -> Mat2 {
        self.side(side).projection(tau)
    }

    /// Eq. (defzused) bands with the measured constants: (lower, upper) for z_u or z_s.
    pub fn band(&self, side: Side, unstable: bool, t: f64, s: f64) -> (f64, f64) {
        let p = self.side(side);
        let lam = if unstable { p.lambda_u } else { p.lambda_s };
        let gap = (t - s).abs();
        (m::exp(lam * (t - s) - self.k_eps_est * gap) / self.k1_est, self.k1_est * m::exp(lam * (t - s) + self.k_eps_est * gap))
    }
}

pub fn build_dichotomy(sys: &PiecewiseSystem, spec: &SaddleSpectrum, eps: f64, grid: ConstantGrid) -> Result<DichotomyData> {
    let range = (grid.t_lo, grid.t_hi);
    let plus = principal_solutions(sys, spec, Side::Plus, range, eps)?;
    let minus = principal_solutions(sys, spec, Side::Minus, range, eps)?;
    let n = m::floor((grid.t_hi - grid.t_lo) / grid.step + 0.5) as usize;
    let ts: Vec<f64> = (0..=n).map(|i| grid.t_lo + grid.step * i as f64).collect();
    // log deviations from the constant-coefficient rates
    let mut devs: Vec<(f64, f64)> = Vec::new();
    for p in [&plus, &minus] {
        for &t in &ts {
            for &s in &ts {
                let gap = (t - s).abs();
                if gap == 0.0 || gap > grid.max_gap {
                    continue;
                }
                devs.push((gap, (p.w_u.log_norm(t) - p.w_u.log_norm(s) - p.lambda_u * (t - s)).abs()));
                devs.push((gap, (p.w_s.log_norm(t) - p.w_s.log_norm(s) - p.lambda_s * (t - s)).abs()));
            }
        }
    }
    let k_eps = devs.iter().filter(|d| d.0 >= 20.0).map(|d| d.1 / d.0).fold(0.0, f64::max);
    let k1 = devs.iter().map(|d| m::exp(d.1 - k_eps * d.0)).fold(1.0, f64::max);
    let mut k2: f64 = 0.0;
    let mut c: f64 = 0.0;
    for p in [&plus, &minus] {
        for &t in &ts {
            let pm = p.projection(t);
            k2 = k2.max(pm.norm2()).max(Mat2::IDENTITY.sub(&pm).norm2());
            c = c.max(p.v_u_at(t).dist(p.v_u)).max(p.v_s_at(t).dist(p.v_s));
        }
    }
    let c_est = if eps > 0.0 { c / eps } else { 0.0 };
    Ok(DichotomyData { eps, plus, minus, k_eps_est: k_eps, k1_est: k1, k2_est: 2.0 * k2, c_est, grid })
}

#[derive(Clone, Debug, PartialEq)]
pub struct ProjectionReport {
    pub samples: usize,
    pub k2: f64,
    /// max ‖X(t)P X(s)⁻¹ξ‖ / (z_s(t,s)‖ξ‖)
    pub max_ratio_s: f64,
    /// max ‖X(t)(I-P) X(s)⁻¹ξ‖ / (z_u(t,s)‖ξ‖)
    pub max_ratio_u: f64,
    pub violations: usize,
}

/// Lemma newdichot on sampled (side, t, s, ξ). The transfer matrix is integrated directly.
pub fn projection_bound_check(sys: &PiecewiseSystem, data: &DichotomyData, samples: &[(Side, f64, f64, Point2)]) -> Result<ProjectionReport> {
    let mut rs: f64 = 0.0;
    let mut ru: f64 = 0.0;
    let mut bad = 0;
    for &(side, t, s, xi) in samples {
        let phi = transfer_matrix(sys, side, data.eps, t, s)?;
        let p = data.projection(side, s);
        let a = phi.apply(p.apply(xi)).norm() / (data.z_s(side, t, s) * xi.norm());
        let b = phi.apply(Mat2::IDENTITY.sub(&p).apply(xi)).norm() / (data.z_u(side, t, s) * xi.norm());
        if a > data.k2_est || b > data.k2_est {
            bad += 1;
        }
        rs = rs.max(a);
        ru = ru.max(b);
    }
    Ok(ProjectionReport { samples: samples.len(), k2: data.k2_est, max_ratio_s: rs, max_ratio_u: ru, violations: bad })
}

#[derive(Clone, Debug, PartialEq)]
pub struct DecayReport {
    /// c_k fitted on the first half of the window.
    pub c_k: f64,
    pub theta_max: f64,
    pub samples: usize,
    pub violations: usize,
}

/// Eq. (est.stableunstable) along the anchor orbits of P_s(τ) and P_u(τ) for θ ∈ [0, θ_max].
/// c_k is fitted on [0, θ_max/2] and the sandwich is checked on the whole window.
pub fn anchor_decay_check(leaves: &Leaves, tau: f64, theta_max: f64) -> Result<DecayReport> {
    let sp = &leaves.spec;
    let lam_lo = sp.lambda_u_plus.min(sp.lambda_u_minus).min(-sp.lambda_s_plus).min(-sp.lambda_s_minus);
    let lam_hi = sp.lambda_u_plus.max(sp.lambda_u_minus).max(-sp.lambda_s_plus).max(-sp.lambda_s_minus);
    let st = leaves.leaf_orbit(tau, LeafKind::Stable, 1e-9)?;
    let un = leaves.leaf_orbit(tau, LeafKind::Unstable, 1e-9)?;
    let n = 300;
    let mut pts = Vec::with_capacity(2 * (n + 1));
    for k in 0..=n {
        let th = theta_max * k as f64 / n as f64;
        pts.push((th, st.eval(tau + th).norm()));
        pts.push((th, un.eval(tau - th).norm()));
    }
    let ratio = |th: f64, x: f64| -> f64 { (x * m::exp(0.5 * lam_lo * th)).max(m::exp(-2.0 * lam_hi * th) / x) };
    let c_k = pts.iter().filter(|p| p.0 <= 0.5 * theta_max).map(|p| ratio(p.0, p.1)).fold(1.0, f64::max) * (1.0 + 1e-9);
    let violations = pts.iter().filter(|p| ratio(p.0, p.1) >= c_k).count();
    Ok(DecayReport { c_k, theta_max, samples: pts.len(), violations })
}

/// x(θ+τ) = y_s(θ) + ℓ(θ) + h(θ) for the orbit of Q = -d v_u^+(τ) + π_s(τ).
#[derive(Clone, Debug)]
pub struct SaddlePassageDecomposition {
    pub tau: f64,
    pub d: f64,
    pub big_m: f64,
    pub theta: Vec<f64>,
    pub x: Vec<Point2>,
    pub y_s: Vec<Point2>,
    pub ell: Vec<Point2>,
    pub h: Vec<Point2>,
    /// max ‖h(θ)‖ / z_u^+(θ+τ, M+τ)
    pub weighted_norm_h: f64,
    /// D_ℓ = d·z_u^+(M+τ, τ)
    pub d_ell: f64,
    /// D_ℓ·|ln ϖ|^{-α/2}
    pub bound: f64,
}

impl SaddlePassageDecomposition {
    pub fn holds(&self) -> bool {
        self.weighted_norm_h <= self.bound
    }
}

/// Decompose the passage from S̃⁺ (offset 1/L) up to θ = M. With `big_m = None` the horizon is
/// the first Ω⁰ crossing T^f_2.
pub fn decompose_saddle_passage(leaves: &Leaves, dich: &DichotomyData, tau: f64, d: f64, big_l: f64, big_m: Option<f64>) -> Result<SaddlePassageDecomposition> {
    let sys = &leaves.sys;
    let plus = &dich.plus;
    let ys = leaves.leaf_orbit_on_s(tau, big_l, LeafKind::Stable, 1e-6)?;
    let pi_s = ys.anchor;
    let vu = plus.v_u_at(tau);
    let q = pi_s - d * vu;
    let (a, _) = crate::leaves::coords(q, leaves.spec.v_u_plus, leaves.spec.v_s_plus);
    if a.abs() > 1.0 / big_l || sys.side_of(q) != Some(Side::Plus) {
        return Err(Error::NotOnTransversal);
    }
    let horizon = big_m.unwrap_or(50.0 / plus.lambda_u);
    let stops = StopSet::horizon(horizon).switches(1);
    let tr = integrate(sys, tau, q, Direction::Fwd, &stops, &leaves.cfg.tol)?;
    let m_used = match (big_m, tr.termination) {
        (None, Termination::HitTarget(SWITCH_ID)) => tr.t_end - tau,
        (None, _) => return Err(Error::PassageLeftRegion),
        (Some(mm), Termination::HitTarget(SWITCH_ID)) if tr.t_end - tau < mm - 1e-9 => return Err(Error::PassageLeftRegion),
        (Some(mm), _) => mm,
    };
    let n = 400;
    let alpha = sys.holder_alpha;
    let mut out = SaddlePassageDecomposition {
        tau,
        d,
        big_m: m_used,
        theta: Vec::with_capacity(n + 1),
        x: Vec::with_capacity(n + 1),
        y_s: Vec::with_capacity(n + 1),
        ell: Vec::with_capacity(n + 1),
        h: Vec::with_capacity(n + 1),
        weighted_norm_h: 0.0,
        d_ell: d * plus.z_u(m_used + tau, tau),
        bound: 0.0,
    };
    out.bound = out.d_ell * m::powf(big_l, -0.5 * alpha);
    for k in 0..=n {
        let th = m_used * k as f64 / n as f64;
        let t = th + tau;
        let x = tr.point(t.min(tr.t_end))?;
        let y = ys.eval(t);
        let l = -d * plus.z_u(t, tau) * plus.v_u_at(t);
        let h = x - y - l;
        out.weighted_norm_h = out.weighted_norm_h.max(h.norm() / plus.z_u(t, m_used + tau));
        out.theta.push(th);
        out.x.push(x);
        out.y_s.push(y);
        out.ell.push(l);
        out.h.push(h);
    }
    Ok(out)
}

/// Constants fed to the ϖ policy.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct VarpiInputs {
    pub alpha: f64,
    pub n_alpha: f64,
    pub c_s: f64,
    pub k1: f64,
    pub k2: f64,
    /// K⁺ of Eq. (tangent)
    pub k_plus: f64,
    pub lambda_lo: f64,
    pub mu2: f64,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct VarpiChoice {
    /// C of Eq. (est.varpi1)
    pub c_varpi: f64,
    /// |ln ϖ| demanded by Eq. (est.varpi1)
    pub l_varpi1: f64,
    /// |ln ϖ| demanded by Eq. (varpibis); infinite if unattainable
    pub l_varpibis: f64,
    pub l_used: f64,
    pub varpi: f64,
    pub capped: bool,
}

pub const L_CAP: f64 = 40.0;

/// Largest ϖ (smallest |ln ϖ|) meeting Eqs. (est.varpi1) and (varpibis), capped at |ln ϖ| = 40.
pub fn select_varpi(inp: &VarpiInputs) -> VarpiChoice {
    let a = inp.alpha;
    let c = (2.0 * m::powf(inp.c_s, a) + 1.0) * inp.n_alpha * 2.0 * inp.k2 * m::powf(inp.k1, 2.0 + 2.0 * a) * (a + 1.0) / (inp.lambda_lo * a);
    let l1 = m::powf(2.0 * c, 2.0 / a).max(4.0);
    let kc = inp.k_plus * inp.c_s;
    let ok2 = |l: f64| l > kc * inp.k1 * inp.k1 && inp.k1 * inp.k1 * l / kc < m::exp(inp.mu2 * l / 4.0);
    let mut l2 = f64::INFINITY;
    let mut l = 1.0;
    while l < 1e7 {
        if ok2(l) {
            l2 = l;
            break;
        }
        l *= 1.01;
    }
    let req = l1.max(l2);
    let capped = req > L_CAP;
    let used = req.min(L_CAP);
    VarpiChoice { c_varpi: c, l_varpi1: l1, l_varpibis: l2, l_used: used, varpi: m::exp(-used), capped }
}

/// Sampled Hölder constant of F^+_x near the origin: sup ‖F_x(x) - F_x(y)‖/‖x - y‖^α on B(0, r).
pub fn holder_constant(sys: &PiecewiseSystem, side: Side, r: f64) -> f64 {
    let a = sys.holder_alpha;
    let mut pts = Vec::new();
    for i in 0..12 {
        for j in 1..=6 {
            let ang = 2.0 * core::f64::consts::PI * i as f64 / 12.0;
            let rr = r * j as f64 / 6.0;
            pts.push(pt(rr * m::cos(ang), rr * m::sin(ang)));
        }
    }
    pts.push(Point2::ZERO);
    let mut n: f64 = 0.0;
    for (i, p) in pts.iter().enumerate() {
        for q in &pts[i + 1..] {
            let dj = sys.jac_f(side, *p).sub(&sys.jac_f(side, *q)).norm2();
            n = n.max(dj / m::powf(p.dist(*q), a));
        }
    }
    n
}

/// K⁺ with the Ω⁰ tangent at the origin ∝ v_s^+ - K⁺ v_u^+.
pub fn tangent_constant(sys: &PiecewiseSystem, spec: &SaddleSpectrum) -> f64 {
    let t = sys.switch_grad(Point2::ZERO).rot90();
    let (a, b) = crate::leaves::coords(t, spec.v_u_plus, spec.v_s_plus);
    (-a / b).abs()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::builtins;
    use crate::psys::{compute_spectrum, OrientationHint};

    #[test]
    fn autonomous_principal_solutions_are_exponentials() {
        let sys = builtins::duffing();
        let spec = compute_spectrum(&sys, &OrientationHint::default()).unwrap();
        let p = principal_solutions(&sys, &spec, Side::Plus, (-20.0, 20.0), 0.0).unwrap();
        for t in [-15.0, -3.0, 0.0, 4.5, 18.0] {
            assert!((p.z_u(t, 0.0) - m::exp(t)).abs() < 1e-10 * m::exp(t));
            assert!((p.z_s(t, 0.0) - m::exp(-t)).abs() < 1e-10 * m::exp(-t));
            assert!(p.v_u_at(t).dist(spec.v_u_plus) < 1e-12);
        }
    }

    #[test]
    fn duffing_tangent_constant_is_one() {
        let sys = builtins::duffing();
        let spec = compute_spectrum(&sys, &OrientationHint::default()).unwrap();
        assert!((tangent_constant(&sys, &spec) - 1.0).abs() < 1e-12);
        assert!((holder_constant(&sys, Side::Plus, 0.5) - 2.0).abs() < 1e-9);
    }
}
