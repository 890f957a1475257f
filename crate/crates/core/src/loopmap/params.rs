//! The session parameter cascade μ → (μ₂, μ₁) → ϖ → (β, δ).

use crate::dichotomy::{holder_constant, select_varpi, tangent_constant, DichotomyData, VarpiChoice, VarpiInputs, L_CAP};
use crate::error::{Error, Result};
use crate::geom::m;
use crate::leaves::{LeafKind, Leaves};
use crate::psys::{RateConstants, Side};

/// Resolved parameters of one session; every output embeds these.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SessionParams {
    pub eps: f64,
    pub mu: f64,
    pub mu0: f64,
    pub c_mu: f64,
    pub mu1: f64,
    pub mu2: f64,
    pub c_s: f64,
    pub varpi: VarpiChoice,
    /// |ln ϖ|, the inverse half-width of S̃±.
    pub big_l: f64,
    pub sigma_fb: f64,
    pub beta: f64,
    pub delta: f64,
}

/// c_μ = c_T + c_d + 1/6 with c_d = 7 λ̄³/λ̲³ and c_T = 1/6 + 1/(2λ̲).
pub fn c_mu(rates: &RateConstants) -> f64 {
    let (lo, hi) = (rates.lambda_lo, rates.lambda_hi);
    let c_d = 7.0 * (hi / lo) * (hi / lo) * (hi / lo);
    let c_t = 1.0 / 6.0 + 1.0 / (2.0 * lo);
    c_t + c_d + 1.0 / 6.0
}

/// β = max(2 ε^{σ^fb/2}, 0.05).
pub fn default_beta(eps: f64, sigma_fb: f64) -> f64 {
    let b = if eps > 0.0 { 2.0 * m::powf(eps, 0.5 * sigma_fb) } else { 0.0 };
    b.max(0.05)
}

/// 2 sup ‖y_s(θ)‖ |ln ϖ| / z_s⁺(θ+τ, τ) over θ ∈ [0, 20], the constant of the y_s expansion.
pub fn measure_c_s(leaves: &Leaves, dich: &DichotomyData, big_l: f64) -> Result<f64> {
    let tau = 0.0;
    let ys = leaves.leaf_orbit_on_s(tau, big_l, LeafKind::Stable, 1e-3 / big_l)?;
    let theta_max = 20.0f64.min(dich.grid.t_hi - tau);
    let n = 200;
    let mut sup: f64 = 0.0;
    for k in 0..=n {
        let th = theta_max * k as f64 / n as f64;
        let z = dich.z_s(Side::Plus, th + tau, tau);
        sup = sup.max(ys.eval(th + tau).norm() * big_l / z);
    }
    Ok(2.0 * sup)
}

impl SessionParams {
    /// Runs the cascade. `beta` overrides the default policy.
    pub fn derive(leaves: &Leaves, dich: &DichotomyData, rates: &RateConstants, mu: f64, beta: Option<f64>) -> Result<Self> {
        if !(mu > 0.0) {
            return Err(Error::DegenerateInput("mu must be positive"));
        }
        if mu > rates.mu0 * (1.0 + 1e-12) {
            return Err(Error::DegenerateInput("mu exceeds mu0"));
        }
        let eps = dich.eps;
        let c_mu = c_mu(rates);
        let mu2 = mu / c_mu;
        let mu1 = 0.5 * mu2;
        let sys = &leaves.sys;
        let mut inp = VarpiInputs {
            alpha: sys.holder_alpha,
            n_alpha: holder_constant(sys, Side::Plus, 0.5).max(holder_constant(sys, Side::Minus, 0.5)),
            c_s: measure_c_s(leaves, dich, L_CAP)?,
            k1: dich.k1_est,
            k2: dich.k2_est,
            k_plus: tangent_constant(sys, &leaves.spec),
            lambda_lo: rates.lambda_lo,
            mu2,
        };
        let mut choice = select_varpi(&inp);
        if choice.l_used < L_CAP {
            inp.c_s = measure_c_s(leaves, dich, choice.l_used)?;
            choice = select_varpi(&inp);
        }
        let beta = beta.unwrap_or_else(|| default_beta(eps, rates.sigma_fb));
        if !(beta > 0.0) || beta < m::powf(eps, 0.5 * rates.sigma_fb) {
            return Err(Error::DegenerateInput("beta below eps^(sigma_fb/2)"));
        }
        Ok(SessionParams {
            eps,
            mu,
            mu0: rates.mu0,
            c_mu,
            mu1,
            mu2,
            c_s: inp.c_s,
            varpi: choice,
            big_l: choice.l_used,
            sigma_fb: rates.sigma_fb,
            beta,
            delta: 0.25 * beta,
        })
    }
}
