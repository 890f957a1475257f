//! TOML experiment configuration.

use std::path::{Path, PathBuf};

use homloop_core::builtins;
use homloop_core::flow::FlowTol;
use homloop_core::poly::{poly_system, Poly, PolyField, Term, Trig};
use homloop_core::PiecewiseSystem;
use serde::Deserialize;

use crate::error::CliError;

#[derive(Clone, Debug, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub system: SystemConfig,
    #[serde(default)]
    pub session: SessionConfig,
    #[serde(default)]
    pub tolerances: ToleranceConfig,
    #[serde(default)]
    pub output: OutputConfig,
}

/// Either `builtin` or the inline tables `f_plus`, `switch` (and optionally `f_minus`).
#[derive(Clone, Debug, Default, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct SystemConfig {
    pub builtin: Option<String>,
    pub f_plus: Option<FieldTable>,
    pub f_minus: Option<FieldTable>,
    pub switch: Option<Vec<TermConfig>>,
    /// Named perturbation ("damping", "forced").
    pub perturbation: Option<String>,
    pub g: Option<FieldTable>,
    #[serde(default)]
    pub epsilon: f64,
}

#[derive(Clone, Debug, Default, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct FieldTable {
    #[serde(default)]
    pub x1: Vec<TermConfig>,
    #[serde(default)]
    pub x2: Vec<TermConfig>,
}

/// c · x^i · y^j · trig(omega t + phase)
#[derive(Clone, Debug, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct TermConfig {
    pub c: f64,
    #[serde(default)]
    pub i: u32,
    #[serde(default)]
    pub j: u32,
    pub trig: Option<String>,
    #[serde(default = "one")]
    pub omega: f64,
    #[serde(default)]
    pub phase: f64,
}

fn one() -> f64 {
    1.0
}

#[derive(Clone, Debug, Deserialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct SessionConfig {
    /// Defaults to μ₀ of the system.
    pub mu: Option<f64>,
    pub beta: Option<f64>,
    pub d_grid: Vec<f64>,
    pub tau_grid: Vec<f64>,
    /// Melnikov samples per period.
    pub alpha_samples: usize,
    /// Return-map iterations of the stability probe.
    pub n_loops: usize,
    /// Random (t, s, ξ) triples for the dichotomy check of `leaves`.
    pub dichotomy_samples: usize,
    pub seed: u64,
    /// "fwd", "bwd" or "both"
    pub direction: String,
}

impl Default for SessionConfig {
    fn default() -> Self {
        SessionConfig {
            mu: None,
            beta: None,
            d_grid: vec![1e-2, 3e-3, 1e-3, 3e-4, 1e-4],
            tau_grid: vec![0.0],
            alpha_samples: 64,
            n_loops: 3,
            dichotomy_samples: 32,
            seed: 0,
            direction: "both".into(),
        }
    }
}

#[derive(Clone, Debug, Deserialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct ToleranceConfig {
    pub rtol: f64,
    pub atol: f64,
    /// |G| accepted at a refined switching crossing.
    pub crossing: f64,
}

impl Default for ToleranceConfig {
    fn default() -> Self {
        ToleranceConfig { rtol: 1e-13, atol: 1e-16, crossing: 1e-12 }
    }
}

impl ToleranceConfig {
    pub fn flow_tol(&self) -> FlowTol {
        FlowTol { crossing: self.crossing, ..FlowTol::with_ode(self.rtol, self.atol) }
    }
}

#[derive(Clone, Debug, Default, Deserialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct OutputConfig {
    pub dir: Option<PathBuf>,
    /// Prefix for every artifact file name.
    pub prefix: Option<String>,
}

fn invalid(field: impl Into<String>, msg: impl Into<String>) -> CliError {
    CliError::Invalid { field: field.into(), msg: msg.into() }
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self, CliError> {
        let cfg: ExperimentConfig = toml::from_str(text).map_err(|e| CliError::ConfigParse(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::ConfigParse(format!("{}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    /// Checks that do not need the spectrum. μ ≤ μ₀ is checked once the system is built.
    pub fn validate(&self) -> Result<(), CliError> {
        let s = &self.system;
        if !(s.epsilon >= 0.0) || !s.epsilon.is_finite() {
            return Err(invalid("system.epsilon", "must be finite and >= 0"));
        }
        match (&s.builtin, &s.f_plus) {
            (Some(_), Some(_)) => return Err(invalid("system.builtin", "give either builtin or f_plus, not both")),
            (None, None) => return Err(invalid("system.builtin", "missing (or give inline f_plus and switch)")),
            (Some(b), None) if !builtins::SYSTEM_NAMES.contains(&b.as_str()) => {
                return Err(invalid("system.builtin", format!("unknown system `{b}`")));
            }
            (None, Some(_)) if s.switch.is_none() => return Err(invalid("system.switch", "required with inline fields")),
            _ => {}
        }
        if s.perturbation.is_some() && s.g.is_some() {
            return Err(invalid("system.perturbation", "give either perturbation or g, not both"));
        }
        if let Some(p) = &s.perturbation {
            if !builtins::PERTURBATION_NAMES.contains(&p.as_str()) {
                return Err(invalid("system.perturbation", format!("unknown perturbation `{p}`")));
            }
        }
        let tables = [("system.f_plus", &s.f_plus), ("system.f_minus", &s.f_minus), ("system.g", &s.g)];
        for (name, t) in tables {
            if let Some(t) = t {
                for (k, term) in t.x1.iter().enumerate() {
                    check_term(&format!("{name}.x1[{k}]"), term, name == "system.g")?;
                }
                for (k, term) in t.x2.iter().enumerate() {
                    check_term(&format!("{name}.x2[{k}]"), term, name == "system.g")?;
                }
            }
        }
        if let Some(sw) = &s.switch {
            for (k, term) in sw.iter().enumerate() {
                check_term(&format!("system.switch[{k}]"), term, false)?;
            }
        }

        let se = &self.session;
        if let Some(mu) = se.mu {
            if !(mu > 0.0) || !mu.is_finite() {
                return Err(invalid("session.mu", "must be positive"));
            }
        }
        if let Some(b) = se.beta {
            if !(b > 0.0) || !b.is_finite() {
                return Err(invalid("session.beta", "must be positive"));
            }
        }
        if se.d_grid.is_empty() {
            return Err(invalid("session.d_grid", "must be nonempty"));
        }
        for (k, d) in se.d_grid.iter().enumerate() {
            if !(*d > 0.0) || !d.is_finite() {
                return Err(invalid(format!("session.d_grid[{k}]"), format!("must be positive, got {d}")));
            }
        }
        if se.tau_grid.is_empty() {
            return Err(invalid("session.tau_grid", "must be nonempty"));
        }
        for (k, t) in se.tau_grid.iter().enumerate() {
            if !t.is_finite() {
                return Err(invalid(format!("session.tau_grid[{k}]"), "must be finite"));
            }
        }
        if se.alpha_samples < 2 {
            return Err(invalid("session.alpha_samples", "need at least 2"));
        }
        if !matches!(se.direction.as_str(), "fwd" | "bwd" | "both") {
            return Err(invalid("session.direction", "one of fwd, bwd, both"));
        }
        let t = &self.tolerances;
        for (name, v) in [("tolerances.rtol", t.rtol), ("tolerances.atol", t.atol), ("tolerances.crossing", t.crossing)] {
            if !(v > 0.0) || !v.is_finite() {
                return Err(invalid(name, "must be positive"));
            }
        }
        Ok(())
    }

    pub fn build_system(&self) -> Result<PiecewiseSystem, CliError> {
        let s = &self.system;
        let base = match &s.builtin {
            Some(name) => builtins::system_by_name(name).ok_or_else(|| invalid("system.builtin", format!("unknown system `{name}`")))?,
            None => {
                let fp = field(s.f_plus.as_ref().unwrap_or(&FieldTable::default()));
                let fm = s.f_minus.as_ref().map(field).unwrap_or_else(|| fp.clone());
                let sw = Poly::new(s.switch.iter().flatten().map(term).collect());
                let g = s.g.as_ref().map(field);
                return Ok(poly_system("inline", fp, fm, sw, g, s.epsilon));
            }
        };
        let name = s.perturbation.as_deref().unwrap_or("none");
        let mut sys = builtins::perturb(&base, name, s.epsilon).ok_or_else(|| invalid("system.perturbation", format!("unknown perturbation `{name}`")))?;
        if let Some(g) = &s.g {
            // inline g on a builtin system
            let tmp = poly_system("g", PolyField::default(), PolyField::default(), Poly::default(), Some(field(g)), s.epsilon);
            if let (Some(gf), gj) = (tmp.g.clone(), tmp.g_jac.clone()) {
                sys = sys.with_perturbation(gf, gj, tmp.g_period);
            }
        }
        sys.epsilon = s.epsilon;
        Ok(sys)
    }
}

fn check_term(field: &str, t: &TermConfig, time_ok: bool) -> Result<(), CliError> {
    if !t.c.is_finite() || !t.omega.is_finite() || !t.phase.is_finite() {
        return Err(invalid(field, "coefficients must be finite"));
    }
    match t.trig.as_deref() {
        None | Some("one") => Ok(()),
        Some("cos") | Some("sin") if time_ok => Ok(()),
        Some("cos") | Some("sin") => Err(invalid(field, "time factors are only allowed in g")),
        Some(other) => Err(invalid(field, format!("unknown trig `{other}`"))),
    }
}

fn term(t: &TermConfig) -> Term {
    let trig = match t.trig.as_deref() {
        Some("cos") => Trig::Cos,
        Some("sin") => Trig::Sin,
        _ => Trig::One,
    };
    Term { c: t.c, i: t.i, j: t.j, trig, omega: t.omega, phase: t.phase }
}

fn field(f: &FieldTable) -> PolyField {
    PolyField { x1: Poly::new(f.x1.iter().map(term).collect()), x2: Poly::new(f.x2.iter().map(term).collect()) }
}
