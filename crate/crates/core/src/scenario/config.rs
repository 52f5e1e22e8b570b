use std::f64::consts::TAU;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::ScenarioError;
use crate::solver::{Scheme, SolverConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScenarioKind {
    Generic,
    GZero,
    FrozenBurgers,
    ShearFlock,
    CriticalDemo,
    SupercriticalCriterion,
}

impl ScenarioKind {
    pub fn name(&self) -> &'static str {
        match self {
            Self::Generic => "generic",
            Self::GZero => "g_zero",
            Self::FrozenBurgers => "frozen_burgers",
            Self::ShearFlock => "shear_flock",
            Self::CriticalDemo => "critical_demo",
            Self::SupercriticalCriterion => "supercritical_criterion",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    #[serde(default = "one")]
    pub dim: usize,
    /// Points per dimension; defaults to 512 in 1D and 128 otherwise.
    #[serde(default)]
    pub n: Option<usize>,
    #[serde(default = "tau")]
    pub length: f64,
}

impl Default for GridSpec {
    fn default() -> Self {
        Self {
            dim: 1,
            n: None,
            length: TAU,
        }
    }
}

impl GridSpec {
    pub fn points(&self) -> usize {
        self.n.unwrap_or(if self.dim == 1 { 512 } else { 128 })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverSpec {
    pub alpha: f64,
    #[serde(default = "rk4")]
    pub scheme: Scheme,
    #[serde(default = "half")]
    pub cfl: f64,
    #[serde(default = "yes")]
    pub dealias: bool,
    #[serde(default = "ten")]
    pub t_end: f64,
    /// Snapshot every this many steps.
    #[serde(default = "fifty")]
    pub output_stride: usize,
    #[serde(default = "blowup")]
    pub blowup_threshold: f64,
    #[serde(default = "max_steps")]
    pub max_steps: usize,
}

impl SolverSpec {
    pub fn to_config(&self, frozen: bool) -> SolverConfig {
        SolverConfig {
            alpha: self.alpha,
            scheme: self.scheme,
            cfl: self.cfl,
            dealias: self.dealias,
            frozen_density: frozen,
            t_end: self.t_end,
            output_stride: self.output_stride,
            blowup_threshold: self.blowup_threshold,
        }
    }
}

/// One Fourier mode `amplitude · cos(k·x + phase)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModeSpec {
    pub k: Vec<i64>,
    pub amplitude: f64,
    #[serde(default)]
    pub phase: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DataSpec {
    /// Mean density.
    #[serde(default = "one_f")]
    pub rho_bar: f64,
    /// Depth of the lowest density trough below `rho_bar` for random data.
    #[serde(default = "rho_amp")]
    pub rho_amplitude: f64,
    /// `max |u₀ − u_mean|` for random data.
    #[serde(default = "one_f")]
    pub u_amplitude: f64,
    #[serde(default)]
    pub u_mean: f64,
    /// Largest wavenumber component of random data.
    #[serde(default = "modes")]
    pub max_mode: i64,
    /// Replace the random density perturbation by these modes.
    #[serde(default)]
    pub rho_modes: Option<Vec<ModeSpec>>,
    /// Replace the random velocity by these modes (plus `u_mean`).
    #[serde(default)]
    pub u_modes: Option<Vec<ModeSpec>>,
}

impl Default for DataSpec {
    fn default() -> Self {
        Self {
            rho_bar: 1.0,
            rho_amplitude: rho_amp(),
            u_amplitude: 1.0,
            u_mean: 0.0,
            max_mode: modes(),
            rho_modes: None,
            u_modes: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DiagnosticsSpec {
    /// Record every this many steps.
    #[serde(default = "ten_u")]
    pub stride: usize,
    /// Hölder exponent of the tracked `C^σ` seminorm.
    #[serde(default = "sigma")]
    pub sigma: f64,
    /// Exponent of the flocking residual norm.
    #[serde(default = "half")]
    pub beta: f64,
    /// Select MOC parameters and scan every recorded state.
    #[serde(default)]
    pub moc: Option<bool>,
    /// Selection uses `min_t rho_min / f` and `f · max_t rho_max`.
    #[serde(default = "one_f")]
    pub density_bound_factor: f64,
}

impl Default for DiagnosticsSpec {
    fn default() -> Self {
        Self {
            stride: 10,
            sigma: sigma(),
            beta: 0.5,
            moc: None,
            density_bound_factor: 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub scenario: ScenarioKind,
    #[serde(default = "seed")]
    pub seed: u64,
    #[serde(default)]
    pub output_dir: Option<PathBuf>,
    #[serde(default)]
    pub grid: GridSpec,
    pub solver: SolverSpec,
    #[serde(default)]
    pub data: DataSpec,
    #[serde(default)]
    pub diagnostics: DiagnosticsSpec,
}

fn one() -> usize {
    1
}
fn one_f() -> f64 {
    1.0
}
fn tau() -> f64 {
    TAU
}
fn rk4() -> Scheme {
    Scheme::ExplicitRK4
}
fn half() -> f64 {
    0.5
}
fn yes() -> bool {
    true
}
fn ten() -> f64 {
    10.0
}
fn ten_u() -> usize {
    10
}
fn fifty() -> usize {
    50
}
fn blowup() -> f64 {
    1e4
}
fn max_steps() -> usize {
    2_000_000
}
fn rho_amp() -> f64 {
    0.3
}
fn modes() -> i64 {
    3
}
fn sigma() -> f64 {
    0.75
}
fn seed() -> u64 {
    1
}

impl ScenarioConfig {
    pub fn from_toml(text: &str) -> Result<Self, ScenarioError> {
        let cfg: Self = toml::from_str(text).map_err(|e| ScenarioError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, ScenarioError> {
        let text = std::fs::read_to_string(path).map_err(|e| ScenarioError::Io {
            path: path.to_path_buf(),
            message: e.to_string(),
        })?;
        Self::from_toml(&text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn frozen_density(&self) -> bool {
        self.scenario == ScenarioKind::FrozenBurgers
    }

    pub fn solver_config(&self) -> SolverConfig {
        self.solver.to_config(self.frozen_density())
    }

    /// MOC scans default on except for the frozen-density model.
    pub fn moc_enabled(&self) -> bool {
        self.diagnostics.moc.unwrap_or(!self.frozen_density())
    }

    pub fn validate(&self) -> Result<(), ScenarioError> {
        let bad = |m: String| Err(ScenarioError::Config(m));
        self.solver_config().validate().map_err(ScenarioError::Config)?;
        let alpha = self.solver.alpha;
        if !(1..=3).contains(&self.grid.dim) {
            return bad(format!("grid.dim must be 1, 2 or 3, got {}", self.grid.dim));
        }
        let n = self.grid.points();
        if n < 4 || n % 2 != 0 {
            return bad(format!("grid.n must be even and at least 4, got {n}"));
        }
        if !(self.grid.length > 0.0) {
            return bad("grid.length must be positive".into());
        }
        if self.diagnostics.stride == 0 {
            return bad("diagnostics.stride must be at least 1".into());
        }
        let d = &self.data;
        if !(d.rho_bar > 0.0) {
            return bad("data.rho_bar must be positive".into());
        }
        if !(d.max_mode >= 1 && (d.max_mode as usize) < n / 3) {
            return bad(format!("data.max_mode must lie in [1, n/3), got {}", d.max_mode));
        }
        for m in d.rho_modes.iter().chain(d.u_modes.iter()).flatten() {
            if m.k.len() != self.grid.dim {
                return bad(format!("mode {:?} has {} components on a {}-d grid", m.k, m.k.len(), self.grid.dim));
            }
        }
        match self.scenario {
            ScenarioKind::GZero => {
                if let Some(ms) = &d.rho_modes {
                    if ms.iter().any(|m| m.k[0] == 0) {
                        return bad("g_zero: density modes must have k1 != 0".into());
                    }
                }
            }
            ScenarioKind::ShearFlock => {
                if self.grid.dim != 2 {
                    return bad("shear_flock requires grid.dim = 2".into());
                }
                for m in d.rho_modes.iter().chain(d.u_modes.iter()).flatten() {
                    if m.k[0] != 0 {
                        return bad("shear_flock: data must not depend on x1 (k1 = 0)".into());
                    }
                }
            }
            ScenarioKind::CriticalDemo => {
                if (alpha - 1.0).abs() > 1e-12 {
                    return bad(format!("critical_demo requires alpha = 1, got {alpha}"));
                }
            }
            ScenarioKind::SupercriticalCriterion => {
                let s = self.diagnostics.sigma;
                if !(alpha > 0.0 && alpha < 1.0) {
                    return bad(format!("supercritical_criterion requires alpha in (0,1), got {alpha}"));
                }
                if !(s > 1.0 - alpha && s < 1.0) {
                    return bad(format!("supercritical_criterion requires sigma in (1 - alpha, 1), got {s}"));
                }
            }
            ScenarioKind::Generic | ScenarioKind::FrozenBurgers => {}
        }
        if !(self.diagnostics.sigma > 0.0 && self.diagnostics.sigma <= 1.0) {
            return bad("diagnostics.sigma must lie in (0,1]".into());
        }
        if !(self.diagnostics.beta > 0.0 && self.diagnostics.beta < 1.0) {
            return bad("diagnostics.beta must lie in (0,1)".into());
        }
        if !(self.diagnostics.density_bound_factor >= 1.0) {
            return bad("diagnostics.density_bound_factor must be at least 1".into());
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_config_gets_defaults() {
        let c = ScenarioConfig::from_toml("scenario = \"generic\"\n[solver]\nalpha = 1.5\n").unwrap();
        assert_eq!(c.grid.points(), 512);
        assert_eq!(c.solver.t_end, 10.0);
        assert!(c.moc_enabled());
        let back = ScenarioConfig::from_toml(&c.to_toml()).unwrap();
        assert_eq!(back, c);
    }

    #[test]
    fn scenario_constraints() {
        let shear = "scenario = \"shear_flock\"\n[solver]\nalpha = 0.5\n";
        assert!(ScenarioConfig::from_toml(shear).is_err());
        let sup = "scenario = \"supercritical_criterion\"\n[solver]\nalpha = 0.5\n[diagnostics]\nsigma = 0.4\n";
        assert!(ScenarioConfig::from_toml(sup).is_err());
        let crit = "scenario = \"critical_demo\"\n[solver]\nalpha = 1.2\n";
        assert!(ScenarioConfig::from_toml(crit).is_err());
        let unknown = "scenario = \"generic\"\nbogus = 1\n[solver]\nalpha = 1.0\n";
        assert!(ScenarioConfig::from_toml(unknown).is_err());
    }
}
