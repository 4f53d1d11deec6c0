//! Experiment configuration: TOML text with `[model]`, `[scan]`,
//! `[integrator]`, `[seeds]` and `[output]` tables.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::dynamics::{IntegratorConfig, Scheme};
use crate::error::{Error, Result};
use crate::hilbert::{SpaceDims, MAX_N_MAX};
use crate::model::{resonance_detuning_for, ModelParams};

#[derive(Copy, Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
#[value(rename_all = "lowercase")]
pub enum Preset {
    Superrabi,
    Steadyscan,
    Trajectory,
    G2tau,
    Jcregime,
    Resonances,
    Custom,
}

impl Preset {
    pub fn name(self) -> &'static str {
        match self {
            Preset::Superrabi => "superrabi",
            Preset::Steadyscan => "steadyscan",
            Preset::Trajectory => "trajectory",
            Preset::G2tau => "g2tau",
            Preset::Jcregime => "jcregime",
            Preset::Resonances => "resonances",
            Preset::Custom => "custom",
        }
    }

    /// Presets whose physics includes the decay channels.
    pub fn is_dissipative(self) -> bool {
        matches!(self, Preset::Steadyscan | Preset::Trajectory | Preset::G2tau | Preset::Custom)
    }

    /// Rate unit used when reporting results.
    pub fn rate_unit(self) -> &'static str {
        if self.is_dissipative() {
            "kappa"
        } else {
            "J"
        }
    }
}

impl fmt::Display for Preset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSection {
    pub n: u32,
    #[serde(default = "default_j")]
    pub j: f64,
    pub omega_l: f64,
    pub delta_n: f64,
    /// Defaults to the first-order bundle resonance.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub delta_a: Option<f64>,
    #[serde(default = "default_kappa")]
    pub kappa: f64,
    #[serde(default = "default_gamma")]
    pub gamma: f64,
    #[serde(default = "default_n_max")]
    pub n_max: usize,
}

fn default_j() -> f64 {
    0.3
}
fn default_kappa() -> f64 {
    1.0
}
fn default_gamma() -> f64 {
    0.1
}
fn default_n_max() -> usize {
    15
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScanVariable {
    DeltaA,
    DeltaN,
    OmegaL,
    J,
    Kappa,
    Gamma,
}

impl ScanVariable {
    pub fn name(self) -> &'static str {
        match self {
            ScanVariable::DeltaA => "delta_a",
            ScanVariable::DeltaN => "delta_n",
            ScanVariable::OmegaL => "omega_l",
            ScanVariable::J => "j",
            ScanVariable::Kappa => "kappa",
            ScanVariable::Gamma => "gamma",
        }
    }

    pub fn apply(self, mut p: ModelParams, v: f64) -> ModelParams {
        match self {
            ScanVariable::DeltaA => p.delta_a = v,
            ScanVariable::DeltaN => p.delta_n = v,
            ScanVariable::OmegaL => p.omega_l = v,
            ScanVariable::J => p.j = v,
            ScanVariable::Kappa => p.kappa = v,
            ScanVariable::Gamma => p.gamma = v,
        }
        p
    }
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Spacing {
    Linear,
    Log,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScanSection {
    #[serde(default = "default_variable")]
    pub variable: ScanVariable,
    #[serde(default = "default_scan_min")]
    pub min: f64,
    #[serde(default = "default_scan_max")]
    pub max: f64,
    /// Signed so that a negative count is reported against this field.
    #[serde(default = "default_points")]
    pub points: i64,
    #[serde(default = "default_spacing")]
    pub spacing: Spacing,
    /// Bundle sizes for delayed correlations; defaults to `[1, n]`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bundle_sizes: Option<Vec<usize>>,
    /// Highest order of the resonance table.
    #[serde(default = "default_mu_max")]
    pub mu_max: u32,
}

fn default_variable() -> ScanVariable {
    ScanVariable::DeltaA
}
fn default_scan_min() -> f64 {
    -40.0
}
fn default_scan_max() -> f64 {
    40.0
}
fn default_points() -> i64 {
    801
}
fn default_spacing() -> Spacing {
    Spacing::Linear
}
fn default_mu_max() -> u32 {
    3
}

impl Default for ScanSection {
    fn default() -> Self {
        Self {
            variable: default_variable(),
            min: default_scan_min(),
            max: default_scan_max(),
            points: default_points(),
            spacing: default_spacing(),
            bundle_sizes: None,
            mu_max: default_mu_max(),
        }
    }
}

impl ScanSection {
    /// Ascending grid; `min == max` repeats the point.
    pub fn grid(&self) -> Vec<f64> {
        let n = self.points as usize;
        match self.spacing {
            Spacing::Linear => (0..n)
                .map(|k| {
                    if k + 1 == n {
                        self.max
                    } else {
                        self.min + (self.max - self.min) * k as f64 / (n - 1) as f64
                    }
                })
                .collect(),
            Spacing::Log => crate::observables::log_grid(self.min, self.max, n),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IntegratorSection {
    /// Defaults to `adaptive` for dissipative presets, `fixed_rk4` otherwise.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scheme: Option<Scheme>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dt: Option<f64>,
    #[serde(default = "default_rel_tol")]
    pub rel_tol: f64,
    #[serde(default = "default_abs_tol")]
    pub abs_tol: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t_final: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sample_dt: Option<f64>,
}

fn default_rel_tol() -> f64 {
    1e-8
}
fn default_abs_tol() -> f64 {
    1e-10
}

impl Default for IntegratorSection {
    fn default() -> Self {
        Self {
            scheme: None,
            dt: None,
            rel_tol: default_rel_tol(),
            abs_tol: default_abs_tol(),
            t_final: None,
            sample_dt: None,
        }
    }
}

impl IntegratorSection {
    pub fn integrator(&self) -> IntegratorConfig {
        IntegratorConfig {
            scheme: self.scheme.unwrap_or(Scheme::FixedRk4),
            dt: self.dt,
            rel_tol: self.rel_tol,
            abs_tol: self.abs_tol,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SeedsSection {
    #[serde(default)]
    pub base_seed: u64,
    #[serde(default = "default_trajectories")]
    pub n_trajectories: usize,
}

fn default_trajectories() -> usize {
    100
}

impl Default for SeedsSection {
    fn default() -> Self {
        Self { base_seed: 0, n_trajectories: default_trajectories() }
    }
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
    Json,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSection {
    #[serde(default = "default_directory")]
    pub directory: String,
    #[serde(default = "default_formats")]
    pub formats: Vec<Format>,
}

fn default_directory() -> String {
    "out".into()
}
fn default_formats() -> Vec<Format> {
    vec![Format::Csv]
}

impl Default for OutputSection {
    fn default() -> Self {
        Self { directory: default_directory(), formats: default_formats() }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub preset: Option<Preset>,
    pub model: ModelSection,
    #[serde(default)]
    pub scan: ScanSection,
    #[serde(default)]
    pub integrator: IntegratorSection,
    #[serde(default)]
    pub seeds: SeedsSection,
    #[serde(default)]
    pub output: OutputSection,
}

impl FromStr for ExperimentConfig {
    type Err = Error;

    fn from_str(text: &str) -> Result<Self> {
        parse_config(text)
    }
}

/// Parses and resolves a configuration. Unknown keys are rejected.
pub fn parse_config(text: &str) -> Result<ExperimentConfig> {
    let raw: ExperimentConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
    raw.resolve()
}

impl ExperimentConfig {
    /// Validates the fields and fills every preset-dependent default, so that
    /// the result re-parses to itself.
    pub fn resolve(mut self) -> Result<Self> {
        let m = &self.model;
        if m.n < 1 {
            return Err(Error::Config("model.n must be at least 1".into()));
        }
        if m.n_max < 1 || m.n_max > MAX_N_MAX {
            return Err(Error::Config(format!("model.n_max must lie in 1..={MAX_N_MAX}")));
        }
        for (name, v) in [("model.j", m.j), ("model.omega_l", m.omega_l), ("model.delta_n", m.delta_n)] {
            if !v.is_finite() {
                return Err(Error::Config(format!("{name} must be finite")));
            }
        }
        for (name, v) in [("model.kappa", m.kappa), ("model.gamma", m.gamma)] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(Error::Config(format!("{name} must be a non-negative number")));
            }
        }
        if self.model.delta_a.is_none() {
            let r = resonance_detuning_for(m.n, m.delta_n, m.omega_l)
                .map_err(|e| Error::Config(format!("model.delta_a absent and no default: {e}")))?;
            self.model.delta_a = Some(r);
        }

        let s = &self.scan;
        if s.points < 2 {
            return Err(Error::Config(format!("scan.points = {} must be at least 2", s.points)));
        }
        if !(s.min.is_finite() && s.max.is_finite()) {
            return Err(Error::Config("scan.min and scan.max must be finite".into()));
        }
        if s.min > s.max {
            return Err(Error::Config("scan.min must not exceed scan.max".into()));
        }
        if s.spacing == Spacing::Log && !(s.min > 0.0) {
            return Err(Error::Config("scan.min must be positive for log spacing".into()));
        }
        if s.mu_max < 2 {
            return Err(Error::Config("scan.mu_max must be at least 2".into()));
        }
        if let Some(b) = &s.bundle_sizes {
            if b.is_empty() || b.contains(&0) {
                return Err(Error::Config("scan.bundle_sizes must be non-empty positive integers".into()));
            }
        }

        let i = &self.integrator;
        if let Some(dt) = i.dt {
            if !(dt > 0.0 && dt.is_finite()) {
                return Err(Error::Config("integrator.dt must be positive".into()));
            }
        }
        if !(i.rel_tol > 0.0 && i.abs_tol > 0.0) {
            return Err(Error::Config("integrator.rel_tol and abs_tol must be positive".into()));
        }
        for (name, v) in [("integrator.t_final", i.t_final), ("integrator.sample_dt", i.sample_dt)] {
            if let Some(v) = v {
                if !(v > 0.0 && v.is_finite()) {
                    return Err(Error::Config(format!("{name} must be positive")));
                }
            }
        }
        if self.seeds.n_trajectories < 1 {
            return Err(Error::Config("seeds.n_trajectories must be at least 1".into()));
        }
        if self.output.formats.is_empty() {
            return Err(Error::Config("output.formats must not be empty".into()));
        }

        if let Some(preset) = self.preset {
            self.apply_preset_defaults(preset)?;
        }
        Ok(self)
    }

    fn apply_preset_defaults(&mut self, preset: Preset) -> Result<()> {
        if self.integrator.scheme.is_none() {
            self.integrator.scheme =
                Some(if preset.is_dissipative() { Scheme::Adaptive } else { Scheme::FixedRk4 });
        }
        match preset {
            Preset::Superrabi => {
                if self.integrator.t_final.is_none() {
                    let p = self.params()?;
                    let w = crate::model::omega_eff_mollow(&p)
                        .map_err(|e| Error::Config(format!("integrator.t_final absent and no default: {e}")))?
                        .omega_eff
                        .abs();
                    self.integrator.t_final = Some(2.0 * std::f64::consts::PI / w);
                }
                if self.integrator.sample_dt.is_none() {
                    self.integrator.sample_dt = Some(self.integrator.t_final.unwrap() / 1000.0);
                }
            }
            Preset::Trajectory => {
                let k = if self.model.kappa > 0.0 { self.model.kappa } else { 1.0 };
                self.integrator.t_final.get_or_insert(50.0 / k);
                self.integrator.sample_dt.get_or_insert(0.05 / k);
            }
            Preset::G2tau => {
                let n = self.model.n as usize;
                self.scan.bundle_sizes.get_or_insert_with(|| if n == 1 { vec![1] } else { vec![1, n] });
            }
            _ => {}
        }
        Ok(())
    }

    /// Binds the configuration to the preset named on the command line. A
    /// preset recorded in the file must agree with it.
    pub fn for_preset(mut self, preset: Preset) -> Result<Self> {
        if let Some(p) = self.preset {
            if p != preset {
                return Err(Error::Config(format!(
                    "config names preset `{p}` but `{preset}` was requested"
                )));
            }
        }
        self.preset = Some(preset);
        self.resolve()
    }

    /// Model parameters at the configured (or default) δ_a.
    pub fn params(&self) -> Result<ModelParams> {
        let m = &self.model;
        let delta_a = match m.delta_a {
            Some(v) => v,
            None => resonance_detuning_for(m.n, m.delta_n, m.omega_l)?,
        };
        let p = ModelParams {
            n: m.n,
            j: m.j,
            omega_l: m.omega_l,
            delta_n: m.delta_n,
            delta_a,
            kappa: m.kappa,
            gamma: m.gamma,
            dims: SpaceDims::new(m.n_max)?,
        };
        p.validate()?;
        Ok(p)
    }

    /// Resolved configuration as TOML text.
    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }
}
