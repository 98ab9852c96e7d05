//! Run configuration files.
//!
//! Configs are TOML. Unknown keys are rejected and every value is checked
//! against the model invariants before any computation starts. See
//! `docs/config.md` for the schema.

use std::path::Path;

use cavity_core::hilbert::{truncated_weight, TRUNCATION_TOLERANCE};
use cavity_core::oracle::DEFAULT_ORACLE_LIMIT;
use cavity_core::protocol::{InitialCondition, ProtocolSpec, RunSettings, ScanSpec, StageSpec};
use cavity_core::{ExchangeSymmetry, Geometry, HilbertDims, PhysicalParams};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::CliError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub physics: Physics,
    pub hilbert: Hilbert,
    pub particles: Particles,
    pub ensemble: Ensemble,
    #[serde(default)]
    pub sampling: Sampling,
    #[serde(default)]
    pub integrator: Integrator,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scan: Option<Scan>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub oracle: Option<OracleCheck>,
    pub stages: Vec<Stage>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Physics {
    pub u0: f64,
    pub kappa: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GeometryName {
    Ring,
    Linear,
}

impl From<GeometryName> for Geometry {
    fn from(g: GeometryName) -> Self {
        match g {
            GeometryName::Ring => Geometry::Ring,
            GeometryName::Linear => Geometry::Linear,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Hilbert {
    pub n_max: i32,
    pub q_c: usize,
    pub q_s: usize,
    pub geometry: GeometryName,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Statistics {
    Boson,
    Fermion,
}

impl From<Statistics> for ExchangeSymmetry {
    fn from(s: Statistics) -> Self {
        match s {
            Statistics::Boson => ExchangeSymmetry::Boson,
            Statistics::Fermion => ExchangeSymmetry::Fermion,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Initial {
    RandomPhase,
    EvenOnly,
    DarkState,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Particles {
    pub statistics: Statistics,
    /// Momentum-space standard deviation of each packet, in units of ħk.
    pub width: f64,
    #[serde(default = "default_initial")]
    pub initial: Initial,
}

fn default_initial() -> Initial {
    Initial::RandomPhase
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Ensemble {
    pub trajectories: usize,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Sampling {
    pub spacing: f64,
    /// Times at which the two-particle distribution is written.
    #[serde(default)]
    pub joint_times: Vec<f64>,
}

impl Default for Sampling {
    fn default() -> Self {
        Sampling {
            spacing: 1.0,
            joint_times: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Integrator {
    pub dt_max: f64,
    pub ode_tol: f64,
    pub jump_time_tol: f64,
}

impl Default for Integrator {
    fn default() -> Self {
        Integrator {
            dt_max: 0.5,
            ode_tol: 1e-8,
            jump_time_tol: 1e-6,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Stage {
    pub delta_c: f64,
    pub eta: f64,
    pub duration: f64,
    pub target_n: i32,
}

/// Detuning scan around the free-particle resonance of one stage.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scan {
    /// Zero-based index into `stages`.
    pub stage: usize,
    pub half_window: f64,
    pub step: f64,
    pub trajectories: usize,
    #[serde(default = "default_bunching")]
    pub bunching: f64,
}

fn default_bunching() -> f64 {
    0.5
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OracleCheck {
    /// Number of equally spaced comparison times in `(0, T]`.
    pub samples: usize,
    pub z_max: f64,
    /// Absolute tolerance added in quadrature to each standard error.
    #[serde(default = "default_numerical_floor")]
    pub numerical_floor: f64,
}

fn default_numerical_floor() -> f64 {
    1e-8
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self, CliError> {
        let cfg: RunConfig = toml::from_str(text).map_err(|e| CliError::Parse(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    /// SHA-256 of the canonical serialization, as lowercase hex.
    pub fn hash(&self) -> String {
        Sha256::digest(self.to_toml().as_bytes())
            .iter()
            .map(|b| format!("{b:02x}"))
            .collect()
    }

    pub fn physical_params(&self) -> Result<PhysicalParams, CliError> {
        Ok(PhysicalParams::new(self.physics.u0, self.physics.kappa)?)
    }

    pub fn dims(&self) -> Result<HilbertDims, CliError> {
        let h = &self.hilbert;
        Ok(HilbertDims::new(h.n_max, h.q_c, h.q_s, h.geometry.into())?)
    }

    pub fn symmetry(&self) -> ExchangeSymmetry {
        self.particles.statistics.into()
    }

    pub fn protocol(&self) -> Result<ProtocolSpec, CliError> {
        let stages = self
            .stages
            .iter()
            .map(|s| StageSpec::new(s.delta_c, s.eta, s.duration, s.target_n))
            .collect::<Result<Vec<_>, _>>()?;
        Ok(ProtocolSpec::new(stages, self.symmetry(), self.hilbert.geometry.into())?)
    }

    pub fn total_duration(&self) -> f64 {
        self.stages.iter().map(|s| s.duration).sum()
    }

    /// Run settings for `dims`, which may differ from the configured geometry.
    pub fn settings_for(&self, dims: HilbertDims) -> Result<RunSettings, CliError> {
        let mut s = RunSettings::new(self.physical_params()?, dims, self.particles.width);
        s.initial = match self.particles.initial {
            Initial::RandomPhase => InitialCondition::RandomPhase,
            Initial::EvenOnly => InitialCondition::EvenOnly,
            Initial::DarkState => InitialCondition::State(cavity_core::hilbert::dark_state(dims)?),
        };
        s.dt_max = self.integrator.dt_max;
        s.ode_tol = self.integrator.ode_tol;
        s.jump_time_tol = self.integrator.jump_time_tol;
        s.sample_spacing = self.sampling.spacing;
        Ok(s)
    }

    pub fn settings(&self) -> Result<RunSettings, CliError> {
        self.settings_for(self.dims()?)
    }

    pub fn scan_spec(&self) -> Result<Option<(ScanSpec, f64)>, CliError> {
        let Some(scan) = &self.scan else {
            return Ok(None);
        };
        let stage = self.stages.get(scan.stage).ok_or_else(|| {
            CliError::Invalid(format!(
                "scan.stage = {}, but there are {} stages",
                scan.stage,
                self.stages.len()
            ))
        })?;
        let center = cavity_core::protocol::predict_detuning(stage.target_n, 2, self.physics.u0, scan.bunching)?;
        let spec = ScanSpec::around(scan.stage, center, scan.half_window, scan.step, scan.trajectories)?;
        Ok(Some((spec, center)))
    }

    /// Checks every value against the model invariants. Any failure is a
    /// validation error.
    pub fn validate(&self) -> Result<(), CliError> {
        self.check().map_err(|e| match e {
            CliError::Model(m) => CliError::Invalid(m.to_string()),
            other => other,
        })
    }

    fn check(&self) -> Result<(), CliError> {
        self.physical_params()?;
        let dims = self.dims()?;
        self.protocol()?;
        let w = self.particles.width;
        if !(w > 0.0) || !w.is_finite() {
            return Err(CliError::Invalid(format!("particles.width = {w}, need width > 0")));
        }
        if self.particles.statistics == Statistics::Fermion && self.particles.initial == Initial::DarkState {
            return Err(CliError::Invalid("the dark state is bosonic".into()));
        }
        if self.particles.initial != Initial::DarkState {
            let outside = truncated_weight(w, dims.n_max());
            if outside > TRUNCATION_TOLERANCE {
                return Err(cavity_core::Error::Truncation {
                    weight: outside,
                    n_max: dims.n_max(),
                }
                .into());
            }
        }
        if self.ensemble.trajectories == 0 {
            return Err(CliError::Invalid("ensemble.trajectories must be >= 1".into()));
        }
        let s = &self.sampling;
        if !(s.spacing > 0.0) || !s.spacing.is_finite() {
            return Err(CliError::Invalid(format!("sampling.spacing = {}, need spacing > 0", s.spacing)));
        }
        let total = self.total_duration();
        if s.joint_times.iter().any(|&t| !(0.0..=total).contains(&t)) {
            return Err(CliError::Invalid(format!(
                "sampling.joint_times must lie in [0, {total}]"
            )));
        }
        let i = &self.integrator;
        for (name, v) in [("dt_max", i.dt_max), ("ode_tol", i.ode_tol), ("jump_time_tol", i.jump_time_tol)] {
            if !(v > 0.0) || !v.is_finite() {
                return Err(CliError::Invalid(format!("integrator.{name} = {v}, need {name} > 0")));
            }
        }
        if let Some(scan) = &self.scan {
            if !(0.0..=1.0).contains(&scan.bunching) {
                return Err(CliError::Invalid(format!("scan.bunching = {}, need 0 <= B <= 1", scan.bunching)));
            }
            self.scan_spec()?;
        }
        if let Some(o) = &self.oracle {
            if o.samples == 0 {
                return Err(CliError::Invalid("oracle.samples must be >= 1".into()));
            }
            if !(o.numerical_floor >= 0.0) || !o.numerical_floor.is_finite() {
                return Err(CliError::Invalid(format!(
                    "oracle.numerical_floor = {}, need numerical_floor >= 0",
                    o.numerical_floor
                )));
            }
            if !(o.z_max > 0.0) {
                return Err(CliError::Invalid(format!("oracle.z_max = {}, need z_max > 0", o.z_max)));
            }
            if dims.dim() > DEFAULT_ORACLE_LIMIT {
                return Err(cavity_core::Error::Capacity(format!(
                    "oracle dimension {} exceeds limit {DEFAULT_ORACLE_LIMIT}",
                    dims.dim()
                ))
                .into());
            }
        }
        Ok(())
    }
}

pub fn load_config(path: &Path) -> Result<RunConfig, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::Io {
        path: path.display().to_string(),
        source: e,
    })?;
    RunConfig::from_toml(&text).map_err(|e| match e {
        CliError::Parse(m) => CliError::Parse(format!("{}: {m}", path.display())),
        other => other,
    })
}
