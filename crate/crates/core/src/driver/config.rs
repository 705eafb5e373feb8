//! Run configuration: one TOML document with a section per module.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::controller::ControllerConfig;
use crate::discretization::{MaterialMap, PhysicsParams};
use crate::error::{Error, Result};
use crate::fac::FacConfig;
use crate::jfnk::NewtonConfig;
use crate::mesh::{Domain, IndexBox};
use crate::regrid::RegridPolicy;
use crate::stepper::PreconditionerKind;

/// Geometry, resolution and initial state.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ProblemConfig {
    pub domain: Domain,
    pub base_resolution: [i32; 3],
    /// Most levels the hierarchy may have (1 = uniform grid).
    pub max_levels: usize,
    /// Uniform initial radiation energy; the temperature starts at `E0^(1/4)`.
    pub e0: f64,
    /// Fixed refinement present from the start, per level below the finest,
    /// in that level's index space.
    pub refine_boxes: Vec<Vec<IndexBox>>,
}

impl Default for ProblemConfig {
    fn default() -> Self {
        Self {
            domain: Domain::unit_cube(),
            base_resolution: [16, 16, 16],
            max_levels: 3,
            e0: 1e-5,
            refine_boxes: Vec::new(),
        }
    }
}

/// Horizon, output cadence and step-size mode.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TimeConfig {
    pub t_final: f64,
    /// Simulated time between snapshots; zero writes only the initial and
    /// final states.
    pub dump_interval: f64,
    /// Fixed step size; disables the step controller when set.
    pub fixed_dt: Option<f64>,
    /// Prescribed sequence of step sizes (takes precedence over `fixed_dt`).
    pub dt_schedule: Vec<f64>,
    /// Times the integration lands on exactly, for sampling.
    pub sample_times: Vec<f64>,
}

impl Default for TimeConfig {
    fn default() -> Self {
        Self {
            t_final: 0.1,
            dump_interval: 0.0,
            fixed_dt: None,
            dt_schedule: Vec::new(),
            sample_times: Vec::new(),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SolverConfig {
    pub preconditioner: PreconditionerKind,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            preconditioner: PreconditionerKind::Fac,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RegridConfig {
    /// Adapt the hierarchy during the run.
    pub enabled: bool,
    #[serde(flatten)]
    pub policy: RegridPolicy,
}

impl Default for RegridConfig {
    fn default() -> Self {
        Self {
            enabled: true,
            policy: RegridPolicy::default(),
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct OutputConfig {
    /// Write `.amr` snapshots (CSV files and the summary are always written
    /// when an output directory is given).
    pub snapshots: bool,
}

/// Everything a run needs.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RunConfig {
    pub name: String,
    pub problem: ProblemConfig,
    pub material: MaterialMap,
    pub physics: PhysicsParams,
    pub time: TimeConfig,
    pub controller: ControllerConfig,
    pub newton: NewtonConfig,
    pub fac: FacConfig,
    pub solver: SolverConfig,
    pub regrid: RegridConfig,
    pub output: OutputConfig,
}

impl RunConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        let p = &self.problem;
        if p.base_resolution.iter().any(|&n| n < 1) {
            return bad(format!(
                "base resolution must be positive, got {:?}",
                p.base_resolution
            ));
        }
        if p.max_levels < 1 || p.max_levels < p.refine_boxes.len() + 1 {
            return bad(format!(
                "max_levels = {} cannot hold {} fixed refinement levels",
                p.max_levels,
                p.refine_boxes.len()
            ));
        }
        if (0..3).any(|a| !(p.domain.hi[a] > p.domain.lo[a])) {
            return bad("domain must have positive extent".into());
        }
        if !(p.e0 > 0.0) {
            return bad(format!("initial energy must be positive, got {}", p.e0));
        }
        let t = &self.time;
        if !(t.t_final >= 0.0 && t.t_final.is_finite()) {
            return bad(format!(
                "t_final must be finite and non-negative, got {}",
                t.t_final
            ));
        }
        if !(t.dump_interval >= 0.0) {
            return bad("dump_interval must be non-negative".into());
        }
        if t.fixed_dt.is_some_and(|dt| !(dt > 0.0)) || t.dt_schedule.iter().any(|&dt| !(dt > 0.0)) {
            return bad("prescribed step sizes must be positive".into());
        }
        if t.sample_times.iter().any(|&s| !(s > 0.0 && s <= t.t_final)) {
            return bad("sample times must lie in (0, t_final]".into());
        }
        self.material.validate()?;
        self.physics.validate()?;
        self.controller.validate()?;
        self.newton.validate()?;
        self.fac.validate()?;
        self.regrid.policy.validate()?;
        Ok(())
    }

    /// Finest cell count along x the hierarchy may reach.
    pub fn finest_cells_x(&self) -> i32 {
        self.problem.base_resolution[0]
            * crate::mesh::REFINE_RATIO.pow(self.problem.max_levels as u32 - 1)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self)
            .map_err(|e| Error::Config(format!("cannot serialise configuration: {e}")))
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: RunConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_toml(&std::fs::read_to_string(path)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn toml_round_trip() {
        let mut cfg = RunConfig::default();
        cfg.problem.refine_boxes = vec![vec![IndexBox::new([0, 0, 0], [3, 7, 7])]];
        cfg.time.sample_times = vec![0.02, 0.05];
        cfg.time.fixed_dt = Some(1e-4);
        let text = cfg.to_toml().unwrap();
        assert_eq!(RunConfig::from_toml(&text).unwrap(), cfg);
    }

    #[test]
    fn partial_documents_take_defaults() {
        let cfg = RunConfig::from_toml("[time]\nt_final = 0.5\n[regrid]\ninterval = 5\n").unwrap();
        assert_eq!(cfg.time.t_final, 0.5);
        assert_eq!(cfg.regrid.policy.interval, 5);
        assert!(cfg.regrid.enabled);
        assert_eq!(cfg.problem, ProblemConfig::default());
    }

    #[test]
    fn invalid_values_are_rejected() {
        assert!(RunConfig::from_toml("[time]\nt_final = -1.0\n").is_err());
        assert!(RunConfig::from_toml("[regrid]\nefficiency = 1.5\n").is_err());
        assert!(RunConfig::from_toml("[problem]\nmax_levels = 0\n").is_err());
        assert!(RunConfig::from_toml("[problem]\nunknown_key = 1\n").is_ok());
    }
}
