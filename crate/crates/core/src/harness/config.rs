//! TOML scenario files.
//!
//! ```toml
//! schema_version = 1
//! seed = 0
//! dt_policy = 0.1
//! duration_s = 120.0
//!
//! [environment]
//! start = { x = 0.0, y = 0.0 }
//! target = { x = 0.0, y = 150.0 }
//! obstacles = [{ center = { x = 0.0, y = 100.0 }, radius = 5.0 }]
//!
//! [policy]
//! kind = "surrogate"        # or "weights" with `path`, or "hover"
//!
//! [attack]
//! kind = "constrained"      # "none", "unconstrained", "ramp"
//! step_m = 0.1
//! ```
//!
//! Omitted sections take their defaults; unknown keys are rejected.

use std::f64::consts::FRAC_PI_2;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::HarnessError;
use crate::attack::{ConstrainedConfig, SearchGrid};
use crate::estimator::FusionConfig;
use crate::geo::{FlatEarthFrame, LocalPos};
use crate::policy::{load_policy, HoverPolicy, NavPolicy, SurrogateConfig, SurrogatePolicy, TargetSpec};
use crate::world::{ActionLimits, Bounds, DepthConfig, Environment, Obstacle};

pub const SCHEMA_VERSION: u32 = 1;

fn default_dt() -> f64 {
    0.1
}

fn default_collision_radius() -> f64 {
    1.0
}

fn default_goal_radius() -> f64 {
    3.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EnvironmentConfig {
    pub start: LocalPos,
    /// Defaults to the bearing from start to target.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub start_yaw: Option<f64>,
    pub target: LocalPos,
    #[serde(default)]
    pub obstacles: Vec<Obstacle>,
    #[serde(default = "default_collision_radius")]
    pub collision_radius: f64,
    #[serde(default = "default_goal_radius")]
    pub goal_radius: f64,
    /// Defaults to a box 100 m beyond every configured point.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bounds: Option<Bounds>,
    /// Relative-distance normalization; defaults to the start-target distance.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub d_scale: Option<f64>,
}

impl EnvironmentConfig {
    pub fn build(&self) -> Result<Environment, HarnessError> {
        let bounds = self.bounds.unwrap_or_else(|| {
            let pts = std::iter::once(self.start).chain(std::iter::once(self.target)).chain(self.obstacles.iter().map(|o| o.center));
            let (mut lo, mut hi) = (self.start, self.start);
            for p in pts {
                lo = LocalPos::new(lo.x.min(p.x), lo.y.min(p.y));
                hi = LocalPos::new(hi.x.max(p.x), hi.y.max(p.y));
            }
            Bounds { min: lo - LocalPos::new(100.0, 100.0), max: hi + LocalPos::new(100.0, 100.0) }
        });
        let env = Environment {
            obstacles: self.obstacles.clone(),
            target: self.target,
            collision_radius: self.collision_radius,
            bounds,
            start: self.start,
            goal_radius: self.goal_radius,
        };
        env.validate()?;
        Ok(env)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum PolicySource {
    Surrogate(SurrogateConfig),
    /// Binary weight file; a relative path is resolved against the config file's directory.
    Weights { path: PathBuf },
    Hover,
}

impl Default for PolicySource {
    fn default() -> Self {
        PolicySource::Surrogate(SurrogateConfig::default())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct UnconstrainedConfig {
    pub grid: SearchGrid,
    pub theta_tol: f64,
    /// The search runs while the vehicle is at most this far from an obstacle surface.
    pub engage_within_m: f64,
}

impl Default for UnconstrainedConfig {
    fn default() -> Self {
        Self { grid: SearchGrid::default(), theta_tol: 0.35, engage_within_m: 20.0 }
    }
}

/// Constant-rate drift of the reported position over a time window; the
/// offset reached at `stop_s` is held afterwards.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RampConfig {
    pub rate_mps: f64,
    pub direction: LocalPos,
    pub start_s: f64,
    pub stop_s: f64,
}

impl Default for RampConfig {
    fn default() -> Self {
        Self { rate_mps: 1.0, direction: LocalPos::new(0.0, 1.0), start_s: 0.0, stop_s: f64::INFINITY }
    }
}

impl RampConfig {
    pub fn unit_direction(&self) -> LocalPos {
        self.direction * (1.0 / self.direction.norm())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum AttackConfig {
    #[default]
    None,
    Constrained(ConstrainedConfig),
    Unconstrained(UnconstrainedConfig),
    Ramp(RampConfig),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct NoiseConfig {
    /// GPS horizontal noise standard deviation, m. The noise stream is seeded by the scenario seed.
    pub sigma: f64,
}

impl Default for NoiseConfig {
    fn default() -> Self {
        Self { sigma: 0.5 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub schema_version: u32,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_dt")]
    pub dt_policy: f64,
    pub duration_s: f64,
    pub environment: EnvironmentConfig,
    #[serde(default)]
    pub policy: PolicySource,
    #[serde(default)]
    pub attack: AttackConfig,
    #[serde(default)]
    pub fusion: FusionConfig,
    #[serde(default)]
    pub noise: NoiseConfig,
    #[serde(default)]
    pub frame: FlatEarthFrame,
    #[serde(default)]
    pub depth: DepthConfig,
    #[serde(default)]
    pub limits: ActionLimits,
}

impl ScenarioConfig {
    /// Minimal scenario with every optional section at its default.
    pub fn new(start: LocalPos, target: LocalPos, obstacles: Vec<Obstacle>, duration_s: f64) -> Self {
        Self {
            schema_version: SCHEMA_VERSION,
            seed: 0,
            dt_policy: default_dt(),
            duration_s,
            environment: EnvironmentConfig {
                start,
                start_yaw: None,
                target,
                obstacles,
                collision_radius: default_collision_radius(),
                goal_radius: default_goal_radius(),
                bounds: None,
                d_scale: None,
            },
            policy: PolicySource::default(),
            attack: AttackConfig::None,
            fusion: FusionConfig::default(),
            noise: NoiseConfig::default(),
            frame: FlatEarthFrame::default(),
            depth: DepthConfig::default(),
            limits: ActionLimits::default(),
        }
    }

    pub fn from_toml_str(text: &str) -> Result<Self, HarnessError> {
        #[derive(Deserialize)]
        struct Probe {
            schema_version: Option<toml::Value>,
        }
        let probe: Probe = toml::from_str(text).map_err(|e| HarnessError::Config(e.to_string()))?;
        match probe.schema_version.as_ref().and_then(|v| v.as_integer()) {
            Some(v) if v == SCHEMA_VERSION as i64 => {}
            Some(v) => {
                return Err(HarnessError::Config(format!(
                    "schema_version {v} is not supported; expected {SCHEMA_VERSION}"
                )))
            }
            None => return Err(HarnessError::Config("missing integer schema_version".into())),
        }
        let cfg: Self = toml::from_str(text).map_err(|e| HarnessError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Reads a scenario file; relative weight paths are resolved against its directory.
    pub fn load(path: &Path) -> Result<Self, HarnessError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| HarnessError::Config(format!("{}: {e}", path.display())))?;
        let mut cfg = Self::from_toml_str(&text)?;
        if let PolicySource::Weights { path: w } = &mut cfg.policy {
            if w.is_relative() {
                if let Some(dir) = path.parent() {
                    *w = dir.join(&*w);
                }
            }
        }
        Ok(cfg)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string_pretty(self).expect("scenario config is always representable as TOML")
    }

    pub fn validate(&self) -> Result<(), HarnessError> {
        let err = |m: String| Err(HarnessError::Config(m));
        if self.schema_version != SCHEMA_VERSION {
            return err(format!("schema_version {} is not supported; expected {SCHEMA_VERSION}", self.schema_version));
        }
        if !(self.dt_policy > 0.0) {
            return err("dt_policy must be > 0".into());
        }
        if !(self.duration_s >= 0.0) || !self.duration_s.is_finite() {
            return err("duration_s must be a finite value >= 0".into());
        }
        self.fusion.validate().map_err(|e| HarnessError::Config(e.to_string()))?;
        let per_step = self.dt_policy * self.fusion.gps_rate_hz;
        if per_step < 1.0 - 1e-9 || (per_step - per_step.round()).abs() > 1e-9 {
            return err(format!(
                "dt_policy * gps_rate_hz must be a positive integer, got {per_step}"
            ));
        }
        self.depth.validate().map_err(|e| HarnessError::Config(e.to_string()))?;
        self.frame.validate().map_err(|e| HarnessError::Config(e.to_string()))?;
        if !(self.noise.sigma >= 0.0) {
            return err("noise.sigma must be >= 0".into());
        }
        if !(self.limits.v_max > 0.0 && self.limits.omega_max > 0.0) {
            return err("limits must be positive".into());
        }
        if let Some(d) = self.environment.d_scale {
            if !(d > 0.0) {
                return err("environment.d_scale must be > 0".into());
            }
        }
        if self.environment.start == self.environment.target {
            return err("start and target coincide".into());
        }
        self.environment.build()?;
        match &self.attack {
            AttackConfig::Constrained(c) => {
                if !(c.step_m >= 0.0) || c.step_m > c.max_step_m {
                    return err(format!("attack.step_m {} must be in [0, max_step_m = {}]", c.step_m, c.max_step_m));
                }
            }
            AttackConfig::Unconstrained(u) => {
                u.grid.validate().map_err(|e| HarnessError::Config(e.to_string()))?;
            }
            AttackConfig::Ramp(r) => {
                if !(r.direction.norm() > 0.0) || !(r.rate_mps >= 0.0) {
                    return err("ramp needs a nonzero direction and rate >= 0".into());
                }
            }
            AttackConfig::None => {}
        }
        Ok(())
    }

    pub fn gps_per_step(&self) -> usize {
        (self.dt_policy * self.fusion.gps_rate_hz).round() as usize
    }

    pub fn start_yaw(&self) -> f64 {
        let e = &self.environment;
        e.start_yaw.unwrap_or_else(|| {
            let v = e.target - e.start;
            if v == LocalPos::ORIGIN {
                FRAC_PI_2
            } else {
                v.heading()
            }
        })
    }

    pub fn target_spec(&self) -> TargetSpec {
        let e = &self.environment;
        match e.d_scale {
            Some(d_scale) => TargetSpec { pos: e.target, d_scale },
            None => TargetSpec::from_start(e.start, e.target),
        }
    }

    pub fn load_policy(&self) -> Result<Box<dyn NavPolicy>, HarnessError> {
        Ok(match &self.policy {
            PolicySource::Surrogate(s) => Box::new(SurrogatePolicy(SurrogateConfig { limits: self.limits, ..*s })),
            PolicySource::Hover => Box::new(HoverPolicy(self.limits)),
            PolicySource::Weights { path } => {
                let p = load_policy(path).map_err(HarnessError::PolicyLoad)?;
                if p.net.depth_dim() != self.depth.n_rays {
                    return Err(HarnessError::Config(format!(
                        "policy expects {} depth rays, scenario provides {}",
                        p.net.depth_dim(),
                        self.depth.n_rays
                    )));
                }
                Box::new(p)
            }
        })
    }
}
