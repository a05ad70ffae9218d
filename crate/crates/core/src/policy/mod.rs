//! Navigation policy inputs and outputs.
//!
//! The policy sees a depth scan plus the relative distance and bearing to the
//! target, computed from the position the autopilot *believes* it is at. That
//! dependency on the estimate is the attack surface.

mod io;

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geo::{wrap_angle, LocalPos};
use crate::nn::{Activation, BranchNet, MlpShape, NetError};
use crate::world::{ray_offset, Action, ActionLimits, DepthScan};

pub use io::{load_policy, save_policy, sidecar_path, POLICY_FORMAT_VERSION};

#[derive(Debug, Error)]
pub enum PolicyError {
    #[error("current position coincides with the target")]
    DegenerateRelative,
    #[error(transparent)]
    Network(#[from] NetError),
    #[error("policy file format error: {0}")]
    Format(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TargetSpec {
    pub pos: LocalPos,
    /// Distance normalization, m.
    pub d_scale: f64,
}

impl TargetSpec {
    /// Normalizes by the initial distance so `d_rel_norm` starts at one.
    pub fn from_start(start: LocalPos, target: LocalPos) -> Self {
        let d = start.distance(target);
        Self { pos: target, d_scale: if d > 0.0 { d } else { 1.0 } }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Relative {
    pub d_rel: f64,
    pub yaw_rel: f64,
}

/// Relative distance and bearing of the target as seen from `pos_cur` heading `yaw_cur`.
pub fn compute_rel(pos_cur: LocalPos, yaw_cur: f64, tgt: &TargetSpec) -> Result<Relative, PolicyError> {
    let v = tgt.pos - pos_cur;
    if v == LocalPos::ORIGIN {
        return Err(PolicyError::DegenerateRelative);
    }
    Ok(Relative { d_rel: v.norm(), yaw_rel: wrap_angle(v.heading() - yaw_cur) })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolicyObservation {
    pub depth: Vec<f64>,
    pub d_rel_norm: f64,
    pub yaw_rel_norm: f64,
}

impl PolicyObservation {
    pub fn new(scan: &DepthScan, rel: Relative, d_scale: f64) -> Self {
        Self {
            depth: scan.ranges.clone(),
            d_rel_norm: (rel.d_rel / d_scale).clamp(0.0, 1.0),
            yaw_rel_norm: (rel.yaw_rel / PI).clamp(-1.0, 1.0),
        }
    }

    pub fn physical(&self) -> [f64; 2] {
        [self.d_rel_norm, self.yaw_rel_norm]
    }

    pub fn min_depth(&self) -> Option<(usize, f64)> {
        self.depth.iter().copied().enumerate().min_by(|a, b| a.1.total_cmp(&b.1))
    }
}

/// Anything that maps an observation to an action.
pub trait NavPolicy {
    fn act(&self, obs: &PolicyObservation) -> Result<Action, PolicyError>;
    fn limits(&self) -> ActionLimits;
}

/// Dense two-branch actor: depth features concatenated with the physical state.
#[derive(Debug, Clone, PartialEq)]
pub struct MlpPolicy {
    pub net: BranchNet,
    pub limits: ActionLimits,
}

/// Layer layout of the actor and critics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NetworkShape {
    pub n_rays: usize,
    /// Hidden sizes of the depth branch; the last one is the feature width.
    pub depth_layers: Vec<usize>,
    pub trunk_hidden: Vec<usize>,
}

impl Default for NetworkShape {
    fn default() -> Self {
        Self { n_rays: 16, depth_layers: vec![32, 16], trunk_hidden: vec![64, 64] }
    }
}

impl NetworkShape {
    pub fn depth_branch(&self) -> Result<MlpShape, NetError> {
        let mut dims = vec![self.n_rays];
        dims.extend(&self.depth_layers);
        let acts = vec![Activation::Relu; self.depth_layers.len()];
        MlpShape::new(dims, acts)
    }

    /// Trunk with `extra` physical inputs, `out` outputs and the given output activation.
    pub fn trunk(&self, extra: usize, out: usize, out_act: Activation) -> Result<MlpShape, NetError> {
        let feat = *self.depth_layers.last().unwrap_or(&self.n_rays);
        let mut dims = vec![feat + extra];
        dims.extend(&self.trunk_hidden);
        dims.push(out);
        let mut acts = vec![Activation::Relu; self.trunk_hidden.len()];
        acts.push(out_act);
        MlpShape::new(dims, acts)
    }
}

impl MlpPolicy {
    pub fn zeros(shape: &NetworkShape, limits: ActionLimits) -> Result<Self, PolicyError> {
        let net = BranchNet::zeros(shape.depth_branch()?, shape.trunk(2, 2, Activation::Tanh)?)?;
        Ok(Self { net, limits })
    }

    pub fn from_net(net: BranchNet, limits: ActionLimits) -> Result<Self, PolicyError> {
        if net.extra_dim() != 2 || net.output_dim() != 2 {
            return Err(PolicyError::Format(format!(
                "actor needs 2 physical inputs and 2 outputs, got {} and {}",
                net.extra_dim(),
                net.output_dim()
            )));
        }
        Ok(Self { net, limits })
    }

    /// Raw network outputs in `[-1, 1]^2`.
    pub fn forward_normalized(&self, obs: &PolicyObservation) -> Result<[f64; 2], PolicyError> {
        let out = self.net.forward(&obs.depth, &obs.physical())?;
        Ok([out[0].clamp(-1.0, 1.0), out[1].clamp(-1.0, 1.0)])
    }

    pub fn forward(&self, obs: &PolicyObservation) -> Result<Action, PolicyError> {
        Ok(Action::from_normalized(self.forward_normalized(obs)?, &self.limits))
    }
}

impl NavPolicy for MlpPolicy {
    fn act(&self, obs: &PolicyObservation) -> Result<Action, PolicyError> {
        self.forward(obs)
    }

    fn limits(&self) -> ActionLimits {
        self.limits
    }
}

/// Closed-form goal attraction / obstacle repulsion controller.
///
/// `yaw_rate = clamp(k_goal * yaw_rel + k_obs * w * R)` where `R` pushes away from
/// the closest ray once it is nearer than `d_safe_norm`, and
/// `speed = v_max * min(1, min_depth / d_safe_norm) * max(0.2, 1 - |yaw_rel_norm|) * A`.
/// The repulsion weight `w = min(1, d_rel_norm / d_commit_norm)` fades obstacle
/// avoidance as the target gets close; `d_commit_norm = 0` keeps `w = 1`.
/// The arrival factor `A = min(1, d_rel_norm / d_arrive_norm)` slows the vehicle
/// inside the arrival radius; `d_arrive_norm = 0` disables it.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SurrogateConfig {
    pub k_goal: f64,
    pub k_obs: f64,
    pub d_safe_norm: f64,
    pub d_commit_norm: f64,
    pub d_arrive_norm: f64,
    /// Taken from the scenario rather than the gains table.
    #[serde(skip)]
    pub limits: ActionLimits,
}

impl Default for SurrogateConfig {
    fn default() -> Self {
        Self { k_goal: 1.0, k_obs: 2.0, d_safe_norm: 0.4, d_commit_norm: 0.5, d_arrive_norm: 0.03, limits: ActionLimits::default() }
    }
}

pub fn surrogate(obs: &PolicyObservation, cfg: &SurrogateConfig) -> Action {
    let (i_min, min_depth) = obs.min_depth().unwrap_or((0, 1.0));
    let repulsion = if min_depth < cfg.d_safe_norm {
        let magnitude = 1.0 - min_depth / cfg.d_safe_norm;
        // turn right when the blocked ray is on the left, left otherwise
        if ray_offset(i_min, obs.depth.len(), 1.0) > 0.0 {
            -magnitude
        } else {
            magnitude
        }
    } else {
        0.0
    };
    let weight = if cfg.d_commit_norm > 0.0 { (obs.d_rel_norm / cfg.d_commit_norm).min(1.0) } else { 1.0 };
    let yaw_rate = cfg.k_goal * obs.yaw_rel_norm * PI + cfg.k_obs * weight * repulsion;
    let arrival = if cfg.d_arrive_norm > 0.0 { (obs.d_rel_norm / cfg.d_arrive_norm).min(1.0) } else { 1.0 };
    let speed =
        cfg.limits.v_max * (min_depth / cfg.d_safe_norm).min(1.0) * (1.0 - obs.yaw_rel_norm.abs()).max(0.2) * arrival;
    Action::clamped(speed, yaw_rate, &cfg.limits)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SurrogatePolicy(pub SurrogateConfig);

/// Holds position; used for estimator-only experiments.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct HoverPolicy(pub ActionLimits);

impl NavPolicy for HoverPolicy {
    fn act(&self, _: &PolicyObservation) -> Result<Action, PolicyError> {
        Ok(Action::HOVER)
    }

    fn limits(&self) -> ActionLimits {
        self.0
    }
}

impl NavPolicy for SurrogatePolicy {
    fn act(&self, obs: &PolicyObservation) -> Result<Action, PolicyError> {
        Ok(surrogate(obs, &self.0))
    }

    fn limits(&self) -> ActionLimits {
        self.0.limits
    }
}
