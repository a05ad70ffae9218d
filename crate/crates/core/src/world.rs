//! Ground-truth planar world: first-order UAV kinematics, circular obstacles,
//! ray-cast depth sensing and collision checks.

use std::f64::consts::FRAC_PI_2;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geo::{wrap_angle, LocalPos};

#[derive(Debug, Error, PartialEq)]
pub enum WorldError {
    #[error("obstacle {index} has non-positive radius {radius}")]
    ObstacleRadius { index: usize, radius: f64 },
    #[error("{0} lies outside the environment bounds")]
    OutOfBounds(&'static str),
    #[error("target lies inside obstacle {0}")]
    TargetBlocked(usize),
    #[error("invalid parameter: {0}")]
    Parameter(&'static str),
}

/// True vehicle state advanced by [`step_kinematics`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UavState {
    pub pos: LocalPos,
    pub yaw: f64,
    pub speed: f64,
}

impl UavState {
    pub fn new(pos: LocalPos, yaw: f64) -> Self {
        Self { pos, yaw: wrap_angle(yaw), speed: 0.0 }
    }

    pub fn velocity(&self) -> LocalPos {
        LocalPos::from_heading(self.yaw) * self.speed
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Obstacle {
    pub center: LocalPos,
    pub radius: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Bounds {
    pub min: LocalPos,
    pub max: LocalPos,
}

impl Bounds {
    pub fn contains(&self, p: LocalPos) -> bool {
        p.x >= self.min.x && p.x <= self.max.x && p.y >= self.min.y && p.y <= self.max.y
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Environment {
    pub obstacles: Vec<Obstacle>,
    pub target: LocalPos,
    pub collision_radius: f64,
    pub bounds: Bounds,
    pub start: LocalPos,
    pub goal_radius: f64,
}

impl Environment {
    pub fn validate(&self) -> Result<(), WorldError> {
        for (index, o) in self.obstacles.iter().enumerate() {
            if !(o.radius > 0.0) {
                return Err(WorldError::ObstacleRadius { index, radius: o.radius });
            }
            if o.center.distance(self.target) < o.radius {
                return Err(WorldError::TargetBlocked(index));
            }
        }
        if !self.bounds.contains(self.target) {
            return Err(WorldError::OutOfBounds("target"));
        }
        if !self.bounds.contains(self.start) {
            return Err(WorldError::OutOfBounds("start"));
        }
        if !(self.collision_radius >= 0.0) {
            return Err(WorldError::Parameter("collision_radius must be >= 0"));
        }
        if !(self.goal_radius > 0.0) {
            return Err(WorldError::Parameter("goal_radius must be > 0"));
        }
        Ok(())
    }

    /// Obstacle with the smallest surface distance from `p`.
    pub fn nearest_obstacle(&self, p: LocalPos) -> Option<&Obstacle> {
        self.obstacles.iter().min_by(|a, b| {
            let da = a.center.distance(p) - a.radius;
            let db = b.center.distance(p) - b.radius;
            da.total_cmp(&db)
        })
    }

    pub fn reached_goal(&self, p: LocalPos) -> bool {
        p.distance(self.target) <= self.goal_radius
    }
}

/// Speed and turn-rate limits applied to every [`Action`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ActionLimits {
    pub v_max: f64,
    pub omega_max: f64,
}

impl Default for ActionLimits {
    fn default() -> Self {
        Self { v_max: 5.0, omega_max: 1.0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Action {
    pub speed_cmd: f64,
    pub yaw_rate_cmd: f64,
}

impl Action {
    pub const HOVER: Action = Action { speed_cmd: 0.0, yaw_rate_cmd: 0.0 };

    /// Builds an action clamped into the limits.
    pub fn clamped(speed_cmd: f64, yaw_rate_cmd: f64, limits: &ActionLimits) -> Self {
        Self {
            speed_cmd: speed_cmd.clamp(0.0, limits.v_max),
            yaw_rate_cmd: yaw_rate_cmd.clamp(-limits.omega_max, limits.omega_max),
        }
    }

    /// Maps a normalized `[-1, 1]^2` action to physical units.
    pub fn from_normalized(n: [f64; 2], limits: &ActionLimits) -> Self {
        let s = n[0].clamp(-1.0, 1.0);
        let w = n[1].clamp(-1.0, 1.0);
        Self::clamped((s + 1.0) * 0.5 * limits.v_max, w * limits.omega_max, limits)
    }

    pub fn to_normalized(&self, limits: &ActionLimits) -> [f64; 2] {
        [
            (2.0 * self.speed_cmd / limits.v_max - 1.0).clamp(-1.0, 1.0),
            (self.yaw_rate_cmd / limits.omega_max).clamp(-1.0, 1.0),
        ]
    }

    pub fn within(&self, limits: &ActionLimits) -> bool {
        (0.0..=limits.v_max).contains(&self.speed_cmd)
            && (-limits.omega_max..=limits.omega_max).contains(&self.yaw_rate_cmd)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DepthConfig {
    pub n_rays: usize,
    pub fov: f64,
    pub max_range: f64,
}

impl Default for DepthConfig {
    fn default() -> Self {
        Self { n_rays: 16, fov: FRAC_PI_2, max_range: 20.0 }
    }
}

impl DepthConfig {
    pub fn validate(&self) -> Result<(), WorldError> {
        if self.n_rays == 0 {
            return Err(WorldError::Parameter("n_rays must be >= 1"));
        }
        if !(self.max_range > 0.0) {
            return Err(WorldError::Parameter("max_range must be > 0"));
        }
        if !(self.fov >= 0.0) {
            return Err(WorldError::Parameter("fov must be >= 0"));
        }
        Ok(())
    }

    /// Bearing of ray `i` relative to the vehicle heading (positive = left).
    pub fn ray_offset(&self, i: usize) -> f64 {
        ray_offset(i, self.n_rays, self.fov)
    }
}

pub(crate) fn ray_offset(i: usize, n_rays: usize, fov: f64) -> f64 {
    if n_rays <= 1 {
        0.0
    } else {
        fov * (i as f64 / (n_rays - 1) as f64 - 0.5)
    }
}

/// Normalized ray ranges, ordered from the rightmost ray to the leftmost.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DepthScan {
    pub ranges: Vec<f64>,
    pub fov: f64,
    pub max_range: f64,
}

impl DepthScan {
    /// Index and value of the closest return.
    pub fn min_ray(&self) -> Option<(usize, f64)> {
        self.ranges
            .iter()
            .copied()
            .enumerate()
            .min_by(|a, b| a.1.total_cmp(&b.1))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Proximity {
    pub collided: bool,
    /// Smallest surface distance over all obstacles; `f64::INFINITY` when there are none.
    pub min_dist: f64,
}

pub fn step_kinematics(s: &UavState, a: &Action, dt: f64) -> UavState {
    debug_assert!(dt > 0.0);
    let yaw = wrap_angle(s.yaw + a.yaw_rate_cmd * dt);
    UavState {
        pos: s.pos + LocalPos::from_heading(yaw) * (a.speed_cmd * dt),
        yaw,
        speed: a.speed_cmd,
    }
}

/// Distance along a unit ray to the first intersection with a circle, if any.
/// An origin inside the circle reports zero.
fn ray_circle(origin: LocalPos, dir: LocalPos, o: &Obstacle) -> Option<f64> {
    let m = origin - o.center;
    let c = m.dot(m) - o.radius * o.radius;
    if c <= 0.0 {
        return Some(0.0);
    }
    let b = m.dot(dir);
    if b > 0.0 {
        // pointing away and outside
        return None;
    }
    let disc = b * b - c;
    if disc < 0.0 {
        return None;
    }
    Some(-b - disc.sqrt())
}

pub fn ray_depth(s: &UavState, env: &Environment, cfg: &DepthConfig) -> DepthScan {
    let ranges = (0..cfg.n_rays)
        .map(|i| {
            let dir = LocalPos::from_heading(s.yaw + cfg.ray_offset(i));
            let hit = env
                .obstacles
                .iter()
                .filter_map(|o| ray_circle(s.pos, dir, o))
                .fold(cfg.max_range, f64::min);
            hit.min(cfg.max_range) / cfg.max_range
        })
        .collect();
    DepthScan { ranges, fov: cfg.fov, max_range: cfg.max_range }
}

pub fn check_collision(s: &UavState, env: &Environment) -> Proximity {
    let min_dist = env
        .obstacles
        .iter()
        .map(|o| s.pos.distance(o.center) - o.radius)
        .fold(f64::INFINITY, f64::min);
    Proximity { collided: min_dist <= env.collision_radius, min_dist }
}
