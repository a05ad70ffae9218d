//! Closed-loop scenario runner.
//!
//! Per policy step: the attacker (if any) updates its offset from the observed
//! true pose, the GPS channel samples the truth and the attacker overwrites the
//! message, the estimator fuses it through its gate, the navigator computes its
//! relative inputs from the *estimate* and acts, and the world advances.

mod config;
pub mod export;
pub mod replicate;

use nalgebra::Vector2;
use serde::Serialize;
use thiserror::Error;

use crate::attack::{
    constrained_directive, spoof_signal, unconstrained_search, AttackError, AttackState, ConditionParams, SpoofDirective,
};
use crate::estimator::{Estimator, EstimatorError, HealthStatus};
use crate::geo::{geodetic_to_local, GeoCoord, LocalPos};
use crate::gps::{inject_spoof, GpsChannel, GpsMessage, GpsNoiseModel};
use crate::policy::{compute_rel, NavPolicy, PolicyError, PolicyObservation, Relative};
use crate::world::{check_collision, ray_depth, step_kinematics, Action, UavState, WorldError};

pub use config::{
    AttackConfig, EnvironmentConfig, NoiseConfig, PolicySource, RampConfig, ScenarioConfig, UnconstrainedConfig,
    SCHEMA_VERSION,
};

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("config error: {0}")]
    Config(String),
    #[error("cannot load policy: {0}")]
    PolicyLoad(PolicyError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("scenario infeasible: {0}")]
    Infeasible(String),
}

impl HarnessError {
    /// Process exit code for the command-line runner.
    pub fn exit_code(&self) -> i32 {
        match self {
            HarnessError::Infeasible(_) => 2,
            _ => 1,
        }
    }
}

impl From<EstimatorError> for HarnessError {
    fn from(e: EstimatorError) -> Self {
        match e {
            EstimatorError::Config(m) => HarnessError::Config(m.to_string()),
            other => HarnessError::Infeasible(other.to_string()),
        }
    }
}

impl From<AttackError> for HarnessError {
    fn from(e: AttackError) -> Self {
        match e {
            AttackError::Parameter(m) => HarnessError::Config(m.to_string()),
            other => HarnessError::Infeasible(other.to_string()),
        }
    }
}

impl From<WorldError> for HarnessError {
    fn from(e: WorldError) -> Self {
        HarnessError::Config(e.to_string())
    }
}

impl From<PolicyError> for HarnessError {
    fn from(e: PolicyError) -> Self {
        HarnessError::Infeasible(e.to_string())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum AttackEvent {
    Idle,
    Directive,
    SearchHit,
    SearchMiss,
}

impl AttackEvent {
    pub fn label(&self) -> &'static str {
        match self {
            AttackEvent::Idle => "idle",
            AttackEvent::Directive => "directive",
            AttackEvent::SearchHit => "search_hit",
            AttackEvent::SearchMiss => "search_miss",
        }
    }
}

/// State of one policy step, taken after the step's first GPS fusion and before the world moves.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrajectoryRecord {
    pub step: usize,
    pub t: f64,
    pub true_pos: LocalPos,
    pub true_yaw: f64,
    pub est_pos: LocalPos,
    /// Position the navigator used for its relative inputs.
    pub nav_pos: LocalPos,
    /// First GPS message of the step as delivered to the estimator.
    pub gps: GeoCoord,
    /// Attacker offset carried by this step's GPS messages.
    pub spoof_offset: LocalPos,
    /// Largest test ratio among this step's GPS samples.
    pub test_ratio: f64,
    /// True when every GPS sample of the step passed the gate.
    pub accepted: bool,
    pub health: HealthStatus,
    pub d_rel: f64,
    pub yaw_rel: f64,
    pub action: Action,
    pub min_obstacle_dist: f64,
    pub attack_event: AttackEvent,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "outcome", rename_all = "snake_case")]
pub enum Verdict {
    ReachedTarget { t: f64 },
    Collided { t: f64 },
    Timeout { t: f64 },
    SpoofDetected { t: f64 },
}

impl Verdict {
    pub fn label(&self) -> &'static str {
        match self {
            Verdict::ReachedTarget { .. } => "reached_target",
            Verdict::Collided { .. } => "collided",
            Verdict::Timeout { .. } => "timeout",
            Verdict::SpoofDetected { .. } => "spoof_detected",
        }
    }

    pub fn t(&self) -> f64 {
        match *self {
            Verdict::ReachedTarget { t } | Verdict::Collided { t } | Verdict::Timeout { t } | Verdict::SpoofDetected { t } => t,
        }
    }
}

#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub records: Vec<TrajectoryRecord>,
    pub verdict: Verdict,
    /// Every GPS message the estimator received, after spoofing.
    pub gps_log: Vec<GpsMessage>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunSummary {
    pub verdict: Verdict,
    pub steps: usize,
    pub min_obstacle_dist: f64,
    pub max_test_ratio: f64,
    pub final_estimate_offset_m: f64,
    pub rejected_steps: usize,
    pub attack_steps: usize,
}

impl RunOutcome {
    pub fn summary(&self) -> RunSummary {
        let last = self.records.last();
        RunSummary {
            verdict: self.verdict,
            steps: self.records.len(),
            min_obstacle_dist: self.records.iter().map(|r| r.min_obstacle_dist).fold(f64::INFINITY, f64::min),
            max_test_ratio: self.records.iter().map(|r| r.test_ratio).fold(0.0, f64::max),
            final_estimate_offset_m: last.map_or(0.0, |r| r.est_pos.distance(r.true_pos)),
            rejected_steps: self.records.iter().filter(|r| !r.accepted).count(),
            attack_steps: self.records.iter().filter(|r| r.attack_event != AttackEvent::Idle).count(),
        }
    }
}

/// Loads the configured policy and runs the scenario.
pub fn run_scenario(cfg: &ScenarioConfig) -> Result<RunOutcome, HarnessError> {
    let policy = cfg.load_policy()?;
    run_scenario_with(cfg, policy.as_ref())
}

struct Sensor<'a> {
    cfg: &'a ScenarioConfig,
    channel: GpsChannel,
    est: Estimator,
    log: Vec<GpsMessage>,
}

impl Sensor<'_> {
    /// Samples, spoofs and fuses one GPS message; returns `(test_ratio, accepted, delivered coordinate)`.
    fn fuse(&mut self, truth: &UavState, t: f64, offset: LocalPos) -> Result<(f64, bool, GeoCoord), HarnessError> {
        let msg = self.channel.sample(truth, t);
        let delivered = inject_spoof(&msg, offset, &self.cfg.frame);
        self.log.push(delivered);
        let out = self.est.fuse(geodetic_to_local(&delivered.coord, &self.cfg.frame))?;
        Ok((out.test_ratio, out.accepted, delivered.coord))
    }
}

pub fn run_scenario_with(cfg: &ScenarioConfig, policy: &dyn NavPolicy) -> Result<RunOutcome, HarnessError> {
    cfg.validate()?;
    let env = cfg.environment.build()?;
    let tgt = cfg.target_spec();
    let dt = cfg.dt_policy;
    let per_step = cfg.gps_per_step();
    let sub_dt = dt / per_step as f64;
    let n_steps = (cfg.duration_s / dt).round() as usize;

    let mut truth = UavState::new(env.start, cfg.start_yaw());
    if check_collision(&truth, &env).collided {
        return Err(HarnessError::Infeasible("start position is inside an obstacle".into()));
    }
    let mut sensor = Sensor {
        cfg,
        channel: GpsChannel::new(cfg.frame, GpsNoiseModel { sigma: cfg.noise.sigma, seed: cfg.seed }, cfg.fusion.gps_rate_hz),
        est: Estimator::settled_at(env.start, cfg.fusion)?,
        log: Vec::new(),
    };
    let mut attacker = AttackState::new(truth.pos);
    let mut nav_override: Option<LocalPos> = None;
    let mut records = Vec::with_capacity(n_steps + 1);

    for k in 0..=n_steps {
        let t = k as f64 * dt;
        let prox = check_collision(&truth, &env);
        attacker.observe(truth.pos);
        let mut event = AttackEvent::Idle;
        match &cfg.attack {
            AttackConfig::None => {}
            AttackConfig::Constrained(c) => {
                let engaged = c.engage_within_m.is_none_or(|d| prox.min_dist <= d);
                if let (true, Some(o)) = (engaged, env.nearest_obstacle(truth.pos)) {
                    let d = constrained_directive(c, o.center, env.target, attacker.observed_truth)?;
                    spoof_signal(&mut attacker, &SpoofDirective { repeats: per_step as u32, ..d });
                    event = AttackEvent::Directive;
                }
            }
            AttackConfig::Ramp(r) => {
                if t >= r.start_s - 1e-9 && t < r.stop_s - 1e-9 {
                    let d = SpoofDirective {
                        delta_p: r.unit_direction() * (r.rate_mps * dt),
                        repeats: per_step as u32,
                        mode: crate::attack::AttackMode::Constrained,
                    };
                    spoof_signal(&mut attacker, &d);
                    event = AttackEvent::Directive;
                }
            }
            AttackConfig::Unconstrained(u) => match env.nearest_obstacle(truth.pos) {
                Some(o) if prox.min_dist <= u.engage_within_m => {
                    let depth = ray_depth(&truth, &env, &cfg.depth);
                    let cond = ConditionParams { theta_tol: u.theta_tol, dt };
                    match unconstrained_search(policy, &depth, &truth, &tgt, &u.grid, o.center, &cond) {
                        Ok(hit) => {
                            nav_override = Some(hit.spoofed - truth.pos);
                            event = AttackEvent::SearchHit;
                        }
                        // keep steering with the previous offset
                        Err(AttackError::NotFound) => event = AttackEvent::SearchMiss,
                        Err(e) => return Err(e.into()),
                    }
                }
                _ => nav_override = None,
            },
        }
        let gps_offset = attacker.cumulative;
        let (mut test_ratio, mut accepted, gps) = sensor.fuse(&truth, t, gps_offset)?;

        let est_pos = sensor.est.est.pos;
        let nav_pos = nav_override.map_or(est_pos, |off| truth.pos + off);
        let (rel, action) = match compute_rel(nav_pos, truth.yaw, &tgt) {
            Ok(rel) => {
                let obs = PolicyObservation::new(&ray_depth(&truth, &env, &cfg.depth), rel, tgt.d_scale);
                (rel, policy.act(&obs)?)
            }
            // the navigator believes it has arrived
            Err(PolicyError::DegenerateRelative) => (Relative { d_rel: 0.0, yaw_rel: 0.0 }, Action::HOVER),
            Err(e) => return Err(e.into()),
        };

        records.push(TrajectoryRecord {
            step: k,
            t,
            true_pos: truth.pos,
            true_yaw: truth.yaw,
            est_pos,
            nav_pos,
            gps,
            spoof_offset: gps_offset,
            test_ratio,
            accepted,
            health: sensor.est.health,
            d_rel: rel.d_rel,
            yaw_rel: rel.yaw_rel,
            action,
            min_obstacle_dist: prox.min_dist,
            attack_event: event,
        });

        let verdict = if prox.collided {
            Some(Verdict::Collided { t })
        } else if env.reached_goal(truth.pos) {
            Some(Verdict::ReachedTarget { t })
        } else if sensor.est.health == HealthStatus::SpoofSuspected {
            Some(Verdict::SpoofDetected { t })
        } else if k == n_steps {
            Some(Verdict::Timeout { t })
        } else {
            None
        };
        if let Some(verdict) = verdict {
            return Ok(RunOutcome { records, verdict, gps_log: sensor.log });
        }

        let next = step_kinematics(&truth, &action, dt);
        let dv = next.velocity() - truth.velocity();
        for j in 1..=per_step {
            let kick = if j == 1 { Vector2::new(dv.x, dv.y) } else { Vector2::zeros() };
            sensor.est.predict(kick, sub_dt);
            if j < per_step {
                let frac = j as f64 / per_step as f64;
                let mid = UavState { pos: truth.pos + (next.pos - truth.pos) * frac, ..next };
                let (tr, ok, _) = sensor.fuse(&mid, t + j as f64 * sub_dt, gps_offset)?;
                test_ratio = test_ratio.max(tr);
                accepted &= ok;
                let last = records.last_mut().expect("pushed above");
                last.test_ratio = test_ratio;
                last.accepted = accepted;
            }
        }
        truth = next;
    }
    unreachable!("loop returns at k == n_steps")
}

#[cfg(test)]
mod tests;
