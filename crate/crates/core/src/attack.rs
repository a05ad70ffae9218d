//! The attacker: unconstrained input search, incremental GPS spoofing that
//! stays inside the estimator's gate, the constrained collision attack, and
//! tools that measure how much spoofing the gate lets through.

use nalgebra::Vector2;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::estimator::{Estimator, EstimatorError, FusionConfig};
use crate::geo::{wrap_angle, FlatEarthFrame, LocalPos};
use crate::policy::{compute_rel, NavPolicy, PolicyError, PolicyObservation, TargetSpec};
use crate::world::{Action, DepthScan, UavState};

#[derive(Debug, Error)]
pub enum AttackError {
    #[error("no candidate position satisfies the collision condition")]
    NotFound,
    #[error("collision point and target coincide; no attack direction")]
    DegenerateDirection,
    #[error("step {step_m} m exceeds the per-step limit {max_step_m} m")]
    StepTooLarge { step_m: f64, max_step_m: f64 },
    #[error("offset never absorbed within {0} samples")]
    NeverConverges(usize),
    #[error("invalid attack parameter: {0}")]
    Parameter(&'static str),
    #[error(transparent)]
    Estimator(#[from] EstimatorError),
    #[error(transparent)]
    Policy(#[from] PolicyError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AttackMode {
    Unconstrained,
    Constrained,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpoofDirective {
    pub delta_p: LocalPos,
    /// Number of GPS messages carrying each cumulative offset.
    pub repeats: u32,
    pub mode: AttackMode,
}

/// Attacker bookkeeping across policy steps.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct AttackState {
    pub n: u64,
    /// Sum of every issued `delta_p`.
    pub cumulative: LocalPos,
    /// Externally measured true position of the vehicle.
    pub observed_truth: LocalPos,
}

impl AttackState {
    pub fn new(observed_truth: LocalPos) -> Self {
        Self { n: 0, cumulative: LocalPos::ORIGIN, observed_truth }
    }

    pub fn observe(&mut self, truth: LocalPos) {
        self.observed_truth = truth;
    }
}

/// Emits `repeats` signals at `observed_truth + cumulative + delta_p`, then commits the step.
pub fn spoof_signal(st: &mut AttackState, d: &SpoofDirective) -> Vec<LocalPos> {
    let sig = st.observed_truth + st.cumulative + d.delta_p;
    st.cumulative += d.delta_p;
    st.n += 1;
    vec![sig; d.repeats.max(1) as usize]
}

/// Reconstructed collision condition: the commanded heading after one step
/// points at the obstacle within `theta_tol`, at no less than half speed.
pub fn condition_collision(a: &Action, uav: &UavState, obstacle_center: LocalPos, theta_tol: f64, dt: f64, v_max: f64) -> bool {
    heading_error(a, uav, obstacle_center, dt).abs() <= theta_tol && a.speed_cmd >= 0.5 * v_max
}

fn heading_error(a: &Action, uav: &UavState, obstacle_center: LocalPos, dt: f64) -> f64 {
    let bearing = (obstacle_center - uav.pos).heading();
    wrap_angle(uav.yaw + a.yaw_rate_cmd * dt - bearing)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SearchGrid {
    pub radius_m: f64,
    pub resolution_m: f64,
}

impl Default for SearchGrid {
    fn default() -> Self {
        Self { radius_m: 50.0, resolution_m: 1.0 }
    }
}

impl SearchGrid {
    pub fn validate(&self) -> Result<(), AttackError> {
        if !(self.resolution_m > 0.0) || !(self.radius_m >= 0.0) {
            return Err(AttackError::Parameter("grid needs resolution > 0 and radius >= 0"));
        }
        if self.radius_m > 0.0 && self.resolution_m > self.radius_m {
            return Err(AttackError::Parameter("grid resolution exceeds radius"));
        }
        Ok(())
    }

    /// Offsets on the square grid, nearest first; ties keep row-major order.
    pub fn offsets(&self) -> Vec<LocalPos> {
        let n = (self.radius_m / self.resolution_m + 1e-9).floor() as i64;
        let mut out: Vec<(i64, i64)> = (-n..=n).flat_map(|i| (-n..=n).map(move |j| (i, j))).collect();
        out.sort_by_key(|&(i, j)| i * i + j * j);
        out.into_iter()
            .map(|(i, j)| LocalPos::new(i as f64 * self.resolution_m, j as f64 * self.resolution_m))
            .collect()
    }
}

/// Parameters of the collision condition.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ConditionParams {
    pub theta_tol: f64,
    pub dt: f64,
}

impl Default for ConditionParams {
    fn default() -> Self {
        Self { theta_tol: 0.35, dt: 0.1 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SearchHit {
    pub spoofed: LocalPos,
    pub action: Action,
    pub heading_error: f64,
    pub evaluated: usize,
}

/// Brute-force search for a position input that makes `policy` steer into the obstacle.
pub fn unconstrained_search<P: NavPolicy + ?Sized>(
    policy: &P,
    depth: &DepthScan,
    uav: &UavState,
    tgt: &TargetSpec,
    grid: &SearchGrid,
    obstacle_center: LocalPos,
    cond: &ConditionParams,
) -> Result<SearchHit, AttackError> {
    grid.validate()?;
    let v_max = policy.limits().v_max;
    let mut best: Option<SearchHit> = None;
    let mut evaluated = 0;
    for off in grid.offsets() {
        let pos = uav.pos + off;
        let Ok(rel) = compute_rel(pos, uav.yaw, tgt) else { continue };
        let obs = PolicyObservation::new(depth, rel, tgt.d_scale);
        let a = policy.act(&obs)?;
        evaluated += 1;
        if !condition_collision(&a, uav, obstacle_center, cond.theta_tol, cond.dt, v_max) {
            continue;
        }
        let err = heading_error(&a, uav, obstacle_center, cond.dt).abs();
        if best.is_none_or(|b| err < b.heading_error) {
            best = Some(SearchHit { spoofed: pos, action: a, heading_error: err, evaluated: 0 });
        }
    }
    best.map(|b| SearchHit { evaluated, ..b }).ok_or(AttackError::NotFound)
}

pub const DEFAULT_MAX_STEP_M: f64 = 0.1;

/// Uniform-field step: `step_m * normalize(pos_col - pos_tar)`.
pub fn constrained_step(pos_col: LocalPos, pos_tar: LocalPos, step_m: f64, max_step_m: f64) -> Result<SpoofDirective, AttackError> {
    if step_m > max_step_m {
        return Err(AttackError::StepTooLarge { step_m, max_step_m });
    }
    let d = pos_col - pos_tar;
    if d == LocalPos::ORIGIN {
        return Err(AttackError::DegenerateDirection);
    }
    Ok(SpoofDirective { delta_p: d * (step_m / d.norm()), repeats: 1, mode: AttackMode::Constrained })
}

/// Which vector sets the attack direction.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DirectionRule {
    /// Obstacle minus target.
    ObstacleMinusTarget,
    /// Obstacle minus the observed vehicle position.
    ObstacleMinusVehicle,
}

/// Where the directive's vector is applied.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ApplyFrame {
    /// Shift the target-relative vector `pos_tar - pos_est` by `delta_p`,
    /// which moves the estimate by `-delta_p`.
    Relative,
    /// Shift the estimated position by `delta_p`.
    Position,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ConstrainedConfig {
    pub step_m: f64,
    pub max_step_m: f64,
    pub direction: DirectionRule,
    pub frame: ApplyFrame,
    /// Start once the observed vehicle is this close to the obstacle surface; `None` starts immediately.
    pub engage_within_m: Option<f64>,
}

impl Default for ConstrainedConfig {
    fn default() -> Self {
        Self {
            step_m: DEFAULT_MAX_STEP_M,
            max_step_m: DEFAULT_MAX_STEP_M,
            direction: DirectionRule::ObstacleMinusTarget,
            frame: ApplyFrame::Relative,
            engage_within_m: None,
        }
    }
}

/// Per-step directive of the constrained attack for the given geometry.
pub fn constrained_directive(
    cfg: &ConstrainedConfig,
    pos_col: LocalPos,
    pos_tar: LocalPos,
    observed: LocalPos,
) -> Result<SpoofDirective, AttackError> {
    let from = match cfg.direction {
        DirectionRule::ObstacleMinusTarget => pos_tar,
        DirectionRule::ObstacleMinusVehicle => observed,
    };
    let mut d = constrained_step(pos_col, from, cfg.step_m, cfg.max_step_m)?;
    if cfg.frame == ApplyFrame::Relative {
        d.delta_p = -d.delta_p;
    }
    Ok(d)
}

/// Outcome of feeding a stationary filter a constant spoofed offset.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ReflectionDelay {
    /// Spoofed samples fused before the estimate moved 95% of the offset.
    pub samples: usize,
    pub max_test_ratio: f64,
}

pub const REFLECTION_SAMPLE_CAP: usize = 1000;

pub fn measure_reflection_delay(cfg: &FusionConfig, offset: LocalPos) -> Result<ReflectionDelay, AttackError> {
    let mut est = Estimator::settled_at(LocalPos::ORIGIN, *cfg)?;
    let goal = 0.95 * offset.norm();
    if goal == 0.0 {
        return Ok(ReflectionDelay { samples: 0, max_test_ratio: 0.0 });
    }
    let mut max_tr: f64 = 0.0;
    for k in 1..=REFLECTION_SAMPLE_CAP {
        est.predict(Vector2::zeros(), cfg.gps_period());
        let out = est.fuse(offset)?;
        max_tr = max_tr.max(out.test_ratio);
        if est.est.pos.norm() >= goal {
            return Ok(ReflectionDelay { samples: k, max_test_ratio: max_tr });
        }
    }
    Err(AttackError::NeverConverges(REFLECTION_SAMPLE_CAP))
}

/// Samples of a constant-rate spoofing run against a stationary, noiseless vehicle.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DriftSample {
    pub t: f64,
    pub spoof_offset: f64,
    pub estimate_offset: f64,
    pub test_ratio: f64,
    pub accepted: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DriftRun {
    pub rate_mps: f64,
    pub samples: Vec<DriftSample>,
}

impl DriftRun {
    pub fn max_test_ratio(&self) -> f64 {
        self.samples.iter().map(|s| s.test_ratio).fold(0.0, f64::max)
    }

    pub fn undetected(&self) -> bool {
        self.samples.iter().all(|s| s.test_ratio < 1.0)
    }

    pub fn final_estimate_offset(&self) -> f64 {
        self.samples.last().map_or(0.0, |s| s.estimate_offset)
    }
}

/// Spoofing at `rate_mps` along `dir` for `duration_s`, one policy step every `dt_policy`
/// with the cumulative offset held across the GPS samples in between.
pub fn drift_run(cfg: &FusionConfig, rate_mps: f64, dir: LocalPos, duration_s: f64, dt_policy: f64) -> Result<DriftRun, AttackError> {
    let unit = if dir.norm() > 0.0 { dir * (1.0 / dir.norm()) } else { LocalPos::new(0.0, 1.0) };
    let per_step = (dt_policy * cfg.gps_rate_hz).round().max(1.0) as usize;
    let steps = (duration_s / dt_policy).round() as usize;
    let directive = SpoofDirective { delta_p: unit * (rate_mps * dt_policy), repeats: per_step as u32, mode: AttackMode::Constrained };
    let mut est = Estimator::settled_at(LocalPos::ORIGIN, *cfg)?;
    let mut st = AttackState::new(LocalPos::ORIGIN);
    let mut samples = Vec::with_capacity(steps * per_step);
    let mut t = 0.0;
    for _ in 0..steps {
        for sig in spoof_signal(&mut st, &directive) {
            t += cfg.gps_period();
            est.predict(Vector2::zeros(), cfg.gps_period());
            let out = est.fuse(sig)?;
            samples.push(DriftSample {
                t,
                spoof_offset: sig.norm(),
                estimate_offset: est.est.pos.norm(),
                test_ratio: out.test_ratio,
                accepted: out.accepted,
            });
        }
    }
    Ok(DriftRun { rate_mps, samples })
}

pub const ENVELOPE_DURATION_S: f64 = 60.0;
pub const ENVELOPE_RESOLUTION_MPS: f64 = 0.01;

/// Largest constant drift rate (to 0.01 m/s) that keeps every test ratio below one for 60 s.
pub fn max_undetected_rate(cfg: &FusionConfig) -> Result<f64, AttackError> {
    cfg.validate()?;
    let dir = LocalPos::new(1.0, 1.0);
    let feasible = |r: f64| -> Result<bool, AttackError> { Ok(drift_run(cfg, r, dir, ENVELOPE_DURATION_S, 0.1)?.undetected()) };
    let mut lo = 0.0;
    let mut hi = 1.0;
    while feasible(hi)? {
        lo = hi;
        hi *= 2.0;
        if hi > 1e4 {
            return Ok(lo);
        }
    }
    while hi - lo > ENVELOPE_RESOLUTION_MPS / 2.0 {
        let mid = 0.5 * (lo + hi);
        if feasible(mid)? {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let steps = (lo / ENVELOPE_RESOLUTION_MPS + 1e-9).floor();
    Ok(steps / ENVELOPE_RESOLUTION_MPS.recip())
}

/// One reading of the published per-window spoofing rate.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RateReading {
    pub label: String,
    pub degrees_per_window: f64,
    pub window_samples: u32,
    pub rate_mps: f64,
    pub undetected: bool,
    pub max_test_ratio: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EnvelopeReport {
    pub fusion: FusionConfig,
    pub max_undetected_rate_mps: f64,
    pub reflection_delay_3_3m: Option<ReflectionDelay>,
    pub final_offset_at_max_rate_m: f64,
    pub max_test_ratio_at_max_rate: f64,
    pub readings: Vec<RateReading>,
}

/// Envelope summary including both published per-30-sample degree steps.
pub fn envelope_report(cfg: &FusionConfig, frame: &FlatEarthFrame) -> Result<EnvelopeReport, AttackError> {
    let rate = max_undetected_rate(cfg)?;
    let run = drift_run(cfg, rate, LocalPos::new(1.0, 1.0), ENVELOPE_DURATION_S, 0.1)?;
    let delay = measure_reflection_delay(cfg, LocalPos::new(0.0, 3.3)).ok();
    let mut readings = Vec::new();
    for (label, deg) in [("0.00003 deg per 30 samples", 0.00003), ("0.0003 deg per 30 samples", 0.0003)] {
        let window = 30u32;
        let rate_mps = frame.degrees_to_meters(deg) / (window as f64 / cfg.gps_rate_hz);
        let r = drift_run(cfg, rate_mps, LocalPos::new(0.0, 1.0), ENVELOPE_DURATION_S, 0.1)?;
        readings.push(RateReading {
            label: label.to_string(),
            degrees_per_window: deg,
            window_samples: window,
            rate_mps,
            undetected: r.undetected(),
            max_test_ratio: r.max_test_ratio(),
        });
    }
    Ok(EnvelopeReport {
        fusion: *cfg,
        max_undetected_rate_mps: rate,
        reflection_delay_3_3m: delay,
        final_offset_at_max_rate_m: run.final_estimate_offset(),
        max_test_ratio_at_max_rate: run.max_test_ratio(),
        readings,
    })
}
