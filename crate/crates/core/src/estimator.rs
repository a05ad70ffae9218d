//! Planar position/velocity Kalman filter with PX4-style GPS innovation gating.
//!
//! State ordering is `[x, y, vx, vy]`. A GPS position is fused only when its
//! test ratio `y' S^-1 y / gate^2` is at most one; a rejected measurement leaves
//! the prediction untouched. Consecutive rejections escalate to a spoofing
//! suspicion after `reject_window` samples.

use nalgebra::{Matrix2, Matrix2x4, Matrix4, Matrix4x2, Vector2, Vector4};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geo::LocalPos;

#[derive(Debug, Error, PartialEq)]
pub enum EstimatorError {
    #[error("innovation covariance is singular; check r_gps and the covariance")]
    SingularInnovationCovariance,
    #[error("steady state not reached after {0} iterations")]
    NoConvergence(usize),
    #[error("invalid fusion config: {0}")]
    Config(&'static str),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FusionConfig {
    /// White-noise acceleration intensity of the process model, m/s^2.
    pub q_accel: f64,
    /// GPS horizontal position noise standard deviation, m.
    pub r_gps: f64,
    /// Gate size in innovation standard deviations.
    pub gate: f64,
    /// Consecutive rejections before the stream is flagged as spoofed.
    pub reject_window: u32,
    pub gps_rate_hz: f64,
}

impl Default for FusionConfig {
    fn default() -> Self {
        Self { q_accel: 0.025, r_gps: 0.7, gate: 5.0, reject_window: 10, gps_rate_hz: 10.0 }
    }
}

impl FusionConfig {
    pub fn validate(&self) -> Result<(), EstimatorError> {
        if !(self.q_accel > 0.0) {
            return Err(EstimatorError::Config("q_accel must be > 0"));
        }
        if !(self.r_gps > 0.0) {
            return Err(EstimatorError::Config("r_gps must be > 0"));
        }
        if !(self.gate >= 1.0) {
            return Err(EstimatorError::Config("gate must be >= 1"));
        }
        if self.reject_window == 0 {
            return Err(EstimatorError::Config("reject_window must be >= 1"));
        }
        if !(self.gps_rate_hz > 0.0) {
            return Err(EstimatorError::Config("gps_rate_hz must be > 0"));
        }
        Ok(())
    }

    pub fn gps_period(&self) -> f64 {
        1.0 / self.gps_rate_hz
    }

    fn measurement_noise(&self) -> Matrix2<f64> {
        Matrix2::identity() * (self.r_gps * self.r_gps)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EkfEstimate {
    pub pos: LocalPos,
    pub vel: Vector2<f64>,
    pub cov: Matrix4<f64>,
    pub t: f64,
}

impl EkfEstimate {
    pub fn new(pos: LocalPos, vel: Vector2<f64>, cov: Matrix4<f64>, t: f64) -> Self {
        Self { pos, vel, cov, t }
    }

    fn state(&self) -> Vector4<f64> {
        Vector4::new(self.pos.x, self.pos.y, self.vel.x, self.vel.y)
    }

    fn with_state(&self, x: &Vector4<f64>, cov: Matrix4<f64>) -> Self {
        Self { pos: LocalPos::new(x[0], x[1]), vel: Vector2::new(x[2], x[3]), cov, t: self.t }
    }

    pub fn is_finite(&self) -> bool {
        self.pos.is_finite() && self.vel.iter().all(|v| v.is_finite()) && self.cov.iter().all(|v| v.is_finite())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FusionOutcome {
    pub est: EkfEstimate,
    /// Measurement minus predicted position.
    pub innovation: LocalPos,
    pub test_ratio: f64,
    pub accepted: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum HealthStatus {
    Healthy,
    Rejecting(u32),
    SpoofSuspected,
}

impl HealthStatus {
    pub fn label(&self) -> String {
        match self {
            HealthStatus::Healthy => "healthy".to_string(),
            HealthStatus::Rejecting(n) => format!("rejecting:{n}"),
            HealthStatus::SpoofSuspected => "spoof_suspected".to_string(),
        }
    }
}

fn transition(dt: f64) -> Matrix4<f64> {
    let mut f = Matrix4::identity();
    f[(0, 2)] = dt;
    f[(1, 3)] = dt;
    f
}

fn process_noise(q_accel: f64, dt: f64) -> Matrix4<f64> {
    let q2 = q_accel * q_accel;
    let (pp, pv, vv) = (dt.powi(4) / 4.0 * q2, dt.powi(3) / 2.0 * q2, dt * dt * q2);
    let mut q = Matrix4::zeros();
    for i in 0..2 {
        q[(i, i)] = pp;
        q[(i, i + 2)] = pv;
        q[(i + 2, i)] = pv;
        q[(i + 2, i + 2)] = vv;
    }
    q
}

fn observation() -> Matrix2x4<f64> {
    let mut h = Matrix2x4::zeros();
    h[(0, 0)] = 1.0;
    h[(1, 1)] = 1.0;
    h
}

fn symmetrize(m: Matrix4<f64>) -> Matrix4<f64> {
    (m + m.transpose()) * 0.5
}

/// Constant-velocity propagation over `dt`.
pub fn predict(e: &EkfEstimate, dt: f64, cfg: &FusionConfig) -> EkfEstimate {
    predict_with_delta_v(e, Vector2::zeros(), dt, cfg)
}

/// Propagation driven by an inertial velocity increment applied at the start of
/// the interval, as an autopilot EKF does with IMU delta-velocity. With zero
/// increment this is exactly [`predict`].
pub fn predict_with_delta_v(e: &EkfEstimate, delta_v: Vector2<f64>, dt: f64, cfg: &FusionConfig) -> EkfEstimate {
    debug_assert!(dt > 0.0);
    let f = transition(dt);
    let mut x = e.state();
    x[2] += delta_v.x;
    x[3] += delta_v.y;
    let x = f * x;
    let cov = symmetrize(f * e.cov * f.transpose() + process_noise(cfg.q_accel, dt));
    let mut out = e.with_state(&x, cov);
    out.t = e.t + dt;
    out
}

/// Gated Kalman update with a GPS position.
pub fn fuse_gps(e_pred: &EkfEstimate, z: LocalPos, cfg: &FusionConfig) -> Result<FusionOutcome, EstimatorError> {
    let h = observation();
    let r = cfg.measurement_noise();
    let y = Vector2::new(z.x - e_pred.pos.x, z.y - e_pred.pos.y);
    let s = h * e_pred.cov * h.transpose() + r;
    let s_inv = s.try_inverse().ok_or(EstimatorError::SingularInnovationCovariance)?;
    let nis = (y.transpose() * s_inv * y)[(0, 0)];
    if !nis.is_finite() {
        return Err(EstimatorError::SingularInnovationCovariance);
    }
    let test_ratio = nis / (cfg.gate * cfg.gate);
    let innovation = LocalPos::new(y.x, y.y);
    if test_ratio > 1.0 {
        return Ok(FusionOutcome { est: *e_pred, innovation, test_ratio, accepted: false });
    }
    let k: Matrix4x2<f64> = e_pred.cov * h.transpose() * s_inv;
    let x = e_pred.state() + k * y;
    let i_kh = Matrix4::identity() - k * h;
    // Joseph form
    let cov = symmetrize(i_kh * e_pred.cov * i_kh.transpose() + k * r * k.transpose());
    Ok(FusionOutcome { est: e_pred.with_state(&x, cov), innovation, test_ratio, accepted: true })
}

pub fn monitor(prev: HealthStatus, outcome: &FusionOutcome, cfg: &FusionConfig) -> HealthStatus {
    if outcome.accepted {
        return HealthStatus::Healthy;
    }
    let count = match prev {
        HealthStatus::Healthy => 1,
        HealthStatus::Rejecting(n) => n + 1,
        HealthStatus::SpoofSuspected => return HealthStatus::SpoofSuspected,
    };
    if count >= cfg.reject_window {
        HealthStatus::SpoofSuspected
    } else {
        HealthStatus::Rejecting(count)
    }
}

/// Converged filter quantities for a stationary, zero-innovation stream.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SteadyState {
    pub gain: Matrix4x2<f64>,
    pub innovation_cov: Matrix2<f64>,
    /// Posterior covariance after a fused sample.
    pub cov: Matrix4<f64>,
    pub iterations: usize,
}

pub const STEADY_STATE_MAX_ITERATIONS: usize = 100_000;

pub fn steady_state_gain(cfg: &FusionConfig, dt: f64) -> Result<SteadyState, EstimatorError> {
    cfg.validate()?;
    let h = observation();
    let r = cfg.measurement_noise();
    let mut cov = Matrix4::from_diagonal(&Vector4::new(cfg.r_gps.powi(2), cfg.r_gps.powi(2), 1.0, 1.0));
    let mut e = EkfEstimate::new(LocalPos::ORIGIN, Vector2::zeros(), cov, 0.0);
    for it in 1..=STEADY_STATE_MAX_ITERATIONS {
        let pred = predict(&e, dt, cfg);
        let s = h * pred.cov * h.transpose() + r;
        let out = fuse_gps(&pred, pred.pos, cfg)?;
        let delta = (out.est.cov - cov).abs().max();
        cov = out.est.cov;
        e = out.est;
        if delta < 1e-12 {
            let s_inv = s.try_inverse().ok_or(EstimatorError::SingularInnovationCovariance)?;
            let gain = pred.cov * h.transpose() * s_inv;
            return Ok(SteadyState { gain, innovation_cov: s, cov, iterations: it });
        }
    }
    Err(EstimatorError::NoConvergence(STEADY_STATE_MAX_ITERATIONS))
}

/// Stateful wrapper pairing an estimate with its health monitor.
#[derive(Debug, Clone)]
pub struct Estimator {
    pub cfg: FusionConfig,
    pub est: EkfEstimate,
    pub health: HealthStatus,
}

impl Estimator {
    /// Starts at `pos` with zero velocity and the converged stationary covariance.
    pub fn settled_at(pos: LocalPos, cfg: FusionConfig) -> Result<Self, EstimatorError> {
        let ss = steady_state_gain(&cfg, cfg.gps_period())?;
        Ok(Self { cfg, est: EkfEstimate::new(pos, Vector2::zeros(), ss.cov, 0.0), health: HealthStatus::Healthy })
    }

    pub fn predict(&mut self, delta_v: Vector2<f64>, dt: f64) {
        self.est = predict_with_delta_v(&self.est, delta_v, dt, &self.cfg);
    }

    pub fn fuse(&mut self, z: LocalPos) -> Result<FusionOutcome, EstimatorError> {
        let out = fuse_gps(&self.est, z, &self.cfg)?;
        self.est = out.est;
        self.health = monitor(self.health, &out, &self.cfg);
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, Normal};

    fn cfg() -> FusionConfig {
        FusionConfig::default()
    }

    fn est(cov: Matrix4<f64>) -> EkfEstimate {
        EkfEstimate::new(LocalPos::new(1.0, 2.0), Vector2::zeros(), cov, 0.0)
    }

    fn min_eigen(m: &Matrix4<f64>) -> f64 {
        m.symmetric_eigen().eigenvalues.min()
    }

    #[test]
    fn stationary_prediction_adds_process_noise() {
        let e = est(Matrix4::identity());
        let p = predict(&e, 0.1, &cfg());
        assert_eq!(p.pos, e.pos);
        let f = transition(0.1);
        let expected = f * e.cov * f.transpose() + process_noise(cfg().q_accel, 0.1);
        assert!((p.cov - expected).abs().max() < 1e-15);
        assert!((p.t - 0.1).abs() < 1e-15);
    }

    #[test]
    fn moving_prediction() {
        let mut e = est(Matrix4::identity());
        e.vel = Vector2::new(1.0, 0.0);
        let p = predict(&e, 0.1, &cfg());
        assert!((p.pos.x - 1.1).abs() < 1e-12);
        assert_eq!(p.vel, e.vel);
    }

    #[test]
    fn ten_small_predicts_match_one_large_in_mean() {
        let mut e = est(Matrix4::identity() * 0.5);
        e.vel = Vector2::new(0.3, -1.2);
        let mut small = e;
        for _ in 0..10 {
            small = predict(&small, 0.1, &cfg());
        }
        let big = predict(&e, 1.0, &cfg());
        assert!(small.pos.distance(big.pos) < 1e-12);
        assert!((small.vel - big.vel).norm() < 1e-12);

        // covariance oracle: explicit recursion P <- F P F' + Q with hand-built F, Q
        let q2 = cfg().q_accel.powi(2);
        let mut p = e.cov;
        for _ in 0..10 {
            let dt: f64 = 0.1;
            let mut f = Matrix4::identity();
            f[(0, 2)] = dt;
            f[(1, 3)] = dt;
            let mut q = Matrix4::zeros();
            for i in 0..2 {
                q[(i, i)] = q2 * dt.powi(4) / 4.0;
                q[(i, i + 2)] = q2 * dt.powi(3) / 2.0;
                q[(i + 2, i)] = q2 * dt.powi(3) / 2.0;
                q[(i + 2, i + 2)] = q2 * dt * dt;
            }
            p = f * p * f.transpose() + q;
        }
        assert!((small.cov - p).abs().max() < 1e-12);
    }

    #[test]
    fn zero_innovation_keeps_position() {
        let e = est(Matrix4::identity() * 0.2);
        let out = fuse_gps(&e, e.pos, &cfg()).unwrap();
        assert!(out.accepted);
        assert_eq!(out.test_ratio, 0.0);
        assert_eq!(out.innovation, LocalPos::ORIGIN);
        assert_eq!(out.est.pos, e.pos);
        assert!(out.est.cov[(0, 0)] < e.cov[(0, 0)]);
    }

    #[test]
    fn fifty_meter_step_is_rejected_at_steady_state() {
        let c = cfg();
        let ss = steady_state_gain(&c, 0.1).unwrap();
        let e = predict(&EkfEstimate::new(LocalPos::ORIGIN, Vector2::zeros(), ss.cov, 0.0), 0.1, &c);
        // oracle: 50^2 / (gate^2 * S_yy) with S from the converged covariance
        let s_yy = ss.innovation_cov[(1, 1)];
        let expected = 2500.0 / (c.gate * c.gate * s_yy);
        assert!(expected > 1.0);
        let out = fuse_gps(&e, LocalPos::new(0.0, 50.0), &c).unwrap();
        assert!(!out.accepted);
        assert!((out.test_ratio - expected).abs() / expected < 1e-9);
        assert_eq!(out.est, e);
    }

    #[test]
    fn singular_innovation_covariance_is_reported() {
        let mut c = cfg();
        c.r_gps = 0.0;
        let e = est(Matrix4::zeros());
        assert_eq!(fuse_gps(&e, LocalPos::new(1.0, 1.0), &c), Err(EstimatorError::SingularInnovationCovariance));
    }

    #[test]
    fn monitor_counts_rejections() {
        let c = cfg();
        let e = est(Matrix4::identity());
        let ok = FusionOutcome { est: e, innovation: LocalPos::ORIGIN, test_ratio: 0.1, accepted: true };
        let bad = FusionOutcome { accepted: false, test_ratio: 3.0, ..ok };
        assert_eq!(monitor(HealthStatus::Healthy, &ok, &c), HealthStatus::Healthy);
        assert_eq!(monitor(HealthStatus::Healthy, &bad, &c), HealthStatus::Rejecting(1));
        assert_eq!(monitor(HealthStatus::Rejecting(4), &ok, &c), HealthStatus::Healthy);
        let mut h = HealthStatus::Healthy;
        let mut count = 0;
        for _ in 0..10 {
            h = monitor(h, &bad, &c);
            count += 1;
            if count < 10 {
                assert_eq!(h, HealthStatus::Rejecting(count));
            }
        }
        assert_eq!(h, HealthStatus::SpoofSuspected);
        assert_eq!(monitor(h, &bad, &c), HealthStatus::SpoofSuspected);
    }

    #[test]
    fn steady_state_converges_quickly_and_is_monotone_in_noise() {
        let c = cfg();
        let ss = steady_state_gain(&c, 0.1).unwrap();
        assert!(ss.iterations < 10_000, "{}", ss.iterations);
        let noisy = steady_state_gain(&FusionConfig { r_gps: 2.0, ..c }, 0.1).unwrap();
        assert!(noisy.gain[(0, 0)] < ss.gain[(0, 0)]);
        let quiet_model = steady_state_gain(&FusionConfig { q_accel: 1e-3, ..c }, 0.1).unwrap();
        assert!(quiet_model.gain[(0, 0)] < ss.gain[(0, 0)]);
        assert!(quiet_model.gain[(0, 0)] < 0.02);
    }

    #[test]
    fn unbiased_noise_tracking_rms_below_sensor_noise() {
        let c = cfg();
        let mut f = Estimator::settled_at(LocalPos::ORIGIN, c).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let noise = Normal::new(0.0, c.r_gps).unwrap();
        let vel = LocalPos::new(2.0, 1.0);
        let mut truth = LocalPos::ORIGIN;
        let mut sq = 0.0;
        let n = 2000;
        for k in 0..n {
            if k > 0 {
                let dv = if k == 1 { Vector2::new(vel.x, vel.y) } else { Vector2::zeros() };
                truth += vel * 0.1;
                f.predict(dv, 0.1);
            }
            let z = truth + LocalPos::new(noise.sample(&mut rng), noise.sample(&mut rng));
            let out = f.fuse(z).unwrap();
            assert!(min_eigen(&out.est.cov) > -1e-9);
            sq += f.est.pos.distance(truth).powi(2);
        }
        let rms = (sq / n as f64).sqrt();
        assert!(rms < c.r_gps, "rms {rms}");
    }

    proptest! {
        #[test]
        fn acceptance_flag_matches_ratio_and_rejection_is_identity(
            zx in -20.0f64..20.0, zy in -20.0f64..20.0, var in 0.01f64..5.0,
        ) {
            let e = est(Matrix4::identity() * var);
            let z = LocalPos::new(zx, zy);
            let out = fuse_gps(&e, z, &cfg()).unwrap();
            prop_assert_eq!(out.accepted, out.test_ratio <= 1.0);
            if !out.accepted {
                prop_assert_eq!(out.est, e);
            }
            prop_assert!(min_eigen(&out.est.cov) > -1e-9);
            prop_assert!((out.est.cov - out.est.cov.transpose()).abs().max() < 1e-12);
        }

        #[test]
        fn test_ratio_is_rotation_invariant(
            zx in -5.0f64..5.0, zy in -5.0f64..5.0, angle in -3.1f64..3.1,
            a in 0.05f64..2.0, b in 0.05f64..2.0, c_ in -0.04f64..0.04,
        ) {
            let mut cov = Matrix4::identity() * 0.3;
            cov[(0, 0)] = a;
            cov[(1, 1)] = b;
            cov[(0, 1)] = c_;
            cov[(1, 0)] = c_;
            let e = est(cov);
            let z = LocalPos::new(zx, zy);
            let base = fuse_gps(&e, z, &cfg()).unwrap().test_ratio;

            let (s, co) = angle.sin_cos();
            let rot2 = Matrix2::new(co, -s, s, co);
            let mut rot4 = Matrix4::zeros();
            rot4.fixed_view_mut::<2, 2>(0, 0).copy_from(&rot2);
            rot4.fixed_view_mut::<2, 2>(2, 2).copy_from(&rot2);
            let mut er = e;
            er.pos = e.pos.rotated(angle);
            er.cov = rot4 * e.cov * rot4.transpose();
            let rotated = fuse_gps(&er, z.rotated(angle), &cfg()).unwrap().test_ratio;
            prop_assert!((base - rotated).abs() <= 1e-9 * (1.0 + base));
        }
    }
}
