//! Desk-scale TD3 trainer for the navigation actor.
//!
//! Actor and critics are [`BranchNet`]s. The critics take the physical state
//! and the normalized action as trunk extras: `[d_rel_norm, yaw_rel_norm, a0, a1]`.
//! Training episodes observe the true pose; the estimator is only part of the
//! closed loop at evaluation time.

use std::f64::consts::PI;
use std::io::Write;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geo::LocalPos;
use crate::nn::{Activation, BranchNet, NetError};
use crate::policy::{compute_rel, MlpPolicy, NetworkShape, PolicyObservation, TargetSpec};
use crate::world::{
    check_collision, ray_depth, step_kinematics, Action, ActionLimits, Bounds, DepthConfig, Environment, Obstacle,
    UavState,
};

#[derive(Debug, Error)]
pub enum LearnerError {
    #[error("invalid training config: {0}")]
    Config(String),
    #[error(transparent)]
    Network(#[from] NetError),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RewardConfig {
    pub k_prog: f64,
    pub collision_penalty: f64,
    pub goal_bonus: f64,
    pub step_penalty: f64,
}

impl Default for RewardConfig {
    fn default() -> Self {
        Self { k_prog: 1.0, collision_penalty: 10.0, goal_bonus: 10.0, step_penalty: 0.01 }
    }
}

/// Progress toward the target, minus a per-step cost, with terminal penalty and bonus.
pub fn reward(prev: &UavState, next: &UavState, env: &Environment, cfg: &RewardConfig) -> f64 {
    let progress = prev.pos.distance(env.target) - next.pos.distance(env.target);
    let mut r = cfg.k_prog * progress - cfg.step_penalty;
    if check_collision(next, env).collided {
        r -= cfg.collision_penalty;
    } else if env.reached_goal(next.pos) {
        r += cfg.goal_bonus;
    }
    r
}

/// `G_t = r_t + gamma * G_{t+1}` for every step of an episode.
pub fn discounted_returns(rewards: &[f64], gamma: f64) -> Vec<f64> {
    let mut out = vec![0.0; rewards.len()];
    let mut g = 0.0;
    for (o, r) in out.iter_mut().zip(rewards).rev() {
        g = r + gamma * g;
        *o = g;
    }
    out
}

#[derive(Debug, Clone, PartialEq)]
pub struct Transition {
    pub s: PolicyObservation,
    /// Normalized action in `[-1, 1]^2`.
    pub a: [f64; 2],
    pub r: f64,
    pub s2: PolicyObservation,
    pub done: bool,
}

/// Fixed-capacity FIFO replay memory with seeded uniform sampling.
#[derive(Debug, Clone)]
pub struct ReplayBuffer {
    capacity: usize,
    items: Vec<Transition>,
    next: usize,
    rng: ChaCha8Rng,
}

impl ReplayBuffer {
    pub fn new(capacity: usize, seed: u64) -> Self {
        assert!(capacity > 0, "replay capacity must be positive");
        Self { capacity, items: Vec::with_capacity(capacity.min(1 << 16)), next: 0, rng: ChaCha8Rng::seed_from_u64(seed) }
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn push(&mut self, t: Transition) {
        if self.items.len() < self.capacity {
            self.items.push(t);
        } else {
            self.items[self.next] = t;
        }
        self.next = (self.next + 1) % self.capacity;
    }

    /// Oldest-first view of the stored transitions.
    pub fn iter_fifo(&self) -> impl Iterator<Item = &Transition> {
        let split = if self.items.len() < self.capacity { 0 } else { self.next };
        self.items[split..].iter().chain(&self.items[..split])
    }

    /// Draws `n` transitions uniformly with replacement.
    pub fn sample(&mut self, n: usize) -> Vec<&Transition> {
        assert!(!self.items.is_empty(), "sampling from an empty buffer");
        let idx: Vec<usize> = (0..n).map(|_| self.rng.gen_range(0..self.items.len())).collect();
        idx.into_iter().map(|i| &self.items[i]).collect()
    }
}

#[derive(Debug, Clone)]
pub struct Adam {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    m: Vec<f64>,
    v: Vec<f64>,
    t: i32,
}

impl Adam {
    pub fn new(n: usize, lr: f64) -> Self {
        Self { lr, beta1: 0.9, beta2: 0.999, eps: 1e-8, m: vec![0.0; n], v: vec![0.0; n], t: 0 }
    }

    /// One descent step along `grads`.
    pub fn step(&mut self, params: &mut [f64], grads: &[f64]) {
        self.t += 1;
        let c1 = 1.0 - self.beta1.powi(self.t);
        let c2 = 1.0 - self.beta2.powi(self.t);
        for i in 0..params.len() {
            self.m[i] = self.beta1 * self.m[i] + (1.0 - self.beta1) * grads[i];
            self.v[i] = self.beta2 * self.v[i] + (1.0 - self.beta2) * grads[i] * grads[i];
            params[i] -= self.lr * (self.m[i] / c1) / ((self.v[i] / c2).sqrt() + self.eps);
        }
    }
}

/// `target <- tau * target + (1 - tau) * online`, elementwise.
pub fn polyak_update(online: &[f64], target: &mut [f64], tau: f64) {
    assert_eq!(online.len(), target.len(), "polyak shapes differ");
    for (t, o) in target.iter_mut().zip(online) {
        *t = tau * *t + (1.0 - tau) * o;
    }
}

/// Randomized episode layout used during training.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainingTask {
    pub target_dist: [f64; 2],
    /// Initial heading error relative to the target bearing, sampled in `±max`.
    pub max_heading_error: f64,
    pub obstacle_radius: [f64; 2],
    /// Obstacle position as a fraction of the start-target segment.
    pub obstacle_frac: [f64; 2],
    /// Lateral displacement of the obstacle from the segment, sampled in `±max`.
    pub obstacle_lateral: f64,
    pub collision_radius: f64,
    pub goal_radius: f64,
    pub depth: DepthConfig,
    pub limits: ActionLimits,
    pub dt: f64,
    pub max_episode_steps: usize,
}

impl Default for TrainingTask {
    fn default() -> Self {
        Self {
            target_dist: [40.0, 160.0],
            max_heading_error: PI / 2.0,
            obstacle_radius: [3.0, 6.0],
            obstacle_frac: [0.35, 0.8],
            obstacle_lateral: 6.0,
            collision_radius: 1.0,
            goal_radius: 3.0,
            depth: DepthConfig::default(),
            limits: ActionLimits::default(),
            dt: 0.1,
            max_episode_steps: 400,
        }
    }
}

impl TrainingTask {
    /// Samples a start state and environment. Episodes always start at the origin.
    pub fn sample<R: Rng>(&self, rng: &mut R, with_obstacle: bool) -> (UavState, Environment) {
        let dist = rng.gen_range(self.target_dist[0]..=self.target_dist[1]);
        let bearing = rng.gen_range(-PI..PI);
        let target = LocalPos::from_heading(bearing) * dist;
        let yaw = bearing + rng.gen_range(-self.max_heading_error..=self.max_heading_error);
        let mut obstacles = Vec::new();
        if with_obstacle {
            let frac = rng.gen_range(self.obstacle_frac[0]..=self.obstacle_frac[1]);
            let lateral = rng.gen_range(-self.obstacle_lateral..=self.obstacle_lateral);
            let radius = rng.gen_range(self.obstacle_radius[0]..=self.obstacle_radius[1]);
            let center = target * frac + LocalPos::from_heading(bearing + PI / 2.0) * lateral;
            obstacles.push(Obstacle { center, radius });
        }
        let reach = dist + 60.0;
        let env = Environment {
            obstacles,
            target,
            collision_radius: self.collision_radius,
            bounds: Bounds { min: LocalPos::new(-reach, -reach), max: LocalPos::new(reach, reach) },
            start: LocalPos::ORIGIN,
            goal_radius: self.goal_radius,
        };
        (UavState::new(LocalPos::ORIGIN, crate::geo::wrap_angle(yaw)), env)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum EpisodeEnd {
    Goal,
    Collision,
    OutOfBounds,
    StepLimit,
}

/// Single episode of the training environment, observed from the true pose.
#[derive(Debug, Clone)]
pub struct Episode {
    pub state: UavState,
    pub env: Environment,
    pub tgt: TargetSpec,
    pub steps: usize,
}

impl Episode {
    pub fn new(state: UavState, env: Environment) -> Self {
        let tgt = TargetSpec::from_start(state.pos, env.target);
        Self { state, env, tgt, steps: 0 }
    }

    pub fn observe(&self, task: &TrainingTask) -> PolicyObservation {
        let scan = ray_depth(&self.state, &self.env, &task.depth);
        // the episode ends before the vehicle can sit exactly on the target
        let rel = compute_rel(self.state.pos, self.state.yaw, &self.tgt)
            .unwrap_or(crate::policy::Relative { d_rel: 0.0, yaw_rel: 0.0 });
        PolicyObservation::new(&scan, rel, self.tgt.d_scale)
    }

    /// Applies `a`, returning the reward and the terminal condition if any.
    pub fn step(&mut self, a: &Action, task: &TrainingTask, rc: &RewardConfig) -> (f64, Option<EpisodeEnd>) {
        let next = step_kinematics(&self.state, a, task.dt);
        let r = reward(&self.state, &next, &self.env, rc);
        self.state = next;
        self.steps += 1;
        let end = if check_collision(&next, &self.env).collided {
            Some(EpisodeEnd::Collision)
        } else if self.env.reached_goal(next.pos) {
            Some(EpisodeEnd::Goal)
        } else if !self.env.bounds.contains(next.pos) {
            Some(EpisodeEnd::OutOfBounds)
        } else if self.steps >= task.max_episode_steps {
            Some(EpisodeEnd::StepLimit)
        } else {
            None
        };
        (r, end)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Td3Config {
    pub gamma: f64,
    pub polyak: f64,
    pub policy_delay: u32,
    pub target_noise_sigma: f64,
    pub noise_clip: f64,
    pub batch_size: usize,
    pub buffer_capacity: usize,
    pub learning_rate: f64,
    pub exploration_sigma: f64,
    pub total_steps: usize,
    /// Uniformly random actions before the first update.
    pub warmup_steps: usize,
    /// Fraction of `total_steps` trained without obstacles.
    pub obstacle_free_fraction: f64,
    pub seed: u64,
    pub network: NetworkShape,
    pub reward: RewardConfig,
}

impl Default for Td3Config {
    fn default() -> Self {
        Self {
            gamma: 0.99,
            polyak: 0.995,
            policy_delay: 2,
            target_noise_sigma: 0.2,
            noise_clip: 0.5,
            batch_size: 128,
            buffer_capacity: 100_000,
            learning_rate: 1e-3,
            exploration_sigma: 0.1,
            total_steps: 150_000,
            warmup_steps: 2_000,
            obstacle_free_fraction: 0.3,
            seed: 0,
            network: NetworkShape::default(),
            reward: RewardConfig::default(),
        }
    }
}

impl Td3Config {
    pub fn validate(&self) -> Result<(), LearnerError> {
        let err = |m: &str| Err(LearnerError::Config(m.into()));
        if !(self.gamma > 0.0 && self.gamma < 1.0) {
            return err("gamma must be in (0, 1)");
        }
        if !(self.polyak >= 0.0 && self.polyak <= 1.0) {
            return err("polyak must be in [0, 1]");
        }
        if self.policy_delay == 0 {
            return err("policy_delay must be >= 1");
        }
        if !(self.target_noise_sigma >= 0.0 && self.noise_clip >= 0.0 && self.exploration_sigma >= 0.0) {
            return err("noise parameters must be >= 0");
        }
        if self.batch_size == 0 || self.buffer_capacity == 0 {
            return err("batch_size and buffer_capacity must be >= 1");
        }
        if !(self.learning_rate > 0.0) {
            return err("learning_rate must be > 0");
        }
        if !(0.0..=1.0).contains(&self.obstacle_free_fraction) {
            return err("obstacle_free_fraction must be in [0, 1]");
        }
        Ok(())
    }
}

/// Something that can score a normalized action and differentiate with respect to it.
pub trait ActionValue {
    fn q_and_grad(&self, s: &PolicyObservation, a: [f64; 2]) -> (f64, [f64; 2]);
}

fn critic_extra(s: &PolicyObservation, a: [f64; 2]) -> [f64; 4] {
    [s.d_rel_norm, s.yaw_rel_norm, a[0], a[1]]
}

pub fn q_value(critic: &BranchNet, s: &PolicyObservation, a: [f64; 2]) -> f64 {
    critic.forward(&s.depth, &critic_extra(s, a)).expect("critic layout checked at construction")[0]
}

impl ActionValue for BranchNet {
    fn q_and_grad(&self, s: &PolicyObservation, a: [f64; 2]) -> (f64, [f64; 2]) {
        let cache = self.forward_cached(&s.depth, &critic_extra(s, a)).expect("critic layout checked at construction");
        let mut scratch = vec![0.0; self.param_count()];
        let g = self.backward(&cache, &[1.0], &mut scratch);
        (cache.output()[0], [g[2], g[3]])
    }
}

pub fn actor_output(actor: &BranchNet, s: &PolicyObservation) -> [f64; 2] {
    let out = actor.forward(&s.depth, &s.physical()).expect("actor layout checked at construction");
    [out[0], out[1]]
}

/// `clip(pi_target(s') + clip(eps, +-noise_clip), [-1, 1])`.
pub fn smoothed_target_action<R: Rng>(actor_target: &BranchNet, s2: &PolicyObservation, cfg: &Td3Config, rng: &mut R) -> [f64; 2] {
    let mut a = actor_output(actor_target, s2);
    if cfg.target_noise_sigma > 0.0 {
        let n = Normal::new(0.0, cfg.target_noise_sigma).expect("sigma checked");
        for v in &mut a {
            let eps: f64 = n.sample(rng);
            *v = (*v + eps.clamp(-cfg.noise_clip, cfg.noise_clip)).clamp(-1.0, 1.0);
        }
    }
    a
}

#[derive(Debug, Clone, PartialEq)]
pub struct CriticPair {
    pub q1: BranchNet,
    pub q2: BranchNet,
    pub q1_target: BranchNet,
    pub q2_target: BranchNet,
    pub actor_target: BranchNet,
}

/// TD target for one transition, with the two target-critic values it came from.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TdTarget {
    pub y: f64,
    pub q1_next: f64,
    pub q2_next: f64,
}

pub fn td_targets<R: Rng>(batch: &[&Transition], critics: &CriticPair, cfg: &Td3Config, rng: &mut R) -> Vec<TdTarget> {
    batch
        .iter()
        .map(|t| {
            let a2 = smoothed_target_action(&critics.actor_target, &t.s2, cfg, rng);
            let q1_next = q_value(&critics.q1_target, &t.s2, a2);
            let q2_next = q_value(&critics.q2_target, &t.s2, a2);
            let boot = if t.done { 0.0 } else { cfg.gamma * q1_next.min(q2_next) };
            TdTarget { y: t.r + boot, q1_next, q2_next }
        })
        .collect()
}

/// Mean squared TD error of `critic` and its parameter gradient.
pub fn critic_loss_and_grad(critic: &BranchNet, batch: &[&Transition], targets: &[f64]) -> (f64, Vec<f64>) {
    let mut grads = vec![0.0; critic.param_count()];
    let n = batch.len() as f64;
    let mut loss = 0.0;
    for (t, &y) in batch.iter().zip(targets) {
        let cache = critic.forward_cached(&t.s.depth, &critic_extra(&t.s, t.a)).expect("critic layout");
        let err = cache.output()[0] - y;
        loss += err * err / n;
        critic.backward(&cache, &[2.0 * err / n], &mut grads);
    }
    (loss, grads)
}

/// `-mean Q(s, pi(s))` and its gradient with respect to the actor parameters.
pub fn actor_loss_and_grad<C: ActionValue>(actor: &BranchNet, critic: &C, states: &[&PolicyObservation]) -> (f64, Vec<f64>) {
    let mut grads = vec![0.0; actor.param_count()];
    let n = states.len() as f64;
    let mut loss = 0.0;
    for s in states {
        let cache = actor.forward_cached(&s.depth, &s.physical()).expect("actor layout");
        let out = cache.output();
        let (q, dq) = critic.q_and_grad(s, [out[0], out[1]]);
        loss -= q / n;
        actor.backward(&cache, &[-dq[0] / n, -dq[1] / n], &mut grads);
    }
    (loss, grads)
}

/// Online networks, targets and optimizer state.
#[derive(Debug, Clone)]
pub struct Td3Agent {
    pub actor: BranchNet,
    pub critics: CriticPair,
    actor_opt: Adam,
    q1_opt: Adam,
    q2_opt: Adam,
    pub critic_updates: u64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UpdateStats {
    pub critic_losses: (f64, f64),
    pub actor_loss: Option<f64>,
}

impl Td3Agent {
    pub fn new<R: Rng>(cfg: &Td3Config, rng: &mut R) -> Result<Self, LearnerError> {
        let shape = &cfg.network;
        let actor = BranchNet::random(shape.depth_branch()?, shape.trunk(2, 2, Activation::Tanh)?, rng, 0.1)?;
        let critic = |rng: &mut R| BranchNet::random(shape.depth_branch()?, shape.trunk(4, 1, Activation::Identity)?, rng, 1.0);
        let q1 = critic(rng)?;
        let q2 = critic(rng)?;
        Ok(Self::from_networks(actor, q1, q2, cfg.learning_rate))
    }

    pub fn from_networks(actor: BranchNet, q1: BranchNet, q2: BranchNet, lr: f64) -> Self {
        let critics =
            CriticPair { q1_target: q1.clone(), q2_target: q2.clone(), actor_target: actor.clone(), q1, q2 };
        Self {
            actor_opt: Adam::new(actor.param_count(), lr),
            q1_opt: Adam::new(critics.q1.param_count(), lr),
            q2_opt: Adam::new(critics.q2.param_count(), lr),
            actor,
            critics,
            critic_updates: 0,
        }
    }

    /// One gradient step on both critics against the clipped double-Q target.
    pub fn critic_update<R: Rng>(&mut self, batch: &[&Transition], cfg: &Td3Config, rng: &mut R) -> (f64, f64) {
        assert!(!batch.is_empty(), "critic update needs a nonempty batch");
        let y: Vec<f64> = td_targets(batch, &self.critics, cfg, rng).iter().map(|t| t.y).collect();
        let (l1, g1) = critic_loss_and_grad(&self.critics.q1, batch, &y);
        let (l2, g2) = critic_loss_and_grad(&self.critics.q2, batch, &y);
        self.q1_opt.step(&mut self.critics.q1.params, &g1);
        self.q2_opt.step(&mut self.critics.q2.params, &g2);
        self.critic_updates += 1;
        (l1, l2)
    }

    /// One ascent step of the actor on `Q1(s, pi(s))`.
    pub fn actor_update(&mut self, states: &[&PolicyObservation]) -> f64 {
        let (loss, g) = actor_loss_and_grad(&self.actor, &self.critics.q1, states);
        self.actor_opt.step(&mut self.actor.params, &g);
        loss
    }

    pub fn update_targets(&mut self, tau: f64) {
        polyak_update(&self.actor.params, &mut self.critics.actor_target.params, tau);
        polyak_update(&self.critics.q1.params, &mut self.critics.q1_target.params, tau);
        polyak_update(&self.critics.q2.params, &mut self.critics.q2_target.params, tau);
    }

    /// Critic step, plus actor and target steps on every `policy_delay`-th call.
    pub fn train_step<R: Rng>(&mut self, batch: &[&Transition], cfg: &Td3Config, rng: &mut R) -> UpdateStats {
        let critic_losses = self.critic_update(batch, cfg, rng);
        let mut actor_loss = None;
        if self.critic_updates.is_multiple_of(cfg.policy_delay as u64) {
            let states: Vec<&PolicyObservation> = batch.iter().map(|t| &t.s).collect();
            actor_loss = Some(self.actor_update(&states));
            self.update_targets(cfg.polyak);
        }
        UpdateStats { critic_losses, actor_loss }
    }

    pub fn policy(&self, limits: ActionLimits) -> MlpPolicy {
        MlpPolicy { net: self.actor.clone(), limits }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpisodeStats {
    pub episode: usize,
    pub ret: f64,
    pub success: bool,
    pub length: usize,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub policy: MlpPolicy,
    pub curve: Vec<EpisodeStats>,
}

/// Trains from scratch. `on_episode` sees every finished episode.
pub fn train_with(
    task: &TrainingTask,
    cfg: &Td3Config,
    mut on_episode: impl FnMut(&EpisodeStats),
) -> Result<TrainOutcome, LearnerError> {
    cfg.validate()?;
    if task.depth.n_rays != cfg.network.n_rays {
        return Err(LearnerError::Config(format!(
            "task has {} rays, network expects {}",
            task.depth.n_rays, cfg.network.n_rays
        )));
    }
    let mut init_rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut env_rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ 0x5EED_0001);
    let mut act_rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ 0x5EED_0002);
    let mut upd_rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ 0x5EED_0003);
    let mut agent = Td3Agent::new(cfg, &mut init_rng)?;
    let mut buffer = ReplayBuffer::new(cfg.buffer_capacity, cfg.seed ^ 0x5EED_0004);
    let explore = (cfg.exploration_sigma > 0.0).then(|| Normal::new(0.0, cfg.exploration_sigma).expect("sigma checked"));
    let obstacle_from = (cfg.total_steps as f64 * cfg.obstacle_free_fraction) as usize;

    let mut curve = Vec::new();
    let mut step = 0;
    while step < cfg.total_steps {
        let (s0, env) = task.sample(&mut env_rng, step >= obstacle_from);
        let mut ep = Episode::new(s0, env);
        let mut obs = ep.observe(task);
        let mut ret = 0.0;
        let end = loop {
            let a = if step < cfg.warmup_steps {
                [act_rng.gen_range(-1.0..=1.0), act_rng.gen_range(-1.0..=1.0)]
            } else {
                let mut a = actor_output(&agent.actor, &obs);
                if let Some(n) = &explore {
                    for v in &mut a {
                        *v = (*v + n.sample(&mut act_rng)).clamp(-1.0, 1.0);
                    }
                }
                a
            };
            let (r, end) = ep.step(&Action::from_normalized(a, &task.limits), task, &cfg.reward);
            let next = ep.observe(task);
            let done = matches!(end, Some(EpisodeEnd::Goal | EpisodeEnd::Collision | EpisodeEnd::OutOfBounds));
            buffer.push(Transition { s: obs, a, r, s2: next.clone(), done });
            obs = next;
            ret += r;
            step += 1;
            if step >= cfg.warmup_steps && buffer.len() >= cfg.batch_size {
                let batch: Vec<Transition> = buffer.sample(cfg.batch_size).into_iter().cloned().collect();
                let refs: Vec<&Transition> = batch.iter().collect();
                agent.train_step(&refs, cfg, &mut upd_rng);
            }
            if end.is_some() || step >= cfg.total_steps {
                break end;
            }
        };
        let stats = EpisodeStats {
            episode: curve.len(),
            ret,
            success: end == Some(EpisodeEnd::Goal),
            length: ep.steps,
        };
        on_episode(&stats);
        curve.push(stats);
    }
    Ok(TrainOutcome { policy: agent.policy(task.limits), curve })
}

pub fn train(task: &TrainingTask, cfg: &Td3Config) -> Result<TrainOutcome, LearnerError> {
    train_with(task, cfg, |_| {})
}

/// Greedy rollout on the true pose; returns how the episode ended.
pub fn rollout(policy: &MlpPolicy, start: UavState, env: Environment, task: &TrainingTask) -> (EpisodeEnd, usize) {
    let mut ep = Episode::new(start, env);
    loop {
        let obs = ep.observe(task);
        let a = policy.forward(&obs).expect("policy matches task");
        if let (_, Some(end)) = ep.step(&a, task, &RewardConfig::default()) {
            return (end, ep.steps);
        }
    }
}

/// Fraction of `n` sampled episodes that reach the goal.
pub fn success_rate(policy: &MlpPolicy, task: &TrainingTask, n: usize, with_obstacle: bool, seed: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let wins = (0..n)
        .filter(|_| {
            let (s0, env) = task.sample(&mut rng, with_obstacle);
            rollout(policy, s0, env, task).0 == EpisodeEnd::Goal
        })
        .count();
    wins as f64 / n as f64
}

pub fn write_learning_curve<W: Write>(mut w: W, curve: &[EpisodeStats]) -> std::io::Result<()> {
    writeln!(w, "episode,return,success,length")?;
    for e in curve {
        writeln!(w, "{},{:.6},{},{}", e.episode, e.ret, e.success as u8, e.length)?;
    }
    Ok(())
}
