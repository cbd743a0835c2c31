//! DQN training: ε-greedy acting, uniform replay, periodic target sync and
//! greedy evaluation.

use std::fmt::Write as _;

use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::channel::spectral_efficiency;
use crate::env::{mean, Env};
use crate::error::{Error, Result};
use crate::neural::{
    init_params, loss_and_grad, td_targets, AdamConfig, AdamState, Batch, MlpParams, Reduction,
    Transition,
};
use crate::scenario::ScenarioConfig;
use crate::trace::SlotRecord;

pub const TRAINING_LOG_HEADER: &str = "iteration,loss,epsilon,episode,episode_mean_reward";

/// Linear decay from `start` to `end` over `decay_fraction` of the run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpsilonSchedule {
    pub start: f64,
    pub end: f64,
    pub decay_fraction: f64,
}

impl Default for EpsilonSchedule {
    fn default() -> Self {
        Self {
            start: 1.0,
            end: 0.05,
            decay_fraction: 0.2,
        }
    }
}

impl EpsilonSchedule {
    pub fn value(&self, iteration: u64, total: u64) -> f64 {
        let horizon = self.decay_fraction * total as f64;
        if horizon <= 0.0 {
            return self.end;
        }
        let frac = (iteration as f64 / horizon).min(1.0);
        self.start + (self.end - self.start) * frac
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DqnConfig {
    pub hidden: Vec<usize>,
    pub gamma: f64,
    pub batch_size: usize,
    /// Gradient updates between target-network copies.
    pub target_sync_period: u64,
    /// Environment steps.
    pub total_iterations: u64,
    pub epsilon: EpsilonSchedule,
    pub replay_capacity: usize,
    /// Environment steps per gradient update.
    pub steps_per_update: u64,
    pub adam: AdamConfig,
    pub reduction: Reduction,
    /// Rescales the gradient to at most this norm when set.
    pub grad_clip: Option<f64>,
}

impl DqnConfig {
    /// Reference scale: three hidden layers and 500k iterations.
    pub fn full() -> Self {
        Self {
            hidden: vec![300, 300, 200],
            gamma: 0.95,
            batch_size: 500,
            target_sync_period: 500,
            total_iterations: 500_000,
            epsilon: EpsilonSchedule::default(),
            replay_capacity: 100_000,
            steps_per_update: 1,
            adam: AdamConfig::default(),
            reduction: Reduction::Mean,
            grad_clip: None,
        }
    }

    /// Desk scale: two 64-unit hidden layers and 50k iterations.
    pub fn desk() -> Self {
        Self {
            hidden: vec![64, 64],
            total_iterations: 50_000,
            ..Self::full()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.hidden.contains(&0) {
            return Err(Error::config("dqn.hidden", "layer sizes must be > 0"));
        }
        if !(0.0..=1.0).contains(&self.gamma) {
            return Err(Error::config("dqn.gamma", "must lie in [0, 1]"));
        }
        if self.batch_size == 0 {
            return Err(Error::config("dqn.batch_size", "must be > 0"));
        }
        if self.batch_size > self.replay_capacity {
            return Err(Error::config(
                "dqn.batch_size",
                "must not exceed replay_capacity",
            ));
        }
        if self.target_sync_period == 0 {
            return Err(Error::config("dqn.target_sync_period", "must be > 0"));
        }
        if self.steps_per_update == 0 {
            return Err(Error::config("dqn.steps_per_update", "must be > 0"));
        }
        let e = self.epsilon;
        if !((0.0..=1.0).contains(&e.start) && (0.0..=1.0).contains(&e.end)) {
            return Err(Error::config(
                "dqn.epsilon",
                "start and end must lie in [0, 1]",
            ));
        }
        if !(e.decay_fraction.is_finite() && e.decay_fraction >= 0.0) {
            return Err(Error::config("dqn.epsilon", "decay_fraction must be >= 0"));
        }
        let a = self.adam;
        if !(a.lr > 0.0 && a.lr.is_finite()) {
            return Err(Error::config("dqn.learning_rate", "must be finite and > 0"));
        }
        if !((0.0..1.0).contains(&a.beta1) && (0.0..1.0).contains(&a.beta2) && a.eps > 0.0) {
            return Err(Error::config(
                "dqn.adam",
                "betas must lie in [0, 1) and eps > 0",
            ));
        }
        if let Some(c) = self.grad_clip {
            if !(c > 0.0 && c.is_finite()) {
                return Err(Error::config("dqn.grad_clip", "must be finite and > 0"));
            }
        }
        Ok(())
    }

    pub fn layer_dims(&self, cfg: &ScenarioConfig) -> Vec<usize> {
        let mut dims = vec![cfg.observation_dim()];
        dims.extend(&self.hidden);
        dims.push(cfg.action_count());
        dims
    }
}

/// Fixed-capacity ring; the oldest transition is overwritten first.
#[derive(Debug, Clone)]
pub struct ReplayBuffer {
    capacity: usize,
    items: Vec<Transition>,
    next: usize,
}

impl ReplayBuffer {
    pub fn new(capacity: usize) -> Self {
        assert!(capacity > 0, "replay capacity must be > 0");
        Self {
            capacity,
            items: Vec::with_capacity(capacity.min(1 << 16)),
            next: 0,
        }
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn push(&mut self, t: Transition) {
        if self.items.len() < self.capacity {
            self.items.push(t);
        } else {
            self.items[self.next] = t;
        }
        self.next = (self.next + 1) % self.capacity;
    }

    /// Stored transitions from oldest to newest.
    pub fn iter_oldest_first(&self) -> impl Iterator<Item = &Transition> {
        let split = if self.items.len() < self.capacity {
            0
        } else {
            self.next
        };
        self.items[split..].iter().chain(&self.items[..split])
    }

    /// `n` distinct slots drawn uniformly.
    pub fn sample<R: Rng + ?Sized>(&self, n: usize, rng: &mut R) -> Result<Vec<&Transition>> {
        if n == 0 || n > self.items.len() {
            return Err(Error::EmptyBatch);
        }
        Ok(index::sample(rng, self.items.len(), n)
            .into_iter()
            .map(|i| &self.items[i])
            .collect())
    }
}

/// Index of the largest value; the lowest index wins ties.
pub fn argmax(q: &[f64]) -> usize {
    let mut best = 0;
    for (i, v) in q.iter().enumerate().skip(1) {
        if *v > q[best] {
            best = i;
        }
    }
    best
}

/// Uniform action with probability `epsilon`, otherwise greedy.
pub fn select_action<R: Rng + ?Sized>(
    params: &MlpParams,
    obs: &[f64],
    epsilon: f64,
    rng: &mut R,
) -> Result<usize> {
    if epsilon > 0.0 && rng.gen::<f64>() < epsilon {
        return Ok(rng.gen_range(0..params.output_dim()));
    }
    Ok(argmax(&params.forward(obs)?))
}

#[derive(Debug, Clone, PartialEq)]
pub struct LogRow {
    pub iteration: u64,
    /// Absent before the first gradient update.
    pub loss: Option<f64>,
    pub epsilon: f64,
    pub episode: u64,
    /// Present on the final step of each episode.
    pub episode_mean_reward: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct TrainingLog {
    pub rows: Vec<LogRow>,
}

impl TrainingLog {
    pub fn losses(&self) -> Vec<f64> {
        self.rows.iter().filter_map(|r| r.loss).collect()
    }

    pub fn episode_rewards(&self) -> Vec<f64> {
        self.rows
            .iter()
            .filter_map(|r| r.episode_mean_reward)
            .collect()
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::with_capacity(48 * (self.rows.len() + 1));
        out.push_str(TRAINING_LOG_HEADER);
        out.push('\n');
        for r in &self.rows {
            let _ = write!(out, "{},", r.iteration);
            if let Some(l) = r.loss {
                let _ = write!(out, "{l}");
            }
            let _ = write!(out, ",{},{},", r.epsilon, r.episode);
            if let Some(m) = r.episode_mean_reward {
                let _ = write!(out, "{m}");
            }
            out.push('\n');
        }
        out
    }
}

#[derive(Debug, Clone)]
pub struct TrainOutput {
    pub params: MlpParams,
    pub log: TrainingLog,
    /// Environment configuration with the calibrated reward filled in.
    pub scenario: ScenarioConfig,
}

/// Trains from a fresh initialization drawn from `seed`.
pub fn train(cfg: &ScenarioConfig, dqn: &DqnConfig, seed: u64) -> Result<TrainOutput> {
    dqn.validate()?;
    let params = init_params(&dqn.layer_dims(cfg), seed)?;
    train_from(cfg, dqn, params, seed)
}

/// Trains starting from `params`, e.g. a loaded checkpoint. Replay and
/// optimizer state start empty.
pub fn train_from(
    cfg: &ScenarioConfig,
    dqn: &DqnConfig,
    mut params: MlpParams,
    seed: u64,
) -> Result<TrainOutput> {
    dqn.validate()?;
    let dims = dqn.layer_dims(cfg);
    if params.dims() != dims.as_slice() {
        return Err(Error::DimensionMismatch {
            context: "initial network layers",
            expected: dims.iter().product(),
            actual: params.dims().iter().product(),
        });
    }
    let mut env = Env::new(cfg.clone())?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x9e37_79b9_7f4a_7c15);
    let mut target = params.clone();
    let mut adam = AdamState::new(&params, dqn.adam);
    let mut replay = ReplayBuffer::new(dqn.replay_capacity);
    let mut log = TrainingLog::default();
    let mut updates: u64 = 0;
    let mut episode: u64 = 0;
    let mut episode_reward = 0.0;
    let mut episode_len = 0usize;
    let mut obs = env.reset().0;

    for it in 0..dqn.total_iterations {
        let eps = dqn.epsilon.value(it, dqn.total_iterations);
        let action = select_action(&params, &obs, eps, &mut rng)?;
        let out = env.step(action)?;
        episode_reward += out.reward;
        episode_len += 1;
        replay.push(Transition {
            state: std::mem::take(&mut obs),
            action,
            reward: out.reward,
            next_state: out.observation.0.clone(),
            done: out.done,
        });
        obs = out.observation.0;

        let mut loss = None;
        if replay.len() >= dqn.batch_size && (it + 1) % dqn.steps_per_update == 0 {
            let sample = replay.sample(dqn.batch_size, &mut rng)?;
            let targets = td_targets(&sample, &target, dqn.gamma)?;
            let mut batch = Batch {
                states: Vec::with_capacity(sample.len() * params.input_dim()),
                actions: Vec::with_capacity(sample.len()),
                targets,
            };
            for t in &sample {
                batch.states.extend_from_slice(&t.state);
                batch.actions.push(t.action);
            }
            let (l, mut grads) = loss_and_grad(&params, &batch, dqn.reduction)?;
            if !l.is_finite() {
                return Err(Error::Diverged { iteration: it });
            }
            if let Some(clip) = dqn.grad_clip {
                let n = grads.norm();
                if n > clip {
                    grads.scale(clip / n);
                }
            }
            adam.step(&mut params, &grads)?;
            updates += 1;
            if updates % dqn.target_sync_period == 0 {
                target.copy_from(&params);
            }
            loss = Some(l);
        }

        let mut mean_reward = None;
        if out.done {
            mean_reward = Some(episode_reward / episode_len as f64);
        }
        log.rows.push(LogRow {
            iteration: it,
            loss,
            epsilon: eps,
            episode,
            episode_mean_reward: mean_reward,
        });
        if out.done {
            episode += 1;
            episode_reward = 0.0;
            episode_len = 0;
            obs = env.reset().0;
        }
    }
    Ok(TrainOutput {
        params,
        log,
        scenario: env.config().clone(),
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct Evaluation {
    /// Mean delivered rate over every slot of every episode, bps.
    pub mean_rate: f64,
    pub spectral_efficiency: f64,
    pub mean_reward: f64,
    /// Slots of the first episode.
    pub trace: Vec<SlotRecord>,
}

/// Greedy rollouts of `params`.
pub fn evaluate(params: &MlpParams, cfg: &ScenarioConfig, episodes: usize) -> Result<Evaluation> {
    if episodes == 0 {
        return Err(Error::config("episodes", "must be > 0"));
    }
    let mut env = Env::new(cfg.clone())?;
    if params.input_dim() != env.observation_dim() {
        return Err(Error::DimensionMismatch {
            context: "policy input",
            expected: env.observation_dim(),
            actual: params.input_dim(),
        });
    }
    if params.output_dim() != env.action_count() {
        return Err(Error::DimensionMismatch {
            context: "policy output",
            expected: env.action_count(),
            actual: params.output_dim(),
        });
    }
    let mut rates = Vec::new();
    let mut rewards = Vec::new();
    let mut trace = Vec::new();
    for ep in 0..episodes {
        let mut obs = env.reset();
        while !env.is_done() {
            let a = argmax(&params.forward(obs.as_slice())?);
            let out = env.step(a)?;
            rates.push(out.info.record.e2e);
            rewards.push(out.reward);
            if ep == 0 {
                trace.push(out.info.record);
            }
            obs = out.observation;
        }
    }
    let mean_rate = mean(&rates);
    Ok(Evaluation {
        mean_rate,
        spectral_efficiency: spectral_efficiency(mean_rate, &cfg.radio),
        mean_reward: mean(&rewards),
        trace,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenario::RewardParams;
    use proptest::prelude::*;

    fn small_cfg() -> ScenarioConfig {
        ScenarioConfig {
            episode_slots: 20,
            reward: Some(RewardParams {
                mu: 4.0e5,
                sigma: 1.0e5,
            }),
            ..ScenarioConfig::default()
        }
    }

    fn small_dqn(iterations: u64) -> DqnConfig {
        DqnConfig {
            hidden: vec![8],
            batch_size: 16,
            target_sync_period: 5,
            total_iterations: iterations,
            replay_capacity: 64,
            ..DqnConfig::desk()
        }
    }

    fn transition(tag: usize) -> Transition {
        Transition {
            state: vec![tag as f64],
            action: 0,
            reward: 0.5,
            next_state: vec![0.0],
            done: false,
        }
    }

    #[test]
    fn greedy_examples() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let p = MlpParams::from_layers(&[1, 3], &[(vec![0.0; 3], vec![0.1, 0.9, 0.3])]).unwrap();
        assert_eq!(select_action(&p, &[1.0], 0.0, &mut rng).unwrap(), 1);
        let tie = MlpParams::from_layers(&[1, 2], &[(vec![0.0; 2], vec![0.5, 0.5])]).unwrap();
        assert_eq!(select_action(&tie, &[1.0], 0.0, &mut rng).unwrap(), 0);
    }

    #[test]
    fn exploration_is_uniform() {
        let k = 10;
        let p = init_params(&[2, k], 0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        let n = 100_000;
        let mut counts = vec![0usize; k];
        for _ in 0..n {
            counts[select_action(&p, &[0.1, 0.2], 1.0, &mut rng).unwrap()] += 1;
        }
        let e = n as f64 / k as f64;
        let chi2: f64 = counts.iter().map(|&c| (c as f64 - e).powi(2) / e).sum();
        // chi-square critical value, 9 degrees of freedom, p = 0.01
        assert!(chi2 < 21.666, "chi2 = {chi2}");
    }

    #[test]
    fn epsilon_schedule_shape() {
        let s = EpsilonSchedule::default();
        assert_eq!(s.value(0, 100), 1.0);
        assert!((s.value(10, 100) - 0.525).abs() < 1e-12);
        assert!((s.value(20, 100) - 0.05).abs() < 1e-12);
        assert!((s.value(99, 100) - 0.05).abs() < 1e-12);
    }

    #[test]
    fn replay_evicts_oldest() {
        let mut rb = ReplayBuffer::new(5);
        for i in 0..8 {
            rb.push(transition(i));
        }
        assert_eq!(rb.len(), 5);
        let kept: Vec<f64> = rb.iter_oldest_first().map(|t| t.state[0]).collect();
        assert_eq!(kept, vec![3.0, 4.0, 5.0, 6.0, 7.0]);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        assert!(rb.sample(6, &mut rng).is_err());
        let s = rb.sample(5, &mut rng).unwrap();
        let mut tags: Vec<f64> = s.iter().map(|t| t.state[0]).collect();
        tags.sort_by(f64::total_cmp);
        assert_eq!(tags, kept);
    }

    #[test]
    fn replay_sampling_is_uniform() {
        let mut rb = ReplayBuffer::new(20);
        for i in 0..20 {
            rb.push(transition(i));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mut counts = [0usize; 20];
        let draws = 20_000;
        for _ in 0..draws {
            for t in rb.sample(4, &mut rng).unwrap() {
                counts[t.state[0] as usize] += 1;
            }
        }
        let e = (draws * 4) as f64 / 20.0;
        let chi2: f64 = counts.iter().map(|&c| (c as f64 - e).powi(2) / e).sum();
        // 19 degrees of freedom, p = 0.01
        assert!(chi2 < 36.191, "chi2 = {chi2}");
    }

    #[test]
    fn zero_iterations_returns_init() {
        let cfg = small_cfg();
        let dqn = small_dqn(0);
        let out = train(&cfg, &dqn, 3).unwrap();
        assert_eq!(out.params, init_params(&dqn.layer_dims(&cfg), 3).unwrap());
        assert!(out.log.rows.is_empty());
    }

    #[test]
    fn training_is_deterministic() {
        let cfg = small_cfg();
        let dqn = small_dqn(120);
        let a = train(&cfg, &dqn, 9).unwrap();
        let b = train(&cfg, &dqn, 9).unwrap();
        assert_eq!(a.log.to_csv(), b.log.to_csv());
        assert_eq!(a.params, b.params);
        assert!(a.log.losses().len() > 100 - 16);
        assert_eq!(a.log.episode_rewards().len(), 6);
        let c = train(&cfg, &dqn, 10).unwrap();
        assert_ne!(a.log.to_csv(), c.log.to_csv());
    }

    #[test]
    fn log_csv_schema() {
        let out = train(&small_cfg(), &small_dqn(40), 1).unwrap();
        let csv = out.log.to_csv();
        let mut lines = csv.lines();
        assert_eq!(lines.next(), Some(TRAINING_LOG_HEADER));
        assert_eq!(lines.count(), 40);
        assert!(csv.lines().skip(1).all(|l| l.split(',').count() == 5));
    }

    #[test]
    fn resume_requires_matching_dims() {
        let cfg = small_cfg();
        let p = init_params(&[3, 4], 0).unwrap();
        assert!(train_from(&cfg, &small_dqn(1), p, 0).is_err());
    }

    #[test]
    fn dqn_config_validation() {
        let mut d = DqnConfig::desk();
        assert!(d.validate().is_ok());
        d.batch_size = d.replay_capacity + 1;
        assert!(d.validate().is_err());
        let d = DqnConfig {
            target_sync_period: 0,
            ..DqnConfig::desk()
        };
        assert!(d.validate().is_err());
    }

    #[test]
    fn evaluation_is_deterministic_and_nonnegative() {
        let cfg = small_cfg();
        let p = init_params(&small_dqn(0).layer_dims(&cfg), 4).unwrap();
        let a = evaluate(&p, &cfg, 2).unwrap();
        let b = evaluate(&p, &cfg, 2).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.trace.len(), cfg.episode_slots);
        assert!(a.spectral_efficiency >= 0.0);
        let wrong = init_params(&[5, 4, 50], 0).unwrap();
        assert!(matches!(
            evaluate(&wrong, &cfg, 1),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    proptest! {
        #[test]
        fn replay_holds_last_capacity_items(cap in 1usize..40, extra in 0usize..60) {
            let mut rb = ReplayBuffer::new(cap);
            let total = cap + extra;
            for i in 0..total {
                rb.push(transition(i));
            }
            let kept: Vec<usize> = rb.iter_oldest_first().map(|t| t.state[0] as usize).collect();
            prop_assert_eq!(kept, (extra..total).collect::<Vec<_>>());
        }

        #[test]
        fn argmax_picks_first_maximum(q in proptest::collection::vec(-3i32..3, 1..20)) {
            let qf: Vec<f64> = q.iter().map(|&v| v as f64).collect();
            let i = argmax(&qf);
            let m = *q.iter().max().unwrap();
            prop_assert_eq!(i, q.iter().position(|&v| v == m).unwrap());
        }
    }
}
