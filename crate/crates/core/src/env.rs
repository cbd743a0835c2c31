//! The relay-control MDP.
//!
//! Each slot the agent picks one of the windowed satellite candidates and a
//! HAP acceleration from a uniform per-axis grid. The world then advances one
//! slot and the delivered end-to-end rate is mapped through a sigmoid
//! centered on the fixed-HAP baseline.

use serde::{Deserialize, Serialize};

use crate::baselines;
use crate::channel::{buffered_hop_rates, link_capacity, link_distance, BufferState, LinkRates};
use crate::error::{Error, Result};
use crate::kinematics::{
    project_acceleration, step_hap, Candidate, HapState, SatelliteConstellation,
};
use crate::scenario::{RewardParams, ScenarioConfig};
use crate::trace::SlotRecord;
use crate::vector::Vec3;

/// Largest |g| fed to the sigmoid; beyond this `f64` rounds the reward to
/// exactly 0 or 1.
const REWARD_LOGIT_LIMIT: f64 = 36.0;

/// `1 / (1 + exp(-(rate - mu) / sigma))`, saturating at |g| = 36.
pub fn reward(rate: f64, mu: f64, sigma: f64) -> f64 {
    let g = ((rate - mu) / sigma).clamp(-REWARD_LOGIT_LIMIT, REWARD_LOGIT_LIMIT);
    if g >= 0.0 {
        1.0 / (1.0 + (-g).exp())
    } else {
        let e = g.exp();
        e / (1.0 + e)
    }
}

pub(crate) fn mean(values: &[f64]) -> f64 {
    values.iter().sum::<f64>() / values.len() as f64
}

/// Reward centering from a baseline rate trace: `mu` is its mean and `sigma`
/// its largest deviation from `mu`, falling back to `mu` for a flat trace.
pub fn reward_params_from_trace(trace: &[f64]) -> Result<RewardParams> {
    if trace.is_empty() {
        return Err(Error::config("reward", "baseline trace is empty"));
    }
    let mu = mean(trace);
    let mut sigma = trace.iter().map(|r| (r - mu).abs()).fold(0.0, f64::max);
    if sigma == 0.0 {
        sigma = mu;
    }
    if !(sigma.is_finite() && sigma > 0.0) {
        return Err(Error::config(
            "reward.sigma",
            "baseline trace is identically zero",
        ));
    }
    Ok(RewardParams { mu, sigma })
}

/// Calibrates the reward against the best fixed HAP relay.
pub fn calibrate_reward(cfg: &ScenarioConfig) -> Result<RewardParams> {
    let best = baselines::fixed_relay_sweep(cfg, cfg.reward_grid_step, cfg.hap.position.z)?;
    reward_params_from_trace(&best.rates())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ActionSpec {
    pub candidates: usize,
    pub levels: usize,
    pub a_max: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DecodedAction {
    /// Position in the candidate list, `0..candidates`.
    pub sat_choice: usize,
    /// Grid cell (x level, y level).
    pub cell: (usize, usize),
    /// Applied acceleration after projection onto the feasible disk.
    pub accel: [f64; 2],
}

impl ActionSpec {
    pub fn new(candidates: usize, levels: usize, a_max: f64) -> Self {
        Self {
            candidates,
            levels,
            a_max,
        }
    }

    pub fn from_config(cfg: &ScenarioConfig) -> Self {
        Self::new(
            cfg.kinematics.candidate_count,
            cfg.accel_levels,
            cfg.kinematics.a_max,
        )
    }

    pub fn count(&self) -> usize {
        self.candidates * self.levels * self.levels
    }

    fn level(&self, k: usize) -> f64 {
        let a = self.a_max;
        -a + 2.0 * a * k as f64 / (self.levels - 1) as f64
    }

    pub fn decode(&self, index: usize) -> Result<DecodedAction> {
        if index >= self.count() {
            return Err(Error::ActionOutOfRange {
                index,
                count: self.count(),
            });
        }
        let per_sat = self.levels * self.levels;
        let sat_choice = index / per_sat;
        let rem = index % per_sat;
        let cell = (rem / self.levels, rem % self.levels);
        let accel = project_acceleration([self.level(cell.0), self.level(cell.1)], self.a_max);
        Ok(DecodedAction {
            sat_choice,
            cell,
            accel,
        })
    }

    pub fn encode(&self, sat_choice: usize, cell: (usize, usize)) -> usize {
        sat_choice * self.levels * self.levels + cell.0 * self.levels + cell.1
    }
}

pub fn decode_action(index: usize, spec: &ActionSpec) -> Result<DecodedAction> {
    spec.decode(index)
}

/// Flat observation vector, see [`ScenarioConfig::observation_dim`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Observation(pub Vec<f64>);

impl Observation {
    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

/// Distances and rates of the most recently realized chain.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChainSnapshot {
    pub distances: [f64; 3],
    /// Src–SAT, SAT–HAP, HAP–Dst hop rates, then the delivered rate.
    pub rates: [f64; 4],
}

#[derive(Debug, Clone, PartialEq)]
pub struct EnvState {
    pub constellation: SatelliteConstellation,
    pub hap: HapState,
    pub slot: usize,
    pub buffers: BufferState,
    pub last: ChainSnapshot,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepInfo {
    pub slot: usize,
    pub sat_index: usize,
    pub action: DecodedAction,
    pub rates: LinkRates,
    pub hap: HapState,
    pub record: SlotRecord,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepOutcome {
    pub observation: Observation,
    pub reward: f64,
    pub done: bool,
    pub info: StepInfo,
}

fn chain(cfg: &ScenarioConfig, sat: Vec3, hap: Vec3) -> Result<([f64; 3], LinkRates)> {
    let d = [
        link_distance(sat, cfg.src),
        link_distance(hap, sat),
        link_distance(cfg.dst, hap),
    ];
    let rp = &cfg.radio;
    let rates = LinkRates::from_capacities(
        link_capacity(d[0], rp)?,
        link_capacity(d[1], rp)?,
        link_capacity(d[2], rp)?,
    );
    Ok((d, rates))
}

fn observe(cfg: &ScenarioConfig, candidates: &[Candidate], state: &EnvState) -> Observation {
    let scale = 1.0 / cfg.kinematics.window_length;
    let inv_b = 1.0 / cfg.radio.bandwidth;
    let mut v = Vec::with_capacity(cfg.observation_dim());
    for c in candidates {
        v.extend(c.wrapped.to_array().iter().map(|x| x * scale));
    }
    v.extend(state.hap.position.to_array().iter().map(|x| x * scale));
    v.extend(state.last.distances.iter().map(|d| d * scale));
    v.extend(state.last.rates.iter().map(|r| r * inv_b));
    Observation(v)
}

impl EnvState {
    /// Start-of-episode state. Before any slot is served the observed chain
    /// is the one through the first candidate.
    pub fn initial(cfg: &ScenarioConfig) -> Result<Self> {
        let constellation = SatelliteConstellation::new(&cfg.constellation)?;
        let hap = cfg.hap;
        let cands = constellation.window_candidates(&cfg.kinematics, cfg.src);
        let (distances, rates) = chain(cfg, cands[0].position, hap.position)?;
        Ok(Self {
            constellation,
            hap,
            slot: 0,
            buffers: BufferState::default(),
            last: ChainSnapshot {
                distances,
                rates: [rates.c_src_sat, rates.c_sat_hap, rates.c_hap_dst, rates.e2e],
            },
        })
    }

    pub fn observation(&self, cfg: &ScenarioConfig) -> Observation {
        let cands = self
            .constellation
            .window_candidates(&cfg.kinematics, cfg.src);
        observe(cfg, &cands, self)
    }
}

/// Advances `state` by one slot under `action`. Pure: the result depends
/// only on the arguments.
pub fn transition(
    cfg: &ScenarioConfig,
    reward_params: &RewardParams,
    state: &EnvState,
    action: usize,
) -> Result<(EnvState, StepOutcome)> {
    if state.slot >= cfg.episode_slots {
        return Err(Error::EpisodeFinished {
            slots: cfg.episode_slots,
        });
    }
    let decoded = ActionSpec::from_config(cfg).decode(action)?;
    let hap = step_hap(&state.hap, decoded.accel, &cfg.kinematics)?;
    let constellation = state.constellation.propagate(cfg.kinematics.dt);
    let cands = constellation.window_candidates(&cfg.kinematics, cfg.src);
    let sat = cands[decoded.sat_choice];

    let (distances, caps) = chain(cfg, sat.position, hap.position)?;
    let (hops, buffers) = if cfg.buffered {
        let hops = buffered_hop_rates(&caps, &state.buffers, cfg.kinematics.dt);
        (hops, state.buffers.advance(hops, cfg.kinematics.dt))
    } else {
        (
            [caps.c_src_sat, caps.c_sat_hap, caps.c_hap_dst],
            state.buffers,
        )
    };
    let delivered = if cfg.buffered { hops[2] } else { caps.e2e };
    let r = reward(delivered, reward_params.mu, reward_params.sigma);

    let next = EnvState {
        constellation,
        hap,
        slot: state.slot + 1,
        buffers,
        last: ChainSnapshot {
            distances,
            rates: [hops[0], hops[1], hops[2], delivered],
        },
    };
    let record = SlotRecord {
        slot: next.slot,
        sat_index: Some(sat.index),
        relay_xy: [hap.position.x, hap.position.y],
        velocity: hap.velocity,
        accel: decoded.accel,
        distances,
        rates: caps,
        e2e: delivered,
        reward: Some(r),
    };
    let outcome = StepOutcome {
        observation: observe(cfg, &cands, &next),
        reward: r,
        done: next.slot == cfg.episode_slots,
        info: StepInfo {
            slot: next.slot,
            sat_index: sat.index,
            action: decoded,
            rates: caps,
            hap,
            record,
        },
    };
    Ok((next, outcome))
}

/// An episode runner owning its configuration and current state.
#[derive(Debug, Clone)]
pub struct Env {
    cfg: ScenarioConfig,
    reward: RewardParams,
    initial: EnvState,
    state: EnvState,
}

impl Env {
    /// Validates `cfg`, calibrating the reward first if it is unset.
    pub fn new(mut cfg: ScenarioConfig) -> Result<Self> {
        cfg.validate()?;
        let reward = match cfg.reward {
            Some(r) => r,
            None => calibrate_reward(&cfg)?,
        };
        cfg.reward = Some(reward);
        let initial = EnvState::initial(&cfg)?;
        Ok(Self {
            cfg,
            reward,
            state: initial.clone(),
            initial,
        })
    }

    pub fn config(&self) -> &ScenarioConfig {
        &self.cfg
    }

    pub fn reward_params(&self) -> RewardParams {
        self.reward
    }

    pub fn state(&self) -> &EnvState {
        &self.state
    }

    pub fn action_spec(&self) -> ActionSpec {
        ActionSpec::from_config(&self.cfg)
    }

    pub fn observation_dim(&self) -> usize {
        self.cfg.observation_dim()
    }

    pub fn action_count(&self) -> usize {
        self.cfg.action_count()
    }

    pub fn reset(&mut self) -> Observation {
        self.state = self.initial.clone();
        self.observation()
    }

    pub fn observation(&self) -> Observation {
        self.state.observation(&self.cfg)
    }

    pub fn is_done(&self) -> bool {
        self.state.slot >= self.cfg.episode_slots
    }

    pub fn step(&mut self, action: usize) -> Result<StepOutcome> {
        let (next, outcome) = transition(&self.cfg, &self.reward, &self.state, action)?;
        self.state = next;
        Ok(outcome)
    }
}
