//! TOML run configuration. Lengths are given in kilometers and converted to
//! meters on load; every key is optional and overrides the named preset.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::agent::DqnConfig;
use crate::error::{Error, Result};
use crate::neural::Reduction;
use crate::scenario::{RewardParams, ScenarioConfig};
use crate::vector::Vec3;

const KM: f64 = 1e3;

pub const DESK_PRESET: &str = include_str!("../presets/desk.toml");
pub const FULL_PRESET: &str = include_str!("../presets/full.toml");

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Preset {
    #[default]
    Desk,
    Full,
}

impl Preset {
    pub fn base(self) -> RunConfig {
        RunConfig {
            scenario: ScenarioConfig::default(),
            dqn: match self {
                Preset::Desk => DqnConfig::desk(),
                Preset::Full => DqnConfig::full(),
            },
            grid_step: 95e3,
        }
    }
}

/// Resolved configuration in SI units.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub scenario: ScenarioConfig,
    pub dqn: DqnConfig,
    /// Fixed-relay sweep step, meters.
    pub grid_step: f64,
}

impl Default for RunConfig {
    fn default() -> Self {
        Preset::Desk.base()
    }
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct File {
    preset: Option<Preset>,
    scenario: Option<ScenarioSection>,
    kinematics: Option<KinematicsSection>,
    constellation: Option<ConstellationSection>,
    hap: Option<HapSection>,
    radio: Option<RadioSection>,
    reward: Option<RewardSection>,
    baselines: Option<BaselinesSection>,
    dqn: Option<DqnSection>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct ScenarioSection {
    src_km: Option<[f64; 3]>,
    dst_km: Option<[f64; 3]>,
    episode_slots: Option<usize>,
    buffered: Option<bool>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct KinematicsSection {
    dt_s: Option<f64>,
    a_max_mps2: Option<f64>,
    window_km: Option<f64>,
    candidates: Option<usize>,
    accel_levels: Option<usize>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct ConstellationSection {
    count: Option<usize>,
    speed_kmps: Option<f64>,
    altitude_km: Option<f64>,
    orbit_length_km: Option<f64>,
    phase_offset_km: Option<f64>,
    track_offset_km: Option<f64>,
    axis: Option<[f64; 3]>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct HapSection {
    position_km: Option<[f64; 3]>,
    velocity_mps: Option<[f64; 2]>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RadioSection {
    bandwidth_hz: Option<f64>,
    reference_snr: Option<f64>,
    pathloss_exponent: Option<f64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RewardSection {
    mu_bps: Option<f64>,
    sigma_bps: Option<f64>,
    calibration_grid_step_km: Option<f64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct BaselinesSection {
    grid_step_km: Option<f64>,
    area_origin_km: Option<[f64; 2]>,
    area_extent_km: Option<[f64; 2]>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct DqnSection {
    hidden: Option<Vec<usize>>,
    gamma: Option<f64>,
    batch_size: Option<usize>,
    target_sync_period: Option<u64>,
    iterations: Option<u64>,
    epsilon_start: Option<f64>,
    epsilon_end: Option<f64>,
    epsilon_decay_fraction: Option<f64>,
    replay_capacity: Option<usize>,
    steps_per_update: Option<u64>,
    learning_rate: Option<f64>,
    reduction: Option<Reduction>,
    grad_clip: Option<f64>,
}

fn km3(v: [f64; 3]) -> Vec3 {
    Vec3::new(v[0] * KM, v[1] * KM, v[2] * KM)
}

fn set<T>(slot: &mut T, v: Option<T>) {
    if let Some(v) = v {
        *slot = v;
    }
}

impl RunConfig {
    pub fn from_toml_str(text: &str) -> std::result::Result<Self, String> {
        let file: File = toml::from_str(text).map_err(|e| e.message().to_string())?;
        let mut rc = file.preset.unwrap_or_default().base();
        let sc = &mut rc.scenario;

        if let Some(s) = file.scenario {
            set(&mut sc.src, s.src_km.map(km3));
            set(&mut sc.dst, s.dst_km.map(km3));
            set(&mut sc.episode_slots, s.episode_slots);
            set(&mut sc.buffered, s.buffered);
        }
        if let Some(k) = file.kinematics {
            set(&mut sc.kinematics.dt, k.dt_s);
            set(&mut sc.kinematics.a_max, k.a_max_mps2);
            set(
                &mut sc.kinematics.window_length,
                k.window_km.map(|v| v * KM),
            );
            set(&mut sc.kinematics.candidate_count, k.candidates);
            set(&mut sc.accel_levels, k.accel_levels);
        }
        if let Some(c) = file.constellation {
            let cs = &mut sc.constellation;
            set(&mut cs.count, c.count);
            set(&mut cs.speed, c.speed_kmps.map(|v| v * KM));
            set(&mut cs.altitude, c.altitude_km.map(|v| v * KM));
            set(&mut cs.orbit_length, c.orbit_length_km.map(|v| v * KM));
            set(&mut cs.phase_offset, c.phase_offset_km.map(|v| v * KM));
            set(&mut cs.track_offset, c.track_offset_km.map(|v| v * KM));
            set(&mut cs.axis, c.axis.map(Vec3::from_array));
        }
        if let Some(h) = file.hap {
            set(&mut sc.hap.position, h.position_km.map(km3));
            set(&mut sc.hap.velocity, h.velocity_mps);
        }
        if let Some(r) = file.radio {
            set(&mut sc.radio.bandwidth, r.bandwidth_hz);
            set(&mut sc.radio.reference_snr, r.reference_snr);
            set(&mut sc.radio.pathloss_exponent, r.pathloss_exponent);
        }
        if let Some(r) = file.reward {
            match (r.mu_bps, r.sigma_bps) {
                (Some(mu), Some(sigma)) => sc.reward = Some(RewardParams { mu, sigma }),
                (None, None) => {}
                _ => return Err("[reward] needs both mu_bps and sigma_bps, or neither".into()),
            }
            set(
                &mut sc.reward_grid_step,
                r.calibration_grid_step_km.map(|v| v * KM),
            );
        }
        if let Some(b) = file.baselines {
            set(&mut rc.grid_step, b.grid_step_km.map(|v| v * KM));
            set(
                &mut sc.relay_area.origin,
                b.area_origin_km.map(|v| [v[0] * KM, v[1] * KM]),
            );
            set(
                &mut sc.relay_area.extent,
                b.area_extent_km.map(|v| [v[0] * KM, v[1] * KM]),
            );
        }
        if let Some(d) = file.dqn {
            let q = &mut rc.dqn;
            set(&mut q.hidden, d.hidden);
            set(&mut q.gamma, d.gamma);
            set(&mut q.batch_size, d.batch_size);
            set(&mut q.target_sync_period, d.target_sync_period);
            set(&mut q.total_iterations, d.iterations);
            set(&mut q.epsilon.start, d.epsilon_start);
            set(&mut q.epsilon.end, d.epsilon_end);
            set(&mut q.epsilon.decay_fraction, d.epsilon_decay_fraction);
            set(&mut q.replay_capacity, d.replay_capacity);
            set(&mut q.steps_per_update, d.steps_per_update);
            set(&mut q.adam.lr, d.learning_rate);
            set(&mut q.reduction, d.reduction);
            if d.grad_clip.is_some() {
                q.grad_clip = d.grad_clip;
            }
        }
        Ok(rc)
    }

    pub fn validate(&self) -> Result<()> {
        self.scenario.validate()?;
        self.dqn.validate()?;
        if !(self.grid_step.is_finite() && self.grid_step > 0.0) {
            return Err(Error::config(
                "baselines.grid_step_km",
                "must be finite and > 0",
            ));
        }
        Ok(())
    }

    /// Reads, parses and validates a configuration file.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let rc = Self::from_toml_str(&text).map_err(|message| Error::Parse {
            path: path.to_path_buf(),
            message,
        })?;
        rc.validate()?;
        Ok(rc)
    }
}
