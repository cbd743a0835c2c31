use serde::{Deserialize, Serialize};

use crate::channel::RadioParams;
use crate::error::{Error, Result};
use crate::kinematics::{ConstellationSpec, HapState, KinematicsConfig, SatelliteConstellation};
use crate::vector::Vec3;

/// Sigmoid reward centering (`mu`) and scale (`sigma`), both in bps.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RewardParams {
    pub mu: f64,
    pub sigma: f64,
}

/// Horizontal rectangle searched by the fixed-relay baselines.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RelayArea {
    /// Corner with the smallest x and y, meters.
    pub origin: [f64; 2],
    /// Side lengths along x and y, meters.
    pub extent: [f64; 2],
}

/// Everything that defines one episode of the relay problem. All lengths in
/// meters, times in seconds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioConfig {
    pub src: Vec3,
    pub dst: Vec3,
    pub radio: RadioParams,
    pub kinematics: KinematicsConfig,
    pub constellation: ConstellationSpec,
    /// HAP state at the start of every episode.
    pub hap: HapState,
    pub episode_slots: usize,
    /// Acceleration levels per axis.
    pub accel_levels: usize,
    /// `None` until calibrated against the fixed-HAP baseline.
    pub reward: Option<RewardParams>,
    /// Grid step used when calibrating the reward.
    pub reward_grid_step: f64,
    pub relay_area: RelayArea,
    /// Enables relay buffers (information causality) instead of bufferless DF.
    pub buffered: bool,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        Self {
            src: Vec3::ZERO,
            dst: Vec3::new(4000e3, 0.0, 0.0),
            radio: RadioParams {
                bandwidth: 1e9,
                reference_snr: 1e9,
                pathloss_exponent: 2.0,
            },
            kinematics: KinematicsConfig {
                dt: 10.0,
                a_max: 5.0,
                window_length: 4000e3,
                candidate_count: 2,
            },
            constellation: ConstellationSpec {
                count: 22,
                speed: 7.8e3,
                altitude: 550e3,
                orbit_length: 40_030e3,
                phase_offset: 0.0,
                track_offset: 1000e3,
                axis: Vec3::new(0.0, 1.0, 0.0),
            },
            hap: HapState {
                position: Vec3::new(2000e3, 0.0, 50e3),
                velocity: [0.0, 0.0],
            },
            episode_slots: 513,
            accel_levels: 5,
            reward: None,
            reward_grid_step: 95e3,
            relay_area: RelayArea {
                origin: [0.0, -2000e3],
                extent: [4000e3, 4000e3],
            },
            buffered: false,
        }
    }
}

impl ScenarioConfig {
    pub fn validate(&self) -> Result<()> {
        if !self.src.is_finite() {
            return Err(Error::config("src", "must be finite"));
        }
        if !self.dst.is_finite() {
            return Err(Error::config("dst", "must be finite"));
        }
        if self.src == self.dst {
            return Err(Error::config("dst", "must differ from src"));
        }
        self.radio.validate()?;
        let constellation = SatelliteConstellation::new(&self.constellation)?;
        self.kinematics.validate(&constellation)?;
        if !(self.hap.position.is_finite()
            && self.hap.velocity.iter().all(|v| v.is_finite())
            && self.hap.position.z > 0.0)
        {
            return Err(Error::config(
                "hap",
                "position/velocity must be finite, altitude > 0",
            ));
        }
        if self.episode_slots == 0 {
            return Err(Error::config("episode_slots", "must be > 0"));
        }
        if self.accel_levels < 2 {
            return Err(Error::config("accel_levels", "must be >= 2"));
        }
        if let Some(r) = self.reward {
            if !(r.sigma.is_finite() && r.sigma > 0.0) {
                return Err(Error::config("reward.sigma", "must be finite and > 0"));
            }
            if !r.mu.is_finite() {
                return Err(Error::config("reward.mu", "must be finite"));
            }
        }
        if !(self.reward_grid_step.is_finite() && self.reward_grid_step > 0.0) {
            return Err(Error::config("reward_grid_step", "must be finite and > 0"));
        }
        let a = self.relay_area;
        if !(a.origin.iter().chain(&a.extent).all(|v| v.is_finite())
            && a.extent.iter().all(|e| *e >= 0.0))
        {
            return Err(Error::config(
                "relay_area",
                "must be finite with extent >= 0",
            ));
        }
        Ok(())
    }

    /// Length of the observation vector: three coordinates per candidate,
    /// HAP position, three distances and four rates.
    pub fn observation_dim(&self) -> usize {
        3 * self.kinematics.candidate_count + 10
    }

    pub fn action_count(&self) -> usize {
        self.kinematics.candidate_count * self.accel_levels * self.accel_levels
    }
}
