//! Discrete-time motion of the satellite constellation and the HAP.
//!
//! Satellites share one orbital plane, flattened onto a straight track:
//! `position = track + axis * along`, where `along` is the along-orbit
//! coordinate kept in `[0, orbit_length)`. The HAP moves in the horizontal
//! plane at fixed altitude under a constant-acceleration-per-slot model.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::vector::Vec3;

/// Reduces `y` into `[0, period)`.
pub fn wrap(y: f64, period: f64) -> f64 {
    let r = y.rem_euclid(period);
    // rem_euclid can round up to `period` for tiny negative inputs.
    if r >= period {
        0.0
    } else {
        r
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KinematicsConfig {
    /// Slot duration in seconds.
    pub dt: f64,
    /// Maximum HAP acceleration norm in m/s².
    pub a_max: f64,
    /// Length of the coordinate-space window along the orbit, in meters.
    pub window_length: f64,
    /// Number of satellites exposed to the association decision.
    pub candidate_count: usize,
}

impl KinematicsConfig {
    pub fn validate(&self, constellation: &SatelliteConstellation) -> Result<()> {
        if !(self.dt.is_finite() && self.dt > 0.0) {
            return Err(Error::config("dt", "must be finite and > 0"));
        }
        if !(self.a_max.is_finite() && self.a_max > 0.0) {
            return Err(Error::config("a_max", "must be finite and > 0"));
        }
        if !(self.window_length > 0.0 && self.window_length <= constellation.orbit_length()) {
            return Err(Error::config(
                "window_length",
                "must satisfy 0 < window_length <= orbit_length",
            ));
        }
        if self.candidate_count == 0 || self.candidate_count > constellation.count() {
            return Err(Error::config(
                "candidate_count",
                format!("must be in 1..={}", constellation.count()),
            ));
        }
        Ok(())
    }
}

/// Parameters for a uniformly phased single-plane constellation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConstellationSpec {
    pub count: usize,
    /// Orbital speed in m/s.
    pub speed: f64,
    /// Altitude in meters.
    pub altitude: f64,
    /// Orbit circumference in meters.
    pub orbit_length: f64,
    /// Along-orbit coordinate of satellite 0 at reset, in meters.
    pub phase_offset: f64,
    /// Horizontal offset of the ground track from the origin, perpendicular
    /// to the direction of motion, in meters.
    pub track_offset: f64,
    /// Horizontal unit vector giving the direction of motion.
    pub axis: Vec3,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SatelliteConstellation {
    along: Vec<f64>,
    track: Vec3,
    axis: Vec3,
    speed: f64,
    orbit_length: f64,
    altitude: f64,
}

/// One satellite exposed to the association decision.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Candidate {
    /// Global satellite index in `0..count`.
    pub index: usize,
    /// Position with the along-orbit coordinate reduced modulo the window.
    pub wrapped: Vec3,
    /// Actual position.
    pub position: Vec3,
}

impl SatelliteConstellation {
    pub fn new(spec: &ConstellationSpec) -> Result<Self> {
        if spec.count == 0 {
            return Err(Error::config("constellation.count", "must be >= 1"));
        }
        if !(spec.speed.is_finite() && spec.speed > 0.0) {
            return Err(Error::config(
                "constellation.speed",
                "must be finite and > 0",
            ));
        }
        if !(spec.orbit_length.is_finite() && spec.orbit_length > 0.0) {
            return Err(Error::config(
                "constellation.orbit_length",
                "must be finite and > 0",
            ));
        }
        if !(spec.altitude.is_finite() && spec.altitude > 0.0) {
            return Err(Error::config(
                "constellation.altitude",
                "must be finite and > 0",
            ));
        }
        if !spec.phase_offset.is_finite() || !spec.track_offset.is_finite() {
            return Err(Error::NonFinite("constellation offsets"));
        }
        let axis = spec.axis;
        let n = axis.norm();
        if !(n.is_finite() && n > 0.0) || axis.z != 0.0 {
            return Err(Error::config(
                "constellation.axis",
                "must be a nonzero horizontal vector",
            ));
        }
        let axis = axis * (1.0 / n);
        // Horizontal unit vector perpendicular to the direction of motion.
        let across = Vec3::new(axis.y, -axis.x, 0.0);
        let track = across * spec.track_offset + Vec3::new(0.0, 0.0, spec.altitude);
        let spacing = spec.orbit_length / spec.count as f64;
        let along = (0..spec.count)
            .map(|i| wrap(spec.phase_offset + spacing * i as f64, spec.orbit_length))
            .collect();
        Ok(Self {
            along,
            track,
            axis,
            speed: spec.speed,
            orbit_length: spec.orbit_length,
            altitude: spec.altitude,
        })
    }

    pub fn count(&self) -> usize {
        self.along.len()
    }

    pub fn orbit_length(&self) -> f64 {
        self.orbit_length
    }

    pub fn orbit_speed(&self) -> f64 {
        self.speed
    }

    pub fn altitude(&self) -> f64 {
        self.altitude
    }

    pub fn orbit_axis(&self) -> Vec3 {
        self.axis
    }

    /// Along-orbit coordinates, each in `[0, orbit_length)`.
    pub fn along_orbit(&self) -> &[f64] {
        &self.along
    }

    pub fn position(&self, i: usize) -> Vec3 {
        self.track + self.axis * self.along[i]
    }

    pub fn positions(&self) -> Vec<Vec3> {
        (0..self.count()).map(|i| self.position(i)).collect()
    }

    /// Advances every satellite by `speed * dt` along the orbit.
    pub fn propagate(&self, dt: f64) -> Self {
        let step = self.speed * dt;
        let mut next = self.clone();
        for a in &mut next.along {
            *a = wrap(*a + step, self.orbit_length);
        }
        next
    }

    /// The `candidate_count` satellites closest to `src` going forward along
    /// the orbit, ordered by their windowed coordinate (ties by index).
    pub fn window_candidates(&self, cfg: &KinematicsConfig, src: Vec3) -> Vec<Candidate> {
        let src_along = wrap(src.dot(self.axis), self.orbit_length);
        let mut order: Vec<usize> = (0..self.count()).collect();
        let ahead = |i: usize| wrap(self.along[i] - src_along, self.orbit_length);
        order.sort_by(|&a, &b| ahead(a).total_cmp(&ahead(b)).then(a.cmp(&b)));
        order.truncate(cfg.candidate_count.min(self.count()));

        let mut out: Vec<Candidate> = order
            .into_iter()
            .map(|index| {
                let w = wrap(self.along[index], cfg.window_length);
                Candidate {
                    index,
                    wrapped: self.track + self.axis * w,
                    position: self.position(index),
                }
            })
            .collect();
        let key = |c: &Candidate| c.wrapped.dot(self.axis);
        out.sort_by(|a, b| key(a).total_cmp(&key(b)).then(a.index.cmp(&b.index)));
        out
    }
}

/// Pure-function form of [`SatelliteConstellation::propagate`].
pub fn propagate_constellation(c: &SatelliteConstellation, dt: f64) -> SatelliteConstellation {
    c.propagate(dt)
}

/// Pure-function form of [`SatelliteConstellation::window_candidates`].
pub fn window_candidates(
    c: &SatelliteConstellation,
    cfg: &KinematicsConfig,
    src: Vec3,
) -> Vec<Candidate> {
    c.window_candidates(cfg, src)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HapState {
    /// Position in meters; `z` is the fixed flight altitude.
    pub position: Vec3,
    /// Horizontal velocity in m/s.
    pub velocity: [f64; 2],
}

impl HapState {
    pub fn altitude(&self) -> f64 {
        self.position.z
    }
}

/// Scales `a` back onto the disk of radius `a_max` if it lies outside.
pub fn project_acceleration(a: [f64; 2], a_max: f64) -> [f64; 2] {
    let n = a[0].hypot(a[1]);
    if n <= a_max {
        a
    } else {
        let s = a_max / n;
        [a[0] * s, a[1] * s]
    }
}

/// One slot of the HAP state-space model. `a` must already satisfy the
/// acceleration bound (see [`project_acceleration`]).
pub fn step_hap(h: &HapState, a: [f64; 2], cfg: &KinematicsConfig) -> Result<HapState> {
    if !(a[0].is_finite() && a[1].is_finite()) {
        return Err(Error::NonFinite("HAP acceleration"));
    }
    if !(h.position.is_finite() && h.velocity[0].is_finite() && h.velocity[1].is_finite()) {
        return Err(Error::NonFinite("HAP state"));
    }
    let dt = cfg.dt;
    let [vx, vy] = h.velocity;
    let position = Vec3::new(
        h.position.x + vx * dt + 0.5 * a[0] * dt * dt,
        h.position.y + vy * dt + 0.5 * a[1] * dt * dt,
        h.position.z,
    );
    Ok(HapState {
        position,
        velocity: [vx + a[0] * dt, vy + a[1] * dt],
    })
}
