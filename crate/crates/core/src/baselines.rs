//! Comparison schemes: direct transmission, SAT-only relaying, and static
//! ground/HAP relays placed by exhaustive grid search.
//!
//! Every scheme replays the same constellation trajectory as the
//! environment, so per-slot differences come only from the relay strategy.

use std::fmt::Write as _;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::agent;
use crate::channel::{link_capacity, link_distance, LinkRates};
use crate::env::mean;
use crate::error::{Error, Result};
use crate::kinematics::{Candidate, SatelliteConstellation};
use crate::neural::MlpParams;
use crate::scenario::ScenarioConfig;
use crate::trace::SlotRecord;
use crate::vector::Vec3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Scheme {
    Direct,
    SatOnly,
    FixedGround,
    FixedHap,
    MobileHap,
}

impl Scheme {
    pub const BASELINES: [Scheme; 4] = [
        Scheme::Direct,
        Scheme::SatOnly,
        Scheme::FixedGround,
        Scheme::FixedHap,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Scheme::Direct => "direct",
            Scheme::SatOnly => "sat-only",
            Scheme::FixedGround => "fixed-ground",
            Scheme::FixedHap => "fixed-hap",
            Scheme::MobileHap => "mobile-hap",
        }
    }
}

impl FromStr for Scheme {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "direct" => Scheme::Direct,
            "sat-only" => Scheme::SatOnly,
            "fixed-ground" => Scheme::FixedGround,
            "fixed-hap" => Scheme::FixedHap,
            _ => return Err(Error::UnknownScheme(s.to_string())),
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SchemeResult {
    pub scheme: Scheme,
    pub records: Vec<SlotRecord>,
    /// Mean per-slot end-to-end rate, bps.
    pub mean_rate: f64,
    /// `mean_rate / bandwidth`, bit/s/Hz.
    pub spectral_efficiency: f64,
    pub relay_position: Option<Vec3>,
}

impl SchemeResult {
    pub fn new(
        scheme: Scheme,
        records: Vec<SlotRecord>,
        relay_position: Option<Vec3>,
        bandwidth: f64,
    ) -> Self {
        let rates: Vec<f64> = records.iter().map(|r| r.e2e).collect();
        let mean_rate = mean(&rates);
        Self {
            scheme,
            records,
            mean_rate,
            spectral_efficiency: mean_rate / bandwidth,
            relay_position,
        }
    }

    pub fn rates(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.e2e).collect()
    }
}

/// Windowed satellite candidates for slots `1..=N`, with their Src-hop
/// distances and capacities precomputed.
#[derive(Debug, Clone)]
pub struct SlotGeometry {
    pub candidates: Vec<Candidate>,
    pub src_distance: Vec<f64>,
    pub src_capacity: Vec<f64>,
}

pub fn slot_geometry(cfg: &ScenarioConfig) -> Result<Vec<SlotGeometry>> {
    let mut constellation = SatelliteConstellation::new(&cfg.constellation)?;
    let mut out = Vec::with_capacity(cfg.episode_slots);
    for _ in 0..cfg.episode_slots {
        constellation = constellation.propagate(cfg.kinematics.dt);
        let candidates = constellation.window_candidates(&cfg.kinematics, cfg.src);
        let src_distance: Vec<f64> = candidates
            .iter()
            .map(|c| link_distance(c.position, cfg.src))
            .collect();
        let src_capacity = src_distance
            .iter()
            .map(|d| link_capacity(*d, &cfg.radio))
            .collect::<Result<_>>()?;
        out.push(SlotGeometry {
            candidates,
            src_distance,
            src_capacity,
        });
    }
    Ok(out)
}

/// Direct Src → Dst link, constant over the episode.
pub fn direct_rate(cfg: &ScenarioConfig) -> Result<SchemeResult> {
    let d = link_distance(cfg.src, cfg.dst);
    let c = link_capacity(d, &cfg.radio)?;
    let rates = LinkRates::from_capacities(c, f64::INFINITY, f64::INFINITY);
    let records = (1..=cfg.episode_slots)
        .map(|slot| SlotRecord {
            slot,
            sat_index: None,
            relay_xy: [cfg.src.x, cfg.src.y],
            velocity: [0.0; 2],
            accel: [0.0; 2],
            distances: [d, 0.0, 0.0],
            rates,
            e2e: c,
            reward: None,
        })
        .collect();
    Ok(SchemeResult::new(
        Scheme::Direct,
        records,
        None,
        cfg.radio.bandwidth,
    ))
}

/// Two-hop Src → SAT → Dst, picking the candidate with the best bottleneck
/// each slot.
pub fn sat_only(cfg: &ScenarioConfig) -> Result<SchemeResult> {
    sat_only_with(cfg, &slot_geometry(cfg)?)
}

fn sat_only_with(cfg: &ScenarioConfig, geo: &[SlotGeometry]) -> Result<SchemeResult> {
    let mut records = Vec::with_capacity(geo.len());
    for (n, g) in geo.iter().enumerate() {
        let mut best: Option<SlotRecord> = None;
        for (k, cand) in g.candidates.iter().enumerate() {
            let d2 = link_distance(cfg.dst, cand.position);
            let rates = LinkRates::from_capacities(
                g.src_capacity[k],
                link_capacity(d2, &cfg.radio)?,
                f64::INFINITY,
            );
            if best.map_or(true, |b| rates.e2e > b.e2e) {
                best = Some(SlotRecord {
                    slot: n + 1,
                    sat_index: Some(cand.index),
                    relay_xy: [cfg.dst.x, cfg.dst.y],
                    velocity: [0.0; 2],
                    accel: [0.0; 2],
                    distances: [g.src_distance[k], d2, 0.0],
                    rates,
                    e2e: rates.e2e,
                    reward: None,
                });
            }
        }
        records.push(best.expect("at least one candidate per slot"));
    }
    Ok(SchemeResult::new(
        Scheme::SatOnly,
        records,
        None,
        cfg.radio.bandwidth,
    ))
}

/// Best three-hop chain through a static relay at `pos` for one slot.
fn relay_slot(
    cfg: &ScenarioConfig,
    g: &SlotGeometry,
    pos: Vec3,
    c3: f64,
) -> Result<(usize, f64, LinkRates)> {
    let mut best: Option<(usize, f64, LinkRates)> = None;
    for (k, cand) in g.candidates.iter().enumerate() {
        let d2 = link_distance(pos, cand.position);
        let rates =
            LinkRates::from_capacities(g.src_capacity[k], link_capacity(d2, &cfg.radio)?, c3);
        if best.map_or(true, |b| rates.e2e > b.2.e2e) {
            best = Some((k, d2, rates));
        }
    }
    Ok(best.expect("at least one candidate per slot"))
}

fn relay_mean(cfg: &ScenarioConfig, geo: &[SlotGeometry], pos: Vec3) -> Result<f64> {
    let c3 = link_capacity(link_distance(cfg.dst, pos), &cfg.radio)?;
    let rates = geo
        .iter()
        .map(|g| relay_slot(cfg, g, pos, c3).map(|(_, _, r)| r.e2e))
        .collect::<Result<Vec<f64>>>()?;
    Ok(mean(&rates))
}

/// Three-hop chain through a static relay at `position`, with the best
/// candidate association per slot.
pub fn fixed_relay_eval(position: Vec3, cfg: &ScenarioConfig) -> Result<SchemeResult> {
    fixed_relay_eval_with(position, cfg, &slot_geometry(cfg)?)
}

fn fixed_relay_eval_with(
    position: Vec3,
    cfg: &ScenarioConfig,
    geo: &[SlotGeometry],
) -> Result<SchemeResult> {
    if !position.is_finite() {
        return Err(Error::NonFinite("relay position"));
    }
    let d3 = link_distance(cfg.dst, position);
    let c3 = link_capacity(d3, &cfg.radio)?;
    let records = geo
        .iter()
        .enumerate()
        .map(|(n, g)| {
            let (k, d2, rates) = relay_slot(cfg, g, position, c3)?;
            Ok(SlotRecord {
                slot: n + 1,
                sat_index: Some(g.candidates[k].index),
                relay_xy: [position.x, position.y],
                velocity: [0.0; 2],
                accel: [0.0; 2],
                distances: [g.src_distance[k], d2, d3],
                rates,
                e2e: rates.e2e,
                reward: None,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let scheme = if position.z > 0.0 {
        Scheme::FixedHap
    } else {
        Scheme::FixedGround
    };
    Ok(SchemeResult::new(
        scheme,
        records,
        Some(position),
        cfg.radio.bandwidth,
    ))
}

/// Grid points covering the relay area at `altitude`, x-major then y, with
/// points coincident with Src or Dst removed.
pub fn grid_points(cfg: &ScenarioConfig, grid_step: f64, altitude: f64) -> Result<Vec<Vec3>> {
    if !(grid_step.is_finite() && grid_step > 0.0) {
        return Err(Error::config("grid_step", "must be finite and > 0"));
    }
    let area = cfg.relay_area;
    let count = |extent: f64| (extent / grid_step + 1e-9).floor() as usize + 1;
    let (nx, ny) = (count(area.extent[0]), count(area.extent[1]));
    let mut points = Vec::with_capacity(nx * ny);
    for i in 0..nx {
        for j in 0..ny {
            let p = Vec3::new(
                area.origin[0] + i as f64 * grid_step,
                area.origin[1] + j as f64 * grid_step,
                altitude,
            );
            if p != cfg.src && p != cfg.dst {
                points.push(p);
            }
        }
    }
    if points.is_empty() {
        return Err(Error::EmptyGrid);
    }
    Ok(points)
}

/// Exhaustive search for the static relay position maximizing the
/// episode-mean end-to-end rate. Ties go to the lexicographically smallest
/// grid coordinate.
pub fn fixed_relay_sweep(
    cfg: &ScenarioConfig,
    grid_step: f64,
    altitude: f64,
) -> Result<SchemeResult> {
    let points = grid_points(cfg, grid_step, altitude)?;
    let geo = slot_geometry(cfg)?;
    let means = points
        .par_iter()
        .map(|p| relay_mean(cfg, &geo, *p))
        .collect::<Result<Vec<f64>>>()?;
    let mut best = 0;
    for (i, m) in means.iter().enumerate() {
        if *m > means[best] {
            best = i;
        }
    }
    fixed_relay_eval_with(points[best], cfg, &geo)
}

/// One row per scheme, in table order.
#[derive(Debug, Clone)]
pub struct Comparison {
    pub rows: Vec<SchemeResult>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ComparisonRow {
    pub scheme: Scheme,
    pub mean_rate_bps: f64,
    pub spectral_efficiency: f64,
    pub relay_position_m: Option<[f64; 3]>,
}

impl Comparison {
    pub fn summary(&self) -> Vec<ComparisonRow> {
        self.rows
            .iter()
            .map(|r| ComparisonRow {
                scheme: r.scheme,
                mean_rate_bps: r.mean_rate,
                spectral_efficiency: r.spectral_efficiency,
                relay_position_m: r.relay_position.map(Vec3::to_array),
            })
            .collect()
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from(
            "scheme,mean_rate_bps,spectral_efficiency,relay_x_m,relay_y_m,relay_z_m\n",
        );
        for r in &self.rows {
            let _ = write!(
                out,
                "{},{},{},",
                r.scheme.name(),
                r.mean_rate,
                r.spectral_efficiency
            );
            match r.relay_position {
                Some(p) => {
                    let _ = writeln!(out, "{},{},{}", p.x, p.y, p.z);
                }
                None => out.push_str(",,\n"),
            }
        }
        out
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&self.summary()).expect("summary serializes")
    }

    pub fn get(&self, scheme: Scheme) -> Option<&SchemeResult> {
        self.rows.iter().find(|r| r.scheme == scheme)
    }
}

pub fn run_scheme(
    cfg: &ScenarioConfig,
    scheme: Scheme,
    grid_step: f64,
    policy: Option<&MlpParams>,
) -> Result<SchemeResult> {
    match scheme {
        Scheme::Direct => direct_rate(cfg),
        Scheme::SatOnly => sat_only(cfg),
        Scheme::FixedGround => fixed_relay_sweep(cfg, grid_step, 0.0),
        Scheme::FixedHap => fixed_relay_sweep(cfg, grid_step, cfg.hap.position.z),
        Scheme::MobileHap => {
            let policy = policy.ok_or_else(|| {
                Error::config("checkpoint", "mobile-hap needs trained parameters")
            })?;
            let eval = agent::evaluate(policy, cfg, 1)?;
            Ok(SchemeResult::new(
                Scheme::MobileHap,
                eval.trace,
                None,
                cfg.radio.bandwidth,
            ))
        }
    }
}

/// Runs `schemes`, plus the trained mobile-HAP policy when given.
pub fn compare_schemes(
    cfg: &ScenarioConfig,
    schemes: &[Scheme],
    grid_step: f64,
    policy: Option<&MlpParams>,
) -> Result<Comparison> {
    let mut rows = schemes
        .iter()
        .map(|s| run_scheme(cfg, *s, grid_step, None))
        .collect::<Result<Vec<_>>>()?;
    if policy.is_some() {
        rows.push(run_scheme(cfg, Scheme::MobileHap, grid_step, policy)?);
    }
    Ok(Comparison { rows })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg() -> ScenarioConfig {
        ScenarioConfig {
            episode_slots: 60,
            ..ScenarioConfig::default()
        }
    }

    #[test]
    fn direct_matches_closed_form() {
        let r = direct_rate(&ScenarioConfig::default()).unwrap();
        assert_eq!(r.records.len(), 513);
        assert!((r.spectral_efficiency / 9.016_562_240_920_98e-5 - 1.0).abs() < 1e-12);
    }

    #[test]
    fn direct_rejects_coincident_terminals() {
        let c = ScenarioConfig {
            dst: Vec3::ZERO,
            ..cfg()
        };
        assert!(matches!(direct_rate(&c), Err(Error::ZeroDistance)));
    }

    #[test]
    fn shorter_direct_link_is_faster() {
        let near = ScenarioConfig {
            dst: Vec3::new(2000e3, 0.0, 0.0),
            ..cfg()
        };
        assert!(direct_rate(&near).unwrap().mean_rate > direct_rate(&cfg()).unwrap().mean_rate);
    }

    #[test]
    fn single_satellite_is_periodic() {
        let mut c = cfg();
        c.constellation.count = 1;
        c.kinematics.candidate_count = 1;
        // One orbit in exactly 500 slots.
        c.kinematics.dt = c.constellation.orbit_length / c.constellation.speed / 500.0;
        c.episode_slots = 1000;
        let r = sat_only(&c).unwrap();
        assert!(r.records.iter().all(|s| s.sat_index == Some(0)));
        let rates = r.rates();
        for n in 0..500 {
            let (a, b) = (rates[n], rates[n + 500]);
            assert!((a - b).abs() <= 1e-6 * a, "slot {n}: {a} vs {b}");
        }
    }

    #[test]
    fn sat_only_matches_brute_force_over_all_satellites() {
        let c = ScenarioConfig::default();
        let r = sat_only(&c).unwrap();
        let mut constellation = SatelliteConstellation::new(&c.constellation).unwrap();
        for rec in &r.records {
            constellation = constellation.propagate(c.kinematics.dt);
            let best = constellation
                .positions()
                .iter()
                .map(|p| {
                    let c1 = link_capacity(link_distance(*p, c.src), &c.radio).unwrap();
                    let c2 = link_capacity(link_distance(c.dst, *p), &c.radio).unwrap();
                    c1.min(c2)
                })
                .fold(0.0, f64::max);
            assert_eq!(rec.e2e, best, "slot {}", rec.slot);
        }
    }

    #[test]
    fn single_point_sweep_equals_eval() {
        let mut c = cfg();
        c.relay_area.origin = [1500e3, 300e3];
        c.relay_area.extent = [0.0, 0.0];
        let sweep = fixed_relay_sweep(&c, 95e3, 50e3).unwrap();
        let eval = fixed_relay_eval(Vec3::new(1500e3, 300e3, 50e3), &c).unwrap();
        assert_eq!(sweep, eval);
        assert_eq!(sweep.records.len(), 60);
    }

    #[test]
    fn sweep_skips_terminals_and_rejects_empty_grid() {
        let mut c = cfg();
        c.relay_area.origin = [0.0, 0.0];
        c.relay_area.extent = [0.0, 0.0];
        assert!(matches!(grid_points(&c, 95e3, 0.0), Err(Error::EmptyGrid)));
        assert_eq!(grid_points(&c, 95e3, 50e3).unwrap().len(), 1);
        assert!(grid_points(&c, 0.0, 0.0).is_err());
        assert!(fixed_relay_eval(c.dst, &c).is_err());
    }

    #[test]
    fn sweep_mean_is_reproduced_by_eval() {
        let c = cfg();
        let sweep = fixed_relay_sweep(&c, 400e3, 50e3).unwrap();
        let eval = fixed_relay_eval(sweep.relay_position.unwrap(), &c).unwrap();
        assert_eq!(sweep.mean_rate.to_bits(), eval.mean_rate.to_bits());
    }

    #[test]
    fn spectral_efficiency_is_mean_over_bandwidth() {
        let c = cfg();
        let cmp = compare_schemes(&c, &Scheme::BASELINES, 400e3, None).unwrap();
        assert_eq!(cmp.rows.len(), 4);
        for r in &cmp.rows {
            let m = r.rates().iter().sum::<f64>() / r.rates().len() as f64;
            assert_eq!(r.mean_rate, m);
            assert!(
                (r.spectral_efficiency - m / c.radio.bandwidth).abs()
                    <= 1e-12 * r.spectral_efficiency
            );
        }
        assert_eq!(cmp.to_csv().lines().count(), 5);
    }

    #[test]
    fn scheme_names_round_trip() {
        for s in Scheme::BASELINES {
            assert_eq!(s.name().parse::<Scheme>().unwrap(), s);
        }
        assert!("bogus".parse::<Scheme>().is_err());
    }
}
