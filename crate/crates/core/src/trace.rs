//! Per-slot trajectory records and their comma-separated form.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::channel::LinkRates;

pub const TRACE_HEADER: &str =
    "n,sat_global_idx,hap_x,hap_y,v_x,v_y,a_x,a_y,d1,d2,d3,c1,c2,c3,e2e,reward";

/// One slot of a relay chain. For static relays the velocity and
/// acceleration are zero and `reward` is absent. Hops that do not exist in a
/// scheme report infinite capacity and zero length.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SlotRecord {
    pub slot: usize,
    /// Global index of the relaying satellite, absent for direct links.
    pub sat_index: Option<usize>,
    pub relay_xy: [f64; 2],
    pub velocity: [f64; 2],
    pub accel: [f64; 2],
    /// Src–SAT, SAT–relay, relay–Dst in meters.
    pub distances: [f64; 3],
    pub rates: LinkRates,
    /// Delivered end-to-end rate in bps.
    pub e2e: f64,
    pub reward: Option<f64>,
}

impl SlotRecord {
    pub fn csv_row(&self) -> String {
        let mut s = String::new();
        let _ = write!(s, "{},", self.slot);
        if let Some(i) = self.sat_index {
            let _ = write!(s, "{i}");
        }
        let _ = write!(
            s,
            ",{},{},{},{},{},{},{},{},{},{},{},{},{},",
            self.relay_xy[0],
            self.relay_xy[1],
            self.velocity[0],
            self.velocity[1],
            self.accel[0],
            self.accel[1],
            self.distances[0],
            self.distances[1],
            self.distances[2],
            self.rates.c_src_sat,
            self.rates.c_sat_hap,
            self.rates.c_hap_dst,
            self.e2e,
        );
        if let Some(r) = self.reward {
            let _ = write!(s, "{r}");
        }
        s
    }
}

/// Header plus one line per record, LF-terminated.
pub fn to_csv(records: &[SlotRecord]) -> String {
    let mut out = String::with_capacity(160 * (records.len() + 1));
    out.push_str(TRACE_HEADER);
    out.push('\n');
    for r in records {
        out.push_str(&r.csv_row());
        out.push('\n');
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn row_has_one_field_per_column() {
        let r = SlotRecord {
            slot: 3,
            sat_index: Some(7),
            relay_xy: [1.0, 2.0],
            velocity: [0.0, 0.0],
            accel: [0.0, 0.0],
            distances: [1.0, 2.0, 3.0],
            rates: LinkRates::from_capacities(1.0, 2.0, 3.0),
            e2e: 1.0,
            reward: None,
        };
        let cols = TRACE_HEADER.split(',').count();
        assert_eq!(r.csv_row().split(',').count(), cols);
        let with_reward = SlotRecord {
            reward: Some(0.25),
            ..r
        };
        assert!(with_reward.csv_row().ends_with(",0.25"));
        let csv = to_csv(&[r, r]);
        assert_eq!(csv.lines().count(), 3);
        assert!(!csv.contains('\r'));
    }
}
