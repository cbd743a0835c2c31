//! Line-of-sight RF links and decode-and-forward rates.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::vector::Vec3;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RadioParams {
    /// RF bandwidth in Hz.
    pub bandwidth: f64,
    /// Reference SNR at 1 m (transmit power times reference gain over noise).
    pub reference_snr: f64,
    pub pathloss_exponent: f64,
}

impl RadioParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.bandwidth.is_finite() && self.bandwidth > 0.0) {
            return Err(Error::config("radio.bandwidth", "must be finite and > 0"));
        }
        if !(self.reference_snr.is_finite() && self.reference_snr > 0.0) {
            return Err(Error::config(
                "radio.reference_snr",
                "must be finite and > 0",
            ));
        }
        if !(self.pathloss_exponent.is_finite() && self.pathloss_exponent >= 1.0) {
            return Err(Error::config("radio.pathloss_exponent", "must be >= 1"));
        }
        Ok(())
    }
}

/// Per-hop capacities of a Src → SAT → HAP → Dst chain, in bps.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct LinkRates {
    pub c_src_sat: f64,
    pub c_sat_hap: f64,
    pub c_hap_dst: f64,
    pub e2e: f64,
}

impl LinkRates {
    pub fn from_capacities(c_src_sat: f64, c_sat_hap: f64, c_hap_dst: f64) -> Self {
        Self {
            c_src_sat,
            c_sat_hap,
            c_hap_dst,
            e2e: e2e_rate(c_src_sat, c_sat_hap, c_hap_dst),
        }
    }
}

/// Relay backlogs in bits.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct BufferState {
    pub q_sat: f64,
    pub q_hap: f64,
}

pub fn link_distance(p: Vec3, q: Vec3) -> f64 {
    (p - q).norm()
}

/// Shannon capacity `B log2(1 + γ0 / d^α)` of a link of length `d` meters.
pub fn link_capacity(d: f64, rp: &RadioParams) -> Result<f64> {
    if !d.is_finite() {
        return Err(Error::NonFinite("link distance"));
    }
    if d <= 0.0 {
        return Err(Error::ZeroDistance);
    }
    let snr = rp.reference_snr / d.powf(rp.pathloss_exponent);
    Ok(rp.bandwidth * snr.ln_1p() / std::f64::consts::LN_2)
}

pub fn spectral_efficiency(rate: f64, rp: &RadioParams) -> f64 {
    rate / rp.bandwidth
}

/// Bufferless decode-and-forward: the weakest hop carries the chain.
pub fn e2e_rate(c1: f64, c2: f64, c3: f64) -> f64 {
    c1.min(c2).min(c3)
}

/// Capacities for the chain through satellite `sat` and relay `hap`.
pub fn chain_rates(
    src: Vec3,
    sat: Vec3,
    hap: Vec3,
    dst: Vec3,
    rp: &RadioParams,
) -> Result<LinkRates> {
    Ok(LinkRates::from_capacities(
        link_capacity(link_distance(sat, src), rp)?,
        link_capacity(link_distance(hap, sat), rp)?,
        link_capacity(link_distance(dst, hap), rp)?,
    ))
}

/// Achievable hop rates under information causality: a relay forwards at
/// most what it holds plus what arrives this slot. Buffers are in bits and
/// converted to a per-slot rate through `dt`.
pub fn buffered_hop_rates(caps: &LinkRates, buf: &BufferState, dt: f64) -> [f64; 3] {
    let r_src_sat = caps.c_src_sat;
    let r_sat_hap = caps.c_sat_hap.min(buf.q_sat / dt + r_src_sat);
    let r_hap_dst = caps.c_hap_dst.min(buf.q_hap / dt + r_sat_hap);
    [r_src_sat, r_sat_hap, r_hap_dst]
}

impl BufferState {
    /// Backlogs after one slot carrying `rates`.
    pub fn advance(&self, rates: [f64; 3], dt: f64) -> BufferState {
        BufferState {
            q_sat: (self.q_sat + (rates[0] - rates[1]) * dt).max(0.0),
            q_hap: (self.q_hap + (rates[1] - rates[2]) * dt).max(0.0),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn table() -> RadioParams {
        RadioParams {
            bandwidth: 1e9,
            reference_snr: 1e9,
            pathloss_exponent: 2.0,
        }
    }

    #[test]
    fn distances() {
        assert_eq!(link_distance(Vec3::ZERO, Vec3::new(3e6, 4e6, 0.0)), 5e6);
        let p = Vec3::new(1.0, 2.0, 3.0);
        assert_eq!(link_distance(p, p), 0.0);
        assert_eq!(link_distance(Vec3::ZERO, Vec3::new(0.0, 0.0, 550e3)), 550e3);
    }

    #[test]
    fn capacity_reference_values() {
        // 1e9 * log2(1 + 1e9), evaluated with mpmath at 50 digits.
        let c = link_capacity(1.0, &table()).unwrap();
        assert!((c / 29_897_352_855.428_956 - 1.0).abs() < 1e-12);

        let c = link_capacity(1e9f64.sqrt(), &table()).unwrap();
        assert!((c - 1e9).abs() < 1e-3);

        // log2(1 + 6.25e-5), mpmath.
        let se = spectral_efficiency(link_capacity(4e6, &table()).unwrap(), &table());
        assert!((se / 9.016_562_240_920_98e-5 - 1.0).abs() < 1e-12);
    }

    #[test]
    fn capacity_rejects_zero_distance() {
        assert!(matches!(
            link_capacity(0.0, &table()),
            Err(Error::ZeroDistance)
        ));
        assert!(link_capacity(f64::NAN, &table()).is_err());
    }

    #[test]
    fn e2e_examples() {
        assert_eq!(e2e_rate(3.0, 1.0, 2.0), 1.0);
        assert_eq!(e2e_rate(7.5, 7.5, 7.5), 7.5);
        assert_eq!(e2e_rate(0.0, 4.0, 9.0), 0.0);
    }

    #[test]
    fn buffered_examples() {
        let empty = BufferState::default();
        let caps = LinkRates::from_capacities(1.0, 5.0, 5.0);
        assert_eq!(buffered_hop_rates(&caps, &empty, 1.0), [1.0, 1.0, 1.0]);

        let full = BufferState {
            q_sat: 1e30,
            q_hap: 0.0,
        };
        let caps = LinkRates::from_capacities(1.0, 5.0, 3.0);
        assert_eq!(buffered_hop_rates(&caps, &full, 1.0)[1], 5.0);

        let buf = BufferState {
            q_sat: 1.0,
            q_hap: 0.0,
        };
        let caps = LinkRates::from_capacities(2.0, 3.0, 4.0);
        assert_eq!(buffered_hop_rates(&caps, &buf, 1.0), [2.0, 3.0, 3.0]);
    }

    #[test]
    fn buffers_never_go_negative() {
        let b = BufferState {
            q_sat: 1.0,
            q_hap: 0.5,
        }
        .advance([0.0, 3.0, 9.0], 1.0);
        assert_eq!(
            b,
            BufferState {
                q_sat: 0.0,
                q_hap: 0.0
            }
        );
        let b = BufferState::default().advance([5.0, 2.0, 1.0], 2.0);
        assert_eq!(
            b,
            BufferState {
                q_sat: 6.0,
                q_hap: 2.0
            }
        );
    }

    #[test]
    fn radio_validation() {
        assert!(table().validate().is_ok());
        assert!(RadioParams {
            pathloss_exponent: 0.5,
            ..table()
        }
        .validate()
        .is_err());
        assert!(RadioParams {
            bandwidth: 0.0,
            ..table()
        }
        .validate()
        .is_err());
    }

    proptest! {
        #[test]
        fn capacity_monotonicity(d in 1.0f64..1e7, k in 1.001f64..10.0,
                                 g in 1e3f64..1e12, b in 1e3f64..1e10, a in 1.0f64..4.0) {
            let rp = RadioParams { bandwidth: b, reference_snr: g, pathloss_exponent: a };
            let c = link_capacity(d, &rp).unwrap();
            prop_assert!(link_capacity(d * k, &rp).unwrap() < c);
            let louder = RadioParams { reference_snr: g * k, ..rp };
            prop_assert!(link_capacity(d, &louder).unwrap() > c);
            let wider = RadioParams { bandwidth: b * k, ..rp };
            let cw = link_capacity(d, &wider).unwrap();
            prop_assert!(cw > c);
            // capacity scales linearly with bandwidth
            prop_assert!((cw / c - k).abs() <= 1e-12 * k);
        }

        #[test]
        fn e2e_never_exceeds_a_hop(c1 in 0.0f64..1e10, c2 in 0.0f64..1e10, c3 in 0.0f64..1e10) {
            let r = e2e_rate(c1, c2, c3);
            prop_assert!(r <= c1 && r <= c2 && r <= c3);
            let caps = LinkRates::from_capacities(c1, c2, c3);
            let hops = buffered_hop_rates(&caps, &BufferState::default(), 10.0);
            prop_assert_eq!(hops.iter().cloned().fold(f64::INFINITY, f64::min), r);
        }
    }
}
