//! Per-client communication/computation latency and energy cost model,
//! round deadline, and supplier/retailer utilities.
//!
//! The rate uses the natural-log Shannon form (nats/s); the symbol B is
//! reserved for the budget elsewhere, so the bandwidth share appears here
//! pre-multiplied as `bandwidth_share`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Uplink channel of one client. All fields strictly positive.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ChannelSpec {
    /// Allocated sub-channel bandwidth, Hz.
    pub bandwidth_share: f64,
    /// Transmit power, W.
    pub transmit_power: f64,
    /// Squared channel gain, dimensionless.
    pub channel_gain_sq: f64,
    /// Background noise power, W.
    pub noise_power: f64,
    /// Power drawn while uploading, W.
    pub upload_power: f64,
    /// Model size in bits.
    pub model_size: f64,
}

impl ChannelSpec {
    pub fn validate(&self) -> Result<()> {
        let fields = [
            ("bandwidth_share", self.bandwidth_share),
            ("transmit_power", self.transmit_power),
            ("channel_gain_sq", self.channel_gain_sq),
            ("noise_power", self.noise_power),
            ("upload_power", self.upload_power),
            ("model_size", self.model_size),
        ];
        for (name, v) in fields {
            if !(v > 0.0) {
                return Err(Error::invalid(format!(
                    "ChannelSpec.{} must be strictly positive, got {}",
                    name, v
                )));
            }
        }
        Ok(())
    }
}

/// Local compute profile of one client.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ComputeSpec {
    /// Processing cycles per sample.
    pub cycles_per_sample: f64,
    /// CPU frequency, cycles/s.
    pub cpu_frequency: f64,
    /// Chip capacitance coefficient, J·s²/cycle³.
    pub chip_coefficient: f64,
    /// Local epochs per round.
    pub local_epochs: usize,
    /// Local sample count.
    pub sample_count: usize,
    /// Honeypot deployment cost per round, J (exogenous constant).
    pub deploy_cost: f64,
}

impl ComputeSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.cycles_per_sample > 0.0)
            || !(self.cpu_frequency > 0.0)
            || !(self.chip_coefficient > 0.0)
            || self.deploy_cost < 0.0
        {
            return Err(Error::invalid("ComputeSpec fields must be positive"));
        }
        if self.local_epochs == 0 {
            return Err(Error::invalid("ComputeSpec.local_epochs must be >= 1"));
        }
        Ok(())
    }
}

/// Latency and energy totals for one client in one round.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CostBreakdown {
    /// Achievable uplink rate, nats/s.
    pub rate: f64,
    pub t_upload: f64,
    pub t_compute: f64,
    pub t_total: f64,
    pub c_upload: f64,
    pub c_train: f64,
    /// Deploy + train + upload cost.
    pub c_total: f64,
}

/// Shannon rate in natural-log form: share · ln(1 + P·|h|²/N₀).
pub fn achievable_rate(ch: &ChannelSpec) -> Result<f64> {
    ch.validate()?;
    let snr = ch.transmit_power * ch.channel_gain_sq / ch.noise_power;
    Ok(ch.bandwidth_share * (1.0 + snr).ln())
}

/// Full latency/energy breakdown for one client.
pub fn cost_breakdown(ch: &ChannelSpec, cs: &ComputeSpec) -> Result<CostBreakdown> {
    cs.validate()?;
    let rate = achievable_rate(ch)?;
    let t_upload = ch.model_size / rate;
    let c_upload = t_upload * ch.upload_power;
    let t_compute =
        cs.local_epochs as f64 * cs.cycles_per_sample * cs.sample_count as f64 / cs.cpu_frequency;
    let c_train = cs.chip_coefficient * cs.cpu_frequency.powi(3) * t_compute;
    Ok(CostBreakdown {
        rate,
        t_upload,
        t_compute,
        t_total: t_upload + t_compute,
        c_upload,
        c_train,
        c_total: cs.deploy_cost + c_train + c_upload,
    })
}

/// Latency of the slowest selected client.
pub fn round_deadline(selected: &[CostBreakdown]) -> Result<f64> {
    selected
        .iter()
        .map(|c| c.t_total)
        .fold(None, |acc: Option<f64>, t| {
            Some(acc.map_or(t, |a| a.max(t)))
        })
        .ok_or_else(|| Error::invalid("round_deadline: empty selection"))
}

/// Supplier utility ln(θR) − C.
pub fn sps_utility(theta: f64, reward: f64, cost: f64) -> Result<f64> {
    let product = theta * reward;
    if !(product > 0.0) {
        return Err(Error::invalid(format!(
            "sps_utility: theta*reward must be > 0, got {}",
            product
        )));
    }
    Ok(product.ln() - cost)
}

/// Retailer utility Σ (θ·G − R) over (theta, revenue, reward) entries.
pub fn tpr_utility(entries: &[(f64, f64, f64)]) -> f64 {
    entries
        .iter()
        .map(|&(theta, revenue, reward)| theta * revenue - reward)
        .sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn channel(bandwidth_share: f64, snr: f64) -> ChannelSpec {
        ChannelSpec {
            bandwidth_share,
            transmit_power: snr,
            channel_gain_sq: 1.0,
            noise_power: 1.0,
            upload_power: 0.1,
            model_size: 2e6,
        }
    }

    #[test]
    fn rate_ln_e_is_one() {
        let ch = channel(1e6, std::f64::consts::E - 1.0);
        assert_abs_diff_eq!(achievable_rate(&ch).unwrap(), 1e6, epsilon = 1e-3);
    }

    #[test]
    fn rate_vanishes_with_snr() {
        let ch = channel(1e6, 1e-12);
        assert!(achievable_rate(&ch).unwrap() < 1.0);
    }

    #[test]
    fn rate_hand_evaluation() {
        let ch = channel(2e6, std::f64::consts::E.powi(2) - 1.0);
        assert_abs_diff_eq!(achievable_rate(&ch).unwrap(), 4e6, epsilon = 1e-2);
    }

    #[test]
    fn breakdown_hand_values() {
        let ch = channel(1e6, std::f64::consts::E - 1.0); // rate 1e6, model 2e6 bits
        let cs = ComputeSpec {
            cycles_per_sample: 1e3,
            cpu_frequency: 1e9,
            chip_coefficient: 1e-28,
            local_epochs: 10,
            sample_count: 5000,
            deploy_cost: 0.0,
        };
        let b = cost_breakdown(&ch, &cs).unwrap();
        assert_abs_diff_eq!(b.t_upload, 2.0, epsilon = 1e-9);
        assert_abs_diff_eq!(b.t_compute, 0.05, epsilon = 1e-12);
        assert_abs_diff_eq!(b.c_train, 5e-3, epsilon = 1e-12);
        assert_abs_diff_eq!(b.t_total, b.t_upload + b.t_compute, epsilon = 0.0);
        assert_abs_diff_eq!(b.c_total, b.c_train + b.c_upload, epsilon = 1e-15);
    }

    #[test]
    fn deadline_is_max() {
        let mk = |t| CostBreakdown {
            rate: 1.0,
            t_upload: t,
            t_compute: 0.0,
            t_total: t,
            c_upload: 0.0,
            c_train: 0.0,
            c_total: 0.0,
        };
        assert_eq!(round_deadline(&[mk(1.0), mk(3.0), mk(2.0)]).unwrap(), 3.0);
        assert_eq!(round_deadline(&[mk(0.7)]).unwrap(), 0.7);
        assert_eq!(round_deadline(&[mk(2.0), mk(2.0)]).unwrap(), 2.0);
        assert!(round_deadline(&[]).is_err());
    }

    #[test]
    fn sps_utility_values() {
        assert_abs_diff_eq!(
            sps_utility(2.0, 5.0, 1.0).unwrap(),
            10f64.ln() - 1.0,
            epsilon = 1e-12
        );
        assert_eq!(sps_utility(1.0, 1.0, 0.0).unwrap(), 0.0);
        assert_abs_diff_eq!(
            sps_utility(1.0, std::f64::consts::E.powi(2), 2.0).unwrap(),
            0.0,
            epsilon = 1e-12
        );
        assert!(sps_utility(0.0, 1.0, 0.0).is_err());
    }

    #[test]
    fn tpr_utility_values() {
        assert_eq!(tpr_utility(&[(1.0, 0.9, 0.9)]), 0.0);
        assert_eq!(tpr_utility(&[]), 0.0);
        assert_abs_diff_eq!(
            tpr_utility(&[(2.0, 0.5, 0.3), (1.0, 0.4, 0.1)]),
            1.0,
            epsilon = 1e-12
        );
    }

    #[test]
    fn utility_concave_increasing_in_reward() {
        let u: Vec<f64> = (1..20)
            .map(|r| sps_utility(2.0, r as f64, 0.5).unwrap())
            .collect();
        assert!(u.windows(2).all(|w| w[1] > w[0]));
        assert!(u
            .windows(3)
            .all(|w| w[2] - w[1] < w[1] - w[0]));
    }
}
