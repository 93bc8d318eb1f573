//! Breeding as phase estimation: the final mode of a run is
//! `D(shift) prod_j (1 + e^{i phi_j} D(xi/sqrt(2))) S(Delta)|vac>`
//! with phases that are linear in the homodyne outcomes.

use std::f64::consts::FRAC_1_SQRT_2;

use serde::{Deserialize, Serialize};

use crate::breeding::{MeasurementRecord, OpRecord, Protocol};
use crate::error::{Error, Result};
use crate::gaussian_state::DisplacedSqueezedSum;

/// Product-of-operators form of a run, every ancilla outcome fixed to 0.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PhaseEstimationTranscript {
    pub phases: Vec<f64>,
    pub alphas: Vec<f64>,
    pub outcomes: Vec<u8>,
    pub shift: f64,
}

impl PhaseEstimationTranscript {
    pub fn op_record(&self) -> OpRecord {
        OpRecord { phases: self.phases.clone(), alphas: self.alphas.clone(), shift: self.shift }
    }

    pub fn to_state(&self, delta: f64) -> Result<DisplacedSqueezedSum> {
        self.op_record().to_state(delta)
    }

    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string_pretty(self).map_err(|e| Error::schema("transcript", e.to_string()))
    }
}

fn expect_protocol(record: &MeasurementRecord, protocol: Protocol) -> Result<()> {
    record.validate()?;
    if record.protocol != protocol {
        return Err(Error::schema("protocol", format!("expected a {protocol} record, found {}", record.protocol)));
    }
    Ok(())
}

/// Phases of the `2^M` operators of an efficient run, in lexicographic order of
/// the leaf labels `x_1 ... x_M` (`x_1` most significant).
///
/// `phi_x = xi sum_j (-1)^{x_j} 2^{(j-1)/2} p^{M-j+1}_{x_1..x_{j-1}}`.
pub fn efficient_phases(record: &MeasurementRecord) -> Result<Vec<f64>> {
    expect_protocol(record, Protocol::Efficient)?;
    let m = record.rounds as usize;
    Ok((0..1usize << m)
        .map(|leaf| {
            (1..=m)
                .map(|j| {
                    let bit = (leaf >> (m - j)) & 1;
                    let prefix = leaf >> (m - j + 1);
                    let p = record.outcomes[m - j][prefix];
                    let sign = if bit == 0 { 1.0 } else { -1.0 };
                    sign * record.xi * 2f64.powf((j as f64 - 1.0) / 2.0) * p
                })
                .sum()
        })
        .collect())
}

/// Phases of the `M + 1` operators of a slow run; operator `m` comes from the
/// cat injected in round `m` (`m = 0` is the initial port-1 cat).
///
/// `phi_m = alpha (sum_{k > m} 2^{-(k-1)/2} p_k - 2^{-(m-1)/2} p_m)`, `p_0 = 0`.
pub fn feedback_phases_slow(record: &MeasurementRecord) -> Result<Vec<f64>> {
    expect_protocol(record, Protocol::Slow)?;
    let alpha = record.config().base_amplitude();
    let p: Vec<f64> = std::iter::once(0.0).chain(record.outcomes.iter().map(|row| row[0])).collect();
    let w = |k: usize| 2f64.powf(-(k as f64 - 1.0) / 2.0);
    let m_max = record.rounds as usize;
    Ok((0..=m_max)
        .map(|m| {
            let later: f64 = (m + 1..=m_max).map(|k| w(k) * p[k]).sum();
            let own = if m == 0 { 0.0 } else { w(m) * p[m] };
            alpha * (later - own)
        })
        .collect())
}

/// Net real displacement left by the pre-shifted cats.
fn final_shift(record: &MeasurementRecord) -> f64 {
    if !record.preshift {
        return 0.0;
    }
    let config = record.config();
    let alpha = config.base_amplitude();
    let m = record.rounds as i32;
    match record.protocol {
        Protocol::Efficient => -0.5 * alpha * 2f64.powf(m as f64 / 2.0),
        Protocol::Slow => {
            let mut shift = -0.5 * alpha;
            for r in 1..=m {
                let beta = alpha / 2f64.powf((r as f64 - 1.0) / 2.0);
                shift = (shift - 0.5 * beta) * FRAC_1_SQRT_2;
            }
            shift
        }
    }
}

pub fn transcript(record: &MeasurementRecord) -> Result<PhaseEstimationTranscript> {
    let phases = match record.protocol {
        Protocol::Efficient => efficient_phases(record)?,
        Protocol::Slow => feedback_phases_slow(record)?,
    };
    let alphas = vec![record.xi * FRAC_1_SQRT_2; phases.len()];
    let outcomes = vec![0; phases.len()];
    Ok(PhaseEstimationTranscript { phases, alphas, outcomes, shift: final_shift(record) })
}

/// Transcript and normalized state built from the product of operators.
pub fn reconstruct_final_state(record: &MeasurementRecord) -> Result<(PhaseEstimationTranscript, DisplacedSqueezedSum)> {
    let t = transcript(record)?;
    let state = t.to_state(record.delta)?;
    Ok((t, state))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::breeding::{post_select_run, replay, standard_spacing, ProtocolConfig};
    use crate::gaussian_state::fidelity;

    fn record(protocol: Protocol, outcomes: Vec<Vec<f64>>) -> MeasurementRecord {
        MeasurementRecord {
            rounds: outcomes.len() as u32,
            xi: standard_spacing(),
            delta: 0.3,
            protocol,
            preshift: true,
            outcomes,
        }
    }

    #[test]
    fn single_round_phases() {
        let r = record(Protocol::Efficient, vec![vec![0.37]]);
        let phases = efficient_phases(&r).unwrap();
        assert_eq!(phases, vec![r.xi * 0.37, -r.xi * 0.37]);
        let (_, state) = reconstruct_final_state(&r).unwrap();
        assert!((fidelity(&state, &replay(&r).unwrap().state).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn zero_outcomes_give_zero_phases() {
        let config = ProtocolConfig::new(3, 0.3, standard_spacing());
        for protocol in [Protocol::Slow, Protocol::Efficient] {
            let (_, rec) = post_select_run(&config, protocol).unwrap();
            let t = transcript(&rec).unwrap();
            assert!(t.phases.iter().all(|&p| p == 0.0));
            assert!(t.outcomes.iter().all(|&x| x == 0));
        }
    }

    #[test]
    fn slow_phases_depend_on_later_outcomes() {
        let a = feedback_phases_slow(&record(Protocol::Slow, vec![vec![0.5], vec![0.1]])).unwrap();
        let b = feedback_phases_slow(&record(Protocol::Slow, vec![vec![0.5], vec![-0.4]])).unwrap();
        assert_eq!(a.len(), 3);
        assert_ne!(a[1], b[1]);
    }

    #[test]
    fn protocol_mismatch_is_a_schema_error() {
        let r = record(Protocol::Slow, vec![vec![0.5]]);
        assert!(matches!(efficient_phases(&r), Err(Error::Schema { .. })));
    }

    #[test]
    fn preshift_toggle_only_moves_the_shift() {
        let mut r = record(Protocol::Efficient, vec![vec![0.2, -0.3], vec![0.9]]);
        let with = transcript(&r).unwrap();
        r.preshift = false;
        let without = transcript(&r).unwrap();
        assert_eq!(with.phases, without.phases);
        assert_eq!(without.shift, 0.0);
        assert!(with.shift < 0.0);
    }
}
