//! Detection statistics, exact oracles and the capacity comparison.

pub mod baseline;
pub mod detection;
pub mod stats;

use serde::{Deserialize, Serialize};

use crate::adversary::AttackModel;
use crate::error::{Result, SqkdError};
use crate::protocol::{run_session, SessionConfig};

pub use baseline::{
    exact_baseline_ctrl_detection, run_baseline_session, BaselineAttack, BaselineSessionResult, QubitBasis,
    QubitBasisPolicy, QubitLabel,
};
pub use detection::{
    estimate_detection, evasion_probability, exact_detection, DetectionStats, EvasionFamily, ExactDetection,
};
pub use stats::{chi_square_uniform, mutual_information, wilson_interval, ChiSquare, Interval};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CapacityReport {
    pub key_photons: usize,
    pub key_bits_2dof: usize,
    pub key_bits_1dof: usize,
    pub bits_per_sift_photon_2dof: f64,
    pub bits_per_sift_photon_1dof: f64,
    pub ratio: f64,
}

/// Runs the two-DOF protocol and the one-DOF baseline with the same session
/// parameters and no attack, and compares raw key bits per key photon.
pub fn capacity_compare(config: &SessionConfig) -> Result<CapacityReport> {
    let two = run_session(config, &AttackModel::NoAttack)?;
    if !two.status.is_completed() {
        return Err(SqkdError::SessionAborted(two.status));
    }
    let one = run_baseline_session(config, &BaselineAttack::NoAttack)?;
    if !one.status.is_completed() {
        return Err(SqkdError::SessionAborted(one.status));
    }
    let bits2 = two.alice_key.as_ref().map_or(0, |k| k.len());
    let bits1 = one.alice_key.as_ref().map_or(0, |k| k.len());
    let l = config.key_photons as f64;
    let per2 = bits2 as f64 / l;
    let per1 = bits1 as f64 / l;
    Ok(CapacityReport {
        key_photons: config.key_photons,
        key_bits_2dof: bits2,
        key_bits_1dof: bits1,
        bits_per_sift_photon_2dof: per2,
        bits_per_sift_photon_1dof: per1,
        ratio: per2 / per1,
    })
}
