//! One-degree-of-freedom single-state protocol used as the capacity baseline.
//!
//! Same step structure as the two-DOF protocol on a qubit: Alice prepares
//! `|+⟩`, Bob reflects or measures in `{|0⟩, |1⟩}`, Alice checks CTRL photons
//! in `{|+⟩, |−⟩}`. Each key photon yields one bit.

use std::fmt;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Result, SqkdError};
use crate::linalg::{C64, ONE, ZERO};
use crate::protocol::{partition_sift, tv_from_uniform, BobAction, RawKey, SessionConfig, SessionStatus, Usage};
use crate::rng::{RandomSource, Role, LANE_SIFT_SAMPLING};

const H: f64 = std::f64::consts::FRAC_1_SQRT_2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum QubitLabel {
    #[serde(rename = "0")]
    Zero,
    #[serde(rename = "1")]
    One,
    #[serde(rename = "+")]
    Plus,
    #[serde(rename = "-")]
    Minus,
}

impl QubitLabel {
    pub fn vector(self) -> [C64; 2] {
        let h = C64::new(H, 0.0);
        match self {
            Self::Zero => [ONE, ZERO],
            Self::One => [ZERO, ONE],
            Self::Plus => [h, h],
            Self::Minus => [h, -h],
        }
    }
}

impl fmt::Display for QubitLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Zero => "0",
            Self::One => "1",
            Self::Plus => "+",
            Self::Minus => "-",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum QubitBasis {
    Z,
    X,
}

impl QubitBasis {
    pub fn labels(self) -> [QubitLabel; 2] {
        match self {
            Self::Z => [QubitLabel::Zero, QubitLabel::One],
            Self::X => [QubitLabel::Plus, QubitLabel::Minus],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum QubitBasisPolicy {
    Fixed(QubitBasis),
    Uniform,
}

/// Single-qubit analogues of the two-DOF attacks.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BaselineAttack {
    NoAttack,
    InterceptResend { fake: QubitLabel },
    MeasureResend { policy: QubitBasisPolicy },
}

impl BaselineAttack {
    pub fn label(&self) -> String {
        match self {
            Self::NoAttack => "no-attack".into(),
            Self::InterceptResend { fake } => format!("intercept-resend(fixed {fake})"),
            Self::MeasureResend {
                policy: QubitBasisPolicy::Fixed(b),
            } => format!("measure-resend({b:?})"),
            Self::MeasureResend {
                policy: QubitBasisPolicy::Uniform,
            } => "measure-resend(uniform)".into(),
        }
    }
}

fn born(state: &[C64; 2], basis: QubitBasis) -> [f64; 2] {
    basis.labels().map(|l| {
        let v = l.vector();
        (v[0].conj() * state[0] + v[1].conj() * state[1]).norm_sqr()
    })
}

fn measure(state: &[C64; 2], basis: QubitBasis, rng: &mut RandomSource) -> (u8, [C64; 2]) {
    let i = rng.categorical(&born(state, basis).map(|p| if p < 1e-14 { 0.0 } else { p }));
    (i as u8, basis.labels()[i].vector())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct BaselineRecord {
    pub round: u64,
    pub bob_action: BobAction,
    /// Bob's Z outcome (the key bit) on SIFT rounds.
    pub bob_outcome: Option<u8>,
    pub alice_basis: QubitBasis,
    pub alice_outcome: QubitLabel,
    pub used_for: Usage,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BaselineSessionResult {
    pub status: SessionStatus,
    #[serde(rename = "N")]
    pub photon_count: usize,
    pub ctrl_rounds: usize,
    pub sift_rounds: usize,
    pub ctrl_error_rate: Option<f64>,
    pub sift_error_rate: Option<f64>,
    /// Alice's Step-6 sample outcomes over (0, 1).
    pub sift_check_histogram: Option<[u64; 2]>,
    pub sift_check_tv_distance: Option<f64>,
    pub alice_key: Option<RawKey>,
    pub bob_key: Option<RawKey>,
    pub records: Vec<BaselineRecord>,
}

fn simulate_round(attack: &BaselineAttack, seed: u64, round: u64) -> BaselineRecord {
    let mut eve = RandomSource::for_round(seed, round, Role::Eve);
    let mut bob = RandomSource::for_round(seed, round, Role::Bob);
    let mut alice = RandomSource::for_round(seed, round, Role::Alice);

    let genuine = QubitLabel::Plus.vector();
    let to_bob = match attack {
        BaselineAttack::NoAttack => genuine,
        BaselineAttack::InterceptResend { fake } => fake.vector(),
        BaselineAttack::MeasureResend { policy } => {
            let basis = match policy {
                QubitBasisPolicy::Fixed(b) => *b,
                QubitBasisPolicy::Uniform if eve.coin() => QubitBasis::Z,
                QubitBasisPolicy::Uniform => QubitBasis::X,
            };
            measure(&genuine, basis, &mut eve).1
        }
    };
    let (bob_action, to_alice, bob_outcome) = if bob.coin() {
        (BobAction::Ctrl, to_bob, None)
    } else {
        let (i, collapsed) = measure(&to_bob, QubitBasis::Z, &mut bob);
        (BobAction::Sift, collapsed, Some(i))
    };
    let alice_basis = match bob_action {
        BobAction::Ctrl => QubitBasis::X,
        BobAction::Sift => QubitBasis::Z,
    };
    let (i, _) = measure(&to_alice, alice_basis, &mut alice);
    BaselineRecord {
        round,
        bob_action,
        bob_outcome,
        alice_basis,
        alice_outcome: alice_basis.labels()[i as usize],
        used_for: match bob_action {
            BobAction::Ctrl => Usage::CtrlCheck,
            BobAction::Sift => Usage::Discarded,
        },
    }
}

fn alice_bit(label: QubitLabel) -> u8 {
    u8::from(label == QubitLabel::One)
}

/// Runs the baseline protocol with the same Steps 1–7 and abort rules as
/// [`crate::protocol::run_session`].
pub fn run_baseline_session(config: &SessionConfig, attack: &BaselineAttack) -> Result<BaselineSessionResult> {
    config.validate()?;
    let n = config.photon_count();
    let mut records: Vec<BaselineRecord> = (0..n as u64)
        .into_par_iter()
        .map(|round| simulate_round(attack, config.seed, round))
        .collect();
    let sift_ids: Vec<u64> = records
        .iter()
        .filter(|r| r.bob_action == BobAction::Sift)
        .map(|r| r.round)
        .collect();
    let ctrl_total = n - sift_ids.len();
    let mut result = BaselineSessionResult {
        status: SessionStatus::Completed,
        photon_count: n,
        ctrl_rounds: ctrl_total,
        sift_rounds: sift_ids.len(),
        ctrl_error_rate: None,
        sift_error_rate: None,
        sift_check_histogram: None,
        sift_check_tv_distance: None,
        alice_key: None,
        bob_key: None,
        records: Vec::new(),
    };

    if ctrl_total == 0 {
        result.status = SessionStatus::AbortedStep5;
        result.records = records;
        return Ok(result);
    }
    let ctrl_errors = records
        .iter()
        .filter(|r| r.bob_action == BobAction::Ctrl && r.alice_outcome != QubitLabel::Plus)
        .count();
    let ctrl_rate = ctrl_errors as f64 / ctrl_total as f64;
    result.ctrl_error_rate = Some(ctrl_rate);
    if ctrl_rate > config.tau_ctrl {
        result.status = SessionStatus::AbortedStep5;
        result.records = records;
        return Ok(result);
    }

    let l = config.key_photons;
    if sift_ids.len() < 2 * l {
        result.status = SessionStatus::AbortedInsufficientSift;
        result.records = records;
        return Ok(result);
    }

    let mut sampling = RandomSource::new(config.seed, LANE_SIFT_SAMPLING);
    let split = partition_sift(&sift_ids, l, &mut sampling);
    let mut histogram = [0u64; 2];
    let mut mismatches = 0usize;
    for &round in &split.check {
        let r = &mut records[round as usize];
        r.used_for = Usage::SiftCheck;
        let a = alice_bit(r.alice_outcome);
        histogram[a as usize] += 1;
        if r.bob_outcome != Some(a) {
            mismatches += 1;
        }
    }
    let sift_rate = mismatches as f64 / l as f64;
    result.sift_error_rate = Some(sift_rate);
    result.sift_check_histogram = Some(histogram);
    result.sift_check_tv_distance = Some(tv_from_uniform(&histogram));
    if sift_rate > config.tau_sift {
        result.status = SessionStatus::AbortedStep6;
        result.records = records;
        return Ok(result);
    }

    let mut alice = RawKey::default();
    let mut bob = RawKey::default();
    for &round in &split.key {
        let r = &mut records[round as usize];
        r.used_for = Usage::Key;
        let b = r
            .bob_outcome
            .ok_or_else(|| SqkdError::Contract("SIFT record without Bob outcome".into()))?;
        alice.push_symbol(alice_bit(r.alice_outcome), 1);
        bob.push_symbol(b, 1);
    }
    result.alice_key = Some(alice);
    result.bob_key = Some(bob);
    result.records = records;
    Ok(result)
}

/// Exact P(CTRL detection) for a baseline attack.
pub fn exact_baseline_ctrl_detection(attack: &BaselineAttack) -> f64 {
    let genuine = QubitLabel::Plus.vector();
    let p_error = |state: &[C64; 2]| born(state, QubitBasis::X)[1];
    match attack {
        BaselineAttack::NoAttack => p_error(&genuine),
        BaselineAttack::InterceptResend { fake } => p_error(&fake.vector()),
        BaselineAttack::MeasureResend { policy } => {
            let bases: &[(f64, QubitBasis)] = match policy {
                QubitBasisPolicy::Fixed(QubitBasis::Z) => &[(1.0, QubitBasis::Z)],
                QubitBasisPolicy::Fixed(QubitBasis::X) => &[(1.0, QubitBasis::X)],
                QubitBasisPolicy::Uniform => &[(0.5, QubitBasis::Z), (0.5, QubitBasis::X)],
            };
            bases
                .iter()
                .map(|&(pb, basis)| {
                    let probs = born(&genuine, basis);
                    basis
                        .labels()
                        .iter()
                        .zip(probs)
                        .map(|(l, p)| pb * p * p_error(&l.vector()))
                        .sum::<f64>()
                })
                .sum()
        }
    }
}
