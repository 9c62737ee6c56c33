//! Quantum Alice and classical Bob running one key-distribution session.
//!
//! Alice sends `N = ⌈4L(1+δ)⌉` copies of `|S⟩⊗|s⟩`. Bob reflects each photon
//! (CTRL) or measures it in Zp⊗Zs and resends what he saw (SIFT). After Bob
//! announces his CTRL positions, Alice measures CTRL photons in Xp⊗Xs and
//! SIFT photons in Zp⊗Zs, both parties check error rates, and the first `L`
//! unsampled SIFT rounds yield a `2L`-bit raw key.

use std::fmt;

use rayon::prelude::*;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::adversary::{self, AttackModel, EveRecord};
use crate::error::{Result, SqkdError};
use crate::quantum::{self, JointState, Outcome, PhotonState, ProductBasis};
use crate::rng::{RandomSource, Role, LANE_SIFT_SAMPLING};

/// The only basis Bob ever measures or prepares in.
pub const BOB_BASIS: ProductBasis = ProductBasis::ZZ;
/// Alice's basis for photons Bob reflected.
pub const CTRL_BASIS: ProductBasis = ProductBasis::XX;

pub const DEFAULT_DELTA: f64 = 0.25;
/// Largest session size `N` accepted by [`SessionConfig::validate`].
pub const MAX_PHOTONS: usize = 1 << 26;

fn default_delta() -> f64 {
    DEFAULT_DELTA
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SessionConfig {
    /// Target number of key photons `L`; the raw key has `2L` bits.
    #[serde(rename = "L")]
    pub key_photons: usize,
    #[serde(default = "default_delta")]
    pub delta: f64,
    /// Step-5 abort threshold: abort when the CTRL error rate exceeds it.
    #[serde(default)]
    pub tau_ctrl: f64,
    /// Step-6 abort threshold on the sampled SIFT mismatch rate.
    #[serde(default)]
    pub tau_sift: f64,
    #[serde(default)]
    pub seed: u64,
}

impl SessionConfig {
    pub fn new(key_photons: usize, seed: u64) -> Self {
        Self {
            key_photons,
            delta: DEFAULT_DELTA,
            tau_ctrl: 0.0,
            tau_sift: 0.0,
            seed,
        }
    }

    pub fn with_delta(mut self, delta: f64) -> Self {
        self.delta = delta;
        self
    }

    pub fn with_thresholds(mut self, tau_ctrl: f64, tau_sift: f64) -> Self {
        self.tau_ctrl = tau_ctrl;
        self.tau_sift = tau_sift;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: &str| Err(SqkdError::InvalidConfig(msg.to_string()));
        if self.key_photons == 0 {
            return bad("L must be positive");
        }
        if !(self.delta.is_finite() && self.delta > 0.0) {
            return bad("delta must be a finite number > 0");
        }
        for (name, tau) in [("tau_ctrl", self.tau_ctrl), ("tau_sift", self.tau_sift)] {
            if !(0.0..1.0).contains(&tau) {
                return Err(SqkdError::InvalidConfig(format!("{name} must lie in [0, 1)")));
            }
        }
        if self.photon_count() > MAX_PHOTONS {
            return bad("N is too large");
        }
        Ok(())
    }

    /// `N = ⌈4L(1+δ)⌉`. Products within 1e-9 (relative) of an integer snap to
    /// it first, so `4·100·1.1` gives 440 rather than 441.
    pub fn photon_count(&self) -> usize {
        let exact = 4.0 * self.key_photons as f64 * (1.0 + self.delta);
        let nearest = exact.round();
        if (exact - nearest).abs() <= 1e-9 * exact.max(1.0) {
            nearest as usize
        } else {
            exact.ceil() as usize
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum BobAction {
    /// Reflect the photon undisturbed.
    Ctrl,
    /// Measure in Zp⊗Zs and resend the observed ket.
    Sift,
}

impl fmt::Display for BobAction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Ctrl => "CTRL",
            Self::Sift => "SIFT",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Usage {
    #[serde(rename = "CTRL-check")]
    CtrlCheck,
    #[serde(rename = "SIFT-check")]
    SiftCheck,
    #[serde(rename = "KEY")]
    Key,
    #[serde(rename = "DISCARDED")]
    Discarded,
}

impl fmt::Display for Usage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::CtrlCheck => "CTRL-check",
            Self::SiftCheck => "SIFT-check",
            Self::Key => "KEY",
            Self::Discarded => "DISCARDED",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RoundRecord {
    pub round: u64,
    pub bob_action: BobAction,
    pub bob_outcome: Option<Outcome>,
    pub alice_basis: ProductBasis,
    pub alice_outcome: Outcome,
    pub used_for: Usage,
}

/// Raw key bits, serialized as a `0`/`1` string.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct RawKey(Vec<u8>);

impl RawKey {
    pub fn from_bits(bits: Vec<u8>) -> Result<Self> {
        if bits.iter().any(|&b| b > 1) {
            return Err(SqkdError::Contract("raw key bits must be 0 or 1".into()));
        }
        Ok(Self(bits))
    }

    /// Appends the `width` low bits of `symbol`, most significant first.
    pub(crate) fn push_symbol(&mut self, symbol: u8, width: u32) {
        for shift in (0..width).rev() {
            self.0.push((symbol >> shift) & 1);
        }
    }

    pub fn bits(&self) -> &[u8] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

impl fmt::Display for RawKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for b in &self.0 {
            f.write_str(if *b == 1 { "1" } else { "0" })?;
        }
        Ok(())
    }
}

impl Serialize for RawKey {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for RawKey {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        let bits = s
            .chars()
            .map(|c| match c {
                '0' => Ok(0),
                '1' => Ok(1),
                other => Err(serde::de::Error::custom(format!("invalid key bit `{other}`"))),
            })
            .collect::<std::result::Result<Vec<u8>, _>>()?;
        Ok(RawKey(bits))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SessionStatus {
    Completed,
    AbortedStep5,
    AbortedStep6,
    AbortedInsufficientSift,
}

impl SessionStatus {
    pub fn is_completed(self) -> bool {
        self == Self::Completed
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionResult {
    pub status: SessionStatus,
    #[serde(rename = "N")]
    pub photon_count: usize,
    pub ctrl_rounds: usize,
    pub sift_rounds: usize,
    /// Absent only if the session aborted before Step 5 could run.
    pub ctrl_error_rate: Option<f64>,
    /// Absent when the session aborted before Step 6.
    pub sift_error_rate: Option<f64>,
    /// Alice's Step-6 sample outcomes over (H b1, H b2, V b1, V b2).
    pub sift_check_histogram: Option<[u64; 4]>,
    pub sift_check_tv_distance: Option<f64>,
    pub alice_key: Option<RawKey>,
    pub bob_key: Option<RawKey>,
    pub records: Vec<RoundRecord>,
    pub eve_records: Vec<EveRecord>,
}

impl SessionResult {
    pub fn key_rounds(&self) -> impl Iterator<Item = &RoundRecord> {
        self.records.iter().filter(|r| r.used_for == Usage::Key)
    }
}

/// What travels on the channel: a bare photon, or a photon entangled with
/// Eve's probe.
#[derive(Debug, Clone, PartialEq)]
pub enum ChannelState {
    Photon(PhotonState),
    Entangled(JointState),
}

impl ChannelState {
    pub fn photon(&self) -> Option<&PhotonState> {
        match self {
            Self::Photon(p) => Some(p),
            Self::Entangled(_) => None,
        }
    }

    /// Measures the photon (subsystem) and returns the collapsed state.
    pub fn measure(&self, basis: ProductBasis, rng: &mut RandomSource) -> (Outcome, ChannelState) {
        match self {
            Self::Photon(p) => {
                let (o, post) = quantum::measure(p, basis, rng);
                (o, Self::Photon(post))
            }
            Self::Entangled(j) => {
                let (o, post) = j.measure_photon(basis, rng);
                (o, Self::Entangled(post))
            }
        }
    }
}

impl From<PhotonState> for ChannelState {
    fn from(p: PhotonState) -> Self {
        Self::Photon(p)
    }
}

/// Step 1: `N` photons, all `|S⟩⊗|s⟩`.
pub fn alice_prepare(config: &SessionConfig) -> Result<Vec<PhotonState>> {
    config.validate()?;
    Ok(vec![quantum::s_s(); config.photon_count()])
}

/// Step 2: Bob reflects (CTRL) or measures in Zp⊗Zs and resends (SIFT),
/// each with probability ½.
pub fn bob_act(
    incoming: ChannelState,
    rng: &mut RandomSource,
) -> (BobAction, ChannelState, Option<Outcome>) {
    if rng.coin() {
        (BobAction::Ctrl, incoming, None)
    } else {
        let (outcome, resent) = incoming.measure(BOB_BASIS, rng);
        (BobAction::Sift, resent, Some(outcome))
    }
}

/// Step 4: Alice's basis follows Bob's Step-3 announcement.
pub fn alice_measure(state: &ChannelState, announced: BobAction, rng: &mut RandomSource) -> Outcome {
    let basis = match announced {
        BobAction::Ctrl => CTRL_BASIS,
        BobAction::Sift => BOB_BASIS,
    };
    state.measure(basis, rng).0
}

/// Step 5: fraction of CTRL rounds where Alice did not see `|S⟩⊗|s⟩`.
/// SIFT records in the input are ignored.
pub fn ctrl_error_rate(records: &[RoundRecord]) -> Result<f64> {
    let (mut total, mut errors) = (0usize, 0usize);
    for r in records.iter().filter(|r| r.bob_action == BobAction::Ctrl) {
        total += 1;
        if r.alice_outcome.basis() != CTRL_BASIS || r.alice_outcome.index() != 0 {
            errors += 1;
        }
    }
    if total == 0 {
        return Err(SqkdError::NoCtrlRounds);
    }
    Ok(errors as f64 / total as f64)
}

/// Result of the Step-6 comparison on a random sample of SIFT rounds.
#[derive(Debug, Clone, PartialEq)]
pub struct SiftCheck {
    /// Round indices of the sampled records, ascending.
    pub sampled: Vec<u64>,
    pub mismatch_rate: f64,
    /// Alice's outcomes over the sample, in Zp⊗Zs order.
    pub histogram: [u64; 4],
}

/// Step 6: Alice samples `L` SIFT rounds uniformly without replacement and
/// Bob announces his outcomes on them.
pub fn sift_error_check(
    sift_records: &[RoundRecord],
    config: &SessionConfig,
    rng: &mut RandomSource,
) -> Result<SiftCheck> {
    let l = config.key_photons;
    if sift_records.len() < 2 * l {
        return Err(SqkdError::InsufficientSift {
            needed: 2 * l,
            available: sift_records.len(),
        });
    }
    let mut positions = rand::seq::index::sample(rng, sift_records.len(), l).into_vec();
    positions.sort_unstable();
    let mut mismatches = 0usize;
    let mut histogram = [0u64; 4];
    let mut sampled = Vec::with_capacity(l);
    for &p in &positions {
        let r = &sift_records[p];
        sampled.push(r.round);
        histogram[r.alice_outcome.index() as usize] += 1;
        if r.bob_outcome != Some(r.alice_outcome) {
            mismatches += 1;
        }
    }
    Ok(SiftCheck {
        sampled,
        mismatch_rate: mismatches as f64 / l as f64,
        histogram,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct KeyDerivation {
    pub alice: RawKey,
    pub bob: RawKey,
    /// Round indices that produced key bits, ascending.
    pub rounds: Vec<u64>,
}

/// Step 7: the first `L` remaining SIFT rounds by round index, two bits each
/// (`H b1 → 00`, `H b2 → 01`, `V b1 → 10`, `V b2 → 11`).
pub fn derive_raw_key(remaining: &[RoundRecord], config: &SessionConfig) -> Result<KeyDerivation> {
    let l = config.key_photons;
    let mut sorted: Vec<&RoundRecord> = remaining
        .iter()
        .filter(|r| r.bob_action == BobAction::Sift)
        .collect();
    if sorted.len() < l {
        return Err(SqkdError::InsufficientSift {
            needed: l,
            available: sorted.len(),
        });
    }
    sorted.sort_by_key(|r| r.round);
    let mut alice = RawKey::default();
    let mut bob = RawKey::default();
    let mut rounds = Vec::with_capacity(l);
    for r in sorted.into_iter().take(l) {
        let bob_outcome = r
            .bob_outcome
            .ok_or_else(|| SqkdError::Contract("SIFT record without Bob outcome".into()))?;
        let (Some(a), Some(b)) = (r.alice_outcome.key_bits(), bob_outcome.key_bits()) else {
            return Err(SqkdError::Contract("SIFT outcome outside Zp⊗Zs".into()));
        };
        alice.push_symbol(a, 2);
        bob.push_symbol(b, 2);
        rounds.push(r.round);
    }
    Ok(KeyDerivation { alice, bob, rounds })
}

/// Everything that happened to one photon.
#[derive(Debug, Clone, PartialEq)]
pub struct RoundTrace {
    pub round: u64,
    pub bob_action: BobAction,
    pub bob_outcome: Option<Outcome>,
    pub alice_outcome: Outcome,
    pub eve: Vec<EveRecord>,
}

/// One round through forward tap → Bob → backward tap → Alice.
///
/// Each party draws from its own `(seed, round, role)` substream, so the
/// trace does not depend on which other rounds ran or in what order.
pub fn simulate_round(attack: &AttackModel, seed: u64, round: u64) -> Result<RoundTrace> {
    let mut eve_rng = RandomSource::for_round(seed, round, Role::Eve);
    let mut bob_rng = RandomSource::for_round(seed, round, Role::Bob);
    let mut alice_rng = RandomSource::for_round(seed, round, Role::Alice);

    let genuine = quantum::s_s();
    let mut eve = Vec::new();
    let (to_bob, fwd) = adversary::tap_forward(attack, &genuine, round, &mut eve_rng)?;
    eve.extend(fwd);
    let (bob_action, from_bob, bob_outcome) = bob_act(to_bob, &mut bob_rng);
    let (to_alice, back) = adversary::tap_backward(attack, from_bob, round, &mut eve_rng)?;
    eve.extend(back);
    let alice_outcome = alice_measure(&to_alice, bob_action, &mut alice_rng);
    Ok(RoundTrace {
        round,
        bob_action,
        bob_outcome,
        alice_outcome,
        eve,
    })
}

/// Splits SIFT round ids into a random check sample of size `l` and the
/// first `l` remaining rounds for the key; the rest are discarded.
pub(crate) struct SiftPartition {
    pub check: Vec<u64>,
    pub key: Vec<u64>,
}

pub(crate) fn partition_sift(sift_rounds: &[u64], l: usize, rng: &mut RandomSource) -> SiftPartition {
    debug_assert!(sift_rounds.len() >= 2 * l);
    let mut picks = rand::seq::index::sample(rng, sift_rounds.len(), l).into_vec();
    picks.sort_unstable();
    let check: Vec<u64> = picks.iter().map(|&i| sift_rounds[i]).collect();
    let mut key = Vec::with_capacity(l);
    let mut next_pick = picks.iter().peekable();
    for (i, &round) in sift_rounds.iter().enumerate() {
        if next_pick.peek() == Some(&&i) {
            next_pick.next();
            continue;
        }
        if key.len() == l {
            break;
        }
        key.push(round);
    }
    SiftPartition { check, key }
}

/// Total variation distance between a 4-bin histogram and uniform.
pub fn tv_from_uniform(histogram: &[u64]) -> f64 {
    let total: u64 = histogram.iter().sum();
    if total == 0 {
        return 0.0;
    }
    let k = histogram.len() as f64;
    0.5 * histogram
        .iter()
        .map(|&c| (c as f64 / total as f64 - 1.0 / k).abs())
        .sum::<f64>()
}

/// Runs Steps 1–7 end to end. Protocol aborts are statuses, not errors;
/// errors mean invalid input or a broken internal contract.
///
/// Rounds fan out over the current rayon pool; results are identical to a
/// sequential run.
pub fn run_session(config: &SessionConfig, attack: &AttackModel) -> Result<SessionResult> {
    let photons = alice_prepare(config)?;
    let n = photons.len();
    let traces: Vec<RoundTrace> = (0..n as u64)
        .into_par_iter()
        .map(|round| simulate_round(attack, config.seed, round))
        .collect::<Result<_>>()?;

    // Step 3: Bob announces CTRL positions; every record starts provisional.
    let mut records: Vec<RoundRecord> = traces
        .iter()
        .map(|t| RoundRecord {
            round: t.round,
            bob_action: t.bob_action,
            bob_outcome: t.bob_outcome,
            alice_basis: match t.bob_action {
                BobAction::Ctrl => CTRL_BASIS,
                BobAction::Sift => BOB_BASIS,
            },
            alice_outcome: t.alice_outcome,
            used_for: match t.bob_action {
                BobAction::Ctrl => Usage::CtrlCheck,
                BobAction::Sift => Usage::Discarded,
            },
        })
        .collect();
    let eve_records: Vec<EveRecord> = traces.into_iter().flat_map(|t| t.eve).collect();
    let sift_ids: Vec<u64> = records
        .iter()
        .filter(|r| r.bob_action == BobAction::Sift)
        .map(|r| r.round)
        .collect();

    let mut result = SessionResult {
        status: SessionStatus::Completed,
        photon_count: n,
        ctrl_rounds: n - sift_ids.len(),
        sift_rounds: sift_ids.len(),
        ctrl_error_rate: None,
        sift_error_rate: None,
        sift_check_histogram: None,
        sift_check_tv_distance: None,
        alice_key: None,
        bob_key: None,
        records: Vec::new(),
        eve_records,
    };

    // Step 5
    let ctrl_rate = match ctrl_error_rate(&records) {
        Ok(rate) => rate,
        Err(SqkdError::NoCtrlRounds) => {
            result.status = SessionStatus::AbortedStep5;
            result.records = records;
            return Ok(result);
        }
        Err(e) => return Err(e),
    };
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

    // Step 6
    let sift_records: Vec<RoundRecord> = records
        .iter()
        .filter(|r| r.bob_action == BobAction::Sift)
        .copied()
        .collect();
    let mut sampling = RandomSource::new(config.seed, LANE_SIFT_SAMPLING);
    let check = sift_error_check(&sift_records, config, &mut sampling)?;
    for &round in &check.sampled {
        records[round as usize].used_for = Usage::SiftCheck;
    }
    result.sift_error_rate = Some(check.mismatch_rate);
    result.sift_check_histogram = Some(check.histogram);
    result.sift_check_tv_distance = Some(tv_from_uniform(&check.histogram));
    if check.mismatch_rate > config.tau_sift {
        result.status = SessionStatus::AbortedStep6;
        result.records = records;
        return Ok(result);
    }

    // Step 7
    let remaining: Vec<RoundRecord> = sift_records
        .into_iter()
        .filter(|r| records[r.round as usize].used_for != Usage::SiftCheck)
        .collect();
    let key = derive_raw_key(&remaining, config)?;
    for &round in &key.rounds {
        records[round as usize].used_for = Usage::Key;
    }
    result.alice_key = Some(key.alice);
    result.bob_key = Some(key.bob);
    result.records = records;
    Ok(result)
}
