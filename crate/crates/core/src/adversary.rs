//! Eavesdropper models tapping the Alice→Bob and Bob→Alice channels, and the
//! exact zero-error checker for entangle-measure attacks.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::analysis::stats::mutual_information;
use crate::error::{Result, SqkdError};
use crate::linalg::{self, CMatrix, C64, ONE, ZERO};
use crate::protocol::{ChannelState, SessionResult};
use crate::quantum::{
    self, ket, tensor, trace_distance, KetLabel, Outcome, PhotonState, ProbeConditional, ProductBasis,
    NUMERIC_TOL,
};
use crate::rng::RandomSource;

/// Largest supported probe dimension.
pub const MAX_PROBE_DIM: usize = 16;
pub const DEFAULT_PROBE_DIM: usize = 4;

/// Errors below this count as zero in Theorem-1 verdicts.
pub const ZERO_ERROR_TOL: f64 = 1e-10;
/// Probe states closer than this count as identical.
pub const SAME_PROBE_TOL: f64 = 1e-9;

/// What Eve sends Bob in place of the genuine photon.
#[derive(Debug, Clone, PartialEq)]
pub enum FakeSource {
    Fixed(PhotonState),
    /// Per-round draw over the 16 product kets in [`KetLabel::all`] order.
    RandomPerRound([f64; 16]),
}

impl FakeSource {
    pub fn uniform() -> Self {
        Self::RandomPerRound([1.0 / 16.0; 16])
    }

    pub fn weighted(weights: [f64; 16]) -> Result<Self> {
        if weights.iter().any(|w| !w.is_finite() || *w < 0.0) {
            return Err(SqkdError::InvalidConfig("fake weights must be finite and non-negative".into()));
        }
        let total: f64 = weights.iter().sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(SqkdError::InvalidConfig(format!("fake weights sum to {total}, not 1")));
        }
        Ok(Self::RandomPerRound(weights))
    }
}

/// Intercept-resend behavior on the return channel.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BackwardTap {
    #[default]
    Passthrough,
    /// Measure the returning photon in Zp⊗Zs and resend the result.
    #[serde(rename = "measure_zz")]
    MeasureZZ,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BasisPolicy {
    Fixed(ProductBasis),
    UniformOverFour,
}

/// Joint unitaries on photon ⊗ probe: `U_E` on the way to Bob, `U_F` on the
/// way back. Validated at construction.
#[derive(Debug, Clone, PartialEq)]
pub struct EntangleMeasure {
    epsilon: Vec<C64>,
    u_e: CMatrix,
    u_f: CMatrix,
}

impl EntangleMeasure {
    pub fn new(epsilon: Vec<C64>, u_e: CMatrix, u_f: CMatrix) -> Result<Self> {
        let d = epsilon.len();
        if d == 0 || d > MAX_PROBE_DIM {
            return Err(SqkdError::InvalidConfig(format!(
                "probe dimension {d} outside 1..={MAX_PROBE_DIM}"
            )));
        }
        if !linalg::all_finite(&epsilon) {
            return Err(SqkdError::NonFinite);
        }
        let norm_sqr = linalg::norm_sqr(&epsilon);
        if (norm_sqr - 1.0).abs() > NUMERIC_TOL {
            return Err(SqkdError::NotNormalized { norm_sqr });
        }
        for u in [&u_e, &u_f] {
            if u.dim() != 4 * d {
                return Err(SqkdError::DimensionMismatch {
                    expected: 4 * d,
                    actual: u.dim(),
                });
            }
            u.check_unitary(NUMERIC_TOL)?;
        }
        Ok(Self { epsilon, u_e, u_f })
    }

    pub fn dim_probe(&self) -> usize {
        self.epsilon.len()
    }

    pub fn epsilon(&self) -> &[C64] {
        &self.epsilon
    }

    pub fn u_e(&self) -> &CMatrix {
        &self.u_e
    }

    pub fn u_f(&self) -> &CMatrix {
        &self.u_f
    }

    /// `U_E = U_F = I`, probe `e_0`.
    pub fn identity(d: usize) -> Result<Self> {
        Self::new(basis_vector(d, 0)?, CMatrix::identity(4 * d), CMatrix::identity(4 * d))
    }

    /// `U_E = Σ_xy |xy⟩⟨xy| ⊗ W_xy` with `W_xy` the cyclic shift by `xy`, so
    /// the probe ends in `e_xy`, one orthogonal marker per Zp⊗Zs ket.
    /// `U_F = I`. Needs `d ≥ 4`.
    pub fn controlled_orthogonal(d: usize) -> Result<Self> {
        if d < 4 {
            return Err(SqkdError::InvalidConfig(format!(
                "controlled-orthogonal attack needs probe dimension ≥ 4, got {d}"
            )));
        }
        let shifts: Vec<CMatrix> = (0..4).map(|k| cyclic_shift(d, k)).collect();
        Self::new(
            basis_vector(d, 0)?,
            CMatrix::block_diagonal(&shifts),
            CMatrix::identity(4 * d),
        )
    }
}

fn basis_vector(d: usize, i: usize) -> Result<Vec<C64>> {
    if d == 0 || i >= d {
        return Err(SqkdError::InvalidConfig(format!("probe dimension {d} too small")));
    }
    let mut v = vec![ZERO; d];
    v[i] = ONE;
    Ok(v)
}

fn cyclic_shift(d: usize, k: usize) -> CMatrix {
    let mut m = CMatrix::zeros(d);
    for j in 0..d {
        m.set((j + k) % d, j, ONE);
    }
    m
}

#[derive(Debug, Clone, PartialEq)]
pub enum AttackModel {
    NoAttack,
    InterceptResend { fake: FakeSource, backward: BackwardTap },
    MeasureResend { policy: BasisPolicy },
    EntangleMeasure(EntangleMeasure),
}

impl AttackModel {
    pub fn kind(&self) -> Option<AttackKind> {
        match self {
            Self::NoAttack => None,
            Self::InterceptResend { .. } => Some(AttackKind::InterceptResend),
            Self::MeasureResend { .. } => Some(AttackKind::MeasureResend),
            Self::EntangleMeasure(_) => Some(AttackKind::EntangleMeasure),
        }
    }

    /// Short human-readable description used in reports.
    pub fn label(&self) -> String {
        match self {
            Self::NoAttack => "no-attack".into(),
            Self::InterceptResend { fake, backward } => {
                let fake = match fake {
                    FakeSource::Fixed(p) => match KetLabel::all().find(|l| ket(*l).fidelity(p) > 1.0 - 1e-12) {
                        Some(l) => format!("fixed {l}"),
                        None => "fixed custom".into(),
                    },
                    FakeSource::RandomPerRound(w) if w.iter().all(|x| *x == 1.0 / 16.0) => {
                        "uniform over 16".into()
                    }
                    FakeSource::RandomPerRound(_) => "weighted".into(),
                };
                let back = match backward {
                    BackwardTap::Passthrough => "passthrough",
                    BackwardTap::MeasureZZ => "measure ZpZs",
                };
                format!("intercept-resend({fake}; backward {back})")
            }
            Self::MeasureResend { policy } => match policy {
                BasisPolicy::Fixed(b) => format!("measure-resend({b})"),
                BasisPolicy::UniformOverFour => "measure-resend(uniform over four)".into(),
            },
            Self::EntangleMeasure(e) => format!("entangle-measure(d={})", e.dim_probe()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AttackKind {
    InterceptResend,
    MeasureResend,
    EntangleMeasure,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    Forward,
    Backward,
}

/// Eve's classical transcript for one tap.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct EveRecord {
    pub round: u64,
    pub kind: AttackKind,
    pub direction: Direction,
    pub observed: Option<Outcome>,
    /// Present only for Zp⊗Zs observations, which name a key symbol.
    pub guessed_bits: Option<u8>,
}

impl EveRecord {
    fn new(round: u64, kind: AttackKind, direction: Direction, observed: Option<Outcome>) -> Self {
        Self {
            round,
            kind,
            direction,
            observed,
            guessed_bits: observed.and_then(|o| o.key_bits()),
        }
    }
}

impl fmt::Display for EveRecord {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "round {} {:?} {:?}", self.round, self.kind, self.direction)?;
        if let Some(o) = self.observed {
            write!(f, " saw {o}")?;
        }
        Ok(())
    }
}

/// Eve on the Alice→Bob channel.
pub fn tap_forward(
    attack: &AttackModel,
    state: &PhotonState,
    round: u64,
    rng: &mut RandomSource,
) -> Result<(ChannelState, Option<EveRecord>)> {
    Ok(match attack {
        AttackModel::NoAttack => (ChannelState::Photon(*state), None),
        AttackModel::InterceptResend { fake, .. } => {
            let sent = match fake {
                FakeSource::Fixed(p) => *p,
                FakeSource::RandomPerRound(weights) => {
                    let i = rng.categorical(weights);
                    ket(KetLabel::all().nth(i).expect("16 product kets"))
                }
            };
            let rec = EveRecord::new(round, AttackKind::InterceptResend, Direction::Forward, None);
            (ChannelState::Photon(sent), Some(rec))
        }
        AttackModel::MeasureResend { policy } => {
            let basis = match policy {
                BasisPolicy::Fixed(b) => *b,
                BasisPolicy::UniformOverFour => ProductBasis::ALL[rng.index(4)],
            };
            let (outcome, collapsed) = quantum::measure(state, basis, rng);
            let rec = EveRecord::new(round, AttackKind::MeasureResend, Direction::Forward, Some(outcome));
            (ChannelState::Photon(collapsed), Some(rec))
        }
        AttackModel::EntangleMeasure(e) => {
            let joint = tensor(state, &e.epsilon)?.apply_checked(&e.u_e);
            let rec = EveRecord::new(round, AttackKind::EntangleMeasure, Direction::Forward, None);
            (ChannelState::Entangled(joint), Some(rec))
        }
    })
}

/// Eve on the Bob→Alice channel. Bob's action has already been applied to
/// `from_bob` (for an entangled photon, to its photon subsystem).
pub fn tap_backward(
    attack: &AttackModel,
    from_bob: ChannelState,
    round: u64,
    rng: &mut RandomSource,
) -> Result<(ChannelState, Option<EveRecord>)> {
    match (attack, from_bob) {
        (
            AttackModel::InterceptResend {
                backward: BackwardTap::MeasureZZ,
                ..
            },
            ChannelState::Photon(p),
        ) => {
            let (outcome, collapsed) = quantum::measure(&p, ProductBasis::ZZ, rng);
            let rec = EveRecord::new(round, AttackKind::InterceptResend, Direction::Backward, Some(outcome));
            Ok((ChannelState::Photon(collapsed), Some(rec)))
        }
        (AttackModel::EntangleMeasure(e), ChannelState::Entangled(joint)) => {
            let joint = joint.apply_checked(&e.u_f);
            let rec = EveRecord::new(round, AttackKind::EntangleMeasure, Direction::Backward, None);
            Ok((ChannelState::Entangled(joint), Some(rec)))
        }
        (AttackModel::EntangleMeasure(_), ChannelState::Photon(_)) => Err(SqkdError::Contract(
            "entangle-measure backward tap without a retained joint state".into(),
        )),
        (_, ChannelState::Entangled(_)) => Err(SqkdError::Contract(
            "entangled photon on the channel without an entangle-measure attack".into(),
        )),
        (_, photon) => Ok((photon, None)),
    }
}

/// Exact Theorem-1 quantities for an entangle-measure attack: the error it
/// induces in each check, and how much Eve's final probe depends on Bob's
/// SIFT result.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Theorem1Report {
    pub dim_probe: usize,
    pub error_ctrl: f64,
    pub error_sift: f64,
    /// Per Zp⊗Zs ket `xy`: probability of Bob seeing `xy`, and Eve's probe
    /// after `U_F` given that Alice also sees `xy`.
    pub probe_conditionals: Vec<ProbeConditional>,
    /// `(i, j, distance)` for every pair of present probe conditionals.
    pub pairwise_distances: Vec<(usize, usize, f64)>,
    pub max_pairwise_trace_distance: f64,
    /// The shared probe state when all conditionals coincide.
    pub common_zeta: Option<Vec<C64>>,
    pub verdict: Theorem1Verdict,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Theorem1Verdict {
    /// Zero error and probe independent of Bob's result.
    Pass,
    /// Zero error yet the probe depends on Bob's result.
    Fail,
    /// The attack induces error, so the implication does not apply.
    NotApplicable,
}

impl fmt::Display for Theorem1Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Pass => "PASS",
            Self::Fail => "FAIL",
            Self::NotApplicable => "NOT APPLICABLE",
        })
    }
}

/// Evaluates an entangle-measure attack without sampling.
///
/// CTRL branch: `U_F U_E (|S s⟩⊗|ε⟩)`, error = 1 − P(Alice sees `S s`).
/// SIFT branch: write `U_E(|S s⟩⊗|ε⟩) = Σ_xy |xy⟩|ε_xy⟩`; for each `xy` Bob
/// resends `|xy⟩` with Eve holding `ε_xy/‖ε_xy‖`, then `U_F` acts and
/// Alice measures in Zp⊗Zs.
pub fn theorem1_check(attack: &EntangleMeasure) -> Theorem1Report {
    let start = tensor(&quantum::s_s(), &attack.epsilon).expect("epsilon validated at construction");
    let after_forward = start.apply_checked(&attack.u_e);

    let ctrl_final = after_forward.apply_checked(&attack.u_f);
    let p_ok = linalg::norm_sqr(&ctrl_final.probe_component(&quantum::s_s()));
    let error_ctrl = (1.0 - p_ok).max(0.0);

    let zz = ProductBasis::ZZ.vectors();
    let mut error_sift = 0.0;
    let mut probe_conditionals = Vec::with_capacity(4);
    for (xy, branch) in after_forward.conditional_probe_states(ProductBasis::ZZ).into_iter().enumerate() {
        let Some(probe) = branch.probe else {
            probe_conditionals.push(ProbeConditional {
                probability: branch.probability,
                probe: None,
            });
            continue;
        };
        let returned = tensor(&zz[xy], &probe)
            .expect("normalized probe")
            .apply_checked(&attack.u_f);
        let alice = returned.conditional_probe_states(ProductBasis::ZZ);
        error_sift += branch.probability * (1.0 - alice[xy].probability).max(0.0);
        probe_conditionals.push(ProbeConditional {
            probability: branch.probability,
            probe: alice[xy].probe.clone(),
        });
    }

    let mut pairwise_distances = Vec::new();
    let mut max_distance: f64 = 0.0;
    for i in 0..4 {
        for j in i + 1..4 {
            if let (Some(a), Some(b)) = (&probe_conditionals[i].probe, &probe_conditionals[j].probe) {
                let d = trace_distance(a, b).expect("same dimension, unit norm");
                max_distance = max_distance.max(d);
                pairwise_distances.push((i, j, d));
            }
        }
    }
    let common_zeta = if max_distance < SAME_PROBE_TOL {
        probe_conditionals.iter().find_map(|c| c.probe.clone())
    } else {
        None
    };
    let zero_error = error_ctrl < ZERO_ERROR_TOL && error_sift < ZERO_ERROR_TOL;
    let verdict = match (zero_error, max_distance < SAME_PROBE_TOL) {
        (false, _) => Theorem1Verdict::NotApplicable,
        (true, true) => Theorem1Verdict::Pass,
        (true, false) => Theorem1Verdict::Fail,
    };
    Theorem1Report {
        dim_probe: attack.dim_probe(),
        error_ctrl,
        error_sift,
        probe_conditionals,
        pairwise_distances,
        max_pairwise_trace_distance: max_distance,
        common_zeta,
        verdict,
    }
}

/// A zero-error attack: `U_E = I₄⊗W`, `U_F = I₄⊗W′` with `W`, `W′` Haar-random
/// on the probe and a random initial probe.
pub fn sample_no_error_attack(d: usize, rng: &mut RandomSource) -> Result<EntangleMeasure> {
    if d == 0 || d > MAX_PROBE_DIM {
        return Err(SqkdError::InvalidConfig(format!(
            "probe dimension {d} outside 1..={MAX_PROBE_DIM}"
        )));
    }
    let w = CMatrix::haar_unitary(d, rng);
    let w_back = CMatrix::haar_unitary(d, rng);
    let epsilon = linalg::random_unit_vector(d, rng);
    let id4 = CMatrix::identity(4);
    EntangleMeasure::new(epsilon, id4.kron(&w), id4.kron(&w_back))
}

/// Empirical mutual information (bits per key photon) between Eve's guessed
/// symbol and Bob's 2-bit key symbol over the session's key rounds.
///
/// Eve's guess for a round is her backward-tap guess if she has one, else her
/// forward-tap guess; rounds without a guess count as a separate "no guess"
/// symbol. Returns 0 when Eve kept no records or the session has no key.
pub fn eve_information(result: &SessionResult) -> f64 {
    if result.eve_records.is_empty() {
        return 0.0;
    }
    let mut guess_by_round = std::collections::HashMap::new();
    for rec in &result.eve_records {
        if let Some(g) = rec.guessed_bits {
            let entry = guess_by_round.entry(rec.round).or_insert((None, None));
            match rec.direction {
                Direction::Forward => entry.0 = Some(g),
                Direction::Backward => entry.1 = Some(g),
            }
        }
    }
    // symbols: 0..4 key values, 4 = no guess
    let mut table = [[0u64; 4]; 5];
    for r in result.key_rounds() {
        let Some(bob) = r.bob_outcome.and_then(|o| o.key_bits()) else {
            continue;
        };
        let guess = guess_by_round
            .get(&r.round)
            .and_then(|(fwd, back)| back.or(*fwd))
            .map_or(4, usize::from);
        table[guess][bob as usize] += 1;
    }
    let rows: Vec<&[u64]> = table.iter().map(|r| r.as_slice()).collect();
    mutual_information(&rows)
}
