//! Per-round detection statistics: Monte Carlo estimates and the exact
//! branch-enumeration oracle they must converge to.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::stats::{mutual_information_weights, wilson_interval, Interval};
use crate::adversary::{AttackModel, BackwardTap, BasisPolicy, FakeSource};
use crate::error::{Result, SqkdError};
use crate::protocol::{simulate_round, tv_from_uniform, BobAction, BOB_BASIS, CTRL_BASIS};
use crate::quantum::{self, ket, probabilities, KetLabel, PhotonState, ProductBasis};

pub const MIN_DETECTION_ROUNDS: u64 = 100;

/// Born probabilities at or below this are rounding noise on exact zeros.
const BRANCH_CUTOFF: f64 = 1e-15;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DetectionStats {
    pub attack: String,
    pub trials: u64,
    pub ctrl_rounds: u64,
    pub ctrl_detections: u64,
    /// P(Alice's CTRL outcome ≠ S⊗s), 95% Wilson interval.
    pub ctrl_detection_rate: Interval,
    pub sift_rounds: u64,
    pub sift_mismatches: u64,
    /// P(Alice's SIFT outcome ≠ Bob's), 95% Wilson interval.
    pub sift_mismatch_rate: Interval,
    /// Alice's SIFT outcomes over (H b1, H b2, V b1, V b2).
    pub sift_histogram: [u64; 4],
    /// Total variation distance of `sift_histogram` from uniform.
    pub sift_tv_distance: f64,
    /// Fraction of all rounds with a detection event in either mode; any such
    /// round aborts a session run with zero thresholds.
    pub abort_fraction: f64,
}

#[derive(Debug, Clone, Copy, Default)]
struct Tally {
    ctrl: u64,
    ctrl_err: u64,
    sift: u64,
    sift_err: u64,
    hist: [u64; 4],
}

impl Tally {
    fn merge(mut self, other: Tally) -> Tally {
        self.ctrl += other.ctrl;
        self.ctrl_err += other.ctrl_err;
        self.sift += other.sift;
        self.sift_err += other.sift_err;
        for (a, b) in self.hist.iter_mut().zip(other.hist) {
            *a += b;
        }
        self
    }
}

/// Simulates `rounds` independent rounds (not full sessions) and aggregates
/// detection events. Counts are summed, so the result does not depend on how
/// rounds are split across worker threads.
pub fn estimate_detection(attack: &AttackModel, rounds: u64, seed: u64) -> Result<DetectionStats> {
    if rounds < MIN_DETECTION_ROUNDS {
        return Err(SqkdError::TooFewSamples {
            actual: rounds,
            required: MIN_DETECTION_ROUNDS,
        });
    }
    let tally = (0..rounds)
        .into_par_iter()
        .map(|round| {
            let trace = simulate_round(attack, seed, round)?;
            let mut t = Tally::default();
            match trace.bob_action {
                BobAction::Ctrl => {
                    t.ctrl = 1;
                    let ok = trace.alice_outcome.basis() == CTRL_BASIS && trace.alice_outcome.index() == 0;
                    t.ctrl_err = u64::from(!ok);
                }
                BobAction::Sift => {
                    t.sift = 1;
                    t.sift_err = u64::from(trace.bob_outcome != Some(trace.alice_outcome));
                    t.hist[trace.alice_outcome.index() as usize] = 1;
                }
            }
            Ok(t)
        })
        .try_reduce(Tally::default, |a, b| Ok(a.merge(b)))?;

    Ok(DetectionStats {
        attack: attack.label(),
        trials: rounds,
        ctrl_rounds: tally.ctrl,
        ctrl_detections: tally.ctrl_err,
        ctrl_detection_rate: wilson_interval(tally.ctrl_err, tally.ctrl),
        sift_rounds: tally.sift,
        sift_mismatches: tally.sift_err,
        sift_mismatch_rate: wilson_interval(tally.sift_err, tally.sift),
        sift_histogram: tally.hist,
        sift_tv_distance: tv_from_uniform(&tally.hist),
        abort_fraction: (tally.ctrl_err + tally.sift_err) as f64 / rounds as f64,
    })
}

/// Exact per-round probabilities from enumerating every branch.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExactDetection {
    pub attack: String,
    /// P(detection | Bob chose CTRL).
    pub ctrl_detection: f64,
    /// P(Alice ≠ Bob | Bob chose SIFT).
    pub sift_mismatch: f64,
    /// Alice's SIFT outcome distribution over (H b1, H b2, V b1, V b2).
    pub sift_outcome_distribution: [f64; 4],
    pub sift_tv_distance: f64,
    /// P(detection event) over a uniformly random Bob action.
    pub any_detection: f64,
    /// Mutual information (bits) between Eve's guessed key symbol and Bob's,
    /// over SIFT rounds where Alice and Bob agree.
    pub eve_information: f64,
}

/// Born probabilities for the branch tree. Product kets have amplitudes in
/// {0, ±½, ±1/√2, ±1}, so their probabilities are dyadic rationals; values
/// within rounding distance of one snap to it.
fn born(state: &PhotonState, basis: ProductBasis) -> [f64; 4] {
    probabilities(state, basis).map(|p| {
        let q = (p * DYADIC).round() / DYADIC;
        if (q - p).abs() < 1e-12 {
            q
        } else {
            p
        }
    })
}

const DYADIC: f64 = (1u64 << 20) as f64;

struct Branch {
    p: f64,
    state: PhotonState,
    guess: Option<u8>,
}

fn forward_branches(attack: &AttackModel, genuine: &PhotonState) -> Vec<Branch> {
    match attack {
        AttackModel::NoAttack => vec![Branch {
            p: 1.0,
            state: *genuine,
            guess: None,
        }],
        AttackModel::InterceptResend { fake, .. } => match fake {
            FakeSource::Fixed(s) => vec![Branch {
                p: 1.0,
                state: *s,
                guess: None,
            }],
            FakeSource::RandomPerRound(weights) => KetLabel::all()
                .zip(weights)
                .filter(|(_, w)| **w > 0.0)
                .map(|(l, w)| Branch {
                    p: *w,
                    state: ket(l),
                    guess: None,
                })
                .collect(),
        },
        AttackModel::MeasureResend { policy } => {
            let bases: Vec<(f64, ProductBasis)> = match policy {
                BasisPolicy::Fixed(b) => vec![(1.0, *b)],
                BasisPolicy::UniformOverFour => ProductBasis::ALL.iter().map(|b| (0.25, *b)).collect(),
            };
            bases
                .into_iter()
                .flat_map(|(pb, basis)| {
                    let probs = born(genuine, basis);
                    basis
                        .vectors()
                        .into_iter()
                        .zip(probs)
                        .enumerate()
                        .filter(|(_, (_, p))| *p > BRANCH_CUTOFF)
                        .map(move |(i, (state, p))| Branch {
                            p: pb * p,
                            state,
                            guess: (basis == ProductBasis::ZZ).then_some(i as u8),
                        })
                        .collect::<Vec<_>>()
                })
                .collect()
        }
        AttackModel::EntangleMeasure(_) => unreachable!("rejected by caller"),
    }
}

fn backward_branches(attack: &AttackModel, state: &PhotonState) -> Vec<Branch> {
    match attack {
        AttackModel::InterceptResend {
            backward: BackwardTap::MeasureZZ,
            ..
        } => zz_branches(state),
        _ => vec![Branch {
            p: 1.0,
            state: *state,
            guess: None,
        }],
    }
}

fn zz_branches(state: &PhotonState) -> Vec<Branch> {
    ProductBasis::ZZ
        .vectors()
        .into_iter()
        .zip(born(state, ProductBasis::ZZ))
        .enumerate()
        .filter(|(_, (_, p))| *p > BRANCH_CUTOFF)
        .map(|(i, (s, p))| Branch {
            p,
            state: s,
            guess: Some(i as u8),
        })
        .collect()
}

/// Enumerates Eve's random choice × Bob's action × every measurement
/// collapse with exact Born probabilities.
pub fn exact_detection(attack: &AttackModel) -> Result<ExactDetection> {
    if matches!(attack, AttackModel::EntangleMeasure(_)) {
        return Err(SqkdError::UnsupportedAttack("entangle-measure"));
    }
    let genuine = quantum::s_s();
    let forward = forward_branches(attack, &genuine);

    let mut ctrl_detection = 0.0;
    for fb in &forward {
        for bb in backward_branches(attack, &fb.state) {
            let p_err: f64 = born(&bb.state, CTRL_BASIS)[1..].iter().sum();
            ctrl_detection += fb.p * bb.p * p_err;
        }
    }

    let mut sift_mismatch = 0.0;
    let mut distribution = [0.0; 4];
    // rows: Eve guess 0..4 or 4 = none; columns: Bob symbol
    let mut eve_table = vec![vec![0.0; 4]; 5];
    for fb in &forward {
        for bob in zz_branches(&fb.state) {
            let bob_symbol = bob.guess.expect("Zp⊗Zs branch carries its index") as usize;
            for bb in backward_branches(attack, &bob.state) {
                let alice = born(&bb.state, BOB_BASIS);
                for (k, pa) in alice.into_iter().enumerate() {
                    if pa <= BRANCH_CUTOFF {
                        continue;
                    }
                    let w = fb.p * bob.p * bb.p * pa;
                    distribution[k] += w;
                    if k != bob_symbol {
                        sift_mismatch += w;
                    } else {
                        let eve_guess = bb.guess.or(fb.guess);
                        eve_table[eve_guess.map_or(4, usize::from)][bob_symbol] += w;
                    }
                }
            }
        }
    }
    Ok(ExactDetection {
        attack: attack.label(),
        ctrl_detection,
        sift_mismatch,
        sift_outcome_distribution: distribution,
        sift_tv_distance: 0.5 * distribution.iter().map(|p| (p - 0.25).abs()).sum::<f64>(),
        any_detection: 0.5 * (ctrl_detection + sift_mismatch),
        eve_information: mutual_information_weights(&eve_table),
    })
}

/// Randomized attacks that can leave every photon untouched by luck.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EvasionFamily {
    /// Intercept-resend with fakes uniform over the 16 product kets; evades
    /// when every fake happens to be `S⊗s`.
    UniformFake,
    /// Measure-resend with bases uniform over four; evades when every basis
    /// is Xp⊗Xs.
    UniformBasis,
}

impl EvasionFamily {
    pub fn per_round(self) -> f64 {
        match self {
            Self::UniformFake => 1.0 / 16.0,
            Self::UniformBasis => 1.0 / 4.0,
        }
    }
}

/// Probability that the attack leaves all `rounds` photons unchanged:
/// `(1/16)^N` or `(1/4)^N`.
pub fn evasion_probability(family: EvasionFamily, rounds: u64) -> f64 {
    match i32::try_from(rounds) {
        Ok(n) => family.per_round().powi(n),
        Err(_) => 0.0,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quantum::ket_named;

    fn intercept(fake: &str, backward: BackwardTap) -> AttackModel {
        AttackModel::InterceptResend {
            fake: FakeSource::Fixed(ket_named(fake).unwrap()),
            backward,
        }
    }

    fn measure(basis: ProductBasis) -> AttackModel {
        AttackModel::MeasureResend {
            policy: BasisPolicy::Fixed(basis),
        }
    }

    // Frozen values, worked by hand from |⟨S s|ψ⟩|²:
    //   fake H s: |⟨S|H⟩|² = ½, |⟨s|s⟩|² = 1 → CTRL detection ½
    //   Zp⊗Xs measure: collapse to {H,V}⊗s, each with ⟨S s|·⟩² = ½ → ½
    //   Xp⊗Zs: symmetric → ½;  Zp⊗Zs: collapse to a Z⊗Z ket, overlap ¼ → ¾
    //   Xp⊗Xs: undisturbed → 0;  uniform: ¼(0 + ½ + ½ + ¾) = 7/16
    #[test]
    fn exact_ctrl_detection_matches_hand_values() {
        let cases = [
            (AttackModel::NoAttack, 0.0),
            (intercept("H s", BackwardTap::Passthrough), 0.5),
            (intercept("S s", BackwardTap::Passthrough), 0.0),
            (measure(ProductBasis::ZX), 0.5),
            (measure(ProductBasis::XZ), 0.5),
            (measure(ProductBasis::ZZ), 0.75),
            (measure(ProductBasis::XX), 0.0),
            (
                AttackModel::MeasureResend {
                    policy: BasisPolicy::UniformOverFour,
                },
                7.0 / 16.0,
            ),
            (intercept("S s", BackwardTap::MeasureZZ), 0.75),
        ];
        for (attack, expected) in cases {
            let exact = exact_detection(&attack).unwrap();
            assert!((exact.ctrl_detection - expected).abs() < 1e-12, "{}", attack.label());
        }
    }

    #[test]
    fn forward_only_attacks_never_mismatch_in_sift() {
        for attack in [
            intercept("H s", BackwardTap::Passthrough),
            measure(ProductBasis::ZX),
            AttackModel::InterceptResend {
                fake: FakeSource::uniform(),
                backward: BackwardTap::Passthrough,
            },
        ] {
            let exact = exact_detection(&attack).unwrap();
            assert_eq!(exact.sift_mismatch, 0.0, "{}", attack.label());
        }
    }

    #[test]
    fn intercept_h_s_concentrates_sift_outcomes() {
        let exact = exact_detection(&intercept("H s", BackwardTap::Passthrough)).unwrap();
        let d = exact.sift_outcome_distribution;
        assert!((d[0] - 0.5).abs() < 1e-12 && (d[1] - 0.5).abs() < 1e-12);
        assert!(d[2].abs() < 1e-12 && d[3].abs() < 1e-12);
        assert!((exact.sift_tv_distance - 0.5).abs() < 1e-12);
    }

    #[test]
    fn exact_eve_information_values() {
        assert_eq!(exact_detection(&AttackModel::NoAttack).unwrap().eve_information, 0.0);
        let mi = exact_detection(&intercept("S s", BackwardTap::MeasureZZ))
            .unwrap()
            .eve_information;
        assert!((mi - 2.0).abs() < 1e-12);
        // uniform bases: only Zp⊗Zs (prob ¼) names the symbol;
        // I = H(B) − H(B|G) = 2 − ¾·2 = ½
        let mi = exact_detection(&AttackModel::MeasureResend {
            policy: BasisPolicy::UniformOverFour,
        })
        .unwrap()
        .eve_information;
        assert!((mi - 0.5).abs() < 1e-12, "{mi}");
    }

    #[test]
    fn entangle_measure_unsupported() {
        let attack = AttackModel::EntangleMeasure(crate::adversary::EntangleMeasure::identity(2).unwrap());
        assert_eq!(
            exact_detection(&attack).unwrap_err(),
            SqkdError::UnsupportedAttack("entangle-measure")
        );
    }

    #[test]
    fn no_attack_estimates_are_zero() {
        let s = estimate_detection(&AttackModel::NoAttack, 2_000, 1).unwrap();
        assert_eq!(s.ctrl_detections, 0);
        assert_eq!(s.sift_mismatches, 0);
        assert_eq!(s.abort_fraction, 0.0);
        assert_eq!(s.ctrl_rounds + s.sift_rounds, 2_000);
    }

    #[test]
    fn estimate_needs_enough_rounds() {
        assert!(matches!(
            estimate_detection(&AttackModel::NoAttack, 99, 0),
            Err(SqkdError::TooFewSamples { .. })
        ));
    }

    #[test]
    fn evasion_examples() {
        assert_eq!(evasion_probability(EvasionFamily::UniformFake, 1), 1.0 / 16.0);
        assert_eq!(evasion_probability(EvasionFamily::UniformBasis, 3), 1.0 / 64.0);
        assert_eq!(evasion_probability(EvasionFamily::UniformFake, 0), 1.0);
        assert_eq!(evasion_probability(EvasionFamily::UniformBasis, u64::MAX), 0.0);
    }
}
