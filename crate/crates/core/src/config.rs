//! Serde forms of session and attack configuration.
//!
//! A config document has two keys, `session` and `attack`. The attack is
//! either a preset name string or an object tagged by `kind`:
//!
//! ```json
//! { "session": { "L": 64, "delta": 0.25, "seed": 7 },
//!   "attack": { "kind": "intercept_resend", "fake": { "fixed": "Hs" }, "backward": "passthrough" } }
//! ```
//!
//! Complex numbers are `[re, im]` pairs; matrices are arrays of rows.

use std::collections::BTreeMap;
use std::fmt;

use serde::de::{self, MapAccess, Visitor};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::adversary::{
    sample_no_error_attack, AttackModel, BackwardTap, BasisPolicy, EntangleMeasure, FakeSource, DEFAULT_PROBE_DIM,
};
use crate::analysis::baseline::{BaselineAttack, QubitBasis, QubitBasisPolicy, QubitLabel};
use crate::error::{Result, SqkdError};
use crate::linalg::{CMatrix, C64};
use crate::protocol::SessionConfig;
use crate::quantum::{ket, KetLabel, PhotonState, ProductBasis};
use crate::rng::{RandomSource, LANE_ATTACK_SETUP};

pub type Complex = [f64; 2];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigDocument<A> {
    pub session: SessionConfig,
    pub attack: A,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FakeSpec {
    Fixed(KetLabel),
    Amplitudes([Complex; 4]),
    Uniform,
    /// Per-ket weights; missing kets weigh 0.
    Weighted(BTreeMap<String, f64>),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BasisSpec {
    Fixed(ProductBasis),
    Uniform,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EntanglePreset {
    Identity,
    ProbeOnlyRandom,
    ControlledOrthogonal,
}

fn default_d() -> usize {
    DEFAULT_PROBE_DIM
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum AttackObject {
    None,
    InterceptResend {
        fake: FakeSpec,
        #[serde(default)]
        backward: BackwardTap,
    },
    MeasureResend {
        basis: BasisSpec,
    },
    EntangleMeasure {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        preset: Option<EntanglePreset>,
        #[serde(default = "default_d")]
        d: usize,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        epsilon: Option<Vec<Complex>>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        u_e: Option<Vec<Vec<Complex>>>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        u_f: Option<Vec<Vec<Complex>>>,
    },
}

/// Attack configuration: a preset name or a tagged object.
#[derive(Debug, Clone, PartialEq)]
pub enum AttackSpec {
    Preset(String),
    Object(AttackObject),
}

pub const ATTACK_PRESETS: [&str; 4] = ["none", "identity", "probe-only-random", "controlled-orthogonal"];

impl Serialize for AttackSpec {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            Self::Preset(name) => s.serialize_str(name),
            Self::Object(obj) => obj.serialize(s),
        }
    }
}

impl<'de> Deserialize<'de> for AttackSpec {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        struct V;
        impl<'de> Visitor<'de> for V {
            type Value = AttackSpec;

            fn expecting(&self, f: &mut fmt::Formatter) -> fmt::Result {
                f.write_str("an attack preset name or an object with a `kind` field")
            }

            fn visit_str<E: de::Error>(self, v: &str) -> std::result::Result<AttackSpec, E> {
                if ATTACK_PRESETS.contains(&v) {
                    Ok(AttackSpec::Preset(v.to_string()))
                } else {
                    Err(E::invalid_value(de::Unexpected::Str(v), &"one of none, identity, probe-only-random, controlled-orthogonal"))
                }
            }

            fn visit_map<M: MapAccess<'de>>(self, map: M) -> std::result::Result<AttackSpec, M::Error> {
                AttackObject::deserialize(de::value::MapAccessDeserializer::new(map)).map(AttackSpec::Object)
            }
        }
        d.deserialize_any(V)
    }
}

fn complex(c: &Complex) -> C64 {
    C64::new(c[0], c[1])
}

fn matrix(rows: &[Vec<Complex>], name: &str) -> Result<CMatrix> {
    CMatrix::from_rows(rows.iter().map(|r| r.iter().map(complex).collect()).collect())
        .map_err(|e| SqkdError::InvalidConfig(format!("{name}: {e}")))
}

impl FakeSpec {
    pub fn resolve(&self) -> Result<FakeSource> {
        match self {
            Self::Fixed(label) => Ok(FakeSource::Fixed(ket(*label))),
            Self::Amplitudes(a) => Ok(FakeSource::Fixed(PhotonState::new(a.map(|c| complex(&c)))?)),
            Self::Uniform => Ok(FakeSource::uniform()),
            Self::Weighted(map) => {
                let mut weights = [0.0; 16];
                for (name, w) in map {
                    let label: KetLabel = name.parse()?;
                    let i = KetLabel::all()
                        .position(|l| l == label)
                        .ok_or_else(|| SqkdError::UnknownLabel(name.clone()))?;
                    weights[i] += *w;
                }
                FakeSource::weighted(weights)
            }
        }
    }
}

impl AttackSpec {
    /// Builds the attack model. Random presets draw from the session's
    /// attack-setup lane, so the same seed gives the same attack.
    pub fn resolve(&self, seed: u64) -> Result<AttackModel> {
        match self {
            Self::Preset(name) => {
                let obj = match name.as_str() {
                    "none" => AttackObject::None,
                    other => AttackObject::EntangleMeasure {
                        preset: Some(match other {
                            "identity" => EntanglePreset::Identity,
                            "probe-only-random" => EntanglePreset::ProbeOnlyRandom,
                            "controlled-orthogonal" => EntanglePreset::ControlledOrthogonal,
                            _ => return Err(SqkdError::InvalidConfig(format!("unknown attack preset `{other}`"))),
                        }),
                        d: DEFAULT_PROBE_DIM,
                        epsilon: None,
                        u_e: None,
                        u_f: None,
                    },
                };
                obj.resolve(seed)
            }
            Self::Object(obj) => obj.resolve(seed),
        }
    }
}

impl AttackObject {
    pub fn resolve(&self, seed: u64) -> Result<AttackModel> {
        match self {
            Self::None => Ok(AttackModel::NoAttack),
            Self::InterceptResend { fake, backward } => Ok(AttackModel::InterceptResend {
                fake: fake.resolve()?,
                backward: *backward,
            }),
            Self::MeasureResend { basis } => Ok(AttackModel::MeasureResend {
                policy: match basis {
                    BasisSpec::Fixed(b) => BasisPolicy::Fixed(*b),
                    BasisSpec::Uniform => BasisPolicy::UniformOverFour,
                },
            }),
            Self::EntangleMeasure {
                preset,
                d,
                epsilon,
                u_e,
                u_f,
            } => {
                let explicit = epsilon.is_some() || u_e.is_some() || u_f.is_some();
                let attack = match preset {
                    Some(_) if explicit => {
                        return Err(SqkdError::InvalidConfig(
                            "entangle_measure takes either `preset` or explicit `epsilon`/`u_e`/`u_f`, not both".into(),
                        ))
                    }
                    Some(EntanglePreset::Identity) => EntangleMeasure::identity(*d)?,
                    Some(EntanglePreset::ControlledOrthogonal) => EntangleMeasure::controlled_orthogonal(*d)?,
                    Some(EntanglePreset::ProbeOnlyRandom) => {
                        let mut rng = RandomSource::new(seed, LANE_ATTACK_SETUP);
                        sample_no_error_attack(*d, &mut rng)?
                    }
                    None => {
                        let eps: Vec<C64> = match epsilon {
                            Some(e) => e.iter().map(complex).collect(),
                            None => {
                                let mut e = vec![C64::new(0.0, 0.0); *d];
                                if let Some(first) = e.first_mut() {
                                    *first = C64::new(1.0, 0.0);
                                }
                                e
                            }
                        };
                        let dim = 4 * eps.len();
                        let u_e = match u_e {
                            Some(rows) => matrix(rows, "u_e")?,
                            None => CMatrix::identity(dim),
                        };
                        let u_f = match u_f {
                            Some(rows) => matrix(rows, "u_f")?,
                            None => CMatrix::identity(dim),
                        };
                        EntangleMeasure::new(eps, u_e, u_f)?
                    }
                };
                Ok(AttackModel::EntangleMeasure(attack))
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum QubitBasisSpec {
    Fixed(QubitBasis),
    Uniform,
}

/// Attack forms accepted by the one-DOF baseline. The string `"none"` is
/// accepted as well.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum BaselineAttackObject {
    None,
    InterceptResend { fake: QubitLabel },
    MeasureResend { basis: QubitBasisSpec },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BaselineAttackSpec(pub BaselineAttackObject);

impl Serialize for BaselineAttackSpec {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self.0 {
            BaselineAttackObject::None => s.serialize_str("none"),
            obj => obj.serialize(s),
        }
    }
}

impl<'de> Deserialize<'de> for BaselineAttackSpec {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        struct V;
        impl<'de> Visitor<'de> for V {
            type Value = BaselineAttackSpec;

            fn expecting(&self, f: &mut fmt::Formatter) -> fmt::Result {
                f.write_str("\"none\" or an object with a `kind` field")
            }

            fn visit_str<E: de::Error>(self, v: &str) -> std::result::Result<BaselineAttackSpec, E> {
                match v {
                    "none" => Ok(BaselineAttackSpec(BaselineAttackObject::None)),
                    _ => Err(E::invalid_value(de::Unexpected::Str(v), &"\"none\"")),
                }
            }

            fn visit_map<M: MapAccess<'de>>(self, map: M) -> std::result::Result<BaselineAttackSpec, M::Error> {
                BaselineAttackObject::deserialize(de::value::MapAccessDeserializer::new(map)).map(BaselineAttackSpec)
            }
        }
        d.deserialize_any(V)
    }
}

impl BaselineAttackSpec {
    pub fn resolve(&self) -> BaselineAttack {
        use BaselineAttackObject as B;
        match self.0 {
            B::None => BaselineAttack::NoAttack,
            B::InterceptResend { fake } => BaselineAttack::InterceptResend { fake },
            B::MeasureResend { basis } => BaselineAttack::MeasureResend {
                policy: match basis {
                    QubitBasisSpec::Fixed(b) => QubitBasisPolicy::Fixed(b),
                    QubitBasisSpec::Uniform => QubitBasisPolicy::Uniform,
                },
            },
        }
    }
}
