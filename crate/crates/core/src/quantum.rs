//! Single photons carrying one qubit in polarization and one in spatial mode.
//!
//! Amplitude vectors are always ordered `(H b1, H b2, V b1, V b2)`: index
//! `2 * pol + spatial` with `H = 0, V = 1` and `b1 = 0, b2 = 1`. Joint
//! photon ⊗ probe vectors are photon-major, `index = photon * d + probe`.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Result, SqkdError};
use crate::linalg::{self, CMatrix, C64, ONE, ZERO};
use crate::rng::RandomSource;

pub type Amplitude = C64;

/// Tolerance for algebraic identities on exactly constructed states.
pub const ALGEBRAIC_TOL: f64 = 1e-12;
/// Tolerance for norms and unitarity after matrix products.
pub const NUMERIC_TOL: f64 = 1e-10;
/// Outcomes and probe components below this probability are treated as
/// exact zeros (rounding noise).
pub const PROBE_CUTOFF: f64 = 1e-14;

const FRAC_1_SQRT_2: f64 = std::f64::consts::FRAC_1_SQRT_2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Polarization {
    H,
    V,
    /// `(|H⟩ + |V⟩)/√2`
    S,
    /// `(|H⟩ − |V⟩)/√2`
    A,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Spatial {
    B1,
    B2,
    /// `|s⟩ = (|b1⟩ + |b2⟩)/√2`
    Plus,
    /// `|a⟩ = (|b1⟩ − |b2⟩)/√2`
    Minus,
}

impl Polarization {
    pub const ALL: [Polarization; 4] = [Self::H, Self::V, Self::S, Self::A];

    fn vector(self) -> [C64; 2] {
        let h = C64::new(FRAC_1_SQRT_2, 0.0);
        match self {
            Self::H => [ONE, ZERO],
            Self::V => [ZERO, ONE],
            Self::S => [h, h],
            Self::A => [h, -h],
        }
    }

    fn symbol(self) -> &'static str {
        match self {
            Self::H => "H",
            Self::V => "V",
            Self::S => "S",
            Self::A => "A",
        }
    }

    fn basis(self) -> LocalBasis {
        match self {
            Self::H | Self::V => LocalBasis::Z,
            Self::S | Self::A => LocalBasis::X,
        }
    }
}

impl Spatial {
    pub const ALL: [Spatial; 4] = [Self::B1, Self::B2, Self::Plus, Self::Minus];

    fn vector(self) -> [C64; 2] {
        let h = C64::new(FRAC_1_SQRT_2, 0.0);
        match self {
            Self::B1 => [ONE, ZERO],
            Self::B2 => [ZERO, ONE],
            Self::Plus => [h, h],
            Self::Minus => [h, -h],
        }
    }

    fn symbol(self) -> &'static str {
        match self {
            Self::B1 => "b1",
            Self::B2 => "b2",
            Self::Plus => "s",
            Self::Minus => "a",
        }
    }

    fn basis(self) -> LocalBasis {
        match self {
            Self::B1 | Self::B2 => LocalBasis::Z,
            Self::Plus | Self::Minus => LocalBasis::X,
        }
    }
}

/// Name of one of the 16 product kets, e.g. `H⊗b1` or `S⊗s`.
///
/// Parses `H⊗b1`, `H b1`, `H*b1` and `Hb1`; displays as the compact `Hb1`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct KetLabel {
    pub pol: Polarization,
    pub spa: Spatial,
}

impl KetLabel {
    pub const fn new(pol: Polarization, spa: Spatial) -> Self {
        Self { pol, spa }
    }

    /// All 16 product kets, polarization-major.
    pub fn all() -> impl Iterator<Item = KetLabel> {
        Polarization::ALL
            .into_iter()
            .flat_map(|p| Spatial::ALL.into_iter().map(move |s| KetLabel::new(p, s)))
    }

    /// The unique product basis this ket belongs to, with its index there.
    pub fn in_basis(self) -> (ProductBasis, u8) {
        let basis = ProductBasis::new(self.pol.basis(), self.spa.basis());
        let pol_bit = matches!(self.pol, Polarization::V | Polarization::A) as u8;
        let spa_bit = matches!(self.spa, Spatial::B2 | Spatial::Minus) as u8;
        (basis, 2 * pol_bit + spa_bit)
    }
}

impl fmt::Display for KetLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}{}", self.pol.symbol(), self.spa.symbol())
    }
}

impl FromStr for KetLabel {
    type Err = SqkdError;

    fn from_str(s: &str) -> Result<Self> {
        let compact: String = s
            .trim()
            .chars()
            .filter(|c| !matches!(c, '⊗' | '*' | ' ' | '|' | '⟩' | '>'))
            .collect();
        let err = || SqkdError::UnknownLabel(s.to_string());
        let mut chars = compact.chars();
        let pol = match chars.next().ok_or_else(err)? {
            'H' => Polarization::H,
            'V' => Polarization::V,
            'S' => Polarization::S,
            'A' => Polarization::A,
            _ => return Err(err()),
        };
        let spa = match chars.as_str() {
            "b1" => Spatial::B1,
            "b2" => Spatial::B2,
            "s" => Spatial::Plus,
            "a" => Spatial::Minus,
            _ => return Err(err()),
        };
        Ok(KetLabel::new(pol, spa))
    }
}

impl Serialize for KetLabel {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for KetLabel {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// Pure state of one photon in both degrees of freedom. Always unit-norm.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhotonState {
    amps: [Amplitude; 4],
}

impl PhotonState {
    /// Validates finiteness and unit norm (within [`NUMERIC_TOL`]).
    pub fn new(amps: [Amplitude; 4]) -> Result<Self> {
        if !linalg::all_finite(&amps) {
            return Err(SqkdError::NonFinite);
        }
        let norm_sqr = linalg::norm_sqr(&amps);
        if (norm_sqr - 1.0).abs() > NUMERIC_TOL {
            return Err(SqkdError::NotNormalized { norm_sqr });
        }
        Ok(Self { amps })
    }

    /// Polarization ⊗ spatial product of two unit qubit states.
    pub fn product(pol: [C64; 2], spa: [C64; 2]) -> Result<Self> {
        Self::new([pol[0] * spa[0], pol[0] * spa[1], pol[1] * spa[0], pol[1] * spa[1]])
    }

    pub fn amplitudes(&self) -> &[Amplitude; 4] {
        &self.amps
    }

    /// `⟨self|other⟩`
    pub fn inner(&self, other: &PhotonState) -> C64 {
        linalg::inner(&self.amps, &other.amps)
    }

    /// `|⟨self|other⟩|²`; 1 iff equal up to global phase.
    pub fn fidelity(&self, other: &PhotonState) -> f64 {
        self.inner(other).norm_sqr()
    }

    /// Amplitudes arranged as a 2×2 matrix, rows = polarization.
    pub fn amplitude_matrix(&self) -> [[C64; 2]; 2] {
        [[self.amps[0], self.amps[1]], [self.amps[2], self.amps[3]]]
    }

    /// Separable iff the 2×2 amplitude matrix has zero determinant.
    pub fn is_separable(&self) -> bool {
        let m = self.amplitude_matrix();
        (m[0][0] * m[1][1] - m[0][1] * m[1][0]).norm() < ALGEBRAIC_TOL
    }
}

/// Named product ket, e.g. `ket("S⊗s".parse()?)`.
pub fn ket(label: KetLabel) -> PhotonState {
    let pol = label.pol.vector();
    let spa = label.spa.vector();
    PhotonState {
        amps: [pol[0] * spa[0], pol[0] * spa[1], pol[1] * spa[0], pol[1] * spa[1]],
    }
}

/// Parses a label and returns its ket.
pub fn ket_named(label: &str) -> Result<PhotonState> {
    Ok(ket(label.parse()?))
}

/// The genuine protocol state `|S⟩⊗|s⟩`.
pub fn s_s() -> PhotonState {
    ket(KetLabel::new(Polarization::S, Spatial::Plus))
}

/// Single degree-of-freedom basis: Z = {first, second}, X = {+, −}.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum LocalBasis {
    Z,
    X,
}

/// One of the four product measurement bases.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ProductBasis {
    pub pol: LocalBasis,
    pub spa: LocalBasis,
}

impl ProductBasis {
    pub const ZZ: Self = Self::new(LocalBasis::Z, LocalBasis::Z);
    pub const ZX: Self = Self::new(LocalBasis::Z, LocalBasis::X);
    pub const XZ: Self = Self::new(LocalBasis::X, LocalBasis::Z);
    pub const XX: Self = Self::new(LocalBasis::X, LocalBasis::X);
    pub const ALL: [Self; 4] = [Self::ZZ, Self::ZX, Self::XZ, Self::XX];

    pub const fn new(pol: LocalBasis, spa: LocalBasis) -> Self {
        Self { pol, spa }
    }

    /// Labels in the fixed order `(pol0⊗spa0, pol0⊗spa1, pol1⊗spa0, pol1⊗spa1)`
    /// where `pol0 ∈ {H, S}` and `spa0 ∈ {b1, s}`.
    pub fn labels(self) -> [KetLabel; 4] {
        let pols = match self.pol {
            LocalBasis::Z => [Polarization::H, Polarization::V],
            LocalBasis::X => [Polarization::S, Polarization::A],
        };
        let spas = match self.spa {
            LocalBasis::Z => [Spatial::B1, Spatial::B2],
            LocalBasis::X => [Spatial::Plus, Spatial::Minus],
        };
        [
            KetLabel::new(pols[0], spas[0]),
            KetLabel::new(pols[0], spas[1]),
            KetLabel::new(pols[1], spas[0]),
            KetLabel::new(pols[1], spas[1]),
        ]
    }

    pub fn vectors(self) -> [PhotonState; 4] {
        self.labels().map(ket)
    }
}

/// Alias kept for call sites that read better as a free function.
pub fn basis_vectors(basis: ProductBasis) -> [PhotonState; 4] {
    basis.vectors()
}

impl fmt::Display for ProductBasis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let p = match self.pol {
            LocalBasis::Z => "Zp",
            LocalBasis::X => "Xp",
        };
        let s = match self.spa {
            LocalBasis::Z => "Zs",
            LocalBasis::X => "Xs",
        };
        write!(f, "{p}{s}")
    }
}

impl FromStr for ProductBasis {
    type Err = SqkdError;

    fn from_str(s: &str) -> Result<Self> {
        let compact: String = s
            .chars()
            .filter(|c| !matches!(c, '⊗' | '*' | ' ' | '_'))
            .collect();
        match compact.as_str() {
            "ZpZs" => Ok(Self::ZZ),
            "ZpXs" => Ok(Self::ZX),
            "XpZs" => Ok(Self::XZ),
            "XpXs" => Ok(Self::XX),
            _ => Err(SqkdError::UnknownBasis(s.to_string())),
        }
    }
}

impl Serialize for ProductBasis {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for ProductBasis {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// Result of a projective measurement: which ket of which basis was seen.
///
/// Every product ket lies in exactly one product basis, so an outcome
/// serializes as its ket label alone.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Outcome {
    basis: ProductBasis,
    index: u8,
}

impl Outcome {
    pub fn new(basis: ProductBasis, index: u8) -> Result<Self> {
        if index > 3 {
            return Err(SqkdError::Contract(format!("outcome index {index} out of range")));
        }
        Ok(Self { basis, index })
    }

    pub fn basis(&self) -> ProductBasis {
        self.basis
    }

    pub fn index(&self) -> u8 {
        self.index
    }

    pub fn label(&self) -> KetLabel {
        self.basis.labels()[self.index as usize]
    }

    pub fn ket(&self) -> PhotonState {
        ket(self.label())
    }

    /// Two-bit key symbol (`H b1 → 00 … V b2 → 11`); only for Zp⊗Zs outcomes.
    pub fn key_bits(&self) -> Option<u8> {
        (self.basis == ProductBasis::ZZ).then_some(self.index)
    }
}

impl From<KetLabel> for Outcome {
    fn from(label: KetLabel) -> Self {
        let (basis, index) = label.in_basis();
        Self { basis, index }
    }
}

impl fmt::Display for Outcome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.label().fmt(f)
    }
}

impl Serialize for Outcome {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        self.label().serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for Outcome {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        KetLabel::deserialize(deserializer).map(Outcome::from)
    }
}

/// Born probabilities `|⟨basis_i|state⟩|²` in basis order.
pub fn probabilities(state: &PhotonState, basis: ProductBasis) -> [f64; 4] {
    basis.vectors().map(|b| b.fidelity(state))
}

/// Projective measurement; the post-measurement state is the observed basis
/// ket itself.
pub fn measure(
    state: &PhotonState,
    basis: ProductBasis,
    rng: &mut RandomSource,
) -> (Outcome, PhotonState) {
    let probs = probabilities(state, basis).map(|p| if p < PROBE_CUTOFF { 0.0 } else { p });
    let index = rng.categorical(&probs) as u8;
    let outcome = Outcome { basis, index };
    (outcome, outcome.ket())
}

/// Photon entangled with an eavesdropper's `d`-dimensional probe.
#[derive(Debug, Clone, PartialEq)]
pub struct JointState {
    dim_probe: usize,
    amps: Vec<Amplitude>,
}

/// Photon outcome `i` of a measurement on a [`JointState`] and the probe
/// state it leaves behind.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ProbeConditional {
    pub probability: f64,
    /// Normalized probe vector; absent when `probability` < [`PROBE_CUTOFF`].
    pub probe: Option<Vec<C64>>,
}

impl JointState {
    pub fn from_amplitudes(dim_probe: usize, amps: Vec<Amplitude>) -> Result<Self> {
        if dim_probe == 0 {
            return Err(SqkdError::InvalidConfig("probe dimension must be positive".into()));
        }
        if amps.len() != 4 * dim_probe {
            return Err(SqkdError::DimensionMismatch {
                expected: 4 * dim_probe,
                actual: amps.len(),
            });
        }
        if !linalg::all_finite(&amps) {
            return Err(SqkdError::NonFinite);
        }
        let norm_sqr = linalg::norm_sqr(&amps);
        if (norm_sqr - 1.0).abs() > NUMERIC_TOL {
            return Err(SqkdError::NotNormalized { norm_sqr });
        }
        Ok(Self { dim_probe, amps })
    }

    pub fn dim_probe(&self) -> usize {
        self.dim_probe
    }

    pub fn amplitudes(&self) -> &[Amplitude] {
        &self.amps
    }

    pub fn norm_sqr(&self) -> f64 {
        linalg::norm_sqr(&self.amps)
    }

    /// Applies a `(4d)×(4d)` unitary, rejecting non-unitary matrices.
    pub fn apply_unitary(&self, u: &CMatrix) -> Result<JointState> {
        if u.dim() != self.amps.len() {
            return Err(SqkdError::DimensionMismatch {
                expected: self.amps.len(),
                actual: u.dim(),
            });
        }
        u.check_unitary(NUMERIC_TOL)?;
        Ok(self.apply_checked(u))
    }

    /// Skips the unitarity check; for matrices validated at construction.
    pub(crate) fn apply_checked(&self, u: &CMatrix) -> JointState {
        JointState {
            dim_probe: self.dim_probe,
            amps: u.apply(&self.amps),
        }
    }

    /// Un-normalized probe component `(⟨photon| ⊗ I)|joint⟩`.
    pub fn probe_component(&self, photon: &PhotonState) -> Vec<C64> {
        let d = self.dim_probe;
        let mut out = vec![ZERO; d];
        for (k, b) in photon.amplitudes().iter().enumerate() {
            let bc = b.conj();
            if bc == ZERO {
                continue;
            }
            for (j, o) in out.iter_mut().enumerate() {
                *o += bc * self.amps[k * d + j];
            }
        }
        out
    }

    /// Decomposes the joint state along the photon basis:
    /// `|joint⟩ = Σ_i |basis_i⟩ ⊗ |ε_i⟩`, returning `(‖ε_i‖², ε_i/‖ε_i‖)`.
    pub fn conditional_probe_states(&self, basis: ProductBasis) -> [ProbeConditional; 4] {
        basis.vectors().map(|b| {
            let component = self.probe_component(&b);
            let probability = linalg::norm_sqr(&component);
            let probe = if probability < PROBE_CUTOFF {
                None
            } else {
                linalg::normalized(&component)
            };
            ProbeConditional { probability, probe }
        })
    }

    /// Measures the photon subsystem; the probe keeps the conditional state.
    pub fn measure_photon(&self, basis: ProductBasis, rng: &mut RandomSource) -> (Outcome, JointState) {
        let conditionals = self.conditional_probe_states(basis);
        let weights: Vec<f64> = conditionals
            .iter()
            .map(|c| if c.probe.is_some() { c.probability } else { 0.0 })
            .collect();
        let index = rng.categorical(&weights);
        let outcome = Outcome {
            basis,
            index: index as u8,
        };
        let probe = conditionals[index]
            .probe
            .clone()
            .expect("sampled outcome has positive probability");
        (outcome, product_unchecked(&outcome.ket(), &probe))
    }
}

fn product_unchecked(photon: &PhotonState, probe: &[C64]) -> JointState {
    let d = probe.len();
    let mut amps = Vec::with_capacity(4 * d);
    for a in photon.amplitudes() {
        amps.extend(probe.iter().map(|p| a * p));
    }
    JointState { dim_probe: d, amps }
}

/// `photon ⊗ probe`, photon-major.
pub fn tensor(photon: &PhotonState, probe: &[C64]) -> Result<JointState> {
    if probe.is_empty() {
        return Err(SqkdError::InvalidConfig("probe dimension must be positive".into()));
    }
    if !linalg::all_finite(probe) {
        return Err(SqkdError::NonFinite);
    }
    let norm_sqr = linalg::norm_sqr(probe);
    if norm_sqr == 0.0 {
        return Err(SqkdError::ZeroVector);
    }
    if (norm_sqr - 1.0).abs() > NUMERIC_TOL {
        return Err(SqkdError::NotNormalized { norm_sqr });
    }
    Ok(product_unchecked(photon, probe))
}

/// Pure-state trace distance `√(1 − |⟨a|b⟩|²)`; symmetric, zero iff the
/// states agree up to global phase.
pub fn trace_distance(a: &[C64], b: &[C64]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(SqkdError::DimensionMismatch {
            expected: a.len(),
            actual: b.len(),
        });
    }
    for v in [a, b] {
        let norm_sqr = linalg::norm_sqr(v);
        if (norm_sqr - 1.0).abs() > NUMERIC_TOL {
            return Err(SqkdError::NotNormalized { norm_sqr });
        }
    }
    // ‖a‖²‖b‖² − |⟨a|b⟩|² = Σ_{i<j} |a_i b_j − a_j b_i|², which keeps full
    // relative precision when the states nearly coincide.
    let mut gram = 0.0;
    for i in 0..a.len() {
        for j in i + 1..a.len() {
            gram += (a[i] * b[j] - a[j] * b[i]).norm_sqr();
        }
    }
    let scale = linalg::norm_sqr(a) * linalg::norm_sqr(b);
    Ok((gram / scale).min(1.0).sqrt())
}
