//! State-vector simulator for a single-state semi-quantum key distribution
//! protocol that encodes two key bits per photon in polarization and spatial
//! mode.
//!
//! Alice prepares `S⊗s`, Bob either reflects it (CTRL) or measures and
//! resends it in Zp⊗Zs (SIFT), and Alice measures the returning photon. The
//! crate also models eavesdroppers, checks the zero-error implication for
//! entangle-measure attacks, and compares key capacity against a one-DOF
//! baseline.

pub mod adversary;
pub mod analysis;
pub mod config;
pub mod error;
pub mod linalg;
pub mod protocol;
pub mod quantum;
pub mod rng;

pub use adversary::{AttackModel, BackwardTap, BasisPolicy, EntangleMeasure, FakeSource, Theorem1Report, Theorem1Verdict};
pub use error::{Result, SqkdError};
pub use protocol::{run_session, SessionConfig, SessionResult, SessionStatus};
pub use quantum::{KetLabel, Outcome, PhotonState, ProductBasis};
pub use rng::RandomSource;
