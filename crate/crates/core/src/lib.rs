//! Privacy-preserving kidney exchange: Shamir arithmetic, an MPC runtime,
//! the oblivious matching protocol, and the pool simulator.

pub mod compat;
pub mod field;
pub mod matching;
pub mod mpc;
pub mod net;
pub mod protocol;
pub mod shamir;
pub mod sim;

pub use field::{FieldElement, DEFAULT_PRIME};
pub use mpc::{Session, SessionConfig, SharedValue, SharedVector, TraceStats};
pub use net::{NetProfile, PeerId, Transport};
pub use shamir::{Share, SharingParams};
