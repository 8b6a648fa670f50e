//! Finite-state mean-field games with common noise.
//!
//! The crate is organised bottom-up:
//!
//! - [`mfg`]: distributions, policies, mean-field propagation, values and
//!   exploitability.
//! - [`environments`]: the two-state congestion game, Beach Bar and Night Clubs.
//! - [`nn`]: a small MLP with a layer tape, Adam, and the three training losses.
//! - [`solvers`]: grid backward induction, Mann iteration, fictitious play with
//!   common noise, neural best responses and flow distillation.
//! - [`imitation`]: expert datasets, Nadaraya–Watson estimators and interactive
//!   imitation.
//! - [`metrics`]: BC/ADV proxies, relative metrics, theoretical bounds and
//!   lemma checks.
//!
//! Everything that consumes randomness takes an explicit `u64` seed; sub-streams
//! are derived with [`seed::derive`] so results do not depend on call order.

mod container;
pub mod environments;
pub mod error;
pub mod imitation;
pub mod metrics;
pub mod mfg;
pub mod nn;
pub mod seed;
pub mod solvers;

pub use error::{Error, Result};
pub use mfg::{
    FlowTrajectory, MfgModel, NoisePath, NoiseSymbol, Policy, Simplex, StateActionDist,
};
