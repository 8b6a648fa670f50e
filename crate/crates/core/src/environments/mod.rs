//! Concrete games: a two-state congestion model and two torus games.

mod beach_bar;
mod night_clubs;
mod torus;
mod two_state;

pub use beach_bar::{BeachBar, BeachBarParams};
pub use night_clubs::{NightClubs, NightClubsParams};
pub use torus::{circular_distance, circular_mean, DistanceMode};
pub use two_state::{perturbed, TwoState, TwoStateParams};

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::mfg::MfgModel;

/// Serializable choice of environment and its parameters.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "env", rename_all = "snake_case")]
pub enum EnvSpec {
    TwoState(TwoStateParams),
    BeachBar(BeachBarParams),
    NightClubs(NightClubsParams),
}

impl EnvSpec {
    pub fn build(&self) -> Result<Box<dyn MfgModel>> {
        Ok(match self {
            EnvSpec::TwoState(p) => Box::new(TwoState::new(p.clone())?),
            EnvSpec::BeachBar(p) => Box::new(BeachBar::new(p.clone())?),
            EnvSpec::NightClubs(p) => Box::new(NightClubs::new(p.clone())?),
        })
    }

    pub fn id(&self) -> &'static str {
        match self {
            EnvSpec::TwoState(_) => "two_state",
            EnvSpec::BeachBar(_) => "beach_bar",
            EnvSpec::NightClubs(_) => "night_clubs",
        }
    }

    pub fn alpha(&self) -> f64 {
        match self {
            EnvSpec::TwoState(p) => p.alpha,
            EnvSpec::BeachBar(p) => p.alpha,
            EnvSpec::NightClubs(p) => p.alpha,
        }
    }

    pub fn eta(&self) -> f64 {
        match self {
            EnvSpec::TwoState(p) => p.eta,
            EnvSpec::BeachBar(p) => p.eta,
            EnvSpec::NightClubs(p) => p.eta,
        }
    }

    /// Copy with `(alpha, eta)` replaced, for parameter sweeps.
    pub fn with_alpha_eta(&self, alpha: f64, eta: f64) -> EnvSpec {
        let mut s = self.clone();
        match &mut s {
            EnvSpec::TwoState(p) => (p.alpha, p.eta) = (alpha, eta),
            EnvSpec::BeachBar(p) => (p.alpha, p.eta) = (alpha, eta),
            EnvSpec::NightClubs(p) => (p.alpha, p.eta) = (alpha, eta),
        }
        s
    }
}
