use rand::RngCore;
use serde::{Deserialize, Serialize};

use super::model::MfgModel;
use crate::error::{Error, Result};

/// One realization of the common noise.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum NoiseSymbol {
    /// A value in `[0, 1]` (two-state environment).
    Scalar(f64),
    /// An integer displacement per state (torus environments).
    Shifts(Vec<i32>),
}

impl NoiseSymbol {
    pub fn scalar(&self) -> Option<f64> {
        match self {
            NoiseSymbol::Scalar(v) => Some(*v),
            NoiseSymbol::Shifts(_) => None,
        }
    }

    pub fn shifts(&self) -> Option<&[i32]> {
        match self {
            NoiseSymbol::Shifts(v) => Some(v),
            NoiseSymbol::Scalar(_) => None,
        }
    }
}

/// The common-noise sequence `e_1, ..., e_{H-1}`.
///
/// `path.at(t)` is the symbol driving the transition from step `t` to `t + 1`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NoisePath {
    symbols: Vec<NoiseSymbol>,
}

impl NoisePath {
    pub fn new(symbols: Vec<NoiseSymbol>, horizon: usize) -> Result<Self> {
        if symbols.len() + 1 != horizon {
            return Err(Error::Dimension {
                context: "noise path length",
                expected: horizon.saturating_sub(1),
                got: symbols.len(),
            });
        }
        Ok(Self { symbols })
    }

    pub fn sample(model: &dyn MfgModel, rng: &mut dyn RngCore) -> Self {
        let symbols = (1..model.horizon()).map(|_| model.sample_noise(rng)).collect();
        Self { symbols }
    }

    /// Path of `horizon - 1` copies of `symbol`.
    pub fn constant(symbol: NoiseSymbol, horizon: usize) -> Self {
        Self { symbols: vec![symbol; horizon.saturating_sub(1)] }
    }

    pub fn at(&self, t: usize) -> &NoiseSymbol {
        &self.symbols[t]
    }

    pub fn len(&self) -> usize {
        self.symbols.len()
    }

    pub fn is_empty(&self) -> bool {
        self.symbols.is_empty()
    }

    pub fn symbols(&self) -> &[NoiseSymbol] {
        &self.symbols
    }
}
