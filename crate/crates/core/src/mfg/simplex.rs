use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Mass drift above which a distribution is rescaled back to 1.
pub const MASS_RENORM_TOL: f64 = 1e-12;
/// Mass drift above which a kernel or policy is considered broken.
pub const MASS_ABORT_TOL: f64 = 1e-6;
/// Tolerance accepted when validating user-supplied weights.
const VALIDATE_TOL: f64 = 1e-9;

/// A probability vector over a finite index set.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct Simplex(Vec<f64>);

impl Simplex {
    /// Validates `weights`: nonnegative, finite, summing to 1 within 1e-9.
    pub fn new(weights: Vec<f64>) -> Result<Self> {
        if weights.is_empty() {
            return Err(Error::InvalidSimplex("empty support".into()));
        }
        for (i, &w) in weights.iter().enumerate() {
            if !w.is_finite() || w < 0.0 {
                return Err(Error::InvalidSimplex(format!("entry {i} is {w}")));
            }
        }
        let mass: f64 = weights.iter().sum();
        if (mass - 1.0).abs() > VALIDATE_TOL {
            return Err(Error::InvalidSimplex(format!("mass {mass}")));
        }
        Ok(Self::renormalized(weights, mass))
    }

    /// Wraps the output of a mass-preserving computation, renormalizing small
    /// drift and rejecting drift beyond [`MASS_ABORT_TOL`].
    pub fn from_propagated(mut weights: Vec<f64>, context: &'static str) -> Result<Self> {
        for w in weights.iter_mut() {
            if !w.is_finite() {
                return Err(Error::MassDrift { context, mass: f64::NAN });
            }
            // rounding can leave -1e-17 behind
            if *w < 0.0 {
                if *w < -MASS_ABORT_TOL {
                    return Err(Error::MassDrift { context, mass: *w });
                }
                *w = 0.0;
            }
        }
        let mass: f64 = weights.iter().sum();
        if (mass - 1.0).abs() > MASS_ABORT_TOL {
            return Err(Error::MassDrift { context, mass });
        }
        Ok(Self::renormalized(weights, mass))
    }

    /// Normalizes arbitrary nonnegative weights. Returns `None` for zero mass.
    pub fn from_unnormalized(mut weights: Vec<f64>) -> Option<Self> {
        let mass: f64 = weights.iter().sum();
        if !(mass > 0.0) || !mass.is_finite() {
            return None;
        }
        weights.iter_mut().for_each(|w| *w /= mass);
        Some(Self(weights))
    }

    fn renormalized(mut weights: Vec<f64>, mass: f64) -> Self {
        if (mass - 1.0).abs() > MASS_RENORM_TOL {
            weights.iter_mut().for_each(|w| *w /= mass);
        }
        Self(weights)
    }

    pub fn uniform(n: usize) -> Self {
        assert!(n > 0, "uniform simplex over an empty set");
        Self(vec![1.0 / n as f64; n])
    }

    pub fn point(n: usize, index: usize) -> Self {
        assert!(index < n, "point mass index {index} out of range {n}");
        let mut w = vec![0.0; n];
        w[index] = 1.0;
        Self(w)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.0
    }

    pub fn mass(&self) -> f64 {
        self.0.iter().sum()
    }

    pub fn l1(&self, other: &Simplex) -> f64 {
        l1_distance(&self.0, &other.0)
    }

    /// Whether this is a point mass (a vertex of the simplex).
    pub fn is_vertex(&self) -> bool {
        self.0.iter().filter(|&&w| w == 1.0).count() == 1
            && self.0.iter().all(|&w| w == 0.0 || w == 1.0)
    }
}

impl std::ops::Index<usize> for Simplex {
    type Output = f64;
    fn index(&self, i: usize) -> &f64 {
        &self.0[i]
    }
}

impl TryFrom<Vec<f64>> for Simplex {
    type Error = Error;
    fn try_from(v: Vec<f64>) -> Result<Self> {
        Self::new(v)
    }
}

impl From<Simplex> for Vec<f64> {
    fn from(s: Simplex) -> Vec<f64> {
        s.0
    }
}

pub fn l1_distance(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).sum()
}

/// Joint law of a state and an action, stored row-major as `|X| x |A|`.
#[derive(Clone, Debug, PartialEq)]
pub struct StateActionDist {
    n_states: usize,
    n_actions: usize,
    weights: Vec<f64>,
}

impl StateActionDist {
    pub fn from_parts(n_states: usize, n_actions: usize, weights: Vec<f64>) -> Result<Self> {
        if weights.len() != n_states * n_actions {
            return Err(Error::Dimension {
                context: "state-action weights",
                expected: n_states * n_actions,
                got: weights.len(),
            });
        }
        let mass: f64 = weights.iter().sum();
        if (mass - 1.0).abs() > MASS_ABORT_TOL || weights.iter().any(|w| *w < 0.0) {
            return Err(Error::MassDrift { context: "state-action law", mass });
        }
        Ok(Self { n_states, n_actions, weights })
    }

    pub fn n_states(&self) -> usize {
        self.n_states
    }

    pub fn n_actions(&self) -> usize {
        self.n_actions
    }

    pub fn get(&self, x: usize, a: usize) -> f64 {
        self.weights[x * self.n_actions + a]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.weights
    }

    pub fn mass(&self) -> f64 {
        self.weights.iter().sum()
    }

    /// Sum over actions.
    pub fn state_marginal(&self) -> Vec<f64> {
        self.weights
            .chunks(self.n_actions)
            .map(|row| row.iter().sum())
            .collect()
    }

    pub fn l1(&self, other: &StateActionDist) -> f64 {
        l1_distance(&self.weights, &other.weights)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_negative_and_bad_mass() {
        assert!(Simplex::new(vec![0.5, -0.1, 0.6]).is_err());
        assert!(Simplex::new(vec![0.5, 0.4]).is_err());
        assert!(Simplex::new(vec![]).is_err());
        assert!(Simplex::new(vec![f64::NAN, 1.0]).is_err());
    }

    #[test]
    fn small_drift_is_renormalized() {
        let s = Simplex::new(vec![0.5, 0.5 + 5e-10]).unwrap();
        assert!((s.mass() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn propagated_drift_aborts_past_tolerance() {
        assert!(Simplex::from_propagated(vec![0.5, 0.5 + 1e-9], "t").is_ok());
        assert!(matches!(
            Simplex::from_propagated(vec![0.5, 0.6], "t"),
            Err(Error::MassDrift { .. })
        ));
    }

    #[test]
    fn vertex_detection() {
        assert!(Simplex::point(3, 1).is_vertex());
        assert!(!Simplex::uniform(3).is_vertex());
    }

    #[test]
    fn state_action_marginal() {
        let d = StateActionDist::from_parts(2, 2, vec![0.1, 0.2, 0.3, 0.4]).unwrap();
        let m = d.state_marginal();
        assert!((m[0] - 0.3).abs() < 1e-15 && (m[1] - 0.7).abs() < 1e-15);
    }
}
