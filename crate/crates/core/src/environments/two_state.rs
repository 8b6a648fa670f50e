use rand::RngCore;
use rand_distr::{Beta, Distribution};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mfg::{MfgModel, NoiseSymbol, Simplex};

/// Two states, two actions. The chosen action is followed with probability
/// `1 - eta`; otherwise the agent lands according to the noise-perturbed
/// population `[e0 rho]`, with `e0 ~ Beta(alpha, alpha)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TwoStateParams {
    pub alpha: f64,
    pub eta: f64,
    pub horizon: usize,
}

impl Default for TwoStateParams {
    fn default() -> Self {
        Self { alpha: 1.75, eta: 0.75, horizon: 30 }
    }
}

#[derive(Clone, Debug)]
pub struct TwoState {
    params: TwoStateParams,
    rho0: Simplex,
    noise: Beta<f64>,
}

impl TwoState {
    pub fn new(params: TwoStateParams) -> Result<Self> {
        if !(params.alpha > 0.0) || !params.alpha.is_finite() {
            return Err(Error::InvalidParam(format!("alpha must be > 0, got {}", params.alpha)));
        }
        if !(0.0..=1.0).contains(&params.eta) {
            return Err(Error::InvalidParam(format!("eta must lie in [0, 1], got {}", params.eta)));
        }
        if params.horizon == 0 {
            return Err(Error::InvalidParam("horizon must be positive".into()));
        }
        let noise = Beta::new(params.alpha, params.alpha)
            .map_err(|e| Error::InvalidParam(format!("beta law: {e}")))?;
        Ok(Self { params, rho0: Simplex::uniform(2), noise })
    }

    pub fn params(&self) -> &TwoStateParams {
        &self.params
    }
}

/// `[e0 rho](1) = e0 rho(1) / (e0 rho(1) + (1 - e0) rho(0))`.
///
/// When the denominator vanishes (only possible for `e0` in `{0, 1}`) the
/// limit convention gives 0 for `e0 = 0` and 1 for `e0 = 1`.
pub fn perturbed(e0: f64, rho: &[f64]) -> f64 {
    let num = e0 * rho[1];
    let den = num + (1.0 - e0) * rho[0];
    if den > 0.0 {
        num / den
    } else if e0 >= 1.0 {
        1.0
    } else {
        0.0
    }
}

fn noise_value(e0: &NoiseSymbol) -> f64 {
    e0.scalar().expect("two-state model expects scalar noise")
}

impl MfgModel for TwoState {
    fn id(&self) -> &'static str {
        "two_state"
    }

    fn n_states(&self) -> usize {
        2
    }

    fn n_actions(&self) -> usize {
        2
    }

    fn horizon(&self) -> usize {
        self.params.horizon
    }

    fn rho0(&self) -> &Simplex {
        &self.rho0
    }

    fn add_transition(
        &self,
        _x: usize,
        a: usize,
        rho: &[f64],
        e0: &NoiseSymbol,
        weight: f64,
        out: &mut [f64],
    ) {
        let eta = self.params.eta;
        out[a] += weight * (1.0 - eta);
        if eta > 0.0 {
            let q = perturbed(noise_value(e0), rho);
            out[1] += weight * eta * q;
            out[0] += weight * eta * (1.0 - q);
        }
    }

    fn reward(&self, x: usize, _a: usize, rho: &[f64]) -> f64 {
        -rho[x]
    }

    fn sample_noise(&self, rng: &mut dyn RngCore) -> NoiseSymbol {
        NoiseSymbol::Scalar(self.noise.sample(rng))
    }

    fn kernel_depends_on_rho(&self) -> bool {
        self.params.eta > 0.0
    }

    fn add_transition_vjp(
        &self,
        _x: usize,
        _a: usize,
        rho: &[f64],
        e0: &NoiseSymbol,
        cot: &[f64],
        weight: f64,
        grad_rho: &mut [f64],
    ) {
        let eta = self.params.eta;
        if eta == 0.0 {
            return;
        }
        let e = noise_value(e0);
        let den = e * rho[1] + (1.0 - e) * rho[0];
        if den <= 0.0 {
            return;
        }
        let c = weight * eta * (cot[1] - cot[0]) * e * (1.0 - e) / (den * den);
        grad_rho[1] += c * rho[0];
        grad_rho[0] -= c * rho[1];
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn model(alpha: f64, eta: f64) -> TwoState {
        TwoState::new(TwoStateParams { alpha, eta, horizon: 5 }).unwrap()
    }

    #[test]
    fn perturbed_measure_examples() {
        assert_eq!(perturbed(0.5, &[0.5, 0.5]), 0.5);
        assert!((perturbed(0.8, &[0.5, 0.5]) - 0.8).abs() < 1e-15);
        // degenerate conventions
        assert_eq!(perturbed(0.0, &[0.0, 1.0]), 0.0);
        assert_eq!(perturbed(1.0, &[1.0, 0.0]), 1.0);
        for r in [0.1, 0.5, 0.9] {
            assert_eq!(perturbed(0.0, &[1.0 - r, r]), 0.0);
            assert_eq!(perturbed(1.0, &[1.0 - r, r]), 1.0);
        }
    }

    #[test]
    fn reward_examples() {
        let m = model(1.0, 0.5);
        assert_eq!(m.reward(0, 1, &[0.3, 0.7]), -0.3);
        assert_eq!(m.reward(1, 0, &[0.3, 0.7]), -0.7);
    }

    #[test]
    fn rejects_bad_params() {
        assert!(TwoState::new(TwoStateParams { alpha: 0.0, eta: 0.5, horizon: 3 }).is_err());
        assert!(TwoState::new(TwoStateParams { alpha: 1.0, eta: 1.5, horizon: 3 }).is_err());
    }

    #[test]
    fn vjp_matches_finite_differences() {
        let m = model(1.0, 0.6);
        let e0 = NoiseSymbol::Scalar(0.3);
        let rho = [0.35, 0.65];
        let cot = [0.7, -1.3];
        let f = |r: &[f64]| {
            let mut out = [0.0; 2];
            m.add_transition(0, 1, r, &e0, 1.0, &mut out);
            out[0] * cot[0] + out[1] * cot[1]
        };
        let mut g = [0.0; 2];
        m.add_transition_vjp(0, 1, &rho, &e0, &cot, 1.0, &mut g);
        for y in 0..2 {
            let (mut p, mut q) = (rho, rho);
            p[y] += 1e-6;
            q[y] -= 1e-6;
            let fd = (f(&p) - f(&q)) / 2e-6;
            assert!((fd - g[y]).abs() < 1e-8, "{y}: {fd} vs {}", g[y]);
        }
    }
}
