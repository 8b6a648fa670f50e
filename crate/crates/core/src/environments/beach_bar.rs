use rand::{Rng, RngCore};
use serde::{Deserialize, Serialize};

use super::torus::{add_torus_transition, DistanceMode};
use crate::error::{Error, Result};
use crate::mfg::{MfgModel, NoiseSymbol, Simplex};

/// Floor applied inside `log(rho(x))`.
pub const LOG_FLOOR: f64 = 1e-10;

/// Beach Bar on a torus of `4 * x_half` sites with the bar at `2 * x_half`.
///
/// Each site is displaced independently by `b * u`, `b ~ Bernoulli(eta)`,
/// `u ~ Unif{-x_half, .., x_half}`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BeachBarParams {
    pub x_half: usize,
    pub alpha: f64,
    pub beta: f64,
    pub eta: f64,
    pub horizon: usize,
    pub distance: DistanceMode,
}

impl Default for BeachBarParams {
    fn default() -> Self {
        Self {
            x_half: 5,
            alpha: 1.0,
            beta: 0.1,
            eta: 0.3,
            horizon: 50,
            distance: DistanceMode::Circular,
        }
    }
}

#[derive(Clone, Debug)]
pub struct BeachBar {
    params: BeachBarParams,
    n: usize,
    bar: usize,
    rho0: Simplex,
}

pub(crate) fn validate_torus(x_half: usize, alpha: f64, beta: f64, eta: f64, horizon: usize) -> Result<()> {
    if x_half == 0 {
        return Err(Error::InvalidParam("x_half must be positive".into()));
    }
    if !(alpha >= 0.0) || !alpha.is_finite() {
        return Err(Error::InvalidParam(format!("alpha must be >= 0, got {alpha}")));
    }
    if !(beta > 0.0 && beta <= 1.0) {
        return Err(Error::InvalidParam(format!("beta must lie in (0, 1], got {beta}")));
    }
    if !(0.0..=1.0).contains(&eta) {
        return Err(Error::InvalidParam(format!("eta must lie in [0, 1], got {eta}")));
    }
    if horizon == 0 {
        return Err(Error::InvalidParam("horizon must be positive".into()));
    }
    Ok(())
}

impl BeachBar {
    pub fn new(params: BeachBarParams) -> Result<Self> {
        validate_torus(params.x_half, params.alpha, params.beta, params.eta, params.horizon)?;
        let n = 4 * params.x_half;
        Ok(Self { bar: 2 * params.x_half, n, rho0: Simplex::uniform(n), params })
    }

    pub fn params(&self) -> &BeachBarParams {
        &self.params
    }

    pub fn bar(&self) -> usize {
        self.bar
    }
}

impl MfgModel for BeachBar {
    fn id(&self) -> &'static str {
        "beach_bar"
    }

    fn n_states(&self) -> usize {
        self.n
    }

    fn n_actions(&self) -> usize {
        3
    }

    fn horizon(&self) -> usize {
        self.params.horizon
    }

    fn rho0(&self) -> &Simplex {
        &self.rho0
    }

    fn add_transition(
        &self,
        x: usize,
        a: usize,
        _rho: &[f64],
        e0: &NoiseSymbol,
        weight: f64,
        out: &mut [f64],
    ) {
        let shifts = e0.shifts().expect("beach bar expects per-site shifts");
        add_torus_transition(x, a, shifts, weight, out);
    }

    fn reward(&self, x: usize, a: usize, rho: &[f64]) -> f64 {
        let p = &self.params;
        let bar_term = if rho[self.bar] <= p.beta {
            p.distance.distance(x, self.bar, self.n)
        } else {
            0.0
        };
        let crowd = if p.alpha == 0.0 { 0.0 } else { p.alpha * rho[x].max(LOG_FLOOR).ln() };
        -bar_term - crowd - (a as f64 - 1.0).abs()
    }

    fn sample_noise(&self, rng: &mut dyn RngCore) -> NoiseSymbol {
        let (eta, xh) = (self.params.eta, self.params.x_half as i32);
        let shifts = (0..self.n)
            .map(|_| if rng.random_bool(eta) { rng.random_range(-xh..=xh) } else { 0 })
            .collect();
        NoiseSymbol::Shifts(shifts)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seed;

    fn model() -> BeachBar {
        BeachBar::new(BeachBarParams::default()).unwrap()
    }

    #[test]
    fn reward_at_bar_example() {
        let m = model();
        let mut rho = vec![0.0; 20];
        rho[m.bar()] = 0.05;
        // only rho(x_bar) and rho(x) matter; here x is the bar itself
        let r = m.reward(m.bar(), 1, &rho);
        assert_eq!(r, 0.0 - 1.0 * 0.05f64.ln() - 0.0);
        let mut rho = vec![0.0; 20];
        rho[m.bar()] = (-1.0f64).exp();
        let m2 = BeachBar::new(BeachBarParams { beta: 0.5, ..Default::default() }).unwrap();
        assert!((m2.reward(m2.bar(), 1, &rho) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn bar_distance_term_switches_off_when_crowded() {
        let m = model();
        let mut rho = vec![0.0; 20];
        rho[m.bar()] = 0.5;
        rho[0] = 0.5;
        // 10 sites from the bar, but the bar is crowded
        assert!((m.reward(0, 1, &rho) + 0.5f64.ln()).abs() < 1e-12);
        rho[m.bar()] = 0.05;
        rho[0] = 0.95;
        assert!((m.reward(0, 2, &rho) - (-10.0 - 0.95f64.ln() - 1.0)).abs() < 1e-12);
    }

    #[test]
    fn log_floor_keeps_rewards_finite() {
        let m = model();
        let rho = Simplex::point(20, 3);
        assert!(m.reward(0, 1, rho.as_slice()).is_finite());
    }

    #[test]
    fn quiet_noise_spreads_mass_to_neighbours() {
        let m = model();
        let row = m
            .transition(7, 1, &Simplex::uniform(20), &NoiseSymbol::Shifts(vec![0; 20]))
            .unwrap();
        for (x, p) in row.as_slice().iter().enumerate() {
            let want = if (6..=8).contains(&x) { 1.0 / 3.0 } else { 0.0 };
            assert!((p - want).abs() < 1e-15);
        }
    }

    #[test]
    fn zero_eta_gives_zero_shifts() {
        let m = BeachBar::new(BeachBarParams { eta: 0.0, ..Default::default() }).unwrap();
        let mut rng = seed::rng(3);
        for _ in 0..100 {
            assert!(m.sample_noise(&mut rng).shifts().unwrap().iter().all(|s| *s == 0));
        }
    }

    #[test]
    fn rejects_zero_beta() {
        assert!(BeachBar::new(BeachBarParams { beta: 0.0, ..Default::default() }).is_err());
    }
}
