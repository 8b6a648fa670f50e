use rand::{Rng, RngCore};
use serde::{Deserialize, Serialize};

use super::beach_bar::validate_torus;
use super::torus::{add_torus_transition, circular_mean, wrap, DistanceMode};
use crate::error::Result;
use crate::mfg::{MfgModel, NoiseSymbol, Simplex};

/// Night Clubs on a torus of `4 * x_half` sites, clubs at `x_half` and `3 * x_half`.
///
/// The common noise displaces a block of two adjacent sites `{i, i + 1}` by
/// `round(s * eta^(1/3))` with `s ~ Unif{-floor(n/3), .., floor(n/3)}`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct NightClubsParams {
    pub x_half: usize,
    pub alpha: f64,
    pub beta: f64,
    pub eta: f64,
    pub horizon: usize,
    pub distance: DistanceMode,
}

impl Default for NightClubsParams {
    fn default() -> Self {
        Self {
            x_half: 5,
            alpha: 1.0,
            beta: 0.1,
            eta: 0.3,
            horizon: 30,
            distance: DistanceMode::Circular,
        }
    }
}

#[derive(Clone, Debug)]
pub struct NightClubs {
    params: NightClubsParams,
    n: usize,
    clubs: [usize; 2],
    rho0: Simplex,
}

/// Rounds to the nearest integer, halves toward zero.
pub(crate) fn round_half_toward_zero(v: f64) -> i32 {
    let a = v.abs();
    let f = a.floor();
    let k = if a - f > 0.5 { f + 1.0 } else { f };
    (k * v.signum()) as i32
}

impl NightClubs {
    pub fn new(params: NightClubsParams) -> Result<Self> {
        validate_torus(params.x_half, params.alpha, params.beta, params.eta, params.horizon)?;
        let n = 4 * params.x_half;
        Ok(Self {
            clubs: [params.x_half, 3 * params.x_half],
            n,
            rho0: Simplex::uniform(n),
            params,
        })
    }

    pub fn params(&self) -> &NightClubsParams {
        &self.params
    }

    pub fn clubs(&self) -> [usize; 2] {
        self.clubs
    }

    /// Index of the club targeted from `x`: the nearer one, ties to the first.
    pub fn nearest_club(&self, x: usize) -> usize {
        let d = |c: usize| self.params.distance.distance(x, c, self.n);
        if d(self.clubs[1]) < d(self.clubs[0]) {
            1
        } else {
            0
        }
    }

    /// `D^k_beta(x, rho)`: distance to the targeted club when it is not over
    /// capacity, otherwise to the other one.
    pub fn effective_distance(&self, x: usize, rho: &[f64]) -> f64 {
        let k = self.nearest_club(x);
        let target = if rho[self.clubs[k]] <= self.params.beta {
            self.clubs[k]
        } else {
            self.clubs[1 - k]
        };
        self.params.distance.distance(x, target, self.n)
    }
}

impl MfgModel for NightClubs {
    fn id(&self) -> &'static str {
        "night_clubs"
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
        let shifts = e0.shifts().expect("night clubs expects per-site shifts");
        add_torus_transition(x, a, shifts, weight, out);
    }

    fn reward(&self, x: usize, _a: usize, rho: &[f64]) -> f64 {
        let gather = if self.params.alpha == 0.0 {
            0.0
        } else {
            self.params.alpha * self.params.distance.distance(x, circular_mean(rho), self.n)
        };
        -self.effective_distance(x, rho) - gather
    }

    fn sample_noise(&self, rng: &mut dyn RngCore) -> NoiseSymbol {
        let reach = (self.n / 3) as i32;
        let s = rng.random_range(-reach..=reach);
        let start = rng.random_range(0..self.n);
        let shift = round_half_toward_zero(s as f64 * self.params.eta.cbrt());
        let mut shifts = vec![0; self.n];
        shifts[start] = shift;
        shifts[wrap(start as i64 + 1, self.n)] = shift;
        NoiseSymbol::Shifts(shifts)
    }
}
