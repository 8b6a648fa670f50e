use rand::RngCore;

use super::noise::NoiseSymbol;
use super::simplex::Simplex;
use crate::error::{Error, Result};

/// A finite mean-field game with common noise.
///
/// The kernel is exposed through [`MfgModel::add_transition`], which
/// accumulates `weight * P(. | x, a, rho, e0)` into a caller-owned buffer, so
/// propagation loops never allocate.
pub trait MfgModel: Send + Sync {
    /// Short identifier used in file names and CSV rows.
    fn id(&self) -> &'static str;
    fn n_states(&self) -> usize;
    fn n_actions(&self) -> usize;
    fn horizon(&self) -> usize;
    fn rho0(&self) -> &Simplex;

    /// `out[x'] += weight * P(x' | x, a, rho, e0)`.
    fn add_transition(
        &self,
        x: usize,
        a: usize,
        rho: &[f64],
        e0: &NoiseSymbol,
        weight: f64,
        out: &mut [f64],
    );

    fn reward(&self, x: usize, a: usize, rho: &[f64]) -> f64;

    fn sample_noise(&self, rng: &mut dyn RngCore) -> NoiseSymbol;

    /// Whether `P` depends on the population argument.
    fn kernel_depends_on_rho(&self) -> bool {
        false
    }

    /// `grad_rho[y] += weight * sum_x' cot[x'] * dP(x' | x, a, rho, e0) / drho[y]`.
    ///
    /// Only kernels that depend on `rho` need to override this.
    fn add_transition_vjp(
        &self,
        _x: usize,
        _a: usize,
        _rho: &[f64],
        _e0: &NoiseSymbol,
        _cot: &[f64],
        _weight: f64,
        _grad_rho: &mut [f64],
    ) {
    }

    /// The transition row as a validated distribution.
    fn transition(&self, x: usize, a: usize, rho: &Simplex, e0: &NoiseSymbol) -> Result<Simplex> {
        check_dims(self, rho.len(), "transition rho")?;
        let mut out = vec![0.0; self.n_states()];
        self.add_transition(x, a, rho.as_slice(), e0, 1.0, &mut out);
        Simplex::from_propagated(out, "transition row")
    }

    /// `sum_x' P(x' | x, a, rho, e0) * values[x']`.
    fn expect_next(
        &self,
        x: usize,
        a: usize,
        rho: &[f64],
        e0: &NoiseSymbol,
        values: &[f64],
        scratch: &mut [f64],
    ) -> f64 {
        scratch.iter_mut().for_each(|v| *v = 0.0);
        self.add_transition(x, a, rho, e0, 1.0, scratch);
        scratch.iter().zip(values).map(|(p, v)| p * v).sum()
    }
}

pub fn check_dims<M: MfgModel + ?Sized>(model: &M, got: usize, context: &'static str) -> Result<()> {
    if got != model.n_states() {
        return Err(Error::Dimension { context, expected: model.n_states(), got });
    }
    Ok(())
}
