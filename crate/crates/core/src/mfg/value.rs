use serde::{Deserialize, Serialize};

use super::flow::{deviation_fields_raw, population_fields};
use super::model::MfgModel;
use super::noise::NoisePath;
use super::policy::Policy;
use crate::error::Result;
use crate::seed;

/// Monte-Carlo mean with its standard error.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub mean: f64,
    pub se: f64,
    pub n: usize,
}

impl Estimate {
    pub fn from_samples(samples: &[f64]) -> Self {
        let n = samples.len();
        let mean = samples.iter().sum::<f64>() / n as f64;
        let se = if n > 1 {
            let var = samples.iter().map(|s| (s - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
            (var / n as f64).sqrt()
        } else {
            0.0
        };
        Self { mean, se, n }
    }
}

/// `n_mc` noise paths drawn from independent sub-streams of `seed`.
pub fn sample_paths(model: &dyn MfgModel, n: usize, seed: u64) -> Vec<NoisePath> {
    (0..n)
        .map(|i| NoisePath::sample(model, &mut seed::stream_rng(seed, i as u64)))
        .collect()
}

/// Value of one noise path: `sum_t sum_{x,a} mu_t(x, a) r(x, a, rho^pop_t)`.
pub(crate) fn path_value(
    dev: &Policy,
    pop: &Policy,
    model: &dyn MfgModel,
    noise: &NoisePath,
) -> Result<f64> {
    let pop_fields = population_fields(pop, noise, model)?;
    let dev_fields = deviation_fields_raw(dev, &pop_fields, noise, model)?;
    Ok(value_of_fields(dev, model, &pop_fields, &dev_fields))
}

fn value_of_fields(
    dev: &Policy,
    model: &dyn MfgModel,
    pop_fields: &[Vec<f64>],
    dev_fields: &[Vec<f64>],
) -> f64 {
    let (nx, na) = (model.n_states(), model.n_actions());
    let mut laws = vec![0.0; nx * na];
    let mut total = 0.0;
    for (t, (pop, agent)) in pop_fields.iter().zip(dev_fields).enumerate() {
        dev.eval_states(t, pop, &mut laws);
        for x in 0..nx {
            if agent[x] == 0.0 {
                continue;
            }
            for a in 0..na {
                total += agent[x] * laws[x * na + a] * model.reward(x, a, pop);
            }
        }
    }
    total
}

/// `V(dev, pop)` averaged over the given noise paths; also returns per-path values.
pub fn value_on_paths(
    dev: &Policy,
    pop: &Policy,
    model: &dyn MfgModel,
    paths: &[NoisePath],
) -> Result<(Estimate, Vec<f64>)> {
    let per_path = paths
        .iter()
        .map(|p| path_value(dev, pop, model, p))
        .collect::<Result<Vec<_>>>()?;
    Ok((Estimate::from_samples(&per_path), per_path))
}

/// `V(dev, pop)`: expectation over noise paths of the exact conditional value.
///
/// Given a noise path the flows are propagated exactly, so Monte Carlo only
/// runs over the `n_mc` paths.
pub fn value(
    dev: &Policy,
    pop: &Policy,
    model: &dyn MfgModel,
    n_mc: usize,
    seed: u64,
) -> Result<Estimate> {
    assert!(n_mc >= 1, "value needs at least one noise path");
    let paths = sample_paths(model, n_mc, seed);
    Ok(value_on_paths(dev, pop, model, &paths)?.0)
}

/// A procedure producing (an approximation of) a best response.
pub trait BestResponse {
    fn name(&self) -> &'static str;
    fn best_response(&self, pop: &Policy, model: &dyn MfgModel, seed: u64) -> Result<Policy>;
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Exploitability {
    /// Clamped below at 0.
    pub value: f64,
    /// Unclamped paired estimate.
    pub raw: f64,
    /// Standard error of the paired difference.
    pub se: f64,
    pub v_best_response: Estimate,
    pub v_policy: Estimate,
}

impl Exploitability {
    pub fn clamped(&self) -> bool {
        self.raw < 0.0
    }
}

/// `V(BR(pi), pi) - V(pi, pi)` on shared noise paths, clamped at 0.
pub fn exploitability(
    policy: &Policy,
    model: &dyn MfgModel,
    br_solver: &dyn BestResponse,
    n_mc: usize,
    seed: u64,
) -> Result<Exploitability> {
    let br = br_solver.best_response(policy, model, seed::derive(seed, 1))?;
    exploitability_against(policy, &br, model, n_mc, seed)
}

/// Exploitability with an already computed best response.
pub fn exploitability_against(
    policy: &Policy,
    br: &Policy,
    model: &dyn MfgModel,
    n_mc: usize,
    seed: u64,
) -> Result<Exploitability> {
    let paths = sample_paths(model, n_mc, seed::derive(seed, 2));
    let (v_br, br_vals) = value_on_paths(br, policy, model, &paths)?;
    let (v_pol, pol_vals) = value_on_paths(policy, policy, model, &paths)?;
    let diffs: Vec<f64> = br_vals.iter().zip(&pol_vals).map(|(a, b)| a - b).collect();
    let d = Estimate::from_samples(&diffs);
    Ok(Exploitability {
        value: d.mean.max(0.0),
        raw: d.mean,
        se: d.se,
        v_best_response: v_br,
        v_policy: v_pol,
    })
}
