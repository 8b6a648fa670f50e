use serde::{Deserialize, Serialize};

use super::dataset::ExpertDataset;
use crate::error::{Error, Result};
use crate::mfg::{KernelNw, Policy, VanillaTabular};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct KernelConfig {
    pub bandwidth: f64,
}

impl Default for KernelConfig {
    fn default() -> Self {
        Self { bandwidth: 0.05 }
    }
}

fn check_nonempty(ds: &ExpertDataset) -> Result<()> {
    if ds.rollouts.is_empty() || ds.n_agents == 0 {
        return Err(Error::InvalidParam("empty dataset".into()));
    }
    Ok(())
}

/// Empirical conditional action frequencies per `(t, x)`; unvisited cells are uniform.
pub fn nw_vanilla(ds: &ExpertDataset) -> Result<Policy> {
    check_nonempty(ds)?;
    let (h, nx, na, m) = (ds.horizon, ds.n_states, ds.n_actions, ds.n_agents);
    let mut counts = vec![0.0; h * nx * na];
    for r in &ds.rollouts {
        for t in 0..h {
            for k in 0..m {
                let (x, a) = (r.states[t * m + k] as usize, r.actions[t * m + k] as usize);
                counts[(t * nx + x) * na + a] += 1.0;
            }
        }
    }
    for row in counts.chunks_mut(na) {
        let total: f64 = row.iter().sum();
        if total > 0.0 {
            row.iter_mut().for_each(|c| *c /= total);
        } else {
            row.iter_mut().for_each(|c| *c = 1.0 / na as f64);
        }
    }
    Ok(Policy::Tabular(VanillaTabular::from_table(h, nx, na, counts)?))
}

/// Gaussian-kernel regression of the action counts on the empirical fields.
pub fn nw_adaptive(ds: &ExpertDataset, cfg: KernelConfig) -> Result<Policy> {
    check_nonempty(ds)?;
    let (h, nx, na, m, n) = (ds.horizon, ds.n_states, ds.n_actions, ds.n_agents, ds.n_traj());
    let mut fields = vec![0.0; h * n * nx];
    let mut counts = vec![0.0; h * n * nx * na];
    for (i, r) in ds.rollouts.iter().enumerate() {
        for t in 0..h {
            let dst = (t * n + i) * nx;
            fields[dst..dst + nx].copy_from_slice(&r.empirical[t * nx..(t + 1) * nx]);
            for k in 0..m {
                let (x, a) = (r.states[t * m + k] as usize, r.actions[t * m + k] as usize);
                counts[(dst + x) * na + a] += 1.0;
            }
        }
    }
    Ok(Policy::Kernel(KernelNw::from_parts(h, nx, na, cfg.bandwidth, n, fields, counts)?))
}
