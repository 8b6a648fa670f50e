use serde::{Deserialize, Serialize};

use super::dataset::simulate_agents;
use crate::error::{Error, Result};
use crate::mfg::{MfgModel, NoisePath, Policy};
use crate::nn::{adam_step, bc_loss_and_grad, AdamState, BcBatch, LrSchedule, MlpPolicy};
use crate::seed;
use crate::solvers::TrainReport;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct IlConfig {
    pub iters: usize,
    pub batch: usize,
    pub agents: usize,
    pub lr: f64,
    pub schedule: LrSchedule,
    pub hidden: Vec<usize>,
    pub adaptive: bool,
}

impl Default for IlConfig {
    fn default() -> Self {
        Self {
            iters: 10_000,
            batch: 50,
            agents: 1000,
            lr: 1e-4,
            schedule: LrSchedule::Constant,
            hidden: vec![64, 64],
            adaptive: true,
        }
    }
}

/// Behaviour cloning on fresh expert simulations.
///
/// Each iteration simulates `agents` expert agents on `batch` new noise
/// paths and takes one Adam step towards the empirical action laws of every
/// visited `(path, t, x)`, weighted by its visit count. The adaptive variant
/// feeds the empirical field; the vanilla one ignores it.
pub fn interactive_il(
    expert: &Policy,
    model: &dyn MfgModel,
    cfg: &IlConfig,
    seed: u64,
) -> Result<(MlpPolicy, TrainReport)> {
    if cfg.iters == 0 || cfg.batch == 0 || cfg.agents == 0 {
        return Err(Error::InvalidParam("iters, batch and agents must be positive".into()));
    }
    let (nx, na, h) = (model.n_states(), model.n_actions(), model.horizon());
    let mut policy = MlpPolicy::new(nx, na, h, cfg.adaptive, &cfg.hidden, seed::derive(seed, 0));
    let mut adam = AdamState::new(policy.net().params().len(), cfg.lr);
    let mut report = TrainReport::default();
    let m = cfg.agents;
    for j in 0..cfg.iters {
        let mut data = BcBatch::new(&policy);
        for b in 0..cfg.batch {
            let mut rng = seed::stream_rng(seed::derive(seed, 1), (j * cfg.batch + b) as u64);
            let noise = NoisePath::sample(model, &mut rng);
            let roll = simulate_agents(expert, model, &noise, m, &mut rng)?;
            for t in 0..h {
                let mut counts = vec![0.0; nx * na];
                for k in 0..m {
                    let (x, a) = (roll.states[t * m + k] as usize, roll.actions[t * m + k] as usize);
                    counts[x * na + a] += 1.0;
                }
                let ctx = data.push_context(&policy, t, &roll.empirical[t * nx..(t + 1) * nx]);
                for (x, row) in counts.chunks(na).enumerate() {
                    let visits: f64 = row.iter().sum();
                    if visits > 0.0 {
                        let law: Vec<f64> = row.iter().map(|c| c / visits).collect();
                        data.push_row(ctx, x, &law, visits);
                    }
                }
            }
        }
        let wrap = |e: Error| Error::Diverged { stage: "imitation", iteration: j, source: Box::new(e) };
        let (loss, grad) = bc_loss_and_grad(&policy, &data).map_err(wrap)?;
        adam.lr = cfg.schedule.lr(cfg.lr, j, cfg.iters);
        adam_step(policy.net_mut().params_mut(), &grad, &mut adam).map_err(wrap)?;
        report.losses.push(loss);
    }
    Ok((policy, report))
}
