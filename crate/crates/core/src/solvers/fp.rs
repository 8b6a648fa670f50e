use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mfg::{
    population_fields, sample_paths, BestResponse, FlowTrajectory, MfgModel, NoisePath, Policy,
    Simplex,
};
use crate::nn::{adam_step, l1_flow_loss_and_grad, value_loss_and_grad, AdamState, LrSchedule, MlpPolicy};
use crate::seed;

/// Training settings shared by best-response training and distillation.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NnTrainConfig {
    pub iters: usize,
    pub batch: usize,
    pub lr: f64,
    pub schedule: LrSchedule,
    pub hidden: Vec<usize>,
    pub adaptive: bool,
    /// Number of pre-sampled noise paths minibatches are drawn from.
    pub bank_size: usize,
}

impl Default for NnTrainConfig {
    fn default() -> Self {
        Self {
            iters: 1000,
            batch: 500,
            lr: 1e-4,
            schedule: LrSchedule::Constant,
            hidden: vec![64, 64],
            adaptive: true,
            bank_size: 1000,
        }
    }
}

impl NnTrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.iters == 0 || self.batch == 0 || self.bank_size == 0 {
            return Err(Error::InvalidParam("iters, batch and bank_size must be positive".into()));
        }
        if !(self.lr > 0.0) || !self.lr.is_finite() {
            return Err(Error::InvalidParam(format!("learning rate {}", self.lr)));
        }
        if self.hidden.iter().any(|w| *w == 0) {
            return Err(Error::InvalidParam("hidden widths must be positive".into()));
        }
        Ok(())
    }
}

/// Noise paths with the running mean of the population flows absorbed so far.
#[derive(Clone, Debug)]
pub struct NoiseBank {
    paths: Vec<NoisePath>,
    aggregate: Vec<FlowTrajectory>,
    absorbed: usize,
}

impl NoiseBank {
    pub fn new(model: &dyn MfgModel, size: usize, seed: u64) -> Self {
        Self { paths: sample_paths(model, size, seed), aggregate: Vec::new(), absorbed: 0 }
    }

    pub fn len(&self) -> usize {
        self.paths.len()
    }

    pub fn is_empty(&self) -> bool {
        self.paths.is_empty()
    }

    pub fn paths(&self) -> &[NoisePath] {
        &self.paths
    }

    /// How many policies the aggregate averages.
    pub fn absorbed(&self) -> usize {
        self.absorbed
    }

    /// `rho_bar <- (k rho_bar + rho^policy) / (k + 1)` on every path.
    pub fn absorb(&mut self, policy: &Policy, model: &dyn MfgModel) -> Result<()> {
        let k = self.absorbed as f64;
        let mut updated = Vec::with_capacity(self.paths.len());
        for (i, path) in self.paths.iter().enumerate() {
            let fields = population_fields(policy, path, model)?;
            let merged = fields
                .into_iter()
                .enumerate()
                .map(|(t, f)| {
                    let v = if self.absorbed == 0 {
                        f
                    } else {
                        let old = self.aggregate[i].fields[t].as_slice();
                        old.iter().zip(&f).map(|(o, n)| (k * o + n) / (k + 1.0)).collect()
                    };
                    Simplex::from_propagated(v, "aggregate field")
                })
                .collect::<Result<Vec<_>>>()?;
            updated.push(FlowTrajectory { noise: path.clone(), fields: merged, deviation_fields: None });
        }
        self.aggregate = updated;
        self.absorbed += 1;
        Ok(())
    }

    pub fn aggregate(&self) -> &[FlowTrajectory] {
        &self.aggregate
    }

    fn minibatch(&self, rng: &mut seed::Rng, size: usize) -> Vec<FlowTrajectory> {
        (0..size).map(|_| self.aggregate[rng.random_range(0..self.aggregate.len())].clone()).collect()
    }
}

/// Per-iteration losses of one training run.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    pub losses: Vec<f64>,
}

type LossFn = fn(&MlpPolicy, &[FlowTrajectory], &dyn MfgModel) -> Result<(f64, Vec<f64>)>;

fn train(
    stage: &'static str,
    loss_fn: LossFn,
    bank: &NoiseBank,
    model: &dyn MfgModel,
    cfg: &NnTrainConfig,
    init: Option<MlpPolicy>,
    seed: u64,
) -> Result<(MlpPolicy, TrainReport)> {
    cfg.validate()?;
    if bank.absorbed() == 0 {
        return Err(Error::InvalidParam("noise bank has no target flows".into()));
    }
    let mut policy = match init {
        Some(p) => p,
        None => MlpPolicy::new(
            model.n_states(),
            model.n_actions(),
            model.horizon(),
            cfg.adaptive,
            &cfg.hidden,
            seed::derive(seed, 0),
        ),
    };
    let mut adam = AdamState::new(policy.net().params().len(), cfg.lr);
    let mut rng = seed::rng(seed::derive(seed, 1));
    let mut report = TrainReport::default();
    for j in 0..cfg.iters {
        let targets = bank.minibatch(&mut rng, cfg.batch);
        let wrap = |e: Error| Error::Diverged { stage, iteration: j, source: Box::new(e) };
        let (loss, grad) = loss_fn(&policy, &targets, model).map_err(wrap)?;
        adam.lr = cfg.schedule.lr(cfg.lr, j, cfg.iters);
        adam_step(policy.net_mut().params_mut(), &grad, &mut adam).map_err(wrap)?;
        report.losses.push(loss);
    }
    Ok((policy, report))
}

/// Best response by gradient ascent on the value against the bank's aggregate flows.
pub fn train_best_response(
    bank: &NoiseBank,
    model: &dyn MfgModel,
    cfg: &NnTrainConfig,
    seed: u64,
) -> Result<(MlpPolicy, TrainReport)> {
    train("best response", value_loss_and_grad, bank, model, cfg, None, seed)
}

/// Neural best response to the average flow of `targets`.
pub fn nn_best_response(
    targets: &[Policy],
    model: &dyn MfgModel,
    cfg: &NnTrainConfig,
    seed: u64,
) -> Result<(MlpPolicy, TrainReport)> {
    if targets.is_empty() {
        return Err(Error::InvalidParam("best response needs at least one target policy".into()));
    }
    let mut bank = NoiseBank::new(model, cfg.bank_size, seed::derive(seed, 10));
    for p in targets {
        bank.absorb(p, model)?;
    }
    train_best_response(&bank, model, cfg, seed)
}

/// [`nn_best_response`] behind the [`BestResponse`] interface.
#[derive(Clone, Debug, PartialEq)]
pub struct NnBestResponse {
    pub cfg: NnTrainConfig,
}

impl BestResponse for NnBestResponse {
    fn name(&self) -> &'static str {
        "neural"
    }

    fn best_response(&self, pop: &Policy, model: &dyn MfgModel, seed: u64) -> Result<Policy> {
        let (p, _) = nn_best_response(std::slice::from_ref(pop), model, &self.cfg, seed)?;
        Ok(Policy::Mlp(p))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FpConfig {
    pub iterations: usize,
    pub br: NnTrainConfig,
}

impl Default for FpConfig {
    fn default() -> Self {
        Self { iterations: 40, br: NnTrainConfig::default() }
    }
}

/// The policy tuple `(pi^0, .., pi^k)` with the best-response training curves.
#[derive(Clone, Debug)]
pub struct FpState {
    pub policies: Vec<Policy>,
    pub losses: Vec<TrainReport>,
}

impl FpState {
    pub fn iteration(&self) -> usize {
        self.policies.len() - 1
    }

    pub fn last(&self) -> &Policy {
        self.policies.last().expect("fp state is never empty")
    }

    /// Policy-level uniform mixture over every iterate.
    pub fn uniform_mixture(&self) -> Result<Policy> {
        if self.policies.len() == 1 {
            return Ok(self.policies[0].clone());
        }
        Policy::uniform_mixture(self.policies.clone())
    }
}

/// Fictitious play: `pi^k` best-responds to the average of the flows of
/// `pi^0 .. pi^{k-1}`, computed per noise path of a shared bank.
///
/// `observer` is called after every iteration.
pub fn fictitious_play(
    model: &dyn MfgModel,
    init: Policy,
    cfg: &FpConfig,
    seed: u64,
    observer: &mut dyn FnMut(&FpState) -> Result<()>,
) -> Result<FpState> {
    if cfg.iterations == 0 {
        return Err(Error::InvalidParam("fictitious play needs at least one iteration".into()));
    }
    cfg.br.validate()?;
    let mut bank = NoiseBank::new(model, cfg.br.bank_size, seed::derive(seed, 0));
    let mut state = FpState { policies: vec![init], losses: Vec::new() };
    for k in 1..=cfg.iterations {
        bank.absorb(state.last(), model)?;
        let (br, report) = train_best_response(&bank, model, &cfg.br, seed::derive(seed, k as u64))
            .map_err(|e| match e {
                Error::Diverged { source, .. } => {
                    Error::Diverged { stage: "fictitious play", iteration: k, source }
                }
                other => other,
            })?;
        state.policies.push(Policy::Mlp(br));
        state.losses.push(report);
        observer(&state)?;
    }
    Ok(state)
}

/// Distils the FP tuple into one network whose flow tracks the aggregate
/// flow of all iterates. `init` warm-starts the network.
pub fn mf_il_distill(
    fp: &FpState,
    model: &dyn MfgModel,
    cfg: &NnTrainConfig,
    init: Option<MlpPolicy>,
    seed: u64,
) -> Result<(MlpPolicy, TrainReport)> {
    cfg.validate()?;
    let mut bank = NoiseBank::new(model, cfg.bank_size, seed::derive(seed, 0));
    for p in &fp.policies {
        bank.absorb(p, model)?;
    }
    train("distillation", l1_flow_loss_and_grad, &bank, model, cfg, init, seed::derive(seed, 1))
}
