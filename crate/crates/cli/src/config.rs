use std::path::Path;

use anyhow::{bail, Context, Result};
use mfgcn::environments::EnvSpec;
use mfgcn::imitation::{IlConfig, KernelConfig};
use mfgcn::nn::LrSchedule;
use mfgcn::solvers::{FpConfig, NnTrainConfig};
use serde::{Deserialize, Serialize};

pub const SCHEMA_VERSION: u32 = 1;

/// Marks failures that should exit with the configuration-error code.
#[derive(Debug)]
pub struct ConfigError(pub String);

impl std::fmt::Display for ConfigError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "config error: {}", self.0)
    }
}

impl std::error::Error for ConfigError {}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub schema_version: u32,
    pub env: EnvSpec,
    #[serde(default)]
    pub solver: Option<SolverConfig>,
    #[serde(default)]
    pub imitation: Option<ImitationConfig>,
    #[serde(default)]
    pub evaluation: Option<EvaluationConfig>,
    /// Seeds run by `sweep`; the single-stage commands use `--seed`.
    #[serde(default)]
    pub seeds: Vec<u64>,
    #[serde(default)]
    pub sweep: Option<SweepConfig>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum SolverConfig {
    Mann(MannConfig),
    Fp(FpSolverConfig),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MannConfig {
    pub iterations: usize,
    pub gamma: f64,
    pub grid_points: usize,
    pub mc_samples: usize,
    /// Exploitability is recorded every `eval_every` iterations (and at the end).
    pub eval_every: usize,
}

impl Default for MannConfig {
    fn default() -> Self {
        Self { iterations: 50, gamma: 0.05, grid_points: 50, mc_samples: 10_000, eval_every: 10 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FpSolverConfig {
    pub fp: FpConfig,
    pub distill: NnTrainConfig,
    pub eval_every: usize,
    /// Evaluate the last iterate instead of the uniform mixture.
    pub eval_last_policy: bool,
}

impl Default for FpSolverConfig {
    fn default() -> Self {
        Self {
            fp: FpConfig::default(),
            distill: NnTrainConfig { iters: 10_000, batch: 200, ..Default::default() },
            eval_every: 5,
            eval_last_policy: false,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ImitationConfig {
    Nw(NwConfig),
    Interactive(IlConfig),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NwConfig {
    pub n_traj: usize,
    pub n_agents: usize,
    pub kernel: KernelConfig,
}

impl Default for NwConfig {
    fn default() -> Self {
        Self { n_traj: 2000, n_agents: 100, kernel: KernelConfig::default() }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum BrOracleConfig {
    Grid { grid_points: usize, mc_samples: usize },
    Neural(NnTrainConfig),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvaluationConfig {
    /// Noise paths for the BC/ADV proxies and lemma checks.
    pub n_paths: usize,
    /// Noise paths for values and exploitability.
    pub n_mc: usize,
    pub lipschitz_probes: usize,
    pub br: Option<BrOracleConfig>,
}

impl Default for EvaluationConfig {
    fn default() -> Self {
        Self { n_paths: 2000, n_mc: 1000, lipschitz_probes: 2000, br: None }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    pub alpha: Vec<f64>,
    pub eta: Vec<f64>,
}

/// A configuration with every default filled in for its environment.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Resolved {
    pub env: EnvSpec,
    pub solver: SolverConfig,
    pub imitation: ImitationConfig,
    pub evaluation: EvaluationConfig,
}

fn default_solver(env: &EnvSpec) -> SolverConfig {
    match env {
        EnvSpec::TwoState(_) => SolverConfig::Mann(MannConfig::default()),
        EnvSpec::BeachBar(_) => SolverConfig::Fp(FpSolverConfig::default()),
        EnvSpec::NightClubs(_) => SolverConfig::Fp(FpSolverConfig {
            distill: NnTrainConfig {
                iters: 20_000,
                batch: 500,
                lr: 5e-4,
                schedule: LrSchedule::Cosine,
                ..Default::default()
            },
            ..Default::default()
        }),
    }
}

fn default_imitation(env: &EnvSpec) -> ImitationConfig {
    match env {
        EnvSpec::TwoState(_) => ImitationConfig::Nw(NwConfig::default()),
        EnvSpec::BeachBar(_) => ImitationConfig::Interactive(IlConfig::default()),
        EnvSpec::NightClubs(_) => {
            ImitationConfig::Interactive(IlConfig { iters: 20_000, ..Default::default() })
        }
    }
}

fn default_br(env: &EnvSpec) -> BrOracleConfig {
    match env {
        EnvSpec::TwoState(_) => BrOracleConfig::Grid { grid_points: 101, mc_samples: 10_000 },
        _ => BrOracleConfig::Neural(NnTrainConfig::default()),
    }
}

fn config_err(msg: impl Into<String>) -> anyhow::Error {
    anyhow::Error::new(ConfigError(msg.into()))
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("reading config {}", path.display()))
            .map_err(|e| config_err(format!("{e:#}")))?;
        let cfg: Self = serde_json::from_str(&text).map_err(|e| config_err(e.to_string()))?;
        cfg.resolve()?;
        Ok(cfg)
    }

    /// Fills defaults and validates; every failure is a [`ConfigError`].
    pub fn resolve(&self) -> Result<Resolved> {
        if self.schema_version != SCHEMA_VERSION {
            return Err(config_err(format!(
                "schema_version {} is not supported (expected {SCHEMA_VERSION})",
                self.schema_version
            )));
        }
        self.env.build().map_err(|e| config_err(e.to_string()))?;
        let solver = self.solver.clone().unwrap_or_else(|| default_solver(&self.env));
        let imitation = self.imitation.clone().unwrap_or_else(|| default_imitation(&self.env));
        let mut evaluation = self.evaluation.clone().unwrap_or_default();
        evaluation.br.get_or_insert_with(|| default_br(&self.env));
        let two_state = matches!(self.env, EnvSpec::TwoState(_));
        validate(&solver, &imitation, &evaluation, two_state).map_err(|e| config_err(e.to_string()))?;
        if let Some(s) = &self.sweep {
            if s.alpha.is_empty() || s.eta.is_empty() {
                return Err(config_err("sweep grids must be nonempty"));
            }
            for (&a, &e) in s.alpha.iter().flat_map(|a| s.eta.iter().map(move |e| (a, e))) {
                self.env.with_alpha_eta(a, e).build().map_err(|e| config_err(e.to_string()))?;
            }
        }
        Ok(Resolved { env: self.env.clone(), solver, imitation, evaluation })
    }
}

fn validate(
    solver: &SolverConfig,
    imitation: &ImitationConfig,
    evaluation: &EvaluationConfig,
    two_state: bool,
) -> Result<()> {
    match solver {
        SolverConfig::Mann(m) => {
            if !two_state {
                bail!("the Mann solver needs the two_state environment");
            }
            if !(m.gamma > 0.0 && m.gamma <= 1.0) {
                bail!("gamma must lie in (0, 1], got {}", m.gamma);
            }
            if m.grid_points < 2 || m.mc_samples == 0 || m.eval_every == 0 {
                bail!("grid_points >= 2, mc_samples >= 1 and eval_every >= 1 are required");
            }
        }
        SolverConfig::Fp(f) => {
            if f.fp.iterations == 0 || f.eval_every == 0 {
                bail!("fp.iterations and eval_every must be positive");
            }
            f.fp.br.validate()?;
            f.distill.validate()?;
        }
    }
    match imitation {
        ImitationConfig::Nw(n) => {
            if !two_state {
                bail!("Nadaraya-Watson imitation needs the two_state environment");
            }
            if n.n_traj == 0 || n.n_agents == 0 || !(n.kernel.bandwidth > 0.0) {
                bail!("n_traj, n_agents and bandwidth must be positive");
            }
        }
        ImitationConfig::Interactive(il) => {
            if il.iters == 0 || il.batch == 0 || il.agents == 0 || !(il.lr > 0.0) {
                bail!("interactive imitation needs positive iters, batch, agents and lr");
            }
        }
    }
    if evaluation.n_paths == 0 || evaluation.n_mc < 2 || evaluation.lipschitz_probes == 0 {
        bail!("evaluation needs n_paths >= 1, n_mc >= 2 and lipschitz_probes >= 1");
    }
    match evaluation.br.as_ref().expect("filled by resolve") {
        BrOracleConfig::Grid { grid_points, mc_samples } => {
            if !two_state {
                bail!("the grid best-response oracle needs the two_state environment");
            }
            if *grid_points < 2 || *mc_samples == 0 {
                bail!("grid oracle needs grid_points >= 2 and mc_samples >= 1");
            }
        }
        BrOracleConfig::Neural(c) => c.validate()?,
    }
    Ok(())
}

impl Resolved {
    /// FNV-1a over the canonical JSON of the resolved configuration.
    pub fn hash(&self) -> String {
        let text = serde_json::to_string(self).expect("config serializes");
        let mut h: u64 = 0xcbf2_9ce4_8422_2325;
        for b in text.bytes() {
            h ^= b as u64;
            h = h.wrapping_mul(0x0000_0100_0000_01b3);
        }
        format!("{h:016x}")
    }

    /// `{env}_{stage}_{hash}_{seed}`
    pub fn artifact(&self, stage: &str, seed: u64) -> String {
        format!("{}_{stage}_{}_{seed}", self.env.id(), self.hash())
    }
}
