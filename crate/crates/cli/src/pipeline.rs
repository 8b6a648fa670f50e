use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use mfgcn::imitation::{generate_dataset, interactive_il, nw_adaptive, nw_vanilla, IlConfig};
use mfgcn::metrics::{
    estimate_lipschitz, lemma_checks, relative_exploitability, reward_vs_expert, theorem_bounds,
    LemmaReport, LipschitzEstimates, MetricsRecord, TheoremBounds,
};
use mfgcn::mfg::{exploitability, BestResponse, Exploitability};
use mfgcn::nn::{load_policy, save_policy};
use mfgcn::seed;
use mfgcn::solvers::{
    fictitious_play, mann_iteration, mf_il_distill, GridBestResponse, MeanFieldGrid,
    NnBestResponse, TrainReport,
};
use mfgcn::{MfgModel, Policy};
use serde::Serialize;
use serde_json::json;

use crate::config::{BrOracleConfig, ImitationConfig, Resolved, SolverConfig};

pub const CONVERGENCE_HEADER: [&str; 6] =
    ["iteration", "exploitability", "exploitability_raw", "exploitability_se", "v_policy", "v_best_response"];
pub const LOSS_HEADER: [&str; 4] = ["stage", "iteration", "step", "loss"];

/// Policies produced by `imitate`, in evaluation order after the expert.
pub const IMITATED: [&str; 2] = ["vanilla", "adaptive"];

pub struct Outputs<'a> {
    pub dir: &'a Path,
    pub cfg: &'a Resolved,
    pub seed: u64,
}

impl Outputs<'_> {
    pub fn path(&self, stage: &str, suffix: &str) -> PathBuf {
        self.dir.join(format!("{}{suffix}", self.cfg.artifact(stage, self.seed)))
    }

    pub fn checkpoint(&self, stage: &str) -> PathBuf {
        self.path(stage, ".ckpt")
    }

    fn meta(&self, stage: &str) -> serde_json::Value {
        json!({
            "env": self.cfg.env,
            "stage": stage,
            "config_hash": self.cfg.hash(),
            "seed": self.seed,
        })
    }

    fn save(&self, stage: &str, policy: &Policy) -> Result<PathBuf> {
        let path = self.checkpoint(stage);
        save_policy(&path, policy, self.meta(stage))
            .with_context(|| format!("writing {}", path.display()))?;
        Ok(path)
    }

    fn load(&self, stage: &str, producer: &str) -> Result<Policy> {
        let path = self.checkpoint(stage);
        if !path.exists() {
            anyhow::bail!("missing checkpoint {}; run `{producer}` first", path.display());
        }
        let (policy, _) =
            load_policy(&path).with_context(|| format!("reading {}", path.display()))?;
        Ok(policy)
    }
}

fn csv_writer(path: &Path, header: &[&str]) -> Result<csv::Writer<File>> {
    let mut w = csv::Writer::from_path(path).with_context(|| format!("creating {}", path.display()))?;
    w.write_record(header)?;
    Ok(w)
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut w = BufWriter::new(File::create(path).with_context(|| format!("creating {}", path.display()))?);
    serde_json::to_writer_pretty(&mut w, value)?;
    writeln!(w)?;
    w.flush()?;
    Ok(())
}

pub fn br_oracle(cfg: &Resolved) -> Result<Box<dyn BestResponse>> {
    Ok(match cfg.evaluation.br.as_ref().expect("resolved") {
        BrOracleConfig::Grid { grid_points, mc_samples } => {
            Box::new(GridBestResponse::new(*grid_points, *mc_samples)?)
        }
        BrOracleConfig::Neural(c) => Box::new(NnBestResponse { cfg: c.clone() }),
    })
}

fn convergence_row(w: &mut csv::Writer<File>, k: usize, e: &Exploitability) -> Result<()> {
    w.write_record([
        k.to_string(),
        e.value.to_string(),
        e.raw.to_string(),
        e.se.to_string(),
        e.v_policy.mean.to_string(),
        e.v_best_response.mean.to_string(),
    ])?;
    w.flush()?;
    Ok(())
}

fn loss_rows(w: &mut csv::Writer<File>, stage: &str, k: usize, report: &TrainReport) -> Result<()> {
    for (j, l) in report.losses.iter().enumerate() {
        w.write_record([stage, &k.to_string(), &j.to_string(), &l.to_string()])?;
    }
    w.flush()?;
    Ok(())
}

/// Computes the expert, writing its checkpoint plus convergence and loss curves.
pub fn solve_expert(cfg: &Resolved, seed_: u64, dir: &Path) -> Result<Vec<PathBuf>> {
    let out = Outputs { dir, cfg, seed: seed_ };
    let model = cfg.env.build()?;
    let model = model.as_ref();
    let s = seed::derive(seed_, seed::STAGE_EXPERT);
    let oracle = br_oracle(cfg)?;
    let eval_seed = seed::derive(s, 2);
    let n_mc = cfg.evaluation.n_mc;
    let conv_path = out.path("expert", "_convergence.csv");
    let mut conv = csv_writer(&conv_path, &CONVERGENCE_HEADER)?;
    let init = Policy::uniform(model.horizon(), model.n_states(), model.n_actions());
    convergence_row(&mut conv, 0, &exploitability(&init, model, oracle.as_ref(), n_mc, eval_seed)?)?;
    let mut written = vec![conv_path];
    let expert = match &cfg.solver {
        SolverConfig::Mann(m) => {
            let grid = MeanFieldGrid::two_state(m.grid_points)?;
            let gammas = vec![m.gamma; m.iterations];
            mann_iteration(model, &init, &gammas, &grid, m.mc_samples, seed::derive(s, 0), &mut |k, p| {
                if k % m.eval_every == 0 || k == m.iterations {
                    let e = exploitability(p, model, oracle.as_ref(), n_mc, eval_seed)?;
                    convergence_row(&mut conv, k, &e).map_err(io_err)?;
                }
                Ok(())
            })?
        }
        SolverConfig::Fp(f) => {
            let loss_path = out.path("expert", "_losses.csv");
            let mut losses = csv_writer(&loss_path, &LOSS_HEADER)?;
            let state = fictitious_play(model, init, &f.fp, seed::derive(s, 0), &mut |st| {
                let k = st.iteration();
                loss_rows(&mut losses, "best_response", k, st.losses.last().expect("one per iterate"))
                    .map_err(io_err)?;
                if k % f.eval_every == 0 || k == f.fp.iterations {
                    let p = if f.eval_last_policy { st.last().clone() } else { st.uniform_mixture()? };
                    let e = exploitability(&p, model, oracle.as_ref(), n_mc, eval_seed)?;
                    convergence_row(&mut conv, k, &e).map_err(io_err)?;
                }
                Ok(())
            })?;
            written.push(out.save("fp_mixture", &state.uniform_mixture()?)?);
            let (net, report) = mf_il_distill(&state, model, &f.distill, None, seed::derive(s, 1))?;
            loss_rows(&mut losses, "distillation", state.iteration(), &report)?;
            written.push(loss_path);
            Policy::Mlp(net)
        }
    };
    written.push(out.save("expert", &expert)?);
    Ok(written)
}

fn io_err(e: anyhow::Error) -> mfgcn::Error {
    mfgcn::Error::Io(std::io::Error::other(format!("{e:#}")))
}

/// Trains the vanilla and adaptive imitators of the saved expert.
pub fn imitate(cfg: &Resolved, seed_: u64, dir: &Path) -> Result<Vec<PathBuf>> {
    let out = Outputs { dir, cfg, seed: seed_ };
    let model = cfg.env.build()?;
    let model = model.as_ref();
    let expert = out.load("expert", "solve-expert")?;
    let s = seed::derive(seed_, seed::STAGE_IMITATE);
    let mut written = Vec::new();
    match &cfg.imitation {
        ImitationConfig::Nw(nw) => {
            let ds = generate_dataset(&expert, model, nw.n_traj, nw.n_agents, seed::derive(s, 0))?;
            let ds_path = out.path("dataset", ".bin");
            ds.save(&ds_path)?;
            written.push(ds_path);
            written.push(out.save("vanilla", &nw_vanilla(&ds)?)?);
            written.push(out.save("adaptive", &nw_adaptive(&ds, nw.kernel)?)?);
        }
        ImitationConfig::Interactive(il) => {
            let loss_path = out.path("imitate", "_losses.csv");
            let mut losses = csv_writer(&loss_path, &LOSS_HEADER)?;
            for (i, name) in IMITATED.iter().enumerate() {
                let c = IlConfig { adaptive: *name == "adaptive", ..il.clone() };
                let (net, report) = interactive_il(&expert, model, &c, seed::derive(s, 1 + i as u64))?;
                loss_rows(&mut losses, name, 0, &report)?;
                written.push(out.save(name, &Policy::Mlp(net))?);
            }
            written.push(loss_path);
        }
    }
    Ok(written)
}

#[derive(Serialize)]
struct PolicyReport {
    policy: String,
    bounds: TheoremBounds,
    lemmas: LemmaReport,
    lemmas_pass: bool,
}

#[derive(Serialize)]
struct EvaluationReport {
    env: String,
    config_hash: String,
    seed: u64,
    lipschitz: LipschitzEstimates,
    policies: Vec<PolicyReport>,
}

pub fn metrics_path(cfg: &Resolved, seed_: u64, dir: &Path) -> PathBuf {
    Outputs { dir, cfg, seed: seed_ }.path("metrics", ".csv")
}

/// Evaluates the expert and both imitators; writes the metrics table and the
/// bound/lemma report.
pub fn evaluate(cfg: &Resolved, seed_: u64, dir: &Path) -> Result<Vec<PathBuf>> {
    let out = Outputs { dir, cfg, seed: seed_ };
    let model = cfg.env.build()?;
    let model: &dyn MfgModel = model.as_ref();
    let expert = out.load("expert", "solve-expert")?;
    let mut policies = vec![("expert".to_string(), expert.clone())];
    for name in IMITATED {
        policies.push((name.to_string(), out.load(name, "imitate")?));
    }
    let s = seed::derive(seed_, seed::STAGE_EVALUATE);
    let ev = &cfg.evaluation;
    let oracle = br_oracle(cfg)?;
    let lipschitz = estimate_lipschitz(model, &expert, ev.lipschitz_probes, seed::derive(s, 5))?;
    let mut records = Vec::new();
    let mut reports = Vec::new();
    for (name, policy) in &policies {
        let lemmas = lemma_checks(&expert, policy, model, ev.n_paths, seed::derive(s, 1))?;
        let rw = reward_vs_expert(&expert, policy, model, ev.n_mc, seed::derive(s, 2))?;
        let rex = relative_exploitability(policy, &expert, model, oracle.as_ref(), ev.n_mc, seed::derive(s, 3))?;
        let px = &lemmas.proxies;
        records.push(MetricsRecord {
            env: cfg.env.id().to_string(),
            alpha: cfg.env.alpha(),
            eta: cfg.env.eta(),
            policy: name.clone(),
            seed: seed_,
            n_paths: ev.n_paths,
            n_mc: ev.n_mc,
            delta_bc: px.delta_bc(),
            delta_bc_se: px.delta_bc_se(),
            delta_adv: px.delta_adv(),
            delta_adv_se: px.delta_adv_se(),
            v_expert: rw.v_expert.mean,
            v_expert_se: rw.v_expert.se,
            v_agent_vs_expert: rw.v_agent.mean,
            v_agent_vs_expert_se: rw.v_agent.se,
            rel_reward: rw.rel_reward,
            rel_reward_se: rw.rel_reward_se,
            exploitability: rex.exploitability.value,
            exploitability_raw: rex.exploitability.raw,
            exploitability_se: rex.exploitability.se,
            rel_exploitability: rex.relative,
            delta_bc_t: px.bc.clone(),
            delta_adv_t: px.adv.clone(),
        });
        reports.push(PolicyReport {
            policy: name.clone(),
            bounds: theorem_bounds(px.delta_bc(), px.delta_adv(), &lipschitz, model.horizon()),
            lemmas_pass: lemmas.pass(),
            lemmas,
        });
    }
    let csv_path = out.path("metrics", ".csv");
    write_metrics_csv(&csv_path, &records)?;
    let json_path = out.path("metrics", ".json");
    write_json(&json_path, &records)?;
    let report_path = out.path("report", ".json");
    write_json(
        &report_path,
        &EvaluationReport {
            env: cfg.env.id().to_string(),
            config_hash: cfg.hash(),
            seed: seed_,
            lipschitz,
            policies: reports,
        },
    )?;
    Ok(vec![csv_path, json_path, report_path])
}

pub fn write_metrics_csv(path: &Path, records: &[MetricsRecord]) -> Result<()> {
    let mut w = csv_writer(path, &MetricsRecord::CSV_HEADER)?;
    for r in records {
        w.write_record(r.csv_row())?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_metrics_csv(path: &Path) -> Result<Vec<MetricsRecord>> {
    let mut r = csv::Reader::from_path(path).with_context(|| format!("reading {}", path.display()))?;
    r.records()
        .map(|row| Ok(MetricsRecord::from_csv_row(&row?.iter().collect::<Vec<_>>())?))
        .collect()
}
