use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use anyhow::{anyhow, Result};
use mfgcn::metrics::MetricsRecord;

use crate::config::{ConfigError, ExperimentConfig, Resolved};
use crate::pipeline::{evaluate, imitate, metrics_path, read_metrics_csv, solve_expert, write_metrics_csv};

pub const SUMMARY_HEADER: [&str; 7] = ["alpha", "eta", "policy", "metric", "mean", "std", "n"];

/// Metrics summarized per `(alpha, eta, policy)` cell.
const SUMMARY_METRICS: [&str; 5] =
    ["delta_bc", "delta_adv", "rel_reward", "exploitability", "rel_exploitability"];

struct Cell {
    cfg: Resolved,
    seed: u64,
}

fn cells(cfg: &ExperimentConfig, seeds: &[u64]) -> Result<Vec<Cell>> {
    let grid: Vec<(f64, f64)> = match &cfg.sweep {
        Some(s) => s.alpha.iter().flat_map(|&a| s.eta.iter().map(move |&e| (a, e))).collect(),
        None => vec![(cfg.env.alpha(), cfg.env.eta())],
    };
    let mut out = Vec::new();
    for (a, e) in grid {
        let cell = ExperimentConfig { env: cfg.env.with_alpha_eta(a, e), sweep: None, ..cfg.clone() };
        let resolved = cell.resolve()?;
        for &seed in seeds {
            out.push(Cell { cfg: resolved.clone(), seed });
        }
    }
    Ok(out)
}

fn run_cell(cell: &Cell, dir: &Path) -> Result<()> {
    if metrics_path(&cell.cfg, cell.seed, dir).exists() {
        return Ok(());
    }
    let (cfg, seed) = (&cell.cfg, cell.seed);
    if !dir.join(format!("{}.ckpt", cfg.artifact("expert", seed))).exists() {
        solve_expert(cfg, seed, dir)?;
    }
    let imitated = crate::pipeline::IMITATED
        .iter()
        .all(|n| dir.join(format!("{}.ckpt", cfg.artifact(n, seed))).exists());
    if !imitated {
        imitate(cfg, seed, dir)?;
    }
    evaluate(cfg, seed, dir)?;
    Ok(())
}

/// Runs every `(alpha, eta, seed)` cell, skipping cells whose metrics already
/// exist, then concatenates the per-cell tables in grid order.
pub fn sweep(cfg: &ExperimentConfig, seeds: &[u64], dir: &Path, jobs: usize) -> Result<Vec<PathBuf>> {
    if seeds.is_empty() {
        return Err(ConfigError("sweep needs at least one seed".into()).into());
    }
    let cells = cells(cfg, seeds)?;
    let next = AtomicUsize::new(0);
    let failure: Mutex<Option<anyhow::Error>> = Mutex::new(None);
    std::thread::scope(|scope| {
        for _ in 0..jobs.clamp(1, cells.len()) {
            scope.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::SeqCst);
                if i >= cells.len() || failure.lock().expect("poisoned").is_some() {
                    break;
                }
                if let Err(e) = run_cell(&cells[i], dir) {
                    let c = &cells[i];
                    let e = e.context(format!(
                        "sweep cell alpha={} eta={} seed={}",
                        c.cfg.env.alpha(),
                        c.cfg.env.eta(),
                        c.seed
                    ));
                    failure.lock().expect("poisoned").get_or_insert(e);
                    break;
                }
            });
        }
    });
    if let Some(e) = failure.into_inner().map_err(|_| anyhow!("worker panicked"))? {
        return Err(e);
    }
    let mut records = Vec::new();
    for c in &cells {
        records.extend(read_metrics_csv(&metrics_path(&c.cfg, c.seed, dir))?);
    }
    let all = dir.join(format!("{}_sweep_metrics.csv", cfg.env.id()));
    write_metrics_csv(&all, &records)?;
    let summary = dir.join(format!("{}_sweep_summary.csv", cfg.env.id()));
    write_summary(&summary, &records)?;
    Ok(vec![all, summary])
}

fn metric(r: &MetricsRecord, name: &str) -> Option<f64> {
    match name {
        "delta_bc" => Some(r.delta_bc),
        "delta_adv" => Some(r.delta_adv),
        "rel_reward" => r.rel_reward,
        "exploitability" => Some(r.exploitability),
        "rel_exploitability" => r.rel_exploitability,
        _ => unreachable!("unknown summary metric {name}"),
    }
}

/// Mean and sample standard deviation over seeds, one row per
/// `(alpha, eta, policy, metric)` in first-appearance order.
fn write_summary(path: &Path, records: &[MetricsRecord]) -> Result<()> {
    let mut keys: Vec<(f64, f64, &str)> = Vec::new();
    for r in records {
        let k = (r.alpha, r.eta, r.policy.as_str());
        if !keys.contains(&k) {
            keys.push(k);
        }
    }
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(SUMMARY_HEADER)?;
    for (alpha, eta, policy) in keys {
        let group: Vec<&MetricsRecord> = records
            .iter()
            .filter(|r| (r.alpha, r.eta, r.policy.as_str()) == (alpha, eta, policy))
            .collect();
        for name in SUMMARY_METRICS {
            let xs: Vec<f64> = group.iter().filter_map(|r| metric(r, name)).collect();
            let n = xs.len();
            let (mean, std) = match n {
                0 => (String::new(), String::new()),
                1 => (xs[0].to_string(), String::new()),
                _ => {
                    let m = xs.iter().sum::<f64>() / n as f64;
                    let v = xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1) as f64;
                    (m.to_string(), v.sqrt().to_string())
                }
            };
            w.write_record([alpha.to_string(), eta.to_string(), policy.to_string(), name.to_string(), mean, std, n.to_string()])?;
        }
    }
    w.flush()?;
    Ok(())
}
