use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

const TWO_STATE: &str = r#"{
  "schema_version": 1,
  "env": {"env": "two_state", "alpha": 1.5, "eta": 0.5, "horizon": 4},
  "solver": {"kind": "mann", "iterations": 3, "gamma": 0.5, "grid_points": 11, "mc_samples": 40, "eval_every": 2},
  "imitation": {"kind": "nw", "n_traj": 30, "n_agents": 10},
  "evaluation": {"n_paths": 20, "n_mc": 20, "lipschitz_probes": 40,
                 "br": {"kind": "grid", "grid_points": 11, "mc_samples": 40}},
  "seeds": [1, 2],
  "sweep": {"alpha": [1.0, 2.0], "eta": [0.5]}
}"#;

const BEACH_BAR: &str = r#"{
  "schema_version": 1,
  "env": {"env": "beach_bar", "x_half": 2, "horizon": 4},
  "solver": {"kind": "fp", "eval_every": 1,
             "fp": {"iterations": 2, "br": {"iters": 4, "batch": 3, "bank_size": 6, "hidden": [8]}},
             "distill": {"iters": 4, "batch": 3, "bank_size": 6, "hidden": [8]}},
  "imitation": {"kind": "interactive", "iters": 3, "batch": 2, "agents": 20, "hidden": [8]},
  "evaluation": {"n_paths": 10, "n_mc": 10, "lipschitz_probes": 20,
                 "br": {"kind": "neural", "iters": 3, "batch": 3, "bank_size": 6, "hidden": [8]}}
}"#;

fn write_config(dir: &Path, text: &str) -> PathBuf {
    let path = dir.join("config.json");
    fs::write(&path, text).unwrap();
    path
}

fn mfgcn(args: &[&str], config: &Path, out: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_mfgcn"))
        .args(args)
        .arg("--config")
        .arg(config)
        .arg("--out")
        .arg(out)
        .output()
        .unwrap()
}

fn ok(o: &Output) {
    assert!(o.status.success(), "stderr: {}", String::from_utf8_lossy(&o.stderr));
}

fn files_ending(dir: &Path, suffix: &str) -> Vec<PathBuf> {
    let mut v: Vec<PathBuf> = fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.to_string_lossy().ends_with(suffix))
        .collect();
    v.sort();
    v
}

/// `{env}_{stage}_{hash}_{seed}{ext}` artifacts in `dir`.
fn artifacts(dir: &Path, stage: &str, ext: &str) -> Vec<PathBuf> {
    files_ending(dir, ext)
        .into_iter()
        .filter(|p| {
            let name = p.file_name().unwrap().to_string_lossy().into_owned();
            name.contains(&format!("_{stage}_")) && !name.contains("_sweep_")
        })
        .collect()
}

fn run_pipeline(config_text: &str, out: &Path) {
    let cfg = write_config(out, config_text);
    for stage in ["solve-expert", "imitate", "evaluate"] {
        ok(&mfgcn(&[stage, "--seed", "7"], &cfg, out));
    }
}

#[test]
fn two_state_pipeline_writes_every_artifact() {
    let dir = tempfile::tempdir().unwrap();
    run_pipeline(TWO_STATE, dir.path());
    let ckpts = files_ending(dir.path(), ".ckpt");
    let names: Vec<String> =
        ckpts.iter().map(|p| p.file_name().unwrap().to_string_lossy().into_owned()).collect();
    for stage in ["adaptive", "expert", "vanilla"] {
        assert!(
            names.iter().any(|n| n.starts_with(&format!("two_state_{stage}_")) && n.ends_with("_7.ckpt")),
            "{names:?}"
        );
    }
    let conv = fs::read_to_string(&files_ending(dir.path(), "_convergence.csv")[0]).unwrap();
    let iters: Vec<&str> = conv.lines().skip(1).map(|l| l.split(',').next().unwrap()).collect();
    assert_eq!(iters, ["0", "2", "3"]);
    let metrics = fs::read_to_string(&artifacts(dir.path(), "metrics", ".csv")[0]).unwrap();
    let rows: Vec<&str> = metrics.lines().collect();
    assert_eq!(rows.len(), 4);
    assert!(rows[0].starts_with("env,alpha,eta,policy,seed"));
    assert!(rows[1].starts_with("two_state,1.5,0.5,expert,7,20,20,0,"));
    let report: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(&artifacts(dir.path(), "report", ".json")[0]).unwrap()).unwrap();
    assert_eq!(report["policies"].as_array().unwrap().len(), 3);
    assert_eq!(report["lipschitz"]["l_r"], 0.5);
}

#[test]
fn reruns_are_byte_identical() {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    run_pipeline(TWO_STATE, a.path());
    run_pipeline(TWO_STATE, b.path());
    for suffix in ["_convergence.csv", ".csv", ".json", ".ckpt", ".bin"] {
        let (fa, fb) = (files_ending(a.path(), suffix), files_ending(b.path(), suffix));
        assert_eq!(fa.len(), fb.len());
        for (x, y) in fa.iter().zip(&fb) {
            assert_eq!(x.file_name(), y.file_name());
            assert_eq!(fs::read(x).unwrap(), fs::read(y).unwrap(), "{}", x.display());
        }
    }
}

#[test]
fn beach_bar_pipeline_runs_with_neural_components() {
    let dir = tempfile::tempdir().unwrap();
    run_pipeline(BEACH_BAR, dir.path());
    assert_eq!(files_ending(dir.path(), "_losses.csv").len(), 2);
    let ckpts = files_ending(dir.path(), "_7.ckpt");
    assert!(ckpts.iter().any(|p| p.to_string_lossy().contains("beach_bar_fp_mixture_")));
    let metrics = fs::read_to_string(&artifacts(dir.path(), "metrics", ".csv")[0]).unwrap();
    assert_eq!(metrics.lines().count(), 4);
}

#[test]
fn sweep_covers_the_grid_and_resumes() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), TWO_STATE);
    ok(&mfgcn(&["sweep"], &cfg, dir.path()));
    let all = dir.path().join("two_state_sweep_metrics.csv");
    let text = fs::read_to_string(&all).unwrap();
    let keys: Vec<(String, String, String)> = text
        .lines()
        .skip(1)
        .map(|l| {
            let f: Vec<&str> = l.split(',').collect();
            (f[1].to_string(), f[3].to_string(), f[4].to_string())
        })
        .collect();
    assert_eq!(keys.len(), 2 * 2 * 3);
    assert_eq!(keys[0], ("1".into(), "expert".into(), "1".into()));
    assert_eq!(keys[3], ("1".into(), "expert".into(), "2".into()));
    assert_eq!(keys[6], ("2".into(), "expert".into(), "1".into()));
    let summary = fs::read_to_string(dir.path().join("two_state_sweep_summary.csv")).unwrap();
    assert_eq!(summary.lines().count(), 1 + 2 * 3 * 5);

    let cell_metrics = artifacts(dir.path(), "metrics", ".csv");
    let stamps: Vec<_> = cell_metrics.iter().map(|p| fs::metadata(p).unwrap().modified().unwrap()).collect();
    ok(&mfgcn(&["sweep"], &cfg, dir.path()));
    let again: Vec<_> = cell_metrics.iter().map(|p| fs::metadata(p).unwrap().modified().unwrap()).collect();
    assert_eq!(stamps, again);
    assert_eq!(fs::read_to_string(&all).unwrap(), text);
}

#[test]
fn sweep_results_do_not_depend_on_job_count() {
    let read = |jobs: &str| {
        let dir = tempfile::tempdir().unwrap();
        let cfg = write_config(dir.path(), TWO_STATE);
        let o = Command::new(env!("CARGO_BIN_EXE_mfgcn"))
            .args(["sweep", "--config"])
            .arg(&cfg)
            .arg("--out")
            .arg(dir.path())
            .env("MFGCN_JOBS", jobs)
            .output()
            .unwrap();
        ok(&o);
        ["two_state_sweep_metrics.csv", "two_state_sweep_summary.csv"]
            .map(|f| fs::read_to_string(dir.path().join(f)).unwrap())
    };
    assert_eq!(read("1"), read("3"));
}

#[test]
fn config_errors_exit_with_code_two() {
    let dir = tempfile::tempdir().unwrap();
    for text in [
        r#"{"schema_version": 9, "env": {"env": "two_state"}}"#,
        r#"{"schema_version": 1, "env": {"env": "two_state", "eta": 2.0}}"#,
        r#"{"schema_version": 1, "env": {"env": "two_state"}, "typo": 1}"#,
        "not json",
    ] {
        let cfg = write_config(dir.path(), text);
        let o = mfgcn(&["solve-expert"], &cfg, dir.path());
        assert_eq!(o.status.code(), Some(2), "{text}");
    }
    let o = mfgcn(&["solve-expert"], &dir.path().join("absent.json"), dir.path());
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn missing_expert_is_a_runtime_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), TWO_STATE);
    let o = mfgcn(&["imitate"], &cfg, dir.path());
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("solve-expert"));
}
