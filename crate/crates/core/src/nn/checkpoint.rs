use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use serde_json::{json, Value};

use super::mlp::{Mlp, MlpPolicy};
use crate::container;
use crate::error::{Error, Result};
use crate::mfg::{AdaptiveGrid, KernelNw, Policy, VanillaTabular};

pub const CHECKPOINT_MAGIC: &[u8; 8] = b"MFGCNPOL";
const FORMAT_VERSION: u64 = 1;

fn encode(policy: &Policy, arrays: &mut Vec<Vec<f64>>) -> Value {
    let mut push = |v: Vec<f64>| {
        arrays.push(v);
        arrays.len() - 1
    };
    match policy {
        Policy::Tabular(p) => json!({
            "kind": policy.kind(),
            "horizon": p.horizon,
            "n_states": p.n_states,
            "n_actions": p.n_actions,
            "table": push(p.table().to_vec()),
        }),
        Policy::Grid(p) => json!({
            "kind": policy.kind(),
            "horizon": p.horizon,
            "n_points": p.n_points(),
            "n_actions": p.n_actions,
            "table": push(p.table().to_vec()),
        }),
        Policy::Kernel(p) => json!({
            "kind": policy.kind(),
            "horizon": p.horizon,
            "n_states": p.n_states,
            "n_actions": p.n_actions,
            "bandwidth": p.bandwidth,
            "n_traj": p.n_traj(),
            "fields": push(p.fields().to_vec()),
            "counts": push(p.counts().to_vec()),
        }),
        Policy::Mlp(p) => json!({
            "kind": policy.kind(),
            "horizon": p.horizon(),
            "adaptive": p.adaptive(),
            "n_onehot": p.net().n_onehot(),
            "sizes": p.net().sizes(),
            "params": push(p.net().params().to_vec()),
        }),
        Policy::Mixture(parts) => {
            let weights: Vec<f64> = parts.iter().map(|(w, _)| *w).collect();
            let components: Vec<Value> = parts.iter().map(|(_, p)| encode(p, arrays)).collect();
            json!({ "kind": policy.kind(), "weights": weights, "components": components })
        }
    }
}

fn field<T: serde::de::DeserializeOwned>(meta: &Value, key: &str) -> Result<T> {
    serde_json::from_value(meta[key].clone())
        .map_err(|e| Error::Format(format!("checkpoint field {key}: {e}")))
}

fn take(arrays: &mut [Option<Vec<f64>>], meta: &Value, key: &str) -> Result<Vec<f64>> {
    let i: usize = field(meta, key)?;
    arrays
        .get_mut(i)
        .and_then(Option::take)
        .ok_or_else(|| Error::Format(format!("checkpoint array {i} missing or reused")))
}

fn decode(meta: &Value, arrays: &mut [Option<Vec<f64>>]) -> Result<Policy> {
    let kind: String = field(meta, "kind")?;
    Ok(match kind.as_str() {
        "vanilla_tabular" => Policy::Tabular(VanillaTabular::from_table(
            field(meta, "horizon")?,
            field(meta, "n_states")?,
            field(meta, "n_actions")?,
            take(arrays, meta, "table")?,
        )?),
        "adaptive_grid" => Policy::Grid(AdaptiveGrid::from_table(
            field(meta, "horizon")?,
            field(meta, "n_points")?,
            field(meta, "n_actions")?,
            take(arrays, meta, "table")?,
        )?),
        "kernel_nw" => Policy::Kernel(KernelNw::from_parts(
            field(meta, "horizon")?,
            field(meta, "n_states")?,
            field(meta, "n_actions")?,
            field(meta, "bandwidth")?,
            field(meta, "n_traj")?,
            take(arrays, meta, "fields")?,
            take(arrays, meta, "counts")?,
        )?),
        "parametric_mlp" => {
            let net = Mlp::from_parts(
                field(meta, "n_onehot")?,
                field(meta, "sizes")?,
                take(arrays, meta, "params")?,
            )?;
            Policy::Mlp(MlpPolicy::from_net(net, field(meta, "adaptive")?, field(meta, "horizon")?)?)
        }
        "mixture" => {
            let weights: Vec<f64> = field(meta, "weights")?;
            let comps = meta["components"]
                .as_array()
                .ok_or_else(|| Error::Format("mixture without components".into()))?;
            if comps.len() != weights.len() {
                return Err(Error::Format("mixture weights and components differ".into()));
            }
            let parts = weights
                .into_iter()
                .zip(comps)
                .map(|(w, c)| Ok((w, decode(c, arrays)?)))
                .collect::<Result<Vec<_>>>()?;
            Policy::mixture(parts)?
        }
        other => return Err(Error::Format(format!("unknown policy kind {other}"))),
    })
}

/// Serializes `policy` with free-form `meta` (environment, stage, config hash, ...).
pub fn write_policy(w: &mut dyn Write, policy: &Policy, meta: Value) -> Result<()> {
    let mut arrays = Vec::new();
    let tree = encode(policy, &mut arrays);
    let header = json!({ "format_version": FORMAT_VERSION, "meta": meta, "policy": tree });
    container::write(w, CHECKPOINT_MAGIC, header, &arrays)
}

/// Returns the policy and the `meta` value it was saved with.
pub fn read_policy(r: &mut dyn Read) -> Result<(Policy, Value)> {
    let (header, arrays) = container::read(r, CHECKPOINT_MAGIC)?;
    let version: u64 = field(&header, "format_version")?;
    if version != FORMAT_VERSION {
        return Err(Error::Format(format!("unsupported checkpoint version {version}")));
    }
    let mut slots: Vec<Option<Vec<f64>>> = arrays.into_iter().map(Some).collect();
    let policy = decode(&header["policy"], &mut slots)?;
    Ok((policy, header["meta"].clone()))
}

pub fn save_policy(path: &Path, policy: &Policy, meta: Value) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    write_policy(&mut w, policy, meta)?;
    w.flush()?;
    Ok(())
}

pub fn load_policy(path: &Path) -> Result<(Policy, Value)> {
    read_policy(&mut BufReader::new(File::open(path)?))
}
