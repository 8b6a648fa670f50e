use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One evaluated policy. Serializes to a single CSV row (per-step arrays are
/// `;`-joined, absent values are empty) or to JSON.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct MetricsRecord {
    pub env: String,
    pub alpha: f64,
    pub eta: f64,
    pub policy: String,
    pub seed: u64,
    pub n_paths: usize,
    pub n_mc: usize,
    pub delta_bc: f64,
    pub delta_bc_se: f64,
    pub delta_adv: f64,
    pub delta_adv_se: f64,
    pub v_expert: f64,
    pub v_expert_se: f64,
    pub v_agent_vs_expert: f64,
    pub v_agent_vs_expert_se: f64,
    pub rel_reward: Option<f64>,
    pub rel_reward_se: Option<f64>,
    pub exploitability: f64,
    pub exploitability_raw: f64,
    pub exploitability_se: f64,
    pub rel_exploitability: Option<f64>,
    pub delta_bc_t: Vec<f64>,
    pub delta_adv_t: Vec<f64>,
}

impl MetricsRecord {
    pub const CSV_HEADER: [&'static str; 23] = [
        "env",
        "alpha",
        "eta",
        "policy",
        "seed",
        "n_paths",
        "n_mc",
        "delta_bc",
        "delta_bc_se",
        "delta_adv",
        "delta_adv_se",
        "v_expert",
        "v_expert_se",
        "v_agent_vs_expert",
        "v_agent_vs_expert_se",
        "rel_reward",
        "rel_reward_se",
        "exploitability",
        "exploitability_raw",
        "exploitability_se",
        "rel_exploitability",
        "delta_bc_t",
        "delta_adv_t",
    ];

    pub fn csv_row(&self) -> Vec<String> {
        let opt = |v: Option<f64>| v.map(|v| v.to_string()).unwrap_or_default();
        let arr = |v: &[f64]| v.iter().map(f64::to_string).collect::<Vec<_>>().join(";");
        vec![
            self.env.clone(),
            self.alpha.to_string(),
            self.eta.to_string(),
            self.policy.clone(),
            self.seed.to_string(),
            self.n_paths.to_string(),
            self.n_mc.to_string(),
            self.delta_bc.to_string(),
            self.delta_bc_se.to_string(),
            self.delta_adv.to_string(),
            self.delta_adv_se.to_string(),
            self.v_expert.to_string(),
            self.v_expert_se.to_string(),
            self.v_agent_vs_expert.to_string(),
            self.v_agent_vs_expert_se.to_string(),
            opt(self.rel_reward),
            opt(self.rel_reward_se),
            self.exploitability.to_string(),
            self.exploitability_raw.to_string(),
            self.exploitability_se.to_string(),
            opt(self.rel_exploitability),
            arr(&self.delta_bc_t),
            arr(&self.delta_adv_t),
        ]
    }

    pub fn from_csv_row<S: AsRef<str>>(row: &[S]) -> Result<Self> {
        if row.len() != Self::CSV_HEADER.len() {
            return Err(Error::Format(format!(
                "metrics row has {} fields, expected {}",
                row.len(),
                Self::CSV_HEADER.len()
            )));
        }
        let f = |i: usize| row[i].as_ref();
        let num = |i: usize| -> Result<f64> {
            f(i).parse().map_err(|_| Error::Format(format!("{}: {:?}", Self::CSV_HEADER[i], f(i))))
        };
        let int = |i: usize| -> Result<u64> {
            f(i).parse().map_err(|_| Error::Format(format!("{}: {:?}", Self::CSV_HEADER[i], f(i))))
        };
        let opt = |i: usize| -> Result<Option<f64>> {
            if f(i).is_empty() {
                Ok(None)
            } else {
                num(i).map(Some)
            }
        };
        let arr = |i: usize| -> Result<Vec<f64>> {
            if f(i).is_empty() {
                return Ok(Vec::new());
            }
            f(i).split(';')
                .map(|v| v.parse().map_err(|_| Error::Format(format!("{}: {v:?}", Self::CSV_HEADER[i]))))
                .collect()
        };
        Ok(Self {
            env: f(0).to_string(),
            alpha: num(1)?,
            eta: num(2)?,
            policy: f(3).to_string(),
            seed: int(4)?,
            n_paths: int(5)? as usize,
            n_mc: int(6)? as usize,
            delta_bc: num(7)?,
            delta_bc_se: num(8)?,
            delta_adv: num(9)?,
            delta_adv_se: num(10)?,
            v_expert: num(11)?,
            v_expert_se: num(12)?,
            v_agent_vs_expert: num(13)?,
            v_agent_vs_expert_se: num(14)?,
            rel_reward: opt(15)?,
            rel_reward_se: opt(16)?,
            exploitability: num(17)?,
            exploitability_raw: num(18)?,
            exploitability_se: num(19)?,
            rel_exploitability: opt(20)?,
            delta_bc_t: arr(21)?,
            delta_adv_t: arr(22)?,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_round_trip() {
        let r = MetricsRecord {
            env: "two_state".into(),
            alpha: 1.75,
            eta: 0.75,
            policy: "adaptive".into(),
            seed: 3,
            delta_bc: 0.125,
            rel_reward: Some(-0.01),
            delta_bc_t: vec![0.0, 0.1, 0.125],
            delta_adv_t: vec![0.0, 1e-17],
            ..Default::default()
        };
        assert_eq!(MetricsRecord::from_csv_row(&r.csv_row()).unwrap(), r);
        assert!(MetricsRecord::from_csv_row(&["x"]).is_err());
    }
}
