use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use rand::Rng as _;
use serde_json::json;

use crate::container;
use crate::error::{Error, Result};
use crate::mfg::{population_fields, MfgModel, NoisePath, NoiseSymbol, Policy};
use crate::seed;

pub const DATASET_MAGIC: &[u8; 8] = b"MFGCNDAT";

/// `M` agents simulated along one noise path.
#[derive(Clone, Debug, PartialEq)]
pub struct AgentRollout {
    /// `[t][m]`
    pub states: Vec<u32>,
    /// `[t][m]`
    pub actions: Vec<u32>,
    /// Empirical fields `[t][x]`, multiples of `1 / M`.
    pub empirical: Vec<f64>,
    /// Exact expert fields `[t][x]`.
    pub exact: Vec<f64>,
}

fn sample_index(weights: &[f64], u: f64) -> usize {
    let mut acc = 0.0;
    for (i, w) in weights.iter().enumerate() {
        acc += w;
        if u < acc {
            return i;
        }
    }
    // u landed in the rounding gap above the cumulative mass
    weights.iter().rposition(|w| *w > 0.0).unwrap_or(0)
}

/// Simulates `m` agents following `expert`; transitions and action laws are
/// evaluated at the exact expert field along `noise`.
pub fn simulate_agents(
    expert: &Policy,
    model: &dyn MfgModel,
    noise: &NoisePath,
    m: usize,
    rng: &mut seed::Rng,
) -> Result<AgentRollout> {
    let (nx, na, h) = (model.n_states(), model.n_actions(), model.horizon());
    let exact = population_fields(expert, noise, model)?;
    let rho0 = model.rho0().as_slice();
    let mut states = Vec::with_capacity(h * m);
    let mut actions = Vec::with_capacity(h * m);
    let mut empirical = Vec::with_capacity(h * nx);
    let mut cur: Vec<usize> = (0..m).map(|_| sample_index(rho0, rng.random())).collect();
    let mut laws = vec![0.0; nx * na];
    let mut kernel = vec![0.0; nx * na * nx];
    for t in 0..h {
        let mut counts = vec![0usize; nx];
        cur.iter().for_each(|&x| counts[x] += 1);
        empirical.extend(counts.iter().map(|&c| c as f64 / m as f64));
        expert.eval_states(t, &exact[t], &mut laws);
        let act: Vec<usize> =
            cur.iter().map(|&x| sample_index(&laws[x * na..(x + 1) * na], rng.random())).collect();
        states.extend(cur.iter().map(|&x| x as u32));
        actions.extend(act.iter().map(|&a| a as u32));
        if t + 1 < h {
            kernel.iter_mut().for_each(|v| *v = 0.0);
            for x in 0..nx {
                for a in 0..na {
                    let row = &mut kernel[(x * na + a) * nx..(x * na + a + 1) * nx];
                    model.add_transition(x, a, &exact[t], noise.at(t), 1.0, row);
                }
            }
            for (x, a) in cur.iter_mut().zip(&act) {
                let row = &kernel[(*x * na + a) * nx..(*x * na + a + 1) * nx];
                *x = sample_index(row, rng.random());
            }
        }
    }
    Ok(AgentRollout { states, actions, empirical, exact: exact.concat() })
}

/// `N` independent trajectories of `M` expert agents.
#[derive(Clone, Debug, PartialEq)]
pub struct ExpertDataset {
    pub env: String,
    pub seed: u64,
    pub n_agents: usize,
    pub horizon: usize,
    pub n_states: usize,
    pub n_actions: usize,
    pub noise: Vec<NoisePath>,
    pub rollouts: Vec<AgentRollout>,
}

/// Trajectory `n` draws its noise and agents from sub-stream `n` of `seed`.
pub fn generate_dataset(
    expert: &Policy,
    model: &dyn MfgModel,
    n: usize,
    m: usize,
    seed: u64,
) -> Result<ExpertDataset> {
    if n == 0 || m == 0 {
        return Err(Error::InvalidParam("dataset needs N, M >= 1".into()));
    }
    let mut noise = Vec::with_capacity(n);
    let mut rollouts = Vec::with_capacity(n);
    for i in 0..n {
        let mut rng = seed::stream_rng(seed, i as u64);
        let path = NoisePath::sample(model, &mut rng);
        rollouts.push(simulate_agents(expert, model, &path, m, &mut rng)?);
        noise.push(path);
    }
    Ok(ExpertDataset {
        env: model.id().to_string(),
        seed,
        n_agents: m,
        horizon: model.horizon(),
        n_states: model.n_states(),
        n_actions: model.n_actions(),
        noise,
        rollouts,
    })
}

impl ExpertDataset {
    pub fn n_traj(&self) -> usize {
        self.rollouts.len()
    }

    fn noise_kind(&self) -> &'static str {
        match self.noise.first().and_then(|p| p.symbols().first()) {
            Some(NoiseSymbol::Shifts(_)) => "shifts",
            _ => "scalar",
        }
    }

    pub fn write(&self, w: &mut dyn Write) -> Result<()> {
        let header = json!({
            "format_version": 1,
            "env": self.env,
            "seed": self.seed,
            "n_traj": self.n_traj(),
            "n_agents": self.n_agents,
            "horizon": self.horizon,
            "n_states": self.n_states,
            "n_actions": self.n_actions,
            "noise_kind": self.noise_kind(),
        });
        let mut noise = Vec::new();
        for p in &self.noise {
            for s in p.symbols() {
                match s {
                    NoiseSymbol::Scalar(v) => noise.push(*v),
                    NoiseSymbol::Shifts(v) => noise.extend(v.iter().map(|s| *s as f64)),
                }
            }
        }
        let cat = |f: fn(&AgentRollout) -> Vec<f64>| self.rollouts.iter().flat_map(f).collect();
        let arrays = vec![
            noise,
            cat(|r| r.states.iter().map(|v| *v as f64).collect()),
            cat(|r| r.actions.iter().map(|v| *v as f64).collect()),
            cat(|r| r.empirical.clone()),
            cat(|r| r.exact.clone()),
        ];
        container::write(w, DATASET_MAGIC, header, &arrays)
    }

    pub fn read(r: &mut dyn Read) -> Result<Self> {
        let (h, arrays) = container::read(r, DATASET_MAGIC)?;
        let get = |k: &str| {
            h[k].as_u64().map(|v| v as usize).ok_or_else(|| Error::Format(format!("dataset field {k}")))
        };
        let (n, m, hz, nx, na) =
            (get("n_traj")?, get("n_agents")?, get("horizon")?, get("n_states")?, get("n_actions")?);
        let [noise, states, actions, empirical, exact]: [Vec<f64>; 5] =
            arrays.try_into().map_err(|_| Error::Format("dataset needs 5 arrays".into()))?;
        let shifts = h["noise_kind"] == "shifts";
        let per_symbol = if shifts { nx } else { 1 };
        let steps = hz.saturating_sub(1);
        let check = |name: &str, got: usize, want: usize| {
            if got == want {
                Ok(())
            } else {
                Err(Error::Format(format!("dataset array {name}: {got} values, expected {want}")))
            }
        };
        check("noise", noise.len(), n * steps * per_symbol)?;
        check("states", states.len(), n * hz * m)?;
        check("actions", actions.len(), n * hz * m)?;
        check("empirical", empirical.len(), n * hz * nx)?;
        check("exact", exact.len(), n * hz * nx)?;
        let mut paths = Vec::with_capacity(n);
        let stride = steps * per_symbol;
        for i in 0..n {
            let chunk = &noise[i * stride..(i + 1) * stride];
            let symbols = chunk
                .chunks(per_symbol)
                .map(|c| {
                    if shifts {
                        NoiseSymbol::Shifts(c.iter().map(|v| *v as i32).collect())
                    } else {
                        NoiseSymbol::Scalar(c[0])
                    }
                })
                .collect();
            paths.push(NoisePath::new(symbols, hz)?);
        }
        let to_u32 = |v: &[f64]| -> Vec<u32> { v.iter().map(|x| *x as u32).collect() };
        let rollouts = (0..n)
            .map(|i| AgentRollout {
                states: to_u32(&states[i * hz * m..(i + 1) * hz * m]),
                actions: to_u32(&actions[i * hz * m..(i + 1) * hz * m]),
                empirical: empirical[i * hz * nx..(i + 1) * hz * nx].to_vec(),
                exact: exact[i * hz * nx..(i + 1) * hz * nx].to_vec(),
            })
            .collect::<Vec<_>>();
        if rollouts.iter().any(|r| {
            r.states.iter().any(|s| *s as usize >= nx) || r.actions.iter().any(|a| *a as usize >= na)
        }) {
            return Err(Error::Format("state or action out of range".into()));
        }
        Ok(Self {
            env: h["env"].as_str().unwrap_or_default().to_string(),
            seed: h["seed"].as_u64().unwrap_or_default(),
            n_agents: m,
            horizon: hz,
            n_states: nx,
            n_actions: na,
            noise: paths,
            rollouts,
        })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let mut w = BufWriter::new(File::create(path)?);
        self.write(&mut w)?;
        w.flush()?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::read(&mut BufReader::new(File::open(path)?))
    }

    /// `traj,t,agent,state,action` rows for inspection.
    pub fn write_csv(&self, w: &mut dyn Write) -> Result<()> {
        writeln!(w, "traj,t,agent,state,action")?;
        let m = self.n_agents;
        for (n, r) in self.rollouts.iter().enumerate() {
            for t in 0..self.horizon {
                for k in 0..m {
                    writeln!(w, "{n},{t},{k},{},{}", r.states[t * m + k], r.actions[t * m + k])?;
                }
            }
        }
        Ok(())
    }
}
