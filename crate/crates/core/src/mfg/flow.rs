use super::model::{check_dims, MfgModel};
use super::noise::{NoisePath, NoiseSymbol};
use super::policy::Policy;
use super::simplex::{Simplex, StateActionDist, MASS_ABORT_TOL, MASS_RENORM_TOL};
use crate::error::{Error, Result};

/// A realized mean-field sequence together with the noise that produced it.
#[derive(Clone, Debug, PartialEq)]
pub struct FlowTrajectory {
    pub noise: NoisePath,
    /// Population fields `rho_0 .. rho_{H-1}`.
    pub fields: Vec<Simplex>,
    /// Law of a single deviating agent, when computed.
    pub deviation_fields: Option<Vec<Simplex>>,
}

impl FlowTrajectory {
    pub fn horizon(&self) -> usize {
        self.fields.len()
    }
}

/// One propagation step with pre-evaluated action laws.
///
/// `laws` is `|X| x |A|` row-major, evaluated at the population field; `out`
/// receives `sum_{x,a} prev(x) laws[x][a] P(. | x, a, pop, e0)`, renormalized
/// when the mass drifts past 1e-12.
pub fn step_into(
    model: &dyn MfgModel,
    prev: &[f64],
    laws: &[f64],
    pop: &[f64],
    e0: &NoiseSymbol,
    out: &mut [f64],
) -> Result<()> {
    let na = model.n_actions();
    out.iter_mut().for_each(|v| *v = 0.0);
    for (x, &px) in prev.iter().enumerate() {
        if px == 0.0 {
            continue;
        }
        for a in 0..na {
            let w = px * laws[x * na + a];
            if w != 0.0 {
                model.add_transition(x, a, pop, e0, w, out);
            }
        }
    }
    let mass: f64 = out.iter().sum();
    let drift = (mass - 1.0).abs();
    if drift > MASS_ABORT_TOL || !mass.is_finite() {
        return Err(Error::MassDrift { context: "mean-field step", mass });
    }
    if drift > MASS_RENORM_TOL {
        out.iter_mut().for_each(|v| *v /= mass);
    }
    Ok(())
}

/// `Phi_t(prev_agent, policy; pop, e0)`: law at `t + 1` of an agent whose law at
/// `t` is `prev_agent`, who follows `policy`, in a population distributed as `pop`.
pub fn mean_field_step(
    prev_agent: &Simplex,
    policy: &Policy,
    pop: &Simplex,
    e0: &NoiseSymbol,
    t: usize,
    model: &dyn MfgModel,
) -> Result<Simplex> {
    check_dims(model, prev_agent.len(), "mean-field step agent law")?;
    check_dims(model, pop.len(), "mean-field step population")?;
    if policy.n_actions() != model.n_actions() {
        return Err(Error::Dimension {
            context: "policy action count",
            expected: model.n_actions(),
            got: policy.n_actions(),
        });
    }
    if t + 1 >= model.horizon() {
        return Err(Error::InvalidParam(format!(
            "step {t} has no successor within horizon {}",
            model.horizon()
        )));
    }
    let mut laws = vec![0.0; model.n_states() * model.n_actions()];
    policy.eval_states(t, pop.as_slice(), &mut laws);
    let mut out = vec![0.0; model.n_states()];
    step_into(model, prev_agent.as_slice(), &laws, pop.as_slice(), e0, &mut out)?;
    Simplex::from_propagated(out, "mean-field step")
}

fn check_path(model: &dyn MfgModel, noise: &NoisePath) -> Result<()> {
    if noise.len() + 1 != model.horizon() {
        return Err(Error::Dimension {
            context: "noise path length",
            expected: model.horizon() - 1,
            got: noise.len(),
        });
    }
    Ok(())
}

/// Raw population fields, `H` vectors of length `|X|`.
pub(crate) fn population_fields(
    policy: &Policy,
    noise: &NoisePath,
    model: &dyn MfgModel,
) -> Result<Vec<Vec<f64>>> {
    let (nx, na, h) = (model.n_states(), model.n_actions(), model.horizon());
    let mut fields = Vec::with_capacity(h);
    fields.push(model.rho0().as_slice().to_vec());
    let mut laws = vec![0.0; nx * na];
    for t in 0..h - 1 {
        let cur = &fields[t];
        policy.eval_states(t, cur, &mut laws);
        let mut next = vec![0.0; nx];
        step_into(model, cur, &laws, cur, noise.at(t), &mut next)?;
        fields.push(next);
    }
    Ok(fields)
}

/// Raw law of an agent following `dev` inside the population `pop_fields`.
pub(crate) fn deviation_fields_raw(
    dev: &Policy,
    pop_fields: &[Vec<f64>],
    noise: &NoisePath,
    model: &dyn MfgModel,
) -> Result<Vec<Vec<f64>>> {
    let (nx, na, h) = (model.n_states(), model.n_actions(), model.horizon());
    let mut fields = Vec::with_capacity(h);
    fields.push(model.rho0().as_slice().to_vec());
    let mut laws = vec![0.0; nx * na];
    for t in 0..h - 1 {
        dev.eval_states(t, &pop_fields[t], &mut laws);
        let mut next = vec![0.0; nx];
        step_into(model, &fields[t], &laws, &pop_fields[t], noise.at(t), &mut next)?;
        fields.push(next);
    }
    Ok(fields)
}

fn wrap(fields: Vec<Vec<f64>>) -> Result<Vec<Simplex>> {
    fields.into_iter().map(|f| Simplex::from_propagated(f, "flow field")).collect()
}

/// Mean-field sequence when every agent follows `policy`.
pub fn population_flow(
    policy: &Policy,
    noise: &NoisePath,
    model: &dyn MfgModel,
) -> Result<FlowTrajectory> {
    check_path(model, noise)?;
    let fields = population_fields(policy, noise, model)?;
    Ok(FlowTrajectory { noise: noise.clone(), fields: wrap(fields)?, deviation_fields: None })
}

/// Population flow of `pop_policy` plus the law of one agent following `dev_policy`.
pub fn deviation_flow(
    pop_policy: &Policy,
    dev_policy: &Policy,
    noise: &NoisePath,
    model: &dyn MfgModel,
) -> Result<FlowTrajectory> {
    check_path(model, noise)?;
    let pop = population_fields(pop_policy, noise, model)?;
    let dev = deviation_fields_raw(dev_policy, &pop, noise, model)?;
    Ok(FlowTrajectory {
        noise: noise.clone(),
        fields: wrap(pop)?,
        deviation_fields: Some(wrap(dev)?),
    })
}

/// `mu_t(x, a) = dev_field_t(x) * dev_policy(a | t, x, pop_field_t)`.
///
/// Uses the deviation fields when present, otherwise the population fields.
pub fn state_action_dist(
    flow: &FlowTrajectory,
    dev_policy: &Policy,
    t: usize,
) -> Result<StateActionDist> {
    if t >= flow.fields.len() {
        return Err(Error::InvalidParam(format!("time {t} past horizon {}", flow.fields.len())));
    }
    let pop = &flow.fields[t];
    let agent = flow.deviation_fields.as_ref().map_or(pop, |d| &d[t]);
    let (nx, na) = (pop.len(), dev_policy.n_actions());
    let mut laws = vec![0.0; nx * na];
    dev_policy.eval_states(t, pop.as_slice(), &mut laws);
    for (x, row) in laws.chunks_mut(na).enumerate() {
        row.iter_mut().for_each(|v| *v *= agent[x]);
    }
    StateActionDist::from_parts(nx, na, laws)
}
