use super::mlp::{Batch, MlpPolicy};
use crate::error::{Error, Result};
use crate::mfg::{step_into, FlowTrajectory, MfgModel};

fn check_inputs(policy: &MlpPolicy, targets: &[FlowTrajectory], model: &dyn MfgModel) -> Result<()> {
    if targets.is_empty() {
        return Err(Error::InvalidParam("loss needs at least one target flow".into()));
    }
    if policy.n_states() != model.n_states() {
        return Err(Error::Dimension {
            context: "policy state count",
            expected: model.n_states(),
            got: policy.n_states(),
        });
    }
    if policy.n_actions() != model.n_actions() {
        return Err(Error::Dimension {
            context: "policy action count",
            expected: model.n_actions(),
            got: policy.n_actions(),
        });
    }
    for tr in targets {
        if tr.fields.len() != model.horizon() || tr.noise.len() + 1 != model.horizon() {
            return Err(Error::Dimension {
                context: "target flow length",
                expected: model.horizon(),
                got: tr.fields.len(),
            });
        }
    }
    Ok(())
}

fn check_grad(grad: &[f64]) -> Result<()> {
    match grad.iter().position(|g| !g.is_finite()) {
        Some(i) => Err(Error::NonFinite { what: "gradient", index: i }),
        None => Ok(()),
    }
}

fn sign(v: f64) -> f64 {
    if v > 0.0 {
        1.0
    } else if v < 0.0 {
        -1.0
    } else {
        0.0
    }
}

/// Negative expected return of a single agent following `policy` while the
/// population follows the frozen target flows; averaged over the flows.
///
/// Returns the loss and its gradient with respect to the network parameters.
/// The agent's law is propagated exactly; the gradient comes from a backward
/// induction of the adjoint `g_t(x) = d loss / d rho_t(x)`.
pub fn value_loss_and_grad(
    policy: &MlpPolicy,
    targets: &[FlowTrajectory],
    model: &dyn MfgModel,
) -> Result<(f64, Vec<f64>)> {
    check_inputs(policy, targets, model)?;
    let (nx, na, h) = (model.n_states(), model.n_actions(), model.horizon());
    let bsz = targets.len() as f64;
    let net = policy.net();

    let mut batch = Batch::new(policy.ctx_dim());
    for tr in targets {
        for t in 0..h {
            let c = batch.push_ctx(&policy.context(t, tr.fields[t].as_slice()));
            batch.rows.extend((0..nx).map(|x| (x, c)));
        }
    }
    let tape = net.forward_tape(&batch);
    let probs = tape.probs();
    let block = nx * na;
    let laws = |s: usize, t: usize| &probs[(s * h + t) * block..(s * h + t + 1) * block];

    let mut d_probs = vec![0.0; probs.len()];
    let mut loss = 0.0;
    let mut scratch = vec![0.0; nx];
    for (s, tr) in targets.iter().enumerate() {
        let mut agent = vec![model.rho0().as_slice().to_vec()];
        for t in 0..h - 1 {
            let mut next = vec![0.0; nx];
            let pop = tr.fields[t].as_slice();
            step_into(model, &agent[t], laws(s, t), pop, tr.noise.at(t), &mut next)?;
            agent.push(next);
        }
        let mut path = 0.0;
        let mut g_next = vec![0.0; nx];
        for t in (0..h).rev() {
            let pop = tr.fields[t].as_slice();
            let pi = laws(s, t);
            let mut g = vec![0.0; nx];
            for x in 0..nx {
                for a in 0..na {
                    let r = model.reward(x, a, pop);
                    path -= agent[t][x] * pi[x * na + a] * r;
                    let mut q = -r / bsz;
                    if t + 1 < h {
                        q += model.expect_next(x, a, pop, tr.noise.at(t), &g_next, &mut scratch);
                    }
                    d_probs[(s * h + t) * block + x * na + a] = agent[t][x] * q;
                    g[x] += pi[x * na + a] * q;
                }
            }
            g_next = g;
        }
        if !path.is_finite() {
            return Err(Error::NonFinite { what: "value loss", index: s });
        }
        loss += path / bsz;
    }
    let mut grad = vec![0.0; net.params().len()];
    tape.backward(net, &d_probs, &mut grad);
    check_grad(&grad)?;
    Ok((loss, grad))
}

/// `(1/B) sum_s sum_t ||rho^theta_t - target_t||_1` where `rho^theta` is the
/// population flow generated by `policy` under each target's noise path.
pub fn l1_flow_loss_and_grad(
    policy: &MlpPolicy,
    targets: &[FlowTrajectory],
    model: &dyn MfgModel,
) -> Result<(f64, Vec<f64>)> {
    check_inputs(policy, targets, model)?;
    let (nx, na, h) = (model.n_states(), model.n_actions(), model.horizon());
    let nb = targets.len();
    let bsz = nb as f64;
    let net = policy.net();
    let adaptive = policy.adaptive();
    let cd = policy.ctx_dim();
    let block = nx * na;
    // a non-adaptive network gives the same laws to every path
    let law_index = |s: usize| if adaptive { s } else { 0 };

    let mut rho: Vec<Vec<Vec<f64>>> = vec![vec![model.rho0().as_slice().to_vec()]; nb];
    let mut tapes = Vec::with_capacity(h.saturating_sub(1));
    for t in 0..h - 1 {
        let mut batch = Batch::new(cd);
        let n_groups = if adaptive { nb } else { 1 };
        for s in 0..n_groups {
            let c = batch.push_ctx(&policy.context(t, &rho[s][t]));
            batch.rows.extend((0..nx).map(|x| (x, c)));
        }
        let tape = net.forward_tape(&batch);
        for (s, tr) in targets.iter().enumerate() {
            let laws = &tape.probs()[law_index(s) * block..(law_index(s) + 1) * block];
            let mut next = vec![0.0; nx];
            let cur = &rho[s][t];
            step_into(model, cur, laws, cur, tr.noise.at(t), &mut next)?;
            rho[s].push(next);
        }
        tapes.push(tape);
    }

    let mut loss = 0.0;
    for (s, tr) in targets.iter().enumerate() {
        let path: f64 = (0..h)
            .map(|t| {
                rho[s][t].iter().zip(tr.fields[t].as_slice()).map(|(a, b)| (a - b).abs()).sum::<f64>()
            })
            .sum();
        if !path.is_finite() {
            return Err(Error::NonFinite { what: "flow loss", index: s });
        }
        loss += path / bsz;
    }

    let sign_term = |s: usize, t: usize| -> Vec<f64> {
        rho[s][t]
            .iter()
            .zip(targets[s].fields[t].as_slice())
            .map(|(a, b)| sign(a - b) / bsz)
            .collect()
    };
    let mut grad = vec![0.0; net.params().len()];
    let mut g_next: Vec<Vec<f64>> = (0..nb).map(|s| sign_term(s, h - 1)).collect();
    let mut scratch = vec![0.0; nx];
    for t in (0..h - 1).rev() {
        let tape = &tapes[t];
        let mut d_probs = vec![0.0; tape.probs().len()];
        let mut g_cur: Vec<Vec<f64>> = (0..nb).map(|s| sign_term(s, t)).collect();
        for (s, tr) in targets.iter().enumerate() {
            let cur = &rho[s][t];
            let e0 = tr.noise.at(t);
            let li = law_index(s);
            let laws = &tape.probs()[li * block..(li + 1) * block];
            for x in 0..nx {
                for a in 0..na {
                    let p = laws[x * na + a];
                    let e = model.expect_next(x, a, cur, e0, &g_next[s], &mut scratch);
                    d_probs[li * block + x * na + a] += cur[x] * e;
                    g_cur[s][x] += p * e;
                    if model.kernel_depends_on_rho() && cur[x] * p != 0.0 {
                        model.add_transition_vjp(x, a, cur, e0, &g_next[s], cur[x] * p, &mut g_cur[s]);
                    }
                }
            }
        }
        let d_ctx = tape.backward(net, &d_probs, &mut grad);
        if adaptive {
            for (s, g) in g_cur.iter_mut().enumerate() {
                for (y, gy) in g.iter_mut().enumerate() {
                    *gy += d_ctx[s * cd + 1 + y];
                }
            }
        }
        g_next = g_cur;
    }
    check_grad(&grad)?;
    Ok((loss, grad))
}

/// Weighted behaviour-cloning rows: `(context, state, target law, weight)`.
#[derive(Clone, Debug)]
pub struct BcBatch {
    batch: Batch,
    targets: Vec<f64>,
    weights: Vec<f64>,
    n_actions: usize,
}

impl BcBatch {
    pub fn new(policy: &MlpPolicy) -> Self {
        Self {
            batch: Batch::new(policy.ctx_dim()),
            targets: Vec::new(),
            weights: Vec::new(),
            n_actions: policy.n_actions(),
        }
    }

    pub fn push_context(&mut self, policy: &MlpPolicy, t: usize, rho: &[f64]) -> usize {
        self.batch.push_ctx(&policy.context(t, rho))
    }

    pub fn push_row(&mut self, ctx: usize, x: usize, target: &[f64], weight: f64) {
        assert_eq!(target.len(), self.n_actions);
        self.batch.rows.push((x, ctx));
        self.targets.extend_from_slice(target);
        self.weights.push(weight);
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }
}

/// `sum_i w_i ||pi(row_i) - target_i||_1 / sum_i w_i`, which lies in `[0, 2]`.
pub fn bc_loss_and_grad(policy: &MlpPolicy, data: &BcBatch) -> Result<(f64, Vec<f64>)> {
    let total: f64 = data.weights.iter().sum();
    if data.is_empty() || !(total > 0.0) {
        return Err(Error::InvalidParam("behaviour cloning needs positive total weight".into()));
    }
    let na = data.n_actions;
    let net = policy.net();
    let tape = net.forward_tape(&data.batch);
    let probs = tape.probs();
    let mut d_probs = vec![0.0; probs.len()];
    let mut loss = 0.0;
    for (i, &w) in data.weights.iter().enumerate() {
        for a in 0..na {
            let k = i * na + a;
            let diff = probs[k] - data.targets[k];
            loss += w * diff.abs() / total;
            d_probs[k] = w * sign(diff) / total;
        }
    }
    if !loss.is_finite() {
        return Err(Error::NonFinite { what: "behaviour cloning loss", index: 0 });
    }
    let mut grad = vec![0.0; net.params().len()];
    tape.backward(net, &d_probs, &mut grad);
    check_grad(&grad)?;
    Ok((loss, grad))
}
