use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::mfg::{
    deviation_fields_raw, l1_distance, population_fields, sample_paths, value_on_paths,
    BestResponse, Estimate, Exploitability, MfgModel, Policy,
};
use crate::seed;

/// Below this `|V(expert, expert)|` the relative metrics are reported as absent.
pub const DEGENERATE_VALUE: f64 = 1e-9;

/// Per-step BC and ADV proxies with their Monte-Carlo standard errors.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProxyEstimate {
    pub bc: Vec<f64>,
    pub bc_se: Vec<f64>,
    pub adv: Vec<f64>,
    pub adv_se: Vec<f64>,
    pub n_paths: usize,
}

fn argmax(v: &[f64]) -> usize {
    v.iter().enumerate().fold(0, |best, (i, x)| if *x > v[best] { i } else { best })
}

impl ProxyEstimate {
    pub fn delta_bc(&self) -> f64 {
        self.bc[argmax(&self.bc)]
    }

    pub fn delta_adv(&self) -> f64 {
        self.adv[argmax(&self.adv)]
    }

    /// Standard error at the maximizing step.
    pub fn delta_bc_se(&self) -> f64 {
        self.bc_se[argmax(&self.bc)]
    }

    pub fn delta_adv_se(&self) -> f64 {
        self.adv_se[argmax(&self.adv)]
    }
}

fn column_estimates(samples: &[Vec<f64>], h: usize) -> (Vec<f64>, Vec<f64>) {
    (0..h)
        .map(|t| {
            let col: Vec<f64> = samples.iter().map(|s| s[t]).collect();
            let e = Estimate::from_samples(&col);
            (e.mean, e.se)
        })
        .unzip()
}

/// Per-path `(delta_bc_t, delta_adv_t)` on exact flows.
fn path_proxies(
    expert: &Policy,
    agent: &Policy,
    model: &dyn MfgModel,
    paths: &[crate::mfg::NoisePath],
) -> Result<(Vec<Vec<f64>>, Vec<Vec<f64>>)> {
    let (nx, na, h) = (model.n_states(), model.n_actions(), model.horizon());
    let mut le = vec![0.0; nx * na];
    let mut la_e = vec![0.0; nx * na];
    let mut la_a = vec![0.0; nx * na];
    let mut bc = Vec::with_capacity(paths.len());
    let mut adv = Vec::with_capacity(paths.len());
    for path in paths {
        let rho_e = population_fields(expert, path, model)?;
        let rho_a = population_fields(agent, path, model)?;
        let mut bc_p = vec![0.0; h];
        let mut adv_p = vec![0.0; h];
        for t in 0..h {
            expert.eval_states(t, &rho_e[t], &mut le);
            agent.eval_states(t, &rho_e[t], &mut la_e);
            agent.eval_states(t, &rho_a[t], &mut la_a);
            for x in 0..nx {
                let (re, ra) = (rho_e[t][x], rho_a[t][x]);
                let row = x * na..(x + 1) * na;
                bc_p[t] += re * l1_distance(&la_e[row.clone()], &le[row.clone()]);
                adv_p[t] += le[row.clone()]
                    .iter()
                    .zip(&la_a[row])
                    .map(|(pe, pa)| (ra * pa - re * pe).abs())
                    .sum::<f64>();
            }
        }
        bc.push(bc_p);
        adv.push(adv_p);
    }
    Ok((bc, adv))
}

/// BC and ADV proxies between `expert` and `agent` over `n` shared noise paths.
pub fn proxy_mc(
    expert: &Policy,
    agent: &Policy,
    model: &dyn MfgModel,
    n: usize,
    seed: u64,
) -> Result<ProxyEstimate> {
    assert!(n >= 1, "proxy needs at least one noise path");
    let paths = sample_paths(model, n, seed);
    let (bc, adv) = path_proxies(expert, agent, model, &paths)?;
    let h = model.horizon();
    let (bc_m, bc_se) = column_estimates(&bc, h);
    let (adv_m, adv_se) = column_estimates(&adv, h);
    Ok(ProxyEstimate { bc: bc_m, bc_se, adv: adv_m, adv_se, n_paths: n })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RewardComparison {
    /// `V(agent, expert)`
    pub v_agent: Estimate,
    /// `V(expert, expert)`
    pub v_expert: Estimate,
    /// `(V(agent, expert) - V(expert, expert)) / |V(expert, expert)|`; absent
    /// when the denominator is degenerate.
    pub rel_reward: Option<f64>,
    /// Standard error of the paired difference divided by `|V(expert, expert)|`.
    pub rel_reward_se: Option<f64>,
}

/// Values of the agent and the expert inside the expert population, on shared paths.
pub fn reward_vs_expert(
    expert: &Policy,
    agent: &Policy,
    model: &dyn MfgModel,
    n_mc: usize,
    seed: u64,
) -> Result<RewardComparison> {
    let paths = sample_paths(model, n_mc, seed);
    let (v_agent, a) = value_on_paths(agent, expert, model, &paths)?;
    let (v_expert, e) = value_on_paths(expert, expert, model, &paths)?;
    let diff: Vec<f64> = a.iter().zip(&e).map(|(a, e)| a - e).collect();
    let d = Estimate::from_samples(&diff);
    let denom = v_expert.mean.abs();
    let (rel_reward, rel_reward_se) = if denom > DEGENERATE_VALUE {
        (Some(d.mean / denom), Some(d.se / denom))
    } else {
        (None, None)
    };
    Ok(RewardComparison { v_agent, v_expert, rel_reward, rel_reward_se })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RelativeExploitability {
    pub exploitability: Exploitability,
    pub v_expert: Estimate,
    /// `exploitability / |V(expert, expert)|`, absent when degenerate.
    pub relative: Option<f64>,
}

pub fn relative_exploitability(
    agent: &Policy,
    expert: &Policy,
    model: &dyn MfgModel,
    br_solver: &dyn BestResponse,
    n_mc: usize,
    seed: u64,
) -> Result<RelativeExploitability> {
    let exploitability = crate::mfg::exploitability(agent, model, br_solver, n_mc, seed)?;
    let paths = sample_paths(model, n_mc, seed::derive(seed, 3));
    let (v_expert, _) = value_on_paths(expert, expert, model, &paths)?;
    let denom = v_expert.mean.abs();
    let relative = (denom > DEGENERATE_VALUE).then(|| exploitability.value / denom);
    Ok(RelativeExploitability { exploitability, v_expert, relative })
}

/// One Monte-Carlo inequality `lhs <= rhs`, checked with 3 combined SEs of slack.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LemmaCheck {
    pub lhs: f64,
    pub lhs_se: f64,
    pub rhs: f64,
    pub rhs_se: f64,
    pub pass: bool,
}

impl LemmaCheck {
    fn new(lhs: Estimate, rhs: f64, rhs_se: f64) -> Self {
        let slack = 3.0 * (lhs.se * lhs.se + rhs_se * rhs_se).sqrt();
        Self { lhs: lhs.mean, lhs_se: lhs.se, rhs, rhs_se, pass: lhs.mean <= rhs + slack }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LemmaReport {
    /// `E sum_t ||rho^E_t - rho^EA_t||_1 <= H^2 delta_bc`
    pub rho_bc: LemmaCheck,
    /// `E sum_t ||mu^E_t - mu^EA_t||_1 <= H^2 delta_bc`
    pub mu_bc: LemmaCheck,
    /// `E ||rho^A_t - rho^E_t||_1 <= E ||mu^A_t - mu^E_t||_1` at every step.
    pub adv: Vec<LemmaCheck>,
    /// Largest pathwise excess of the state distance over the state-action
    /// distance; the inequality holds exactly, so this is at most rounding.
    pub adv_pathwise_excess: f64,
    pub proxies: ProxyEstimate,
}

impl LemmaReport {
    pub fn pass(&self) -> bool {
        self.rho_bc.pass && self.mu_bc.pass && self.adv.iter().all(|c| c.pass) && self.adv_pathwise_excess <= 1e-12
    }
}

/// Monte-Carlo left-hand sides of the flow lemmas against the proxy bounds.
pub fn lemma_checks(
    expert: &Policy,
    agent: &Policy,
    model: &dyn MfgModel,
    n: usize,
    seed: u64,
) -> Result<LemmaReport> {
    assert!(n >= 1, "lemma checks need at least one noise path");
    let (nx, na, h) = (model.n_states(), model.n_actions(), model.horizon());
    let paths = sample_paths(model, n, seed);
    let (bc, adv) = path_proxies(expert, agent, model, &paths)?;
    let (bc_m, bc_se) = column_estimates(&bc, h);
    let (adv_m, adv_se) = column_estimates(&adv, h);
    let proxies = ProxyEstimate { bc: bc_m, bc_se, adv: adv_m, adv_se, n_paths: n };

    let mut rho_sum = Vec::with_capacity(n);
    let mut mu_sum = Vec::with_capacity(n);
    let mut rho_step = vec![Vec::with_capacity(n); h];
    let mut excess = 0.0f64;
    let mut le = vec![0.0; nx * na];
    let mut la = vec![0.0; nx * na];
    for (i, path) in paths.iter().enumerate() {
        let rho_e = population_fields(expert, path, model)?;
        let rho_a = population_fields(agent, path, model)?;
        let rho_ea = deviation_fields_raw(agent, &rho_e, path, model)?;
        let (mut rs, mut ms) = (0.0, 0.0);
        for t in 0..h {
            expert.eval_states(t, &rho_e[t], &mut le);
            agent.eval_states(t, &rho_e[t], &mut la);
            rs += l1_distance(&rho_e[t], &rho_ea[t]);
            for x in 0..nx {
                for a in 0..na {
                    ms += (rho_e[t][x] * le[x * na + a] - rho_ea[t][x] * la[x * na + a]).abs();
                }
            }
            let d_rho = l1_distance(&rho_a[t], &rho_e[t]);
            rho_step[t].push(d_rho);
            excess = excess.max(d_rho - adv[i][t]);
        }
        rho_sum.push(rs);
        mu_sum.push(ms);
    }
    let h2 = (h * h) as f64;
    let rhs = h2 * proxies.delta_bc();
    let rhs_se = h2 * proxies.delta_bc_se();
    let adv_checks = (0..h)
        .map(|t| LemmaCheck::new(Estimate::from_samples(&rho_step[t]), proxies.adv[t], proxies.adv_se[t]))
        .collect();
    Ok(LemmaReport {
        rho_bc: LemmaCheck::new(Estimate::from_samples(&rho_sum), rhs, rhs_se),
        mu_bc: LemmaCheck::new(Estimate::from_samples(&mu_sum), rhs, rhs_se),
        adv: adv_checks,
        adv_pathwise_excess: excess,
        proxies,
    })
}
