use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::mfg::{l1_distance, population_fields, sample_paths, MfgModel, Policy};
use crate::seed;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EstimateMethod {
    Analytic,
    #[default]
    Sampled,
}

/// Lipschitz constants and reward bound. Sampled values are lower bounds of
/// the true constants.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct LipschitzEstimates {
    pub l_r: f64,
    pub l_p: f64,
    pub l_e: f64,
    /// `max |r|` over every probed field.
    pub r_max: f64,
    /// `max |r|` over fields visited by the policy's flows only.
    pub r_max_flow: f64,
    pub l_r_method: EstimateMethod,
    pub l_p_method: EstimateMethod,
    pub l_e_method: EstimateMethod,
}

fn random_simplex(n: usize, rng: &mut seed::Rng) -> Vec<f64> {
    let e: Vec<f64> = (0..n).map(|_| -(1.0 - rng.random::<f64>()).ln()).collect();
    let s: f64 = e.iter().sum();
    e.into_iter().map(|v| v / s).collect()
}

/// Pure sampling estimate, no analytic overrides.
///
/// Fields are drawn from `policy`'s flows and, for half the probes, uniformly
/// on the simplex; each probe compares two fields at a random `(t, x, a, e0)`.
pub fn estimate_lipschitz_sampled(
    model: &dyn MfgModel,
    policy: &Policy,
    n_probe: usize,
    seed: u64,
) -> Result<LipschitzEstimates> {
    assert!(n_probe >= 1, "need at least one probe");
    let (nx, na, h) = (model.n_states(), model.n_actions(), model.horizon());
    let mut rng = seed::rng(seed::derive(seed, 0));
    let n_paths = n_probe.div_ceil(h).clamp(1, 64);
    let mut flow_fields = Vec::new();
    for path in sample_paths(model, n_paths, seed::derive(seed, 1)) {
        for (t, f) in population_fields(policy, &path, model)?.into_iter().enumerate() {
            flow_fields.push((t, f));
        }
    }
    let mut est = LipschitzEstimates::default();
    for (_, f) in &flow_fields {
        for x in 0..nx {
            for a in 0..na {
                est.r_max_flow = est.r_max_flow.max(model.reward(x, a, f).abs());
            }
        }
    }
    est.r_max = est.r_max_flow;
    let mut pa = vec![0.0; nx];
    let mut pb = vec![0.0; nx];
    let mut la = vec![0.0; nx * na];
    let mut lb = vec![0.0; nx * na];
    for k in 0..n_probe {
        let pick = |rng: &mut seed::Rng| -> (usize, Vec<f64>) {
            if k % 2 == 0 {
                let (t, f) = &flow_fields[rng.random_range(0..flow_fields.len())];
                (*t, f.clone())
            } else {
                (rng.random_range(0..h), random_simplex(nx, rng))
            }
        };
        let (t, ra) = pick(&mut rng);
        let rb = if rng.random_bool(0.5) {
            // a nearby field probes the local slope
            let eps: f64 = 10f64.powf(rng.random_range(-4.0..-1.0));
            let dir = random_simplex(nx, &mut rng);
            ra.iter().zip(&dir).map(|(r, d)| (1.0 - eps) * r + eps * d).collect()
        } else {
            pick(&mut rng).1
        };
        let dist = l1_distance(&ra, &rb);
        for x in 0..nx {
            for a in 0..na {
                est.r_max = est.r_max.max(model.reward(x, a, &ra).abs());
            }
        }
        if dist < 1e-12 {
            continue;
        }
        let (x, a) = (rng.random_range(0..nx), rng.random_range(0..na));
        est.l_r = est.l_r.max((model.reward(x, a, &ra) - model.reward(x, a, &rb)).abs() / dist);
        let e0 = model.sample_noise(&mut rng);
        pa.iter_mut().for_each(|v| *v = 0.0);
        pb.iter_mut().for_each(|v| *v = 0.0);
        model.add_transition(x, a, &ra, &e0, 1.0, &mut pa);
        model.add_transition(x, a, &rb, &e0, 1.0, &mut pb);
        est.l_p = est.l_p.max(l1_distance(&pa, &pb) / dist);
        policy.eval_states(t, &ra, &mut la);
        policy.eval_states(t, &rb, &mut lb);
        est.l_e = est.l_e.max(l1_distance(&la[x * na..(x + 1) * na], &lb[x * na..(x + 1) * na]) / dist);
    }
    Ok(est)
}

/// Sampled estimates with the analytically known constants substituted:
/// `L_r = 1/2` for the two-state reward (`|rho(x) - rho'(x)|` is half the
/// L1 distance on two states) and `L_P = 0` for the torus kernels.
pub fn estimate_lipschitz(
    model: &dyn MfgModel,
    policy: &Policy,
    n_probe: usize,
    seed: u64,
) -> Result<LipschitzEstimates> {
    let mut est = estimate_lipschitz_sampled(model, policy, n_probe, seed)?;
    match model.id() {
        "two_state" => {
            est.l_r = 0.5;
            est.l_r_method = EstimateMethod::Analytic;
        }
        "beach_bar" | "night_clubs" => {
            est.l_p = 0.0;
            est.l_p_method = EstimateMethod::Analytic;
        }
        _ => {}
    }
    Ok(est)
}
