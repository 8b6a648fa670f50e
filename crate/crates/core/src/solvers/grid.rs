use crate::error::{Error, Result};
use crate::mfg::{locate_on_grid, AdaptiveGrid, BestResponse, MfgModel, NoiseSymbol, Policy, Simplex};
use crate::seed;

/// Uniform grid of two-state fields `(1 - p, p)`, `p = g / (n - 1)`.
#[derive(Clone, Debug, PartialEq)]
pub struct MeanFieldGrid {
    points: Vec<Simplex>,
}

impl MeanFieldGrid {
    pub fn two_state(n_points: usize) -> Result<Self> {
        if n_points < 2 {
            return Err(Error::InvalidParam(format!("grid needs at least 2 points, got {n_points}")));
        }
        let points = (0..n_points)
            .map(|g| {
                let p = g as f64 / (n_points - 1) as f64;
                Simplex::new(vec![1.0 - p, p])
            })
            .collect::<Result<_>>()?;
        Ok(Self { points })
    }

    pub fn points(&self) -> &[Simplex] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

/// `V[t][x][g]` for `t = 0..=H`, with `V[H] = 0`.
#[derive(Clone, Debug, PartialEq)]
pub struct GridValueTable {
    pub horizon: usize,
    pub n_points: usize,
    values: Vec<f64>,
}

impl GridValueTable {
    pub fn get(&self, t: usize, x: usize, g: usize) -> f64 {
        self.values[(t * AdaptiveGrid::N_STATES + x) * self.n_points + g]
    }

    fn set(&mut self, t: usize, x: usize, g: usize, v: f64) {
        self.values[(t * AdaptiveGrid::N_STATES + x) * self.n_points + g] = v;
    }

    /// Linear interpolation of `V_t(x, .)` in `p = rho(1)`.
    pub fn interpolate(&self, t: usize, x: usize, p: f64) -> f64 {
        let (g, w) = locate_on_grid(p, self.n_points);
        (1.0 - w) * self.get(t, x, g) + w * self.get(t, x, g + 1)
    }
}

fn tabulate_on_grid(policy: &Policy, grid: &MeanFieldGrid, horizon: usize) -> Result<AdaptiveGrid> {
    if let Policy::Grid(g) = policy {
        if g.n_points() == grid.len() && g.horizon == horizon {
            return Ok(g.clone());
        }
    }
    let na = policy.n_actions();
    let mut out = AdaptiveGrid::uniform(horizon, grid.len(), na);
    let mut laws = vec![0.0; AdaptiveGrid::N_STATES * na];
    for t in 0..horizon {
        for (g, rho) in grid.points().iter().enumerate() {
            policy.eval_states(t, rho.as_slice(), &mut laws);
            for x in 0..AdaptiveGrid::N_STATES {
                out.row_mut(t, g, x).copy_from_slice(&laws[x * na..(x + 1) * na]);
            }
        }
    }
    Ok(out)
}

/// Backward induction on the grid; returns the greedy policy and its value table.
///
/// At each `t` one batch of `mc_batch` noise symbols is drawn and shared by
/// every grid point and action.
pub fn backward_induction(
    pop_policy: &Policy,
    model: &dyn MfgModel,
    grid: &MeanFieldGrid,
    mc_batch: usize,
    seed: u64,
) -> Result<(AdaptiveGrid, GridValueTable)> {
    const NX: usize = AdaptiveGrid::N_STATES;
    if model.n_states() != NX {
        return Err(Error::Unsupported(format!(
            "grid backward induction needs a two-state model, got {} states",
            model.n_states()
        )));
    }
    if mc_batch == 0 {
        return Err(Error::InvalidParam("mc_batch must be positive".into()));
    }
    let (na, h, ng) = (model.n_actions(), model.horizon(), grid.len());
    let mut rng = seed::rng(seed);
    let mut table = GridValueTable { horizon: h, n_points: ng, values: vec![0.0; (h + 1) * NX * ng] };
    let mut policy = AdaptiveGrid::uniform(h, ng, na);
    let mut laws = vec![0.0; NX * na];
    let mut q = vec![0.0; NX * na];
    let mut rows = vec![[0.0; NX]; NX * na];
    for t in (0..h).rev() {
        let noise: Vec<NoiseSymbol> = if t + 1 < h {
            (0..mc_batch).map(|_| model.sample_noise(&mut rng)).collect()
        } else {
            Vec::new()
        };
        for (g, rho) in grid.points().iter().enumerate() {
            let rho = rho.as_slice();
            pop_policy.eval_states(t, rho, &mut laws);
            q.iter_mut().for_each(|v| *v = 0.0);
            for e0 in &noise {
                let mut next = [0.0; NX];
                for x in 0..NX {
                    for a in 0..na {
                        let row = &mut rows[x * na + a];
                        *row = [0.0; NX];
                        model.add_transition(x, a, rho, e0, 1.0, row);
                        let w = rho[x] * laws[x * na + a];
                        next[0] += w * row[0];
                        next[1] += w * row[1];
                    }
                }
                let p_next = next[1] / (next[0] + next[1]);
                let v_next = [table.interpolate(t + 1, 0, p_next), table.interpolate(t + 1, 1, p_next)];
                for (qa, row) in q.iter_mut().zip(rows.iter()) {
                    *qa += row[0] * v_next[0] + row[1] * v_next[1];
                }
            }
            let inv = if noise.is_empty() { 0.0 } else { 1.0 / noise.len() as f64 };
            for x in 0..NX {
                let mut best = (0usize, f64::NEG_INFINITY);
                for a in 0..na {
                    let qa = model.reward(x, a, rho) + q[x * na + a] * inv;
                    if qa > best.1 {
                        best = (a, qa);
                    }
                }
                table.set(t, x, g, best.1);
                let r = policy.row_mut(t, g, x);
                r.iter_mut().for_each(|v| *v = 0.0);
                r[best.0] = 1.0;
            }
        }
    }
    Ok((policy, table))
}

/// Grid best response as a [`Policy`].
pub fn backward_induction_br(
    pop_policy: &Policy,
    model: &dyn MfgModel,
    grid: &MeanFieldGrid,
    mc_batch: usize,
    seed: u64,
) -> Result<Policy> {
    Ok(Policy::Grid(backward_induction(pop_policy, model, grid, mc_batch, seed)?.0))
}

/// The grid solver behind the [`BestResponse`] interface.
#[derive(Clone, Debug)]
pub struct GridBestResponse {
    pub grid: MeanFieldGrid,
    pub mc_batch: usize,
}

impl GridBestResponse {
    pub fn new(n_points: usize, mc_batch: usize) -> Result<Self> {
        Ok(Self { grid: MeanFieldGrid::two_state(n_points)?, mc_batch })
    }
}

impl BestResponse for GridBestResponse {
    fn name(&self) -> &'static str {
        "grid_backward_induction"
    }

    fn best_response(&self, pop: &Policy, model: &dyn MfgModel, seed: u64) -> Result<Policy> {
        backward_induction_br(pop, model, &self.grid, self.mc_batch, seed)
    }
}

/// Damped best-response iteration `pi^k = (1 - gamma_k) pi^{k-1} + gamma_k BR(pi^{k-1})`.
///
/// The convex combination is stored as a grid tabulation, which is exact
/// because every iterate is piecewise linear on the same grid. `observer`
/// sees each iterate after its update.
pub fn mann_iteration(
    model: &dyn MfgModel,
    init: &Policy,
    gammas: &[f64],
    grid: &MeanFieldGrid,
    mc_batch: usize,
    seed: u64,
    observer: &mut dyn FnMut(usize, &Policy) -> Result<()>,
) -> Result<Policy> {
    if let Some(g) = gammas.iter().find(|g| !(**g > 0.0 && **g <= 1.0)) {
        return Err(Error::InvalidParam(format!("Mann step {g} outside (0, 1]")));
    }
    if gammas.is_empty() {
        return Ok(init.clone());
    }
    let mut current = tabulate_on_grid(init, grid, model.horizon())?;
    for (k, &gamma) in gammas.iter().enumerate() {
        let pop = Policy::Grid(current);
        let (br, _) = backward_induction(&pop, model, grid, mc_batch, seed::derive(seed, k as u64))?;
        let Policy::Grid(prev) = pop else { unreachable!() };
        current = prev.blend(&br, gamma)?;
        observer(k + 1, &Policy::Grid(current.clone()))?;
    }
    Ok(Policy::Grid(current))
}
