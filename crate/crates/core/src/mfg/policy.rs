use super::simplex::Simplex;
use crate::error::{Error, Result};
use crate::nn::MlpPolicy;

/// A (possibly population-dependent) decision rule `(t, x, rho) -> Delta_A`.
#[derive(Clone, Debug, PartialEq)]
pub enum Policy {
    /// Time/state table; ignores the mean field.
    Tabular(VanillaTabular),
    /// Tabulated on a 1-D grid over `rho(1)` (two-state models only).
    Grid(AdaptiveGrid),
    /// Nadaraya–Watson estimate over recorded empirical fields.
    Kernel(KernelNw),
    /// Softmax MLP.
    Mlp(MlpPolicy),
    /// Convex combination of action laws, evaluated lazily.
    Mixture(Vec<(f64, Policy)>),
}

impl Policy {
    pub fn uniform(horizon: usize, n_states: usize, n_actions: usize) -> Self {
        Policy::Tabular(VanillaTabular::uniform(horizon, n_states, n_actions))
    }

    /// Uniform mixture, validated so weights sum to 1.
    pub fn uniform_mixture(components: Vec<Policy>) -> Result<Self> {
        let n = components.len();
        Self::mixture(components.into_iter().map(|p| (1.0 / n as f64, p)).collect())
    }

    pub fn mixture(components: Vec<(f64, Policy)>) -> Result<Self> {
        if components.is_empty() {
            return Err(Error::InvalidParam("empty mixture".into()));
        }
        let a = components[0].1.n_actions();
        let mut total = 0.0;
        for (w, p) in &components {
            if !(0.0..=1.0).contains(w) {
                return Err(Error::InvalidParam(format!("mixture weight {w}")));
            }
            if p.n_actions() != a {
                return Err(Error::Dimension {
                    context: "mixture action count",
                    expected: a,
                    got: p.n_actions(),
                });
            }
            total += w;
        }
        if (total - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidParam(format!("mixture weights sum to {total}")));
        }
        Ok(Policy::Mixture(components))
    }

    pub fn kind(&self) -> &'static str {
        match self {
            Policy::Tabular(_) => "vanilla_tabular",
            Policy::Grid(_) => "adaptive_grid",
            Policy::Kernel(_) => "kernel_nw",
            Policy::Mlp(_) => "parametric_mlp",
            Policy::Mixture(_) => "mixture",
        }
    }

    pub fn n_actions(&self) -> usize {
        match self {
            Policy::Tabular(p) => p.n_actions,
            Policy::Grid(p) => p.n_actions,
            Policy::Kernel(p) => p.n_actions,
            Policy::Mlp(p) => p.n_actions(),
            Policy::Mixture(c) => c[0].1.n_actions(),
        }
    }

    /// Writes the action law at `(t, x, rho)` into `out`.
    pub fn eval_into(&self, t: usize, x: usize, rho: &[f64], out: &mut [f64]) {
        match self {
            Policy::Tabular(p) => out.copy_from_slice(p.row(t, x)),
            Policy::Grid(p) => p.eval_into(t, x, rho, out),
            Policy::Kernel(p) => p.eval_into(t, x, rho, out),
            Policy::Mlp(p) => p.eval_into(t, x, rho, out),
            Policy::Mixture(c) => {
                out.iter_mut().for_each(|v| *v = 0.0);
                let mut buf = vec![0.0; out.len()];
                for (w, p) in c {
                    p.eval_into(t, x, rho, &mut buf);
                    out.iter_mut().zip(&buf).for_each(|(o, b)| *o += w * b);
                }
            }
        }
    }

    /// Action laws of every state at `(t, rho)`, row-major `|X| x |A|`.
    pub fn eval_states(&self, t: usize, rho: &[f64], out: &mut [f64]) {
        let a = self.n_actions();
        debug_assert_eq!(out.len(), rho.len() * a);
        match self {
            Policy::Kernel(p) => p.eval_states(t, rho, out),
            Policy::Mlp(p) => p.eval_states(t, rho, out),
            Policy::Mixture(c) => {
                out.iter_mut().for_each(|v| *v = 0.0);
                let mut buf = vec![0.0; out.len()];
                for (w, p) in c {
                    p.eval_states(t, rho, &mut buf);
                    out.iter_mut().zip(&buf).for_each(|(o, b)| *o += w * b);
                }
            }
            _ => {
                for (x, row) in out.chunks_mut(a).enumerate() {
                    self.eval_into(t, x, rho, row);
                }
            }
        }
    }

    /// Validated action law at `(t, x, rho)`.
    pub fn eval(&self, t: usize, x: usize, rho: &Simplex) -> Result<Simplex> {
        let mut out = vec![0.0; self.n_actions()];
        self.eval_into(t, x, rho.as_slice(), &mut out);
        Simplex::from_propagated(out, "policy output")
    }
}

/// `table[t][x][a]`.
#[derive(Clone, Debug, PartialEq)]
pub struct VanillaTabular {
    pub horizon: usize,
    pub n_states: usize,
    pub n_actions: usize,
    table: Vec<f64>,
}

impl VanillaTabular {
    pub fn uniform(horizon: usize, n_states: usize, n_actions: usize) -> Self {
        Self {
            horizon,
            n_states,
            n_actions,
            table: vec![1.0 / n_actions as f64; horizon * n_states * n_actions],
        }
    }

    pub fn from_table(
        horizon: usize,
        n_states: usize,
        n_actions: usize,
        table: Vec<f64>,
    ) -> Result<Self> {
        if table.len() != horizon * n_states * n_actions {
            return Err(Error::Dimension {
                context: "tabular policy",
                expected: horizon * n_states * n_actions,
                got: table.len(),
            });
        }
        for row in table.chunks(n_actions) {
            Simplex::new(row.to_vec())?;
        }
        Ok(Self { horizon, n_states, n_actions, table })
    }

    /// Same action law at every `(t, x)`.
    pub fn constant(horizon: usize, n_states: usize, law: &Simplex) -> Self {
        let table = (0..horizon * n_states).flat_map(|_| law.as_slice().iter().copied()).collect();
        Self { horizon, n_states, n_actions: law.len(), table }
    }

    pub fn row(&self, t: usize, x: usize) -> &[f64] {
        let i = (t * self.n_states + x) * self.n_actions;
        &self.table[i..i + self.n_actions]
    }

    pub fn table(&self) -> &[f64] {
        &self.table
    }
}

/// Policy tabulated on a uniform grid of `rho(1)` values for two-state models,
/// linearly interpolated in between.
#[derive(Clone, Debug, PartialEq)]
pub struct AdaptiveGrid {
    pub horizon: usize,
    pub n_actions: usize,
    n_points: usize,
    /// `table[t][g][x][a]` with `x` in `{0, 1}`.
    table: Vec<f64>,
}

impl AdaptiveGrid {
    pub const N_STATES: usize = 2;

    pub fn uniform(horizon: usize, n_points: usize, n_actions: usize) -> Self {
        Self {
            horizon,
            n_actions,
            n_points,
            table: vec![1.0 / n_actions as f64; horizon * n_points * Self::N_STATES * n_actions],
        }
    }

    pub fn from_table(
        horizon: usize,
        n_points: usize,
        n_actions: usize,
        table: Vec<f64>,
    ) -> Result<Self> {
        let expected = horizon * n_points * Self::N_STATES * n_actions;
        if n_points < 2 || table.len() != expected {
            return Err(Error::Dimension { context: "grid policy", expected, got: table.len() });
        }
        Ok(Self { horizon, n_actions, n_points, table })
    }

    pub fn n_points(&self) -> usize {
        self.n_points
    }

    pub fn table(&self) -> &[f64] {
        &self.table
    }

    pub fn row(&self, t: usize, g: usize, x: usize) -> &[f64] {
        let i = ((t * self.n_points + g) * Self::N_STATES + x) * self.n_actions;
        &self.table[i..i + self.n_actions]
    }

    pub fn row_mut(&mut self, t: usize, g: usize, x: usize) -> &mut [f64] {
        let i = ((t * self.n_points + g) * Self::N_STATES + x) * self.n_actions;
        &mut self.table[i..i + self.n_actions]
    }

    /// `(1 - w) * self + w * other`, entrywise on the tables.
    pub fn blend(&self, other: &AdaptiveGrid, w: f64) -> Result<AdaptiveGrid> {
        if self.table.len() != other.table.len() {
            return Err(Error::Dimension {
                context: "grid blend",
                expected: self.table.len(),
                got: other.table.len(),
            });
        }
        let table = self
            .table
            .iter()
            .zip(&other.table)
            .map(|(a, b)| (1.0 - w) * a + w * b)
            .collect();
        Ok(AdaptiveGrid { table, ..self.clone() })
    }

    fn eval_into(&self, t: usize, x: usize, rho: &[f64], out: &mut [f64]) {
        let (g, w) = locate_on_grid(rho[1], self.n_points);
        let lo = self.row(t, g, x);
        let hi = self.row(t, g + 1, x);
        for ((o, l), h) in out.iter_mut().zip(lo).zip(hi) {
            *o = (1.0 - w) * l + w * h;
        }
    }
}

/// Bracketing cell of `p` on the uniform grid `{0, 1/(n-1), ..., 1}`: returns
/// `(g, w)` with `p = (1 - w) * grid[g] + w * grid[g + 1]`, clamped to `[0, 1]`.
pub(crate) fn locate_on_grid(p: f64, n_points: usize) -> (usize, f64) {
    let pos = p.clamp(0.0, 1.0) * (n_points - 1) as f64;
    let g = (pos.floor() as usize).min(n_points - 2);
    (g, pos - g as f64)
}

/// Nadaraya–Watson action-law estimate with a Gaussian kernel on the
/// recorded empirical fields.
#[derive(Clone, Debug, PartialEq)]
pub struct KernelNw {
    pub horizon: usize,
    pub n_states: usize,
    pub n_actions: usize,
    pub bandwidth: f64,
    n_traj: usize,
    /// `fields[t][n][x]`
    fields: Vec<f64>,
    /// `counts[t][n][x][a]`
    counts: Vec<f64>,
}

impl KernelNw {
    pub fn from_parts(
        horizon: usize,
        n_states: usize,
        n_actions: usize,
        bandwidth: f64,
        n_traj: usize,
        fields: Vec<f64>,
        counts: Vec<f64>,
    ) -> Result<Self> {
        if !(bandwidth > 0.0) {
            return Err(Error::InvalidParam(format!("bandwidth {bandwidth}")));
        }
        if fields.len() != horizon * n_traj * n_states {
            return Err(Error::Dimension {
                context: "kernel fields",
                expected: horizon * n_traj * n_states,
                got: fields.len(),
            });
        }
        if counts.len() != horizon * n_traj * n_states * n_actions {
            return Err(Error::Dimension {
                context: "kernel counts",
                expected: horizon * n_traj * n_states * n_actions,
                got: counts.len(),
            });
        }
        Ok(Self { horizon, n_states, n_actions, bandwidth, n_traj, fields, counts })
    }

    pub fn n_traj(&self) -> usize {
        self.n_traj
    }

    pub fn fields(&self) -> &[f64] {
        &self.fields
    }

    pub fn counts(&self) -> &[f64] {
        &self.counts
    }

    fn eval_into(&self, t: usize, x: usize, rho: &[f64], out: &mut [f64]) {
        let mut all = vec![0.0; self.n_states * self.n_actions];
        self.eval_states(t, rho, &mut all);
        out.copy_from_slice(&all[x * self.n_actions..(x + 1) * self.n_actions]);
    }

    fn eval_states(&self, t: usize, rho: &[f64], out: &mut [f64]) {
        let (xs, na) = (self.n_states, self.n_actions);
        let fields = &self.fields[t * self.n_traj * xs..(t + 1) * self.n_traj * xs];
        let counts = &self.counts[t * self.n_traj * xs * na..(t + 1) * self.n_traj * xs * na];
        let d2: Vec<f64> = fields
            .chunks(xs)
            .map(|f| f.iter().zip(rho).map(|(a, b)| (a - b) * (a - b)).sum())
            .collect();
        let inv = 1.0 / (2.0 * self.bandwidth * self.bandwidth);
        for x in 0..xs {
            let row = &mut out[x * na..(x + 1) * na];
            row.iter_mut().for_each(|v| *v = 0.0);
            // Shift by the closest sample that visited x; the ratio is unchanged
            // and small bandwidths no longer underflow to 0/0.
            let shift = (0..self.n_traj)
                .filter(|&n| counts[(n * xs + x) * na..(n * xs + x + 1) * na].iter().any(|c| *c > 0.0))
                .map(|n| d2[n])
                .fold(f64::INFINITY, f64::min);
            if shift.is_finite() {
                for n in 0..self.n_traj {
                    let c = &counts[(n * xs + x) * na..(n * xs + x + 1) * na];
                    if c.iter().all(|v| *v == 0.0) {
                        continue;
                    }
                    let w = (-(d2[n] - shift) * inv).exp();
                    row.iter_mut().zip(c).for_each(|(r, c)| *r += w * c);
                }
            }
            let total: f64 = row.iter().sum();
            if total > 0.0 {
                row.iter_mut().for_each(|v| *v /= total);
            } else {
                row.iter_mut().for_each(|v| *v = 1.0 / na as f64);
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_interpolates_linearly() {
        let mut g = AdaptiveGrid::uniform(1, 3, 2);
        g.row_mut(0, 0, 0).copy_from_slice(&[1.0, 0.0]);
        g.row_mut(0, 1, 0).copy_from_slice(&[0.0, 1.0]);
        let p = Policy::Grid(g);
        let mut out = [0.0; 2];
        p.eval_into(0, 0, &[0.75, 0.25], &mut out);
        assert!((out[0] - 0.5).abs() < 1e-12 && (out[1] - 0.5).abs() < 1e-12);
        p.eval_into(0, 0, &[1.0, 0.0], &mut out);
        assert_eq!(out, [1.0, 0.0]);
    }

    #[test]
    fn mixture_weights_must_sum_to_one() {
        let u = Policy::uniform(2, 2, 2);
        assert!(Policy::mixture(vec![(0.5, u.clone()), (0.4, u.clone())]).is_err());
        let m = Policy::uniform_mixture(vec![u.clone(), u.clone(), u]).unwrap();
        let mut out = [0.0; 2];
        m.eval_into(1, 1, &[0.5, 0.5], &mut out);
        assert!((out[0] - 0.5).abs() < 1e-15);
    }

    #[test]
    fn kernel_without_samples_is_uniform() {
        let k = KernelNw::from_parts(1, 2, 2, 0.05, 1, vec![1.0, 0.0], vec![3.0, 1.0, 0.0, 0.0])
            .unwrap();
        let p = Policy::Kernel(k);
        let mut out = [0.0; 4];
        p.eval_states(0, &[0.2, 0.8], &mut out);
        assert_eq!(out, [0.75, 0.25, 0.5, 0.5]);
    }

    #[test]
    fn locate_clamps() {
        assert_eq!(locate_on_grid(1.0, 5), (3, 1.0));
        assert_eq!(locate_on_grid(-0.1, 5), (0, 0.0));
    }
}
