use serde::{Deserialize, Serialize};

/// How `|x - y|` is measured in torus rewards.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DistanceMode {
    #[default]
    Circular,
    Linear,
}

impl DistanceMode {
    pub fn distance(self, x: usize, y: usize, n: usize) -> f64 {
        match self {
            DistanceMode::Circular => circular_distance(x, y, n) as f64,
            DistanceMode::Linear => x.abs_diff(y) as f64,
        }
    }
}

pub fn circular_distance(x: usize, y: usize, n: usize) -> usize {
    let d = x.abs_diff(y) % n;
    d.min(n - d)
}

pub(crate) fn wrap(v: i64, n: usize) -> usize {
    v.rem_euclid(n as i64) as usize
}

/// Torus dynamics shared by the Beach Bar and Night Clubs games: action index
/// `a` moves by `a - 1`, the common noise adds `shifts[x]`, and an idiosyncratic
/// step in `{-1, 0, 1}` is drawn uniformly.
pub(crate) fn add_torus_transition(x: usize, a: usize, shifts: &[i32], weight: f64, out: &mut [f64]) {
    let n = out.len();
    let centre = x as i64 + a as i64 - 1 + shifts[x] as i64;
    let w = weight / 3.0;
    for s in -1..=1 {
        out[wrap(centre + s, n)] += w;
    }
}

/// Circular mean of `rho` on `{0, .., n-1}`, rounded to the nearest state.
///
/// States map to angles `2 pi x / n`; the weighted mean direction is mapped
/// back. A mean resultant length below 1e-9 gives state 0.
pub fn circular_mean(rho: &[f64]) -> usize {
    let n = rho.len();
    let step = std::f64::consts::TAU / n as f64;
    let (mut c, mut s) = (0.0, 0.0);
    for (x, &p) in rho.iter().enumerate() {
        let th = step * x as f64;
        c += p * th.cos();
        s += p * th.sin();
    }
    if (c * c + s * s).sqrt() < 1e-9 {
        return 0;
    }
    let ang = s.atan2(c).rem_euclid(std::f64::consts::TAU);
    ((ang / step).round() as usize) % n
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn circular_distance_wraps() {
        assert_eq!(circular_distance(0, 19, 20), 1);
        assert_eq!(circular_distance(3, 13, 20), 10);
        assert_eq!(circular_distance(5, 5, 20), 0);
    }

    #[test]
    fn circular_mean_of_point_mass() {
        for m in 0..20 {
            let mut rho = vec![0.0; 20];
            rho[m] = 1.0;
            assert_eq!(circular_mean(&rho), m);
        }
    }

    #[test]
    fn circular_mean_degenerate_is_zero() {
        assert_eq!(circular_mean(&[0.25; 4]), 0);
    }

    #[test]
    fn circular_mean_straddles_origin() {
        let mut rho = vec![0.0; 20];
        rho[19] = 0.5;
        rho[1] = 0.5;
        assert_eq!(circular_mean(&rho), 0);
    }
}
