use serde::{Deserialize, Serialize};

use super::lipschitz::LipschitzEstimates;

/// Value reported when `(1 + L_P + L_E)^H` overflows.
pub const OVERFLOW_SENTINEL: f64 = f64::MAX;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BoundFlag {
    #[default]
    Ok,
    /// `L_P + L_E = 0`: the BC exploitability bound is not defined; reported as `+inf`.
    DegenerateLipschitz,
    /// The exponential term overflowed; reported as [`OVERFLOW_SENTINEL`].
    Overflow,
}

/// Exploitability bounds (`b1` from BC, `b2` from ADV) and value-gap bounds
/// (`b3` from BC, `b4` from ADV).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TheoremBounds {
    pub b1: f64,
    pub b2: f64,
    pub b3: f64,
    pub b4: f64,
    pub b1_flag: BoundFlag,
}

pub fn theorem_bounds(
    delta_bc: f64,
    delta_adv: f64,
    est: &LipschitzEstimates,
    horizon: usize,
) -> TheoremBounds {
    let h = horizon as f64;
    let (lr, lp, le, rmax) = (est.l_r, est.l_p, est.l_e, est.r_max);
    let l = lp + le;
    let (b1, b1_flag) = if delta_bc == 0.0 {
        (0.0, BoundFlag::Ok)
    } else if l == 0.0 {
        (f64::INFINITY, BoundFlag::DegenerateLipschitz)
    } else {
        let growth = (1.0 + l).powf(h);
        let v = delta_bc * (rmax * h * h + 2.0 * growth / (l * l) * (lr + rmax * (le + 1.0)));
        if v.is_finite() {
            (v, BoundFlag::Ok)
        } else {
            (OVERFLOW_SENTINEL, BoundFlag::Overflow)
        }
    };
    let b2 = delta_adv * (h * (2.0 * lr + 3.0 * le * rmax + rmax) + 3.0 * rmax * h * h * l);
    let b3 = h * h * delta_bc * rmax;
    let b4 = rmax * delta_adv * (h * (le + 1.0) + h * h * l);
    TheoremBounds { b1, b2, b3, b4, b1_flag }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn est(l_r: f64, l_p: f64, l_e: f64, r_max: f64) -> LipschitzEstimates {
        LipschitzEstimates { l_r, l_p, l_e, r_max, ..Default::default() }
    }

    #[test]
    fn zero_proxies_give_zero_bounds() {
        let b = theorem_bounds(0.0, 0.0, &est(0.5, 0.5, 0.5, 1.0), 7);
        assert_eq!([b.b1, b.b2, b.b3, b.b4], [0.0; 4]);
    }

    #[test]
    fn degenerate_and_overflow_flags() {
        let b = theorem_bounds(0.1, 0.1, &est(1.0, 0.0, 0.0, 1.0), 5);
        assert_eq!(b.b1_flag, BoundFlag::DegenerateLipschitz);
        assert!(b.b1.is_infinite());
        let b = theorem_bounds(0.1, 0.1, &est(1.0, 10.0, 10.0, 1.0), 400);
        assert_eq!(b.b1_flag, BoundFlag::Overflow);
        assert_eq!(b.b1, OVERFLOW_SENTINEL);
    }
}
