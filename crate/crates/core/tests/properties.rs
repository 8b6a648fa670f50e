use mfgcn::environments::{
    BeachBar, BeachBarParams, NightClubs, NightClubsParams, TwoState, TwoStateParams,
};
use mfgcn::imitation::{generate_dataset, nw_adaptive, nw_vanilla, KernelConfig};
use mfgcn::metrics::{proxy_mc, theorem_bounds, LipschitzEstimates};
use mfgcn::mfg::{
    deviation_flow, population_flow, state_action_dist, value, AdaptiveGrid, NoisePath,
    VanillaTabular,
};
use mfgcn::nn::MlpPolicy;
use mfgcn::seed;
use mfgcn::solvers::{backward_induction, mann_iteration, MeanFieldGrid};
use mfgcn::{MfgModel, NoiseSymbol, Policy, Simplex};
use proptest::prelude::*;
use rand::{Rng, RngCore};

fn models(alpha: f64, eta: f64) -> Vec<Box<dyn MfgModel>> {
    vec![
        Box::new(TwoState::new(TwoStateParams { alpha: 0.25 + alpha, eta, horizon: 6 }).unwrap()),
        Box::new(BeachBar::new(BeachBarParams { x_half: 2, alpha, eta, horizon: 6, ..Default::default() }).unwrap()),
        Box::new(
            NightClubs::new(NightClubsParams { x_half: 2, alpha, eta, horizon: 6, ..Default::default() })
                .unwrap(),
        ),
    ]
}

fn random_simplex(rng: &mut impl Rng, n: usize) -> Simplex {
    // occasionally put exact zeros in the support
    let w: Vec<f64> = (0..n).map(|_| if rng.random_bool(0.2) { 0.0 } else { rng.random::<f64>() }).collect();
    Simplex::from_unnormalized(w).unwrap_or_else(|| Simplex::uniform(n))
}

fn random_tabular(model: &dyn MfgModel, rng: &mut impl Rng) -> Policy {
    let (h, nx, na) = (model.horizon(), model.n_states(), model.n_actions());
    let table = (0..h * nx).flat_map(|_| random_simplex(rng, na).into_vec()).collect();
    Policy::Tabular(VanillaTabular::from_table(h, nx, na, table).unwrap())
}

fn random_mlp(model: &dyn MfgModel, adaptive: bool, seed_: u64) -> Policy {
    Policy::Mlp(MlpPolicy::new(model.n_states(), model.n_actions(), model.horizon(), adaptive, &[8], seed_))
}

fn random_policy(model: &dyn MfgModel, rng: &mut impl Rng) -> Policy {
    match rng.random_range(0..3) {
        0 => random_tabular(model, rng),
        1 => random_mlp(model, true, rng.random()),
        _ => Policy::mixture(vec![(0.3, random_tabular(model, rng)), (0.7, random_mlp(model, true, rng.random()))])
            .unwrap(),
    }
}

fn assert_simplex(s: &[f64]) {
    assert!(s.iter().all(|v| *v >= 0.0 && v.is_finite()), "{s:?}");
    assert!((s.iter().sum::<f64>() - 1.0).abs() <= 1e-12, "mass {}", s.iter().sum::<f64>());
}

fn shift(v: &[f64], k: usize) -> Vec<f64> {
    let n = v.len();
    (0..n).map(|i| v[(i + n - k % n) % n]).collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn transition_rows_are_simplices(alpha in 0.0f64..3.0, eta in 0.0f64..=1.0, s in any::<u64>()) {
        let mut rng = seed::rng(s);
        for m in models(alpha, eta) {
            for _ in 0..20 {
                let x = rng.random_range(0..m.n_states());
                let a = rng.random_range(0..m.n_actions());
                let rho = random_simplex(&mut rng, m.n_states());
                let e0 = m.sample_noise(&mut rng);
                assert_simplex(m.transition(x, a, &rho, &e0).unwrap().as_slice());
            }
        }
    }

    #[test]
    fn beach_bar_is_shift_equivariant_without_noise(k in 0usize..8, x in 0usize..8, a in 0usize..3, s in any::<u64>()) {
        let m = BeachBar::new(BeachBarParams { x_half: 2, ..Default::default() }).unwrap();
        let rho = random_simplex(&mut seed::rng(s), 8);
        let quiet = NoiseSymbol::Shifts(vec![0; 8]);
        let base = m.transition(x, a, &rho, &quiet).unwrap();
        let moved = Simplex::new(shift(rho.as_slice(), k)).unwrap();
        let shifted = m.transition((x + k) % 8, a, &moved, &quiet).unwrap();
        prop_assert_eq!(shifted.as_slice(), &shift(base.as_slice(), k)[..]);
    }

    #[test]
    fn flows_conserve_mass_and_self_deviation_is_consistent(eta in 0.0f64..=1.0, s in any::<u64>()) {
        let mut rng = seed::rng(s);
        for m in models(1.0, eta) {
            let m = m.as_ref();
            let pi = random_policy(m, &mut rng);
            let path = NoisePath::sample(m, &mut rng);
            let flow = deviation_flow(&pi, &pi, &path, m).unwrap();
            let dev = flow.deviation_fields.as_ref().unwrap();
            for (p, d) in flow.fields.iter().zip(dev) {
                assert_simplex(p.as_slice());
                for (u, v) in p.as_slice().iter().zip(d.as_slice()) {
                    prop_assert!((u - v).abs() <= 1e-12);
                }
            }
        }
    }

    #[test]
    fn state_action_law_marginalizes_to_the_deviation_field(eta in 0.0f64..=1.0, s in any::<u64>()) {
        let mut rng = seed::rng(s);
        for m in models(1.0, eta) {
            let m = m.as_ref();
            let (pop, dev) = (random_policy(m, &mut rng), random_policy(m, &mut rng));
            let path = NoisePath::sample(m, &mut rng);
            let flow = deviation_flow(&pop, &dev, &path, m).unwrap();
            for t in 0..m.horizon() {
                let mu = state_action_dist(&flow, &dev, t).unwrap();
                prop_assert!((mu.mass() - 1.0).abs() <= 1e-12);
                let target = &flow.deviation_fields.as_ref().unwrap()[t];
                for (u, v) in mu.state_marginal().iter().zip(target.as_slice()) {
                    prop_assert!((u - v).abs() <= 1e-12);
                }
            }
        }
    }

    #[test]
    fn state_distance_is_dominated_by_state_action_distance(eta in 0.0f64..=1.0, s in any::<u64>()) {
        let mut rng = seed::rng(s);
        for m in models(1.0, eta) {
            let m = m.as_ref();
            let (pa, pe) = (random_policy(m, &mut rng), random_policy(m, &mut rng));
            let path = NoisePath::sample(m, &mut rng);
            let (fa, fe) = (population_flow(&pa, &path, m).unwrap(), population_flow(&pe, &path, m).unwrap());
            for t in 0..m.horizon() {
                let d_rho = fa.fields[t].l1(&fe.fields[t]);
                let d_mu = state_action_dist(&fa, &pa, t).unwrap().l1(&state_action_dist(&fe, &pe, t).unwrap());
                prop_assert!(d_rho <= d_mu + 1e-12, "t={} {} > {}", t, d_rho, d_mu);
            }
        }
    }

    #[test]
    fn proxies_vanish_between_a_policy_and_itself(eta in 0.0f64..=1.0, s in any::<u64>()) {
        let mut rng = seed::rng(s);
        for m in models(1.0, eta) {
            let pi = random_policy(m.as_ref(), &mut rng);
            let p = proxy_mc(&pi, &pi, m.as_ref(), 3, s).unwrap();
            prop_assert!(p.bc.iter().chain(&p.adv).all(|v| *v == 0.0));
        }
    }

    #[test]
    fn adv_proxy_obeys_the_triangle_inequality(eta in 0.0f64..=1.0, s in any::<u64>()) {
        let mut rng = seed::rng(s);
        for m in models(1.0, eta) {
            let m = m.as_ref();
            let p: Vec<Policy> = (0..3).map(|_| random_policy(m, &mut rng)).collect();
            let d = |i: usize, j: usize| proxy_mc(&p[i], &p[j], m, 4, s).unwrap();
            let (d13, d12, d23) = (d(0, 2), d(0, 1), d(1, 2));
            let slack = 3.0 * (d13.delta_adv_se().powi(2) + d12.delta_adv_se().powi(2) + d23.delta_adv_se().powi(2)).sqrt();
            prop_assert!(d13.delta_adv() <= d12.delta_adv() + d23.delta_adv() + slack + 1e-12);
        }
    }

    #[test]
    fn value_is_seed_deterministic(s in any::<u64>()) {
        let m = TwoState::new(TwoStateParams { horizon: 5, ..Default::default() }).unwrap();
        let pi = random_policy(&m, &mut seed::rng(s));
        let a = value(&pi, &pi, &m, 5, s).unwrap();
        let b = value(&pi, &pi, &m, 5, s).unwrap();
        prop_assert_eq!(a.mean.to_bits(), b.mean.to_bits());
        prop_assert_eq!(a.se.to_bits(), b.se.to_bits());
    }

    #[test]
    fn softmax_head_is_a_simplex_for_extreme_parameters(scale in 1.0f64..1e4, s in any::<u64>()) {
        let m = BeachBar::new(BeachBarParams { x_half: 2, horizon: 4, ..Default::default() }).unwrap();
        let Policy::Mlp(mut net) = random_mlp(&m, true, s) else { unreachable!() };
        net.net_mut().params_mut().iter_mut().for_each(|p| *p *= scale);
        let pi = Policy::Mlp(net);
        let mut rng = seed::rng(s ^ 1);
        for _ in 0..10 {
            let rho = random_simplex(&mut rng, 8);
            assert_simplex(pi.eval(rng.random_range(0..4), rng.random_range(0..8), &rho).unwrap().as_slice());
        }
    }
}

fn bound_inputs() -> impl Strategy<Value = (f64, f64, [f64; 4], usize)> {
    (0.0f64..1.0, 0.0f64..1.0, [0.0f64..2.0, 0.01f64..2.0, 0.0f64..2.0, 0.01f64..5.0], 1usize..12)
}

fn bounds_of(d_bc: f64, d_adv: f64, c: [f64; 4], h: usize) -> [f64; 4] {
    let est = LipschitzEstimates { l_r: c[0], l_p: c[1], l_e: c[2], r_max: c[3], ..Default::default() };
    let b = theorem_bounds(d_bc, d_adv, &est, h);
    [b.b1, b.b2, b.b3, b.b4]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn bounds_are_monotone_in_every_input((d_bc, d_adv, c, h) in bound_inputs(), coord in 0usize..7, bump in 0.0f64..1.0) {
        let before = bounds_of(d_bc, d_adv, c, h);
        let (mut d_bc2, mut d_adv2, mut c2, mut h2) = (d_bc, d_adv, c, h);
        match coord {
            0 => d_bc2 += bump,
            1 => d_adv2 += bump,
            2..=5 => c2[coord - 2] += bump,
            _ => h2 += 1 + (bump * 5.0) as usize,
        }
        let after = bounds_of(d_bc2, d_adv2, c2, h2);
        // (1 + L)^H / L^2 decreases in L = L_P + L_E while (H - 2) L < 2
        let l = c[1] + c[2];
        let b1_checked = !matches!(coord, 3 | 4) || (h as f64 - 2.0) * l >= 2.0;
        for (i, (b, a)) in before.iter().zip(&after).enumerate() {
            if i == 0 && !b1_checked {
                continue;
            }
            prop_assert!(a >= b, "bound {} went from {} to {} (coord {})", i + 1, b, a, coord);
        }
    }
}

#[test]
fn b1_decreases_in_l_for_short_horizons() {
    let c = |l: f64| [0.5, l / 2.0, l / 2.0, 1.0];
    // H = 3: (1 + L)^3 / L^2 is minimized at L = 2
    let (small, large) = (bounds_of(0.1, 0.0, c(0.5), 3)[0], bounds_of(0.1, 0.0, c(1.0), 3)[0]);
    assert!(large < small, "{large} !< {small}");
}

#[test]
fn bounds_match_hand_evaluation() {
    let b = bounds_of(0.1, 0.0, [0.5, 0.5, 0.5, 1.0], 2);
    // 0.1 * [1 * 4 + 2 * 2^2 / 1^2 * (0.5 + 1 * 1.5)] = 0.1 * 20
    assert!((b[0] - 2.0).abs() < 1e-12, "{}", b[0]);
    // 2^2 * 0.1 * 1
    assert!((b[2] - 0.4).abs() < 1e-12, "{}", b[2]);
}

/// Two-state model with every reward shifted by a constant.
struct Shifted {
    inner: TwoState,
    c: f64,
}

impl MfgModel for Shifted {
    fn id(&self) -> &'static str {
        "two_state"
    }
    fn n_states(&self) -> usize {
        2
    }
    fn n_actions(&self) -> usize {
        2
    }
    fn horizon(&self) -> usize {
        self.inner.horizon()
    }
    fn rho0(&self) -> &Simplex {
        self.inner.rho0()
    }
    fn add_transition(&self, x: usize, a: usize, rho: &[f64], e0: &NoiseSymbol, w: f64, out: &mut [f64]) {
        self.inner.add_transition(x, a, rho, e0, w, out)
    }
    fn reward(&self, x: usize, a: usize, rho: &[f64]) -> f64 {
        self.inner.reward(x, a, rho) + self.c
    }
    fn sample_noise(&self, rng: &mut dyn RngCore) -> NoiseSymbol {
        self.inner.sample_noise(rng)
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn grid_values_shift_with_the_reward(c in -3.0f64..3.0, eta in 0.0f64..=1.0, s in any::<u64>()) {
        let base = TwoState::new(TwoStateParams { eta, horizon: 5, ..Default::default() }).unwrap();
        let shifted = Shifted { inner: base.clone(), c };
        let pop = random_tabular(&base, &mut seed::rng(s));
        let grid = MeanFieldGrid::two_state(7).unwrap();
        let (br, v0) = backward_induction(&pop, &base, &grid, 20, s).unwrap();
        let (_, v1) = backward_induction(&pop, &shifted, &grid, 20, s).unwrap();
        for t in 0..=5 {
            for x in 0..2 {
                for g in 0..7 {
                    let d = v1.get(t, x, g) - v0.get(t, x, g);
                    prop_assert!((d - (5 - t) as f64 * c).abs() < 1e-9, "t={} d={}", t, d);
                }
            }
        }
        for t in 0..5 {
            for g in 0..7 {
                for x in 0..2 {
                    prop_assert!(Simplex::new(br.row(t, g, x).to_vec()).unwrap().is_vertex());
                }
            }
        }
    }

    #[test]
    fn mann_iterates_and_imitators_are_valid_policies(eta in 0.0f64..=1.0, s in any::<u64>()) {
        let m = TwoState::new(TwoStateParams { eta, horizon: 4, ..Default::default() }).unwrap();
        let grid = MeanFieldGrid::two_state(6).unwrap();
        let init = Policy::Grid(AdaptiveGrid::uniform(4, 6, 2));
        let mut iterates = Vec::new();
        let last = mann_iteration(&m, &init, &[0.3, 0.3], &grid, 10, s, &mut |_, p| {
            iterates.push(p.clone());
            Ok(())
        }).unwrap();
        let ds = generate_dataset(&last, &m, 6, 5, s).unwrap();
        iterates.push(nw_vanilla(&ds).unwrap());
        iterates.push(nw_adaptive(&ds, KernelConfig::default()).unwrap());
        let mut rng = seed::rng(s);
        for p in &iterates {
            for _ in 0..20 {
                let rho = random_simplex(&mut rng, 2);
                assert_simplex(p.eval(rng.random_range(0..4), rng.random_range(0..2), &rho).unwrap().as_slice());
            }
        }
    }
}

#[test]
fn adaptive_nw_reduces_to_vanilla_on_constant_fields() {
    let m = TwoState::new(TwoStateParams { eta: 0.0, horizon: 5, ..Default::default() }).unwrap();
    let expert = random_tabular(&m, &mut seed::rng(3));
    let mut ds = generate_dataset(&expert, &m, 12, 7, 9).unwrap();
    for r in &mut ds.rollouts {
        r.empirical = r.exact.clone();
    }
    let (van, ada) = (nw_vanilla(&ds).unwrap(), nw_adaptive(&ds, KernelConfig::default()).unwrap());
    let path = ds.noise[0].clone();
    let flow = population_flow(&expert, &path, &m).unwrap();
    for t in 0..5 {
        for x in 0..2 {
            let (a, b) = (van.eval(t, x, &flow.fields[t]).unwrap(), ada.eval(t, x, &flow.fields[t]).unwrap());
            assert!(a.l1(&b) < 1e-9, "t={t} x={x}: {:?} vs {:?}", a, b);
        }
    }
}

#[test]
fn beach_bar_noise_rate_matches_its_law() {
    let eta = 0.3;
    let m = BeachBar::new(BeachBarParams { eta, ..Default::default() }).unwrap();
    let mut rng = seed::rng(17);
    let (mut nonzero, mut total) = (0usize, 0usize);
    while total < 100_000 {
        let e = m.sample_noise(&mut rng);
        let s = e.shifts().unwrap();
        nonzero += s.iter().filter(|v| **v != 0).count();
        total += s.len();
    }
    // a shift fires with probability eta and is then uniform on {-5..5}, so zero with 1/11
    let p = eta * 10.0 / 11.0;
    let se = (p * (1.0 - p) / total as f64).sqrt();
    let rate = nonzero as f64 / total as f64;
    assert!((rate - p).abs() < 3.0 * se, "{rate} vs {p} (se {se})");
}
