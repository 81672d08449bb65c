mod common;

use ckstab_core::simulate::ShockSource;
use ckstab_core::{
    jsr_lower_bound, jsr_upper_bound_norm, simulate_cksvar_with, CksvarModel, MonetaryModelSpec,
    RegimeSystem, Side, SignPattern,
};
use common::*;
use nalgebra::DMatrix;
use rand::Rng;

#[test]
fn enumeration_matches_brute_force_bitwise() {
    for (name, sys) in two_state_corpus() {
        for constrained in [false, true] {
            let (lo, hi) = brute_force_bounds(&sys, 10, constrained);
            let l = jsr_lower_bound(&sys, 10, constrained).unwrap();
            let u = jsr_upper_bound_norm(&sys, 10, constrained).unwrap();
            assert!(!l.truncated && !u.truncated, "{name}");
            assert_eq!(l.value.to_bits(), lo.to_bits(), "{name} lower: {} vs {lo}", l.value);
            assert_eq!(u.value.to_bits(), hi.to_bits(), "{name} upper: {} vs {hi}", u.value);
        }
    }
}

#[test]
fn brute_force_respects_constraints_on_two_lag_models() {
    // four states, so not part of the bitwise corpus; compare values only
    let m = CksvarModel::univariate(&[0.7, -0.1], &[0.2, 0.0], 0.0, 1.0).unwrap();
    let sys = RegimeSystem::from_canonical(&m.canonicalize(false).unwrap());
    let l = jsr_lower_bound(&sys, 6, true).unwrap();
    let free = jsr_lower_bound(&sys, 6, false).unwrap();
    assert!(l.value <= free.value + 1e-15);
}

#[test]
fn canonical_pipeline_matches_structural_solver() {
    let mut r = rng(7);
    for _ in 0..20 {
        let p = r.random_range(1..=3);
        let k = r.random_range(1..=2);
        let m = random_coherent_model(&mut r, p, k);
        let u = DMatrix::from_fn(150, p, |_, _| r.random_range(-1.0..1.0));
        let tr = simulate_cksvar_with(&m, 150, None, ShockSource::Given(&u)).unwrap();
        let direct = structural_simulation(&m, &u);
        assert!(max_rel_diff(&tr.values, &direct) < 1e-8, "{m:?}");
    }
}

#[test]
fn linear_model_matches_var() {
    let mut r = rng(11);
    for _ in 0..10 {
        let p = r.random_range(1..=3);
        let k = r.random_range(1..=2);
        let mut m = random_coherent_model(&mut r, p, k);
        m.phi0_minus = m.phi0_plus.clone();
        m.lag_minus = m.lag_plus.clone();
        for v in m.lag_plus.iter_mut().chain(m.lag_minus.iter_mut()) {
            *v *= 0.5;
        }
        let u = DMatrix::from_fn(200, p, |_, _| r.random_range(-1.0..1.0));
        let tr = simulate_cksvar_with(&m, 200, None, ShockSource::Given(&u)).unwrap();
        let var = linear_var_simulation(&m, &u);
        let d = max_rel_diff(&tr.values, &var);
        assert!(d < 1e-10, "p={p} k={k} diff {d} max {}", var.abs().max());
    }
}

#[test]
fn threshold_shift_moves_y_by_b() {
    let m = CksvarModel::univariate(&[0.5], &[0.2], 1.0, 1.0).unwrap();
    let mut original = m.clone();
    original.threshold = 2.0;
    let shifted = original.shift_threshold();
    assert!((shifted.intercept[0] - -1.6).abs() < 1e-12);
    let mut r = rng(3);
    let u = DMatrix::from_fn(300, 1, |_, _| r.random_range(-2.0..2.0));
    // start both at their respective thresholds
    let a = simulate_cksvar_with(&original, 300, Some(&DMatrix::from_element(1, 1, 2.0)), ShockSource::Given(&u)).unwrap();
    let b = simulate_cksvar_with(&shifted, 300, None, ShockSource::Given(&u)).unwrap();
    for t in 0..300 {
        assert!((a.values[(t, 0)] - (b.values[(t, 0)] + 2.0)).abs() < 1e-9);
    }
    assert_eq!(a.regimes, b.regimes);
}

#[test]
fn two_lag_states_by_hand() {
    let (a1, b1, a2, b2) = (0.6, 0.2, 0.3, 0.1);
    let m = CksvarModel::univariate(&[a1, a2], &[b1, b2], 0.0, 1.0).unwrap();
    let sys = RegimeSystem::from_canonical(&m.canonicalize(false).unwrap());
    assert_eq!(sys.num_states(), 4);
    let edges: usize = (0..4).map(|i| sys.successors(i).count()).sum();
    assert_eq!(edges, 8);
    let state = |s: &str| {
        let pat = SignPattern::parse(s).unwrap();
        sys.labels.iter().position(|l| *l == pat.to_string()).unwrap()
    };
    // pattern (s1, s2) = signs of (y_{t-1}, y_{t-2})
    for (s, c1, c2) in [("++", a1, a2), ("+-", a1, b2), ("-+", b1, a2), ("--", b1, b2)] {
        let f = &sys.companion[state(s)];
        assert_eq!(f, &DMatrix::from_row_slice(2, 2, &[c1, c2, 1.0, 0.0]), "{s}");
    }
    // (s1, s2) -> (s0, s1)
    assert!(sys.has_edge(state("+-"), state("-+")));
    assert!(sys.has_edge(state("+-"), state("++")));
    assert!(!sys.has_edge(state("+-"), state("--")));
    assert!(!sys.has_edge(state("+-"), state("+-")));
}

#[test]
fn monetary_canonical_lags_closed_form() {
    for (chi, theta, psi) in [(0.2, -0.5, 0.1), (0.7, -1.0, 0.5), (0.99, -0.5, 0.9)] {
        let spec = MonetaryModelSpec::with_defaults(chi, theta, psi);
        let (g, mu) = (1.5, 0.5);
        let k1 = 1.0 / (1.0 - theta * g);
        let kmu = 1.0 / (1.0 - mu * theta * g);
        let tmu = g * theta * (1.0 - mu) * k1;
        let m = spec.build().unwrap();
        let cm = m.canonicalize(false).unwrap();
        let plus = DMatrix::from_row_slice(2, 2, &[psi, g * (chi * k1 - psi) * k1, 0.0, chi * k1]);
        let minus = DMatrix::from_row_slice(
            2,
            2,
            &[psi - chi * tmu * kmu, g * (chi * k1 - psi) * k1, -chi * theta * (1.0 - mu) * kmu, chi * k1],
        );
        assert!((cm.regime_lag(1, Side::Plus) - plus).abs().max() < 1e-12);
        assert!((cm.regime_lag(1, Side::Minus) - minus).abs().max() < 1e-12);
        let c = m.check_coherence().unwrap();
        assert!((c.det_plus - (1.0 - theta * g)).abs() < 1e-12);
        assert!((c.det_minus - (1.0 - mu * theta * g)).abs() < 1e-12);
    }
}

#[test]
fn monetary_without_inflation_feedback_is_linear() {
    let m = MonetaryModelSpec::with_defaults(0.0, -0.5, 0.3).build().unwrap();
    let cm = m.canonicalize(false).unwrap();
    let (a, b) = (cm.regime_lag(1, Side::Plus), cm.regime_lag(1, Side::Minus));
    assert!((&a - &b).abs().max() < 1e-15);
    let mut ev: Vec<f64> = a.complex_eigenvalues().iter().map(|z| z.re).collect();
    ev.sort_by(f64::total_cmp);
    assert!(ev[0].abs() < 1e-12 && (ev[1] - 0.3).abs() < 1e-12);
}

#[test]
fn canonical_round_trip_of_coordinates() {
    let mut r = rng(5);
    for _ in 0..20 {
        let m = random_coherent_model(&mut r, 3, 1);
        let cm = m.canonicalize(false).unwrap();
        let z = random_vector(&mut r, 3, 2.0);
        let back = cm.from_canonical(&cm.to_canonical(&z));
        assert!((back - &z).norm() < 1e-10 * (1.0 + z.norm()));
    }
}
