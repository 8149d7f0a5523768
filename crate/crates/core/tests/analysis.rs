use dnflex::analysis::{
    compliance, knee_index, optimality_gap, ComplianceLimits, EnergyMatrix, COMPLIANCE_TOL,
};
use dnflex::powerflow::NetworkState;
use num_complex::Complex64;
use proptest::prelude::*;

/// Point of `y = 1/x` on `[a, b]` farthest from the chord once both axes are
/// scaled to `[0, 1]`, by dense sampling.
fn dense_knee(a: f64, b: f64) -> f64 {
    let (ya, yb) = (1.0 / a, 1.0 / b);
    let n = 1_000_000;
    let mut best = (a, f64::NEG_INFINITY);
    for k in 0..=n {
        let x = a + (b - a) * k as f64 / n as f64;
        let xn = (x - a) / (b - a);
        let yn = (1.0 / x - yb) / (ya - yb);
        // chord from (0, 1) to (1, 0)
        let d = (1.0 - xn - yn).abs();
        if d > best.1 {
            best = (x, d);
        }
    }
    best.0
}

#[test]
fn knee_of_a_hyperbola() {
    for (a, b, n) in [(0.1, 10.0, 200), (0.5, 4.0, 50), (1.0, 100.0, 400)] {
        let xs: Vec<f64> = (0..n)
            .map(|k| a + (b - a) * k as f64 / (n - 1) as f64)
            .collect();
        let ys: Vec<f64> = xs.iter().map(|x| 1.0 / x).collect();
        let k = knee_index(&xs, &ys).unwrap();
        let target = dense_knee(a, b);
        let spacing = (b - a) / (n - 1) as f64;
        assert!(
            (xs[k] - target).abs() <= spacing,
            "[{a}, {b}]: {} vs {target}",
            xs[k]
        );
        // analytic: normalized distance peaks where dy/dx = −(ya − yb)/(b − a)
        let analytic = ((b - a) / (1.0 / a - 1.0 / b)).sqrt();
        assert!((target - analytic).abs() < 1e-4);
    }
}

#[test]
fn knee_ignores_axis_scaling() {
    let xs: Vec<f64> = (1..=20).map(f64::from).collect();
    let ys: Vec<f64> = xs.iter().map(|x| 1.0 / x).collect();
    let k = knee_index(&xs, &ys).unwrap();
    let xs2: Vec<f64> = xs.iter().map(|x| 1e3 * x + 7.0).collect();
    let ys2: Vec<f64> = ys.iter().map(|y| 1e-4 * y).collect();
    assert_eq!(knee_index(&xs2, &ys2).unwrap(), k);
}

fn state(v: &[f64], loading: &[f64]) -> NetworkState {
    let zero = Complex64::new(0.0, 0.0);
    NetworkState {
        t: 0,
        v_mag: v.to_vec(),
        v_ang: vec![0.0; v.len()],
        s_from: vec![zero; loading.len()],
        s_to: vec![zero; loading.len()],
        loading_pct: loading.to_vec(),
        branch_loss_kw: vec![0.0; loading.len()],
        total_loss_kw: 0.0,
        slack_injection: zero,
        max_mismatch: 0.0,
        iterations: 0,
    }
}

#[test]
fn compliance_counts_by_hand() {
    let lim = ComplianceLimits {
        v_min: 0.92,
        v_max: 1.08,
        dv_perm: 0.04,
        dt_perm: 75.0,
    };
    // node 0 is the slack and never counted
    let states = [
        state(&[1.2, 1.09, 1.0, 0.95], &[100.0, -80.0, 10.0]),
        state(
            &[0.5, 1.08, 0.91, 1.05],
            &[-100.0 * (1.0 + 2.0 * COMPLIANCE_TOL), 50.0, 75.0],
        ),
    ];
    let c = compliance(&states, 0, &lim);
    let pct = |k: f64, n: f64| 100.0 * k / n;
    assert_eq!(c.over_v_max_pct, pct(1.0, 6.0));
    assert_eq!(c.under_v_min_pct, pct(1.0, 6.0));
    assert_eq!(c.over_band_pct, pct(3.0, 6.0));
    assert_eq!(c.under_band_pct, pct(2.0, 6.0));
    // exactly 100 % sits on the bound and is not counted
    assert_eq!(c.loading_ge_100_pct, pct(1.0, 6.0));
    assert_eq!(c.loading_over_perm_pct, pct(3.0, 6.0));
}

#[test]
fn gap_needs_a_positive_reference() {
    assert!(optimality_gap(-1.0, -2.0).is_err());
    assert!(optimality_gap(f64::NAN, 1.0).is_err());
    assert!((optimality_gap(4.0, 3.0).unwrap() - 25.0).abs() < 1e-12);
}

proptest! {
    #[test]
    fn marginals_agree(values in prop::collection::vec(prop::collection::vec(-5.0f64..5.0, 6), 1..8)) {
        let m = EnergyMatrix { values };
        let t: f64 = m.temporal().iter().sum();
        let l: f64 = m.locational().iter().sum();
        prop_assert!((t - m.total()).abs() < 1e-9);
        prop_assert!((l - m.total()).abs() < 1e-9);
        let peak = m.peak_kw();
        for row in &m.values {
            for v in row {
                prop_assert!(v.abs() / 0.25 <= peak.abs() + 1e-12);
            }
        }
        prop_assert!(m.values.iter().flatten().any(|v| *v / 0.25 == peak) || peak == 0.0);
    }

    #[test]
    fn gap_sign_follows_ordering(ac in 0.01f64..100.0, soc in 0.0f64..100.0) {
        let g = optimality_gap(ac, soc).unwrap();
        prop_assert_eq!(g >= 0.0, soc <= ac);
    }
}
