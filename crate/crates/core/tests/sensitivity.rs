mod common;

use dnflex::network::{builtin_test_feeder, FIXTURE_MAIN_BRANCH};
use dnflex::sensitivity::{estimate_nvs, perturb_observe, Channel, LogUniformSampler};
use num_complex::Complex64;
use proptest::prelude::*;

/// Receiving-end voltage of a 2-bus feeder carrying load `p + jq` (pu),
/// from the biquadratic `V⁴ + (2(pR + qX) − 1)V² + (p² + q²)(R² + X²) = 0`.
fn two_bus_voltage(r: f64, x: f64, p: f64, q: f64) -> f64 {
    let b = 2.0 * (p * r + q * x) - 1.0;
    let c = (p * p + q * q) * (r * r + x * x);
    ((-b + (b * b - 4.0 * c).sqrt()) / 2.0).sqrt()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn two_bus_sensitivity_matches_closed_form(
        r in 0.01f64..0.1,
        ratio in 0.5f64..4.0,
        p in 0.0f64..0.5,
        q in 0.0f64..0.2,
    ) {
        let x = r / ratio;
        let net = common::two_bus(r, x);
        let inj = [Complex64::new(0.0, 0.0), Complex64::new(-p, -q)];
        let delta = 0.01;
        let v0 = two_bus_voltage(r, x, p, q);
        let dp = perturb_observe(&net, &inj, 1, delta, Channel::Active).unwrap();
        let oracle = (v0 - two_bus_voltage(r, x, p + delta, q)).abs() / delta;
        prop_assert!((dp[1] - oracle).abs() < 1e-6, "{} vs {oracle}", dp[1]);
        prop_assert_eq!(dp[0], 0.0);
        let dq = perturb_observe(&net, &inj, 1, delta, Channel::Reactive).unwrap();
        let oracle = (v0 - two_bus_voltage(r, x, p, q + delta)).abs() / delta;
        prop_assert!((dq[1] - oracle).abs() < 1e-6);
    }
}

#[test]
fn fixture_sensitivity_structure() {
    let (net, profiles) = builtin_test_feeder();
    let sampler = LogUniformSampler::new(&net, &profiles, 7);
    let table = estimate_nvs(&net, &sampler, 100).unwrap();
    assert_eq!(table.failed_scenarios, 0);
    for node in net.nodes() {
        if !node.is_prosumer() {
            assert_eq!(table.psi[node.id], 0.0, "node {}", node.id);
            assert_eq!(table.beta[node.id], 0.0, "node {}", node.id);
        } else {
            assert!(table.psi[node.id] > 0.0 && table.beta[node.id] > 0.0);
        }
    }
    // prosumers grouped by the main-branch node they hang off, substation first
    let groups: Vec<Vec<f64>> = FIXTURE_MAIN_BRANCH
        .iter()
        .map(|&m| {
            net.nodes()
                .iter()
                .filter(|n| n.is_prosumer() && net.parent(n.id) == Some(m))
                .map(|n| table.psi[n.id])
                .collect()
        })
        .filter(|g: &Vec<f64>| !g.is_empty())
        .collect();
    assert!(groups.len() >= 6, "{groups:?}");
    for w in groups.windows(2) {
        let prev = w[0].iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let next = w[1].iter().cloned().fold(f64::INFINITY, f64::min);
        assert!(next >= prev, "{groups:?}");
    }
    assert!(table.psi[18] > table.psi[1]);
}
