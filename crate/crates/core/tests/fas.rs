use dnflex::fas::{fas_point, gate_envelopes, EnvelopePoint, FasConfig, FasSignal, FlexEnvelope};
use dnflex::network::Profiles;
use proptest::prelude::*;

const LEVELS: [f64; 4] = [0.3, 0.1, 0.25, 0.12];

fn cfg() -> FasConfig {
    FasConfig::default()
}

#[test]
fn voltage_droop_by_hand() {
    let c = cfg();
    // saturated at the limits
    let p = fas_point(1.08, 0.0, LEVELS, &c);
    assert_eq!(p.lam_p_minus, -0.3);
    assert_eq!(p.lam_q_minus, -0.25);
    assert_eq!(p.lam_p_plus, 0.0);
    let p = fas_point(0.92, 0.0, LEVELS, &c);
    assert_eq!(p.lam_p_plus, 0.3);
    assert_eq!(p.lam_q_plus, 0.25);
    assert_eq!(p.lam_p_minus, 0.0);
    // inner thresholds
    for v in [1.04, 0.96, 1.0] {
        assert!(fas_point(v, 0.0, LEVELS, &c).is_zero(), "v = {v}");
    }
    // midpoints: (1.06 − 1.04) / (1.08 − 1.04) = 0.5
    let p = fas_point(1.06, 0.0, LEVELS, &c);
    assert!((p.lam_p_minus + 0.15).abs() < 1e-12);
    assert!((p.lam_q_minus + 0.125).abs() < 1e-12);
    let p = fas_point(0.94, 0.0, LEVELS, &c);
    assert!((p.lam_p_plus - 0.15).abs() < 1e-12);
    assert!((p.lam_q_plus - 0.125).abs() < 1e-12);
}

#[test]
fn thermal_droop_by_hand() {
    let c = cfg();
    assert!(fas_point(1.0, 75.0, LEVELS, &c).is_zero());
    assert!(fas_point(1.0, -75.0, LEVELS, &c).is_zero());
    let p = fas_point(1.0, 100.0, LEVELS, &c);
    assert_eq!(p.lam_p_plus, 0.1);
    assert_eq!(p.lam_q_plus, 0.12);
    assert_eq!(p.lam_p_minus, 0.0);
    let p = fas_point(1.0, -100.0, LEVELS, &c);
    assert_eq!(p.lam_p_minus, -0.1);
    assert_eq!(p.lam_q_minus, -0.12);
    assert_eq!(p.lam_p_plus, 0.0);
    let p = fas_point(1.0, 87.5, LEVELS, &c);
    assert!((p.lam_p_plus - 0.05).abs() < 1e-12);
    assert!((p.lam_q_plus - 0.06).abs() < 1e-12);
    let p = fas_point(1.0, 50.0, LEVELS, &c);
    assert!(p.is_zero());
}

#[test]
fn voltage_and_thermal_terms_add() {
    let p = fas_point(0.92, 100.0, LEVELS, &cfg());
    assert!((p.lam_p_plus - 0.4).abs() < 1e-12);
    assert!((p.lam_q_plus - 0.37).abs() < 1e-12);
}

fn one_step_profiles(p_load: f64, q_load: f64, p_gen: f64) -> Profiles {
    Profiles::new(
        vec![vec![p_load]],
        vec![vec![q_load]],
        vec![vec![p_gen]],
        None,
    )
    .unwrap()
}

proptest! {
    #[test]
    fn zero_inside_both_bands(v in 0.96f64..=1.04, t in -75.0f64..=75.0) {
        let p = fas_point(v, t, LEVELS, &cfg());
        prop_assert!(p.is_zero());
        prop_assert_eq!(p.gates(), [false; 4]);
    }

    #[test]
    fn signs_and_saturation(
        v in 0.85f64..1.15,
        t in -150.0f64..150.0,
        vc_p in 0.0f64..0.2,
        tc_p in 0.0f64..0.2,
        vc_q in 0.0f64..0.2,
        tc_q in 0.0f64..0.2,
    ) {
        let p = fas_point(v, t, [vc_p, tc_p, vc_q, tc_q], &cfg());
        prop_assert!(p.lam_p_plus >= 0.0 && p.lam_q_plus >= 0.0);
        prop_assert!(p.lam_p_minus <= 0.0 && p.lam_q_minus <= 0.0);
        prop_assert!(p.lam_p_plus <= vc_p + tc_p + 1e-15);
        prop_assert!(-p.lam_p_minus <= vc_p + tc_p + 1e-15);
        prop_assert!(p.lam_q_plus <= vc_q + tc_q + 1e-15);
        prop_assert!(-p.lam_q_minus <= vc_q + tc_q + 1e-15);
    }

    #[test]
    fn droop_is_monotone_in_voltage(v1 in 0.85f64..1.15, v2 in 0.85f64..1.15) {
        let (lo, hi) = if v1 <= v2 { (v1, v2) } else { (v2, v1) };
        let a = fas_point(lo, 0.0, LEVELS, &cfg());
        let b = fas_point(hi, 0.0, LEVELS, &cfg());
        prop_assert!(a.lam_p_plus >= b.lam_p_plus);
        prop_assert!(a.lam_p_minus >= b.lam_p_minus);
    }

    #[test]
    fn gated_bounds_follow_the_signal(
        v in 0.85f64..1.15,
        t in -150.0f64..150.0,
        p_load in 0.0f64..20.0,
        q_load in 0.0f64..5.0,
        p_gen in 0.0f64..20.0,
        share in 0.0f64..1.0,
    ) {
        let point = fas_point(v, t, LEVELS, &cfg());
        let fas = FasSignal { points: vec![vec![point]] };
        let raw = EnvelopePoint {
            p_max: share * p_load,
            p_min: -share * p_load,
            q_max: share * q_load,
            q_min: -share * q_load,
            gen_cap: 0.0,
            load_cap: 0.0,
        };
        let env = FlexEnvelope { points: vec![vec![raw]] };
        let gated = gate_envelopes(&fas, &env, &one_step_profiles(p_load, q_load, p_gen)).unwrap();
        let g = gated.at(0)[0];
        let [z1, z2, z3, z4] = point.gates();
        prop_assert_eq!(g.p_max, if z1 { raw.p_max } else { 0.0 });
        prop_assert_eq!(g.p_min, if z2 { raw.p_min } else { 0.0 });
        prop_assert_eq!(g.q_max, if z3 { raw.q_max } else { 0.0 });
        prop_assert_eq!(g.q_min, if z4 { raw.q_min } else { 0.0 });
        prop_assert_eq!(g.gen_cap, p_gen);
        prop_assert_eq!(g.load_cap, p_load);
    }
}
