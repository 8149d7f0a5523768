use std::f64::consts::FRAC_PI_6;

use super::{synth_profiles, Bases, Branch, Network, Node, NodeKind, Profiles};

/// Main-branch node sequence of the built-in feeder, substation first.
pub const FIXTURE_MAIN_BRANCH: [usize; 7] = [0, 2, 5, 8, 11, 14, 17];

// (node, pv kWp, heat pump kW, peak load kW)
const PROSUMERS: [(usize, f64, f64, f64); 12] = [
    (1, 0.0, 0.0, 20.0),
    (3, 10.0, 0.0, 7.0),
    (4, 20.0, 0.0, 4.0),
    (6, 8.0, 0.0, 2.0),
    (7, 20.0, 0.0, 9.0),
    (9, 12.0, 0.0, 12.0),
    (10, 15.0, 6.0, 14.0),
    (12, 12.0, 0.0, 14.0),
    (13, 10.0, 0.0, 14.0),
    (15, 18.0, 0.0, 16.0),
    (16, 18.0, 0.0, 20.0),
    (18, 18.0, 7.5, 10.0),
];

// (from, to) of the 150 m service cables
const SPURS: [(usize, usize); 12] = [
    (0, 1),
    (2, 3),
    (2, 4),
    (5, 6),
    (5, 7),
    (8, 9),
    (8, 10),
    (11, 12),
    (11, 13),
    (14, 15),
    (14, 16),
    (17, 18),
];

const MAIN_LEN_KM: f64 = 0.300;
const SPUR_LEN_KM: f64 = 0.150;
/// 150 mm² Al.
const MAIN_R_OHM_KM: f64 = 0.206;
/// 35 mm² Al.
const SPUR_R_OHM_KM: f64 = 0.868;
const MAIN_RATING_A: f64 = 250.0;
const SPUR_RATING_A: f64 = 20.0;
const TARGET_R_OVER_X: f64 = 2.01;

/// The 19-node, 12-prosumer test feeder without profiles.
pub fn builtin_network() -> Network {
    let bases = Bases::default();
    let z_base = bases.z_base_ohm();
    let i_base = bases.i_base_a();

    let mut nodes: Vec<Node> = (0..19)
        .map(|id| Node {
            id,
            kind: if id == 0 {
                NodeKind::Substation
            } else {
                NodeKind::Junction
            },
            pv_kwp: 0.0,
            hp_kw: 0.0,
            peak_load_kw: 0.0,
            has_flexibility: false,
        })
        .collect();
    for &(id, pv, hp, peak) in &PROSUMERS {
        nodes[id] = Node {
            id,
            kind: NodeKind::Prosumer,
            pv_kwp: pv,
            hp_kw: hp,
            peak_load_kw: peak,
            has_flexibility: true,
        };
    }

    // One reactance per km for both cable types, chosen so the branch-mean
    // R/X hits the target.
    let n_main = FIXTURE_MAIN_BRANCH.len() - 1;
    let n_spur = SPURS.len();
    let x_ohm_km = (n_main as f64 * MAIN_R_OHM_KM + n_spur as f64 * SPUR_R_OHM_KM)
        / ((n_main + n_spur) as f64 * TARGET_R_OVER_X);

    let cable = |from, to, len_km: f64, r_ohm_km: f64, amps: f64| Branch {
        from,
        to,
        r: r_ohm_km * len_km / z_base,
        x: x_ohm_km * len_km / z_base,
        s_max: amps / i_base,
        theta_min: -FRAC_PI_6,
        theta_max: FRAC_PI_6,
    };

    let mut branches = Vec::with_capacity(n_main + n_spur);
    for w in FIXTURE_MAIN_BRANCH.windows(2) {
        branches.push(cable(w[0], w[1], MAIN_LEN_KM, MAIN_R_OHM_KM, MAIN_RATING_A));
    }
    for &(from, to) in &SPURS {
        branches.push(cable(from, to, SPUR_LEN_KM, SPUR_R_OHM_KM, SPUR_RATING_A));
    }

    Network::new(bases, 0, nodes, branches, true).expect("built-in feeder is valid")
}

/// The built-in feeder with its default synthetic day (seed 1, scale 1).
pub fn builtin_test_feeder() -> (Network, Profiles) {
    let net = builtin_network();
    let profiles = synth_profiles(&net, 1, 1.0);
    (net, profiles)
}
