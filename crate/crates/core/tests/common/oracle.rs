use super::{injections, step, three_bus};
use dnflex::fas::{
    fas_point, gate_envelopes, project_loadings, EnvelopePoint, FasConfig, FasPoint, FasSignal,
    FlexEnvelope,
};
use dnflex::network::{Network, Profiles};
use dnflex::powerflow::solve_power_flow;
use dnflex::rdopf::{solve_ac_rdopf, solve_soc_rdopf, Formulation, RdopfConfig, StepData};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const GRID_KW: f64 = 0.01;

pub fn cfg(formulation: Formulation) -> RdopfConfig {
    RdopfConfig {
        formulation,
        ..RdopfConfig::default()
    }
}

/// Which two activations the brute force enumerates at node 2.
#[derive(Clone, Copy, Debug)]
pub enum Case {
    /// Ramp-up (`ΔP⁻`) against generation curtailment.
    OverVoltage,
    /// Ramp-down (`ΔP⁺`) against load curtailment.
    UnderVoltage,
}

pub struct Instance {
    pub net: Network,
    pub step: StepData,
    pub case: Case,
    pub price: f64,
    pub box_kw: f64,
}

/// Node-2 injection (kW) that puts node 2 at `v_target`, by bisection.
pub fn size_for_voltage(net: &Network, v_target: f64, case: Case) -> f64 {
    let v_at = |kw: f64| {
        let s = match case {
            Case::OverVoltage => num_complex::Complex64::new(kw, 0.0),
            Case::UnderVoltage => num_complex::Complex64::new(-kw, -0.2 * kw),
        } / super::S_BASE_KVA;
        let inj = [num_complex::Complex64::new(0.0, 0.0), 0.0.into(), s];
        solve_power_flow(net, &inj).unwrap().v_mag[2]
    };
    let (mut lo, mut hi) = (0.0, 40.0);
    for _ in 0..100 {
        let mid = 0.5 * (lo + hi);
        let above = v_at(mid) > v_target;
        match case {
            Case::OverVoltage if above => hi = mid,
            Case::OverVoltage => lo = mid,
            Case::UnderVoltage if above => lo = mid,
            Case::UnderVoltage => hi = mid,
        }
    }
    0.5 * (lo + hi)
}

pub fn instance(r: f64, v_target: f64, price: f64, box_kw: f64, case: Case) -> Instance {
    let net = three_bus(r, r / 2.0);
    let kw = size_for_voltage(&net, v_target, case);
    let mut fas = [FasPoint::default(); 3];
    let mut flex = [EnvelopePoint::default(); 3];
    let s = match case {
        Case::OverVoltage => {
            fas[2].lam_p_minus = -price;
            flex[2].p_min = -box_kw;
            step([0.0; 3], [0.0; 3], [0.0, 0.0, kw], fas, flex)
        }
        Case::UnderVoltage => {
            fas[2].lam_p_plus = price;
            flex[2].p_max = box_kw;
            step([0.0, 0.0, kw], [0.0, 0.0, 0.2 * kw], [0.0; 3], fas, flex)
        }
    };
    Instance {
        net,
        step: s,
        case,
        price,
        box_kw,
    }
}

/// Cheapest feasible point on a 0.01 kW grid over the two open decisions,
/// each point checked by a full power flow.
pub fn brute_force(inst: &Instance, c: &RdopfConfig) -> f64 {
    let curt_cap = match inst.case {
        Case::OverVoltage => inst.step.p_gen[2],
        Case::UnderVoltage => inst.step.p_load[2],
    };
    let n_flex = (inst.box_kw / GRID_KW).round() as usize;
    let n_curt = (curt_cap / GRID_KW).ceil() as usize;
    let mut best = f64::INFINITY;
    for a in 0..=n_flex {
        let flex = (a as f64 * GRID_KW).min(inst.box_kw);
        for b in 0..=n_curt {
            let curt = (b as f64 * GRID_KW).min(curt_cap);
            let mut acts = [[0.0; 6]; 3];
            let cost = match inst.case {
                Case::OverVoltage => {
                    acts[2][1] = -flex;
                    acts[2][5] = curt;
                    inst.price * flex + c.lambda_curt_gen * curt
                }
                Case::UnderVoltage => {
                    acts[2][0] = flex;
                    acts[2][4] = curt;
                    inst.price * flex + c.lambda_curt_load * curt
                }
            };
            let Ok(st) = solve_power_flow(&inst.net, &injections(&inst.step, &acts)) else {
                continue;
            };
            let feasible = st.v_mag[1..].iter().all(|&v| v >= c.v_min && v <= c.v_max)
                && st.max_abs_loading() <= 100.0;
            if feasible {
                best = best.min(0.25 * (cost + c.lambda_loss * st.total_loss_kw));
            }
        }
    }
    best
}

/// Over-voltage ramp prices stay at or below the loss price; above it the
/// relaxation prefers fictitious losses (see `loose_relaxation_*`).
pub fn oracle_instances() -> Vec<Instance> {
    let mut out = vec![instance(0.5, 1.083, 0.2, 1.0, Case::OverVoltage)];
    let lambda_loss = RdopfConfig::default().lambda_loss;
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for k in 0..6 {
        let r = rng.gen_range(0.3..0.6);
        out.push(if k % 2 == 0 {
            let v = rng.gen_range(1.081..1.086);
            instance(
                r,
                v,
                rng.gen_range(0.05..lambda_loss),
                1.0,
                Case::OverVoltage,
            )
        } else {
            let v = rng.gen_range(0.914..0.919);
            instance(r, v, rng.gen_range(0.05..0.35), 1.0, Case::UnderVoltage)
        });
    }
    out
}

/// Random 3-bus step with the FAS computed from its own power flow.
pub fn random_gated_step(rng: &mut ChaCha8Rng) -> (Network, StepData, [EnvelopePoint; 3]) {
    let r = rng.gen_range(0.2..0.6);
    let net = three_bus(r, r / 2.0);
    let mut p_load = [0.0; 3];
    let mut p_gen = [0.0; 3];
    for i in 1..3 {
        p_load[i] = rng.gen_range(0.5..12.0);
        p_gen[i] = rng.gen_range(0.0..12.0);
    }
    let q_load = p_load.map(|p| 0.2 * p);
    let inj: Vec<_> = (0..3)
        .map(|i| num_complex::Complex64::new(p_gen[i] - p_load[i], -q_load[i]) / 100.0)
        .collect();
    let state = solve_power_flow(&net, &inj).unwrap();
    let loading = project_loadings(&net, &state);
    let fas_cfg = FasConfig::default();
    let mut fas = [FasPoint::default(); 3];
    let mut raw = [EnvelopePoint::default(); 3];
    for i in 1..3 {
        let levels = [0; 4].map(|_| rng.gen_range(0.01..0.2));
        fas[i] = fas_point(state.v_mag[i], loading[i], levels, &fas_cfg);
        let share = rng.gen_range(0.1..1.0);
        raw[i] = EnvelopePoint {
            p_max: share * p_load[i],
            p_min: -share * p_load[i],
            q_max: share * q_load[i],
            q_min: -share * q_load[i],
            gen_cap: p_gen[i],
            load_cap: p_load[i],
        };
    }
    let profiles = Profiles::new(
        p_load.iter().map(|&v| vec![v]).collect(),
        q_load.iter().map(|&v| vec![v]).collect(),
        p_gen.iter().map(|&v| vec![v]).collect(),
        None,
    )
    .unwrap();
    let signal = FasSignal {
        points: vec![fas.to_vec()],
    };
    let env = FlexEnvelope {
        points: vec![raw.to_vec()],
    };
    let gated = gate_envelopes(&signal, &env, &profiles).unwrap();
    let g: [EnvelopePoint; 3] = gated.at(0).try_into().unwrap();
    (net, step(p_load, q_load, p_gen, fas, g), raw)
}

pub fn with_gates(s: &StepData, raw: &[EnvelopePoint; 3], z: &[[bool; 4]; 3]) -> StepData {
    let mut out = s.clone();
    for i in 0..3 {
        let pick = |open: bool, v: f64| if open { v } else { 0.0 };
        out.envelope[i].p_max = pick(z[i][0], raw[i].p_max);
        out.envelope[i].p_min = pick(z[i][1], raw[i].p_min);
        out.envelope[i].q_max = pick(z[i][2], raw[i].q_max);
        out.envelope[i].q_min = pick(z[i][3], raw[i].q_min);
    }
    out
}

/// Worst `|solver − grid|` over the oracle instances, both formulations.
pub fn worst_oracle_error() -> f64 {
    let mut worst: f64 = 0.0;
    for inst in oracle_instances() {
        for formulation in [Formulation::Soc, Formulation::Ac] {
            let c = cfg(formulation);
            let res = match formulation {
                Formulation::Soc => solve_soc_rdopf(&inst.net, &inst.step, &c),
                Formulation::Ac => solve_ac_rdopf(&inst.net, &inst.step, &c),
            }
            .unwrap();
            let oracle = brute_force(&inst, &c);
            worst = worst.max((res.objective - oracle).abs());
        }
    }
    worst
}

/// Compares the gated objective with the best explicit binary choice on
/// `count` random instances; returns the worst difference.
pub fn gating_check(seed: u64, count: usize) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let c = cfg(Formulation::Soc);
    let mut checked = 0;
    let mut tries = 0;
    let mut worst: f64 = 0.0;
    while checked < count {
        tries += 1;
        assert!(tries < 2000, "too few instances with an active signal");
        let (net, gated, raw) = random_gated_step(&mut rng);
        // channels a binary may open: only where the signal is nonzero
        let open: Vec<(usize, usize)> = (0..3)
            .flat_map(|i| {
                let g = gated.fas[i].gates();
                (0..4).filter(move |&ch| g[ch]).map(move |ch| (i, ch))
            })
            .collect();
        if open.is_empty() {
            continue;
        }
        let sigma_gated = solve_soc_rdopf(&net, &gated, &c).unwrap().objective;
        let mut best = f64::INFINITY;
        let mut full = f64::NAN;
        for mask in 0..(1u32 << open.len()) {
            let mut z = [[false; 4]; 3];
            for (bit, &(i, ch)) in open.iter().enumerate() {
                z[i][ch] = mask & (1 << bit) != 0;
            }
            let s = with_gates(&gated, &raw, &z);
            let sigma = solve_soc_rdopf(&net, &s, &c).unwrap().objective;
            best = best.min(sigma);
            if mask == (1 << open.len()) - 1 {
                full = sigma;
            }
        }
        worst = worst
            .max((sigma_gated - best).abs())
            .max((sigma_gated - full).abs());
        checked += 1;
    }
    worst
}
