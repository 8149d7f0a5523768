#![allow(dead_code)]

pub mod oracle;

use dnflex::fas::{EnvelopePoint, FasPoint};
use dnflex::network::{Bases, Branch, Network, Node, NodeKind};
use dnflex::rdopf::StepData;
use num_complex::Complex64;

pub const S_BASE_KVA: f64 = 100.0;

fn node(id: usize, kind: NodeKind) -> Node {
    let prosumer = kind == NodeKind::Prosumer;
    Node {
        id,
        kind,
        pv_kwp: if prosumer { 10.0 } else { 0.0 },
        hp_kw: 0.0,
        peak_load_kw: if prosumer { 10.0 } else { 0.0 },
        has_flexibility: prosumer,
    }
}

fn branch(from: usize, to: usize, r: f64, x: f64) -> Branch {
    Branch {
        from,
        to,
        r,
        x,
        s_max: 1.0,
        theta_min: -0.5,
        theta_max: 0.5,
    }
}

/// Substation at node 0 feeding one prosumer.
pub fn two_bus(r: f64, x: f64) -> Network {
    Network::new(
        Bases::default(),
        0,
        vec![node(0, NodeKind::Substation), node(1, NodeKind::Prosumer)],
        vec![branch(0, 1, r, x)],
        true,
    )
    .unwrap()
}

/// Chain 0 – 1 – 2 with two identical segments.
pub fn three_bus(r: f64, x: f64) -> Network {
    Network::new(
        Bases::default(),
        0,
        vec![
            node(0, NodeKind::Substation),
            node(1, NodeKind::Prosumer),
            node(2, NodeKind::Prosumer),
        ],
        vec![branch(0, 1, r, x), branch(1, 2, r, x)],
        true,
    )
    .unwrap()
}

/// One-step dispatch input; loads in kW / kvar.
pub fn step(
    p_load: [f64; 3],
    q_load: [f64; 3],
    p_gen: [f64; 3],
    fas: [FasPoint; 3],
    flex: [EnvelopePoint; 3],
) -> StepData {
    let envelope = (0..3)
        .map(|i| EnvelopePoint {
            gen_cap: p_gen[i],
            load_cap: p_load[i],
            ..flex[i]
        })
        .collect();
    StepData {
        t: 0,
        p_load: p_load.to_vec(),
        q_load: q_load.to_vec(),
        p_gen: p_gen.to_vec(),
        fas: fas.to_vec(),
        envelope,
    }
}

/// Per-unit net injections of a step with the given activations (kW):
/// `[dp_plus, dp_minus, dq_plus, dq_minus, load_curt, gen_curt]` per node.
/// Curtailed load takes its reactive share along.
pub fn injections(step: &StepData, acts: &[[f64; 6]]) -> Vec<Complex64> {
    (0..step.p_load.len())
        .map(|i| {
            let [pp, pm, qp, qm, lc, gc] = acts[i];
            let pl = step.p_load[i] - lc;
            let ql = if step.p_load[i] > 0.0 {
                step.q_load[i] * pl / step.p_load[i]
            } else {
                step.q_load[i]
            };
            let p = step.p_gen[i] - gc - pl + pp + pm;
            let q = -ql + qp + qm;
            Complex64::new(p, q) / S_BASE_KVA
        })
        .collect()
}

/// `V₂ = V₁ + Z · conj(S₂ / V₂)` iterated from flat start.
pub fn two_bus_fixed_point(z: Complex64, s2: Complex64) -> Complex64 {
    let v1 = Complex64::new(1.0, 0.0);
    let mut v2 = v1;
    for _ in 0..500 {
        let next = v1 + z * (s2 / v2).conj();
        if (next - v2).norm() < 1e-15 {
            return next;
        }
        v2 = next;
    }
    v2
}

/// Largest P or Q component of `V_i conj(Σ_j Y_ij V_j) − S_i` over
/// non-slack nodes.
pub fn ybus_mismatch(net: &Network, v: &[Complex64], inj: &[Complex64]) -> f64 {
    let y = net.ybus();
    (0..net.num_nodes())
        .filter(|&i| i != net.slack())
        .map(|i| {
            let current: Complex64 = (0..v.len()).map(|j| y[i][j] * v[j]).sum();
            let d = v[i] * current.conj() - inj[i];
            d.re.abs().max(d.im.abs())
        })
        .fold(0.0, f64::max)
}
