//! Newton-Raphson AC power flow and horizon simulation.

use std::io::Write;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::csvio;
use crate::network::{Network, Profiles};
use crate::par;

/// Mismatch tolerance in per unit.
pub const TOLERANCE: f64 = 1e-8;
pub const MAX_ITERATIONS: usize = 50;

#[derive(Debug, Clone, thiserror::Error)]
pub enum PowerFlowError {
    #[error("power flow did not converge in {iterations} iterations (mismatch {mismatch:.3e} pu)")]
    Divergence { iterations: usize, mismatch: f64 },
    #[error("singular Jacobian at iteration {iteration}")]
    Singular { iteration: usize },
    #[error("invalid power-flow input: {0}")]
    Input(String),
    #[error("timestep {t}: {source}")]
    AtStep {
        t: usize,
        #[source]
        source: Box<PowerFlowError>,
    },
}

/// One power-flow solution.
///
/// Branch quantities follow the stored branch orientation: `s_from[k]` is the
/// complex power entering branch `k` at its `from` end, `s_to[k]` at its `to`
/// end.
#[derive(Debug, Clone, PartialEq)]
pub struct NetworkState {
    pub t: usize,
    pub v_mag: Vec<f64>,
    pub v_ang: Vec<f64>,
    pub s_from: Vec<Complex64>,
    pub s_to: Vec<Complex64>,
    /// `max(|S_ij|, |S_ji|) / s_max · 100`, negative for flow towards the
    /// substation.
    pub loading_pct: Vec<f64>,
    pub branch_loss_kw: Vec<f64>,
    pub total_loss_kw: f64,
    /// Net injection at the slack node, per unit.
    pub slack_injection: Complex64,
    /// Largest nodal mismatch component at the returned point, per unit.
    pub max_mismatch: f64,
    pub iterations: usize,
}

impl NetworkState {
    pub fn min_v(&self) -> f64 {
        self.v_mag.iter().cloned().fold(f64::INFINITY, f64::min)
    }

    pub fn max_v(&self) -> f64 {
        self.v_mag.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn max_abs_loading(&self) -> f64 {
        self.loading_pct.iter().fold(0.0, |m, l| m.max(l.abs()))
    }

    /// Complex voltage phasor of `node`.
    pub fn phasor(&self, node: usize) -> Complex64 {
        Complex64::from_polar(self.v_mag[node], self.v_ang[node])
    }
}

/// Solves the power flow for per-unit net injections (generation positive).
/// The slack node's entry is ignored.
pub fn solve_power_flow(
    net: &Network,
    injections: &[Complex64],
) -> Result<NetworkState, PowerFlowError> {
    let n = net.num_nodes();
    if injections.len() != n {
        return Err(PowerFlowError::Input(format!(
            "{} injections for {n} nodes",
            injections.len()
        )));
    }
    if injections
        .iter()
        .any(|s| !s.re.is_finite() || !s.im.is_finite())
    {
        return Err(PowerFlowError::Input("non-finite injection".into()));
    }
    let slack = net.slack();
    let ybus = net.ybus();
    let pq: Vec<usize> = (0..n).filter(|&i| i != slack).collect();
    let m = pq.len();

    let mut vm = vec![1.0; n];
    let mut va = vec![0.0; n];
    let mut iterations = 0;
    let mut mismatch = mismatch_norm(&ybus, &vm, &va, injections, &pq);

    while mismatch > TOLERANCE {
        if iterations == MAX_ITERATIONS {
            return Err(PowerFlowError::Divergence {
                iterations,
                mismatch,
            });
        }
        let v: Vec<Complex64> = (0..n)
            .map(|i| Complex64::from_polar(vm[i], va[i]))
            .collect();
        let current = mat_vec(&ybus, &v);
        let mut f = DVector::zeros(2 * m);
        for (r, &i) in pq.iter().enumerate() {
            let d = v[i] * current[i].conj() - injections[i];
            f[r] = d.re;
            f[m + r] = d.im;
        }
        let jac = jacobian(&ybus, &v, &vm, &current, &pq);
        let dx = jac
            .lu()
            .solve(&f)
            .filter(|dx| dx.iter().all(|x| x.is_finite()))
            .ok_or(PowerFlowError::Singular {
                iteration: iterations,
            })?;
        for (r, &i) in pq.iter().enumerate() {
            va[i] -= dx[r];
            vm[i] -= dx[m + r];
        }
        iterations += 1;
        mismatch = mismatch_norm(&ybus, &vm, &va, injections, &pq);
        if !mismatch.is_finite() {
            return Err(PowerFlowError::Divergence {
                iterations,
                mismatch,
            });
        }
    }
    Ok(build_state(net, &ybus, vm, va, mismatch, iterations))
}

fn mat_vec(y: &[Vec<Complex64>], v: &[Complex64]) -> Vec<Complex64> {
    y.iter()
        .map(|row| row.iter().zip(v).map(|(a, b)| a * b).sum())
        .collect()
}

fn mismatch_norm(
    ybus: &[Vec<Complex64>],
    vm: &[f64],
    va: &[f64],
    injections: &[Complex64],
    pq: &[usize],
) -> f64 {
    let v: Vec<Complex64> = vm
        .iter()
        .zip(va)
        .map(|(&m, &a)| Complex64::from_polar(m, a))
        .collect();
    let current = mat_vec(ybus, &v);
    pq.iter()
        .map(|&i| {
            let d = v[i] * current[i].conj() - injections[i];
            d.re.abs().max(d.im.abs())
        })
        .fold(0.0, f64::max)
}

/// Polar Jacobian of the calculated injections restricted to PQ nodes.
fn jacobian(
    ybus: &[Vec<Complex64>],
    v: &[Complex64],
    vm: &[f64],
    current: &[Complex64],
    pq: &[usize],
) -> DMatrix<f64> {
    let m = pq.len();
    let j = Complex64::i();
    let mut jac = DMatrix::zeros(2 * m, 2 * m);
    for (r, &i) in pq.iter().enumerate() {
        for (c, &k) in pq.iter().enumerate() {
            let y = ybus[i][k];
            // dS_i/dtheta_k and dS_i/d|V_k|
            let mut ds_da = -j * v[i] * (y * v[k]).conj();
            let mut ds_dm = v[i] * (y * v[k] / vm[k]).conj();
            if i == k {
                ds_da += j * v[i] * current[i].conj();
                ds_dm += current[i].conj() * v[i] / vm[i];
            }
            jac[(r, c)] = ds_da.re;
            jac[(r, m + c)] = ds_dm.re;
            jac[(m + r, c)] = ds_da.im;
            jac[(m + r, m + c)] = ds_dm.im;
        }
    }
    jac
}

fn build_state(
    net: &Network,
    ybus: &[Vec<Complex64>],
    vm: Vec<f64>,
    va: Vec<f64>,
    mismatch: f64,
    iterations: usize,
) -> NetworkState {
    let s_base = net.bases().s_base_kva;
    let v: Vec<Complex64> = vm
        .iter()
        .zip(&va)
        .map(|(&m, &a)| Complex64::from_polar(m, a))
        .collect();
    let nb = net.num_branches();
    let mut s_from = Vec::with_capacity(nb);
    let mut s_to = Vec::with_capacity(nb);
    let mut loading = Vec::with_capacity(nb);
    let mut loss = Vec::with_capacity(nb);
    for (k, br) in net.branches().iter().enumerate() {
        let y = br.admittance();
        let (a, b) = (br.from, br.to);
        let sf = v[a] * (y * (v[a] - v[b])).conj();
        let st = v[b] * (y * (v[b] - v[a])).conj();
        let (up, _) = net.oriented_ends(k);
        let p_up = if up == a { sf.re } else { st.re };
        let mag = sf.norm().max(st.norm()) / br.s_max * 100.0;
        loading.push(if p_up < 0.0 { -mag } else { mag });
        loss.push((sf.re + st.re) * s_base);
        s_from.push(sf);
        s_to.push(st);
    }
    let slack = net.slack();
    let slack_injection = v[slack] * mat_vec(&ybus[slack..=slack], &v)[0].conj();
    NetworkState {
        t: 0,
        total_loss_kw: loss.iter().sum(),
        v_mag: vm,
        v_ang: va,
        s_from,
        s_to,
        loading_pct: loading,
        branch_loss_kw: loss,
        slack_injection,
        max_mismatch: mismatch,
        iterations,
    }
}

/// Digital-twin run: one power flow per step of `profiles`, no flexibility.
pub fn simulate_horizon(
    net: &Network,
    profiles: &Profiles,
) -> Result<Vec<NetworkState>, PowerFlowError> {
    if profiles.num_nodes() != net.num_nodes() {
        return Err(PowerFlowError::Input(format!(
            "profiles cover {} nodes, network has {}",
            profiles.num_nodes(),
            net.num_nodes()
        )));
    }
    let s_base = net.bases().s_base_kva;
    par::try_map_range(profiles.horizon(), |t| {
        let mut st = solve_power_flow(net, &profiles.injections_pu(t, s_base)).map_err(|e| {
            PowerFlowError::AtStep {
                t,
                source: Box::new(e),
            }
        })?;
        st.t = t;
        Ok(st)
    })
}

/// `t,node,v_mag,v_ang`
pub fn write_voltage_csv<W: Write>(states: &[NetworkState], w: W) -> std::io::Result<()> {
    let mut wr = csvio::writer(w);
    wr.write_record(["t", "node", "v_mag", "v_ang"])?;
    for st in states {
        for (i, (&m, &a)) in st.v_mag.iter().zip(&st.v_ang).enumerate() {
            wr.write_record([
                st.t.to_string(),
                i.to_string(),
                csvio::num(m),
                csvio::num(a),
            ])?;
        }
    }
    wr.flush()
}

/// `t,from,to,p_pu,q_pu,loading_pct,loss_kw`; flows are taken at the
/// upstream end of each branch.
pub fn write_branch_csv<W: Write>(
    net: &Network,
    states: &[NetworkState],
    w: W,
) -> std::io::Result<()> {
    let mut wr = csvio::writer(w);
    wr.write_record(["t", "from", "to", "p_pu", "q_pu", "loading_pct", "loss_kw"])?;
    for st in states {
        for (k, br) in net.branches().iter().enumerate() {
            let (up, down) = net.oriented_ends(k);
            let s = if up == br.from {
                st.s_from[k]
            } else {
                st.s_to[k]
            };
            wr.write_record([
                st.t.to_string(),
                up.to_string(),
                down.to_string(),
                csvio::num(s.re),
                csvio::num(s.im),
                csvio::num(st.loading_pct[k]),
                csvio::num(st.branch_loss_kw[k]),
            ])?;
        }
    }
    wr.flush()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::network::builtin_network;

    #[test]
    fn no_load_is_flat() {
        let net = builtin_network();
        let st = solve_power_flow(&net, &vec![Complex64::new(0.0, 0.0); 19]).unwrap();
        assert!(st.v_mag.iter().all(|&v| v == 1.0));
        assert_eq!(st.total_loss_kw, 0.0);
        assert!(st.loading_pct.iter().all(|&l| l == 0.0));
        assert_eq!(st.iterations, 0);
    }

    #[test]
    fn reverse_flow_loading_negative() {
        let net = builtin_network();
        let mut inj = vec![Complex64::new(0.0, 0.0); 19];
        inj[18] = Complex64::new(0.1, 0.0);
        let st = solve_power_flow(&net, &inj).unwrap();
        // every branch on the path 18 -> 0 carries reverse flow
        let mut node = 18;
        while let Some(k) = net.parent_branch(node) {
            assert!(st.loading_pct[k] < 0.0);
            node = net.parent(node).unwrap();
        }
        inj[18] = Complex64::new(-0.1, 0.0);
        let st = solve_power_flow(&net, &inj).unwrap();
        assert!(st.loading_pct[net.parent_branch(18).unwrap()] > 0.0);
    }

    #[test]
    fn wrong_length_rejected() {
        let net = builtin_network();
        assert!(matches!(
            solve_power_flow(&net, &[Complex64::new(0.0, 0.0)]),
            Err(PowerFlowError::Input(_))
        ));
    }

    #[test]
    fn absurd_load_diverges() {
        let net = builtin_network();
        let mut inj = vec![Complex64::new(0.0, 0.0); 19];
        inj[18] = Complex64::new(-50.0, -10.0);
        let err = solve_power_flow(&net, &inj).unwrap_err();
        assert!(matches!(
            err,
            PowerFlowError::Divergence { .. } | PowerFlowError::Singular { .. }
        ));
    }
}
