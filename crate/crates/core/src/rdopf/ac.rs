//! Exact AC dispatch in the voltage-product variables.
//!
//! On a radial feeder the map from `(|V|, θ)` to `(W_ii, c_k, s_k)` is a
//! bijection onto the set where every branch satisfies
//! `c_k² + s_k² = W_uu W_dd`, so the AC problem is the cone relaxation with
//! those inequalities turned into equalities. Thermal limits become convex
//! quadratic inequalities.

use nalgebra::{DMatrix, DVector};

use super::model::{Affine, Layout};
use super::nlp::{self, Nlp, NlpSettings};
use super::{
    assemble, duals_per_node, objective_from_parts, soc_with_layout, verify_ac_feasibility,
    DispatchResult, DispatchStatus, Formulation, RdopfConfig, RdopfError, StepData,
};
use crate::network::Network;
use crate::powerflow::NetworkState;

struct Thermal {
    p: DVector<f64>,
    p0: f64,
    q: DVector<f64>,
    q0: f64,
    inv_s2: f64,
}

struct ConeEq {
    wu: Option<usize>,
    wd: Option<usize>,
    c: usize,
    s: usize,
    /// Row scale `|y_k|`, so residuals read as power mismatches.
    scale: f64,
}

struct AcProblem {
    n: usize,
    cost: DVector<f64>,
    a_eq: DMatrix<f64>,
    b_eq: DVector<f64>,
    g_lin: DMatrix<f64>,
    h_lin: DVector<f64>,
    thermal: Vec<Thermal>,
    cones: Vec<ConeEq>,
    /// Activations pinned by a degenerate box, kept as equalities.
    fixed: Vec<(usize, f64)>,
}

fn dense(a: &Affine, n: usize) -> DVector<f64> {
    let mut v = DVector::zeros(n);
    for &(c, x) in &a.terms {
        v[c] += x;
    }
    v
}

impl AcProblem {
    fn new(layout: &Layout) -> Self {
        let n = layout.n_cols;
        let balance = layout.balance_rows();
        let eq: Vec<&Affine> = balance
            .iter()
            .map(|(_, p, _)| p)
            .chain(balance.iter().map(|(_, _, q)| q))
            .collect();
        let (a_eq, b_eq) = super::stack(&eq, n, 1.0);
        let fixed: Vec<(usize, f64)> = layout
            .acts
            .iter()
            .filter(|a| a.lo == a.hi)
            .map(|a| (a.col, a.lo))
            .collect();
        let lin: Vec<Affine> = layout
            .linear_inequalities()
            .into_iter()
            .filter(|r| !(r.terms.len() == 1 && fixed.iter().any(|f| f.0 == r.terms[0].0)))
            .collect();
        let (g_lin, h_lin) = super::stack(&lin.iter().collect::<Vec<_>>(), n, 1.0);
        let mut thermal = Vec::new();
        for k in 0..layout.branches.len() {
            for from_up in [true, false] {
                let (p, q) = layout.branch_pq(k, from_up);
                let s = layout.branches[k].s_max;
                thermal.push(Thermal {
                    p: dense(&p, n),
                    p0: p.constant,
                    q: dense(&q, n),
                    q0: q.constant,
                    inv_s2: 1.0 / (s * s),
                });
            }
        }
        let cones = layout
            .branches
            .iter()
            .enumerate()
            .map(|(k, br)| ConeEq {
                wu: layout.w_col[br.up],
                wd: layout.w_col[br.down],
                c: layout.c_col(k),
                s: layout.s_col(k),
                scale: br.g.hypot(br.b),
            })
            .collect();
        AcProblem {
            n,
            // per-unit scale keeps the multipliers well sized
            cost: dense(&layout.objective(), n) / layout.money,
            a_eq,
            b_eq,
            g_lin,
            h_lin,
            thermal,
            cones,
            fixed,
        }
    }
}

fn w_value(x: &DVector<f64>, col: Option<usize>) -> f64 {
    col.map_or(1.0, |c| x[c])
}

impl Nlp for AcProblem {
    fn dim(&self) -> usize {
        self.n
    }

    fn objective(&self, x: &DVector<f64>) -> (f64, DVector<f64>) {
        (self.cost.dot(x), self.cost.clone())
    }

    fn equalities(&self, x: &DVector<f64>) -> (DVector<f64>, DMatrix<f64>) {
        let nl = self.b_eq.len();
        let m = nl + self.cones.len() + self.fixed.len();
        let mut val = DVector::zeros(m);
        let mut jac = DMatrix::zeros(m, self.n);
        val.rows_mut(0, nl)
            .copy_from(&(&self.a_eq * x - &self.b_eq));
        for (j, &(col, v)) in self.fixed.iter().enumerate() {
            let r = nl + self.cones.len() + j;
            val[r] = x[col] - v;
            jac[(r, col)] = 1.0;
        }
        jac.view_mut((0, 0), (nl, self.n)).copy_from(&self.a_eq);
        for (k, cone) in self.cones.iter().enumerate() {
            let r = nl + k;
            let (c, s) = (x[cone.c], x[cone.s]);
            let wu = w_value(x, cone.wu);
            let wd = w_value(x, cone.wd);
            let y = cone.scale;
            val[r] = y * (c * c + s * s - wu * wd);
            jac[(r, cone.c)] = 2.0 * y * c;
            jac[(r, cone.s)] = 2.0 * y * s;
            if let Some(col) = cone.wu {
                jac[(r, col)] -= y * wd;
            }
            if let Some(col) = cone.wd {
                jac[(r, col)] -= y * wu;
            }
        }
        (val, jac)
    }

    fn inequalities(&self, x: &DVector<f64>) -> (DVector<f64>, DMatrix<f64>) {
        let nl = self.h_lin.len();
        let m = nl + self.thermal.len();
        let mut val = DVector::zeros(m);
        let mut jac = DMatrix::zeros(m, self.n);
        val.rows_mut(0, nl)
            .copy_from(&(&self.g_lin * x - &self.h_lin));
        jac.view_mut((0, 0), (nl, self.n)).copy_from(&self.g_lin);
        for (j, th) in self.thermal.iter().enumerate() {
            let p = th.p0 + th.p.dot(x);
            let q = th.q0 + th.q.dot(x);
            val[nl + j] = (p * p + q * q) * th.inv_s2 - 1.0;
            let grad = (&th.p * p + &th.q * q) * (2.0 * th.inv_s2);
            jac.row_mut(nl + j).copy_from(&grad.transpose());
        }
        (val, jac)
    }

    fn lagrangian_hessian(
        &self,
        _x: &DVector<f64>,
        lam: &DVector<f64>,
        mu: &DVector<f64>,
    ) -> DMatrix<f64> {
        let mut hess = DMatrix::zeros(self.n, self.n);
        let nl = self.b_eq.len();
        for (k, cone) in self.cones.iter().enumerate() {
            let l = lam[nl + k] * cone.scale;
            hess[(cone.c, cone.c)] += 2.0 * l;
            hess[(cone.s, cone.s)] += 2.0 * l;
            if let (Some(u), Some(d)) = (cone.wu, cone.wd) {
                hess[(u, d)] -= l;
                hess[(d, u)] -= l;
            }
        }
        let nli = self.h_lin.len();
        for (j, th) in self.thermal.iter().enumerate() {
            let m = mu[nli + j] * 2.0 * th.inv_s2;
            if m != 0.0 {
                hess.ger(m, &th.p, &th.p, 1.0);
                hess.ger(m, &th.q, &th.q, 1.0);
            }
        }
        hess
    }
}

/// Point on the AC manifold with the voltages of `x`: `W` kept, branch
/// products rebuilt from magnitudes and tree angles.
fn tighten(net: &Network, layout: &Layout, x: &[f64]) -> DVector<f64> {
    let mut out = DVector::from_column_slice(x);
    let n = layout.n_nodes;
    let w: Vec<f64> = (0..n).map(|i| layout.w_expr(i).eval(x)).collect();
    let v: Vec<f64> = w.iter().map(|v| v.max(1e-6).sqrt()).collect();
    let mut ang = vec![0.0; n];
    for &node in net.bfs_order() {
        if let Some(k) = net.parent_branch(node) {
            let up = layout.branches[k].up;
            ang[node] = ang[up] - x[layout.s_col(k)].atan2(x[layout.c_col(k)]);
        }
    }
    for (k, br) in layout.branches.iter().enumerate() {
        let mag = v[br.up] * v[br.down];
        let d = ang[br.up] - ang[br.down];
        out[layout.c_col(k)] = mag * d.cos();
        out[layout.s_col(k)] = mag * d.sin();
    }
    out
}

/// Flat voltages, no activations.
fn flat_start(layout: &Layout) -> DVector<f64> {
    let mut x = DVector::zeros(layout.n_cols);
    for col in layout.w_col.iter().flatten() {
        x[*col] = 1.0;
    }
    for k in 0..layout.branches.len() {
        x[layout.c_col(k)] = 1.0;
    }
    for a in &layout.acts {
        x[a.col] = 0.5 * (a.lo + a.hi);
    }
    x
}

/// Solves the exact AC dispatch for one timestep, warm-started from the
/// cone relaxation.
///
/// If the local solve fails from both the relaxation point and a flat
/// start, the relaxation's activations are replayed through a power flow
/// and, when that passes the limits check, returned with status
/// [`DispatchStatus::Recovered`].
pub fn solve_ac_rdopf(
    net: &Network,
    step: &StepData,
    cfg: &RdopfConfig,
) -> Result<DispatchResult, RdopfError> {
    cfg.validate()?;
    step.validate(net, cfg)?;
    let layout = Layout::new(net, step, cfg);
    let (soc, soc_x) = soc_with_layout(net, step, cfg, &layout)?;
    solve_ac_from(net, step, cfg, &layout, &soc, &soc_x)
}

/// AC solve reusing an already computed relaxation.
pub(crate) fn solve_ac_from(
    net: &Network,
    step: &StepData,
    cfg: &RdopfConfig,
    layout: &Layout,
    soc: &DispatchResult,
    soc_x: &[f64],
) -> Result<DispatchResult, RdopfError> {
    let prob = AcProblem::new(layout);
    let settings = NlpSettings {
        feastol: cfg.cone_tol * 0.01,
        gradtol: cfg.kkt_tol * 0.1,
        comptol: cfg.cone_tol * 0.1,
        ..NlpSettings::default()
    };
    let tight = tighten(net, layout, soc_x);
    let starts = [
        (tight.clone(), 1e-2, true),
        (tight.clone(), 1.0, true),
        (flat_start(layout), 1.0, true),
        (tight, 1e-2, false),
    ];
    let mut last_err = String::new();
    for (x0, z0, monotone) in starts {
        let s = NlpSettings {
            z0,
            monotone,
            ..settings
        };
        match nlp::solve(&prob, &x0, &s) {
            Ok(sol) => {
                let x: Vec<f64> = sol.x.iter().cloned().collect();
                let duals = duals_per_node(layout, &(&sol.lam * layout.money));
                let res = assemble(
                    net,
                    layout,
                    step,
                    cfg,
                    &x,
                    Some(duals),
                    Formulation::Ac,
                    DispatchStatus::Optimal,
                    sol.iterations,
                );
                let report = verify_ac_feasibility(net, &res, step, cfg)?;
                if report.pass {
                    return Ok(with_flow_state(res, report.state, step, cfg));
                }
                last_err = format!(
                    "local optimum failed verification (v viol {:.2e}, loading {:.4}%)",
                    report.max_voltage_violation, report.max_loading_pct
                );
            }
            Err(e) => last_err = e.to_string(),
        }
        log::debug!("t {}: AC start failed: {last_err}", step.t);
    }
    recover(net, step, cfg, soc).map_err(|reason| RdopfError::AcFailed {
        t: step.t,
        reason: format!("{last_err}; recovery: {reason}"),
    })
}

fn recover(
    net: &Network,
    step: &StepData,
    cfg: &RdopfConfig,
    soc: &DispatchResult,
) -> Result<DispatchResult, String> {
    let report = verify_ac_feasibility(net, soc, step, cfg).map_err(|e| e.to_string())?;
    if !report.pass {
        return Err(format!(
            "relaxation activations violate limits (v viol {:.2e}, loading {:.4}%)",
            report.max_voltage_violation, report.max_loading_pct
        ));
    }
    let mut res = soc.clone();
    res.formulation = Formulation::Ac;
    res.status = DispatchStatus::Recovered;
    res.duals_p = None;
    res.duals_q = None;
    res.cone_slack = vec![0.0; net.num_branches()];
    Ok(with_flow_state(res, report.state, step, cfg))
}

/// Replaces voltages and losses by those of the verifying power flow, so
/// the reported objective is evaluated on the exact physics of the
/// dispatched activations.
fn with_flow_state(
    mut res: DispatchResult,
    st: NetworkState,
    step: &StepData,
    cfg: &RdopfConfig,
) -> DispatchResult {
    res.losses_kw = st.total_loss_kw;
    res.w = st.v_mag.iter().map(|v| v * v).collect();
    res.v_mag = st.v_mag;
    res.v_ang = st.v_ang;
    res.objective = objective_from_parts(&res, step, cfg);
    res
}
