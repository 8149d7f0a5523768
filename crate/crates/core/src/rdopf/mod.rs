//! Resource-dispatch OPF: per-timestep dispatch of flexibility and
//! curtailment on the SOC relaxation or on the exact AC model.

mod ac;
pub mod conic;
mod model;
pub mod nlp;

use std::io::Write;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::csvio;
use crate::fas::{EnvelopePoint, FasPoint, FasSignal, FlexEnvelope};
use crate::network::{Network, Profiles};
use crate::powerflow::{solve_power_flow, NetworkState, PowerFlowError};
use crate::STEP_HOURS;
use model::{ActKind, Affine, Layout};

pub use ac::solve_ac_rdopf;

/// Activations smaller than this (per unit) are reported as exactly zero.
pub const SNAP_PU: f64 = 1e-9;
/// Slack allowed by the post-dispatch feasibility check.
pub const VERIFY_TOL: f64 = 1e-6;

#[derive(Debug, Clone, thiserror::Error)]
pub enum RdopfError {
    #[error("invalid dispatch input: {0}")]
    Input(String),
    #[error("timestep {t}: dispatch problem is infeasible ({detail})")]
    Infeasible { t: usize, detail: String },
    #[error("timestep {t}: solver failed: {reason}")]
    Solver {
        t: usize,
        reason: String,
        trace: Vec<conic::IterRecord>,
    },
    #[error("timestep {t}: AC solve and recovery both failed: {reason}")]
    AcFailed { t: usize, reason: String },
    #[error("duals are not available for this result")]
    NoDuals,
    #[error("verification power flow failed: {0}")]
    Verification(#[from] PowerFlowError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Formulation {
    Soc,
    Ac,
}

/// Output limits `P^g_min ≤ P^g − ΔP^G ≤ P^g_max` for one generator node.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GenLimit {
    pub node: usize,
    pub p_min_kw: f64,
    pub p_max_kw: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RdopfConfig {
    /// Loss penalty per kWh of losses.
    pub lambda_loss: f64,
    pub lambda_curt_gen: f64,
    pub lambda_curt_load: f64,
    pub v_min: f64,
    pub v_max: f64,
    /// Extra generator output limits; by default output is in `[0, P^g]`.
    pub gen_limits: Vec<GenLimit>,
    /// Stationarity tolerance of the AC solve.
    pub kkt_tol: f64,
    /// Feasibility tolerance of the AC solve.
    pub cone_tol: f64,
    pub formulation: Formulation,
}

impl Default for RdopfConfig {
    fn default() -> Self {
        RdopfConfig {
            lambda_loss: 0.2,
            lambda_curt_gen: 0.47,
            lambda_curt_load: 0.87,
            v_min: 0.92,
            v_max: 1.08,
            gen_limits: Vec::new(),
            kkt_tol: 1e-6,
            cone_tol: 1e-8,
            formulation: Formulation::Ac,
        }
    }
}

impl RdopfConfig {
    pub fn validate(&self) -> Result<(), RdopfError> {
        let bad = |m: &str| Err(RdopfError::Input(m.to_string()));
        if !(self.lambda_loss >= 0.0 && self.lambda_loss.is_finite()) {
            return bad("lambda_loss must be finite and non-negative");
        }
        if !(self.lambda_curt_gen > 0.0 && self.lambda_curt_load > 0.0) {
            return bad("curtailment prices must be positive");
        }
        if !(self.v_min > 0.0 && self.v_min < 1.0 && self.v_max > 1.0) {
            return bad("need 0 < v_min < 1 < v_max");
        }
        if !(self.kkt_tol > 0.0 && self.cone_tol > 0.0) {
            return bad("tolerances must be positive");
        }
        for gl in &self.gen_limits {
            if !(gl.p_min_kw >= 0.0 && gl.p_max_kw >= gl.p_min_kw) {
                return bad("generator limits need 0 <= p_min <= p_max");
            }
        }
        Ok(())
    }

    /// Box for the generation curtailment at `node` in kW.
    pub(crate) fn gen_curtailment_box(&self, node: usize, p_gen: f64, cap: f64) -> (f64, f64) {
        match self.gen_limits.iter().find(|g| g.node == node) {
            None => (0.0, cap),
            Some(gl) => {
                let lo = (p_gen - gl.p_max_kw).max(0.0);
                let hi = (p_gen - gl.p_min_kw).min(cap);
                (lo, hi.max(lo))
            }
        }
    }
}

/// Inputs of one dispatch problem, loads in kW / kvar.
#[derive(Debug, Clone, PartialEq)]
pub struct StepData {
    pub t: usize,
    pub p_load: Vec<f64>,
    pub q_load: Vec<f64>,
    pub p_gen: Vec<f64>,
    pub fas: Vec<FasPoint>,
    pub envelope: Vec<EnvelopePoint>,
}

impl StepData {
    pub fn from_horizon(
        profiles: &Profiles,
        fas: &FasSignal,
        envelope: &FlexEnvelope,
        t: usize,
    ) -> Self {
        let n = profiles.num_nodes();
        StepData {
            t,
            p_load: (0..n).map(|i| profiles.p_load(i)[t]).collect(),
            q_load: (0..n).map(|i| profiles.q_load(i)[t]).collect(),
            p_gen: (0..n).map(|i| profiles.p_gen(i)[t]).collect(),
            fas: fas.at(t).to_vec(),
            envelope: envelope.at(t).to_vec(),
        }
    }

    fn validate(&self, net: &Network, cfg: &RdopfConfig) -> Result<(), RdopfError> {
        let n = net.num_nodes();
        let t = self.t;
        if [
            self.p_load.len(),
            self.q_load.len(),
            self.p_gen.len(),
            self.fas.len(),
            self.envelope.len(),
        ]
        .iter()
        .any(|&l| l != n)
        {
            return Err(RdopfError::Input(format!(
                "step {t}: every per-node vector must have {n} entries"
            )));
        }
        let cap = cfg.lambda_curt_gen.min(cfg.lambda_curt_load);
        for i in 0..n {
            let f = &self.fas[i];
            let e = &self.envelope[i];
            let gates = f.gates();
            let bounds = [e.p_max, e.p_min, e.q_max, e.q_min];
            for (g, bnd) in gates.iter().zip(bounds) {
                if !g && bnd != 0.0 {
                    return Err(RdopfError::Input(format!(
                        "step {t}, node {i}: envelope open on a closed gate"
                    )));
                }
            }
            if e.p_max < 0.0 || e.q_max < 0.0 || e.p_min > 0.0 || e.q_min > 0.0 {
                return Err(RdopfError::Input(format!(
                    "step {t}, node {i}: envelope bounds have the wrong sign"
                )));
            }
            if f.lam_p_plus < 0.0
                || f.lam_q_plus < 0.0
                || f.lam_p_minus > 0.0
                || f.lam_q_minus > 0.0
            {
                return Err(RdopfError::Input(format!(
                    "step {t}, node {i}: FAS channels have the wrong sign"
                )));
            }
            let fas_max = [f.lam_p_plus, f.lam_p_minus, f.lam_q_plus, f.lam_q_minus]
                .iter()
                .fold(0.0f64, |m, v| m.max(v.abs()));
            if fas_max >= cap {
                return Err(RdopfError::Input(format!(
                    "step {t}, node {i}: FAS {fas_max} is not below the curtailment prices"
                )));
            }
            if !(e.load_cap >= 0.0 && e.gen_cap >= 0.0) {
                return Err(RdopfError::Input(format!(
                    "step {t}, node {i}: curtailment caps must be non-negative"
                )));
            }
        }
        Ok(())
    }

    /// `Q^d / P^d` at `node`. Load curtailment sheds reactive demand at
    /// this ratio.
    pub fn load_q_ratio(&self, node: usize) -> f64 {
        if self.p_load[node] > 0.0 {
            self.q_load[node] / self.p_load[node]
        } else {
            0.0
        }
    }

    /// Net per-unit injections after applying `result`'s activations.
    pub fn dispatched_injections(
        &self,
        result: &DispatchResult,
        s_base_kva: f64,
    ) -> Vec<Complex64> {
        (0..self.p_load.len())
            .map(|i| {
                let p = self.p_gen[i] - result.gen_curt[i] - self.p_load[i]
                    + result.load_curt[i]
                    + result.dp_plus[i]
                    + result.dp_minus[i];
                let q = -self.q_load[i]
                    + result.load_curt[i] * self.load_q_ratio(i)
                    + result.dq_plus[i]
                    + result.dq_minus[i];
                Complex64::new(p, q) / s_base_kva
            })
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DispatchStatus {
    Optimal,
    /// Converged to looser tolerances.
    Inaccurate,
    /// AC local solve failed; activations come from the relaxation and were
    /// checked by a power flow.
    Recovered,
}

/// Dispatch of one timestep. Activations in kW / kvar per node.
#[derive(Debug, Clone, PartialEq)]
pub struct DispatchResult {
    pub t: usize,
    pub formulation: Formulation,
    pub status: DispatchStatus,
    pub dp_plus: Vec<f64>,
    pub dp_minus: Vec<f64>,
    pub dq_plus: Vec<f64>,
    pub dq_minus: Vec<f64>,
    pub load_curt: Vec<f64>,
    pub gen_curt: Vec<f64>,
    /// Objective in money units for the step.
    pub objective: f64,
    /// Active losses in kW.
    pub losses_kw: f64,
    /// Active-power balance duals in money per kWh (slack: 0).
    pub duals_p: Option<Vec<f64>>,
    pub duals_q: Option<Vec<f64>>,
    /// `W_ii` per node.
    pub w: Vec<f64>,
    /// `W_uu W_dd − c² − s²` per branch (zero when the cone is tight).
    pub cone_slack: Vec<f64>,
    pub v_mag: Vec<f64>,
    pub v_ang: Vec<f64>,
    pub iterations: usize,
}

impl DispatchResult {
    /// Energy activated in kWh, summed over absolute values of all channels.
    pub fn total_activation_kwh(&self) -> f64 {
        let sum = |v: &[f64]| v.iter().map(|x| x.abs()).sum::<f64>();
        (sum(&self.dp_plus)
            + sum(&self.dp_minus)
            + sum(&self.dq_plus)
            + sum(&self.dq_minus)
            + sum(&self.load_curt)
            + sum(&self.gen_curt))
            * STEP_HOURS
    }

    pub fn curtailed_kwh(&self) -> f64 {
        (self.load_curt.iter().sum::<f64>() + self.gen_curt.iter().sum::<f64>()) * STEP_HOURS
    }

    pub fn max_cone_slack(&self) -> f64 {
        self.cone_slack.iter().fold(0.0, |m, v| m.max(v.abs()))
    }
}

/// Recomputes the objective from the activations and losses.
pub fn objective_from_parts(result: &DispatchResult, step: &StepData, cfg: &RdopfConfig) -> f64 {
    let mut cost = cfg.lambda_loss * result.losses_kw;
    for i in 0..step.fas.len() {
        let f = &step.fas[i];
        cost += f.lam_p_plus * result.dp_plus[i]
            + f.lam_p_minus * result.dp_minus[i]
            + f.lam_q_plus * result.dq_plus[i]
            + f.lam_q_minus * result.dq_minus[i]
            + cfg.lambda_curt_load * result.load_curt[i]
            + cfg.lambda_curt_gen * result.gen_curt[i];
    }
    cost * STEP_HOURS
}

/// Builds a result from a primal point of the shared layout.
fn assemble(
    net: &Network,
    layout: &Layout,
    step: &StepData,
    cfg: &RdopfConfig,
    x: &[f64],
    duals: Option<(Vec<f64>, Vec<f64>)>,
    formulation: Formulation,
    status: DispatchStatus,
    iterations: usize,
) -> DispatchResult {
    let n = net.num_nodes();
    let s_base = net.bases().s_base_kva;
    let mut acts = [
        vec![0.0; n],
        vec![0.0; n],
        vec![0.0; n],
        vec![0.0; n],
        vec![0.0; n],
        vec![0.0; n],
    ];
    for a in &layout.acts {
        let mut v = x[a.col].clamp(a.lo, a.hi);
        if v.abs() < SNAP_PU && a.lo <= 0.0 && a.hi >= 0.0 {
            v = 0.0;
        }
        let slot = match a.kind {
            ActKind::PPlus => 0,
            ActKind::PMinus => 1,
            ActKind::QPlus => 2,
            ActKind::QMinus => 3,
            ActKind::LoadCurt => 4,
            ActKind::GenCurt => 5,
        };
        acts[slot][a.node] = v * s_base;
    }
    let w: Vec<f64> = (0..n).map(|i| layout.w_expr(i).eval(x)).collect();
    let losses_pu: f64 = (0..layout.branches.len())
        .map(|k| layout.branch_loss(k).eval(x))
        .sum();
    let cone_slack: Vec<f64> = layout
        .branches
        .iter()
        .enumerate()
        .map(|(k, br)| {
            let c = x[layout.c_col(k)];
            let s = x[layout.s_col(k)];
            w[br.up] * w[br.down] - c * c - s * s
        })
        .collect();
    let v_mag: Vec<f64> = w.iter().map(|v| v.max(0.0).sqrt()).collect();
    let mut v_ang = vec![0.0; n];
    for &node in net.bfs_order() {
        if let Some(k) = net.parent_branch(node) {
            let up = layout.branches[k].up;
            v_ang[node] = v_ang[up] - x[layout.s_col(k)].atan2(x[layout.c_col(k)]);
        }
    }
    let (duals_p, duals_q) = match duals {
        Some((p, q)) => (Some(p), Some(q)),
        None => (None, None),
    };
    let [dp_plus, dp_minus, dq_plus, dq_minus, load_curt, gen_curt] = acts;
    let mut result = DispatchResult {
        t: step.t,
        formulation,
        status,
        dp_plus,
        dp_minus,
        dq_plus,
        dq_minus,
        load_curt,
        gen_curt,
        objective: 0.0,
        losses_kw: losses_pu * s_base,
        duals_p,
        duals_q,
        w,
        cone_slack,
        v_mag,
        v_ang,
        iterations,
    };
    result.objective = objective_from_parts(&result, step, cfg);
    result
}

/// Stacks affine rows `expr` into `(M, rhs)` with `M x = -constant`.
fn stack(rows: &[&Affine], n_cols: usize, sign: f64) -> (DMatrix<f64>, DVector<f64>) {
    let mut m = DMatrix::zeros(rows.len(), n_cols);
    let mut rhs = DVector::zeros(rows.len());
    for (r, a) in rows.iter().enumerate() {
        for &(c, v) in &a.terms {
            m[(r, c)] += sign * v;
        }
        rhs[r] = -sign * a.constant;
    }
    (m, rhs)
}

fn build_conic(layout: &Layout) -> conic::ConicProblem {
    let n = layout.n_cols;
    let balance = layout.balance_rows();
    let eq: Vec<&Affine> = balance
        .iter()
        .map(|(_, p, _)| p)
        .chain(balance.iter().map(|(_, _, q)| q))
        .collect();
    let (a, b) = stack(&eq, n, 1.0);

    // Nonneg rows: expr ≤ 0  ⇔  G x + s = h with G = coef, h = −const.
    let lin = layout.linear_inequalities();
    let g_rows: Vec<Affine> = lin;
    let nonneg = g_rows.len();
    let mut soc = Vec::new();
    // Cone rows: the cone vector u = const + a'x gives G = −a, h = const.
    let mut cone_rows: Vec<Affine> = Vec::new();
    for (k, br) in layout.branches.iter().enumerate() {
        let wu = layout.w_expr(br.up);
        let wd = layout.w_expr(br.down);
        let mut sum = wu.clone();
        sum.constant += wd.constant;
        sum.terms.extend(wd.terms.iter().cloned());
        let mut diff = wu.clone();
        diff.constant -= wd.constant;
        diff.terms.extend(wd.terms.iter().map(|&(c, v)| (c, -v)));
        cone_rows.push(sum);
        cone_rows.push(Affine {
            constant: 0.0,
            terms: vec![(layout.c_col(k), 2.0)],
        });
        cone_rows.push(Affine {
            constant: 0.0,
            terms: vec![(layout.s_col(k), 2.0)],
        });
        cone_rows.push(diff);
        soc.push(4);
    }
    for k in 0..layout.branches.len() {
        for from_up in [true, false] {
            let (p, q) = layout.branch_pq(k, from_up);
            cone_rows.push(Affine {
                constant: layout.branches[k].s_max,
                terms: vec![],
            });
            cone_rows.push(p);
            cone_rows.push(q);
            soc.push(3);
        }
    }
    let (g_lin, h_lin) = stack(&g_rows.iter().collect::<Vec<_>>(), n, 1.0);
    let (g_cone, h_cone) = stack(&cone_rows.iter().collect::<Vec<_>>(), n, -1.0);
    let m = nonneg + cone_rows.len();
    let mut g = DMatrix::zeros(m, n);
    g.view_mut((0, 0), (nonneg, n)).copy_from(&g_lin);
    g.view_mut((nonneg, 0), (cone_rows.len(), n))
        .copy_from(&g_cone);
    let mut h = DVector::zeros(m);
    h.rows_mut(0, nonneg).copy_from(&h_lin);
    // stack() with sign −1 yields rhs = +const, which is exactly h here
    h.rows_mut(nonneg, cone_rows.len()).copy_from(&h_cone);

    let c_aff = layout.objective();
    let mut c = DVector::zeros(n);
    for &(col, v) in &c_aff.terms {
        c[col] += v;
    }
    conic::ConicProblem {
        c,
        c0: c_aff.constant,
        a,
        b,
        g,
        h,
        cones: conic::Cones { nonneg, soc },
    }
}

/// Balance duals in money per kWh, laid out per node (slack 0).
fn duals_per_node(layout: &Layout, y: &DVector<f64>) -> (Vec<f64>, Vec<f64>) {
    let n = layout.n_nodes;
    let m = n - 1;
    // The objective is in money per step; one extra kW for one step is
    // 0.25 kWh and 1 / S_base per unit.
    let scale = 1.0 / layout.money;
    let mut p = vec![0.0; n];
    let mut q = vec![0.0; n];
    let mut r = 0;
    for i in 0..n {
        if i == layout.slack {
            continue;
        }
        p[i] = y[r] * scale;
        q[i] = y[m + r] * scale;
        r += 1;
    }
    (p, q)
}

/// Solves the SOC relaxation of the dispatch problem for one timestep.
pub fn solve_soc_rdopf(
    net: &Network,
    step: &StepData,
    cfg: &RdopfConfig,
) -> Result<DispatchResult, RdopfError> {
    cfg.validate()?;
    step.validate(net, cfg)?;
    let layout = Layout::new(net, step, cfg);
    let (result, _) = soc_with_layout(net, step, cfg, &layout)?;
    Ok(result)
}

pub(crate) fn soc_with_layout(
    net: &Network,
    step: &StepData,
    cfg: &RdopfConfig,
    layout: &Layout,
) -> Result<(DispatchResult, Vec<f64>), RdopfError> {
    let prob = build_conic(layout);
    let sol = conic::solve(&prob, &conic::ConicSettings::default()).map_err(|e| match e {
        conic::ConicError::PrimalInfeasible { residual } => RdopfError::Infeasible {
            t: step.t,
            detail: format!("certificate residual {residual:.2e}"),
        },
        conic::ConicError::Numerical { reason, trace } => RdopfError::Solver {
            t: step.t,
            reason,
            trace,
        },
        other => RdopfError::Solver {
            t: step.t,
            reason: other.to_string(),
            trace: Vec::new(),
        },
    })?;
    let status = match sol.status {
        conic::ConicStatus::Optimal => DispatchStatus::Optimal,
        conic::ConicStatus::Inaccurate => DispatchStatus::Inaccurate,
    };
    let duals = duals_per_node(layout, &sol.y);
    let x: Vec<f64> = sol.x.iter().cloned().collect();
    let result = assemble(
        net,
        layout,
        step,
        cfg,
        &x,
        Some(duals),
        Formulation::Soc,
        status,
        sol.trace.len(),
    );
    Ok((result, x))
}

/// Returns the active-power balance duals (money per kWh, per node).
pub fn extract_power_balance_duals(result: &DispatchResult) -> Result<Vec<f64>, RdopfError> {
    match (&result.duals_p, result.status) {
        (Some(d), DispatchStatus::Optimal | DispatchStatus::Inaccurate) => Ok(d.clone()),
        _ => Err(RdopfError::NoDuals),
    }
}

/// Outcome of replaying a dispatch through a full AC power flow.
#[derive(Debug, Clone, PartialEq)]
pub struct VerificationReport {
    /// Largest violation of the voltage band in pu (0 when inside).
    pub max_voltage_violation: f64,
    /// Largest `|loading|` in percent.
    pub max_loading_pct: f64,
    /// Largest angle-limit violation in radians.
    pub max_angle_violation: f64,
    /// Power-flow mismatch at the solution.
    pub mismatch: f64,
    pub pass: bool,
    pub state: NetworkState,
}

/// Runs a power flow with the dispatched injections and checks limits.
pub fn verify_ac_feasibility(
    net: &Network,
    result: &DispatchResult,
    step: &StepData,
    cfg: &RdopfConfig,
) -> Result<VerificationReport, RdopfError> {
    let inj = step.dispatched_injections(result, net.bases().s_base_kva);
    let mut state = solve_power_flow(net, &inj)?;
    state.t = step.t;
    let max_voltage_violation = state
        .v_mag
        .iter()
        .map(|&v| (cfg.v_min - v).max(v - cfg.v_max).max(0.0))
        .fold(0.0, f64::max);
    let max_loading_pct = state.max_abs_loading();
    let max_angle_violation = net
        .branches()
        .iter()
        .map(|br| {
            let d = state.v_ang[br.from] - state.v_ang[br.to];
            (br.theta_min - d).max(d - br.theta_max).max(0.0)
        })
        .fold(0.0, f64::max);
    let pass = max_voltage_violation <= VERIFY_TOL
        && max_loading_pct <= 100.0 * (1.0 + VERIFY_TOL)
        && max_angle_violation <= VERIFY_TOL;
    Ok(VerificationReport {
        max_voltage_violation,
        max_loading_pct,
        max_angle_violation,
        mismatch: state.max_mismatch,
        pass,
        state,
    })
}

/// Solves every timestep of a horizon independently.
pub fn dispatch_horizon(
    net: &Network,
    profiles: &Profiles,
    fas: &FasSignal,
    envelope: &FlexEnvelope,
    cfg: &RdopfConfig,
) -> Result<Vec<DispatchResult>, RdopfError> {
    if fas.horizon() != profiles.horizon() || envelope.horizon() != profiles.horizon() {
        return Err(RdopfError::Input("horizon mismatch between inputs".into()));
    }
    crate::par::try_map_range(profiles.horizon(), |t| {
        let step = StepData::from_horizon(profiles, fas, envelope, t);
        match cfg.formulation {
            Formulation::Soc => solve_soc_rdopf(net, &step, cfg),
            Formulation::Ac => solve_ac_rdopf(net, &step, cfg),
        }
    })
}

/// `t,node,dp_plus_kw,dp_minus_kw,dq_plus_kvar,dq_minus_kvar,load_curt_kw,gen_curt_kw,dual`
pub fn write_dispatch_csv<W: Write>(results: &[DispatchResult], w: W) -> std::io::Result<()> {
    let mut wr = csvio::writer(w);
    wr.write_record([
        "t",
        "node",
        "dp_plus_kw",
        "dp_minus_kw",
        "dq_plus_kvar",
        "dq_minus_kvar",
        "load_curt_kw",
        "gen_curt_kw",
        "dual",
    ])?;
    for r in results {
        for i in 0..r.dp_plus.len() {
            let dual = r
                .duals_p
                .as_ref()
                .map_or(String::new(), |d| csvio::num(d[i]));
            wr.write_record([
                r.t.to_string(),
                i.to_string(),
                csvio::num(r.dp_plus[i]),
                csvio::num(r.dp_minus[i]),
                csvio::num(r.dq_plus[i]),
                csvio::num(r.dq_minus[i]),
                csvio::num(r.load_curt[i]),
                csvio::num(r.gen_curt[i]),
                dual,
            ])?;
        }
    }
    wr.flush()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DispatchSummary {
    pub objective: f64,
    pub losses_kwh: f64,
    pub status: Vec<DispatchStatus>,
}

pub fn summarize(results: &[DispatchResult]) -> DispatchSummary {
    DispatchSummary {
        objective: results.iter().map(|r| r.objective).sum(),
        losses_kwh: results.iter().map(|r| r.losses_kw).sum::<f64>() * STEP_HOURS,
        status: results.iter().map(|r| r.status).collect(),
    }
}
