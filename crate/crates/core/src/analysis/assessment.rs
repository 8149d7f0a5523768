use serde::Serialize;

use super::AnalysisError;
use crate::fas::{FasConfig, FasSignal};
use crate::powerflow::NetworkState;
use crate::rdopf::{DispatchResult, RdopfConfig};
use crate::STEP_HOURS;

/// Margin used when counting limit violations, so points sitting exactly on
/// a bound after dispatch are not counted.
pub const COMPLIANCE_TOL: f64 = 1e-6;

/// Duals below this magnitude count as zero.
const DUAL_ZERO: f64 = 1e-6;

/// Energy per node and step in kWh, indexed `[node][t]`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EnergyMatrix {
    pub values: Vec<Vec<f64>>,
}

impl EnergyMatrix {
    pub fn zeros(n: usize, t: usize) -> Self {
        EnergyMatrix {
            values: vec![vec![0.0; t]; n],
        }
    }

    pub fn num_nodes(&self) -> usize {
        self.values.len()
    }

    pub fn horizon(&self) -> usize {
        self.values.first().map_or(0, Vec::len)
    }

    /// Sum over nodes for each step.
    pub fn temporal(&self) -> Vec<f64> {
        (0..self.horizon())
            .map(|t| self.values.iter().map(|row| row[t]).sum())
            .collect()
    }

    /// Sum over steps for each node.
    pub fn locational(&self) -> Vec<f64> {
        self.values.iter().map(|row| row.iter().sum()).collect()
    }

    pub fn total(&self) -> f64 {
        self.values.iter().flatten().sum()
    }

    /// Entry of largest magnitude (sign kept) as power in kW.
    pub fn peak_kw(&self) -> f64 {
        self.values
            .iter()
            .flatten()
            .fold(0.0f64, |m, &v| if v.abs() > m.abs() { v } else { m })
            / STEP_HOURS
    }

    pub fn aggregate(&self) -> MatrixAggregate {
        MatrixAggregate {
            cumulative_kwh: self.total(),
            peak_kw: self.peak_kw(),
            temporal: self.temporal(),
            locational: self.locational(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MatrixAggregate {
    pub cumulative_kwh: f64,
    pub peak_kw: f64,
    pub temporal: Vec<f64>,
    pub locational: Vec<f64>,
}

/// Limits behind the compliance counts.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ComplianceLimits {
    pub v_min: f64,
    pub v_max: f64,
    pub dv_perm: f64,
    pub dt_perm: f64,
}

impl From<&FasConfig> for ComplianceLimits {
    fn from(c: &FasConfig) -> Self {
        ComplianceLimits {
            v_min: c.v_min,
            v_max: c.v_max,
            dv_perm: c.dv_perm,
            dt_perm: c.dt_perm,
        }
    }
}

/// Percentages of samples. Voltage samples are non-slack nodes times steps,
/// loading samples are branches times steps.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize)]
pub struct Compliance {
    pub over_v_max_pct: f64,
    pub under_v_min_pct: f64,
    pub over_band_pct: f64,
    pub under_band_pct: f64,
    pub loading_ge_100_pct: f64,
    pub loading_over_perm_pct: f64,
}

pub fn compliance(states: &[NetworkState], slack: usize, lim: &ComplianceLimits) -> Compliance {
    let mut c = [0usize; 6];
    let (mut nv, mut nb) = (0usize, 0usize);
    for st in states {
        for (i, &v) in st.v_mag.iter().enumerate() {
            if i == slack {
                continue;
            }
            nv += 1;
            c[0] += usize::from(v > lim.v_max + COMPLIANCE_TOL);
            c[1] += usize::from(v < lim.v_min - COMPLIANCE_TOL);
            c[2] += usize::from(v > 1.0 + lim.dv_perm + COMPLIANCE_TOL);
            c[3] += usize::from(v < 1.0 - lim.dv_perm - COMPLIANCE_TOL);
        }
        for l in &st.loading_pct {
            nb += 1;
            c[4] += usize::from(l.abs() >= 100.0 * (1.0 + COMPLIANCE_TOL));
            c[5] += usize::from(l.abs() > lim.dt_perm);
        }
    }
    let pct = |k: usize, n: usize| {
        if n == 0 {
            0.0
        } else {
            100.0 * k as f64 / n as f64
        }
    };
    Compliance {
        over_v_max_pct: pct(c[0], nv),
        under_v_min_pct: pct(c[1], nv),
        over_band_pct: pct(c[2], nv),
        under_band_pct: pct(c[3], nv),
        loading_ge_100_pct: pct(c[4], nb),
        loading_over_perm_pct: pct(c[5], nb),
    }
}

/// Activation costs over the horizon, in money.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize)]
pub struct ActivationCosts {
    pub load_curtailment: f64,
    pub ramp_down: f64,
    pub gen_curtailment: f64,
    pub ramp_up: f64,
    pub reactive: f64,
    pub losses: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AssessmentReport {
    pub r_up: EnergyMatrix,
    pub r_down: EnergyMatrix,
    pub c_load: EnergyMatrix,
    pub c_gen: EnergyMatrix,
    pub r_up_agg: MatrixAggregate,
    pub r_down_agg: MatrixAggregate,
    pub c_load_agg: MatrixAggregate,
    pub c_gen_agg: MatrixAggregate,
    pub compliance: Compliance,
    pub losses_kwh: f64,
    pub costs: ActivationCosts,
    pub objective: f64,
}

/// Builds the four `N × T` matrices from a horizon dispatch.
///
/// `R_down` holds `ΔP⁺` (net-load reduction), `R_up` holds `ΔP⁻` and
/// `C_gen` holds `−ΔP^G`, so the ramp-up and generation rows come out
/// negative. `states` are the post-dispatch power flows used for the
/// compliance counts.
pub fn needs_assessment(
    results: &[DispatchResult],
    states: &[NetworkState],
    fas: &FasSignal,
    cfg: &RdopfConfig,
    slack: usize,
    limits: &ComplianceLimits,
) -> Result<AssessmentReport, AnalysisError> {
    let t_len = results.len();
    if states.len() != t_len {
        return Err(AnalysisError::Dimension(format!(
            "{t_len} dispatch steps but {} states",
            states.len()
        )));
    }
    let n = results.first().map_or(0, |r| r.dp_plus.len());
    let mut mats = [
        EnergyMatrix::zeros(n, t_len),
        EnergyMatrix::zeros(n, t_len),
        EnergyMatrix::zeros(n, t_len),
        EnergyMatrix::zeros(n, t_len),
    ];
    let mut losses_kwh = 0.0;
    let mut objective = 0.0;
    for (k, r) in results.iter().enumerate() {
        if r.dp_plus.len() != n || states[k].v_mag.len() != n {
            return Err(AnalysisError::Dimension(format!("node count at step {k}")));
        }
        if r.t >= fas.horizon() || fas.at(r.t).len() != n {
            return Err(AnalysisError::Dimension(format!("no FAS for step {}", r.t)));
        }
        for i in 0..n {
            mats[0].values[i][k] = r.dp_minus[i] * STEP_HOURS;
            mats[1].values[i][k] = r.dp_plus[i] * STEP_HOURS;
            mats[2].values[i][k] = r.load_curt[i] * STEP_HOURS;
            mats[3].values[i][k] = -r.gen_curt[i] * STEP_HOURS;
        }
        losses_kwh += r.losses_kw * STEP_HOURS;
        objective += r.objective;
    }
    let costs = activation_costs(results, fas, cfg);
    let [r_up, r_down, c_load, c_gen] = mats;
    Ok(AssessmentReport {
        r_up_agg: r_up.aggregate(),
        r_down_agg: r_down.aggregate(),
        c_load_agg: c_load.aggregate(),
        c_gen_agg: c_gen.aggregate(),
        r_up,
        r_down,
        c_load,
        c_gen,
        compliance: compliance(states, slack, limits),
        losses_kwh,
        costs,
        objective,
    })
}

/// Costs of each activation kind at the FAS prices. Steps must be covered
/// by `fas`.
pub(crate) fn activation_costs(
    results: &[DispatchResult],
    fas: &FasSignal,
    cfg: &RdopfConfig,
) -> ActivationCosts {
    let mut c = ActivationCosts::default();
    for r in results {
        let f = fas.at(r.t);
        for i in 0..r.dp_plus.len() {
            c.ramp_down += f[i].lam_p_plus * r.dp_plus[i];
            c.ramp_up += f[i].lam_p_minus * r.dp_minus[i];
            c.reactive += f[i].lam_q_plus * r.dq_plus[i] + f[i].lam_q_minus * r.dq_minus[i];
            c.load_curtailment += cfg.lambda_curt_load * r.load_curt[i];
            c.gen_curtailment += cfg.lambda_curt_gen * r.gen_curt[i];
        }
        c.losses += cfg.lambda_loss * r.losses_kw;
    }
    for v in [
        &mut c.load_curtailment,
        &mut c.ramp_down,
        &mut c.gen_curtailment,
        &mut c.ramp_up,
        &mut c.reactive,
        &mut c.losses,
    ] {
        *v *= STEP_HOURS;
    }
    c
}

/// Per-step comparison of the FAS against the balance duals.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DualFasRow {
    pub t: usize,
    pub max_abs_fas: f64,
    pub max_abs_dual: f64,
    pub fas_active: bool,
    pub dual_active: bool,
}

pub fn duals_vs_fas(
    results: &[DispatchResult],
    fas: &FasSignal,
) -> Result<Vec<DualFasRow>, AnalysisError> {
    results
        .iter()
        .map(|r| {
            let duals = r
                .duals_p
                .as_ref()
                .ok_or_else(|| AnalysisError::Dimension(format!("no duals at step {}", r.t)))?;
            if r.t >= fas.horizon() {
                return Err(AnalysisError::Dimension(format!("no FAS for step {}", r.t)));
            }
            let max_abs_fas = fas
                .at(r.t)
                .iter()
                .flat_map(|p| [p.lam_p_plus, p.lam_p_minus, p.lam_q_plus, p.lam_q_minus])
                .fold(0.0f64, |m, v| m.max(v.abs()));
            let max_abs_dual = duals.iter().fold(0.0f64, |m, v| m.max(v.abs()));
            Ok(DualFasRow {
                t: r.t,
                max_abs_fas,
                max_abs_dual,
                fas_active: fas.active_at(r.t),
                dual_active: max_abs_dual > DUAL_ZERO,
            })
        })
        .collect()
}
