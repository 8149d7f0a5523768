use serde::Serialize;

use super::assessment::activation_costs;
use super::pareto::ActivationSummary;
use super::AnalysisError;
use crate::rdopf::DispatchResult;
use crate::scenario::Scenario;

pub const DEFAULT_PF_SET: [f64; 5] = [0.98, 0.95, 0.9, 0.85, 0.8];

/// One `(power factor, flexibility level)` cell of the study.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReactiveCell {
    pub pf: f64,
    pub flex_level: f64,
    /// Absolute active energy without Q channels, kWh.
    pub x_noq_kwh: f64,
    /// Absolute active energy with Q channels, kWh.
    pub y_q_kwh: f64,
    pub obj_noq: f64,
    pub obj_withq: f64,
    /// `100 (X_noQ − Y_Q) / X_noQ`; `None` when `X_noQ = 0`.
    pub p_reduction_pct: Option<f64>,
    /// `100 (Obj_NoQ − Obj_WithQ) / Obj_NoQ`; `None` when `Obj_NoQ = 0`.
    pub profit_reactive_pct: Option<f64>,
    /// Avoided active-power activation cost minus the cost of the Q
    /// activations, in percent of `Obj_NoQ`.
    pub profit_net_of_q_pct: Option<f64>,
    /// Set when a dispatch of this cell failed; the numbers are then zero.
    pub flag: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReactiveImpact {
    pub cells: Vec<ReactiveCell>,
}

impl ReactiveImpact {
    pub fn cell(&self, pf: f64, level: f64) -> Option<&ReactiveCell> {
        self.cells
            .iter()
            .find(|c| c.pf == pf && c.flex_level == level)
    }
}

fn abs_active_energy(results: &[DispatchResult]) -> f64 {
    let s = ActivationSummary::of(results);
    s.load_curt_kwh.abs() + s.gen_curt_kwh.abs() + s.ramp_down_kwh.abs() + s.ramp_up_kwh.abs()
}

fn ratio(num: f64, den: f64) -> Option<f64> {
    (den != 0.0).then(|| 100.0 * num / den)
}

/// Runs each `(pf, level)` cell with and without the reactive channels.
///
/// Reactive loads are rebuilt as `P^d tan(arccos pf)`, which changes the
/// twin and therefore the FAS; the sensitivities of `scenario` are reused.
pub fn reactive_impact(
    scenario: &Scenario,
    pf_set: &[f64],
    flex_levels: &[f64],
) -> crate::Result<ReactiveImpact> {
    if let Some(&pf) = pf_set.iter().find(|&&pf| !(pf > 0.0 && pf <= 1.0)) {
        return Err(AnalysisError::PowerFactor(pf).into());
    }
    let scenarios = crate::par::map_slice(pf_set, |&pf| scenario.with_power_factor(pf))
        .into_iter()
        .collect::<crate::Result<Vec<_>>>()?;
    let pairs: Vec<(usize, f64)> = (0..pf_set.len())
        .flat_map(|k| flex_levels.iter().map(move |&l| (k, l)))
        .collect();
    let cells = crate::par::map_slice(&pairs, |&(k, level)| {
        let sc = &scenarios[k];
        let mut cell = ReactiveCell {
            pf: pf_set[k],
            flex_level: level,
            x_noq_kwh: 0.0,
            y_q_kwh: 0.0,
            obj_noq: 0.0,
            obj_withq: 0.0,
            p_reduction_pct: None,
            profit_reactive_pct: None,
            profit_net_of_q_pct: None,
            flag: None,
        };
        let cfg = &sc.rdopf_cfg;
        let runs = sc
            .dispatch(level, cfg)
            .and_then(|q| Ok((q, sc.dispatch_without_reactive(level, cfg)?)));
        let (with_q, without_q) = match runs {
            Ok(r) => r,
            Err(e) => {
                cell.flag = Some(e.to_string());
                return cell;
            }
        };
        cell.x_noq_kwh = abs_active_energy(&without_q);
        cell.y_q_kwh = abs_active_energy(&with_q);
        cell.obj_noq = without_q.iter().map(|r| r.objective).sum();
        cell.obj_withq = with_q.iter().map(|r| r.objective).sum();
        let c_no = activation_costs(&without_q, &sc.fas, cfg);
        let c_q = activation_costs(&with_q, &sc.fas, cfg);
        let p_cost = |c: &super::ActivationCosts| {
            c.load_curtailment + c.gen_curtailment + c.ramp_down + c.ramp_up
        };
        cell.p_reduction_pct = ratio(cell.x_noq_kwh - cell.y_q_kwh, cell.x_noq_kwh);
        cell.profit_reactive_pct = ratio(cell.obj_noq - cell.obj_withq, cell.obj_noq);
        cell.profit_net_of_q_pct = ratio(p_cost(&c_no) - p_cost(&c_q) - c_q.reactive, cell.obj_noq);
        cell
    });
    Ok(ReactiveImpact { cells })
}
