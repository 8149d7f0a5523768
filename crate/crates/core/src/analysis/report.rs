//! Writers for the report bundle. CSV columns are fixed; JSON is pretty
//! printed with a trailing newline.

use std::io::Write;

use serde::Serialize;

use super::assessment::{ActivationCosts, MatrixAggregate};
use super::{AssessmentReport, Compliance, DualFasRow, EnergyMatrix, ParetoCurve, ReactiveImpact};
use crate::csvio::{self, num};

#[derive(Serialize)]
struct LevelEntry<'a> {
    flex_level: f64,
    objective: f64,
    losses_kwh: f64,
    costs: &'a ActivationCosts,
    compliance: &'a Compliance,
    r_up: &'a MatrixAggregate,
    r_down: &'a MatrixAggregate,
    c_load: &'a MatrixAggregate,
    c_gen: &'a MatrixAggregate,
}

#[derive(Serialize)]
struct Bundle<'a> {
    nominal_compliance: &'a Compliance,
    levels: Vec<LevelEntry<'a>>,
}

/// Aggregates and compliance for each flexibility level, plus the
/// compliance of the twin without any dispatch.
pub fn write_assessment_json<W: Write>(
    nominal: &Compliance,
    levels: &[(f64, AssessmentReport)],
    mut w: W,
) -> std::io::Result<()> {
    let bundle = Bundle {
        nominal_compliance: nominal,
        levels: levels
            .iter()
            .map(|(level, r)| LevelEntry {
                flex_level: *level,
                objective: r.objective,
                losses_kwh: r.losses_kwh,
                costs: &r.costs,
                compliance: &r.compliance,
                r_up: &r.r_up_agg,
                r_down: &r.r_down_agg,
                c_load: &r.c_load_agg,
                c_gen: &r.c_gen_agg,
            })
            .collect(),
    };
    serde_json::to_writer_pretty(&mut w, &bundle)?;
    w.write_all(b"\n")
}

/// `node,0,1,…,T-1`, one row per node.
pub fn write_heatmap_csv<W: Write>(m: &EnergyMatrix, w: W) -> std::io::Result<()> {
    let mut wr = csvio::writer(w);
    let mut header = vec!["node".to_string()];
    header.extend((0..m.horizon()).map(|t| t.to_string()));
    wr.write_record(&header)?;
    for (i, row) in m.values.iter().enumerate() {
        let mut rec = vec![i.to_string()];
        rec.extend(row.iter().map(|v| num(*v)));
        wr.write_record(&rec)?;
    }
    wr.flush()
}

pub fn write_pareto_csv<W: Write>(curve: &ParetoCurve, w: W) -> std::io::Result<()> {
    let mut wr = csvio::writer(w);
    wr.write_record([
        "lambda_loss",
        "gap_pct",
        "cost_loss",
        "cost_loss_soc",
        "obj_ac",
        "obj_soc",
        "losses_kwh_ac",
        "losses_kwh_soc",
        "ramp_down_kwh_ac",
        "ramp_down_kwh_soc",
        "ramp_up_kwh_ac",
        "ramp_up_kwh_soc",
        "load_curt_kwh_ac",
        "load_curt_kwh_soc",
        "gen_curt_kwh_ac",
        "gen_curt_kwh_soc",
        "voltage_deviation_pct",
        "recovered_steps",
        "max_step_excess",
        "knee",
        "flag",
    ])?;
    for p in &curve.points {
        let is_knee = curve.knee == Some(p.lambda_loss);
        wr.write_record([
            num(p.lambda_loss),
            num(p.gap_pct),
            num(p.cost_loss),
            num(p.cost_loss_soc),
            num(p.ac.objective),
            num(p.soc.objective),
            num(p.ac.losses_kwh),
            num(p.soc.losses_kwh),
            num(p.ac.ramp_down_kwh),
            num(p.soc.ramp_down_kwh),
            num(p.ac.ramp_up_kwh),
            num(p.soc.ramp_up_kwh),
            num(p.ac.load_curt_kwh),
            num(p.soc.load_curt_kwh),
            num(p.ac.gen_curt_kwh),
            num(p.soc.gen_curt_kwh),
            num(p.voltage_deviation_pct),
            p.recovered_steps.to_string(),
            num(p.max_step_excess),
            u8::from(is_knee).to_string(),
            p.flag.clone().unwrap_or_default(),
        ])?;
    }
    wr.flush()
}

fn opt(v: Option<f64>) -> String {
    v.map_or(String::new(), num)
}

pub fn write_reactive_csv<W: Write>(r: &ReactiveImpact, w: W) -> std::io::Result<()> {
    let mut wr = csvio::writer(w);
    wr.write_record([
        "pf",
        "flex_level",
        "x_noq_kwh",
        "y_q_kwh",
        "obj_noq",
        "obj_withq",
        "p_reduction_pct",
        "profit_reactive_pct",
        "profit_net_of_q_pct",
        "flag",
    ])?;
    for c in &r.cells {
        wr.write_record([
            num(c.pf),
            num(c.flex_level),
            num(c.x_noq_kwh),
            num(c.y_q_kwh),
            num(c.obj_noq),
            num(c.obj_withq),
            opt(c.p_reduction_pct),
            opt(c.profit_reactive_pct),
            opt(c.profit_net_of_q_pct),
            c.flag.clone().unwrap_or_default(),
        ])?;
    }
    wr.flush()
}

pub fn write_fas_vs_duals_csv<W: Write>(rows: &[DualFasRow], w: W) -> std::io::Result<()> {
    let mut wr = csvio::writer(w);
    wr.write_record([
        "t",
        "max_abs_fas",
        "max_abs_dual",
        "fas_active",
        "dual_active",
    ])?;
    for r in rows {
        wr.write_record([
            r.t.to_string(),
            num(r.max_abs_fas),
            num(r.max_abs_dual),
            u8::from(r.fas_active).to_string(),
            u8::from(r.dual_active).to_string(),
        ])?;
    }
    wr.flush()
}
