use serde::Serialize;

use super::{mean_voltage_deviation, optimality_gap, AnalysisError};
use crate::rdopf::{DispatchResult, DispatchStatus, Formulation};
use crate::scenario::Scenario;
use crate::STEP_HOURS;

/// Sweeps with more failed points than this are rejected.
pub const MAX_FLAGGED_FRACTION: f64 = 0.25;

/// Energies of one horizon dispatch, signed like the assessment matrices
/// (ramp-up and generation curtailment are negative).
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize)]
pub struct ActivationSummary {
    pub objective: f64,
    pub losses_kwh: f64,
    pub ramp_down_kwh: f64,
    pub ramp_up_kwh: f64,
    pub q_abs_kvarh: f64,
    pub load_curt_kwh: f64,
    pub gen_curt_kwh: f64,
}

impl ActivationSummary {
    pub fn of(results: &[DispatchResult]) -> Self {
        let mut s = ActivationSummary::default();
        for r in results {
            s.objective += r.objective;
            s.losses_kwh += r.losses_kw * STEP_HOURS;
            s.ramp_down_kwh += r.dp_plus.iter().sum::<f64>() * STEP_HOURS;
            s.ramp_up_kwh += r.dp_minus.iter().sum::<f64>() * STEP_HOURS;
            s.q_abs_kvarh += r
                .dq_plus
                .iter()
                .chain(&r.dq_minus)
                .map(|v| v.abs())
                .sum::<f64>()
                * STEP_HOURS;
            s.load_curt_kwh += r.load_curt.iter().sum::<f64>() * STEP_HOURS;
            s.gen_curt_kwh -= r.gen_curt.iter().sum::<f64>() * STEP_HOURS;
        }
        s
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ParetoPoint {
    pub lambda_loss: f64,
    pub gap_pct: f64,
    /// `λ_loss · Σ_t ρ(t)` of the AC dispatch.
    pub cost_loss: f64,
    pub cost_loss_soc: f64,
    pub ac: ActivationSummary,
    pub soc: ActivationSummary,
    /// Mean `|v_AC − v_SOC|` in percent.
    pub voltage_deviation_pct: f64,
    /// AC steps that fell back to the relaxation's activations.
    pub recovered_steps: usize,
    /// Largest per-step `(σ_SOC − σ_AC) / max(1, |σ_AC|)`.
    pub max_step_excess: f64,
    /// Why the point is excluded from knee detection.
    pub flag: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ParetoCurve {
    pub flex_level: f64,
    pub points: Vec<ParetoPoint>,
    pub knee: Option<f64>,
}

impl ParetoCurve {
    pub fn valid(&self) -> impl Iterator<Item = &ParetoPoint> {
        self.points.iter().filter(|p| p.flag.is_none())
    }
}

/// 13 log-spaced penalties in `[0.01, 2.0]`.
pub fn default_lambda_grid() -> Vec<f64> {
    let (lo, hi) = (0.01f64.ln(), 2.0f64.ln());
    (0..13)
        .map(|k| (lo + (hi - lo) * k as f64 / 12.0).exp())
        .collect()
}

fn check_grid(grid: &[f64]) -> Result<(), AnalysisError> {
    if grid.len() < 4 {
        return Err(AnalysisError::Grid(format!(
            "{} points, need at least 4",
            grid.len()
        )));
    }
    if grid.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
        return Err(AnalysisError::Grid(
            "penalties must be finite and non-negative".into(),
        ));
    }
    if grid.windows(2).any(|w| w[1] <= w[0]) {
        return Err(AnalysisError::Grid(
            "grid must be strictly increasing".into(),
        ));
    }
    Ok(())
}

fn sweep_point(scenario: &Scenario, lambda: f64, level: f64) -> ParetoPoint {
    let mut cfg = scenario.rdopf_cfg.clone();
    cfg.lambda_loss = lambda;
    let mut soc_cfg = cfg.clone();
    soc_cfg.formulation = Formulation::Soc;
    let mut ac_cfg = cfg;
    ac_cfg.formulation = Formulation::Ac;
    let mut point = ParetoPoint {
        lambda_loss: lambda,
        gap_pct: 0.0,
        cost_loss: 0.0,
        cost_loss_soc: 0.0,
        ac: ActivationSummary::default(),
        soc: ActivationSummary::default(),
        voltage_deviation_pct: 0.0,
        recovered_steps: 0,
        max_step_excess: f64::NAN,
        flag: None,
    };
    let soc = match scenario.dispatch(level, &soc_cfg) {
        Ok(r) => r,
        Err(e) => {
            point.flag = Some(format!("SOC: {e}"));
            return point;
        }
    };
    let ac = match scenario.dispatch(level, &ac_cfg) {
        Ok(r) => r,
        Err(e) => {
            point.flag = Some(format!("AC: {e}"));
            return point;
        }
    };
    point.soc = ActivationSummary::of(&soc);
    point.ac = ActivationSummary::of(&ac);
    point.cost_loss = lambda * point.ac.losses_kwh;
    point.cost_loss_soc = lambda * point.soc.losses_kwh;
    point.max_step_excess = soc
        .iter()
        .zip(&ac)
        .map(|(s, a)| (s.objective - a.objective) / a.objective.abs().max(1.0))
        .fold(f64::NEG_INFINITY, f64::max);
    point.recovered_steps = ac
        .iter()
        .filter(|r| r.status == DispatchStatus::Recovered)
        .count();
    point.voltage_deviation_pct = mean_voltage_deviation(&ac, &soc).unwrap_or(f64::NAN);
    match optimality_gap(point.ac.objective, point.soc.objective) {
        Ok(g) => point.gap_pct = g,
        Err(e) => point.flag = Some(e.to_string()),
    }
    point
}

/// Solves both formulations over the horizon for every penalty in `grid`.
pub fn sweep_loss_penalty(
    scenario: &Scenario,
    grid: &[f64],
    flex_level: f64,
) -> Result<ParetoCurve, AnalysisError> {
    check_grid(grid)?;
    let points = crate::par::map_slice(grid, |&lambda| sweep_point(scenario, lambda, flex_level));
    let flagged = points.iter().filter(|p| p.flag.is_some()).count();
    if flagged as f64 > MAX_FLAGGED_FRACTION * points.len() as f64 {
        return Err(AnalysisError::TooManyFlagged {
            flagged,
            total: points.len(),
        });
    }
    let mut curve = ParetoCurve {
        flex_level,
        points,
        knee: None,
    };
    curve.knee = knee_point(&curve).ok();
    Ok(curve)
}

/// Index of the point farthest from the chord between the first and last
/// point, both axes min-max normalized.
pub fn knee_index(xs: &[f64], ys: &[f64]) -> Result<usize, AnalysisError> {
    if xs.len() != ys.len() {
        return Err(AnalysisError::Dimension(format!(
            "{} x vs {} y",
            xs.len(),
            ys.len()
        )));
    }
    if xs.len() < 4 {
        return Err(AnalysisError::TooFewPoints(xs.len()));
    }
    let norm = |v: &[f64]| -> Vec<f64> {
        let lo = v.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = v.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let span = hi - lo;
        v.iter()
            .map(|x| if span > 0.0 { (x - lo) / span } else { 0.0 })
            .collect()
    };
    let (x, y) = (norm(xs), norm(ys));
    let n = x.len();
    let (dx, dy) = (x[n - 1] - x[0], y[n - 1] - y[0]);
    let len = dx.hypot(dy);
    if len == 0.0 {
        return Err(AnalysisError::NoKnee(0.0));
    }
    let mut best = (0, 0.0);
    for i in 1..n - 1 {
        let d = (dx * (y[i] - y[0]) - dy * (x[i] - x[0])).abs() / len;
        if d > best.1 {
            best = (i, d);
        }
    }
    if best.1 < 1e-6 {
        return Err(AnalysisError::NoKnee(best.1));
    }
    Ok(best.0)
}

/// Knee of gap against loss cost over the unflagged points.
pub fn knee_point(curve: &ParetoCurve) -> Result<f64, AnalysisError> {
    let valid: Vec<&ParetoPoint> = curve.valid().collect();
    let xs: Vec<f64> = valid.iter().map(|p| p.cost_loss).collect();
    let ys: Vec<f64> = valid.iter().map(|p| p.gap_pct).collect();
    let k = knee_index(&xs, &ys)?;
    Ok(valid[k].lambda_loss)
}
