//! Case-study metrics: optimality gap, loss-penalty sweep and knee, needs
//! assessment with compliance statistics, and the reactive-power study.

mod assessment;
mod pareto;
mod reactive;
mod report;

pub use assessment::{
    compliance, duals_vs_fas, needs_assessment, ActivationCosts, AssessmentReport, Compliance,
    ComplianceLimits, DualFasRow, EnergyMatrix, MatrixAggregate, COMPLIANCE_TOL,
};
pub use pareto::{
    default_lambda_grid, knee_index, knee_point, sweep_loss_penalty, ActivationSummary,
    ParetoCurve, ParetoPoint, MAX_FLAGGED_FRACTION,
};
pub use reactive::{reactive_impact, ReactiveCell, ReactiveImpact, DEFAULT_PF_SET};
pub use report::{
    write_assessment_json, write_fas_vs_duals_csv, write_heatmap_csv, write_pareto_csv,
    write_reactive_csv,
};

#[derive(Debug, Clone, thiserror::Error)]
pub enum AnalysisError {
    #[error("optimality gap is undefined for an AC objective of {0}")]
    UndefinedGap(f64),
    #[error("invalid loss-penalty grid: {0}")]
    Grid(String),
    #[error("{flagged} of {total} sweep points failed")]
    TooManyFlagged { flagged: usize, total: usize },
    #[error("knee detection needs at least 4 valid points, got {0}")]
    TooFewPoints(usize),
    #[error("curve is affine within tolerance (max chord distance {0:.2e})")]
    NoKnee(f64),
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("power factor {0} outside (0, 1]")]
    PowerFactor(f64),
}

/// `(obj_ac − obj_soc) / obj_ac · 100`.
pub fn optimality_gap(obj_ac: f64, obj_soc: f64) -> Result<f64, AnalysisError> {
    if !(obj_ac > 0.0 && obj_ac.is_finite()) || !obj_soc.is_finite() {
        return Err(AnalysisError::UndefinedGap(obj_ac));
    }
    Ok((obj_ac - obj_soc) / obj_ac * 100.0)
}

/// Mean of `|v_a − v_b|` over all samples, in percent of 1 pu.
pub fn mean_voltage_deviation(
    a: &[crate::rdopf::DispatchResult],
    b: &[crate::rdopf::DispatchResult],
) -> Result<f64, AnalysisError> {
    if a.len() != b.len() {
        return Err(AnalysisError::Dimension(format!(
            "{} vs {} steps",
            a.len(),
            b.len()
        )));
    }
    let mut sum = 0.0;
    let mut count = 0usize;
    for (ra, rb) in a.iter().zip(b) {
        if ra.v_mag.len() != rb.v_mag.len() {
            return Err(AnalysisError::Dimension(format!(
                "node count at t {}",
                ra.t
            )));
        }
        for (va, vb) in ra.v_mag.iter().zip(&rb.v_mag) {
            sum += (va - vb).abs();
            count += 1;
        }
    }
    Ok(if count == 0 {
        0.0
    } else {
        100.0 * sum / count as f64
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gap_arithmetic() {
        assert_eq!(optimality_gap(10.0, 10.0).unwrap(), 0.0);
        assert!((optimality_gap(10.0, 9.0).unwrap() - 10.0).abs() < 1e-12);
        assert!(matches!(
            optimality_gap(0.0, 1.0),
            Err(AnalysisError::UndefinedGap(_))
        ));
    }
}
