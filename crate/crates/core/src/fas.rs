//! Flexibility activation signals: saturation levels, droop evaluation,
//! nodal thermal projection and gated flexibility envelopes.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::csvio;
use crate::network::{Network, Profiles};
use crate::powerflow::NetworkState;
use crate::sensitivity::SensitivityTable;

#[derive(Debug, Clone, thiserror::Error)]
pub enum FasError {
    #[error("invalid FAS configuration: {0}")]
    Config(String),
    #[error("degenerate sensitivity table: {0}")]
    DegenerateTable(String),
    #[error("validation error: {0}")]
    Validation(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FasConfig {
    pub v_min: f64,
    pub v_max: f64,
    /// Permissible voltage deviation from 1 pu before droop starts.
    pub dv_perm: f64,
    /// Permissible loading (percent) before thermal droop starts.
    pub dt_perm: f64,
    pub kappa_v: f64,
    pub kappa_t: f64,
    /// Price of generation curtailment.
    pub lambda_curt_gen: f64,
    /// Price of load curtailment.
    pub lambda_curt_load: f64,
    /// Use β for the active-power thermal level (as printed) instead of Ψ.
    pub thermal_p_uses_beta: bool,
}

impl Default for FasConfig {
    fn default() -> Self {
        FasConfig {
            v_min: 0.92,
            v_max: 1.08,
            dv_perm: 0.04,
            dt_perm: 75.0,
            kappa_v: 0.2,
            kappa_t: 0.2,
            lambda_curt_gen: 0.47,
            lambda_curt_load: 0.87,
            thermal_p_uses_beta: true,
        }
    }
}

impl FasConfig {
    pub fn validate(&self) -> Result<(), FasError> {
        let bad = |m: &str| Err(FasError::Config(m.to_string()));
        if !(self.v_min < 1.0 && self.v_max > 1.0) {
            return bad("need v_min < 1 < v_max");
        }
        if !(self.dv_perm > 0.0
            && self.dv_perm < self.v_max - 1.0
            && self.dv_perm < 1.0 - self.v_min)
        {
            return bad("dv_perm must lie in (0, min(v_max - 1, 1 - v_min))");
        }
        if !(self.dt_perm > 0.0 && self.dt_perm < 100.0) {
            return bad("dt_perm must lie in (0, 100)");
        }
        if !(self.kappa_v >= 0.0 && self.kappa_t >= 0.0) {
            return bad("kappa_v and kappa_t must be non-negative");
        }
        if !(self.kappa_v + self.kappa_t < self.lambda_curt_gen.min(self.lambda_curt_load)) {
            return bad("kappa_v + kappa_t must stay below both curtailment prices");
        }
        Ok(())
    }

    /// Lower edge of the over-voltage droop.
    pub fn v_high_start(&self) -> f64 {
        1.0 + self.dv_perm
    }

    /// Upper edge of the under-voltage droop.
    pub fn v_low_start(&self) -> f64 {
        1.0 - self.dv_perm
    }
}

/// Per-node saturation magnitudes of the four droop terms.
#[derive(Debug, Clone, PartialEq)]
pub struct SaturationLevels {
    pub vc_p: Vec<f64>,
    pub tc_p: Vec<f64>,
    pub vc_q: Vec<f64>,
    pub tc_q: Vec<f64>,
}

impl SaturationLevels {
    pub fn num_nodes(&self) -> usize {
        self.vc_p.len()
    }

    pub fn zeros(n: usize) -> Self {
        SaturationLevels {
            vc_p: vec![0.0; n],
            tc_p: vec![0.0; n],
            vc_q: vec![0.0; n],
            tc_q: vec![0.0; n],
        }
    }
}

/// Max-normalized linear levels: `kappa · s_i / max_j s_j`.
pub fn saturation_levels(
    sens: &SensitivityTable,
    cfg: &FasConfig,
) -> Result<SaturationLevels, FasError> {
    cfg.validate()?;
    let scaled = |col: &[f64], kappa: f64, name: &str| -> Result<Vec<f64>, FasError> {
        if col.iter().any(|v| !v.is_finite() || *v < 0.0) {
            return Err(FasError::Validation(format!(
                "{name} sensitivities must be finite and non-negative"
            )));
        }
        let max = col.iter().cloned().fold(0.0, f64::max);
        if kappa == 0.0 {
            return Ok(vec![0.0; col.len()]);
        }
        if max == 0.0 {
            return Err(FasError::DegenerateTable(format!(
                "all {name} sensitivities are zero"
            )));
        }
        Ok(col.iter().map(|v| kappa * v / max).collect())
    };
    let thermal_p = if cfg.thermal_p_uses_beta {
        &sens.beta
    } else {
        &sens.psi
    };
    Ok(SaturationLevels {
        vc_p: scaled(&sens.psi, cfg.kappa_v, "psi")?,
        tc_p: scaled(thermal_p, cfg.kappa_t, "thermal")?,
        vc_q: scaled(&sens.psi, cfg.kappa_v, "psi")?,
        tc_q: scaled(&sens.beta, cfg.kappa_t, "beta")?,
    })
}

/// Signed incident loading of largest magnitude per node; slack gets 0.
pub fn project_loadings(net: &Network, state: &NetworkState) -> Vec<f64> {
    (0..net.num_nodes())
        .map(|i| {
            if i == net.slack() {
                return 0.0;
            }
            max_abs_signed(
                net.incident_branches(i)
                    .iter()
                    .map(|&k| state.loading_pct[k]),
            )
        })
        .collect()
}

/// Element of largest magnitude, keeping its sign (first one on ties).
pub fn max_abs_signed(values: impl IntoIterator<Item = f64>) -> f64 {
    values
        .into_iter()
        .fold(0.0, |best, v| if v.abs() > best.abs() { v } else { best })
}

/// FAS at one node and step.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct FasPoint {
    pub lam_p_plus: f64,
    pub lam_p_minus: f64,
    pub lam_q_plus: f64,
    pub lam_q_minus: f64,
}

impl FasPoint {
    /// Gate bits `z1..z4`: a channel is open iff its signal is nonzero.
    pub fn gates(&self) -> [bool; 4] {
        [
            self.lam_p_plus != 0.0,
            self.lam_p_minus != 0.0,
            self.lam_q_plus != 0.0,
            self.lam_q_minus != 0.0,
        ]
    }

    pub fn is_zero(&self) -> bool {
        self.gates().iter().all(|g| !g)
    }
}

/// Fraction in `[0, 1]` of the over-voltage droop at `v`.
pub fn over_voltage_fraction(v: f64, cfg: &FasConfig) -> f64 {
    let start = cfg.v_high_start();
    if v >= cfg.v_max {
        1.0
    } else if v > start {
        (v - start) / (cfg.v_max - start)
    } else {
        0.0
    }
}

/// Fraction in `[0, 1]` of the under-voltage droop at `v`.
pub fn under_voltage_fraction(v: f64, cfg: &FasConfig) -> f64 {
    let start = cfg.v_low_start();
    if v <= cfg.v_min {
        1.0
    } else if v < start {
        (start - v) / (start - cfg.v_min)
    } else {
        0.0
    }
}

/// Fraction in `[0, 1]` of the thermal droop at signed loading `t_pct`.
pub fn thermal_fraction(t_pct: f64, cfg: &FasConfig) -> f64 {
    let a = t_pct.abs();
    if a >= 100.0 {
        1.0
    } else if a > cfg.dt_perm {
        (a - cfg.dt_perm) / (100.0 - cfg.dt_perm)
    } else {
        0.0
    }
}

/// Droop evaluation for one node given its voltage, projected loading and
/// the node's four saturation levels `(vc_p, tc_p, vc_q, tc_q)`.
///
/// Under-voltage and positive (away from the substation) overload feed the
/// plus channels; over-voltage and reverse-flow overload feed the minus
/// channels.
pub fn fas_point(v: f64, t_pct: f64, levels: [f64; 4], cfg: &FasConfig) -> FasPoint {
    let [vc_p, tc_p, vc_q, tc_q] = levels;
    let up = under_voltage_fraction(v, cfg);
    let down = over_voltage_fraction(v, cfg);
    let th = thermal_fraction(t_pct, cfg);
    let (th_plus, th_minus) = if t_pct > 0.0 { (th, 0.0) } else { (0.0, th) };
    // `0.0 - x` rather than `-x` so an inactive channel is +0.0
    FasPoint {
        lam_p_plus: vc_p * up + tc_p * th_plus,
        lam_p_minus: 0.0 - (vc_p * down + tc_p * th_minus),
        lam_q_plus: vc_q * up + tc_q * th_plus,
        lam_q_minus: 0.0 - (vc_q * down + tc_q * th_minus),
    }
}

/// FAS over a horizon, indexed `[t][node]`.
#[derive(Debug, Clone, PartialEq)]
pub struct FasSignal {
    pub points: Vec<Vec<FasPoint>>,
}

impl FasSignal {
    pub fn horizon(&self) -> usize {
        self.points.len()
    }

    pub fn at(&self, t: usize) -> &[FasPoint] {
        &self.points[t]
    }

    /// True when any node has a nonzero channel at `t`.
    pub fn active_at(&self, t: usize) -> bool {
        self.points[t].iter().any(|p| !p.is_zero())
    }

    /// A copy with both reactive channels closed everywhere.
    pub fn without_reactive(&self) -> Self {
        FasSignal {
            points: self
                .points
                .iter()
                .map(|row| {
                    row.iter()
                        .map(|p| FasPoint {
                            lam_q_plus: 0.0,
                            lam_q_minus: 0.0,
                            ..*p
                        })
                        .collect()
                })
                .collect(),
        }
    }

    /// `t,node,lam_p_plus,lam_p_minus,lam_q_plus,lam_q_minus,z1,z2,z3,z4`
    pub fn write_csv<W: Write>(&self, w: W) -> std::io::Result<()> {
        let mut wr = csvio::writer(w);
        wr.write_record([
            "t",
            "node",
            "lam_p_plus",
            "lam_p_minus",
            "lam_q_plus",
            "lam_q_minus",
            "z1",
            "z2",
            "z3",
            "z4",
        ])?;
        for (t, row) in self.points.iter().enumerate() {
            for (i, p) in row.iter().enumerate() {
                let z = p.gates().map(|g| u8::from(g).to_string());
                wr.write_record([
                    t.to_string(),
                    i.to_string(),
                    csvio::num(p.lam_p_plus),
                    csvio::num(p.lam_p_minus),
                    csvio::num(p.lam_q_plus),
                    csvio::num(p.lam_q_minus),
                    z[0].clone(),
                    z[1].clone(),
                    z[2].clone(),
                    z[3].clone(),
                ])?;
            }
        }
        wr.flush()
    }
}

/// Evaluates the droop signals for every state.
pub fn compute_fas(
    net: &Network,
    states: &[NetworkState],
    levels: &SaturationLevels,
    cfg: &FasConfig,
) -> Result<FasSignal, FasError> {
    cfg.validate()?;
    if levels.num_nodes() != net.num_nodes() {
        return Err(FasError::Validation(format!(
            "saturation levels cover {} nodes, network has {}",
            levels.num_nodes(),
            net.num_nodes()
        )));
    }
    let points = crate::par::map_slice(states, |st| {
        let loading = project_loadings(net, st);
        (0..net.num_nodes())
            .map(|i| {
                fas_point(
                    st.v_mag[i],
                    loading[i],
                    [
                        levels.vc_p[i],
                        levels.tc_p[i],
                        levels.vc_q[i],
                        levels.tc_q[i],
                    ],
                    cfg,
                )
            })
            .collect()
    });
    Ok(FasSignal { points })
}

/// Flexibility and curtailment bounds at one node and step, in kW / kvar.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct EnvelopePoint {
    pub p_max: f64,
    pub p_min: f64,
    pub q_max: f64,
    pub q_min: f64,
    /// Upper bound on generation curtailment.
    pub gen_cap: f64,
    /// Upper bound on load curtailment.
    pub load_cap: f64,
}

/// Envelope over a horizon, indexed `[t][node]`.
#[derive(Debug, Clone, PartialEq)]
pub struct FlexEnvelope {
    pub points: Vec<Vec<EnvelopePoint>>,
}

impl FlexEnvelope {
    pub fn at(&self, t: usize) -> &[EnvelopePoint] {
        &self.points[t]
    }

    pub fn horizon(&self) -> usize {
        self.points.len()
    }
}

/// Ungated bounds at flexibility level `level_pct`: `±level·P^d` on the P
/// channels and `±level·Q^d` on the Q channels, for nodes that offer
/// flexibility. Curtailment caps are filled from the profiles.
pub fn raw_envelope(
    net: &Network,
    profiles: &Profiles,
    level_pct: f64,
) -> Result<FlexEnvelope, FasError> {
    if !(level_pct.is_finite() && level_pct >= 0.0) {
        return Err(FasError::Validation(format!(
            "flexibility level {level_pct} must be non-negative"
        )));
    }
    if profiles.num_nodes() != net.num_nodes() {
        return Err(FasError::Validation("profiles do not match network".into()));
    }
    let share = level_pct / 100.0;
    let points = (0..profiles.horizon())
        .map(|t| {
            net.nodes()
                .iter()
                .map(|node| {
                    let i = node.id;
                    let (p, q) = if node.has_flexibility {
                        (
                            share * profiles.p_load(i)[t],
                            share * profiles.q_load(i)[t].abs(),
                        )
                    } else {
                        (0.0, 0.0)
                    };
                    EnvelopePoint {
                        p_max: p,
                        p_min: -p,
                        q_max: q,
                        q_min: -q,
                        gen_cap: profiles.p_gen(i)[t],
                        load_cap: profiles.p_load(i)[t],
                    }
                })
                .collect()
        })
        .collect();
    Ok(FlexEnvelope { points })
}

/// Multiplies each raw bound by its gate bit and resets the curtailment caps
/// to the instantaneous load and generation.
pub fn gate_envelopes(
    fas: &FasSignal,
    raw: &FlexEnvelope,
    profiles: &Profiles,
) -> Result<FlexEnvelope, FasError> {
    if fas.horizon() != raw.horizon() || raw.horizon() != profiles.horizon() {
        return Err(FasError::Validation(format!(
            "horizon mismatch: fas {}, envelope {}, profiles {}",
            fas.horizon(),
            raw.horizon(),
            profiles.horizon()
        )));
    }
    let mut out = Vec::with_capacity(raw.horizon());
    for (t, (frow, rrow)) in fas.points.iter().zip(&raw.points).enumerate() {
        if frow.len() != rrow.len() || rrow.len() != profiles.num_nodes() {
            return Err(FasError::Validation(format!(
                "node count mismatch at t {t}"
            )));
        }
        let mut row = Vec::with_capacity(rrow.len());
        for (i, (f, r)) in frow.iter().zip(rrow).enumerate() {
            if r.p_max < 0.0 || r.q_max < 0.0 || r.p_min > 0.0 || r.q_min > 0.0 {
                return Err(FasError::Validation(format!(
                    "raw bounds at t {t}, node {i} have the wrong sign"
                )));
            }
            let [z1, z2, z3, z4] = f.gates().map(f64::from);
            row.push(EnvelopePoint {
                p_max: z1 * r.p_max,
                p_min: z2 * r.p_min,
                q_max: z3 * r.q_max,
                q_min: z4 * r.q_min,
                gen_cap: profiles.p_gen(i)[t],
                load_cap: profiles.p_load(i)[t],
            });
        }
        out.push(row);
    }
    Ok(FlexEnvelope { points: out })
}
