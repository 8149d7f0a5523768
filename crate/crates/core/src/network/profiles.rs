use std::io::{Read, Write};

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Deserialize;

use super::{Network, NetworkError};
use crate::csvio;

/// Per-node load and PV series on a 15-minute grid, in kW / kvar.
#[derive(Debug, Clone, PartialEq)]
pub struct Profiles {
    p_load: Vec<Vec<f64>>,
    q_load: Vec<Vec<f64>>,
    p_gen: Vec<Vec<f64>>,
    seed: Option<u64>,
}

impl Profiles {
    /// Builds profiles from per-node series (outer index = node).
    pub fn new(
        p_load: Vec<Vec<f64>>,
        q_load: Vec<Vec<f64>>,
        p_gen: Vec<Vec<f64>>,
        seed: Option<u64>,
    ) -> Result<Self, NetworkError> {
        let n = p_load.len();
        if q_load.len() != n || p_gen.len() != n {
            return Err(NetworkError::Validation(
                "profile series disagree on node count".into(),
            ));
        }
        let t = p_load.first().map_or(0, Vec::len);
        for node in 0..n {
            if p_load[node].len() != t || q_load[node].len() != t || p_gen[node].len() != t {
                return Err(NetworkError::Validation(format!(
                    "node {node}: every series must have length {t}"
                )));
            }
            for k in 0..t {
                let (p, q, g) = (p_load[node][k], q_load[node][k], p_gen[node][k]);
                if !(p.is_finite() && q.is_finite() && g.is_finite()) {
                    return Err(NetworkError::Validation(format!(
                        "node {node}, t {k}: non-finite value"
                    )));
                }
                if p < 0.0 || g < 0.0 {
                    return Err(NetworkError::Validation(format!(
                        "node {node}, t {k}: load and generation must be non-negative"
                    )));
                }
            }
        }
        Ok(Profiles {
            p_load,
            q_load,
            p_gen,
            seed,
        })
    }

    /// Checks that the profiles fit `net` and put nothing on non-prosumers.
    pub fn validate_for(&self, net: &Network) -> Result<(), NetworkError> {
        if self.num_nodes() != net.num_nodes() {
            return Err(NetworkError::Validation(format!(
                "profiles cover {} nodes, network has {}",
                self.num_nodes(),
                net.num_nodes()
            )));
        }
        if self.horizon() == 0 {
            return Err(NetworkError::Validation("profiles are empty".into()));
        }
        for node in net.nodes() {
            if node.is_prosumer() {
                continue;
            }
            let i = node.id;
            let any = (0..self.horizon()).any(|t| {
                self.p_load[i][t] != 0.0 || self.q_load[i][t] != 0.0 || self.p_gen[i][t] != 0.0
            });
            if any {
                return Err(NetworkError::Validation(format!(
                    "node {i} is not a prosumer but has nonzero profile entries"
                )));
            }
        }
        Ok(())
    }

    pub fn horizon(&self) -> usize {
        self.p_load.first().map_or(0, Vec::len)
    }

    pub fn num_nodes(&self) -> usize {
        self.p_load.len()
    }

    pub fn seed(&self) -> Option<u64> {
        self.seed
    }

    pub fn p_load(&self, node: usize) -> &[f64] {
        &self.p_load[node]
    }

    pub fn q_load(&self, node: usize) -> &[f64] {
        &self.q_load[node]
    }

    pub fn p_gen(&self, node: usize) -> &[f64] {
        &self.p_gen[node]
    }

    /// Per-node `(P^d, Q^d, P^g)` at step `t`.
    pub fn at(&self, t: usize) -> Vec<(f64, f64, f64)> {
        (0..self.num_nodes())
            .map(|i| (self.p_load[i][t], self.q_load[i][t], self.p_gen[i][t]))
            .collect()
    }

    /// Net nodal injections at `t` in per unit (generation positive).
    pub fn injections_pu(&self, t: usize, s_base_kva: f64) -> Vec<Complex64> {
        (0..self.num_nodes())
            .map(|i| {
                Complex64::new(self.p_gen[i][t] - self.p_load[i][t], -self.q_load[i][t])
                    / s_base_kva
            })
            .collect()
    }

    /// Sum over nodes of `P^d − P^g` per step, in kW.
    pub fn aggregate_net_load(&self) -> Vec<f64> {
        (0..self.horizon())
            .map(|t| {
                (0..self.num_nodes())
                    .map(|i| self.p_load[i][t] - self.p_gen[i][t])
                    .sum()
            })
            .collect()
    }

    /// Copy with `Q^d = P^d · tan(arccos(pf))`.
    pub fn with_power_factor(&self, pf: f64) -> Result<Self, NetworkError> {
        if !(pf > 0.0 && pf <= 1.0) {
            return Err(NetworkError::Validation(format!(
                "power factor {pf} outside (0, 1]"
            )));
        }
        let ratio = q_over_p(pf);
        let mut out = self.clone();
        for (q, p) in out.q_load.iter_mut().zip(&self.p_load) {
            for (qk, pk) in q.iter_mut().zip(p) {
                *qk = pk * ratio;
            }
        }
        Ok(out)
    }

    /// Copy with loads (P and Q) multiplied by `alpha`; PV untouched.
    pub fn with_load_scale(&self, alpha: f64) -> Self {
        let mut out = self.clone();
        for series in out.p_load.iter_mut().chain(out.q_load.iter_mut()) {
            for v in series.iter_mut() {
                *v *= alpha;
            }
        }
        out
    }

    /// Profiles restricted to the steps in `steps`.
    pub fn select_steps(&self, steps: &[usize]) -> Self {
        let pick = |s: &Vec<Vec<f64>>| -> Vec<Vec<f64>> {
            s.iter()
                .map(|row| steps.iter().map(|&t| row[t]).collect())
                .collect()
        };
        Profiles {
            p_load: pick(&self.p_load),
            q_load: pick(&self.q_load),
            p_gen: pick(&self.p_gen),
            seed: self.seed,
        }
    }

    pub fn write_csv<W: Write>(&self, w: W) -> std::io::Result<()> {
        let mut wr = csvio::writer(w);
        wr.write_record(["node_id", "t_index", "p_load_kw", "q_load_kvar", "p_gen_kw"])?;
        for i in 0..self.num_nodes() {
            for t in 0..self.horizon() {
                wr.write_record([
                    i.to_string(),
                    t.to_string(),
                    csvio::num(self.p_load[i][t]),
                    csvio::num(self.q_load[i][t]),
                    csvio::num(self.p_gen[i][t]),
                ])?;
            }
        }
        wr.flush()
    }

    /// Reads the long-format profile CSV. Rows may appear in any order but
    /// every `(node, t)` pair for `0..num_nodes × 0..T` must be present once.
    pub fn read_csv<R: Read>(r: R, num_nodes: usize) -> Result<Self, NetworkError> {
        #[derive(Deserialize)]
        struct Row {
            node_id: usize,
            t_index: usize,
            p_load_kw: f64,
            q_load_kvar: f64,
            p_gen_kw: f64,
        }
        let mut rows = Vec::new();
        let mut rdr = csv::Reader::from_reader(r);
        for (line, rec) in rdr.deserialize::<Row>().enumerate() {
            let row = rec.map_err(|e| NetworkError::Parse {
                field: format!("profiles row {}", line + 1),
                message: e.to_string(),
            })?;
            rows.push(row);
        }
        let horizon = rows.iter().map(|r| r.t_index + 1).max().unwrap_or(0);
        let mut seen = vec![vec![false; horizon]; num_nodes];
        let mut p = vec![vec![0.0; horizon]; num_nodes];
        let mut q = p.clone();
        let mut g = p.clone();
        for row in rows {
            if row.node_id >= num_nodes {
                return Err(NetworkError::Validation(format!(
                    "profiles reference unknown node {}",
                    row.node_id
                )));
            }
            let cell = &mut seen[row.node_id][row.t_index];
            if *cell {
                return Err(NetworkError::Validation(format!(
                    "duplicate profile row for node {} t {}",
                    row.node_id, row.t_index
                )));
            }
            *cell = true;
            p[row.node_id][row.t_index] = row.p_load_kw;
            q[row.node_id][row.t_index] = row.q_load_kvar;
            g[row.node_id][row.t_index] = row.p_gen_kw;
        }
        if let Some((i, t)) = (0..num_nodes)
            .flat_map(|i| (0..horizon).map(move |t| (i, t)))
            .find(|&(i, t)| !seen[i][t])
        {
            return Err(NetworkError::Validation(format!(
                "missing profile row for node {i} t {t}"
            )));
        }
        Profiles::new(p, q, g, None)
    }
}

/// `tan(arccos(pf))`.
pub(crate) fn q_over_p(pf: f64) -> f64 {
    pf.acos().tan()
}

/// Knobs of the synthetic day generator.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SynthConfig {
    pub seed: u64,
    /// Multiplier on all loads (PV is not scaled).
    pub scale: f64,
    /// Clear-sky PV peak as a fraction of installed kWp.
    pub pv_peak_fraction: f64,
    /// Lagging power factor used to derive reactive load.
    pub power_factor: f64,
    pub horizon: usize,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            seed: 1,
            scale: 1.0,
            pv_peak_fraction: 0.6,
            power_factor: 0.98,
            horizon: 96,
        }
    }
}

/// Seeded synthetic day for every prosumer of `net` with default knobs.
///
/// # Panics
/// If `scale` is negative or not finite.
pub fn synth_profiles(net: &Network, seed: u64, scale: f64) -> Profiles {
    synth_profiles_with(
        net,
        &SynthConfig {
            seed,
            scale,
            ..SynthConfig::default()
        },
    )
}

const SUNRISE_H: f64 = 6.75;
const SUNSET_H: f64 = 20.5;

/// Seeded synthetic day.
///
/// Each prosumer gets a base load with morning and evening bumps, a
/// heat-pump night block, multiplicative noise and one evening spike that
/// hits exactly its peak load. PV is a clear-sky bell scaled to kWp.
pub fn synth_profiles_with(net: &Network, cfg: &SynthConfig) -> Profiles {
    assert!(
        cfg.scale.is_finite() && cfg.scale >= 0.0,
        "scale must be finite and non-negative"
    );
    let n = net.num_nodes();
    let steps = cfg.horizon;
    let hours: Vec<f64> = (0..steps).map(|t| t as f64 * 0.25 + 0.125).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let ratio = q_over_p(cfg.power_factor);

    let mut p_load = vec![vec![0.0; steps]; n];
    let mut q_load = vec![vec![0.0; steps]; n];
    let mut p_gen = vec![vec![0.0; steps]; n];

    for node in net.nodes().iter().filter(|n| n.is_prosumer()) {
        let i = node.id;
        let t_morning = 7.5 + rng.gen_range(-0.75..0.75);
        let t_evening = 19.0 + rng.gen_range(-1.0..1.0);
        let base = 0.10 + 0.03 * rng.gen::<f64>();
        let hp_share = node.hp_kw / node.peak_load_kw;

        let mut shape: Vec<f64> = hours
            .iter()
            .map(|&h| {
                let mut s =
                    base + 0.35 * 0.7 * gauss(h, t_morning, 1.0) + 0.35 * gauss(h, t_evening, 1.5);
                if !(6.5..=21.5).contains(&h) {
                    s += hp_share * 0.5;
                }
                s * (1.0 + 0.05 * rng.gen_range(-1.0..1.0))
            })
            .collect();
        if steps > 0 {
            let spike_h: f64 = rng.gen_range(20.25..21.5);
            let k = ((spike_h * 4.0).round() as usize).min(steps - 1);
            let top = shape.iter().cloned().fold(0.0, f64::max);
            shape[k] = top.max(1.0);
            let top = shape.iter().cloned().fold(0.0, f64::max);
            for s in shape.iter_mut() {
                *s /= top;
            }
        }
        for t in 0..steps {
            let p = shape[t] * node.peak_load_kw * cfg.scale;
            p_load[i][t] = p;
            q_load[i][t] = p * ratio;
            p_gen[i][t] = node.pv_kwp * cfg.pv_peak_fraction * clear_sky(hours[t]);
        }
    }
    Profiles::new(p_load, q_load, p_gen, Some(cfg.seed)).expect("generator output is valid")
}

fn gauss(h: f64, mu: f64, sd: f64) -> f64 {
    (-0.5 * ((h - mu) / sd).powi(2)).exp()
}

fn clear_sky(h: f64) -> f64 {
    let x = std::f64::consts::PI * (h - SUNRISE_H) / (SUNSET_H - SUNRISE_H);
    // sin is negative for the night hours on either side of the day
    x.sin().max(0.0).powf(1.3)
}
