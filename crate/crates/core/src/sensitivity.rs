//! Nodal voltage sensitivity by perturb-and-observe Monte Carlo.

use std::io::Write;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::csvio;
use crate::network::{Network, Profiles};
use crate::par;
use crate::powerflow::{solve_power_flow, NetworkState, PowerFlowError};

/// Default perturbation: 1 kW / 1 kvar on the 100 kVA base.
pub const DEFAULT_DELTA_PU: f64 = 0.01;
pub const DEFAULT_SCENARIOS: usize = 100;
/// Largest tolerated share of failed scenarios.
pub const MAX_FAILED_FRACTION: f64 = 0.2;

#[derive(Debug, Clone, thiserror::Error)]
pub enum SensitivityError {
    #[error("perturbation must be nonzero")]
    ZeroPerturbation,
    #[error("invalid input: {0}")]
    Input(String),
    #[error("scenario {scenario}: {source}")]
    Scenario {
        scenario: usize,
        #[source]
        source: PowerFlowError,
    },
    #[error("{failed} of {total} scenarios failed")]
    TooManyFailures { failed: usize, total: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Channel {
    Active,
    Reactive,
}

/// `|V_i^k − V_i^0| / |delta|` for every node `i` after adding `delta` pu of
/// load (active or reactive) at `target`.
pub fn perturb_observe(
    net: &Network,
    base_injections: &[Complex64],
    target: usize,
    delta: f64,
    channel: Channel,
) -> Result<Vec<f64>, SensitivityError> {
    if delta == 0.0 || !delta.is_finite() {
        return Err(SensitivityError::ZeroPerturbation);
    }
    if target >= net.num_nodes() {
        return Err(SensitivityError::Input(format!("unknown node {target}")));
    }
    let base =
        solve_power_flow(net, base_injections).map_err(|source| SensitivityError::Scenario {
            scenario: 0,
            source,
        })?;
    observe(net, &base, base_injections, target, delta, channel).map_err(|source| {
        SensitivityError::Scenario {
            scenario: 0,
            source,
        }
    })
}

fn observe(
    net: &Network,
    base: &NetworkState,
    base_injections: &[Complex64],
    target: usize,
    delta: f64,
    channel: Channel,
) -> Result<Vec<f64>, PowerFlowError> {
    if target == net.slack() {
        return Ok(vec![0.0; net.num_nodes()]);
    }
    let mut inj = base_injections.to_vec();
    match channel {
        Channel::Active => inj[target].re -= delta,
        Channel::Reactive => inj[target].im -= delta,
    }
    let pert = solve_power_flow(net, &inj)?;
    Ok(pert
        .v_mag
        .iter()
        .zip(&base.v_mag)
        .map(|(a, b)| (a - b).abs() / delta.abs())
        .collect())
}

/// Source of base-case loading scenarios. Scenario `k` must depend only on
/// `k` so that estimates do not depend on evaluation order.
pub trait ScenarioSource: Sync {
    fn scenario(&self, k: usize) -> Vec<Complex64>;
}

/// Draws a random profile step and scales its loads by a log-uniform factor
/// in `[10^log10_min, 10^log10_max]`. PV is left out.
#[derive(Debug, Clone)]
pub struct LogUniformSampler<'a> {
    pub profiles: &'a Profiles,
    pub s_base_kva: f64,
    pub seed: u64,
    pub log10_min: f64,
    pub log10_max: f64,
}

impl<'a> LogUniformSampler<'a> {
    /// Three decades, from 10^-2.7 up to twice the profile.
    pub fn new(net: &Network, profiles: &'a Profiles, seed: u64) -> Self {
        LogUniformSampler {
            profiles,
            s_base_kva: net.bases().s_base_kva,
            seed,
            log10_min: -2.7,
            log10_max: 0.3,
        }
    }
}

impl ScenarioSource for LogUniformSampler<'_> {
    fn scenario(&self, k: usize) -> Vec<Complex64> {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(k as u64);
        let t = rng.gen_range(0..self.profiles.horizon());
        let factor = 10f64.powf(rng.gen_range(self.log10_min..self.log10_max));
        (0..self.profiles.num_nodes())
            .map(|i| {
                -Complex64::new(self.profiles.p_load(i)[t], self.profiles.q_load(i)[t]) * factor
                    / self.s_base_kva
            })
            .collect()
    }
}

/// Mean nodal sensitivities and their per-scenario samples.
#[derive(Debug, Clone, PartialEq)]
pub struct SensitivityTable {
    /// Ψ per node (pu voltage per pu active power).
    pub psi: Vec<f64>,
    /// β per node (pu voltage per pu reactive power).
    pub beta: Vec<f64>,
    pub num_scenarios: usize,
    pub failed_scenarios: usize,
    /// `psi_samples[k][x]` for each successful scenario `k`.
    pub psi_samples: Vec<Vec<f64>>,
    pub beta_samples: Vec<Vec<f64>>,
}

impl SensitivityTable {
    pub fn write_csv<W: Write>(&self, w: W) -> std::io::Result<()> {
        let mut wr = csvio::writer(w);
        wr.write_record(["node", "psi", "beta"])?;
        for (i, (p, b)) in self.psi.iter().zip(&self.beta).enumerate() {
            wr.write_record([i.to_string(), csvio::num(*p), csvio::num(*b)])?;
        }
        wr.flush()
    }

    /// Long format `scenario,node,channel,value` for box plots.
    pub fn write_samples_csv<W: Write>(&self, w: W) -> std::io::Result<()> {
        let mut wr = csvio::writer(w);
        wr.write_record(["scenario", "node", "channel", "value"])?;
        for (k, (ps, bs)) in self.psi_samples.iter().zip(&self.beta_samples).enumerate() {
            for (i, (p, b)) in ps.iter().zip(bs).enumerate() {
                wr.write_record([k.to_string(), i.to_string(), "p".into(), csvio::num(*p)])?;
                wr.write_record([k.to_string(), i.to_string(), "q".into(), csvio::num(*b)])?;
            }
        }
        wr.flush()
    }
}

/// Monte Carlo estimate over `u` scenarios with the default 1 kW / 1 kvar
/// perturbation.
pub fn estimate_nvs(
    net: &Network,
    sampler: &dyn ScenarioSource,
    u: usize,
) -> Result<SensitivityTable, SensitivityError> {
    estimate_nvs_with_delta(net, sampler, u, DEFAULT_DELTA_PU)
}

pub fn estimate_nvs_with_delta(
    net: &Network,
    sampler: &dyn ScenarioSource,
    u: usize,
    delta: f64,
) -> Result<SensitivityTable, SensitivityError> {
    if u == 0 {
        return Err(SensitivityError::Input("need at least one scenario".into()));
    }
    if delta == 0.0 || !delta.is_finite() {
        return Err(SensitivityError::ZeroPerturbation);
    }
    let n = net.num_nodes();
    let targets: Vec<usize> = net.flexible_nodes().collect();

    let runs = par::map_range(u, |k| -> Result<(Vec<f64>, Vec<f64>), PowerFlowError> {
        let inj = sampler.scenario(k);
        if inj.len() != n {
            return Err(PowerFlowError::Input(format!(
                "scenario has {} entries for {n} nodes",
                inj.len()
            )));
        }
        let base = solve_power_flow(net, &inj)?;
        let mut psi = vec![0.0; n];
        let mut beta = vec![0.0; n];
        for &x in &targets {
            psi[x] = observe(net, &base, &inj, x, delta, Channel::Active)?
                .iter()
                .sum();
            beta[x] = observe(net, &base, &inj, x, delta, Channel::Reactive)?
                .iter()
                .sum();
        }
        Ok((psi, beta))
    });

    let mut psi_samples = Vec::with_capacity(u);
    let mut beta_samples = Vec::with_capacity(u);
    let mut failed = 0;
    for (k, run) in runs.into_iter().enumerate() {
        match run {
            Ok((p, b)) => {
                psi_samples.push(p);
                beta_samples.push(b);
            }
            Err(e) => {
                log::warn!("sensitivity scenario {k} skipped: {e}");
                failed += 1;
            }
        }
    }
    if failed as f64 > MAX_FAILED_FRACTION * u as f64 || psi_samples.is_empty() {
        return Err(SensitivityError::TooManyFailures { failed, total: u });
    }
    let ok = psi_samples.len() as f64;
    let mean = |samples: &[Vec<f64>]| -> Vec<f64> {
        (0..n)
            .map(|i| samples.iter().map(|s| s[i]).sum::<f64>() / ok)
            .collect()
    };
    Ok(SensitivityTable {
        psi: mean(&psi_samples),
        beta: mean(&beta_samples),
        num_scenarios: u,
        failed_scenarios: failed,
        psi_samples,
        beta_samples,
    })
}
