//! The full pipeline on one feeder and one set of profiles: digital twin,
//! sensitivities, FAS, then dispatch at any flexibility level.

use crate::fas::{
    compute_fas, gate_envelopes, raw_envelope, saturation_levels, FasConfig, FasSignal,
    FlexEnvelope, SaturationLevels,
};
use crate::network::{Network, Profiles};
use crate::powerflow::{simulate_horizon, NetworkState};
use crate::rdopf::{
    dispatch_horizon, verify_ac_feasibility, DispatchResult, RdopfConfig, StepData,
    VerificationReport,
};
use crate::sensitivity::{estimate_nvs, LogUniformSampler, SensitivityTable};
use crate::Result;

#[derive(Debug, Clone)]
pub struct Scenario {
    pub network: Network,
    pub profiles: Profiles,
    pub fas_cfg: FasConfig,
    pub rdopf_cfg: RdopfConfig,
    /// Twin states, one per step.
    pub states: Vec<NetworkState>,
    pub sensitivity: SensitivityTable,
    pub levels: SaturationLevels,
    pub fas: FasSignal,
}

impl Scenario {
    /// Runs the twin and estimates sensitivities with `nvs_scenarios`
    /// draws of the seeded sampler.
    pub fn prepare(
        network: Network,
        profiles: Profiles,
        fas_cfg: FasConfig,
        rdopf_cfg: RdopfConfig,
        nvs_seed: u64,
        nvs_scenarios: usize,
    ) -> Result<Self> {
        profiles.validate_for(&network)?;
        let sampler = LogUniformSampler::new(&network, &profiles, nvs_seed);
        let sensitivity = estimate_nvs(&network, &sampler, nvs_scenarios)?;
        Self::with_sensitivity(network, profiles, fas_cfg, rdopf_cfg, sensitivity)
    }

    /// Like [`Scenario::prepare`] with a precomputed sensitivity table.
    pub fn with_sensitivity(
        network: Network,
        profiles: Profiles,
        fas_cfg: FasConfig,
        rdopf_cfg: RdopfConfig,
        sensitivity: SensitivityTable,
    ) -> Result<Self> {
        profiles.validate_for(&network)?;
        rdopf_cfg.validate()?;
        let states = simulate_horizon(&network, &profiles)?;
        let levels = saturation_levels(&sensitivity, &fas_cfg)?;
        let fas = compute_fas(&network, &states, &levels, &fas_cfg)?;
        Ok(Scenario {
            network,
            profiles,
            fas_cfg,
            rdopf_cfg,
            states,
            sensitivity,
            levels,
            fas,
        })
    }

    pub fn horizon(&self) -> usize {
        self.profiles.horizon()
    }

    /// Gated envelope at `level_pct` for `fas`.
    pub fn envelope_for(&self, fas: &FasSignal, level_pct: f64) -> Result<FlexEnvelope> {
        let raw = raw_envelope(&self.network, &self.profiles, level_pct)?;
        Ok(gate_envelopes(fas, &raw, &self.profiles)?)
    }

    pub fn envelope(&self, level_pct: f64) -> Result<FlexEnvelope> {
        self.envelope_for(&self.fas, level_pct)
    }

    /// Dispatches every step at `level_pct` with `cfg`.
    pub fn dispatch(&self, level_pct: f64, cfg: &RdopfConfig) -> Result<Vec<DispatchResult>> {
        self.dispatch_with(&self.fas, level_pct, cfg)
    }

    /// Dispatch with both reactive channels closed.
    pub fn dispatch_without_reactive(
        &self,
        level_pct: f64,
        cfg: &RdopfConfig,
    ) -> Result<Vec<DispatchResult>> {
        self.dispatch_with(&self.fas.without_reactive(), level_pct, cfg)
    }

    fn dispatch_with(
        &self,
        fas: &FasSignal,
        level_pct: f64,
        cfg: &RdopfConfig,
    ) -> Result<Vec<DispatchResult>> {
        let env = self.envelope_for(fas, level_pct)?;
        Ok(dispatch_horizon(
            &self.network,
            &self.profiles,
            fas,
            &env,
            cfg,
        )?)
    }

    /// Replays each result through a power flow.
    pub fn replay(
        &self,
        results: &[DispatchResult],
        cfg: &RdopfConfig,
    ) -> Result<Vec<VerificationReport>> {
        let env = self.envelope(0.0)?;
        let reports = crate::par::try_map_range(results.len(), |k| {
            let step = StepData::from_horizon(&self.profiles, &self.fas, &env, results[k].t);
            verify_ac_feasibility(&self.network, &results[k], &step, cfg)
        })?;
        Ok(reports)
    }

    /// Same feeder with reactive loads rebuilt from `pf`. The twin and FAS
    /// are recomputed; the sensitivities are kept.
    pub fn with_power_factor(&self, pf: f64) -> Result<Self> {
        let profiles = self.profiles.with_power_factor(pf)?;
        Self::with_sensitivity(
            self.network.clone(),
            profiles,
            self.fas_cfg,
            self.rdopf_cfg.clone(),
            self.sensitivity.clone(),
        )
    }
}
