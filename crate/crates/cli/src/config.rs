use std::path::PathBuf;

use anyhow::{bail, Context};
use clap::ValueEnum;
use dnflex::fas::FasConfig;
use dnflex::rdopf::RdopfConfig;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Mode {
    Dispatch,
    ParetoSweep,
    NeedsAssessment,
    ReactiveStudy,
    FasOnly,
    TwinOnly,
}

impl Mode {
    pub fn name(self) -> &'static str {
        match self {
            Mode::Dispatch => "dispatch",
            Mode::ParetoSweep => "pareto-sweep",
            Mode::NeedsAssessment => "needs-assessment",
            Mode::ReactiveStudy => "reactive-study",
            Mode::FasOnly => "fas-only",
            Mode::TwinOnly => "twin-only",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase", deny_unknown_fields)]
pub enum ProfileSource {
    /// CSV in the `node_id,t_index,p_load_kw,q_load_kvar,p_gen_kw` layout.
    Path(PathBuf),
    Synth {
        seed: u64,
        scale: f64,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NvsConfig {
    pub seed: u64,
    pub scenarios: usize,
}

impl Default for NvsConfig {
    fn default() -> Self {
        NvsConfig {
            seed: 7,
            scenarios: 100,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScenarioConfig {
    /// `"builtin"` or a path to a network JSON file.
    pub network: String,
    pub profiles: ProfileSource,
    pub fas: FasConfig,
    pub rdopf: RdopfConfig,
    pub mode: Mode,
    /// Flexibility levels in percent.
    pub flex_levels: Vec<f64>,
    pub pf_set: Vec<f64>,
    /// Loss penalties of the Pareto sweep; empty means the default grid.
    pub lambda_grid: Vec<f64>,
    pub nvs: NvsConfig,
    pub out: PathBuf,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        ScenarioConfig {
            network: "builtin".into(),
            profiles: ProfileSource::Synth {
                seed: 1,
                scale: 1.0,
            },
            fas: FasConfig::default(),
            rdopf: RdopfConfig::default(),
            mode: Mode::Dispatch,
            flex_levels: vec![0.0, 25.0, 50.0, 75.0, 100.0],
            pf_set: dnflex::analysis::DEFAULT_PF_SET.to_vec(),
            lambda_grid: Vec::new(),
            nvs: NvsConfig::default(),
            out: PathBuf::from("out"),
        }
    }
}

impl ScenarioConfig {
    pub fn from_json(text: &str) -> anyhow::Result<Self> {
        let de = &mut serde_json::Deserializer::from_str(text);
        serde_path_to_error::deserialize(de).context("invalid scenario config")
    }

    pub fn validate(&self) -> anyhow::Result<()> {
        self.fas.validate()?;
        self.rdopf.validate()?;
        let needs_levels = matches!(
            self.mode,
            Mode::Dispatch | Mode::ParetoSweep | Mode::NeedsAssessment | Mode::ReactiveStudy
        );
        if needs_levels && self.flex_levels.is_empty() {
            bail!("mode {} needs at least one flex level", self.mode.name());
        }
        if let Some(l) = self
            .flex_levels
            .iter()
            .find(|l| !(l.is_finite() && (0.0..=100.0).contains(*l)))
        {
            bail!("flex level {l} outside [0, 100]");
        }
        if self.mode == Mode::ReactiveStudy && self.pf_set.is_empty() {
            bail!("mode reactive-study needs a non-empty pf_set");
        }
        if let ProfileSource::Synth { scale, .. } = self.profiles {
            if !(scale > 0.0 && scale.is_finite()) {
                bail!("profile scale must be positive");
            }
        }
        if self.nvs.scenarios == 0 {
            bail!("nvs.scenarios must be positive");
        }
        Ok(())
    }
}

/// Parses `"0,25,50"`.
pub fn parse_list(s: &str) -> anyhow::Result<Vec<f64>> {
    s.split(',')
        .map(|x| {
            x.trim()
                .parse::<f64>()
                .with_context(|| format!("'{x}' is not a number"))
        })
        .collect()
}
