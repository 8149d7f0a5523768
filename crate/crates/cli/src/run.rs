use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::Context;
use dnflex::analysis::{
    compliance, default_lambda_grid, duals_vs_fas, needs_assessment, reactive_impact,
    sweep_loss_penalty, write_assessment_json, write_fas_vs_duals_csv, write_heatmap_csv,
    write_pareto_csv, write_reactive_csv, AssessmentReport, ComplianceLimits,
};
use dnflex::network::{builtin_network, parse_network, synth_profiles, Network, Profiles};
use dnflex::powerflow::{simulate_horizon, write_branch_csv, write_voltage_csv};
use dnflex::rdopf::{write_dispatch_csv, DispatchResult};
use dnflex::scenario::Scenario;
use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::config::{Mode, ProfileSource, ScenarioConfig};

pub const EXIT_USAGE: i32 = 2;
pub const EXIT_SOLVE: i32 = 3;
pub const EXIT_VERIFY: i32 = 4;
pub const EXIT_IO: i32 = 5;

#[derive(Debug)]
pub struct Failure {
    pub stage: &'static str,
    pub code: i32,
    pub error: anyhow::Error,
}

trait Stage<T> {
    fn stage(self, stage: &'static str, code: i32) -> Result<T, Failure>;
}

impl<T, E: Into<anyhow::Error>> Stage<T> for Result<T, E> {
    fn stage(self, stage: &'static str, code: i32) -> Result<T, Failure> {
        self.map_err(|e| Failure {
            stage,
            code,
            error: e.into(),
        })
    }
}

/// Artifacts are written as `<name>.partial` and renamed once the whole run
/// succeeded.
struct Artifacts {
    dir: PathBuf,
    names: Vec<String>,
}

impl Artifacts {
    fn write<F>(&mut self, name: &str, f: F) -> Result<(), Failure>
    where
        F: FnOnce(&mut BufWriter<File>) -> std::io::Result<()>,
    {
        let path = self.dir.join(format!("{name}.partial"));
        let res = File::create(&path).and_then(|file| {
            let mut w = BufWriter::new(file);
            f(&mut w)?;
            w.flush()
        });
        res.with_context(|| format!("writing {}", path.display()))
            .stage("write", EXIT_IO)?;
        self.names.push(name.to_string());
        Ok(())
    }

    fn commit(&self) -> Result<(), Failure> {
        for name in &self.names {
            let from = self.dir.join(format!("{name}.partial"));
            fs::rename(&from, self.dir.join(name))
                .with_context(|| format!("renaming {}", from.display()))
                .stage("write", EXIT_IO)?;
        }
        Ok(())
    }
}

#[derive(Serialize)]
struct Versions {
    dnflex: &'static str,
    dnflex_cli: &'static str,
}

#[derive(Serialize)]
struct Manifest<'a> {
    status: &'static str,
    mode: &'static str,
    exit_code: i32,
    failed_stage: Option<&'static str>,
    error: Option<String>,
    input_hash: String,
    profile_seed: Option<u64>,
    nvs_seed: u64,
    versions: Versions,
    parallel: bool,
    wall_time_s: f64,
    artifacts: Vec<String>,
    config: &'a ScenarioConfig,
}

fn level_tag(level: f64) -> String {
    format!("{level}")
}

fn load_inputs(cfg: &ScenarioConfig) -> Result<(Network, Profiles), Failure> {
    let net = if cfg.network == "builtin" {
        builtin_network()
    } else {
        parse_network(&cfg.network).stage("input", EXIT_USAGE)?
    };
    let profiles = match &cfg.profiles {
        ProfileSource::Synth { seed, scale } => synth_profiles(&net, *seed, *scale),
        ProfileSource::Path(p) => {
            let file = File::open(p)
                .with_context(|| format!("opening {}", p.display()))
                .stage("input", EXIT_IO)?;
            Profiles::read_csv(file, net.num_nodes()).stage("input", EXIT_USAGE)?
        }
    };
    profiles.validate_for(&net).stage("input", EXIT_USAGE)?;
    Ok((net, profiles))
}

/// SHA-256 over the effective config (without the output directory), the
/// network JSON and the profile CSV.
fn input_hash(cfg: &ScenarioConfig, net: &Network, profiles: &Profiles) -> String {
    let mut c = cfg.clone();
    c.out = PathBuf::new();
    let mut h = Sha256::new();
    h.update(serde_json::to_vec(&c).expect("config serializes"));
    h.update(net.to_json_string().as_bytes());
    let mut buf = Vec::new();
    profiles.write_csv(&mut buf).expect("in-memory write");
    h.update(&buf);
    hex::encode(h.finalize())
}

fn assess(
    sc: &Scenario,
    level: f64,
    results: &[DispatchResult],
) -> Result<AssessmentReport, Failure> {
    let reports = sc
        .replay(results, &sc.rdopf_cfg)
        .stage("verify", EXIT_VERIFY)?;
    if let Some(r) = reports.iter().find(|r| !r.pass) {
        return Err(Failure {
            stage: "verify",
            code: EXIT_VERIFY,
            error: anyhow::anyhow!(
                "flex level {level}: dispatch at step {} violates limits (voltage {:.3e} pu, loading {:.2}%)",
                r.state.t,
                r.max_voltage_violation,
                r.max_loading_pct
            ),
        });
    }
    let states: Vec<_> = reports.into_iter().map(|r| r.state).collect();
    needs_assessment(
        results,
        &states,
        &sc.fas,
        &sc.rdopf_cfg,
        sc.network.slack(),
        &ComplianceLimits::from(&sc.fas_cfg),
    )
    .stage("assessment", EXIT_SOLVE)
}

fn run_stages(
    cfg: &ScenarioConfig,
    net: Network,
    profiles: Profiles,
    art: &mut Artifacts,
) -> Result<(), Failure> {
    if cfg.mode == Mode::TwinOnly {
        log::info!("simulating twin");
        let states = simulate_horizon(&net, &profiles).stage("twin", EXIT_SOLVE)?;
        art.write("voltages.csv", |w| write_voltage_csv(&states, w))?;
        art.write("branches.csv", |w| write_branch_csv(&net, &states, w))?;
        return Ok(());
    }

    log::info!("twin, sensitivities and FAS");
    let sc = Scenario::prepare(
        net,
        profiles,
        cfg.fas,
        cfg.rdopf.clone(),
        cfg.nvs.seed,
        cfg.nvs.scenarios,
    )
    .stage("prepare", EXIT_SOLVE)?;
    art.write("voltages.csv", |w| write_voltage_csv(&sc.states, w))?;
    art.write("branches.csv", |w| {
        write_branch_csv(&sc.network, &sc.states, w)
    })?;
    art.write("sensitivity.csv", |w| sc.sensitivity.write_csv(w))?;
    art.write("fas.csv", |w| sc.fas.write_csv(w))?;
    let limits = ComplianceLimits::from(&sc.fas_cfg);
    let nominal = compliance(&sc.states, sc.network.slack(), &limits);

    match cfg.mode {
        Mode::TwinOnly => unreachable!(),
        Mode::FasOnly => {
            art.write("nvs_samples.csv", |w| sc.sensitivity.write_samples_csv(w))?;
        }
        Mode::Dispatch | Mode::NeedsAssessment => {
            let mut reports = Vec::new();
            for &level in &cfg.flex_levels {
                log::info!("dispatch at {level}% flexibility");
                let results = sc
                    .dispatch(level, &sc.rdopf_cfg)
                    .stage("dispatch", EXIT_SOLVE)?;
                let tag = level_tag(level);
                art.write(&format!("dispatch_{tag}.csv"), |w| {
                    write_dispatch_csv(&results, w)
                })?;
                let report = assess(&sc, level, &results)?;
                if cfg.mode == Mode::NeedsAssessment {
                    for (name, m) in [
                        ("r_up", &report.r_up),
                        ("r_down", &report.r_down),
                        ("c_load", &report.c_load),
                        ("c_gen", &report.c_gen),
                    ] {
                        art.write(&format!("heatmap_{name}_{tag}.csv"), |w| {
                            write_heatmap_csv(m, w)
                        })?;
                    }
                    // duals carry no loss component when compared to the FAS
                    let mut dual_cfg = sc.rdopf_cfg.clone();
                    dual_cfg.lambda_loss = 0.0;
                    let plain = sc
                        .dispatch(level, &dual_cfg)
                        .stage("dispatch", EXIT_SOLVE)?;
                    let rows = duals_vs_fas(&plain, &sc.fas).stage("assessment", EXIT_SOLVE)?;
                    art.write(&format!("fas_vs_duals_{tag}.csv"), |w| {
                        write_fas_vs_duals_csv(&rows, w)
                    })?;
                }
                reports.push((level, report));
            }
            art.write("assessment.json", |w| {
                write_assessment_json(&nominal, &reports, w)
            })?;
        }
        Mode::ParetoSweep => {
            let grid = if cfg.lambda_grid.is_empty() {
                default_lambda_grid()
            } else {
                cfg.lambda_grid.clone()
            };
            for &level in &cfg.flex_levels {
                log::info!("loss-penalty sweep at {level}% flexibility");
                let curve = sweep_loss_penalty(&sc, &grid, level).stage("sweep", EXIT_SOLVE)?;
                art.write(&format!("pareto_{}.csv", level_tag(level)), |w| {
                    write_pareto_csv(&curve, w)
                })?;
            }
        }
        Mode::ReactiveStudy => {
            log::info!("reactive study");
            let r = reactive_impact(&sc, &cfg.pf_set, &cfg.flex_levels)
                .stage("reactive", EXIT_SOLVE)?;
            art.write("reactive.csv", |w| write_reactive_csv(&r, w))?;
        }
    }
    Ok(())
}

/// Runs one scenario into `cfg.out`. The manifest is written in every case
/// once the output directory exists.
pub fn run_scenario(cfg: &ScenarioConfig) -> Result<(), Failure> {
    let start = Instant::now();
    let (net, profiles) = load_inputs(cfg)?;
    let hash = input_hash(cfg, &net, &profiles);
    fs::create_dir_all(&cfg.out)
        .with_context(|| format!("creating {}", cfg.out.display()))
        .stage("write", EXIT_IO)?;
    let mut art = Artifacts {
        dir: cfg.out.clone(),
        names: Vec::new(),
    };
    let outcome = run_stages(cfg, net, profiles, &mut art).and_then(|()| art.commit());
    let failure = outcome.as_ref().err();
    let manifest = Manifest {
        status: if failure.is_none() { "ok" } else { "failed" },
        mode: cfg.mode.name(),
        exit_code: failure.map_or(0, |f| f.code),
        failed_stage: failure.map(|f| f.stage),
        error: failure.map(|f| format!("{:#}", f.error)),
        input_hash: hash,
        profile_seed: match cfg.profiles {
            ProfileSource::Synth { seed, .. } => Some(seed),
            ProfileSource::Path(_) => None,
        },
        nvs_seed: cfg.nvs.seed,
        versions: Versions {
            dnflex: dnflex::VERSION,
            dnflex_cli: env!("CARGO_PKG_VERSION"),
        },
        parallel: dnflex::par::is_parallel(),
        wall_time_s: start.elapsed().as_secs_f64(),
        artifacts: art
            .names
            .iter()
            .map(|n| {
                if failure.is_none() {
                    n.clone()
                } else {
                    format!("{n}.partial")
                }
            })
            .collect(),
        config: cfg,
    };
    write_manifest(&cfg.out, &manifest)?;
    outcome
}

fn write_manifest(dir: &Path, m: &Manifest) -> Result<(), Failure> {
    let path = dir.join("manifest.json");
    let mut text = serde_json::to_string_pretty(m).expect("manifest serializes");
    text.push('\n');
    fs::write(&path, text)
        .with_context(|| format!("writing {}", path.display()))
        .stage("write", EXIT_IO)
}
