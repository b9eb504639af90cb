//! Run driver: simulate a scenario and write CSVs, a JSON manifest and plots.

use std::fs::File;
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use serde::Serialize;
use thiserror::Error;

use super::csv::{write_errors, write_trajectory, CsvError};
use super::plot::{render_plots, PlotError, PlotOptions};
use super::{load_scenario, Scenario, ScenarioError};
use crate::exec::Execution;
use crate::sim::{ControlGains, FollowerMode, Integrator, RunRecords, SimError, SimOutput, Simulation};

/// `<crate version>+<git describe>` when built inside a git checkout.
pub const VERSION: &str = env!("FORMLAB_VERSION");

pub const TRAJECTORY_FILE: &str = "trajectory.csv";
pub const ERRORS_FILE: &str = "errors.csv";
pub const MANIFEST_FILE: &str = "manifest.json";

#[derive(Debug, Error)]
pub enum RunError {
    #[error(transparent)]
    Scenario(#[from] ScenarioError),
    #[error("simulation failed")]
    Sim(#[from] SimError),
    #[error(transparent)]
    Csv(#[from] CsvError),
    #[error(transparent)]
    Plot(#[from] PlotError),
    #[error("{path}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> RunError + '_ {
    move |source| RunError::Io { path: path.display().to_string(), source }
}

/// Command-line overrides of the scenario's control block.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Overrides {
    pub mode: Option<FollowerMode>,
    pub dt: Option<f64>,
    pub alpha: Option<f64>,
    pub seed: Option<u64>,
    pub integrator: Option<Integrator>,
    pub sample_stride: Option<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub scenario: PathBuf,
    pub out_dir: PathBuf,
    pub overrides: Overrides,
    pub plot: bool,
}

impl Overrides {
    pub fn apply(&self, scenario: &mut Scenario) -> Result<(), SimError> {
        let c = &mut scenario.config;
        if let Some(m) = self.mode {
            c.mode = m;
        }
        if let Some(dt) = self.dt {
            if !(dt > 0.0 && dt.is_finite()) {
                return Err(SimError::InvalidDt(dt));
            }
            c.dt = dt;
        }
        if let Some(a) = self.alpha {
            c.gains = ControlGains::new(a)?;
        }
        if let Some(s) = self.seed {
            c.seed = s;
        }
        if let Some(i) = self.integrator {
            c.integrator = i;
        }
        if let Some(s) = self.sample_stride {
            if s == 0 {
                return Err(SimError::InvalidStride);
            }
            c.sample_stride = s;
        }
        Ok(())
    }
}

/// Simulates a validated scenario with its own config.
pub fn simulate(scenario: &Scenario) -> Result<SimOutput, SimError> {
    Simulation::new(
        scenario.formation.clone(),
        scenario.initial.clone(),
        scenario.schedule.clone(),
        scenario.config.clone(),
    )?
    .run()
}

#[derive(Debug, Clone, Serialize)]
pub struct FinalSample {
    pub t: f64,
    pub residual: f64,
    pub max_leader_error: f64,
    pub max_follower_error: f64,
    pub max_target_error: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct Manifest {
    pub tool: &'static str,
    pub version: &'static str,
    pub scenario: String,
    pub scenario_path: String,
    pub seed: u64,
    pub mode: FollowerMode,
    pub integrator: Integrator,
    pub dt: f64,
    pub alpha: f64,
    pub sample_stride: usize,
    pub horizon: [f64; 2],
    pub agents: usize,
    pub samples: usize,
    pub records: RunRecords,
    #[serde(rename = "final")]
    pub final_sample: Option<FinalSample>,
    pub outputs: Vec<String>,
}

#[derive(Debug, Clone)]
pub struct RunSummary {
    pub manifest: Manifest,
    pub files: Vec<PathBuf>,
}

/// Simulates `scenario` and writes every output into `out_dir`.
pub fn run_scenario(
    scenario: &Scenario,
    scenario_path: &Path,
    out_dir: &Path,
    plot: bool,
) -> Result<RunSummary, RunError> {
    let output = simulate(scenario)?;
    std::fs::create_dir_all(out_dir).map_err(io_err(out_dir))?;

    let traj_path = out_dir.join(TRAJECTORY_FILE);
    let err_path = out_dir.join(ERRORS_FILE);
    write_trajectory(&output.log, BufWriter::new(File::create(&traj_path).map_err(io_err(&traj_path))?))?;
    write_errors(&output.log, BufWriter::new(File::create(&err_path).map_err(io_err(&err_path))?))?;
    let mut files = vec![traj_path.clone(), err_path.clone()];

    if plot {
        let opts = PlotOptions {
            title: scenario.file.name.clone(),
            snapshots: scenario.file.plot.snapshots.clone(),
            obstacles: scenario.file.obstacles.clone(),
            projection: None,
        };
        files.extend(render_plots(&traj_path, &err_path, out_dir, &opts)?);
    }

    let c = &scenario.config;
    let manifest_path = out_dir.join(MANIFEST_FILE);
    files.push(manifest_path.clone());
    let manifest = Manifest {
        tool: "formlab",
        version: VERSION,
        scenario: scenario.file.name.clone(),
        scenario_path: scenario_path.display().to_string(),
        seed: c.seed,
        mode: c.mode,
        integrator: c.integrator,
        dt: c.dt,
        alpha: c.gains.alpha(),
        sample_stride: c.sample_stride,
        horizon: [scenario.schedule.start(), scenario.schedule.end()],
        agents: output.final_state.positions.len(),
        samples: output.log.samples.len(),
        records: output.records.clone(),
        final_sample: output.log.samples.last().map(|s| FinalSample {
            t: s.t,
            residual: s.residual,
            max_leader_error: s.max_leader_error,
            max_follower_error: s.max_follower_error,
            max_target_error: s.max_target_error,
        }),
        outputs: files.iter().filter_map(|p| p.file_name().map(|n| n.to_string_lossy().into_owned())).collect(),
    };
    let mut text = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
    text.push('\n');
    std::fs::write(&manifest_path, text).map_err(io_err(&manifest_path))?;
    Ok(RunSummary { manifest, files })
}

/// Loads, validates, applies overrides and runs one scenario file.
pub fn run(config: &RunConfig) -> Result<RunSummary, RunError> {
    let mut scenario = load_scenario(&config.scenario)?.build()?;
    config.overrides.apply(&mut scenario)?;
    run_scenario(&scenario, &config.scenario, &config.out_dir, config.plot)
}

/// Scenario files (`*.json`) in `dir`, sorted by name.
pub fn scenario_files(dir: &Path) -> Result<Vec<PathBuf>, RunError> {
    let mut files: Vec<PathBuf> = std::fs::read_dir(dir)
        .map_err(io_err(dir))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.is_file() && p.extension().is_some_and(|e| e == "json"))
        .collect();
    files.sort();
    Ok(files)
}

/// One scenario file of a batch and its outcome.
pub type BatchItem = (PathBuf, Result<RunSummary, RunError>);

/// Runs every scenario in `config.scenario` (a directory), each into
/// `out_dir/<file stem>/`, one run per worker.
pub fn run_batch(config: &RunConfig, exec: Execution) -> Result<Vec<BatchItem>, RunError> {
    let files = scenario_files(&config.scenario)?;
    let results = exec.map_slice(&files, |path| {
        let stem = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
        let one = RunConfig {
            scenario: path.clone(),
            out_dir: config.out_dir.join(stem),
            overrides: config.overrides.clone(),
            plot: config.plot,
        };
        run(&one)
    });
    Ok(files.into_iter().zip(results).collect())
}
