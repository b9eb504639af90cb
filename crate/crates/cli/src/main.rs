use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};
use formlab::scenario::plot::{render_plots, PlotOptions};
use formlab::scenario::run::{run, run_batch, Overrides, RunConfig, RunSummary, VERSION};
use formlab::scenario::{load_scenario, ScenarioError};
use formlab::sim::{FollowerMode, Integrator};
use formlab::Execution;

#[derive(Parser)]
#[command(name = "formlab", version = VERSION, about = "Formation maneuver scenarios: validate, simulate, plot")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    Implicit,
    Causal,
}

#[derive(Clone, Copy, ValueEnum)]
enum IntegratorArg {
    Euler,
    Rk4,
}

#[derive(Subcommand)]
enum Command {
    /// Check a scenario file and list every problem found.
    Validate { scenario: PathBuf },
    /// Simulate a scenario (or every *.json in a directory) and write CSVs, a manifest and plots.
    Run {
        scenario: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, value_enum)]
        mode: Option<ModeArg>,
        #[arg(long)]
        dt: Option<f64>,
        #[arg(long)]
        alpha: Option<f64>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, value_enum)]
        integrator: Option<IntegratorArg>,
        /// Log every N-th integration step.
        #[arg(long)]
        sample_stride: Option<usize>,
        /// Skip SVG rendering.
        #[arg(long)]
        no_plot: bool,
    },
    /// Render SVG plots from trajectory and error CSVs.
    Plot {
        #[arg(long)]
        traj: PathBuf,
        #[arg(long)]
        err: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Scenario whose obstacles, snapshot times and name decorate the plot.
        #[arg(long)]
        scenario: Option<PathBuf>,
    },
}

fn print_summary(s: &RunSummary) {
    let m = &s.manifest;
    println!(
        "{}: {} samples, {} switch(es), {} join(s)",
        m.scenario,
        m.samples,
        m.records.switches.len(),
        m.records.joins.len()
    );
    if let Some(f) = &m.final_sample {
        println!(
            "  t = {}  residual {:.3e}  leader error {:.3e}  follower error {:.3e}",
            f.t, f.residual, f.max_leader_error, f.max_follower_error
        );
    }
    for p in &s.files {
        println!("  wrote {}", p.display());
    }
}

fn validate(path: PathBuf) -> Result<()> {
    match load_scenario(&path).and_then(|f| f.build()) {
        Ok(s) => {
            println!(
                "{}: ok ({} agents, {} segments, {} events, t = {}..{})",
                path.display(),
                s.formation.n(),
                s.schedule.segments().len(),
                s.schedule.events().len(),
                s.schedule.start(),
                s.schedule.end()
            );
            if let [a, b, _, ..] = s.file.leaders[..] {
                println!(
                    "  note: {} leaders; 2-rootedness was checked from leaders {a} and {b} only",
                    s.file.leaders.len()
                );
            }
            Ok(())
        }
        Err(e @ ScenarioError::Io { .. }) => Err(e.into()),
        Err(e) => {
            for i in e.issues() {
                eprintln!("{}: {}", path.display(), i);
            }
            bail!("{} is invalid", path.display())
        }
    }
}

fn main_inner(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Validate { scenario } => validate(scenario),
        Command::Run { scenario, out, mode, dt, alpha, seed, integrator, sample_stride, no_plot } => {
            let overrides = Overrides {
                mode: mode.map(|m| match m {
                    ModeArg::Implicit => FollowerMode::Implicit,
                    ModeArg::Causal => FollowerMode::Causal,
                }),
                dt,
                alpha,
                seed,
                integrator: integrator.map(|i| match i {
                    IntegratorArg::Euler => Integrator::Euler,
                    IntegratorArg::Rk4 => Integrator::Rk4,
                }),
                sample_stride,
            };
            let config = RunConfig { scenario: scenario.clone(), out_dir: out, overrides, plot: !no_plot };
            if scenario.is_dir() {
                let results = run_batch(&config, Execution::default())?;
                if results.is_empty() {
                    bail!("no *.json scenarios in {}", scenario.display());
                }
                let mut failed = 0;
                for (path, r) in results {
                    match r {
                        Ok(s) => print_summary(&s),
                        Err(e) => {
                            failed += 1;
                            eprintln!("{}: {:#}", path.display(), anyhow::Error::from(e));
                        }
                    }
                }
                if failed > 0 {
                    bail!("{failed} scenario(s) failed");
                }
                Ok(())
            } else {
                let s = run(&config).with_context(|| format!("running {}", scenario.display()))?;
                print_summary(&s);
                Ok(())
            }
        }
        Command::Plot { traj, err, out, scenario } => {
            let mut opts = PlotOptions::default();
            if let Some(path) = scenario {
                let file = load_scenario(&path)?;
                opts.title = file.name;
                opts.snapshots = file.plot.snapshots;
                opts.obstacles = file.obstacles;
            } else if let Some(stem) = traj.file_stem() {
                opts.title = stem.to_string_lossy().into_owned();
            }
            for p in render_plots(&traj, &err, &out, &opts)? {
                println!("wrote {}", p.display());
            }
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    match main_inner(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
