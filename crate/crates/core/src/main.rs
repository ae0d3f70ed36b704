use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use ribbonflow::config::{Preset, RunConfig};
use ribbonflow::driver::{cmd_run, cmd_table};
use ribbonflow::flow::MonotonicityGuard;
use ribbonflow::verify::run_all;

/// Gradient-flow simulation of narrow inextensible elastic ribbons.
#[derive(Parser)]
#[command(name = "ribbonflow", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one gradient flow and write energy traces, snapshots, and meshes.
    Run(RunArgs),
    /// Mesh-refinement study: stationary energies for a list of resolutions.
    Table(TableArgs),
    /// Execute the built-in property suites with a fixed seed.
    Verify(VerifyArgs),
}

#[derive(Args)]
struct RunArgs {
    /// Experiment preset: moebius | helix (default moebius).
    #[arg(long)]
    preset: Option<String>,
    /// Number of mesh elements (default 320).
    #[arg(long)]
    n: Option<usize>,
    /// Flat key = value configuration file applied before the flags.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Pseudo-time step (default h/10).
    #[arg(long)]
    tau: Option<f64>,
    /// Regularization parameter (default sqrt(h)).
    #[arg(long)]
    delta: Option<f64>,
    /// First penalty parameter (default h).
    #[arg(long)]
    eps1: Option<f64>,
    /// Second penalty parameter (default sqrt(h)).
    #[arg(long)]
    eps2: Option<f64>,
    /// Pseudo-time horizon T (default 10; steps = floor(T/tau)).
    #[arg(long, conflicts_with = "steps")]
    horizon: Option<f64>,
    /// Explicit step count instead of a horizon.
    #[arg(long)]
    steps: Option<usize>,
    /// Stop early when |d_t y|_star + |d_t b|_dagger drops below this
    /// (1e-8 when the flag is given without a value).
    #[arg(long, num_args = 0..=1, default_missing_value = "1e-8")]
    eps_stop: Option<f64>,
    /// Write extra snapshots every this many steps.
    #[arg(long)]
    snapshot_stride: Option<usize>,
    /// Output directory (relative paths go under RIBBONFLOW_OUT_ROOT).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Ribbon visualization width in the OBJ output.
    #[arg(long)]
    w_vis: Option<f64>,
    /// Halve the step size and retry whenever a step increases the energy.
    #[arg(long)]
    guard: bool,
}

#[derive(Args)]
struct TableArgs {
    /// Experiment preset: moebius | helix.
    preset: String,
    /// Comma-separated resolutions.
    #[arg(long, value_delimiter = ',', default_value = "80,160,320")]
    n: Vec<usize>,
    /// Also write the rendered table to this file.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct VerifyArgs {
    /// Seed for the randomized property suites.
    #[arg(long, default_value_t = 0x5eed)]
    seed: u64,
}

fn build_config(args: &RunArgs) -> ribbonflow::Result<RunConfig> {
    let mut config = RunConfig::new(Preset::Moebius, 320);
    if let Some(path) = &args.config {
        config.apply_file(path)?;
    }
    // explicit flags win over the file
    if let Some(preset) = &args.preset {
        config.preset = Preset::parse(preset)?;
    }
    if let Some(n) = args.n {
        config.n = n;
    }
    if let Some(v) = args.tau {
        config.tau = Some(v);
    }
    if let Some(v) = args.delta {
        config.delta = Some(v);
    }
    if let Some(v) = args.eps1 {
        config.eps1 = Some(v);
    }
    if let Some(v) = args.eps2 {
        config.eps2 = Some(v);
    }
    if let Some(v) = args.horizon {
        config.horizon = Some(v);
    }
    if let Some(v) = args.steps {
        config.steps = Some(v);
        config.horizon = None;
    }
    if let Some(v) = args.eps_stop {
        config.eps_stop = Some(v);
    }
    if let Some(v) = args.snapshot_stride {
        config.snapshot_stride = Some(v);
    }
    if let Some(v) = &args.out {
        config.out_dir = Some(v.clone());
    }
    if let Some(v) = args.w_vis {
        config.w_vis = v;
    }
    if args.guard {
        config.guard = MonotonicityGuard::HalveTau;
    }
    Ok(config)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match cli.command {
        Command::Run(args) => {
            let config = match build_config(&args) {
                Ok(c) => c,
                Err(e) => {
                    eprintln!("error: {e}");
                    return ExitCode::FAILURE;
                }
            };
            match cmd_run(&config) {
                Ok(artifacts) => {
                    let s = &artifacts.summary;
                    println!("{}", config.echo().unwrap_or_default());
                    println!(
                        "completed {} of {} steps{}",
                        s.steps_completed,
                        s.planned_steps,
                        if s.stopped_by_tolerance {
                            " (stopping tolerance reached)"
                        } else {
                            ""
                        }
                    );
                    println!(
                        "energy: {} -> {}",
                        s.initial_energy.total, s.final_energy.total
                    );
                    println!("energy increases observed: {}", s.energy_increases);
                    println!(
                        "nodal constraint drift: y' {:.3e}, b {:.3e}",
                        s.drift_y, s.drift_b
                    );
                    println!("outputs in {}", artifacts.out_dir.display());
                    ExitCode::SUCCESS
                }
                Err(e) => {
                    eprintln!("error: {e}");
                    ExitCode::FAILURE
                }
            }
        }
        Command::Table(args) => {
            let preset = match Preset::parse(&args.preset) {
                Ok(p) => p,
                Err(e) => {
                    eprintln!("error: {e}");
                    return ExitCode::FAILURE;
                }
            };
            match cmd_table(preset, &args.n) {
                Ok(result) => {
                    let text = result.render();
                    print!("{text}");
                    if let Some(path) = &args.out {
                        if let Err(e) = std::fs::write(path, &text) {
                            eprintln!("error: cannot write {}: {e}", path.display());
                            return ExitCode::FAILURE;
                        }
                    }
                    ExitCode::SUCCESS
                }
                Err(e) => {
                    eprintln!("error: {e}");
                    ExitCode::FAILURE
                }
            }
        }
        Command::Verify(args) => {
            let report = run_all(args.seed);
            print!("{}", report.render());
            if report.failure_count() == 0 {
                ExitCode::SUCCESS
            } else {
                ExitCode::FAILURE
            }
        }
    }
}
