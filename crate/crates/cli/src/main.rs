use std::io;
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand};

use clra::harness::{self, ExperimentConfig, Scheme, Sweep, SweepVar};
use clra::validate::{self, ValidationOptions};

#[derive(Parser)]
#[command(name = "clra", version, about = "Cross-linked rotatable antenna experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the schemes of a config file over its trials.
    Run(Common),
    /// Run a parameter sweep, optionally overriding the config's sweep.
    Sweep {
        #[command(flatten)]
        common: Common,
        /// Swept parameter: power, theta_max, p, Q, K or L.
        #[arg(long = "var")]
        variable: Option<SweepVar>,
        /// Comma-separated sweep values.
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        values: Vec<f64>,
    },
    /// Check the model and solvers against closed forms and brute force.
    Validate {
        #[arg(long, env = "CLRA_SEED", default_value_t = 0)]
        seed: u64,
        /// Fewer random instances per check.
        #[arg(long)]
        quick: bool,
        #[arg(long)]
        threads: Option<usize>,
    },
    /// Compare discrete-angle search with projection and the fixed array.
    Ga {
        #[command(flatten)]
        common: Common,
        /// Points per angle in the discrete grid.
        #[arg(long)]
        grid_points: Option<usize>,
    },
    /// Print the default config document.
    Defaults,
}

#[derive(Args)]
struct Common {
    #[arg(long)]
    config: Option<PathBuf>,
    /// Master seed; overrides the config.
    #[arg(long, env = "CLRA_SEED")]
    seed: Option<u64>,
    #[arg(long)]
    trials: Option<usize>,
    /// CSV destination; without one the CSV goes to standard output and the
    /// summary to standard error.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Scheme to run; repeat for several.
    #[arg(long = "scheme")]
    schemes: Vec<Scheme>,
    #[arg(long)]
    threads: Option<usize>,
}

impl Common {
    fn load(&self) -> anyhow::Result<ExperimentConfig> {
        let mut config = match &self.config {
            Some(path) => ExperimentConfig::load(path)?,
            None => ExperimentConfig::default(),
        };
        if let Some(seed) = self.seed {
            config.seed = seed;
        }
        if let Some(trials) = self.trials {
            config.trials = trials;
        }
        if !self.schemes.is_empty() {
            config.schemes = self.schemes.clone();
        }
        if let Some(out) = &self.out {
            config.output = Some(out.clone());
        }
        Ok(config)
    }
}

fn set_threads(threads: Option<usize>) -> anyhow::Result<()> {
    if let Some(n) = threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .context("configuring the worker pool")?;
    }
    Ok(())
}

fn execute(config: &ExperimentConfig) -> anyhow::Result<()> {
    config.validate()?;
    let rows = harness::run_sweep(config)?;
    let summary = harness::format_summary(&harness::summarize(&rows));
    match &config.output {
        Some(path) => {
            harness::write_csv(path, &rows)?;
            print!("{summary}");
            println!("wrote {} rows to {}", rows.len(), path.display());
        }
        None => {
            harness::write_csv_to(io::stdout().lock(), &rows, "standard output")?;
            eprint!("{summary}");
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match real_main() {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

fn real_main() -> anyhow::Result<ExitCode> {
    match Cli::parse().command {
        Command::Run(common) => {
            set_threads(common.threads)?;
            execute(&common.load()?)?;
        }
        Command::Sweep {
            common,
            variable,
            values,
        } => {
            set_threads(common.threads)?;
            let mut config = common.load()?;
            match (variable, values.is_empty()) {
                (Some(variable), false) => config.sweep = Some(Sweep { variable, values }),
                (None, true) => {}
                (Some(variable), true) => match &mut config.sweep {
                    Some(s) if s.variable == variable => {}
                    _ => bail!("--var {variable} needs --values"),
                },
                (None, false) => match &mut config.sweep {
                    Some(s) => s.values = values,
                    None => bail!("--values needs --var or a sweep in the config"),
                },
            }
            if config.sweep.is_none() {
                bail!("no sweep given; set --var and --values or a sweep in the config");
            }
            execute(&config)?;
        }
        Command::Ga { common, grid_points } => {
            set_threads(common.threads)?;
            let explicit = !common.schemes.is_empty();
            let mut config = common.load()?;
            if !explicit {
                config.schemes = vec![Scheme::GaElement, Scheme::NearestProjection, Scheme::Fixed];
            }
            if let Some(l) = grid_points {
                config.grid_points = l;
            }
            execute(&config)?;
        }
        Command::Validate { seed, quick, threads } => {
            set_threads(threads)?;
            let mut opts = ValidationOptions {
                seed,
                ..ValidationOptions::default()
            };
            if quick {
                opts.rotations = 10_000;
                opts.woodbury_instances = 10;
                opts.sinr_scenarios = 5;
                opts.random_beamformers = 200;
                opts.single_user_instances = 2;
                opts.region_samples = 6_000;
            }
            let checks = validate::run_all(&opts)?;
            let mut failed = 0;
            for c in &checks {
                println!("{:<4} {:<24} {}", if c.passed { "ok" } else { "FAIL" }, c.name, c.detail);
                failed += usize::from(!c.passed);
            }
            if failed > 0 {
                println!("{failed} of {} checks failed", checks.len());
                return Ok(ExitCode::FAILURE);
            }
        }
        Command::Defaults => println!("{}", ExperimentConfig::default().to_json()),
    }
    Ok(ExitCode::SUCCESS)
}
