use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use log::info;

use qudit_tomo::experiments::{self, Experiment, ExperimentConfig};
use qudit_tomo::Error;

#[derive(Parser)]
#[command(name = "qudit-tomo", version, about = "Tomography experiments on noisy ion-based qudits")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Compare MUB and two-level state tomography across sample sizes.
    QstCompare(Overrides),
    /// Compare SPAM models for two-level process tomography.
    QptModels(Overrides),
    /// Fit general diagonal and Gibbs SPAM models to calibration data.
    SpamFit(Overrides),
    /// Report protocol sizes, ranks and completeness.
    Completeness(Overrides),
}

#[derive(Args)]
struct Overrides {
    /// JSON config file; flags below take precedence over its values.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    dim: Option<usize>,
    #[arg(long)]
    trials: Option<usize>,
    /// Comma-separated total sample sizes, e.g. 1000,10000.
    #[arg(long, value_delimiter = ',')]
    grid: Option<Vec<u64>>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: Option<PathBuf>,
}

impl Overrides {
    fn resolve(self, experiment: Experiment) -> qudit_tomo::Result<ExperimentConfig> {
        let mut cfg = match &self.config {
            Some(path) => {
                let cfg = ExperimentConfig::from_file(path)?;
                if !cfg.experiment.compatible_with(experiment) {
                    return Err(Error::Config(format!("config is for {}, not {}", cfg.experiment.name(), experiment.name())));
                }
                cfg
            }
            None => ExperimentConfig::new(experiment),
        };
        cfg.dim = self.dim.unwrap_or(cfg.dim);
        cfg.trials = self.trials.unwrap_or(cfg.trials);
        cfg.grid = self.grid.unwrap_or(cfg.grid);
        cfg.seed = self.seed.unwrap_or(cfg.seed);
        cfg.out = self.out.or(cfg.out);
        cfg.validate()?;
        Ok(cfg)
    }
}

fn run(cli: Cli) -> qudit_tomo::Result<()> {
    experiments::configure_threads()?;
    let (experiment, overrides) = match cli.command {
        Command::QstCompare(o) => (Experiment::QstCompare, o),
        Command::QptModels(o) => (Experiment::QptModels, o),
        Command::SpamFit(o) => (Experiment::SpamFit, o),
        Command::Completeness(o) => (Experiment::Completeness, o),
    };
    let cfg = overrides.resolve(experiment)?;
    let path = cfg.output_path();
    info!("running {} with seed {}", cfg.experiment.name(), cfg.seed);
    match cfg.experiment {
        Experiment::QstCompare | Experiment::QptModels => {
            let results =
                if cfg.experiment == Experiment::QstCompare { experiments::run_qst_compare(&cfg)? } else { experiments::run_qpt_models(&cfg)? };
            let (rows, summary) = experiments::write_results(&results, &path)?;
            for s in &results.summary {
                println!("{:<20} N={:<9} median={:.3e} [{:.3e}, {:.3e}]", s.label, s.n, s.median, s.q25, s.q75);
            }
            println!("wrote {} and {}", rows.display(), summary.display());
        }
        Experiment::SpamGeneral | Experiment::SpamGibbs | Experiment::SpamFit => {
            let report = experiments::run_spam_fits(&cfg)?;
            experiments::write_json(&report, &path)?;
            if let Some(g) = report.get("gibbs") {
                println!("gibbs: {}", g["estimate"]);
            }
            if let Some(g) = report.get("general") {
                println!("general: {} (max residual vs truth {})", g["estimate"], g["max_abs_residual_vs_truth"]);
            }
            println!("wrote {}", path.display());
        }
        Experiment::Completeness => {
            let report = experiments::run_completeness(&cfg)?;
            experiments::write_json(&report, &path)?;
            println!("{}", serde_json::to_string_pretty(&report)?);
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            match e {
                Error::Numerical(_) => ExitCode::from(3),
                _ => ExitCode::from(2),
            }
        }
    }
}
