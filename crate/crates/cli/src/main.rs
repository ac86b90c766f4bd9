use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use smoothrace::experiment::{
    cmd_ablate, cmd_eval, cmd_export_figures, cmd_make_track, cmd_train, AblationSuite,
    EvalOptions, ExperimentConfig, Overrides, RunStatus,
};
use smoothrace::metrics::{ActionLog, DEFAULT_SAMPLE_RATE};
use smoothrace::parallel;
use smoothrace::simulator::TrackPreset;
use smoothrace::Error;

const EXIT_FAILURE: u8 = 1;
const EXIT_CONFIG: u8 = 3;
const EXIT_FILE: u8 = 4;
const EXIT_NUMERIC: u8 = 5;
const EXIT_COMPAT: u8 = 6;

/// Image-based SAC with action-smoothness regularization on a 2D racing track.
///
/// Worker parallelism is capped by the SMOOTHRACE_THREADS environment variable.
#[derive(Parser)]
#[command(name = "smoothrace", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train an agent from a config file.
    Train {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        steps: Option<u64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Evaluate a checkpoint with the deterministic policy.
    Eval {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        config: PathBuf,
        /// Use the intensity-shifted observation stream.
        #[arg(long)]
        shifted: bool,
        /// Number of runs (defaults to the config's n_eval_runs).
        #[arg(long)]
        runs: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, default_value = "eval")]
        out: PathBuf,
        /// Skip the checkpoint/config compatibility check.
        #[arg(long)]
        allow_incompatible: bool,
    },
    /// Train and evaluate an ablation suite over several seeds.
    Ablate {
        /// iras_components or spatial_transforms.
        #[arg(long)]
        suite: AblationSuite,
        #[arg(long)]
        config: PathBuf,
        #[arg(long, value_delimiter = ',', default_value = "0,1,2")]
        seeds: Vec<u64>,
        #[arg(long)]
        steps: Option<u64>,
        #[arg(long, default_value = "ablation")]
        out: PathBuf,
    },
    /// Export steering traces and spectra from an action log.
    ExportFigures {
        #[arg(long)]
        log: PathBuf,
        #[arg(long, default_value = "figures")]
        out: PathBuf,
        #[arg(long, default_value_t = DEFAULT_SAMPLE_RATE)]
        sample_rate: f64,
    },
    /// Write a preset track's centerline table.
    MakeTrack {
        #[arg(long)]
        preset: TrackPreset,
        #[arg(long, default_value_t = 0.6)]
        half_width: f64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Print the default config.
    DefaultConfig,
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Config { .. } => EXIT_CONFIG,
        Error::File { .. } | Error::Format { .. } => EXIT_FILE,
        Error::Numeric(_) => EXIT_NUMERIC,
        Error::Compatibility(_) => EXIT_COMPAT,
        _ => EXIT_FAILURE,
    }
}

fn load(path: &Path, overrides: &Overrides) -> smoothrace::Result<ExperimentConfig> {
    let mut cfg = ExperimentConfig::load(path)?;
    overrides.apply(&mut cfg);
    cfg.validate()?;
    Ok(cfg)
}

fn run(cli: Cli) -> smoothrace::Result<u8> {
    match cli.command {
        Command::Train {
            config,
            seed,
            steps,
            out,
        } => {
            let cfg = load(&config, &Overrides { seed, steps, out })?;
            let mut print = |r: &smoothrace::sac::LogRow| {
                let f = |v: Option<f64>| v.map_or("-".to_string(), |x| format!("{x:.4}"));
                eprintln!(
                    "step {:>7} critic {} actor {} alpha {:.4} eval_return {}",
                    r.step,
                    f(r.critic_loss),
                    f(r.actor_loss),
                    r.alpha,
                    f(r.eval_return)
                );
            };
            let m = cmd_train(&cfg, Some(&mut print))?;
            println!("config_hash: {}", m.config_hash);
            println!("output: {}", cfg.run.output_dir.display());
            if let Some(r) = &m.final_eval {
                print!("{}", r.to_text());
            }
            if let RunStatus::Aborted { step, reason } = &m.status {
                eprintln!("training aborted at step {step}: {reason}");
                return Ok(EXIT_NUMERIC);
            }
        }
        Command::Eval {
            checkpoint,
            config,
            shifted,
            runs,
            seed,
            out,
            allow_incompatible,
        } => {
            let cfg = load(&config, &Overrides::default())?;
            let opts = EvalOptions {
                n_runs: runs.unwrap_or(cfg.run.n_eval_runs).max(1),
                seed: seed.unwrap_or(cfg.run.seed),
                shifted,
                allow_incompatible,
            };
            let o = cmd_eval(&checkpoint, &cfg, &opts, &out)?;
            print!("{}", o.report.to_text());
        }
        Command::Ablate {
            suite,
            config,
            seeds,
            steps,
            out,
        } => {
            let cfg = load(
                &config,
                &Overrides {
                    steps,
                    ..Default::default()
                },
            )?;
            let mut progress = |agent: &str, seed: u64, r: &smoothrace::metrics::EvalReport| {
                eprintln!(
                    "{agent} seed {seed}: success {:.1}%",
                    100.0 * r.success_rate
                );
            };
            let o = cmd_ablate(suite, &cfg, &seeds, &out, Some(&mut progress))?;
            print!("{}", o.table.to_markdown());
        }
        Command::ExportFigures {
            log,
            out,
            sample_rate,
        } => {
            let log = ActionLog::load(&log, sample_rate)?;
            let e = cmd_export_figures(&log, &out)?;
            println!("episodes: {}", e.episodes);
            println!("series: {}", e.series);
            if let Some(w) = e.warning {
                eprintln!("warning: {w}");
            }
        }
        Command::MakeTrack {
            preset,
            half_width,
            out,
        } => {
            cmd_make_track(preset, half_width, &out)?;
            println!("{}", out.display());
        }
        Command::DefaultConfig => print!("{}", ExperimentConfig::default().to_toml()),
    }
    Ok(0)
}

fn main() -> ExitCode {
    parallel::init_thread_pool();
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
