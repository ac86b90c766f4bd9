use std::fs;
use std::path::{Path, PathBuf};

use chrono::{SecondsFormat, Utc};
use serde::{Deserialize, Serialize};

use super::config::ExperimentConfig;
use crate::error::{Error, Result};
use crate::metrics::{evaluate, evaluate_policy, ActionLog, EvalReport, ObsShift, PolicyDriver};
use crate::nn::{Checkpoint, Network};
use crate::sac::{train, LogRow, TrainStatus, POLICY};
use crate::simulator::{make_track, TrackPreset};

pub const CONFIG_FILE: &str = "config.toml";
pub const CHECKPOINT_DIR: &str = "checkpoint";
pub const TRAINING_LOG_FILE: &str = "training_log.csv";
pub const RUN_MANIFEST_FILE: &str = "run_manifest.json";
pub const EVAL_REPORT_FILE: &str = "eval_report.json";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "state")]
pub enum RunStatus {
    Completed,
    Aborted { step: u64, reason: String },
}

/// Record of one `train` invocation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub config_hash: String,
    pub compat_hash: String,
    pub code_version: String,
    pub started: String,
    pub finished: String,
    pub status: RunStatus,
    pub final_step: u64,
    /// Paths relative to the output directory.
    pub artifacts: Vec<PathBuf>,
    pub final_eval: Option<EvalReport>,
}

impl RunManifest {
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::file(path, e))?;
        serde_json::from_str(&text).map_err(|e| Error::format(path, e.to_string()))
    }
}

fn now() -> String {
    Utc::now().to_rfc3339_opts(SecondsFormat::Millis, true)
}

fn write(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| Error::file(path, e))
}

/// Command-line overrides applied on top of a config file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub steps: Option<u64>,
    pub out: Option<PathBuf>,
}

impl Overrides {
    pub fn apply(&self, cfg: &mut ExperimentConfig) {
        if let Some(s) = self.seed {
            cfg.run.seed = s;
        }
        if let Some(s) = self.steps {
            cfg.run.total_steps = s;
        }
        if let Some(o) = &self.out {
            cfg.run.output_dir = o.clone();
        }
    }
}

/// Train from a config, writing the resolved config, checkpoint, training
/// CSV, final evaluation and run manifest into the output directory.
pub fn cmd_train(
    cfg: &ExperimentConfig,
    on_row: Option<&mut dyn FnMut(&LogRow)>,
) -> Result<RunManifest> {
    cfg.validate()?;
    let started = now();
    let out = &cfg.run.output_dir;
    fs::create_dir_all(out).map_err(|e| Error::file(out, e))?;
    let opts = cfg.train_options();
    let factory = || cfg.build_env();
    let outcome = train(&factory, &opts, on_row)?;

    let mut artifacts = vec![PathBuf::from(CONFIG_FILE)];
    cfg.save(&out.join(CONFIG_FILE))?;
    outcome.checkpoint.save(&out.join(CHECKPOINT_DIR))?;
    artifacts.push(PathBuf::from(CHECKPOINT_DIR));
    if !outcome.log.rows.is_empty() {
        write(&out.join(TRAINING_LOG_FILE), &outcome.log.to_csv())?;
        artifacts.push(PathBuf::from(TRAINING_LOG_FILE));
    }

    let status = match outcome.status {
        TrainStatus::Completed => RunStatus::Completed,
        TrainStatus::Aborted { step, reason } => RunStatus::Aborted { step, reason },
    };
    let final_eval = if status == RunStatus::Completed
        && cfg.run.total_steps > 0
        && cfg.run.n_eval_runs > 0
    {
        let policy = outcome
            .checkpoint
            .network(POLICY)
            .ok_or_else(|| Error::State("checkpoint has no policy".into()))?;
        let (report, _) = evaluate_policy(policy, &cfg.build_env()?, cfg.run.n_eval_runs, cfg.run.seed)?;
        write(&out.join(EVAL_REPORT_FILE), &report.to_json())?;
        artifacts.push(PathBuf::from(EVAL_REPORT_FILE));
        Some(report)
    } else {
        None
    };

    artifacts.push(PathBuf::from(RUN_MANIFEST_FILE));
    let manifest = RunManifest {
        config_hash: opts.config_hash,
        compat_hash: opts.compat_hash,
        code_version: env!("CARGO_PKG_VERSION").to_string(),
        started,
        finished: now(),
        status,
        final_step: outcome.checkpoint.step,
        artifacts,
        final_eval,
    };
    write(
        &out.join(RUN_MANIFEST_FILE),
        &serde_json::to_string_pretty(&manifest).expect("manifest is plain data"),
    )?;
    Ok(manifest)
}

#[derive(Debug, Clone)]
pub struct EvalOptions {
    pub n_runs: usize,
    pub seed: u64,
    pub shifted: bool,
    /// Evaluate even when the checkpoint was trained with different
    /// observation or network settings.
    pub allow_incompatible: bool,
}

#[derive(Debug, Clone)]
pub struct EvalOutput {
    pub report: EvalReport,
    pub log: ActionLog,
    pub files: Vec<PathBuf>,
}

pub fn load_policy(checkpoint_dir: &Path) -> Result<(Checkpoint, Network<f32>)> {
    let ckpt = Checkpoint::load(checkpoint_dir)?;
    let policy = ckpt
        .network(POLICY)
        .cloned()
        .ok_or_else(|| Error::format(checkpoint_dir, "checkpoint has no policy network"))?;
    Ok((ckpt, policy))
}

/// Evaluate a checkpoint under a config's environment and write the report
/// (JSON and text) plus the action log into `out_dir`.
pub fn cmd_eval(
    checkpoint_dir: &Path,
    cfg: &ExperimentConfig,
    opts: &EvalOptions,
    out_dir: &Path,
) -> Result<EvalOutput> {
    cfg.validate()?;
    let (ckpt, policy) = load_policy(checkpoint_dir)?;
    let expected = cfg.compat_hash();
    if ckpt.compat_hash != expected && !opts.allow_incompatible {
        return Err(Error::Compatibility(format!(
            "checkpoint compat hash {} does not match config {}",
            ckpt.compat_hash, expected
        )));
    }
    let env = cfg.build_env()?;
    let shift = opts.shifted.then(ObsShift::intensity);
    let (report, log) = evaluate(
        &PolicyDriver(&policy),
        &env,
        opts.n_runs,
        opts.seed,
        shift.as_ref(),
    )?;
    fs::create_dir_all(out_dir).map_err(|e| Error::file(out_dir, e))?;
    let suffix = if opts.shifted { "_shifted" } else { "" };
    let json = out_dir.join(format!("eval_report{suffix}.json"));
    let text = out_dir.join(format!("eval_report{suffix}.txt"));
    let csv = out_dir.join(format!("action_log{suffix}.csv"));
    write(&json, &report.to_json())?;
    let header = format!(
        "checkpoint_config_hash: {}\nconfig_hash: {}\nshifted: {}\n",
        ckpt.config_hash,
        cfg.config_hash(),
        opts.shifted
    );
    write(&text, &(header + &report.to_text()))?;
    log.save(&csv)?;
    Ok(EvalOutput {
        report,
        log,
        files: vec![json, text, csv],
    })
}

/// Write a preset's centerline table.
pub fn cmd_make_track(preset: TrackPreset, half_width: f64, path: &Path) -> Result<()> {
    let track = make_track(preset, half_width)?;
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| Error::file(dir, e))?;
    }
    track.save(path)
}
