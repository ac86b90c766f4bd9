//! Experiment configuration files and the train, eval, ablate and
//! figure-export commands behind the command-line tool.

mod ablate;
mod config;
mod figures;
mod run;

pub use ablate::{
    cmd_ablate, variants, AblationOutput, AblationRow, AblationSuite, AblationTable, SeedResult,
    TABLE_COLUMNS,
};
pub use config::{short_hash, ExperimentConfig, RunConfig, TrackConfig, SCHEMA_VERSION};
pub use figures::{cmd_export_figures, line_svg, FigureExport};
pub use run::{
    cmd_eval, cmd_make_track, cmd_train, load_policy, EvalOptions, EvalOutput, Overrides,
    RunManifest, RunStatus, CHECKPOINT_DIR, CONFIG_FILE, EVAL_REPORT_FILE, RUN_MANIFEST_FILE,
    TRAINING_LOG_FILE,
};
