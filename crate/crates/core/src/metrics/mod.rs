//! Action logs, amplitude spectra, smoothness values and policy evaluation.

mod eval;
mod log;
mod spectrum;

pub use eval::{
    domain_shift_evaluate, evaluate, evaluate_policy, measured_speed01, Driver, EpisodeSummary,
    EvalReport, FnDriver, ObsShift, PolicyDriver, RandomDriver,
};
pub use log::{ActionLog, ActionRecord, EpisodeView, ACTION_LOG_HEADER};
pub use spectrum::{amplitude_spectrum, dft, smoothness, Spectrum, DEFAULT_SAMPLE_RATE};
