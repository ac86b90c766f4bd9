use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::nn::{InputShape, NetworkSpec};
use crate::regularizers::RegConfig;
use crate::sac::{SacConfig, TrainOptions};
use crate::simulator::{make_track, Env, EnvParams, RenderParams, TrackPreset, TrackSpec};
use crate::transforms::{TransformParams, TransformSuite};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrackConfig {
    pub preset: TrackPreset,
    pub half_width: f64,
    /// Centerline table to load instead of the preset; empty uses the preset.
    pub file: String,
}

impl Default for TrackConfig {
    fn default() -> Self {
        Self {
            preset: TrackPreset::SCurve,
            half_width: 0.6,
            file: String::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub seed: u64,
    /// Environment steps summed over workers.
    pub total_steps: u64,
    /// Environment steps between in-training evaluations (0 disables).
    pub eval_every: u64,
    pub n_eval_runs: usize,
    pub log_every: u64,
    pub output_dir: PathBuf,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            total_steps: 20_000,
            eval_every: 5_000,
            n_eval_runs: 100,
            log_every: 500,
            output_dir: PathBuf::from("runs/default"),
        }
    }
}

/// Everything needed to reproduce a training run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub schema_version: u32,
    pub run: RunConfig,
    pub track: TrackConfig,
    pub render: RenderParams,
    pub env: EnvParams,
    pub sac: SacConfig,
    pub regularizer: RegConfig,
    pub transforms: TransformSuite,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            schema_version: SCHEMA_VERSION,
            run: RunConfig::default(),
            track: TrackConfig::default(),
            render: RenderParams::default(),
            env: EnvParams::default(),
            sac: SacConfig::default(),
            regularizer: RegConfig::iras(),
            transforms: TransformSuite::full(TransformParams::default()),
        }
    }
}

fn config_err(key: impl Into<String>, message: impl Into<String>) -> Error {
    Error::Config {
        key: key.into(),
        message: message.into(),
    }
}

/// Re-key errors from a section's own validation.
fn in_section(key: &str, r: Result<()>) -> Result<()> {
    r.map_err(|e| match e {
        Error::Config { .. } => e,
        other => config_err(key, other.to_string()),
    })
}

/// Every key of `reference` must be present in `actual` and nothing else.
/// Tagged tables (those with a `kind` key) are left to the deserializer,
/// since their fields depend on the variant.
fn check_keys(reference: &toml::Table, actual: &toml::Table, prefix: &str) -> Result<()> {
    let path = |k: &str| {
        if prefix.is_empty() {
            k.to_string()
        } else {
            format!("{prefix}.{k}")
        }
    };
    for (k, v) in reference {
        let Some(a) = actual.get(k) else {
            return Err(config_err(path(k), "missing key"));
        };
        if let (toml::Value::Table(rt), toml::Value::Table(at)) = (v, a) {
            if !rt.contains_key("kind") {
                check_keys(rt, at, &path(k))?;
            }
        }
    }
    if let Some(k) = actual.keys().find(|k| !reference.contains_key(*k)) {
        return Err(config_err(path(k), "unknown key"));
    }
    Ok(())
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let table: toml::Table = text
            .parse()
            .map_err(|e: toml::de::Error| config_err("<document>", e.message().to_string()))?;
        match table.get("schema_version") {
            None => return Err(config_err("schema_version", "missing key")),
            Some(toml::Value::Integer(v)) if *v == SCHEMA_VERSION as i64 => {}
            Some(v) => {
                return Err(config_err(
                    "schema_version",
                    format!("unsupported version {v}, expected {SCHEMA_VERSION}"),
                ))
            }
        }
        let reference = toml::Table::try_from(Self::default()).expect("default config serializes");
        check_keys(&reference, &table, "")?;
        let cfg: Self = table.try_into().map_err(|e: toml::de::Error| {
            config_err("<document>", e.message().trim().to_string())
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config is plain data")
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::file(path, e))?;
        Self::from_toml(&text)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_toml()).map_err(|e| Error::file(path, e))
    }

    pub fn validate(&self) -> Result<()> {
        if self.schema_version != SCHEMA_VERSION {
            return Err(config_err("schema_version", "unsupported version"));
        }
        if self.run.log_every == 0 {
            return Err(config_err("run.log_every", "must be at least 1"));
        }
        if self.run.eval_every > 0 && self.run.n_eval_runs == 0 {
            return Err(config_err(
                "run.n_eval_runs",
                "must be at least 1 when eval_every is set",
            ));
        }
        if self.track.file.is_empty() && !(0.2..=2.0).contains(&self.track.half_width) {
            return Err(config_err("track.half_width", "must lie in [0.2, 2.0]"));
        }
        in_section("render", self.render.validate())?;
        in_section("env", self.env.validate())?;
        in_section("sac", self.sac.validate())?;
        in_section("regularizer", self.regularizer.validate())?;
        in_section("transforms.params", self.transforms.params.validate())?;
        if self.regularizer.mode.spatial() && self.transforms.is_empty() {
            return Err(config_err(
                "transforms",
                "spatial smoothness needs at least one transform",
            ));
        }
        Ok(())
    }

    /// Hash of everything that affects results (the output directory does not).
    pub fn config_hash(&self) -> String {
        let mut c = self.clone();
        c.run.output_dir = PathBuf::new();
        short_hash(&serde_json::to_vec(&c).expect("config is plain data"))
    }

    /// Hash of the settings a checkpoint must share with an evaluation
    /// environment: observation rendering and network shapes.
    pub fn compat_hash(&self) -> String {
        let input = self.input_shape();
        let v = serde_json::json!({
            "render": self.render,
            "policy": NetworkSpec::policy(input),
            "critic": NetworkSpec::critic(input),
        });
        short_hash(v.to_string().as_bytes())
    }

    pub fn input_shape(&self) -> InputShape {
        InputShape {
            channels: 1,
            height: self.render.height,
            width: self.render.width,
        }
    }

    pub fn build_track(&self) -> Result<TrackSpec> {
        if self.track.file.is_empty() {
            make_track(self.track.preset, self.track.half_width)
        } else {
            TrackSpec::load(Path::new(&self.track.file))
        }
    }

    pub fn build_env(&self) -> Result<Env> {
        Env::new(self.build_track()?, self.render, self.env)
    }

    pub fn train_options(&self) -> TrainOptions {
        TrainOptions {
            sac: self.sac,
            reg: self.regularizer,
            suite: self.transforms.clone(),
            seed: self.run.seed,
            total_steps: self.run.total_steps,
            eval_every: self.run.eval_every,
            n_eval_runs: self.run.n_eval_runs,
            log_every: self.run.log_every,
            config_hash: self.config_hash(),
            compat_hash: self.compat_hash(),
        }
    }
}

/// First 16 hex digits of the SHA-256 digest.
pub fn short_hash(bytes: &[u8]) -> String {
    let digest = Sha256::digest(bytes);
    digest[..8].iter().map(|b| format!("{b:02x}")).collect()
}
