use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::config::ExperimentConfig;
use super::run::{cmd_train, RunStatus};
use crate::error::{Error, Result};
use crate::metrics::EvalReport;
use crate::regularizers::{RegConfig, RegMode};
use crate::transforms::TransformSuite;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AblationSuite {
    /// Temporal and spatial smoothness terms, both weights set to 1.
    IrasComponents,
    /// Photometric and geometric similar-state transforms under spatial
    /// smoothness only.
    SpatialTransforms,
}

impl AblationSuite {
    pub fn name(self) -> &'static str {
        match self {
            AblationSuite::IrasComponents => "iras_components",
            AblationSuite::SpatialTransforms => "spatial_transforms",
        }
    }
}

impl std::str::FromStr for AblationSuite {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "iras_components" => Ok(AblationSuite::IrasComponents),
            "spatial_transforms" => Ok(AblationSuite::SpatialTransforms),
            other => Err(Error::param(format!("unknown ablation suite `{other}`"))),
        }
    }
}

pub const TABLE_COLUMNS: [&str; 4] = [
    "Agents",
    "Success rate (%)",
    "Finish lap time (s)",
    "Steering S_m",
];

/// Row labels and configs for a suite, derived from `base`.
pub fn variants(suite: AblationSuite, base: &ExperimentConfig) -> Vec<(&'static str, ExperimentConfig)> {
    let unit = RegConfig {
        lambda_t: 1.0,
        lambda_s: 1.0,
        ir_control: false,
        ..base.regularizer
    };
    let with = |reg: RegConfig, transforms: Option<TransformSuite>| {
        let mut c = base.clone();
        c.regularizer = reg;
        if let Some(t) = transforms {
            c.transforms = t;
        }
        c
    };
    let vanilla = with(RegConfig { mode: RegMode::None, ..unit }, None);
    let params = base.transforms.params.clone();
    match suite {
        AblationSuite::IrasComponents => vec![
            ("Vanilla SAC", vanilla),
            ("Temporal", with(RegConfig { mode: RegMode::TemporalOnly, ..unit }, None)),
            ("Spatial", with(RegConfig { mode: RegMode::SpatialOnly, ..unit }, None)),
            ("I-RAS", with(RegConfig { mode: RegMode::Both, ..unit }, None)),
        ],
        AblationSuite::SpatialTransforms => {
            let spatial = RegConfig {
                mode: RegMode::SpatialOnly,
                ..unit
            };
            vec![
                ("Vanilla SAC", vanilla),
                (
                    "Photometric",
                    with(spatial, Some(TransformSuite::photometric_only(params.clone()))),
                ),
                (
                    "Geometric",
                    with(spatial, Some(TransformSuite::geometric_only(params.clone()))),
                ),
                ("Both (Spatial)", with(spatial, Some(TransformSuite::full(params)))),
            ]
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeedResult {
    pub seed: u64,
    /// Fraction in `[0, 1]`.
    pub success_rate: f64,
    pub lap_times: Vec<f64>,
    pub steering_sm: Option<f64>,
}

impl SeedResult {
    pub fn from_report(seed: u64, r: &EvalReport) -> Self {
        Self {
            seed,
            success_rate: r.success_rate,
            lap_times: r.episodes.iter().filter_map(|e| e.lap_time).collect(),
            steering_sm: r.steering_sm,
        }
    }

    fn lap_stats(&self) -> (Option<f64>, Option<f64>) {
        mean_std(&self.lap_times)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AblationRow {
    pub agent: String,
    pub seeds: Vec<SeedResult>,
}

fn mean_std(v: &[f64]) -> (Option<f64>, Option<f64>) {
    if v.is_empty() {
        return (None, None);
    }
    let n = v.len() as f64;
    let m = v.iter().sum::<f64>() / n;
    let s = if v.len() < 2 {
        0.0
    } else {
        (v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
    };
    (Some(m), Some(s))
}

impl AblationRow {
    /// Mean success rate over seeds, in percent.
    pub fn success_pct(&self) -> f64 {
        100.0 * self.seeds.iter().map(|s| s.success_rate).sum::<f64>() / self.seeds.len().max(1) as f64
    }

    /// Mean and sample std over all completed laps of all seeds.
    pub fn lap_time(&self) -> (Option<f64>, Option<f64>) {
        let all: Vec<f64> = self.seeds.iter().flat_map(|s| s.lap_times.iter().copied()).collect();
        mean_std(&all)
    }

    /// Mean over seeds that completed at least one lap.
    pub fn steering_sm(&self) -> Option<f64> {
        let v: Vec<f64> = self.seeds.iter().filter_map(|s| s.steering_sm).collect();
        mean_std(&v).0
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AblationTable {
    pub suite: AblationSuite,
    pub rows: Vec<AblationRow>,
}

fn fmt_opt(v: Option<f64>, digits: usize) -> String {
    v.map_or("n/a".into(), |x| format!("{x:.digits$}"))
}

impl AblationTable {
    /// Aggregate table followed by the per-seed values.
    pub fn to_markdown(&self) -> String {
        let mut s = format!("## {}\n\n", self.suite.name());
        let _ = writeln!(s, "| {} |", TABLE_COLUMNS.join(" | "));
        let _ = writeln!(s, "|---|---|---|---|");
        for r in &self.rows {
            let lap = match r.lap_time() {
                (Some(m), Some(sd)) => format!("{m:.2} ± {sd:.2}"),
                _ => "n/a".into(),
            };
            let _ = writeln!(
                s,
                "| {} | {:.1} | {} | {} |",
                r.agent,
                r.success_pct(),
                lap,
                fmt_opt(r.steering_sm(), 4)
            );
        }
        let _ = writeln!(s, "\n### per seed\n");
        let _ = writeln!(s, "| Agents | Seed | {} |", TABLE_COLUMNS[1..].join(" | "));
        let _ = writeln!(s, "|---|---|---|---|---|");
        for r in &self.rows {
            for sd in &r.seeds {
                let lap = match sd.lap_stats() {
                    (Some(m), Some(dev)) => format!("{m:.2} ± {dev:.2}"),
                    _ => "n/a".into(),
                };
                let _ = writeln!(
                    s,
                    "| {} | {} | {:.1} | {} | {} |",
                    r.agent,
                    sd.seed,
                    100.0 * sd.success_rate,
                    lap,
                    fmt_opt(sd.steering_sm, 4)
                );
            }
        }
        s
    }

    pub fn per_seed_csv(&self) -> String {
        let mut s = String::from("agent,seed,success_rate_pct,lap_time_mean_s,lap_time_std_s,steering_sm\n");
        let opt = |v: Option<f64>| v.map_or(String::new(), |x| x.to_string());
        for r in &self.rows {
            for sd in &r.seeds {
                let (m, dev) = sd.lap_stats();
                let _ = writeln!(
                    s,
                    "{},{},{},{},{},{}",
                    r.agent,
                    sd.seed,
                    100.0 * sd.success_rate,
                    opt(m),
                    opt(dev),
                    opt(sd.steering_sm)
                );
            }
        }
        s
    }
}

fn slug(agent: &str) -> String {
    agent
        .chars()
        .filter_map(|c| match c {
            'a'..='z' | '0'..='9' => Some(c),
            'A'..='Z' => Some(c.to_ascii_lowercase()),
            ' ' | '-' => Some('_'),
            _ => None,
        })
        .collect()
}

#[derive(Debug, Clone)]
pub struct AblationOutput {
    pub table: AblationTable,
    pub files: Vec<PathBuf>,
}

/// Train and evaluate every variant of `suite` for each seed, then write
/// the table as markdown, per-seed CSV and JSON into `out_dir`.
pub fn cmd_ablate(
    suite: AblationSuite,
    base: &ExperimentConfig,
    seeds: &[u64],
    out_dir: &Path,
    mut progress: Option<&mut dyn FnMut(&str, u64, &EvalReport)>,
) -> Result<AblationOutput> {
    base.validate()?;
    if seeds.is_empty() {
        return Err(Error::param("at least one seed is required"));
    }
    if base.run.n_eval_runs == 0 {
        return Err(Error::Config {
            key: "run.n_eval_runs".into(),
            message: "ablation needs a final evaluation".into(),
        });
    }
    let mut rows = Vec::new();
    for (agent, cfg) in variants(suite, base) {
        let mut results = Vec::new();
        for &seed in seeds {
            let mut c = cfg.clone();
            c.run.seed = seed;
            c.run.output_dir = out_dir.join(slug(agent)).join(format!("seed_{seed}"));
            let m = cmd_train(&c, None)?;
            if let RunStatus::Aborted { step, reason } = &m.status {
                return Err(Error::numeric(format!("{agent} seed {seed} aborted at step {step}: {reason}")));
            }
            let report = m
                .final_eval
                .ok_or_else(|| Error::State(format!("{agent} seed {seed}: no evaluation")))?;
            if let Some(p) = progress.as_mut() {
                p(agent, seed, &report);
            }
            results.push(SeedResult::from_report(seed, &report));
        }
        rows.push(AblationRow {
            agent: agent.to_string(),
            seeds: results,
        });
    }
    let table = AblationTable { suite, rows };
    let stem = format!("ablation_{}", suite.name());
    let files = vec![
        out_dir.join(format!("{stem}.md")),
        out_dir.join(format!("{stem}.csv")),
        out_dir.join(format!("{stem}.json")),
    ];
    let contents = [
        table.to_markdown(),
        table.per_seed_csv(),
        serde_json::to_string_pretty(&table).expect("table is plain data"),
    ];
    for (p, text) in files.iter().zip(contents) {
        fs::write(p, text).map_err(|e| Error::file(p, e))?;
    }
    Ok(AblationOutput { table, files })
}
