use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};

use super::spectrum::DEFAULT_SAMPLE_RATE;

pub const ACTION_LOG_HEADER: &str = "step,episode,steer,speed,reward,progress,terminated";

/// One control step of an evaluation episode.
#[derive(Debug, Clone, PartialEq)]
pub struct ActionRecord {
    pub step: u64,
    pub episode: u64,
    pub steer: f64,
    pub speed: f64,
    pub reward: f64,
    /// Laps covered since the episode start (1.0 = one full lap).
    pub progress: f64,
    /// `running`, a termination reason, or `truncated`.
    pub terminated: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ActionLog {
    pub sample_rate: f64,
    pub records: Vec<ActionRecord>,
}

/// Records of one episode, in step order.
#[derive(Debug, Clone, Copy)]
pub struct EpisodeView<'a> {
    pub episode: u64,
    pub records: &'a [ActionRecord],
}

impl EpisodeView<'_> {
    pub fn completed(&self) -> bool {
        self.records
            .last()
            .is_some_and(|r| r.terminated == "lap_complete")
    }

    pub fn steering(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.steer).collect()
    }

    pub fn speed(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.speed).collect()
    }

    pub fn progress(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.progress).collect()
    }
}

impl Default for ActionLog {
    fn default() -> Self {
        Self::new(DEFAULT_SAMPLE_RATE)
    }
}

impl ActionLog {
    pub fn new(sample_rate: f64) -> Self {
        Self {
            sample_rate,
            records: Vec::new(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    /// Check that `f_s > 0` and steps within each episode are consecutive.
    pub fn validate(&self) -> Result<()> {
        if !(self.sample_rate > 0.0) {
            return Err(Error::param("sample rate must be positive"));
        }
        for ep in self.episodes() {
            for (k, pair) in ep.records.windows(2).enumerate() {
                if pair[1].step != pair[0].step + 1 {
                    return Err(Error::param(format!(
                        "episode {}: step {} follows step {} (record {})",
                        ep.episode,
                        pair[1].step,
                        pair[0].step,
                        k + 1
                    )));
                }
            }
        }
        Ok(())
    }

    /// Contiguous runs of records sharing an episode id.
    pub fn episodes(&self) -> Vec<EpisodeView<'_>> {
        let mut out = Vec::new();
        let mut start = 0;
        for i in 1..=self.records.len() {
            if i == self.records.len() || self.records[i].episode != self.records[start].episode {
                if i > start {
                    out.push(EpisodeView {
                        episode: self.records[start].episode,
                        records: &self.records[start..i],
                    });
                }
                start = i;
            }
        }
        out
    }

    pub fn to_csv(&self) -> String {
        let mut out = format!("{ACTION_LOG_HEADER}\n");
        for r in &self.records {
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{}",
                r.step, r.episode, r.steer, r.speed, r.reward, r.progress, r.terminated
            );
        }
        out
    }

    pub fn from_csv(text: &str, sample_rate: f64) -> Result<Self> {
        let mut lines = text.lines();
        match lines.next() {
            Some(h) if h.trim() == ACTION_LOG_HEADER => {}
            other => {
                return Err(Error::param(format!(
                    "action log header must be `{ACTION_LOG_HEADER}`, got {other:?}"
                )))
            }
        }
        let mut records = Vec::new();
        for (i, line) in lines.enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let f: Vec<&str> = line.split(',').collect();
            if f.len() != 7 {
                return Err(Error::param(format!("line {}: expected 7 columns", i + 2)));
            }
            let bad = |e: &dyn std::fmt::Display| Error::param(format!("line {}: {e}", i + 2));
            records.push(ActionRecord {
                step: f[0].trim().parse().map_err(|e| bad(&e))?,
                episode: f[1].trim().parse().map_err(|e| bad(&e))?,
                steer: f[2].trim().parse().map_err(|e| bad(&e))?,
                speed: f[3].trim().parse().map_err(|e| bad(&e))?,
                reward: f[4].trim().parse().map_err(|e| bad(&e))?,
                progress: f[5].trim().parse().map_err(|e| bad(&e))?,
                terminated: f[6].trim().to_string(),
            });
        }
        let log = Self {
            sample_rate,
            records,
        };
        log.validate()?;
        Ok(log)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_csv()).map_err(|e| Error::file(path, e))
    }

    pub fn load(path: &Path, sample_rate: f64) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::file(path, e))?;
        Self::from_csv(&text, sample_rate).map_err(|e| Error::format(path, e.to_string()))
    }
}
