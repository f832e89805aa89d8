//! CSV and JSON result files.

use std::fs::{self, File, OpenOptions};
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{EpisodeAggregate, EpisodeLog, ExperimentConfig};
use crate::error::{Error, Result};

pub const STEPS_FILE: &str = "steps.csv";
pub const AGGREGATE_FILE: &str = "aggregate.csv";
pub const SUMMARY_FILE: &str = "summary.json";

const STEPS_HEADER: [&str; 5] = ["trial", "episode", "step", "reward", "cumulative"];
const AGGREGATE_HEADER: [&str; 3] = ["episode", "mean", "std"];

fn csv_err(path: &Path, e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::io(path, io),
        other => Error::Format(format!("{}: {other:?}", path.display())),
    }
}

fn write_step_rows<W: Write>(w: &mut csv::Writer<W>, log: &EpisodeLog, path: &Path) -> Result<()> {
    let mut cumulative = 0.0;
    for (step, r) in log.rewards.iter().enumerate() {
        cumulative += r;
        w.write_record([
            log.trial.to_string(),
            log.episode.to_string(),
            step.to_string(),
            r.to_string(),
            cumulative.to_string(),
        ])
        .map_err(|e| csv_err(path, e))?;
    }
    Ok(())
}

/// Appends episodes to `steps.csv` as they finish, so an interrupted run keeps
/// every completed episode.
pub struct StepLogWriter {
    path: PathBuf,
    writer: csv::Writer<File>,
}

impl StepLogWriter {
    pub fn create(dir: &Path) -> Result<Self> {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let path = dir.join(STEPS_FILE);
        let file = File::create(&path).map_err(|e| Error::io(&path, e))?;
        let mut writer = csv::Writer::from_writer(file);
        writer.write_record(STEPS_HEADER).map_err(|e| csv_err(&path, e))?;
        writer.flush().map_err(|e| Error::io(&path, e))?;
        Ok(StepLogWriter { path, writer })
    }

    pub fn append(&mut self, log: &EpisodeLog) -> Result<()> {
        write_step_rows(&mut self.writer, log, &self.path)?;
        self.writer.flush().map_err(|e| Error::io(&self.path, e))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeSummary {
    pub trial: usize,
    pub episode: usize,
    pub steps: usize,
    pub cumulative_reward: f64,
    pub model_loss: Option<f64>,
}

/// Contents of `summary.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub library: String,
    pub version: String,
    pub config: ExperimentConfig,
    pub episodes: Vec<EpisodeSummary>,
    pub aggregate: Vec<EpisodeAggregate>,
}

impl RunSummary {
    pub fn new(cfg: &ExperimentConfig, logs: &[EpisodeLog], aggregates: &[EpisodeAggregate]) -> Self {
        RunSummary {
            library: env!("CARGO_PKG_NAME").into(),
            version: env!("CARGO_PKG_VERSION").into(),
            config: cfg.clone(),
            episodes: logs
                .iter()
                .map(|l| EpisodeSummary {
                    trial: l.trial,
                    episode: l.episode,
                    steps: l.rewards.len(),
                    cumulative_reward: l.cumulative_reward,
                    model_loss: l.model_loss,
                })
                .collect(),
            aggregate: aggregates.to_vec(),
        }
    }

    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string_pretty(self).map_err(|e| Error::Format(e.to_string()))
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Format(e.to_string()))
    }
}

pub fn write_aggregate_csv(path: &Path, aggregates: &[EpisodeAggregate]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| csv_err(path, e))?;
    w.write_record(AGGREGATE_HEADER).map_err(|e| csv_err(path, e))?;
    for a in aggregates {
        w.write_record([a.episode.to_string(), a.mean.to_string(), a.std.to_string()])
            .map_err(|e| csv_err(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Writes `steps.csv`, `aggregate.csv` and `summary.json` into `dir`.
pub fn emit_results(cfg: &ExperimentConfig, logs: &[EpisodeLog], aggregates: &[EpisodeAggregate], dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let steps = dir.join(STEPS_FILE);
    {
        let file = OpenOptions::new().write(true).create(true).truncate(true).open(&steps).map_err(|e| Error::io(&steps, e))?;
        let mut w = csv::Writer::from_writer(file);
        w.write_record(STEPS_HEADER).map_err(|e| csv_err(&steps, e))?;
        for log in logs {
            write_step_rows(&mut w, log, &steps)?;
        }
        w.flush().map_err(|e| Error::io(&steps, e))?;
    }
    write_aggregate_csv(&dir.join(AGGREGATE_FILE), aggregates)?;
    let summary = dir.join(SUMMARY_FILE);
    let mut json = RunSummary::new(cfg, logs, aggregates).to_json()?;
    json.push('\n');
    fs::write(&summary, json).map_err(|e| Error::io(&summary, e))
}

/// Rebuilds per-episode reward lists from a `steps.csv`.
pub fn read_steps_csv(path: &Path) -> Result<Vec<EpisodeLog>> {
    let mut reader = csv::Reader::from_path(path).map_err(|e| csv_err(path, e))?;
    let headers = reader.headers().map_err(|e| csv_err(path, e))?.clone();
    if headers.iter().collect::<Vec<_>>() != STEPS_HEADER {
        return Err(Error::Format(format!("{}: unexpected header {headers:?}", path.display())));
    }
    let mut logs: Vec<EpisodeLog> = Vec::new();
    for (i, rec) in reader.records().enumerate() {
        let rec = rec.map_err(|e| csv_err(path, e))?;
        let field = |j: usize| rec.get(j).unwrap_or("");
        let bad = || Error::Format(format!("{}: bad data row {}", path.display(), i + 1));
        let trial: usize = field(0).parse().map_err(|_| bad())?;
        let episode: usize = field(1).parse().map_err(|_| bad())?;
        let step: usize = field(2).parse().map_err(|_| bad())?;
        let reward: f64 = field(3).parse().map_err(|_| bad())?;
        let same = logs.last().is_some_and(|l| l.trial == trial && l.episode == episode);
        if !same {
            logs.push(EpisodeLog::new(trial, episode, Vec::new(), None));
        }
        let log = logs.last_mut().expect("pushed above");
        if step != log.rewards.len() {
            return Err(bad());
        }
        log.rewards.push(reward);
    }
    for log in &mut logs {
        log.cumulative_reward = log.rewards.iter().sum();
    }
    Ok(logs)
}
