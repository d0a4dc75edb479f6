//! Append-only run history and its line-oriented persistence.
//!
//! Each evaluated individual becomes one JSON line in `trajectory.jsonl`;
//! optimizer snapshots are persisted separately through the checkpoint file.

use serde::{Deserialize, Serialize};
use serde_json::Value;
use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::fitness::{EvalStatus, FitnessVector};
use crate::individual::{Individual, NamedParam};

pub const TRAJECTORY_FILE: &str = "trajectory.jsonl";

/// One evaluated individual as kept in memory.
#[derive(Debug, Clone, PartialEq)]
pub struct RecordedEval {
    pub individual: Individual,
    pub fitness: FitnessVector,
    pub weighted_fitness: f64,
    pub status: EvalStatus,
    pub wall_time_s: f64,
}

/// Wire format of one trajectory line. Field names are fixed.
#[derive(Debug, Clone, Serialize, Deserialize)]
struct LineRecord {
    generation: u64,
    index: usize,
    params: Vec<NamedParam>,
    fitness: FitnessVector,
    weighted_fitness: f64,
    status: EvalStatus,
    wall_time_s: f64,
}

impl From<&RecordedEval> for LineRecord {
    fn from(e: &RecordedEval) -> Self {
        LineRecord {
            generation: e.individual.generation,
            index: e.individual.index,
            params: e.individual.params.clone(),
            fitness: e.fitness.clone(),
            weighted_fitness: e.weighted_fitness,
            status: e.status,
            wall_time_s: e.wall_time_s,
        }
    }
}

impl From<LineRecord> for RecordedEval {
    fn from(l: LineRecord) -> Self {
        RecordedEval {
            individual: Individual::new(l.generation, l.index, l.params),
            fitness: l.fitness,
            weighted_fitness: l.weighted_fitness,
            status: l.status,
            wall_time_s: l.wall_time_s,
        }
    }
}

/// All evaluations of one generation plus the optimizer snapshot taken
/// after its update step.
#[derive(Debug, Clone, PartialEq)]
pub struct GenerationRecord {
    pub generation: u64,
    pub entries: Vec<RecordedEval>,
    pub optimizer_snapshot: Value,
}

impl GenerationRecord {
    /// Serializes all entries as JSON lines (one buffer, appended atomically).
    pub fn to_jsonl(&self) -> Result<String> {
        let mut out = String::new();
        for entry in &self.entries {
            out.push_str(&serde_json::to_string(&LineRecord::from(entry))?);
            out.push('\n');
        }
        Ok(out)
    }
}

/// Append-only per-generation history of a run.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub run_name: String,
    pub rng_seed: u64,
    records: Vec<GenerationRecord>,
}

impl Trajectory {
    pub fn new(run_name: impl Into<String>, rng_seed: u64) -> Self {
        Trajectory { run_name: run_name.into(), rng_seed, records: Vec::new() }
    }

    pub fn records(&self) -> &[GenerationRecord] {
        &self.records
    }

    /// Appends a record; generation numbers must increase by 1 from 0.
    pub fn append(&mut self, record: GenerationRecord) -> Result<()> {
        let expected = self.records.len() as u64;
        if record.generation != expected {
            return Err(Error::config(format!(
                "generation {} appended out of order (expected {})",
                record.generation, expected
            )));
        }
        for (i, entry) in record.entries.iter().enumerate() {
            if entry.individual.generation != record.generation || entry.individual.index != i {
                return Err(Error::config(format!(
                    "entry {} of generation {} is misnumbered",
                    i, record.generation
                )));
            }
        }
        self.records.push(record);
        Ok(())
    }

    /// Best OK entry over all generations by weighted fitness; ties broken by
    /// lower generation, then lower index.
    pub fn best_entry(&self) -> Result<&RecordedEval> {
        self.records
            .iter()
            .flat_map(|r| r.entries.iter())
            .filter(|e| e.status.is_ok())
            .max_by(|a, b| {
                a.weighted_fitness
                    .partial_cmp(&b.weighted_fitness)
                    .expect("ok entries have finite weighted fitness")
                    // reversed index/generation: max_by keeps the later of
                    // equals, so earlier entries must compare greater
                    .then_with(|| b.individual.generation.cmp(&a.individual.generation))
                    .then_with(|| b.individual.index.cmp(&a.individual.index))
            })
            .ok_or(Error::EmptyTrajectory)
    }

    /// Loads entry lines from a `trajectory.jsonl` file. Snapshots are not
    /// stored per line, so loaded records carry `Value::Null`.
    pub fn load_jsonl(path: &Path, run_name: &str, rng_seed: u64) -> Result<Self> {
        let file = File::open(path)?;
        let mut trajectory = Trajectory::new(run_name, rng_seed);
        let mut current: Option<GenerationRecord> = None;
        for line in BufReader::new(file).lines() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let entry: RecordedEval = serde_json::from_str::<LineRecord>(&line)?.into();
            let generation = entry.individual.generation;
            match current.as_mut() {
                Some(rec) if rec.generation == generation => rec.entries.push(entry),
                _ => {
                    if let Some(done) = current.take() {
                        trajectory.append(done)?;
                    }
                    current = Some(GenerationRecord {
                        generation,
                        entries: vec![entry],
                        optimizer_snapshot: Value::Null,
                    });
                }
            }
        }
        if let Some(done) = current.take() {
            trajectory.append(done)?;
        }
        Ok(trajectory)
    }
}

/// Appends one generation's lines with a single write call.
pub fn append_generation(path: &Path, record: &GenerationRecord) -> Result<()> {
    let buffer = record.to_jsonl()?;
    let mut file = OpenOptions::new().create(true).append(true).open(path)?;
    file.write_all(buffer.as_bytes())?;
    file.sync_data()?;
    Ok(())
}

/// Drops any lines beyond `last_generation` (left by a run that was killed
/// after appending entries but before checkpointing). Rewrites atomically.
pub fn truncate_after(path: &Path, last_generation: u64) -> Result<()> {
    let file = File::open(path)?;
    let mut kept = String::new();
    let mut dropped = 0usize;
    for line in BufReader::new(file).lines() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let record: LineRecord = serde_json::from_str(&line)?;
        if record.generation <= last_generation {
            kept.push_str(&line);
            kept.push('\n');
        } else {
            dropped += 1;
        }
    }
    if dropped > 0 {
        log::warn!(
            "dropping {} trajectory lines past checkpointed generation {}",
            dropped,
            last_generation
        );
        let tmp = path.with_extension("jsonl.tmp");
        std::fs::write(&tmp, kept)?;
        std::fs::rename(&tmp, path)?;
    }
    Ok(())
}
