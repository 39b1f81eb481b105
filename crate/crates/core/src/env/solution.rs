//! Solved-tour record and its JSON persistence.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde_json::{json, Value};

use crate::env::cvrp::tour_length;
use crate::error::{Error, Result};
use crate::instances::ProblemInstance;

/// A decoded or constructed tour with its evaluation.
#[derive(Debug, Clone, PartialEq)]
pub struct Solution {
    pub instance_id: String,
    pub solver_tag: String,
    /// Node sequence including depot separators; starts and ends at the
    /// depot for CVRP.
    pub sequence: Vec<usize>,
    pub total_length: f64,
    /// Log-probability per decoding step; empty for heuristic solutions.
    pub per_step_logprob: Vec<f64>,
    pub wall_time_s: f64,
    pub split_mode: bool,
}

impl Solution {
    /// Builds a solution from a sequence, computing its length from the
    /// instance geometry so the stored value always matches a
    /// recomputation.
    pub fn from_sequence(
        instance: &ProblemInstance,
        solver_tag: impl Into<String>,
        sequence: Vec<usize>,
        wall_time_s: f64,
    ) -> Result<Self> {
        let total_length = tour_length(instance, &sequence)?;
        Ok(Self {
            instance_id: instance.id.clone(),
            solver_tag: solver_tag.into(),
            sequence,
            total_length,
            per_step_logprob: Vec::new(),
            wall_time_s,
            split_mode: false,
        })
    }

    /// Sum of the per-step log-probabilities (the sequence log-likelihood
    /// under the policy that produced it).
    pub fn log_prob(&self) -> f64 {
        self.per_step_logprob.iter().sum()
    }

    fn to_json(&self) -> Value {
        json!({
            "instance_id": self.instance_id,
            "solver_tag": self.solver_tag,
            "sequence": self.sequence,
            "total_length": self.total_length,
            "wall_time_s": self.wall_time_s,
            "split_mode": self.split_mode,
        })
    }

    fn from_json(v: &Value, line: usize) -> Result<Self> {
        let get = |name: &str| -> Result<&Value> {
            v.get(name).ok_or_else(|| Error::Schema { line, field: name.into() })
        };
        let sequence = get("sequence")?
            .as_array()
            .ok_or_else(|| Error::Schema { line, field: "sequence".into() })?
            .iter()
            .map(|x| x.as_u64().map(|u| u as usize))
            .collect::<Option<Vec<_>>>()
            .ok_or_else(|| Error::Schema { line, field: "sequence".into() })?;
        Ok(Self {
            instance_id: get("instance_id")?
                .as_str()
                .ok_or_else(|| Error::Schema { line, field: "instance_id".into() })?
                .to_string(),
            solver_tag: get("solver_tag")?
                .as_str()
                .ok_or_else(|| Error::Schema { line, field: "solver_tag".into() })?
                .to_string(),
            sequence,
            total_length: get("total_length")?
                .as_f64()
                .ok_or_else(|| Error::Schema { line, field: "total_length".into() })?,
            per_step_logprob: Vec::new(),
            wall_time_s: get("wall_time_s")?
                .as_f64()
                .ok_or_else(|| Error::Schema { line, field: "wall_time_s".into() })?,
            split_mode: get("split_mode")?
                .as_bool()
                .ok_or_else(|| Error::Schema { line, field: "split_mode".into() })?,
        })
    }
}

/// Writes solutions as JSON Lines.
pub fn write_solutions<P: AsRef<Path>>(path: P, solutions: &[Solution]) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    for s in solutions {
        serde_json::to_writer(&mut w, &s.to_json())
            .map_err(|e| Error::Parse { line: 0, detail: e.to_string() })?;
        w.write_all(b"\n")?;
    }
    w.flush()?;
    Ok(())
}

/// Reads a JSON-Lines solution file.
pub fn read_solutions<P: AsRef<Path>>(path: P) -> Result<Vec<Solution>> {
    let reader = BufReader::new(File::open(path)?);
    let mut out = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let lineno = i + 1;
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let value: Value = serde_json::from_str(&line)
            .map_err(|e| Error::Parse { line: lineno, detail: e.to_string() })?;
        out.push(Solution::from_json(&value, lineno)?);
    }
    Ok(out)
}
