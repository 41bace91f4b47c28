//! Per-student, per-iteration coverage counts and the CSV layouts they move in.

use std::collections::{BTreeMap, BTreeSet};
use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LongitudinalRecord {
    pub student_id: String,
    /// 1-based round number.
    pub iteration: u32,
    pub covered: u32,
    pub num_scored: u32,
}

/// Possibly unbalanced panel of round scores: students may skip rounds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LongitudinalDataset {
    records: Vec<LongitudinalRecord>,
    iterations: u32,
}

impl LongitudinalDataset {
    /// `iterations` defaults to the largest iteration present when `None`.
    pub fn new(records: Vec<LongitudinalRecord>, iterations: Option<u32>) -> Result<Self> {
        let max_seen = records.iter().map(|r| r.iteration).max().unwrap_or(0);
        let iterations = iterations.unwrap_or(max_seen);
        let mut seen = BTreeSet::new();
        for r in &records {
            if r.iteration == 0 || r.iteration > iterations {
                return Err(Error::validation(format!(
                    "record for {:?} has iteration {} outside 1..={iterations}",
                    r.student_id, r.iteration
                )));
            }
            if r.num_scored == 0 {
                return Err(Error::validation(format!("record for {:?} scores zero questions", r.student_id)));
            }
            if r.covered > r.num_scored {
                return Err(Error::validation(format!(
                    "record for {:?} in iteration {} covers {} of {}",
                    r.student_id, r.iteration, r.covered, r.num_scored
                )));
            }
            if !seen.insert((r.student_id.as_str(), r.iteration)) {
                return Err(Error::validation(format!(
                    "student {:?} has more than one record for iteration {}",
                    r.student_id, r.iteration
                )));
            }
        }
        Ok(Self { records, iterations })
    }

    pub fn records(&self) -> &[LongitudinalRecord] {
        &self.records
    }

    pub fn iterations(&self) -> u32 {
        self.iterations
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn students(&self) -> BTreeSet<&str> {
        self.records.iter().map(|r| r.student_id.as_str()).collect()
    }

    /// Scores grouped by iteration, ascending.
    pub fn scores_by_iteration(&self) -> BTreeMap<u32, Vec<u32>> {
        let mut out: BTreeMap<u32, Vec<u32>> = BTreeMap::new();
        for r in &self.records {
            out.entry(r.iteration).or_default().push(r.covered);
        }
        out
    }
}

/// One line of the per-answer export written at reveal.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResponseExportRow {
    pub session_id: String,
    pub iteration: u32,
    pub student_id: String,
    pub question_id: String,
    pub lower: Option<f64>,
    pub upper: Option<f64>,
    pub covered: u8,
}

pub const RESPONSE_EXPORT_HEADER: &str = "session_id,iteration,student_id,question_id,lower,upper,covered";
pub const AGGREGATED_HEADER: &str = "student_id,iteration,covered,num_scored";

pub fn write_response_export(rows: &[ResponseExportRow], out: impl Write) -> Result<()> {
    let mut writer = csv::Writer::from_writer(out);
    for row in rows {
        writer.serialize(row).map_err(csv_io)?;
    }
    if rows.is_empty() {
        writer.write_record(RESPONSE_EXPORT_HEADER.split(',')).map_err(csv_io)?;
    }
    writer.flush()?;
    Ok(())
}

pub fn write_aggregated_csv(data: &LongitudinalDataset, out: impl Write) -> Result<()> {
    let mut writer = csv::Writer::from_writer(out);
    writer.write_record(AGGREGATED_HEADER.split(',')).map_err(csv_io)?;
    for r in data.records() {
        writer
            .write_record([
                r.student_id.clone(),
                r.iteration.to_string(),
                r.covered.to_string(),
                r.num_scored.to_string(),
            ])
            .map_err(csv_io)?;
    }
    writer.flush()?;
    Ok(())
}

/// Reads either the per-answer response export or the pre-aggregated
/// `student_id,iteration,covered,num_scored` layout, chosen by header.
pub fn read_longitudinal_csv(input: impl Read) -> Result<LongitudinalDataset> {
    let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(input);
    let header: Vec<String> = reader.headers().map_err(|e| parse(e, 1))?.iter().map(String::from).collect();
    let joined = header.join(",");
    if joined == AGGREGATED_HEADER {
        let mut records = Vec::new();
        for (i, row) in reader.deserialize::<LongitudinalRecord>().enumerate() {
            records.push(row.map_err(|e| parse(e, i + 2))?);
        }
        LongitudinalDataset::new(records, None)
    } else if joined == RESPONSE_EXPORT_HEADER {
        let mut rows = Vec::new();
        for (i, row) in reader.deserialize::<ResponseExportRow>().enumerate() {
            rows.push(row.map_err(|e| parse(e, i + 2))?);
        }
        aggregate_responses(&rows)
    } else {
        Err(Error::Parse {
            line: 1,
            message: format!("unrecognized columns {joined:?}; expected {AGGREGATED_HEADER:?} or {RESPONSE_EXPORT_HEADER:?}"),
        })
    }
}

/// Collapses per-answer rows into one record per (student, iteration).
pub fn aggregate_responses(rows: &[ResponseExportRow]) -> Result<LongitudinalDataset> {
    let mut totals: BTreeMap<(u32, &str), (&str, u32, u32)> = BTreeMap::new();
    for row in rows {
        if row.covered > 1 {
            return Err(Error::validation(format!("covered must be 0 or 1, found {}", row.covered)));
        }
        let entry = totals.entry((row.iteration, row.student_id.as_str())).or_insert((row.session_id.as_str(), 0, 0));
        if entry.0 != row.session_id {
            return Err(Error::validation(format!(
                "student {:?} appears in sessions {:?} and {:?} for iteration {}",
                row.student_id, entry.0, row.session_id, row.iteration
            )));
        }
        entry.1 += row.covered as u32;
        entry.2 += 1;
    }
    let records = totals
        .into_iter()
        .map(|((iteration, student), (_, covered, num_scored))| LongitudinalRecord {
            student_id: student.to_string(),
            iteration,
            covered,
            num_scored,
        })
        .collect();
    LongitudinalDataset::new(records, None)
}

fn parse(err: csv::Error, fallback_line: usize) -> Error {
    let line = err.position().map(|p| p.line() as usize).unwrap_or(fallback_line);
    Error::Parse { line, message: err.to_string() }
}

fn csv_io(err: csv::Error) -> Error {
    Error::Io(err.into())
}
