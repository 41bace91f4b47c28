use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use super::{QuestionBank, TriviaQuestion};
use crate::error::{Error, Result};

/// The ten example questions used in the classroom walkthrough.
pub const TABLE1_CSV: &str = include_str!("../../data/table1.csv");
/// Thirty further questions for repeated rounds.
pub const APPENDIX_A_CSV: &str = include_str!("../../data/appendix_a.csv");

const HEADER: [&str; 5] = ["id", "text", "answer", "unit", "source"];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum BankFormat {
    /// UTF-8 CSV with header `id,text,answer,unit,source` (RFC 4180 quoting).
    #[default]
    Csv,
}

#[derive(Deserialize, Serialize)]
struct BankRow {
    id: String,
    text: String,
    answer: String,
    unit: String,
    source: String,
}

/// Parses a question bank, preserving file order.
pub fn load_question_bank(raw: impl Read, format: BankFormat, name: &str) -> Result<QuestionBank> {
    match format {
        BankFormat::Csv => load_csv(raw, name),
    }
}

fn load_csv(raw: impl Read, name: &str) -> Result<QuestionBank> {
    let mut reader = csv::ReaderBuilder::new().has_headers(true).from_reader(raw);
    let headers = reader.headers().map_err(|e| csv_error(e, 1))?.clone();
    if headers.iter().map(str::trim).ne(HEADER) {
        return Err(Error::Parse {
            line: 1,
            message: format!("expected header {:?}, found {:?}", HEADER.join(","), headers.iter().collect::<Vec<_>>().join(",")),
        });
    }

    let mut questions = Vec::new();
    for (index, row) in reader.deserialize::<BankRow>().enumerate() {
        // header is line 1; fall back to the row index when csv has no position
        let fallback_line = index + 2;
        let row = row.map_err(|e| csv_error(e, fallback_line))?;
        let id = row.id.trim().to_string();
        if id.is_empty() {
            return Err(Error::Parse { line: fallback_line, message: "empty question id".into() });
        }
        let answer: f64 = row.answer.trim().parse().map_err(|_| Error::Parse {
            line: fallback_line,
            message: format!("answer {:?} is not a decimal literal", row.answer),
        })?;
        if !answer.is_finite() {
            return Err(Error::validation(format!(
                "line {fallback_line}: question {id:?} has non-finite answer {:?}",
                row.answer
            )));
        }
        let source = Some(row.source.trim().to_string()).filter(|s| !s.is_empty());
        questions.push(TriviaQuestion { id, text: row.text, answer, unit: row.unit.trim().to_string(), source });
    }
    QuestionBank::new(name, questions)
}

fn csv_error(err: csv::Error, fallback_line: usize) -> Error {
    let line = err.position().map(|p| p.line() as usize).unwrap_or(fallback_line);
    Error::Parse { line, message: err.to_string() }
}

/// Writes a bank back out in the same CSV layout it is loaded from.
pub fn write_question_bank(bank: &QuestionBank, out: impl Write) -> Result<()> {
    let mut writer = csv::Writer::from_writer(out);
    writer.write_record(HEADER).map_err(into_io)?;
    for q in bank.questions() {
        writer
            .write_record([
                q.id.as_str(),
                q.text.as_str(),
                &q.answer.to_string(),
                q.unit.as_str(),
                q.source.as_deref().unwrap_or(""),
            ])
            .map_err(into_io)?;
    }
    writer.flush()?;
    Ok(())
}

fn into_io(err: csv::Error) -> Error {
    Error::Io(err.into())
}

/// The forty bundled questions: the ten walkthrough questions followed by
/// the thirty extras.
pub fn combined_corpus() -> QuestionBank {
    let table1 = load_question_bank(TABLE1_CSV.as_bytes(), BankFormat::Csv, "table1").expect("bundled bank");
    let extra = load_question_bank(APPENDIX_A_CSV.as_bytes(), BankFormat::Csv, "appendix_a").expect("bundled bank");
    let questions = table1.questions.into_iter().chain(extra.questions).collect();
    QuestionBank::new("combined", questions).expect("bundled ids are distinct")
}
