use std::collections::{BTreeMap, BTreeSet};
use std::fs::File;
use std::future::Future;
use std::io::{self, BufReader, Write};
use std::net::SocketAddr;
use std::path::Path;

use calib_core::analytics::glmm::write_plot_data;
use calib_core::analytics::{
    compare_pre_post, detect_outlier_intervals, fit_glmm, logit, read_longitudinal_csv, simulate_cohort,
    summarize_scores_out_of, write_aggregated_csv, FitReport, FlagRule, GlmmSpec, LongitudinalDataset, PrePostReport,
    QuestionTally, ScoreSummary,
};
use calib_core::quiz::{load_question_bank, score_sheet, BankFormat, TABLE1_CSV};
use calib_core::{IntervalAnswer, QuestionBank, ResponseSheet, SessionConfig};
use serde::{Deserialize, Serialize};

use crate::args::{
    FitArgs, FlagArgs, OutputFormat, PrePostArgs, ScoreArgs, ServeArgs, SimulateArgs, SummarizeArgs, ValidateArgs,
};
use crate::server::{self, AppState, ServerConfig};
use crate::{CliError, EXIT_OK, EXIT_PORT_BUSY, EXIT_UNCONVERGED};

pub type Outcome = Result<u8, CliError>;

fn open(path: &Path) -> Result<BufReader<File>, CliError> {
    File::open(path)
        .map(BufReader::new)
        .map_err(|e| CliError::input(format!("{}: {e}", path.display())))
}

fn in_file(path: &Path) -> impl FnOnce(calib_core::Error) -> CliError + '_ {
    move |e| CliError::input(format!("{}: {e}", path.display()))
}

pub fn load_bank(path: &Path) -> Result<QuestionBank, CliError> {
    let name = path.file_stem().and_then(|s| s.to_str()).unwrap_or("bank");
    load_question_bank(open(path)?, BankFormat::Csv, name).map_err(in_file(path))
}

fn load_dataset(path: &Path) -> Result<LongitudinalDataset, CliError> {
    read_longitudinal_csv(open(path)?).map_err(in_file(path))
}

fn csv_error(path: &Path, err: csv::Error) -> CliError {
    let line = err.position().map(|p| format!(" line {}", p.line())).unwrap_or_default();
    CliError::input(format!("{}{line}: {err}", path.display()))
}

pub fn questions_validate(args: &ValidateArgs, out: &mut dyn Write) -> Outcome {
    let bank = load_bank(&args.bank)?;
    writeln!(out, "{}: {} questions ok", args.bank.display(), bank.len())?;
    Ok(EXIT_OK)
}

#[derive(Debug, Deserialize)]
struct ResponseRow {
    student_id: String,
    question_id: String,
    lower: Option<f64>,
    upper: Option<f64>,
}

/// Reads `student_id,question_id,lower,upper` rows (extra columns are
/// ignored, so a session's response export works too). Rows with empty
/// bounds are unanswered questions and are skipped.
pub fn read_response_sheets(path: &Path) -> Result<Vec<ResponseSheet>, CliError> {
    let mut reader = csv::Reader::from_reader(open(path)?);
    let mut by_student: BTreeMap<String, Vec<IntervalAnswer>> = BTreeMap::new();
    for row in reader.deserialize::<ResponseRow>() {
        let row = row.map_err(|e| csv_error(path, e))?;
        let answers = by_student.entry(row.student_id).or_default();
        match (row.lower, row.upper) {
            (Some(lower), Some(upper)) => answers.push(IntervalAnswer::new(row.question_id, lower, upper).map_err(in_file(path))?),
            (None, None) => {}
            _ => return Err(CliError::input(format!("{}: {} has only one bound", path.display(), row.question_id))),
        }
    }
    if by_student.is_empty() {
        return Err(CliError::input(format!("{}: no responses", path.display())));
    }
    by_student
        .into_iter()
        .map(|(student, answers)| ResponseSheet::new(student, answers).map_err(in_file(path)))
        .collect()
}

#[derive(Debug, Serialize)]
struct ScoreRow<'a> {
    student_id: &'a str,
    covered: usize,
    num_scored: usize,
}

pub fn score(args: &ScoreArgs, out: &mut dyn Write) -> Outcome {
    let bank = load_bank(&args.bank)?;
    let sheets = read_response_sheets(&args.responses)?;
    let scored: BTreeSet<String> = match &args.scored_ids {
        Some(ids) => ids.iter().map(|s| s.trim().to_string()).collect(),
        None => bank.ids().map(String::from).collect(),
    };
    let mut writer = csv::Writer::from_writer(out);
    for sheet in &sheets {
        let s = score_sheet(sheet, &bank, &scored)?;
        writer
            .serialize(ScoreRow { student_id: &s.student_id, covered: s.covered, num_scored: s.num_scored })
            .map_err(|e| CliError::input(e.to_string()))?;
    }
    writer.flush()?;
    Ok(EXIT_OK)
}

/// Summary layout: one column per iteration, rows n, mode, median, mean, sd.
pub fn summary_table(data: &LongitudinalDataset) -> Result<Vec<(u32, ScoreSummary)>, CliError> {
    let max = data.records().iter().map(|r| r.num_scored).max().unwrap_or(10);
    data.scores_by_iteration()
        .into_iter()
        .map(|(r, scores)| Ok((r, summarize_scores_out_of(&scores, max)?)))
        .collect()
}

fn summary_cells(summary: &ScoreSummary) -> [String; 5] {
    [
        summary.n.to_string(),
        summary.mode.to_string(),
        format!("{:.1}", summary.median),
        format!("{:.1}", summary.mean),
        format!("{:.1}", summary.sd),
    ]
}

const SUMMARY_ROWS: [&str; 5] = ["n", "mode", "median", "mean", "sd"];

pub fn summarize(args: &SummarizeArgs, out: &mut dyn Write) -> Outcome {
    if args.by != "iteration" {
        return Err(CliError::input(format!("cannot group by unknown column {:?}; only iteration is supported", args.by)));
    }
    let data = load_dataset(&args.input)?;
    if data.is_empty() {
        return Err(CliError::input(format!("{}: no records", args.input.display())));
    }
    let table = summary_table(&data)?;
    let columns: Vec<[String; 5]> = table.iter().map(|(_, s)| summary_cells(s)).collect();
    match args.format {
        OutputFormat::Csv => {
            let mut writer = csv::Writer::from_writer(out);
            let header = std::iter::once("statistic".to_string()).chain(table.iter().map(|(r, _)| r.to_string()));
            writer.write_record(header).map_err(|e| CliError::input(e.to_string()))?;
            for (i, name) in SUMMARY_ROWS.iter().enumerate() {
                let row = std::iter::once(name.to_string()).chain(columns.iter().map(|c| c[i].clone()));
                writer.write_record(row).map_err(|e| CliError::input(e.to_string()))?;
            }
            writer.flush()?;
        }
        OutputFormat::Text => {
            write!(out, "{:<10}", "iteration")?;
            for (r, _) in &table {
                write!(out, "{r:>8}")?;
            }
            writeln!(out)?;
            for (i, name) in SUMMARY_ROWS.iter().enumerate() {
                write!(out, "{name:<10}")?;
                for c in &columns {
                    write!(out, "{:>8}", c[i])?;
                }
                writeln!(out)?;
            }
        }
    }
    Ok(EXIT_OK)
}

pub fn fit(args: &FitArgs, out: &mut dyn Write) -> Outcome {
    let data = load_dataset(&args.input)?;
    if data.is_empty() {
        return Err(CliError::input(format!("{}: no records to fit", args.input.display())));
    }
    let spec = GlmmSpec {
        questions_per_round: args.questions,
        chains: args.chains,
        draws: args.draws,
        warmup: args.warmup,
        seed: args.seed,
        ..GlmmSpec::default()
    };
    spec.validate()?;
    let fit = fit_glmm(&data, &spec)?;
    let report = FitReport::new(&fit, args.mode)?;
    serde_json::to_writer_pretty(&mut *out, &report).map_err(|e| CliError::input(e.to_string()))?;
    writeln!(out)?;
    if let Some(dir) = &args.plot_dir {
        std::fs::create_dir_all(dir)?;
        let students = File::create(dir.join("students.csv"))?;
        let iterations = File::create(dir.join("iterations.csv"))?;
        write_plot_data(&data, &fit, args.mode, students, iterations)?;
    }
    for warning in &report.warnings {
        tracing::warn!("{warning}");
    }
    Ok(if fit.converged { EXIT_OK } else { EXIT_UNCONVERGED })
}

pub fn simulate(args: &SimulateArgs, out: &mut dyn Write) -> Outcome {
    if let Some(p) = args.success.iter().find(|p| !(**p > 0.0 && **p < 1.0)) {
        return Err(CliError::input(format!("success probability {p} is outside (0, 1)")));
    }
    if !args.sigma.is_finite() || args.sigma < 0.0 {
        return Err(CliError::input("sigma must be non-negative"));
    }
    let alpha: Vec<f64> = args.success.iter().map(|&p| logit(p)).collect();
    let data = simulate_cohort(args.students, &alpha, args.sigma, args.questions, args.seed)?;
    write_aggregated_csv(&data, out)?;
    Ok(EXIT_OK)
}

#[derive(Debug, Serialize)]
struct FlagRow<'a> {
    student_id: &'a str,
    question_id: &'a str,
    z: f64,
}

pub fn flag(args: &FlagArgs, out: &mut dyn Write) -> Outcome {
    let bank = load_bank(&args.bank)?;
    let sheets = read_response_sheets(&args.responses)?;
    let rule = FlagRule { z_threshold: args.z, count_threshold: args.count, transform: args.transform.into() };
    let flags = detect_outlier_intervals(&sheets, &bank, rule)?;
    // the header is written by hand so it appears even when nobody is flagged
    let mut writer = csv::WriterBuilder::new().has_headers(false).from_writer(out);
    writer.write_record(["student_id", "question_id", "z"]).map_err(|e| CliError::input(e.to_string()))?;
    for f in &flags {
        for (question_id, z) in &f.flagged_questions {
            writer
                .serialize(FlagRow { student_id: &f.student_id, question_id, z: *z })
                .map_err(|e| CliError::input(e.to_string()))?;
        }
    }
    writer.flush()?;
    tracing::info!("{} of {} students flagged", flags.len(), sheets.len());
    Ok(EXIT_OK)
}

fn read_tallies(path: &Path) -> Result<Vec<QuestionTally>, CliError> {
    let mut reader = csv::Reader::from_reader(open(path)?);
    reader
        .deserialize::<QuestionTally>()
        .map(|row| row.map_err(|e| csv_error(path, e)))
        .collect()
}

pub fn preposts(args: &PrePostArgs, out: &mut dyn Write) -> Outcome {
    let report: PrePostReport = compare_pre_post(&read_tallies(&args.pre)?, &read_tallies(&args.post)?)?;
    match args.format {
        OutputFormat::Csv => {
            let mut writer = csv::Writer::from_writer(&mut *out);
            writer.write_record(["question", "pre", "post"]).map_err(|e| CliError::input(e.to_string()))?;
            for row in &report.per_question {
                writer
                    .write_record([row.label.clone(), row.pre_percent.to_string(), row.post_percent.to_string()])
                    .map_err(|e| CliError::input(e.to_string()))?;
            }
            writer
                .write_record(["average".to_string(), report.pre_average.to_string(), report.post_average.to_string()])
                .map_err(|e| CliError::input(e.to_string()))?;
            writer.flush()?;
        }
        OutputFormat::Text => {
            writeln!(out, "{:<10}{:>10}{:>10}", "question", "pre", "post")?;
            for row in &report.per_question {
                writeln!(out, "{:<10}{:>10.1}{:>10.1}", row.label, row.pre_percent, row.post_percent)?;
            }
            writeln!(out, "{:<10}{:>10.3}{:>10.3}", "average", report.pre_average, report.post_average)?;
        }
    }
    Ok(EXIT_OK)
}

/// Runs the session server until `shutdown` resolves. Startup messages go
/// to `log`; a bad bank or session shape exits 2 and a busy port exits 3.
pub fn serve(args: &ServeArgs, log: &mut dyn Write, shutdown: impl Future<Output = ()> + Send + 'static) -> Outcome {
    let bank = match &args.bank {
        Some(path) => load_bank(path)?,
        None => load_question_bank(TABLE1_CSV.as_bytes(), BankFormat::Csv, "table1")?,
    };
    let config = server_config(args, bank)?;
    let addr: SocketAddr = format!("{}:{}", args.host, args.port)
        .parse()
        .map_err(|e| CliError::input(format!("bad listen address: {e}")))?;
    let runtime = tokio::runtime::Runtime::new()?;
    runtime.block_on(async move {
        let listener = tokio::net::TcpListener::bind(addr).await.map_err(|e| match e.kind() {
            io::ErrorKind::AddrInUse => CliError { code: EXIT_PORT_BUSY, message: format!("port {} is busy", addr.port()) },
            _ => CliError::input(format!("cannot listen on {addr}: {e}")),
        })?;
        writeln!(log, "{} questions loaded from {}", config.bank.len(), config.bank.name())?;
        if config.scored < config.asked {
            writeln!(log, "variation mode: asking {} questions, scoring a hidden random {}", config.asked, config.scored)?;
        }
        writeln!(log, "listening on http://{}", listener.local_addr()?)?;
        let state = AppState::new(config)?;
        server::run(state, listener, shutdown).await?;
        Ok(EXIT_OK)
    })
}

fn server_config(args: &ServeArgs, bank: QuestionBank) -> Result<ServerConfig, CliError> {
    let asked = args.asked.unwrap_or_else(|| bank.len().min(10));
    let scored = args.scored.unwrap_or(asked);
    SessionConfig::new(bank.clone(), asked, scored, 0).validate()?;
    Ok(ServerConfig {
        bank,
        asked,
        scored,
        seed: args.seed,
        pause_seconds: args.pause_seconds,
        data_dir: args.data_dir.clone(),
    })
}
