use std::io::{self, Write};
use std::process::ExitCode;

use calib_cli::args::{Cli, Command};
use calib_cli::commands;
use clap::Parser;
use tracing_subscriber::EnvFilter;

fn main() -> ExitCode {
    tracing_subscriber::fmt()
        .with_env_filter(EnvFilter::try_from_default_env().unwrap_or_else(|_| EnvFilter::new("info")))
        .with_writer(io::stderr)
        .init();
    let cli = Cli::parse();
    let stdout = io::stdout();
    let mut out = stdout.lock();
    let result = match &cli.command {
        Command::Serve(args) => commands::serve(args, &mut io::stderr(), async {
            let _ = tokio::signal::ctrl_c().await;
        }),
        Command::QuestionsValidate(args) => commands::questions_validate(args, &mut out),
        Command::Score(args) => commands::score(args, &mut out),
        Command::Summarize(args) => commands::summarize(args, &mut out),
        Command::Fit(args) => commands::fit(args, &mut out),
        Command::Simulate(args) => commands::simulate(args, &mut out),
        Command::Flag(args) => commands::flag(args, &mut out),
        Command::Preposts(args) => commands::preposts(args, &mut out),
    };
    let _ = out.flush();
    match result {
        Ok(code) => ExitCode::from(code),
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(err.code)
        }
    }
}
