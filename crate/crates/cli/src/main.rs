mod args;
mod commands;
mod manifest;

use std::process::ExitCode;

use anyhow::Result;
use clap::error::ErrorKind;
use clap::Parser;

use args::{Cli, Command, DrlCommand, StaCommand};
use manifest::Run;

const EXIT_VALIDATION: u8 = 1;
const EXIT_NUMERICAL: u8 = 2;

fn command_name(cmd: &Command) -> &'static str {
    match cmd {
        Command::Sta(StaCommand::Ansatz { .. }) => "sta ansatz",
        Command::Sta(StaCommand::Series { .. }) => "sta series",
        Command::Sta(StaCommand::Optimize { .. }) => "sta optimize",
        Command::Qsl(_) => "qsl",
        Command::Sim(_) => "sim",
        Command::Scan(_) => "scan",
        Command::Drl(DrlCommand::Pretrain { .. }) => "drl pretrain",
        Command::Drl(DrlCommand::Finetune { .. }) => "drl finetune",
        Command::Drl(DrlCommand::Evaluate { .. }) => "drl evaluate",
        Command::Grape(_) => "grape",
    }
}

fn exit_code(err: &anyhow::Error) -> u8 {
    match err.chain().find_map(|e| e.downcast_ref::<qsf_core::Error>()) {
        Some(e) if e.is_numerical() => EXIT_NUMERICAL,
        _ => EXIT_VALIDATION,
    }
}

fn dispatch(run: &mut Run, cmd: Command, seed: u64) -> Result<()> {
    match cmd {
        Command::Sta(c) => commands::sta(run, c),
        Command::Qsl(a) => commands::qsl(run, a),
        Command::Sim(a) => commands::sim(run, a),
        Command::Scan(a) => commands::scan(run, a),
        Command::Drl(c) => commands::drl(run, c, seed),
        Command::Grape(a) => commands::grape(run, a),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => ExitCode::SUCCESS,
                _ => ExitCode::from(EXIT_VALIDATION),
            };
        }
    };

    if let Some(n) = cli.threads {
        if n == 0 {
            eprintln!("error: --threads must be >= 1");
            return ExitCode::from(EXIT_VALIDATION);
        }
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error: {e}");
            return ExitCode::from(EXIT_VALIDATION);
        }
    }

    let mut run = match Run::new(cli.out_dir.clone(), command_name(&cli.command), cli.seed) {
        Ok(run) => run,
        Err(e) => {
            eprintln!("error: {e:#}");
            return ExitCode::from(EXIT_VALIDATION);
        }
    };
    let result = dispatch(&mut run, cli.command, cli.seed);
    let written = run.finish(result.as_ref().err());
    match (result, written) {
        (Ok(()), Ok(())) => ExitCode::SUCCESS,
        (Err(e), _) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
        (Ok(()), Err(e)) => {
            eprintln!("error: writing manifest: {e:#}");
            ExitCode::from(EXIT_VALIDATION)
        }
    }
}
