mod args;
mod certify;
mod manifest;
mod regions;
mod setup;
mod solve;

use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::Parser;

use args::{Cli, Command, OutputArgs};
use manifest::{RunManifest, Status};

/// A command failure: bad input (exit 1) or a failure while running.
#[derive(Debug)]
pub enum Failure {
    Usage(String),
    Runtime(anyhow::Error),
}

impl Failure {
    pub fn usage(msg: impl Into<String>) -> Self {
        Failure::Usage(msg.into())
    }
}

impl From<gsadmm::Error> for Failure {
    fn from(e: gsadmm::Error) -> Self {
        match e {
            gsadmm::Error::Config(_) | gsadmm::Error::Argument(_) => Failure::Usage(e.to_string()),
            other => Failure::Runtime(other.into()),
        }
    }
}

impl From<anyhow::Error> for Failure {
    fn from(e: anyhow::Error) -> Self {
        Failure::Runtime(e)
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::Runtime(e.into())
    }
}

pub type CmdResult = Result<Status, Failure>;

fn configure_threads(output: &OutputArgs) -> Result<gsadmm::Execution, Failure> {
    match output.threads {
        None => Ok(gsadmm::Execution::Parallel),
        Some(0) => Err(Failure::usage("--threads must be at least 1")),
        Some(1) => Ok(gsadmm::Execution::Serial),
        #[cfg(feature = "parallel")]
        Some(n) => {
            rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build_global()
                .map_err(|e| Failure::Runtime(e.into()))?;
            Ok(gsadmm::Execution::Parallel)
        }
        #[cfg(not(feature = "parallel"))]
        Some(_) => {
            eprintln!("warning: built without the parallel feature; running serially");
            Ok(gsadmm::Execution::Serial)
        }
    }
}

fn run(command: &Command, manifest: &mut RunManifest) -> CmdResult {
    let execution = configure_threads(command.output())?;
    manifest.extra.insert("execution".into(), serde_json::to_value(execution).map_err(anyhow::Error::from)?);
    match command {
        Command::Solve(a) => solve::cmd_solve(a, execution, manifest),
        Command::Sweep(a) => solve::cmd_sweep(a, execution, manifest),
        Command::Region(a) => regions::cmd_region(a, manifest),
        Command::Certify(a) => certify::cmd_certify(a, execution, manifest),
        Command::Generate(a) => regions::cmd_generate(a, manifest),
    }
}

fn main() -> ExitCode {
    let argv: Vec<String> = std::env::args().collect();
    let cli = match Cli::try_parse_from(&argv) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => Status::UsageError.exit_code(),
            };
            return ExitCode::from(code as u8);
        }
    };
    let out = &cli.command.output().out;
    if let Err(e) = std::fs::create_dir_all(out) {
        eprintln!("error: cannot create output directory {}: {e}", out.display());
        return ExitCode::from(Status::Error.exit_code() as u8);
    }
    let mut manifest = RunManifest::new(out, argv, cli.command.name());
    let (status, message) = match run(&cli.command, &mut manifest) {
        Ok(status) => (status, None),
        Err(Failure::Usage(msg)) => (Status::UsageError, Some(msg)),
        Err(Failure::Runtime(e)) => (Status::Error, Some(format!("{e:#}"))),
    };
    if let Some(msg) = &message {
        eprintln!("error: {msg}");
    }
    match manifest.finish(status, message.as_deref()) {
        Ok(path) => eprintln!("manifest: {}", path.display()),
        Err(e) => {
            eprintln!("error: cannot write manifest: {e}");
            return ExitCode::from(Status::Error.exit_code() as u8);
        }
    }
    ExitCode::from(status.exit_code() as u8)
}
