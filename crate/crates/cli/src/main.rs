mod commands;
mod config;
mod report;
mod selftest;

use clap::{CommandFactory, Parser};
use std::process::ExitCode;

pub use report::{Ctx, Failure};

#[derive(Parser, Debug)]
#[command(name = "circle-lab", version, about = "Circle-method numerical laboratory", args_override_self = true)]
pub struct Cli {
    #[command(subcommand)]
    pub cmd: Option<commands::Cmd>,
    /// JSON file of flag values, applied before command-line flags
    #[arg(long, global = true)]
    pub config: Option<std::path::PathBuf>,
    /// Directory for report.json and CSV tables (report goes to stdout otherwise)
    #[arg(long = "out-dir", global = true)]
    pub out_dir: Option<std::path::PathBuf>,
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,
    /// Worker thread cap
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    /// Run the identity checks of every module
    #[arg(long, global = true)]
    pub selftest: bool,
}

fn main() -> ExitCode {
    let raw: Vec<String> = std::env::args().collect();
    let argv = match config::merge_config(&raw, &Cli::command()) {
        Ok(a) => a,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    };
    let cli = match Cli::try_parse_from(&argv) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    if let Some(t) = cli.threads {
        if t == 0 {
            eprintln!("error: --threads must be at least 1");
            return ExitCode::from(2);
        }
        let _ = rayon::ThreadPoolBuilder::new().num_threads(t).build_global();
    }
    let ctx = Ctx { out_dir: cli.out_dir.clone(), seed: cli.seed, threads: cli.threads };
    let result = if cli.selftest {
        selftest::run(&ctx)
    } else {
        match &cli.cmd {
            Some(cmd) => commands::run(cmd, &ctx),
            None => Err(Failure::validation("no subcommand given (see --help)").into()),
        }
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let code = report::exit_code(&e);
            eprintln!("error: {e:#}");
            ExitCode::from(code)
        }
    }
}
