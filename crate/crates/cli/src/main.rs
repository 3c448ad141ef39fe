//! `dora`: sharp edge sampling, benchmark classification, reconstruction
//! metrics and toy training from the command line.
//!
//! Exit codes: 0 success, 1 user error, 2 internal error.

mod commands;
mod config;
mod error;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::{ArgMatches, Command, CommandFactory, FromArgMatches, Parser, Subcommand};
use serde::de::DeserializeOwned;
use serde::Serialize;

use commands::{bench::BenchArgs, classify::ClassifyArgs, eval::EvalArgs, sample::SampleArgs, train::TrainArgs};
use error::{CliError, CliResult};

#[derive(Debug, Parser)]
#[command(name = "dora", version, about = "Sharp edge sampling, shape complexity levels and reconstruction metrics")]
struct Cli {
    /// TOML file whose keys are the subcommand's long flag names; explicit flags take precedence.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Worker threads for per-mesh and per-view parallelism (0: all cores).
    #[arg(long, global = true, default_value_t = 0)]
    jobs: usize,
    /// Omit timestamps and timings so repeated runs produce identical bytes.
    #[arg(long, global = true)]
    reproducible: bool,
    /// Print the resolved configuration as TOML and exit.
    #[arg(long, global = true)]
    print_config: bool,
    #[command(subcommand)]
    command: Commands,
}

#[derive(Debug, Subcommand)]
enum Commands {
    /// Sample a labeled point cloud with Sharp Edge Sampling.
    Sample(SampleArgs),
    /// Count salient edges and assign complexity levels.
    Classify(ClassifyArgs),
    /// Compare a reconstruction against its ground truth.
    Eval(EvalArgs),
    /// Evaluate a directory of reconstructions and aggregate per level.
    Bench(BenchArgs),
    /// Train the occupancy autoencoder on a procedural dataset.
    TrainToy(TrainArgs),
}

pub struct Context {
    pub reproducible: bool,
}

struct Invocation<'a> {
    cli: &'a Cli,
    cmd: &'a Command,
    matches: &'a ArgMatches,
    file: Option<toml::Table>,
}

impl Invocation<'_> {
    fn run<T>(&self, parsed: &T, run: fn(&T, &Context) -> CliResult<()>) -> CliResult<()>
    where
        T: Serialize + DeserializeOwned,
    {
        let args = config::resolve(parsed, self.cmd, self.matches, self.file.as_ref())?;
        if self.cli.print_config {
            print!("{}", config::to_toml(&args)?);
            return Ok(());
        }
        run(&args, &Context {
            reproducible: self.cli.reproducible,
        })
    }
}

fn execute(cli: &Cli, root: &Command, matches: &ArgMatches) -> CliResult<()> {
    if cli.jobs > 0 {
        rayon::ThreadPoolBuilder::new()
            .num_threads(cli.jobs)
            .build_global()
            .map_err(|e| CliError::internal(format!("thread pool: {e}")))?;
    }
    let (name, sub_matches) = matches.subcommand().expect("subcommand is required");
    let inv = Invocation {
        cli,
        cmd: root.find_subcommand(name).expect("parsed subcommand exists"),
        matches: sub_matches,
        file: cli.config.as_deref().map(config::read_table).transpose()?,
    };
    match &cli.command {
        Commands::Sample(a) => inv.run(a, commands::sample::run),
        Commands::Classify(a) => inv.run(a, commands::classify::run),
        Commands::Eval(a) => inv.run(a, commands::eval::run),
        Commands::Bench(a) => inv.run(a, commands::bench::run),
        Commands::TrainToy(a) => inv.run(a, commands::train::run),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let mut root = Cli::command();
    let matches = match root.try_get_matches_from_mut(std::env::args_os()) {
        Ok(m) => m,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => ExitCode::SUCCESS,
                _ => ExitCode::from(1),
            };
        }
    };
    let cli = match Cli::from_arg_matches(&matches) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(1);
        }
    };
    let result = std::panic::catch_unwind(std::panic::AssertUnwindSafe(|| execute(&cli, &root, &matches)));
    match result {
        Ok(Ok(())) => ExitCode::SUCCESS,
        Ok(Err(e)) => {
            eprintln!("{e}");
            ExitCode::from(e.exit_code() as u8)
        }
        // the panic hook has already printed the message
        Err(_) => ExitCode::from(2),
    }
}
