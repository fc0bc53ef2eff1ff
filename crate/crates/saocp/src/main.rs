use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use saocp::config::RunConfig;
use saocp::verify::{run_suite, Suite};
use saocp::{runner, Error, Result};

/// Online conformal prediction runs, comparisons and bound checks.
#[derive(Parser, Debug)]
#[command(name = "saocp", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Run one learner over a stream and write its trace and report.
    Run(RunArgs),
    /// Run several configs over one shared stream.
    Compare(CompareArgs),
    /// Materialize a stream to CSV.
    Gen(RunArgs),
    /// Check a family of bounds over seeded streams.
    Verify(VerifyArgs),
}

#[derive(Args, Debug)]
struct Overrides {
    /// Replaces the config's seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long, default_value = ".")]
    out: PathBuf,
    /// Metric window length; repeat for several. Replaces the config's list.
    #[arg(long = "window")]
    windows: Vec<usize>,
}

#[derive(Args, Debug)]
struct RunArgs {
    #[arg(long)]
    config: PathBuf,
    #[command(flatten)]
    overrides: Overrides,
}

#[derive(Args, Debug)]
struct CompareArgs {
    /// Config file; repeat once per method.
    #[arg(long = "config")]
    configs: Vec<PathBuf>,
    #[command(flatten)]
    overrides: Overrides,
}

#[derive(Args, Debug)]
struct VerifyArgs {
    /// bounded-iterates, anytime-regret, saregret, coverage or
    /// oracle-equivalence.
    suite: String,
    /// First seed of the family.
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

fn load(path: &Path, overrides: &Overrides) -> Result<RunConfig> {
    let mut config = RunConfig::from_file(path)?;
    if let Some(seed) = overrides.seed {
        config.seed = seed;
    }
    if !overrides.windows.is_empty() {
        config.windows = overrides.windows.clone();
    }
    config.validate()?;
    Ok(config)
}

fn execute(command: Command) -> Result<()> {
    match command {
        Command::Run(args) => {
            let config = load(&args.config, &args.overrides)?;
            let outcome = runner::execute(&config)?;
            runner::write_run(&config, &outcome, &args.overrides.out)?;
            print!("{}", outcome.report.to_text());
        }
        Command::Compare(args) => {
            let configs = args
                .configs
                .iter()
                .map(|p| load(p, &args.overrides))
                .collect::<Result<Vec<_>>>()?;
            let cmp = runner::compare(&configs)?;
            runner::write_comparison(&cmp, &args.overrides.out)?;
            println!("stream_hash = {}", cmp.stream_hash);
            for o in &cmp.outcomes {
                let m = &o.report.metrics;
                let windows: Vec<String> = m
                    .lce
                    .iter()
                    .map(|(k, lce)| format!("lce_{k} = {lce:.4}  sa_regret_{k} = {:.4}", m.sa_regret[k]))
                    .collect();
                println!(
                    "{:10} coverage = {:.4}  width = {:.4}  {}",
                    o.report.label,
                    m.coverage,
                    m.width_median,
                    windows.join("  ")
                );
            }
        }
        Command::Gen(args) => {
            let config = load(&args.config, &args.overrides)?;
            let stream = runner::gen(&config, &args.overrides.out)?;
            println!("steps = {}", stream.len());
            println!("bound = {:?}", stream.bound.get());
            println!("out_of_range = {}", stream.out_of_range);
            println!("stream_hash = {}", stream.hash());
        }
        Command::Verify(args) => {
            let suite: Suite = args.suite.parse()?;
            let report = run_suite(suite, suite.documented_scale(), args.seed)?;
            print!("{report}");
            if !report.passed() {
                let failed: Vec<&str> =
                    report.checks.iter().filter(|c| !c.passed()).map(|c| c.name.as_str()).collect();
                return Err(Error::Violation(failed.join("; ")));
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    match execute(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
