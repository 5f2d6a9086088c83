use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use panelblas_bench::{emit_csv, run_sweep, size_range, BenchError, Impl, Routine, SweepConfig};

/// Time one routine over a range of square sizes and write CSV.
#[derive(Parser)]
#[command(name = "bench")]
struct Cli {
    /// Routine name, e.g. gemm_nt, potrf_l, riccati.
    #[arg(long)]
    routine: String,
    /// Implementation: hp, rf or naive.
    #[arg(long = "impl", default_value = "hp")]
    imp: String,
    #[arg(long, default_value_t = 4)]
    min: usize,
    #[arg(long, default_value_t = 300)]
    max: usize,
    #[arg(long, default_value_t = 4)]
    step: usize,
    #[arg(long, default_value_t = 10)]
    reps: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output file; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Directory for operand fixtures.
    #[arg(long)]
    dump: Option<PathBuf>,
}

fn run(cli: Cli) -> Result<(), BenchError> {
    let routine: Routine = cli.routine.parse()?;
    let imp: Impl = cli.imp.parse()?;
    let cfg = SweepConfig {
        sizes: size_range(cli.min, cli.max, cli.step)?,
        reps: cli.reps,
        seed: cli.seed,
        dump: cli.dump,
        ..SweepConfig::default()
    };
    let records = run_sweep(routine, imp, &cfg)?;
    match cli.out {
        Some(path) => emit_csv(&records, std::fs::File::create(path)?),
        None => emit_csv(&records, std::io::stdout().lock()),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("bench: {e}");
            ExitCode::from(if e.is_usage() { 2 } else { 1 })
        }
    }
}
