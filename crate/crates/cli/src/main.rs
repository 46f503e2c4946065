use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use obliv_bench::scenario::DEFAULT_BRANCH_ITERATIONS;
use obliv_bench::{
    check_oblivious, emit_csv, gen_input, miss_report, run_scenario, CliError, GenKind, Impl,
    Kind, Result, Scenario,
};

/// Benchmarks and obliviousness checks for the oblivious kernels.
#[derive(Parser)]
#[command(name = "bench", version)]
struct Cli {
    #[command(subcommand)]
    cmd: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Time one scenario and print or save a CSV row.
    Run(RunArgs),
    /// Compare access traces over random same-shape input pairs.
    CheckOblivious(CheckArgs),
    /// Write a seeded input block file.
    Gen(GenArgs),
}

#[derive(Args)]
struct RunArgs {
    #[arg(long)]
    kind: Kind,
    #[arg(long = "impl")]
    imp: Impl,
    /// Records, sequence length, nodes or loop iterations.
    #[arg(long)]
    n: Option<usize>,
    #[arg(long, default_value_t = 8)]
    record_bytes: usize,
    /// Block count for block-based kinds.
    #[arg(long)]
    blocks: Option<usize>,
    #[arg(long, default_value_t = 5)]
    k: usize,
    #[arg(long, default_value_t = 10)]
    iters: usize,
    /// Probability of the expensive arm in the branching loop.
    #[arg(long, default_value_t = 0.5)]
    bias: f64,
    #[arg(long, default_value_t = 5)]
    reps: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Block file to read instead of generating input.
    #[arg(long)]
    input: Option<PathBuf>,
    #[arg(long)]
    csv: Option<PathBuf>,
}

#[derive(Args)]
struct CheckArgs {
    #[arg(long)]
    kind: Kind,
    #[arg(long = "impl")]
    imp: Impl,
    /// Comma-separated sizes, e.g. `64` or `30,30`.
    #[arg(long, value_delimiter = ',', required = true)]
    shape: Vec<usize>,
    #[arg(long, default_value_t = 20)]
    pairs: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Write the trace of the first input here.
    #[arg(long)]
    dump: Option<PathBuf>,
    /// For kmeans oram-hash: report the ORAM miss sequences instead.
    #[arg(long)]
    miss_report: bool,
}

#[derive(Args)]
struct GenArgs {
    #[arg(long)]
    kind: GenKind,
    #[arg(long)]
    blocks: usize,
    /// Vocabulary size for text, cluster count for points.
    #[arg(long, default_value_t = 1000)]
    param: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

fn run(a: RunArgs) -> Result<()> {
    let n = match (a.blocks, a.n) {
        (Some(b), _) => b,
        (None, Some(n)) => n,
        (None, None) if a.kind == Kind::Branching => DEFAULT_BRANCH_ITERATIONS,
        (None, None) if a.input.is_some() => 0,
        (None, None) => return Err(CliError::Usage("--n or --blocks is required".into())),
    };
    let mut s = Scenario::new(a.kind, a.imp, n)
        .record_bytes(a.record_bytes)
        .k(a.k)
        .iters(a.iters)
        .bias(a.bias)
        .reps(a.reps)
        .seed(a.seed);
    if let Some(p) = a.input {
        s = s.input(p);
    }
    let m = run_scenario(&s)?;
    match &a.csv {
        Some(path) => emit_csv(std::slice::from_ref(&m), path)?,
        None => obliv_bench::csv::write_csv(std::io::stdout().lock(), std::slice::from_ref(&m))?,
    }
    Ok(())
}

fn check(a: CheckArgs) -> Result<bool> {
    if a.miss_report {
        if (a.kind, a.imp) != (Kind::KMeans, Impl::OramHash) {
            return Err(CliError::Usage("--miss-report applies to kmeans oram-hash".into()));
        }
        print!("{}", miss_report(&a.shape, a.pairs, a.seed)?.render());
        return Ok(true);
    }
    let r = check_oblivious(a.kind, a.imp, &a.shape, a.pairs, a.seed, a.dump.as_deref())?;
    print!("{}", r.render());
    Ok(r.passed())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let res = match cli.cmd {
        Command::Run(a) => run(a).map(|()| true),
        Command::CheckOblivious(a) => check(a),
        Command::Gen(a) => gen_input(a.kind, a.blocks, a.param, a.seed, &a.out).map(|st| {
            println!("wrote {} blocks to {}", st.len(), a.out.display());
            true
        }),
    };
    match res {
        Ok(true) => ExitCode::SUCCESS,
        // Traces diverged: the check ran but found a leak.
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
