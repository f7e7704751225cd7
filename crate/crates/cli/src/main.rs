//! `virtual`: compress CSV tables into Parquet files whose correlated
//! numeric columns are stored as functions of other columns.
//!
//! Exit codes: 0 on success, 1 on errors, 2 when `verify` finds a mismatch.

use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use virtual_core::bench::{self, ScanBenchOptions};
use virtual_core::pipeline::{self, CompressOptions};
use virtual_core::{Aggregate, IngestOptions, Lambda, NullTokens};

#[derive(Parser)]
#[command(
    name = "virtual",
    version,
    about = "Lossless function-based table compression"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Discover functions and write a virtualized Parquet file.
    Compress(CompressArgs),
    /// Reconstruct a file and write it back as CSV.
    Decompress {
        file: PathBuf,
        #[arg(short, long)]
        output: PathBuf,
        #[arg(long, default_value = ",", value_parser = parse_delimiter)]
        delimiter: u8,
    },
    /// Check that a file reproduces its source CSV cell for cell.
    Verify {
        input: PathBuf,
        file: PathBuf,
        #[command(flatten)]
        ingest: IngestArgs,
    },
    /// Aggregate one column and time the scan.
    Scan {
        file: PathBuf,
        #[arg(long)]
        column: String,
        #[arg(long, value_enum, default_value = "sum")]
        agg: AggArg,
        #[arg(long, default_value_t = 5)]
        repeat: usize,
    },
    /// Print schema, sizes and function metadata.
    Stats { file: PathBuf },
    /// Run the compression or scan benchmark suite.
    Bench(BenchArgs),
}

#[derive(Args, Clone)]
struct IngestArgs {
    #[arg(long, default_value_t = 1_000_000)]
    row_limit: usize,
    #[arg(long, default_value = ",", value_parser = parse_delimiter)]
    delimiter: u8,
    /// Comma-separated null spellings; an empty item stands for the empty
    /// field. Default: "",NaN,nan,NA.
    #[arg(long)]
    null_tokens: Option<String>,
}

impl IngestArgs {
    fn options(&self) -> IngestOptions {
        IngestOptions {
            row_limit: self.row_limit,
            delimiter: self.delimiter,
            null_tokens: self
                .null_tokens
                .as_deref()
                .map(|s| NullTokens::new(s.split(',')))
                .unwrap_or_default(),
        }
    }
}

#[derive(Args)]
struct CompressArgs {
    input: PathBuf,
    #[arg(short, long)]
    output: PathBuf,
    #[command(flatten)]
    ingest: IngestArgs,
    #[arg(long, default_value_t = 10_000)]
    sample: usize,
    #[arg(long, default_value_t = 4)]
    k_max: usize,
    /// `auto` or a non-negative number.
    #[arg(long, default_value = "auto", value_parser = parse_lambda)]
    lambda: Lambda,
    #[arg(long, default_value_t = 1.0)]
    error_threshold: f64,
    #[arg(long, default_value_t = 3)]
    restarts: usize,
    #[arg(long, default_value_t = 42)]
    seed: u64,
    #[arg(long, default_value_t = 1000)]
    min_rows: usize,
    #[arg(long, default_value_t = 2)]
    max_chain_depth: usize,
    #[arg(long, default_value_t = 8)]
    max_support: usize,
    /// Only consider these comma-separated columns as targets.
    #[arg(long, value_delimiter = ',')]
    targets: Option<Vec<String>>,
}

impl CompressArgs {
    fn options(&self) -> CompressOptions {
        let mut o = CompressOptions {
            ingest: self.ingest.options(),
            min_rows: self.min_rows,
            max_chain_depth: self.max_chain_depth,
            ..Default::default()
        };
        let d = &mut o.drill;
        d.sample_size = self.sample;
        d.k_max = self.k_max.max(1);
        d.lambda = self.lambda;
        d.error_threshold = self.error_threshold;
        d.restarts = self.restarts;
        d.seed = self.seed;
        d.max_support = self.max_support;
        d.targets = self.targets.clone();
        o
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum Suite {
    Compression,
    Scan,
}

#[derive(Args)]
struct BenchArgs {
    #[arg(long, value_enum)]
    suite: Suite,
    #[arg(long, default_value_t = 1_000_000)]
    rows: usize,
    /// Reference counts for the scan suite.
    #[arg(long, value_delimiter = ',', default_value = "1,2,4,8")]
    refs: Vec<usize>,
    #[arg(long, default_value_t = 42)]
    seed: u64,
    /// Distinct rows generated before duplication (scan suite).
    #[arg(long, default_value_t = 10_000)]
    base_rows: usize,
    #[arg(long, default_value_t = 7)]
    repeat: usize,
    /// Directory for the CSV report and gnuplot data.
    #[arg(long, default_value = ".")]
    out_dir: PathBuf,
}

#[derive(Clone, Copy, ValueEnum)]
enum AggArg {
    Sum,
    Avg,
    Count,
}

impl From<AggArg> for Aggregate {
    fn from(a: AggArg) -> Self {
        match a {
            AggArg::Sum => Aggregate::Sum,
            AggArg::Avg => Aggregate::Avg,
            AggArg::Count => Aggregate::Count,
        }
    }
}

fn parse_delimiter(s: &str) -> Result<u8, String> {
    match s.as_bytes() {
        [b] => Ok(*b),
        _ if s == "\\t" || s == "tab" => Ok(b'\t'),
        _ => Err(format!("delimiter must be one byte, got `{s}`")),
    }
}

fn parse_lambda(s: &str) -> Result<Lambda, String> {
    if s == "auto" {
        return Ok(Lambda::Auto);
    }
    match s.parse::<f64>() {
        Ok(x) if x >= 0.0 && x.is_finite() => Ok(Lambda::Fixed(x)),
        _ => Err(format!(
            "lambda must be `auto` or a non-negative number, got `{s}`"
        )),
    }
}

type CliResult = Result<ExitCode, Box<dyn std::error::Error>>;

fn print_json<T: serde::Serialize>(value: &T) -> Result<(), Box<dyn std::error::Error>> {
    let json = serde_json::to_string_pretty(value)?;
    let mut out = std::io::stdout().lock();
    match writeln!(out, "{json}") {
        Err(e) if e.kind() != std::io::ErrorKind::BrokenPipe => Err(e.into()),
        _ => Ok(()),
    }
}

fn compress(args: &CompressArgs) -> CliResult {
    let report = pipeline::compress(&args.input, &args.output, &args.options())?;
    for w in &report.warnings {
        eprintln!("warning: {w}");
    }
    eprintln!(
        "{} rows, {} columns: {} candidates, {} selected; {} -> {} bytes ({:.1}% saved)",
        report.input_rows,
        report.input_columns,
        report.candidates_found,
        report.candidates_selected,
        report.baseline_bytes,
        report.virtual_bytes,
        100.0 * report.saving_fraction
    );
    for s in &report.selected {
        eprintln!("  {} <- {} (k={})", s.target, s.references.join(" + "), s.k);
    }
    print_json(&report)?;
    Ok(ExitCode::SUCCESS)
}

fn verify(input: &Path, file: &Path, ingest: &IngestArgs) -> CliResult {
    let report = pipeline::verify(input, file, &ingest.options())?;
    print_json(&report)?;
    if report.is_identical() {
        eprintln!(
            "identical: {} rows, {} columns",
            report.rows, report.columns
        );
        return Ok(ExitCode::SUCCESS);
    }
    eprintln!("{} mismatches", report.mismatch_count);
    for m in &report.mismatches {
        let row = m.row.map_or("-".to_string(), |r| r.to_string());
        eprintln!(
            "  row {row}, column `{}`: expected {}, actual {}",
            m.column, m.expected, m.actual
        );
    }
    Ok(ExitCode::from(2))
}

fn scan(file: &Path, column: &str, agg: AggArg, repeat: usize) -> CliResult {
    let report = pipeline::scan(file, column, agg.into(), repeat)?;
    eprintln!(
        "{}({column}) = {}; median {:.6} s over {} runs",
        report.result.agg, report.value, report.median_secs, report.repeat
    );
    print_json(&report)?;
    Ok(ExitCode::SUCCESS)
}

fn run_bench(args: &BenchArgs) -> CliResult {
    std::fs::create_dir_all(&args.out_dir)?;
    let work = tempfile::tempdir_in(&args.out_dir)?;
    match args.suite {
        Suite::Compression => {
            let rows = bench::compression_bench(
                args.rows,
                args.seed,
                work.path(),
                &CompressOptions::default(),
            )?;
            let csv = bench::compression_csv(&rows);
            std::fs::write(args.out_dir.join("bench_compression.csv"), &csv)?;
            eprint!("{csv}");
            print_json(&rows)?;
        }
        Suite::Scan => {
            let opts = ScanBenchOptions {
                rows: args.rows,
                base_rows: args.base_rows.min(args.rows).max(1),
                refs: args.refs.clone(),
                seed: args.seed,
                repeat: args.repeat.max(5),
                ..Default::default()
            };
            let report = bench::scan_bench(&opts, work.path())?;
            std::fs::write(args.out_dir.join("bench_scan.csv"), report.to_csv())?;
            std::fs::write(args.out_dir.join("bench_scan.dat"), report.to_gnuplot())?;
            eprint!("{}", report.to_csv());
            eprintln!(
                "slope {:.4} per reference, R^2 {:.4}, monotone {}",
                report.fit.slope, report.fit.r_squared, report.monotone
            );
            print_json(&report)?;
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn run(cli: Cli) -> CliResult {
    match &cli.command {
        Command::Compress(args) => compress(args),
        Command::Decompress {
            file,
            output,
            delimiter,
        } => {
            let rows = pipeline::decompress(file, output, *delimiter)?;
            eprintln!("wrote {rows} rows to {}", output.display());
            Ok(ExitCode::SUCCESS)
        }
        Command::Verify {
            input,
            file,
            ingest,
        } => verify(input, file, ingest),
        Command::Scan {
            file,
            column,
            agg,
            repeat,
        } => scan(file, column, *agg, *repeat),
        Command::Stats { file } => {
            print_json(&pipeline::stats(file)?)?;
            Ok(ExitCode::SUCCESS)
        }
        Command::Bench(args) => run_bench(args),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::FAILURE
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    if let Some(n) = std::env::var("VIRTUAL_THREADS")
        .ok()
        .and_then(|v| v.parse::<usize>().ok())
        .filter(|&n| n > 0)
    {
        if let Err(e) = rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
        {
            log::warn!("could not cap worker threads: {e}");
        }
    }
    match run(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
