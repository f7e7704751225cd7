//! End-to-end operations: compress, verify, decompress, scan and stats.

use std::path::Path;
use std::time::{Duration, Instant};

use rayon::prelude::*;
use serde::Serialize;

use crate::codec::{scan_aggregate, Aggregate, AggregateResult};
use crate::driller::{drill, DrillConfig};
use crate::error::{Error, Result};
use crate::optimizer::{estimate_savings, greedy_select, FunctionPlan};
use crate::storage::{
    plain_size, write_virtual_file, ColumnSize, VirtualFileMetadata, VirtualReader, WriteOptions,
};
use crate::table::{ingest_csv, sample_rows, ColumnMeta, IngestOptions, Table};

#[derive(Clone, Debug)]
pub struct CompressOptions {
    pub ingest: IngestOptions,
    pub drill: DrillConfig,
    /// Tables with fewer rows are written as plain Parquet.
    pub min_rows: usize,
    pub max_chain_depth: usize,
    pub write: WriteOptions,
}

impl Default for CompressOptions {
    fn default() -> Self {
        Self {
            ingest: IngestOptions::default(),
            drill: DrillConfig::default(),
            min_rows: 1000,
            max_chain_depth: 2,
            write: WriteOptions::default(),
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct CandidateSummary {
    pub target: String,
    pub k: usize,
    pub references: Vec<String>,
    pub sample_max_abs_error: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct SelectedFunction {
    pub target: String,
    pub k: usize,
    pub references: Vec<String>,
    pub sample_max_abs_error: f64,
    pub net_bytes: f64,
}

/// Wall-clock seconds per phase.
#[derive(Clone, Debug, Default, Serialize)]
pub struct PhaseTimings {
    pub ingest: f64,
    pub drill: f64,
    pub optimize: f64,
    pub write: f64,
    pub baseline: f64,
    pub total: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct RunSettings {
    pub row_limit: usize,
    pub sample_size: usize,
    pub k_max: usize,
    pub lambda: f64,
    pub error_threshold: f64,
    pub restarts: usize,
    pub seed: u64,
    pub min_rows: usize,
    pub max_chain_depth: usize,
    pub max_support: usize,
}

#[derive(Clone, Debug, Serialize)]
pub struct RunReport {
    pub input_rows: usize,
    pub input_columns: usize,
    pub sample_rows: usize,
    pub settings: RunSettings,
    pub below_min_rows: bool,
    pub warnings: Vec<String>,
    pub candidates_found: usize,
    pub candidates_selected: usize,
    pub candidates: Vec<CandidateSummary>,
    pub selected: Vec<SelectedFunction>,
    pub eval_order: Vec<String>,
    pub baseline_bytes: u64,
    pub virtual_bytes: u64,
    pub saving_fraction: f64,
    pub column_bytes: Vec<ColumnSize>,
    pub timings: PhaseTimings,
}

fn secs(d: Duration) -> f64 {
    d.as_secs_f64()
}

/// Compresses an in-memory table into `output`.
pub fn compress_table(
    table: &Table,
    output: &Path,
    options: &CompressOptions,
) -> Result<RunReport> {
    let start = Instant::now();
    let mut timings = PhaseTimings::default();
    let mut warnings = Vec::new();
    let below_min_rows = table.row_count() < options.min_rows;

    let (candidates, plan, sample_n) = if below_min_rows {
        let msg = format!(
            "input has {} rows, below min-rows {}; writing plain Parquet",
            table.row_count(),
            options.min_rows
        );
        log::warn!("{msg}");
        warnings.push(msg);
        (Vec::new(), FunctionPlan::default(), 0)
    } else {
        let t = Instant::now();
        let sample = sample_rows(table, options.drill.sample_size, options.drill.seed);
        let candidates = drill(table, &sample, &options.drill)?;
        timings.drill = secs(t.elapsed());
        let t = Instant::now();
        let estimates = candidates
            .par_iter()
            .map(|c| estimate_savings(c, table, &sample))
            .collect::<Result<Vec<_>>>()?;
        let plan = greedy_select(&estimates, options.max_chain_depth);
        timings.optimize = secs(t.elapsed());
        (candidates, plan, sample.len())
    };

    let t = Instant::now();
    let stats = write_virtual_file(table, &plan, output, &options.write)?;
    timings.write = secs(t.elapsed());
    let t = Instant::now();
    let baseline_bytes = if plan.is_empty() {
        stats.total_bytes
    } else {
        plain_size(table, &options.write)?.total_bytes
    };
    timings.baseline = secs(t.elapsed());
    timings.total = secs(start.elapsed());

    let selected = plan
        .selected
        .iter()
        .zip(&plan.net_bytes)
        .map(|(c, &net)| SelectedFunction {
            target: c.target.clone(),
            k: c.k,
            references: c.references.clone(),
            sample_max_abs_error: c.sample_max_abs_error,
            net_bytes: net,
        })
        .collect::<Vec<_>>();
    let d = &options.drill;
    Ok(RunReport {
        input_rows: table.row_count(),
        input_columns: table.columns().len(),
        sample_rows: sample_n,
        settings: RunSettings {
            row_limit: options.ingest.row_limit,
            sample_size: d.sample_size,
            k_max: d.k_max,
            lambda: d.resolve_lambda(sample_n),
            error_threshold: d.error_threshold,
            restarts: d.restarts,
            seed: d.seed,
            min_rows: options.min_rows,
            max_chain_depth: options.max_chain_depth,
            max_support: d.max_support,
        },
        below_min_rows,
        warnings,
        candidates_found: candidates.len(),
        candidates_selected: selected.len(),
        candidates: candidates
            .iter()
            .map(|c| CandidateSummary {
                target: c.target.clone(),
                k: c.k,
                references: c.references.clone(),
                sample_max_abs_error: c.sample_max_abs_error,
            })
            .collect(),
        selected,
        eval_order: plan.eval_order.clone(),
        baseline_bytes,
        virtual_bytes: stats.total_bytes,
        saving_fraction: 1.0 - stats.total_bytes as f64 / baseline_bytes.max(1) as f64,
        column_bytes: stats.columns,
        timings,
    })
}

/// Ingests `input` and compresses it into `output`.
pub fn compress(input: &Path, output: &Path, options: &CompressOptions) -> Result<RunReport> {
    let t = Instant::now();
    let table = ingest_csv(input, &options.ingest)?;
    let ingest = secs(t.elapsed());
    let mut report = compress_table(&table, output, options)?;
    report.timings.ingest = ingest;
    report.timings.total += ingest;
    Ok(report)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Mismatch {
    /// `None` for column-level problems.
    pub row: Option<usize>,
    pub column: String,
    pub expected: String,
    pub actual: String,
}

#[derive(Clone, Debug, Default, Serialize)]
pub struct VerifyReport {
    pub rows: usize,
    pub columns: usize,
    pub mismatch_count: usize,
    /// The first [`MAX_REPORTED_MISMATCHES`] mismatches.
    pub mismatches: Vec<Mismatch>,
}

impl VerifyReport {
    pub fn is_identical(&self) -> bool {
        self.mismatch_count == 0
    }

    fn push(&mut self, m: Mismatch) {
        self.mismatch_count += 1;
        if self.mismatches.len() < MAX_REPORTED_MISMATCHES {
            self.mismatches.push(m);
        }
    }
}

pub const MAX_REPORTED_MISMATCHES: usize = 10;

fn describe(meta: &ColumnMeta) -> String {
    format!("{} p={}", meta.kind, meta.precision)
}

fn cell(col: &crate::table::Column, row: usize) -> String {
    col.render(row).unwrap_or_else(|| "NULL".into())
}

/// Compares every logical column of `reader` with `expected`, cell by cell.
/// Corrupt auxiliary data counts as a mismatch; I/O failures are errors.
pub fn verify_table(expected: &Table, reader: &VirtualReader) -> Result<VerifyReport> {
    let mut report = VerifyReport {
        rows: expected.row_count(),
        columns: expected.columns().len(),
        ..Default::default()
    };
    if reader.num_rows() != expected.row_count() {
        report.push(Mismatch {
            row: None,
            column: String::new(),
            expected: format!("{} rows", expected.row_count()),
            actual: format!("{} rows", reader.num_rows()),
        });
    }
    let expected_names: Vec<&str> = expected.columns().iter().map(|c| c.name()).collect();
    let actual_names: Vec<&str> = reader
        .logical_schema()
        .iter()
        .map(|m| m.name.as_str())
        .collect();
    if expected_names != actual_names {
        report.push(Mismatch {
            row: None,
            column: String::new(),
            expected: expected_names.join(","),
            actual: actual_names.join(","),
        });
    }
    for exp in expected.columns() {
        let Some(meta) = reader
            .logical_schema()
            .iter()
            .find(|m| m.name == exp.name())
        else {
            continue;
        };
        if meta.kind != exp.meta.kind || meta.precision != exp.meta.precision {
            report.push(Mismatch {
                row: None,
                column: exp.name().to_string(),
                expected: describe(&exp.meta),
                actual: describe(meta),
            });
            continue;
        }
        let got = match reader.read_column(exp.name()) {
            Ok(c) => c,
            Err(e @ (Error::CorruptAux { .. } | Error::MissingReference(_))) => {
                report.push(Mismatch {
                    row: None,
                    column: exp.name().to_string(),
                    expected: "readable column".into(),
                    actual: e.to_string(),
                });
                continue;
            }
            Err(e) => return Err(e),
        };
        let rows = exp.len().min(got.len());
        for i in 0..rows {
            if !exp.cell_eq(&got, i) {
                report.push(Mismatch {
                    row: Some(i),
                    column: exp.name().to_string(),
                    expected: cell(exp, i),
                    actual: cell(&got, i),
                });
            }
        }
    }
    Ok(report)
}

/// Re-ingests `input` and checks that `file` reproduces it exactly.
pub fn verify(input: &Path, file: &Path, ingest: &IngestOptions) -> Result<VerifyReport> {
    let expected = ingest_csv(input, ingest)?;
    let reader = VirtualReader::open(file)?;
    verify_table(&expected, &reader)
}

/// Writes `table` as CSV with a header row; nulls become empty fields.
pub fn write_csv(table: &Table, path: &Path, delimiter: u8) -> Result<()> {
    let mut w = csv::WriterBuilder::new()
        .delimiter(delimiter)
        .from_path(path)?;
    let cols = table.columns();
    w.write_record(cols.iter().map(|c| c.name()))?;
    let mut record: Vec<String> = Vec::with_capacity(cols.len());
    for row in 0..table.row_count() {
        record.clear();
        record.extend(cols.iter().map(|c| c.render(row).unwrap_or_default()));
        w.write_record(&record)?;
    }
    w.flush()?;
    Ok(())
}

/// Reconstructs every column of `file` and writes the table as CSV.
pub fn decompress(file: &Path, output: &Path, delimiter: u8) -> Result<usize> {
    let table = VirtualReader::open(file)?.read_table()?;
    write_csv(&table, output, delimiter)?;
    Ok(table.row_count())
}

#[derive(Clone, Debug, Serialize)]
pub struct ScanReport {
    pub result: AggregateResult,
    pub value: String,
    pub is_virtual: bool,
    pub references: Vec<String>,
    pub repeat: usize,
    pub median_secs: f64,
    pub times_secs: Vec<f64>,
}

pub fn median(values: &[f64]) -> f64 {
    if values.is_empty() {
        return f64::NAN;
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let m = v.len() / 2;
    if v.len() % 2 == 1 {
        v[m]
    } else {
        (v[m - 1] + v[m]) / 2.0
    }
}

/// Runs one untimed warm-up scan, then `repeat` timed scans.
pub fn scan_reader(
    reader: &VirtualReader,
    column: &str,
    agg: Aggregate,
    repeat: usize,
) -> Result<ScanReport> {
    let mut result = scan_aggregate(reader, column, agg)?;
    let mut times = Vec::with_capacity(repeat);
    for _ in 0..repeat.max(1) {
        let t = Instant::now();
        result = scan_aggregate(reader, column, agg)?;
        times.push(secs(t.elapsed()));
    }
    Ok(ScanReport {
        value: result.value.to_string(),
        result,
        is_virtual: reader.is_virtual(column),
        references: reader
            .candidate(column)
            .map(|c| c.references.clone())
            .unwrap_or_default(),
        repeat: times.len(),
        median_secs: median(&times),
        times_secs: times,
    })
}

pub fn scan(file: &Path, column: &str, agg: Aggregate, repeat: usize) -> Result<ScanReport> {
    scan_reader(&VirtualReader::open(file)?, column, agg, repeat)
}

#[derive(Clone, Debug, Serialize)]
pub struct StatsReport {
    pub rows: usize,
    pub row_groups: usize,
    pub file_bytes: u64,
    pub logical_schema: Vec<ColumnMeta>,
    pub physical_schema: Vec<ColumnMeta>,
    pub column_bytes: Vec<ColumnSize>,
    pub metadata: Option<VirtualFileMetadata>,
    pub warning: Option<String>,
}

pub fn stats(file: &Path) -> Result<StatsReport> {
    let reader = VirtualReader::open(file)?;
    Ok(StatsReport {
        rows: reader.num_rows(),
        row_groups: reader.num_row_groups(),
        file_bytes: std::fs::metadata(file)?.len(),
        logical_schema: reader.logical_schema().to_vec(),
        physical_schema: reader.physical_schema().to_vec(),
        column_bytes: reader.column_sizes(),
        metadata: reader.metadata().cloned(),
        warning: reader.warning().map(str::to_string),
    })
}
