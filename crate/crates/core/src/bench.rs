//! Compression and scan benchmark suites over synthetic tables.
//!
//! Scan timings use in-memory readers, so they cover Parquet decoding and
//! reconstruction but not disk reads. Each measurement is the median of
//! `repeat` runs after one warm-up, with plain and virtual scans
//! interleaved.

use std::fmt::Write as _;
use std::path::Path;
use std::time::Instant;

use serde::Serialize;

use crate::codec::{scan_aggregate, Aggregate};
use crate::error::{Error, Result};
use crate::optimizer::FunctionPlan;
use crate::pipeline::{compress_table, median, CompressOptions};
use crate::storage::{write_virtual_file, VirtualReader, WriteOptions};
use crate::synth;
use crate::table::Table;

#[derive(Clone, Debug, Serialize)]
pub struct CompressionBenchRow {
    pub table: String,
    pub rows: usize,
    pub columns: usize,
    pub selected: usize,
    pub baseline_bytes: u64,
    pub virtual_bytes: u64,
    pub saving_fraction: f64,
}

/// Named planted-correlation tables used by the compression suite.
pub fn compression_tables(rows: usize, seed: u64) -> Vec<(&'static str, Table)> {
    vec![
        ("exact_sum", synth::sum_table(rows, 3, 1, seed)),
        ("noisy_sum", synth::noisy_sum_table(rows, seed)),
        ("wide_sum_8", synth::sum_table(rows, 8, 1, seed)),
        ("piecewise_k2", synth::piecewise_table(rows, seed)),
        ("independent_noise", synth::noise_table(rows, 4, seed)),
    ]
}

pub fn compression_bench(
    rows: usize,
    seed: u64,
    work_dir: &Path,
    options: &CompressOptions,
) -> Result<Vec<CompressionBenchRow>> {
    compression_tables(rows, seed)
        .into_iter()
        .map(|(name, table)| {
            let out = work_dir.join(format!("compression_{name}.parquet"));
            let report = compress_table(&table, &out, options)?;
            Ok(CompressionBenchRow {
                table: name.to_string(),
                rows: report.input_rows,
                columns: report.input_columns,
                selected: report.candidates_selected,
                baseline_bytes: report.baseline_bytes,
                virtual_bytes: report.virtual_bytes,
                saving_fraction: report.saving_fraction,
            })
        })
        .collect()
}

pub fn compression_csv(rows: &[CompressionBenchRow]) -> String {
    let mut s =
        String::from("table,rows,columns,selected,baseline_bytes,virtual_bytes,saving_fraction\n");
    for r in rows {
        let _ = writeln!(
            s,
            "{},{},{},{},{},{},{:.6}",
            r.table,
            r.rows,
            r.columns,
            r.selected,
            r.baseline_bytes,
            r.virtual_bytes,
            r.saving_fraction
        );
    }
    s
}

#[derive(Clone, Debug)]
pub struct ScanBenchOptions {
    /// Rows after duplication.
    pub rows: usize,
    /// Distinct rows generated before duplication.
    pub base_rows: usize,
    pub refs: Vec<usize>,
    pub seed: u64,
    pub repeat: usize,
    pub agg: Aggregate,
}

impl Default for ScanBenchOptions {
    fn default() -> Self {
        Self {
            rows: 1_000_000,
            base_rows: 10_000,
            refs: vec![1, 2, 4, 8],
            seed: 42,
            repeat: 7,
            agg: Aggregate::Sum,
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct ScanBenchRow {
    pub refs: usize,
    pub rows: usize,
    pub plain_median_secs: f64,
    pub virtual_median_secs: f64,
    pub slowdown: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct LineFit {
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
}

/// Ordinary least-squares line through `(x, y)`.
pub fn fit_line(xs: &[f64], ys: &[f64]) -> LineFit {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let syy: f64 = ys.iter().map(|y| (y - my).powi(2)).sum();
    let slope = if sxx > 0.0 { sxy / sxx } else { 0.0 };
    let r_squared = if sxx > 0.0 && syy > 0.0 {
        sxy * sxy / (sxx * syy)
    } else {
        1.0
    };
    LineFit {
        slope,
        intercept: my - slope * mx,
        r_squared,
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct ScanBenchReport {
    pub rows: Vec<ScanBenchRow>,
    pub fit: LineFit,
    pub monotone: bool,
    /// Measurement passes repeated because slowdowns were not monotone.
    pub reruns: usize,
}

impl ScanBenchReport {
    pub fn to_csv(&self) -> String {
        let mut s = String::from("refs,rows,plain_median_secs,virtual_median_secs,slowdown\n");
        for r in &self.rows {
            let _ = writeln!(
                s,
                "{},{},{:.9},{:.9},{:.6}",
                r.refs, r.rows, r.plain_median_secs, r.virtual_median_secs, r.slowdown
            );
        }
        s
    }

    /// Whitespace-separated columns for gnuplot, fit in the header.
    pub fn to_gnuplot(&self) -> String {
        let f = &self.fit;
        let mut s = format!(
            "# slowdown = {:.6} * refs + {:.6}  (R^2 = {:.6})\n# refs slowdown plain_secs virtual_secs\n",
            f.slope, f.intercept, f.r_squared
        );
        for r in &self.rows {
            let _ = writeln!(
                s,
                "{} {:.6} {:.9} {:.9}",
                r.refs, r.slowdown, r.plain_median_secs, r.virtual_median_secs
            );
        }
        s
    }
}

struct ScanFiles {
    refs: usize,
    plain: VirtualReader,
    virt: VirtualReader,
}

fn prepare(refs: usize, options: &ScanBenchOptions, work_dir: &Path) -> Result<ScanFiles> {
    let base = synth::sum_table(options.base_rows, refs, 100, options.seed ^ refs as u64);
    let table = synth::duplicate_rows(&base, options.rows);
    let plain_path = work_dir.join(format!("scan_plain_r{refs}.parquet"));
    let virt_path = work_dir.join(format!("scan_virtual_r{refs}.parquet"));
    write_virtual_file(
        &table,
        &FunctionPlan::default(),
        &plain_path,
        &WriteOptions::default(),
    )?;

    let mut compress = CompressOptions::default();
    compress.drill.seed = options.seed;
    compress.drill.targets = Some(vec!["t".into()]);
    compress.drill.max_support = compress.drill.max_support.max(refs);
    let report = compress_table(&table, &virt_path, &compress)?;
    let virt = VirtualReader::open(&virt_path)?;
    let ok = virt
        .candidate("t")
        .is_some_and(|c| c.references.len() == refs);
    if !ok {
        return Err(Error::InvalidArgument(format!(
            "scan bench table with {refs} references was not virtualized as planted: {:?}",
            report.selected
        )));
    }
    Ok(ScanFiles {
        refs,
        plain: VirtualReader::open(&plain_path)?,
        virt,
    })
}

fn measure(files: &[ScanFiles], options: &ScanBenchOptions) -> Result<Vec<ScanBenchRow>> {
    files
        .iter()
        .map(|f| {
            scan_aggregate(&f.plain, "t", options.agg)?;
            let expected = scan_aggregate(&f.virt, "t", options.agg)?;
            let mut plain = Vec::new();
            let mut virt = Vec::new();
            for _ in 0..options.repeat.max(1) {
                let t = Instant::now();
                let p = scan_aggregate(&f.plain, "t", options.agg)?;
                plain.push(t.elapsed().as_secs_f64());
                let t = Instant::now();
                let v = scan_aggregate(&f.virt, "t", options.agg)?;
                virt.push(t.elapsed().as_secs_f64());
                if p != v || v != expected {
                    return Err(Error::InvalidArgument(
                        "plain and virtual scans disagree".into(),
                    ));
                }
            }
            let (p, v) = (median(&plain), median(&virt));
            Ok(ScanBenchRow {
                refs: f.refs,
                rows: options.rows,
                plain_median_secs: p,
                virtual_median_secs: v,
                slowdown: v / p,
            })
        })
        .collect()
}

fn is_monotone(rows: &[ScanBenchRow]) -> bool {
    rows.windows(2).all(|w| w[1].slowdown >= w[0].slowdown)
}

/// Measures virtual-scan slowdown against a plain scan of the same column
/// for each reference count. Slowdowns that are not monotone in the
/// reference count trigger one full re-measurement.
pub fn scan_bench(options: &ScanBenchOptions, work_dir: &Path) -> Result<ScanBenchReport> {
    let mut refs = options.refs.clone();
    refs.sort_unstable();
    refs.dedup();
    let files = refs
        .iter()
        .map(|&r| prepare(r, options, work_dir))
        .collect::<Result<Vec<_>>>()?;
    let mut rows = measure(&files, options)?;
    let mut reruns = 0;
    if !is_monotone(&rows) {
        reruns = 1;
        rows = measure(&files, options)?;
    }
    let xs: Vec<f64> = rows.iter().map(|r| r.refs as f64).collect();
    let ys: Vec<f64> = rows.iter().map(|r| r.slowdown).collect();
    Ok(ScanBenchReport {
        fit: fit_line(&xs, &ys),
        monotone: is_monotone(&rows),
        rows,
        reruns,
    })
}
