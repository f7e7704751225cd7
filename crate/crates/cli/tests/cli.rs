use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use virtual_core::codec::{aggregate_column, Aggregate};
use virtual_core::pipeline::write_csv;
use virtual_core::storage::rewrite_physical;
use virtual_core::synth;
use virtual_core::table::ColumnData;

fn cli(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_virtual"))
        .args(args)
        .env("RUST_LOG", "error")
        .output()
        .expect("run cli")
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn json(out: &Output) -> serde_json::Value {
    serde_json::from_slice(&out.stdout).expect("json on stdout")
}

struct Fixture {
    _dir: tempfile::TempDir,
    csv: PathBuf,
    parquet: PathBuf,
    root: PathBuf,
}

fn compressed_sum(rows: usize) -> Fixture {
    let dir = tempfile::tempdir().unwrap();
    let root = dir.path().to_path_buf();
    let csv = root.join("in.csv");
    let parquet = root.join("out.parquet");
    write_csv(&synth::noisy_sum_table(rows, 3), &csv, b',').unwrap();
    let out = cli(&["compress", s(&csv), "-o", s(&parquet)]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    Fixture {
        _dir: dir,
        csv,
        parquet,
        root,
    }
}

#[test]
fn help_and_usage_errors() {
    assert_eq!(cli(&["--help"]).status.code(), Some(0));
    assert_eq!(cli(&["compress"]).status.code(), Some(1));
    assert_eq!(cli(&["frobnicate"]).status.code(), Some(1));
    assert_eq!(
        cli(&["compress", "x.csv", "-o", "y", "--lambda", "-3"])
            .status
            .code(),
        Some(1)
    );
}

#[test]
fn missing_input_is_an_error() {
    let dir = tempfile::tempdir().unwrap();
    let out = cli(&[
        "compress",
        "/nonexistent/in.csv",
        "-o",
        s(&dir.path().join("o.parquet")),
    ]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("error"));
}

#[test]
fn compress_verify_decompress_round_trip() {
    let f = compressed_sum(5000);
    let verify = cli(&["verify", s(&f.csv), s(&f.parquet)]);
    assert_eq!(verify.status.code(), Some(0));
    assert_eq!(json(&verify)["mismatch_count"], 0);

    let back = f.root.join("back.csv");
    assert!(cli(&["decompress", s(&f.parquet), "-o", s(&back)])
        .status
        .success());
    assert_eq!(
        std::fs::read(&f.csv).unwrap(),
        std::fs::read(&back).unwrap()
    );
}

#[test]
fn compress_report_lists_selected_function() {
    let f = compressed_sum(5000);
    let stats = cli(&["stats", s(&f.parquet)]);
    assert!(stats.status.success());
    let v = json(&stats);
    let cols = v["metadata"]["virtual_columns"].as_array().unwrap();
    assert_eq!(cols.len(), 1);
    assert_eq!(cols[0]["name"], "t");
    let physical: Vec<&str> = v["physical_schema"]
        .as_array()
        .unwrap()
        .iter()
        .map(|c| c["name"].as_str().unwrap())
        .collect();
    assert!(physical.contains(&"t__offset") && !physical.contains(&"t"));
    assert!(f.parquet.with_extension("parquet.virtual.json").exists());
}

#[test]
fn corrupted_offset_fails_verification() {
    let f = compressed_sum(5000);
    let bad = f.root.join("bad.parquet");
    rewrite_physical(&f.parquet, &bad, |cols| {
        let c = cols.iter_mut().find(|c| c.name() == "t__offset").unwrap();
        if let ColumnData::Scaled(v) = &mut c.data {
            v[123] += 1;
        }
    })
    .unwrap();
    let out = cli(&["verify", s(&f.csv), s(&bad)]);
    assert_eq!(out.status.code(), Some(2));
    let v = json(&out);
    assert_eq!(v["mismatch_count"], 1);
    assert_eq!(v["mismatches"][0]["row"], 123);
    assert_eq!(v["mismatches"][0]["column"], "t");
}

#[test]
fn verify_against_a_different_table_fails() {
    let f = compressed_sum(2000);
    let other = f.root.join("other.csv");
    write_csv(&synth::noisy_sum_table(2000, 4), &other, b',').unwrap();
    assert_eq!(
        cli(&["verify", s(&other), s(&f.parquet)]).status.code(),
        Some(2)
    );
}

#[test]
fn scan_matches_source_aggregate() {
    let f = compressed_sum(5000);
    let table = synth::noisy_sum_table(5000, 3);
    for (agg, name) in [
        (Aggregate::Sum, "sum"),
        (Aggregate::Avg, "avg"),
        (Aggregate::Count, "count"),
    ] {
        let out = cli(&[
            "scan",
            s(&f.parquet),
            "--column",
            "t",
            "--agg",
            name,
            "--repeat",
            "2",
        ]);
        assert!(out.status.success());
        let v = json(&out);
        let expected = aggregate_column(table.column("t").unwrap(), agg).unwrap();
        assert_eq!(v["value"], expected.value.to_string(), "{name}");
        assert_eq!(v["is_virtual"], true);
    }
}

#[test]
fn scan_unknown_column_is_an_error() {
    let f = compressed_sum(2000);
    let out = cli(&["scan", s(&f.parquet), "--column", "nope"]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn small_tables_stay_plain_with_warning() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("small.csv");
    let out_path = dir.path().join("small.parquet");
    write_csv(&synth::noisy_sum_table(500, 1), &csv, b',').unwrap();
    let out = cli(&["compress", s(&csv), "-o", s(&out_path)]);
    assert!(out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("below min-rows"));
    assert_eq!(json(&out)["candidates_selected"], 0);
    assert_eq!(
        cli(&["verify", s(&csv), s(&out_path)]).status.code(),
        Some(0)
    );
    assert!(!out_path.with_extension("parquet.virtual.json").exists());
}

#[test]
fn tables_without_numbers_compress_plainly() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("text.csv");
    let out_path = dir.path().join("text.parquet");
    let mut body = String::from("name,city\n");
    for i in 0..1500 {
        body.push_str(&format!("n{i},c{}\n", i % 7));
    }
    std::fs::write(&csv, body).unwrap();
    let out = cli(&["compress", s(&csv), "-o", s(&out_path)]);
    assert!(out.status.success());
    assert_eq!(json(&out)["candidates_found"], 0);
    assert_eq!(
        cli(&["verify", s(&csv), s(&out_path)]).status.code(),
        Some(0)
    );
}

#[test]
fn delimiter_and_null_tokens_are_honored() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("semi.csv");
    let out_path = dir.path().join("semi.parquet");
    let mut body = String::from("a;b;t\n");
    for i in 0..1200i64 {
        let t = if i % 50 == 0 {
            "missing".to_string()
        } else {
            format!("{}", 3 * i + 2 * (i % 13))
        };
        body.push_str(&format!("{i};{};{t}\n", i % 13));
    }
    std::fs::write(&csv, body).unwrap();
    let args = ["--delimiter", ";", "--null-tokens", "missing"];
    let mut c = vec!["compress", s(&csv), "-o", s(&out_path)];
    c.extend(args);
    let out = cli(&c);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    assert_eq!(json(&out)["candidates_selected"], 1);
    let mut v = vec!["verify", s(&csv), s(&out_path)];
    v.extend(args);
    assert_eq!(cli(&v).status.code(), Some(0));
}
