//! Synthetic tables with planted functions, for benchmarks and tests.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::table::{Column, ColumnData, ColumnKind, ColumnMeta, Table, POW10};

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn decimal(name: &str, p: u32, values: &[Option<i64>]) -> Column {
    Column::scaled(name, p, values)
}

fn uniform(rng: &mut ChaCha8Rng, rows: usize, span: i64) -> Vec<Option<i64>> {
    (0..rows).map(|_| Some(rng.random_range(0..span))).collect()
}

/// `t = a + b + c + r` at precision 2, where `a`, `b`, `c` span `2^16`
/// scaled units and `r` is uniform in `[0, 1)`.
pub fn noisy_sum_table(rows: usize, seed: u64) -> Table {
    sum_table(rows, 3, 100, seed)
}

/// `t = x1 + … + x{refs} + r` at precision 2 with `r` uniform over
/// `residual_span` scaled units (0 or 1 for an exact sum).
pub fn sum_table(rows: usize, refs: usize, residual_span: i64, seed: u64) -> Table {
    let mut rng = rng(seed);
    let names: Vec<String> = if refs == 3 {
        vec!["a".into(), "b".into(), "c".into()]
    } else {
        (1..=refs).map(|i| format!("x{i}")).collect()
    };
    let xs: Vec<Vec<Option<i64>>> = (0..refs)
        .map(|_| uniform(&mut rng, rows, 1 << 16))
        .collect();
    let t: Vec<Option<i64>> = (0..rows)
        .map(|i| {
            let r = rng.random_range(0..residual_span.max(1));
            Some(xs.iter().map(|x| x[i].unwrap_or(0)).sum::<i64>() + r)
        })
        .collect();
    let mut cols: Vec<Column> = names
        .iter()
        .zip(&xs)
        .map(|(n, x)| decimal(n, 2, x))
        .collect();
    cols.push(decimal("t", 2, &t));
    Table::new(cols).expect("generated columns are consistent")
}

/// Independent uniform columns; no column is a function of the others.
pub fn noise_table(rows: usize, columns: usize, seed: u64) -> Table {
    let mut rng = rng(seed);
    let cols = (0..columns)
        .map(|i| decimal(&format!("n{i}"), 2, &uniform(&mut rng, rows, 1 << 20)))
        .collect();
    Table::new(cols).expect("generated columns are consistent")
}

/// `y = 2a + 3` on half the rows and `y = −a + 1` on the rest.
pub fn piecewise_table(rows: usize, seed: u64) -> Table {
    let mut rng = rng(seed);
    let a: Vec<Option<i64>> = (0..rows)
        .map(|_| Some(rng.random_range(-5000..5000)))
        .collect();
    let y: Vec<Option<i64>> = a
        .iter()
        .enumerate()
        .map(|(i, a)| a.map(|a| if i % 2 == 0 { 2 * a + 3 } else { -a + 1 }))
        .collect();
    Table::new(vec![decimal("a", 0, &a), decimal("y", 0, &y)]).expect("consistent")
}

/// Repeats the rows of `table` until it has `rows` rows.
pub fn duplicate_rows(table: &Table, rows: usize) -> Table {
    let base = table.row_count();
    if base == 0 || rows == base {
        return table.clone();
    }
    let cols = table
        .columns()
        .iter()
        .map(|c| {
            let mut out = c.take(0..0);
            let mut left = rows;
            while left > 0 {
                let take = left.min(base);
                out.extend_from(&c.take(0..take)).expect("same column type");
                left -= take;
            }
            out
        })
        .collect();
    Table::new(cols).expect("columns duplicated alike")
}

#[derive(Clone, Debug)]
pub struct PlantedTarget {
    pub name: String,
    pub k: usize,
    pub references: Vec<String>,
}

#[derive(Clone, Debug)]
pub struct RandomTable {
    pub table: Table,
    pub targets: Vec<PlantedTarget>,
}

/// Random mixed table: 5–20 columns with numeric references of varying
/// precision, up to three targets that are piecewise-linear (K ∈ {1,2,3})
/// in 1–3 references, small residuals, and 0–10% nulls.
pub fn random_planted_table(rows: usize, seed: u64) -> RandomTable {
    let mut rng = rng(seed);
    let columns = rng.random_range(5..=20usize);
    let n_targets = rng.random_range(1..=3usize.min(columns - 3));
    let n_extra = if columns > 6 {
        rng.random_range(0..=2usize)
    } else {
        0
    };
    let n_refs = columns - n_targets - n_extra;
    let null_frac = rng.random_range(0.0..0.10);

    let with_nulls = |rng: &mut ChaCha8Rng, v: Vec<Option<i64>>| -> Vec<Option<i64>> {
        v.into_iter()
            .map(|x| if rng.random_bool(null_frac) { None } else { x })
            .collect()
    };

    let mut refs: Vec<Column> = Vec::new();
    for i in 0..n_refs {
        let p = rng.random_range(0..=3u32);
        let span = rng.random_range(10i64..1_000_000);
        let lo = rng.random_range(-span..=0);
        let v: Vec<Option<i64>> = (0..rows)
            .map(|_| Some(rng.random_range(lo..lo + span + 1)))
            .collect();
        let v = with_nulls(&mut rng, v);
        refs.push(decimal(&format!("r{i}"), p, &v));
    }

    let mut targets = Vec::new();
    let mut target_cols = Vec::new();
    for t in 0..n_targets {
        let k = rng.random_range(1..=3usize);
        let s = rng.random_range(1..=3usize.min(n_refs));
        let mut idx: Vec<usize> = (0..n_refs).collect();
        idx.shuffle(&mut rng);
        idx.truncate(s);
        let p = rng.random_range(0..=3u32);
        let pieces: Vec<(Vec<f64>, f64)> = (0..k)
            .map(|_| {
                let w = (0..s)
                    .map(|_| [1.0, -1.0, 2.0, 0.5, 3.0, -0.25][rng.random_range(0..6)])
                    .collect();
                (w, rng.random_range(-1000.0..1000.0f64).round())
            })
            .collect();
        let noise = rng.random_range(0..=50i64);
        let y: Vec<Option<i64>> = (0..rows)
            .map(|row| {
                let (w, beta) = &pieces[rng.random_range(0..k)];
                let mut acc = *beta;
                for (&j, wj) in idx.iter().zip(w) {
                    let c = &refs[j];
                    // Null references still get a target value.
                    let v = c.scaled_at(row).unwrap_or(1);
                    acc += wj * v as f64 / POW10[c.meta.precision as usize] as f64;
                }
                Some(
                    (acc * POW10[p as usize] as f64).round() as i64
                        + rng.random_range(-noise..=noise),
                )
            })
            .collect();
        let y = with_nulls(&mut rng, y);
        let name = format!("y{t}");
        targets.push(PlantedTarget {
            name: name.clone(),
            k,
            references: idx.iter().map(|&j| refs[j].name().to_string()).collect(),
        });
        target_cols.push(decimal(&name, p, &y));
    }

    let mut extras = Vec::new();
    for e in 0..n_extra {
        let col = if e % 2 == 0 {
            let labels = (0..rows)
                .map(|i| format!("id-{}", (i * 7919) % 1000))
                .collect();
            Column::new(
                ColumnMeta::new(format!("s{e}"), ColumnKind::String, 0, false),
                ColumnData::Text(labels),
                vec![false; rows],
            )
        } else {
            Column::new(
                ColumnMeta::new(format!("f{e}"), ColumnKind::Float, 0, false),
                ColumnData::Float((0..rows).map(|_| rng.random_range(0.0..1.0)).collect()),
                vec![false; rows],
            )
        };
        extras.push(col.expect("consistent lengths"));
    }

    let mut cols: Vec<Column> = refs.into_iter().chain(target_cols).chain(extras).collect();
    cols.shuffle(&mut rng);
    RandomTable {
        table: Table::new(cols).expect("generated columns are consistent"),
        targets,
    }
}
