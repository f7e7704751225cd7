//! Auxiliary-column encoding of virtual targets and exact reconstruction.
//!
//! Each row of a virtualized column is in exactly one state:
//!
//! * `is_nan`: the original value was null;
//! * outlier: some reference is null, so the original value is kept verbatim;
//! * normal: the value is `prediction(switch) + offset`, where the prediction
//!   comes from [`evaluate_prediction`] and is bit-identical on every platform.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::driller::KRegressionCandidate;
use crate::error::{Error, Result};
use crate::regression::RegressorModel;
use crate::storage::VirtualReader;
use crate::table::{render_scaled, Column, ColumnData, ColumnKind, ColumnMeta, Table, POW10};

/// Largest magnitude (exclusive) a rounded prediction may have.
const PREDICTION_LIMIT: f64 = 9_223_372_036_854_775_808.0; // 2^63

#[inline]
fn pow10f(p: u32) -> f64 {
    POW10[p as usize] as f64
}

/// Rounds half away from zero to a scaled integer; `None` when the result
/// does not fit in an `i64`.
#[inline]
fn to_scaled(x: f64) -> Option<i64> {
    let r = x.round();
    (r.is_finite() && r.abs() < PREDICTION_LIMIT).then_some(r as i64)
}

/// Scaled prediction of `model` for one row.
///
/// The sum runs over the weights in metadata order, strictly left to right,
/// in IEEE-754 double precision; the intercept is added last and the result
/// is rounded half away from zero at the target precision. Writers and
/// readers must agree on this order to reconstruct bit-exactly.
pub fn evaluate_prediction(
    model: &RegressorModel,
    refs: &HashMap<String, i64>,
    precisions: &HashMap<String, u32>,
    target_precision: u32,
) -> Result<i64> {
    let mut acc = 0.0f64;
    for (name, w) in &model.weights {
        let v = *refs
            .get(name)
            .ok_or_else(|| Error::MissingReference(name.clone()))?;
        let p = *precisions
            .get(name)
            .ok_or_else(|| Error::MissingReference(name.clone()))?;
        acc += w * (v as f64 / pow10f(p));
    }
    acc += model.intercept;
    to_scaled(acc * pow10f(target_precision)).ok_or_else(|| {
        Error::InvalidArgument(format!("prediction {acc} overflows the target precision"))
    })
}

/// A model bound to concrete reference columns.
pub struct CompiledModel<'a> {
    terms: Vec<(f64, &'a [i64], f64)>,
    intercept: f64,
    target_scale: f64,
}

impl<'a> CompiledModel<'a> {
    pub fn compile(
        model: &RegressorModel,
        table: &'a Table,
        target_precision: u32,
    ) -> Result<Self> {
        Self::compile_with(model, |n| table.column(n), target_precision)
    }

    pub fn compile_with<F>(model: &RegressorModel, lookup: F, target_precision: u32) -> Result<Self>
    where
        F: Fn(&str) -> Option<&'a Column>,
    {
        let terms = model
            .weights
            .iter()
            .map(|(name, w)| {
                let col = lookup(name).ok_or_else(|| Error::MissingReference(name.clone()))?;
                let values = col.scaled_values().ok_or_else(|| {
                    Error::InvalidArgument(format!("reference `{name}` is not a scaled column"))
                })?;
                Ok((*w, values, pow10f(col.meta.precision)))
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            terms,
            intercept: model.intercept,
            target_scale: pow10f(target_precision),
        })
    }
}

/// Same arithmetic as [`evaluate_prediction`] over pre-resolved columns.
/// Reference nulls are the caller's concern.
#[inline]
pub fn evaluate_scaled(model: &CompiledModel<'_>, row: usize) -> Option<i64> {
    let mut acc = 0.0f64;
    for &(w, values, scale) in &model.terms {
        acc += w * (values[row] as f64 / scale);
    }
    acc += model.intercept;
    to_scaled(acc * model.target_scale)
}

#[derive(Clone, Debug, PartialEq)]
pub struct VirtualizedColumn {
    pub target: String,
    pub kind: ColumnKind,
    pub precision: u32,
    pub offset: Vec<i64>,
    /// Absent when the candidate has a single model.
    pub switch: Option<Vec<i32>>,
    /// Original scaled value, only at rows where a reference is null.
    pub outlier: Vec<Option<i64>>,
    pub is_nan: Vec<bool>,
}

impl VirtualizedColumn {
    pub fn len(&self) -> usize {
        self.is_nan.len()
    }

    pub fn is_empty(&self) -> bool {
        self.is_nan.is_empty()
    }

    /// Checks the per-row state invariants.
    pub fn validate(&self, k: usize) -> Result<()> {
        let corrupt = |reason: String| Error::CorruptAux {
            column: self.target.clone(),
            reason,
        };
        let n = self.len();
        if self.offset.len() != n
            || self.outlier.len() != n
            || self.switch.as_ref().is_some_and(|s| s.len() != n)
        {
            return Err(corrupt("auxiliary column lengths differ".into()));
        }
        if self.switch.is_some() != (k > 1) {
            return Err(corrupt(format!(
                "switch column presence does not match k={k}"
            )));
        }
        for i in 0..n {
            let sw = self.switch.as_ref().map_or(0, |s| s[i]);
            if self.is_nan[i] && (self.offset[i] != 0 || self.outlier[i].is_some()) {
                return Err(corrupt(format!("row {i}: null row carries data")));
            }
            if self.outlier[i].is_some() && (self.offset[i] != 0 || sw != 0) {
                return Err(corrupt(format!(
                    "row {i}: outlier row carries offset or switch"
                )));
            }
            if sw < 0 || sw as usize >= k {
                return Err(corrupt(format!("row {i}: switch {sw} outside 0..{k}")));
            }
        }
        Ok(())
    }
}

fn scaled_column<'a>(table: &'a Table, name: &str) -> Result<&'a Column> {
    let col = table
        .column(name)
        .ok_or_else(|| Error::MissingReference(name.to_string()))?;
    if !col.meta.kind.is_scaled() {
        return Err(Error::InvalidArgument(format!(
            "`{name}` is not a scaled column"
        )));
    }
    Ok(col)
}

/// Encodes `candidate.target` as auxiliary columns over every table row.
pub fn virtualize_column(
    table: &Table,
    candidate: &KRegressionCandidate,
) -> Result<VirtualizedColumn> {
    let target = table
        .column(&candidate.target)
        .ok_or_else(|| Error::UnknownColumn(candidate.target.clone()))?;
    let y = target.scaled_values().ok_or_else(|| {
        Error::InvalidArgument(format!(
            "target `{}` is not a scaled column",
            candidate.target
        ))
    })?;
    let p = target.meta.precision;
    let refs = candidate
        .references
        .iter()
        .map(|r| scaled_column(table, r))
        .collect::<Result<Vec<_>>>()?;
    let models = candidate
        .models
        .iter()
        .map(|m| CompiledModel::compile(m, table, p))
        .collect::<Result<Vec<_>>>()?;

    let n = table.row_count();
    let mut out = VirtualizedColumn {
        target: candidate.target.clone(),
        kind: target.meta.kind,
        precision: p,
        offset: vec![0; n],
        switch: (candidate.k > 1).then(|| vec![0; n]),
        outlier: vec![None; n],
        is_nan: vec![false; n],
    };
    for i in 0..n {
        if target.is_null(i) {
            out.is_nan[i] = true;
            continue;
        }
        if refs.iter().any(|c| c.is_null(i)) {
            out.outlier[i] = Some(y[i]);
            continue;
        }
        let mut best: Option<(usize, i128)> = None;
        for (k, m) in models.iter().enumerate() {
            if let Some(pred) = evaluate_scaled(m, i) {
                let r = y[i] as i128 - pred as i128;
                if best.is_none_or(|(_, b)| r.unsigned_abs() < b.unsigned_abs()) {
                    best = Some((k, r));
                }
            }
        }
        match best.and_then(|(k, r)| i64::try_from(r).ok().map(|r| (k, r))) {
            Some((k, r)) => {
                out.offset[i] = r;
                if let Some(sw) = out.switch.as_mut() {
                    sw[i] = k as i32;
                }
            }
            // No usable prediction: keep the value verbatim.
            None => out.outlier[i] = Some(y[i]),
        }
    }
    Ok(out)
}

/// Inverse of [`virtualize_column`]. `table` must provide every reference.
pub fn reconstruct_column(
    virt: &VirtualizedColumn,
    candidate: &KRegressionCandidate,
    table: &Table,
) -> Result<Column> {
    reconstruct_with(virt, candidate, |n| table.column(n))
}

pub(crate) fn reconstruct_with<'a, F>(
    virt: &VirtualizedColumn,
    candidate: &KRegressionCandidate,
    lookup: F,
) -> Result<Column>
where
    F: Fn(&str) -> Option<&'a Column> + Copy,
{
    let k = candidate.models.len();
    virt.validate(k)?;
    let corrupt = |reason: String| Error::CorruptAux {
        column: virt.target.clone(),
        reason,
    };
    let n = virt.len();
    let refs = candidate
        .references
        .iter()
        .map(|r| lookup(r).ok_or_else(|| Error::MissingReference(r.clone())))
        .collect::<Result<Vec<_>>>()?;
    if let Some(r) = refs.iter().find(|c| c.len() != n) {
        return Err(corrupt(format!(
            "reference `{}` has {} rows, expected {n}",
            r.name(),
            r.len()
        )));
    }
    let models = candidate
        .models
        .iter()
        .map(|m| CompiledModel::compile_with(m, lookup, virt.precision))
        .collect::<Result<Vec<_>>>()?;

    let mut values = vec![0i64; n];
    let mut nulls = vec![false; n];
    for i in 0..n {
        if virt.is_nan[i] {
            nulls[i] = true;
            continue;
        }
        if let Some(v) = virt.outlier[i] {
            values[i] = v;
            continue;
        }
        if refs.iter().any(|c| c.is_null(i)) {
            return Err(corrupt(format!(
                "row {i}: null reference without outlier value"
            )));
        }
        let sw = virt.switch.as_ref().map_or(0, |s| s[i] as usize);
        let pred = evaluate_scaled(&models[sw], i)
            .ok_or_else(|| corrupt(format!("row {i}: prediction out of range")))?;
        values[i] = pred
            .checked_add(virt.offset[i])
            .ok_or_else(|| corrupt(format!("row {i}: offset overflows")))?;
    }
    let nullable = nulls.iter().any(|&b| b);
    Column::new(
        ColumnMeta::new(&virt.target, virt.kind, virt.precision, nullable),
        ColumnData::Scaled(values),
        nulls,
    )
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Aggregate {
    Sum,
    Avg,
    Count,
}

impl std::str::FromStr for Aggregate {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "sum" => Ok(Aggregate::Sum),
            "avg" => Ok(Aggregate::Avg),
            "count" => Ok(Aggregate::Count),
            other => Err(Error::InvalidArgument(format!(
                "unknown aggregate `{other}`"
            ))),
        }
    }
}

impl std::fmt::Display for Aggregate {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Aggregate::Sum => "sum",
            Aggregate::Avg => "avg",
            Aggregate::Count => "count",
        })
    }
}

/// Extra fractional digits carried by averages of scaled columns.
pub const AVG_EXTRA_DIGITS: u32 = 6;

#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(rename_all = "snake_case", tag = "type")]
pub enum AggregateValue {
    /// `mantissa / 10^scale`, exact.
    Decimal {
        mantissa: i128,
        scale: u32,
    },
    Float {
        value: f64,
    },
    Count {
        value: u64,
    },
    Null,
}

impl std::fmt::Display for AggregateValue {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            AggregateValue::Decimal { mantissa, scale } => {
                f.write_str(&render_i128(*mantissa, *scale))
            }
            AggregateValue::Float { value } => write!(f, "{value}"),
            AggregateValue::Count { value } => write!(f, "{value}"),
            AggregateValue::Null => f.write_str("NULL"),
        }
    }
}

fn render_i128(mantissa: i128, scale: u32) -> String {
    if let Ok(v) = i64::try_from(mantissa) {
        return render_scaled(v, scale);
    }
    let digits = mantissa.unsigned_abs().to_string();
    let sign = if mantissa < 0 { "-" } else { "" };
    let p = scale as usize;
    if p == 0 {
        return format!("{sign}{digits}");
    }
    let padded = format!("{digits:0>width$}", width = p + 1);
    let (i, fr) = padded.split_at(padded.len() - p);
    format!("{sign}{i}.{fr}")
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct AggregateResult {
    pub column: String,
    pub agg: Aggregate,
    pub value: AggregateValue,
    pub non_null: u64,
    pub nulls: u64,
}

/// Running aggregate over column chunks.
#[derive(Clone, Debug)]
pub struct Aggregator {
    agg: Aggregate,
    precision: Option<u32>,
    int_sum: i128,
    float_sum: f64,
    non_null: u64,
    nulls: u64,
}

impl Aggregator {
    pub fn new(agg: Aggregate) -> Self {
        Self {
            agg,
            precision: None,
            int_sum: 0,
            float_sum: 0.0,
            non_null: 0,
            nulls: 0,
        }
    }

    pub fn update(&mut self, col: &Column) -> Result<()> {
        let unsupported = || Error::UnsupportedAggregate {
            column: col.name().to_string(),
            agg: self.agg.to_string(),
        };
        match &col.data {
            ColumnData::Scaled(v) => {
                self.precision = Some(col.meta.precision);
                for (x, &null) in v.iter().zip(&col.nulls) {
                    if !null {
                        self.int_sum += *x as i128;
                    }
                }
            }
            ColumnData::Float(v) => {
                for (x, &null) in v.iter().zip(&col.nulls) {
                    if !null {
                        self.float_sum += x;
                    }
                }
            }
            _ if self.agg != Aggregate::Count => return Err(unsupported()),
            _ => {}
        }
        let nulls = col.nulls.iter().filter(|&&b| b).count() as u64;
        self.nulls += nulls;
        self.non_null += col.len() as u64 - nulls;
        Ok(())
    }

    pub fn finish(self, column: &str) -> AggregateResult {
        let value = match (self.agg, self.precision) {
            (Aggregate::Count, _) => AggregateValue::Count {
                value: self.non_null,
            },
            (_, None) if self.non_null == 0 => AggregateValue::Null,
            (Aggregate::Sum, Some(p)) => AggregateValue::Decimal {
                mantissa: self.int_sum,
                scale: p,
            },
            (Aggregate::Avg, Some(p)) => {
                if self.non_null == 0 {
                    AggregateValue::Null
                } else {
                    let scaled = self.int_sum * 10i128.pow(AVG_EXTRA_DIGITS);
                    AggregateValue::Decimal {
                        mantissa: div_round_half_away(scaled, self.non_null as i128),
                        scale: p + AVG_EXTRA_DIGITS,
                    }
                }
            }
            (Aggregate::Sum, None) => AggregateValue::Float {
                value: self.float_sum,
            },
            (Aggregate::Avg, None) => AggregateValue::Float {
                value: self.float_sum / self.non_null as f64,
            },
        };
        AggregateResult {
            column: column.to_string(),
            agg: self.agg,
            value,
            non_null: self.non_null,
            nulls: self.nulls,
        }
    }
}

fn div_round_half_away(num: i128, den: i128) -> i128 {
    let q = num / den;
    let r = num % den;
    if 2 * r.abs() >= den {
        q + num.signum()
    } else {
        q
    }
}

/// Aggregates one logical column of a file, reconstructing virtual columns
/// row group by row group from their references and auxiliary columns.
pub fn scan_aggregate(
    reader: &VirtualReader,
    column: &str,
    agg: Aggregate,
) -> Result<AggregateResult> {
    if !reader.has_logical_column(column) {
        return Err(Error::UnknownColumn(column.to_string()));
    }
    let mut acc = Aggregator::new(agg);
    for rg in 0..reader.num_row_groups() {
        let chunk = reader.read_logical_chunk(rg, column)?;
        acc.update(&chunk)?;
    }
    Ok(acc.finish(column))
}

/// Aggregates an in-memory column; the reference route for scan checks.
pub fn aggregate_column(col: &Column, agg: Aggregate) -> Result<AggregateResult> {
    let mut acc = Aggregator::new(agg);
    acc.update(col)?;
    Ok(acc.finish(col.name()))
}
