//! Typed columnar tables with exact decimal semantics.
//!
//! Numeric CSV tokens are stored as scaled 64-bit integers (`value × 10^p`),
//! so every integer or fixed-point token can be rendered back exactly.

use std::collections::HashSet;
use std::fmt;
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::storage::is_reserved_name;

/// Largest number of significant digits a fixed-point token may carry and
/// still be classified as `decimal`.
pub const MAX_DECIMAL_DIGITS: usize = 15;

/// Powers of ten that are exactly representable in both `i64` and `f64`.
pub const POW10: [i64; 19] = [
    1,
    10,
    100,
    1_000,
    10_000,
    100_000,
    1_000_000,
    10_000_000,
    100_000_000,
    1_000_000_000,
    10_000_000_000,
    100_000_000_000,
    1_000_000_000_000,
    10_000_000_000_000,
    100_000_000_000_000,
    1_000_000_000_000_000,
    10_000_000_000_000_000,
    100_000_000_000_000_000,
    1_000_000_000_000_000_000,
];

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ColumnKind {
    Integer,
    Decimal,
    Float,
    String,
    Boolean,
    Other,
}

impl ColumnKind {
    /// Integer and decimal columns hold scaled integers and may take part in
    /// functions, either as target or as reference.
    pub fn is_scaled(self) -> bool {
        matches!(self, ColumnKind::Integer | ColumnKind::Decimal)
    }
}

impl fmt::Display for ColumnKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            ColumnKind::Integer => "integer",
            ColumnKind::Decimal => "decimal",
            ColumnKind::Float => "float",
            ColumnKind::String => "string",
            ColumnKind::Boolean => "boolean",
            ColumnKind::Other => "other",
        };
        f.write_str(s)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ColumnMeta {
    pub name: String,
    pub kind: ColumnKind,
    /// Count of fractional decimal digits; 0 for everything but decimals.
    pub precision: u32,
    pub nullable: bool,
}

impl ColumnMeta {
    pub fn new(name: impl Into<String>, kind: ColumnKind, precision: u32, nullable: bool) -> Self {
        Self {
            name: name.into(),
            kind,
            precision,
            nullable,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum ColumnData {
    Scaled(Vec<i64>),
    Float(Vec<f64>),
    Text(Vec<String>),
    Boolean(Vec<bool>),
}

impl ColumnData {
    pub fn len(&self) -> usize {
        match self {
            ColumnData::Scaled(v) => v.len(),
            ColumnData::Float(v) => v.len(),
            ColumnData::Text(v) => v.len(),
            ColumnData::Boolean(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub(crate) fn empty_like(kind: ColumnKind) -> Self {
        match kind {
            ColumnKind::Integer | ColumnKind::Decimal => ColumnData::Scaled(Vec::new()),
            ColumnKind::Float => ColumnData::Float(Vec::new()),
            ColumnKind::Boolean => ColumnData::Boolean(Vec::new()),
            ColumnKind::String | ColumnKind::Other => ColumnData::Text(Vec::new()),
        }
    }
}

/// One column of a [`Table`]. Values at null rows are unspecified
/// (writers store the type's default there).
#[derive(Clone, Debug)]
pub struct Column {
    pub meta: ColumnMeta,
    pub data: ColumnData,
    /// `true` marks a null row.
    pub nulls: Vec<bool>,
}

impl Column {
    pub fn new(meta: ColumnMeta, data: ColumnData, nulls: Vec<bool>) -> Result<Self> {
        if data.len() != nulls.len() {
            return Err(Error::InvalidArgument(format!(
                "column `{}` has {} values but {} null flags",
                meta.name,
                data.len(),
                nulls.len()
            )));
        }
        Ok(Self { meta, data, nulls })
    }

    /// Builds a scaled column; `None` entries are nulls.
    pub fn scaled(name: &str, precision: u32, values: &[Option<i64>]) -> Self {
        let kind = if precision == 0 {
            ColumnKind::Integer
        } else {
            ColumnKind::Decimal
        };
        let nulls: Vec<bool> = values.iter().map(Option::is_none).collect();
        let nullable = nulls.iter().any(|&n| n);
        Self {
            meta: ColumnMeta::new(name, kind, precision, nullable),
            data: ColumnData::Scaled(values.iter().map(|v| v.unwrap_or(0)).collect()),
            nulls,
        }
    }

    pub fn len(&self) -> usize {
        self.nulls.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nulls.is_empty()
    }

    pub fn name(&self) -> &str {
        &self.meta.name
    }

    pub fn is_null(&self, row: usize) -> bool {
        self.nulls[row]
    }

    pub fn scaled_values(&self) -> Option<&[i64]> {
        match &self.data {
            ColumnData::Scaled(v) => Some(v),
            _ => None,
        }
    }

    pub fn scaled_at(&self, row: usize) -> Option<i64> {
        match &self.data {
            ColumnData::Scaled(v) if !self.nulls[row] => Some(v[row]),
            _ => None,
        }
    }

    /// Value in original units, for scaled columns.
    pub fn descaled_at(&self, row: usize) -> Option<f64> {
        self.scaled_at(row)
            .map(|v| v as f64 / POW10[self.meta.precision as usize] as f64)
    }

    /// Renders one cell as CSV text; `None` for null.
    pub fn render(&self, row: usize) -> Option<String> {
        if self.nulls[row] {
            return None;
        }
        Some(match &self.data {
            ColumnData::Scaled(v) => render_scaled(v[row], self.meta.precision),
            ColumnData::Float(v) => format!("{}", v[row]),
            ColumnData::Text(v) => v[row].clone(),
            ColumnData::Boolean(v) => v[row].to_string(),
        })
    }

    /// Cell equality at declared precision. Float cells compare by bit
    /// pattern so that NaN payloads and signed zeros are not conflated.
    pub fn cell_eq(&self, other: &Column, row: usize) -> bool {
        if self.nulls[row] || other.nulls[row] {
            return self.nulls[row] == other.nulls[row];
        }
        match (&self.data, &other.data) {
            (ColumnData::Scaled(a), ColumnData::Scaled(b)) => {
                self.meta.precision == other.meta.precision && a[row] == b[row]
            }
            (ColumnData::Float(a), ColumnData::Float(b)) => a[row].to_bits() == b[row].to_bits(),
            (ColumnData::Text(a), ColumnData::Text(b)) => a[row] == b[row],
            (ColumnData::Boolean(a), ColumnData::Boolean(b)) => a[row] == b[row],
            _ => false,
        }
    }

    /// Copies the given rows into a new column.
    pub fn take(&self, rows: std::ops::Range<usize>) -> Column {
        let data = match &self.data {
            ColumnData::Scaled(v) => ColumnData::Scaled(v[rows.clone()].to_vec()),
            ColumnData::Float(v) => ColumnData::Float(v[rows.clone()].to_vec()),
            ColumnData::Text(v) => ColumnData::Text(v[rows.clone()].to_vec()),
            ColumnData::Boolean(v) => ColumnData::Boolean(v[rows.clone()].to_vec()),
        };
        Column {
            meta: self.meta.clone(),
            data,
            nulls: self.nulls[rows].to_vec(),
        }
    }

    /// Appends `other` (same kind) to this column.
    pub fn extend_from(&mut self, other: &Column) -> Result<()> {
        match (&mut self.data, &other.data) {
            (ColumnData::Scaled(a), ColumnData::Scaled(b)) => a.extend_from_slice(b),
            (ColumnData::Float(a), ColumnData::Float(b)) => a.extend_from_slice(b),
            (ColumnData::Text(a), ColumnData::Text(b)) => a.extend_from_slice(b),
            (ColumnData::Boolean(a), ColumnData::Boolean(b)) => a.extend_from_slice(b),
            _ => {
                return Err(Error::InvalidArgument(format!(
                    "cannot append to column `{}`: storage kinds differ",
                    self.meta.name
                )))
            }
        }
        self.nulls.extend_from_slice(&other.nulls);
        Ok(())
    }
}

#[derive(Clone, Debug)]
pub struct Table {
    columns: Vec<Column>,
    row_count: usize,
}

impl Table {
    pub fn new(columns: Vec<Column>) -> Result<Self> {
        let row_count = columns.first().map_or(0, Column::len);
        let mut seen = HashSet::new();
        for c in &columns {
            if c.len() != row_count {
                return Err(Error::InvalidArgument(format!(
                    "column `{}` has {} rows, expected {row_count}",
                    c.name(),
                    c.len()
                )));
            }
            if !seen.insert(c.name().to_string()) {
                return Err(Error::Format(format!(
                    "duplicate column name `{}`",
                    c.name()
                )));
            }
        }
        Ok(Self { columns, row_count })
    }

    pub fn empty() -> Self {
        Self {
            columns: Vec::new(),
            row_count: 0,
        }
    }

    pub fn row_count(&self) -> usize {
        self.row_count
    }

    pub fn columns(&self) -> &[Column] {
        &self.columns
    }

    pub fn column(&self, name: &str) -> Option<&Column> {
        self.columns.iter().find(|c| c.name() == name)
    }

    pub fn column_index(&self, name: &str) -> Option<usize> {
        self.columns.iter().position(|c| c.name() == name)
    }

    pub fn schema(&self) -> Vec<ColumnMeta> {
        self.columns.iter().map(|c| c.meta.clone()).collect()
    }

    pub fn into_columns(self) -> Vec<Column> {
        self.columns
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Sample {
    /// Sorted, distinct row indices.
    pub row_indices: Vec<usize>,
    pub seed: u64,
}

impl Sample {
    pub fn len(&self) -> usize {
        self.row_indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.row_indices.is_empty()
    }
}

/// Uniform sample of `min(n, row_count)` distinct rows, deterministic in `seed`.
pub fn sample_rows(table: &Table, n: usize, seed: u64) -> Sample {
    let rows = table.row_count();
    let mut row_indices = if n >= rows {
        (0..rows).collect()
    } else {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rand::seq::index::sample(&mut rng, rows, n).into_vec()
    };
    row_indices.sort_unstable();
    Sample { row_indices, seed }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct NullTokens(Vec<String>);

impl NullTokens {
    pub fn new<I, S>(tokens: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        Self(tokens.into_iter().map(Into::into).collect())
    }

    pub fn contains(&self, token: &str) -> bool {
        self.0.iter().any(|t| t == token)
    }
}

impl Default for NullTokens {
    fn default() -> Self {
        Self::new(["", "NaN", "nan", "NA"])
    }
}

#[derive(Clone, Debug)]
pub struct IngestOptions {
    pub row_limit: usize,
    pub delimiter: u8,
    pub null_tokens: NullTokens,
}

impl Default for IngestOptions {
    fn default() -> Self {
        Self {
            row_limit: 1_000_000,
            delimiter: b',',
            null_tokens: NullTokens::default(),
        }
    }
}

/// Tokens of one CSV column packed into a single buffer.
#[derive(Default)]
struct TokenColumn {
    bytes: String,
    ends: Vec<usize>,
}

impl TokenColumn {
    fn push(&mut self, token: &str) {
        self.bytes.push_str(token);
        self.ends.push(self.bytes.len());
    }

    fn iter(&self) -> impl Iterator<Item = &str> + Clone + '_ {
        let starts = std::iter::once(0).chain(self.ends.iter().copied());
        starts
            .zip(self.ends.iter().copied())
            .map(move |(s, e)| &self.bytes[s..e])
    }
}

pub fn ingest_csv(path: impl AsRef<Path>, options: &IngestOptions) -> Result<Table> {
    let file = std::fs::File::open(path.as_ref())?;
    ingest_reader(file, options)
}

pub fn ingest_reader<R: std::io::Read>(reader: R, options: &IngestOptions) -> Result<Table> {
    if options.row_limit == 0 {
        return Err(Error::InvalidArgument("row limit must be positive".into()));
    }
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .delimiter(options.delimiter)
        .flexible(false)
        .from_reader(reader);
    let headers: Vec<String> = rdr.headers()?.iter().map(str::to_string).collect();
    for h in &headers {
        if is_reserved_name(h) {
            return Err(Error::Format(format!(
                "column name `{h}` collides with the auxiliary naming scheme"
            )));
        }
    }
    let mut tokens: Vec<TokenColumn> = headers.iter().map(|_| TokenColumn::default()).collect();
    let mut record = csv::StringRecord::new();
    let mut rows = 0;
    while rows < options.row_limit && rdr.read_record(&mut record)? {
        for (col, field) in tokens.iter_mut().zip(record.iter()) {
            col.push(field);
        }
        rows += 1;
    }

    let columns = headers
        .iter()
        .zip(&tokens)
        .map(|(name, toks)| {
            let meta = infer_column_meta(toks.iter(), name, &options.null_tokens);
            build_column(meta, toks.iter(), &options.null_tokens)
        })
        .collect::<Result<Vec<_>>>()?;
    Table::new(columns)
}

/// A parsed integer or fixed-point literal.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
struct FixedPoint<'a> {
    negative: bool,
    int_digits: &'a str,
    frac_digits: &'a str,
    has_point: bool,
}

impl FixedPoint<'_> {
    fn significant_digits(&self) -> usize {
        let int = self.int_digits.trim_start_matches('0');
        if int.is_empty() {
            self.frac_digits.trim_start_matches('0').len()
        } else {
            int.len() + self.frac_digits.len()
        }
    }

    /// `value × 10^precision`, or `None` on overflow.
    fn scale(&self, precision: u32) -> Option<i64> {
        let p = precision as usize;
        if p >= POW10.len() || self.frac_digits.len() > p {
            return None;
        }
        let mut acc: i64 = 0;
        for d in self.int_digits.bytes().chain(self.frac_digits.bytes()) {
            acc = acc.checked_mul(10)?.checked_add((d - b'0') as i64)?;
        }
        acc = acc.checked_mul(POW10[p - self.frac_digits.len()])?;
        Some(if self.negative { -acc } else { acc })
    }
}

fn parse_fixed(token: &str) -> Option<FixedPoint<'_>> {
    let (negative, body) = match token.as_bytes().first()? {
        b'-' => (true, &token[1..]),
        b'+' => (false, &token[1..]),
        _ => (false, token),
    };
    let (int_digits, frac_digits, has_point) = match body.split_once('.') {
        Some((i, f)) => (i, f, true),
        None => (body, "", false),
    };
    if int_digits.is_empty() && frac_digits.is_empty() {
        return None;
    }
    let all_digits = |s: &str| s.bytes().all(|b| b.is_ascii_digit());
    if !all_digits(int_digits) || !all_digits(frac_digits) {
        return None;
    }
    Some(FixedPoint {
        negative,
        int_digits,
        frac_digits,
        has_point,
    })
}

/// Scientific-notation or otherwise non-fixed numeric literal.
fn is_float_literal(token: &str) -> bool {
    let only_numeric_chars = token
        .bytes()
        .all(|b| b.is_ascii_digit() || matches!(b, b'+' | b'-' | b'.' | b'e' | b'E'));
    only_numeric_chars && token.bytes().any(|b| b.is_ascii_digit()) && token.parse::<f64>().is_ok()
}

/// Classifies a CSV column from its raw tokens.
pub fn infer_column_meta<'a, I>(tokens: I, name: &str, null_tokens: &NullTokens) -> ColumnMeta
where
    I: IntoIterator<Item = &'a str> + Clone,
{
    let mut nullable = false;
    let mut all_integer = true;
    let mut all_fixed = true;
    let mut all_numeric = true;
    let mut all_bool = true;
    let mut any_value = false;
    let mut precision = 0usize;

    for tok in tokens.clone() {
        if null_tokens.contains(tok) {
            nullable = true;
            continue;
        }
        any_value = true;
        if all_bool && tok != "true" && tok != "false" {
            all_bool = false;
        }
        match parse_fixed(tok) {
            Some(fp) => {
                if fp.has_point {
                    all_integer = false;
                }
                if fp.significant_digits() > MAX_DECIMAL_DIGITS {
                    all_fixed = false;
                }
                precision = precision.max(fp.frac_digits.len());
            }
            None => {
                all_integer = false;
                all_fixed = false;
                if !is_float_literal(tok) {
                    all_numeric = false;
                }
            }
        }
    }

    let (kind, precision) = if !any_value {
        (ColumnKind::Integer, 0)
    } else if all_bool {
        (ColumnKind::Boolean, 0)
    } else if all_integer {
        (ColumnKind::Integer, 0)
    } else if all_fixed {
        (ColumnKind::Decimal, precision)
    } else if all_numeric {
        (ColumnKind::Float, 0)
    } else {
        (ColumnKind::String, 0)
    };

    // Scaling overflow demotes to float rather than truncating.
    let kind = if kind.is_scaled() {
        let fits = tokens
            .into_iter()
            .filter(|t| !null_tokens.contains(t))
            .all(|t| {
                parse_fixed(t)
                    .and_then(|fp| fp.scale(precision as u32))
                    .is_some()
            });
        if fits {
            kind
        } else {
            ColumnKind::Float
        }
    } else {
        kind
    };
    let precision = if kind == ColumnKind::Decimal {
        precision as u32
    } else {
        0
    };
    ColumnMeta::new(name, kind, precision, nullable)
}

fn build_column<'a, I>(meta: ColumnMeta, tokens: I, null_tokens: &NullTokens) -> Result<Column>
where
    I: IntoIterator<Item = &'a str>,
{
    let mut data = ColumnData::empty_like(meta.kind);
    let mut nulls = Vec::new();
    for tok in tokens {
        let is_null = null_tokens.contains(tok);
        nulls.push(is_null);
        match &mut data {
            ColumnData::Scaled(v) => v.push(if is_null {
                0
            } else {
                parse_fixed(tok)
                    .and_then(|fp| fp.scale(meta.precision))
                    .ok_or_else(|| Error::Format(format!("bad numeric token `{tok}`")))?
            }),
            ColumnData::Float(v) => v.push(if is_null {
                0.0
            } else {
                tok.parse()
                    .map_err(|_| Error::Format(format!("bad float token `{tok}`")))?
            }),
            ColumnData::Boolean(v) => v.push(tok == "true"),
            ColumnData::Text(v) => v.push(if is_null {
                String::new()
            } else {
                tok.to_string()
            }),
        }
    }
    Column::new(meta, data, nulls)
}

/// Renders `value / 10^precision` with exactly `precision` fractional digits.
pub fn render_scaled(value: i64, precision: u32) -> String {
    let p = precision as usize;
    let mag = (value as i128).unsigned_abs();
    let digits = mag.to_string();
    let sign = if value < 0 { "-" } else { "" };
    if p == 0 {
        return format!("{sign}{digits}");
    }
    let padded = if digits.len() <= p {
        format!("{}{digits}", "0".repeat(p + 1 - digits.len()))
    } else {
        digits
    };
    let (int, frac) = padded.split_at(padded.len() - p);
    format!("{sign}{int}.{frac}")
}

#[cfg(test)]
mod tests {
    use super::*;

    fn nulls() -> NullTokens {
        NullTokens::default()
    }

    fn ingest_str(s: &str) -> Table {
        ingest_reader(s.as_bytes(), &IngestOptions::default()).unwrap()
    }

    #[test]
    fn ingest_mixed_integer_decimal() {
        let t = ingest_str("a,b\n1,2.50\n3,NaN\n");
        assert_eq!(t.row_count(), 2);
        let a = t.column("a").unwrap();
        assert_eq!(a.meta.kind, ColumnKind::Integer);
        assert_eq!(a.meta.precision, 0);
        assert_eq!(a.scaled_values().unwrap(), &[1, 3]);
        let b = t.column("b").unwrap();
        assert_eq!(b.meta.kind, ColumnKind::Decimal);
        assert_eq!(b.meta.precision, 2);
        assert_eq!(b.scaled_at(0), Some(250));
        assert_eq!(b.scaled_at(1), None);
        assert!(b.meta.nullable);
    }

    #[test]
    fn ingest_header_only() {
        let t = ingest_str("a\n");
        assert_eq!(t.row_count(), 0);
        assert_eq!(t.columns().len(), 1);
    }

    #[test]
    fn ingest_respects_row_limit() {
        let mut csv = String::from("x\n");
        for i in 0..100 {
            csv.push_str(&format!("{i}\n"));
        }
        let opts = IngestOptions {
            row_limit: 10,
            ..Default::default()
        };
        let t = ingest_reader(csv.as_bytes(), &opts).unwrap();
        assert_eq!(t.row_count(), 10);
    }

    #[test]
    fn ragged_rows_are_format_errors() {
        let err = ingest_reader("a,b\n1,2\n3\n".as_bytes(), &IngestOptions::default()).unwrap_err();
        assert!(matches!(err, Error::Format(_)), "{err:?}");
    }

    #[test]
    fn reserved_names_rejected() {
        let err =
            ingest_reader("a__offset,b\n1,2\n".as_bytes(), &IngestOptions::default()).unwrap_err();
        assert!(matches!(err, Error::Format(_)));
        // `__` alone is fine.
        ingest_reader("a__b,b\n1,2\n".as_bytes(), &IngestOptions::default()).unwrap();
    }

    #[test]
    fn duplicate_names_rejected() {
        let err = ingest_reader("a,a\n1,2\n".as_bytes(), &IngestOptions::default()).unwrap_err();
        assert!(matches!(err, Error::Format(_)));
    }

    #[test]
    fn missing_file_is_io_error() {
        let err = ingest_csv("/nonexistent/definitely.csv", &IngestOptions::default()).unwrap_err();
        assert!(matches!(err, Error::Io(_)));
    }

    #[test]
    fn infer_integer() {
        let m = infer_column_meta(["1", "2", "3"], "x", &nulls());
        assert_eq!(m, ColumnMeta::new("x", ColumnKind::Integer, 0, false));
    }

    #[test]
    fn infer_decimal_takes_max_fraction() {
        let m = infer_column_meta(["3.14", "5", "0.1"], "x", &nulls());
        assert_eq!(m, ColumnMeta::new("x", ColumnKind::Decimal, 2, false));
    }

    #[test]
    fn infer_scientific_is_float() {
        let m = infer_column_meta(["1e9", "2.0"], "x", &nulls());
        assert_eq!(m.kind, ColumnKind::Float);
        assert_eq!(m.precision, 0);
    }

    #[test]
    fn infer_digit_budget() {
        let m = infer_column_meta(["1234567890.12345"], "x", &nulls());
        assert_eq!(m.kind, ColumnKind::Decimal);
        let m = infer_column_meta(["1234567890.123456"], "x", &nulls());
        assert_eq!(m.kind, ColumnKind::Float);
        // Leading zeros are not significant.
        let m = infer_column_meta(["0.000000000000000001"], "x", &nulls());
        assert_eq!(m.kind, ColumnKind::Decimal);
        assert_eq!(m.precision, 18);
    }

    #[test]
    fn infer_overflow_demotes_to_float() {
        let m = infer_column_meta(["99999999999999999999"], "x", &nulls());
        assert_eq!(m.kind, ColumnKind::Float);
        // Fits as a token but not once scaled to the column precision.
        let m = infer_column_meta(["9000000000000000000", "0.5"], "x", &nulls());
        assert_eq!(m.kind, ColumnKind::Float);
    }

    #[test]
    fn infer_strings_and_booleans() {
        assert_eq!(
            infer_column_meta(["a", "1"], "x", &nulls()).kind,
            ColumnKind::String
        );
        assert_eq!(
            infer_column_meta(["inf"], "x", &nulls()).kind,
            ColumnKind::String
        );
        assert_eq!(
            infer_column_meta(["1.2.3"], "x", &nulls()).kind,
            ColumnKind::String
        );
        assert_eq!(
            infer_column_meta(["true", "false", "NA"], "x", &nulls()),
            ColumnMeta::new("x", ColumnKind::Boolean, 0, true)
        );
    }

    #[test]
    fn null_spellings() {
        let m = infer_column_meta(["", "NaN", "nan", "NA", "4"], "x", &nulls());
        assert_eq!(m, ColumnMeta::new("x", ColumnKind::Integer, 0, true));
        let custom = NullTokens::new(["-"]);
        let m = infer_column_meta(["-", "4"], "x", &custom);
        assert_eq!(m, ColumnMeta::new("x", ColumnKind::Integer, 0, true));
    }

    #[test]
    fn render_matches_tokens() {
        assert_eq!(render_scaled(250, 2), "2.50");
        assert_eq!(render_scaled(-5, 2), "-0.05");
        assert_eq!(render_scaled(0, 3), "0.000");
        assert_eq!(render_scaled(-42, 0), "-42");
        assert_eq!(render_scaled(i64::MIN, 0), i64::MIN.to_string());
    }

    #[test]
    fn sample_small_table_returns_all_rows() {
        let t = ingest_str("a\n1\n2\n3\n4\n5\n");
        let s = sample_rows(&t, 10, 7);
        assert_eq!(s.row_indices, vec![0, 1, 2, 3, 4]);
    }

    fn big_table(rows: usize) -> Table {
        let values: Vec<Option<i64>> = (0..rows as i64).map(Some).collect();
        Table::new(vec![Column::scaled("a", 0, &values)]).unwrap()
    }

    #[test]
    fn sample_is_deterministic_and_distinct() {
        let t = big_table(1_000_000);
        let s1 = sample_rows(&t, 10_000, 42);
        let s2 = sample_rows(&t, 10_000, 42);
        assert_eq!(s1, s2);
        assert_eq!(s1.len(), 10_000);
        let distinct: HashSet<_> = s1.row_indices.iter().collect();
        assert_eq!(distinct.len(), 10_000);
        assert!(s1.row_indices.iter().all(|&i| i < 1_000_000));
        // Checked once that these two seeds disagree; pinned here.
        let s3 = sample_rows(&t, 10_000, 43);
        assert_ne!(s1.row_indices, s3.row_indices);
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        fn fixed_token() -> impl Strategy<Value = String> {
            (any::<bool>(), 0u64..1_000_000_000, 0usize..6, any::<u32>()).prop_map(
                |(neg, int, frac_len, frac_seed)| {
                    let mut s = String::new();
                    if neg {
                        s.push('-');
                    }
                    s.push_str(&int.to_string());
                    if frac_len > 0 {
                        s.push('.');
                        let frac = format!("{:06}", frac_seed % 1_000_000);
                        s.push_str(&frac[..frac_len]);
                    }
                    s
                },
            )
        }

        proptest! {
            #[test]
            fn ingestion_is_lossless(tokens in proptest::collection::vec(fixed_token(), 1..40)) {
                let mut csv = String::from("v\n");
                for t in &tokens {
                    csv.push_str(t);
                    csv.push('\n');
                }
                let table = ingest_reader(csv.as_bytes(), &IngestOptions::default()).unwrap();
                let col = table.column("v").unwrap();
                prop_assert!(col.meta.kind.is_scaled());
                let p = col.meta.precision as usize;
                for (row, tok) in tokens.iter().enumerate() {
                    // Pad the token to the column precision; rendering must match it.
                    let fp = parse_fixed(tok).unwrap();
                    let mut expected = String::new();
                    let int = fp.int_digits.trim_start_matches('0');
                    let int = if int.is_empty() { "0" } else { int };
                    let frac = format!("{:0<p$}", fp.frac_digits);
                    let is_zero = int == "0" && frac.bytes().all(|b| b == b'0');
                    if fp.negative && !is_zero {
                        expected.push('-');
                    }
                    expected.push_str(int);
                    if p > 0 {
                        expected.push('.');
                        expected.push_str(&frac);
                    }
                    prop_assert_eq!(col.render(row).unwrap(), expected);
                }
            }

            #[test]
            fn ingestion_is_deterministic(tokens in proptest::collection::vec(fixed_token(), 0..20)) {
                let csv = format!("v\n{}", tokens.iter().map(|t| format!("{t}\n")).collect::<String>());
                let a = ingest_reader(csv.as_bytes(), &IngestOptions::default()).unwrap();
                let b = ingest_reader(csv.as_bytes(), &IngestOptions::default()).unwrap();
                prop_assert_eq!(a.schema(), b.schema());
                for (x, y) in a.columns().iter().zip(b.columns()) {
                    prop_assert_eq!(&x.data, &y.data);
                    prop_assert_eq!(&x.nulls, &y.nulls);
                }
            }
        }
    }
}
