//! Parquet layout of virtualized tables.
//!
//! Plain columns are stored as-is. Each virtual target is replaced, at its
//! original position, by `<target>__offset`, `<target>__switch` (only when
//! `k > 1`), `<target>__outlier` and `<target>__isnan`. Function metadata is
//! stored as JSON under the footer key [`FOOTER_KEY`] and mirrored byte for
//! byte in `<path>.virtual.json`.

use std::collections::{HashMap, HashSet};
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use bytes::Bytes;
use parquet::basic::{Compression, LogicalType, Repetition, Type as PhysicalType};
use parquet::column::reader::{get_typed_column_reader, ColumnReader};
use parquet::data_type::{
    BoolType, ByteArray, ByteArrayType, DataType, DoubleType, FloatType, Int32Type, Int64Type,
};
use parquet::file::metadata::KeyValue;
use parquet::file::properties::WriterProperties;
use parquet::file::reader::{FileReader, RowGroupReader, SerializedFileReader};
use parquet::file::statistics::Statistics;
use parquet::file::writer::{SerializedColumnWriter, SerializedFileWriter};
use parquet::schema::types::{ColumnDescriptor, Type};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::codec::{reconstruct_with, virtualize_column, VirtualizedColumn};
use crate::driller::KRegressionCandidate;
use crate::error::{Error, Result};
use crate::optimizer::FunctionPlan;
use crate::regression::RegressorModel;
use crate::table::{Column, ColumnData, ColumnKind, ColumnMeta, Table};

pub const FOOTER_KEY: &str = "virtual.meta.v1";
pub const METADATA_VERSION: u32 = 1;
pub const DEFAULT_ROW_GROUP_SIZE: usize = 1 << 20;
const AUX_SUFFIXES: [&str; 4] = ["offset", "switch", "outlier", "isnan"];
/// Decimal precision declared for every scaled INT64 column.
const DECIMAL_PRECISION: i32 = 18;

/// True for names of the form `<name>__<aux suffix>`.
pub fn is_reserved_name(name: &str) -> bool {
    name.rsplit_once("__")
        .is_some_and(|(_, suffix)| AUX_SUFFIXES.contains(&suffix))
}

pub fn aux_name(target: &str, suffix: &str) -> String {
    format!("{target}__{suffix}")
}

pub fn sidecar_path(path: &Path) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".virtual.json");
    PathBuf::from(s)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VirtualFileMetadata {
    pub version: u32,
    pub virtual_columns: Vec<VirtualColumnMeta>,
    pub eval_order: Vec<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VirtualColumnMeta {
    pub name: String,
    pub precision: u32,
    pub k: usize,
    pub references: Vec<String>,
    pub models: Vec<ModelMeta>,
    pub aux_names: AuxNames,
}

/// Coefficients are shortest round-trip decimal strings.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelMeta {
    #[serde(with = "ordered_map")]
    pub weights: Vec<(String, String)>,
    pub intercept: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AuxNames {
    pub offset: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub switch: Option<String>,
    pub outlier: String,
    pub is_nan: String,
}

impl AuxNames {
    pub fn for_target(target: &str, k: usize) -> Self {
        Self {
            offset: aux_name(target, "offset"),
            switch: (k > 1).then(|| aux_name(target, "switch")),
            outlier: aux_name(target, "outlier"),
            is_nan: aux_name(target, "isnan"),
        }
    }

    /// Physical columns in storage order.
    pub fn physical(&self) -> Vec<&str> {
        let mut v = vec![self.offset.as_str()];
        v.extend(self.switch.as_deref());
        v.push(&self.outlier);
        v.push(&self.is_nan);
        v
    }
}

/// JSON object that keeps insertion order.
mod ordered_map {
    use std::fmt;

    use serde::de::{MapAccess, Visitor};
    use serde::ser::SerializeMap;
    use serde::{Deserializer, Serializer};

    pub fn serialize<S: Serializer>(entries: &[(String, String)], s: S) -> Result<S::Ok, S::Error> {
        let mut map = s.serialize_map(Some(entries.len()))?;
        for (k, v) in entries {
            map.serialize_entry(k, v)?;
        }
        map.end()
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<(String, String)>, D::Error> {
        struct Entries;

        impl<'de> Visitor<'de> for Entries {
            type Value = Vec<(String, String)>;

            fn expecting(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str("a map of column names to decimal strings")
            }

            fn visit_map<A: MapAccess<'de>>(self, mut access: A) -> Result<Self::Value, A::Error> {
                let mut out = Vec::new();
                while let Some(entry) = access.next_entry()? {
                    out.push(entry);
                }
                Ok(out)
            }
        }

        d.deserialize_map(Entries)
    }
}

fn format_coefficient(x: f64) -> Result<String> {
    if !x.is_finite() {
        return Err(Error::PlanMismatch(format!("non-finite coefficient {x}")));
    }
    Ok(x.to_string())
}

fn parse_coefficient(s: &str) -> Result<f64> {
    s.parse::<f64>()
        .ok()
        .filter(|x| x.is_finite())
        .ok_or_else(|| Error::Metadata(format!("invalid coefficient `{s}`")))
}

impl VirtualColumnMeta {
    pub fn from_candidate(c: &KRegressionCandidate, precision: u32) -> Result<Self> {
        let models = c
            .models
            .iter()
            .map(|m| {
                Ok(ModelMeta {
                    weights: m
                        .weights
                        .iter()
                        .map(|(n, w)| Ok((n.clone(), format_coefficient(*w)?)))
                        .collect::<Result<_>>()?,
                    intercept: format_coefficient(m.intercept)?,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            name: c.target.clone(),
            precision,
            k: models.len(),
            references: c.references.clone(),
            models,
            aux_names: AuxNames::for_target(&c.target, c.models.len()),
        })
    }

    /// The candidate exactly as a reader evaluates it.
    pub fn to_candidate(&self) -> Result<KRegressionCandidate> {
        let models = self
            .models
            .iter()
            .map(|m| {
                Ok(RegressorModel {
                    weights: m
                        .weights
                        .iter()
                        .map(|(n, w)| Ok((n.clone(), parse_coefficient(w)?)))
                        .collect::<Result<_>>()?,
                    intercept: parse_coefficient(&m.intercept)?,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(KRegressionCandidate {
            target: self.name.clone(),
            references: self.references.clone(),
            k: self.k,
            models,
            lambda: 0.0,
            sample_max_abs_error: 0.0,
            sample_sse: 0.0,
            objective: 0.0,
            fit_rows: 0,
            objective_trace: Vec::new(),
        })
    }
}

impl VirtualFileMetadata {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        serde_json::from_str(s).map_err(|e| Error::Metadata(e.to_string()))
    }

    pub fn column(&self, name: &str) -> Option<&VirtualColumnMeta> {
        self.virtual_columns.iter().find(|c| c.name == name)
    }

    /// Checks the metadata against the physical schema of its file.
    pub fn validate(&self, physical: &[ColumnMeta]) -> Result<()> {
        let bad = |msg: String| Err(Error::Metadata(msg));
        if self.version != METADATA_VERSION {
            return bad(format!("unsupported metadata version {}", self.version));
        }
        let kinds: HashMap<&str, &ColumnMeta> =
            physical.iter().map(|m| (m.name.as_str(), m)).collect();
        let position: HashMap<&str, usize> = self
            .eval_order
            .iter()
            .enumerate()
            .map(|(i, n)| (n.as_str(), i))
            .collect();
        if position.len() != self.eval_order.len()
            || self.eval_order.len() != self.virtual_columns.len()
        {
            return bad("eval_order must list every virtual column exactly once".into());
        }
        let mut aux_seen = HashSet::new();
        for vc in &self.virtual_columns {
            let name = &vc.name;
            let Some(&pos) = position.get(name.as_str()) else {
                return bad(format!("virtual column `{name}` missing from eval_order"));
            };
            if kinds.contains_key(name.as_str()) {
                return bad(format!("virtual column `{name}` is also stored physically"));
            }
            if vc.k == 0 || vc.models.len() != vc.k {
                return bad(format!(
                    "`{name}`: k={} but {} models",
                    vc.k,
                    vc.models.len()
                ));
            }
            if vc.aux_names.switch.is_some() != (vc.k > 1) {
                return bad(format!("`{name}`: switch column must be present iff k > 1"));
            }
            if vc.precision as usize >= crate::table::POW10.len() {
                return bad(format!("`{name}`: precision {} out of range", vc.precision));
            }
            let expect = |aux: &str, ok: fn(&ColumnMeta) -> bool| match kinds.get(aux) {
                Some(m) if ok(m) => Ok(()),
                Some(_) => bad(format!(
                    "`{name}`: auxiliary column `{aux}` has the wrong type"
                )),
                None => bad(format!("`{name}`: auxiliary column `{aux}` not in file")),
            };
            expect(&vc.aux_names.offset, |m| m.kind.is_scaled())?;
            expect(&vc.aux_names.outlier, |m| m.kind.is_scaled())?;
            expect(&vc.aux_names.is_nan, |m| m.kind == ColumnKind::Boolean)?;
            if let Some(sw) = &vc.aux_names.switch {
                expect(sw, |m| m.kind == ColumnKind::Integer)?;
            }
            for aux in vc.aux_names.physical() {
                if !aux_seen.insert(aux) {
                    return bad(format!("auxiliary column `{aux}` used twice"));
                }
            }
            let mut refs = HashSet::new();
            for r in &vc.references {
                if !refs.insert(r.as_str()) {
                    return bad(format!("`{name}`: duplicate reference `{r}`"));
                }
                let ok = match (kinds.get(r.as_str()), position.get(r.as_str())) {
                    (Some(m), _) => m.kind.is_scaled(),
                    (None, Some(&p)) => p < pos,
                    (None, None) => false,
                };
                if !ok {
                    return bad(format!(
                        "`{name}`: reference `{r}` is neither a numeric column nor an earlier virtual column"
                    ));
                }
            }
            for m in &vc.models {
                let mut seen = HashSet::new();
                for (w, c) in &m.weights {
                    if !refs.contains(w.as_str()) || !seen.insert(w.as_str()) {
                        return bad(format!(
                            "`{name}`: weight on unlisted or repeated column `{w}`"
                        ));
                    }
                    parse_coefficient(c)?;
                }
                parse_coefficient(&m.intercept)?;
            }
        }
        Ok(())
    }
}

#[derive(Clone, Debug)]
pub struct WriteOptions {
    pub row_group_size: usize,
    pub write_sidecar: bool,
}

impl Default for WriteOptions {
    fn default() -> Self {
        Self {
            row_group_size: DEFAULT_ROW_GROUP_SIZE,
            write_sidecar: true,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ColumnSize {
    pub name: String,
    pub compressed_bytes: u64,
    pub uncompressed_bytes: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct WriteStats {
    pub rows: usize,
    pub row_groups: usize,
    pub total_bytes: u64,
    pub columns: Vec<ColumnSize>,
    pub metadata_bytes: usize,
}

impl WriteStats {
    pub fn column_bytes(&self, name: &str) -> Option<u64> {
        self.columns
            .iter()
            .find(|c| c.name == name)
            .map(|c| c.compressed_bytes)
    }
}

fn check_plan(table: &Table, plan: &FunctionPlan) -> Result<()> {
    let mismatch = |msg: String| Err(Error::PlanMismatch(msg));
    let order: HashMap<&str, usize> = plan
        .eval_order
        .iter()
        .enumerate()
        .map(|(i, n)| (n.as_str(), i))
        .collect();
    if order.len() != plan.eval_order.len() || order.len() != plan.selected.len() {
        return mismatch("eval_order must list every selected target exactly once".into());
    }
    for c in &plan.selected {
        let Some(&pos) = order.get(c.target.as_str()) else {
            return mismatch(format!("target `{}` missing from eval_order", c.target));
        };
        for name in std::iter::once(&c.target).chain(&c.references) {
            match table.column(name) {
                Some(col) if col.meta.kind.is_scaled() => {}
                Some(_) => return mismatch(format!("column `{name}` is not numeric")),
                None => return mismatch(format!("column `{name}` not in table")),
            }
        }
        if c.models.is_empty() {
            return mismatch(format!("target `{}` has no models", c.target));
        }
        for r in &c.references {
            if order.get(r.as_str()).is_some_and(|&p| p >= pos) {
                return mismatch(format!(
                    "reference `{r}` of `{}` is evaluated later",
                    c.target
                ));
            }
        }
        for m in &c.models {
            if let Some((w, _)) = m.weights.iter().find(|(w, _)| !c.references.contains(w)) {
                return mismatch(format!(
                    "weight on `{w}` outside the references of `{}`",
                    c.target
                ));
            }
        }
    }
    Ok(())
}

/// Builds the footer metadata for `plan`.
pub fn plan_metadata(table: &Table, plan: &FunctionPlan) -> Result<Option<VirtualFileMetadata>> {
    check_plan(table, plan)?;
    if plan.is_empty() {
        return Ok(None);
    }
    let virtual_columns = plan
        .ordered()
        .into_iter()
        .map(|c| {
            let p = table.column(&c.target).map_or(0, |t| t.meta.precision);
            VirtualColumnMeta::from_candidate(c, p)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(Some(VirtualFileMetadata {
        version: METADATA_VERSION,
        virtual_columns,
        eval_order: plan.eval_order.clone(),
    }))
}

fn aux_columns(virt: VirtualizedColumn, names: &AuxNames) -> Result<Vec<Column>> {
    let n = virt.len();
    let kind = virt.kind;
    let p = virt.precision;
    let mut cols = vec![Column::new(
        ColumnMeta::new(&names.offset, kind, p, false),
        ColumnData::Scaled(virt.offset),
        vec![false; n],
    )?];
    if let (Some(name), Some(sw)) = (&names.switch, virt.switch) {
        cols.push(Column::new(
            ColumnMeta::new(name, ColumnKind::Integer, 0, false),
            ColumnData::Scaled(sw.into_iter().map(i64::from).collect()),
            vec![false; n],
        )?);
    }
    let nulls: Vec<bool> = virt.outlier.iter().map(Option::is_none).collect();
    cols.push(Column::new(
        ColumnMeta::new(&names.outlier, kind, p, true),
        ColumnData::Scaled(virt.outlier.into_iter().map(|v| v.unwrap_or(0)).collect()),
        nulls,
    )?);
    cols.push(Column::new(
        ColumnMeta::new(&names.is_nan, ColumnKind::Boolean, 0, false),
        ColumnData::Boolean(virt.is_nan),
        vec![false; n],
    )?);
    Ok(cols)
}

/// Writes `table` with the targets of `plan` virtualized. An empty plan
/// writes a plain Parquet file without the footer key or sidecar.
pub fn write_virtual_file(
    table: &Table,
    plan: &FunctionPlan,
    path: &Path,
    options: &WriteOptions,
) -> Result<WriteStats> {
    let metadata = plan_metadata(table, plan)?;
    let Some(metadata) = metadata else {
        let sidecar = sidecar_path(path);
        if sidecar.exists() {
            fs::remove_file(sidecar)?;
        }
        let cols: Vec<&Column> = table.columns().iter().collect();
        return write_columns(path, &cols, None, options);
    };

    // Virtualize with the coefficients a reader will parse back.
    let encoded = metadata
        .virtual_columns
        .par_iter()
        .map(|vc| {
            let cand = vc.to_candidate()?;
            aux_columns(virtualize_column(table, &cand)?, &vc.aux_names)
        })
        .collect::<Result<Vec<_>>>()?;
    let by_target: HashMap<&str, &Vec<Column>> = metadata
        .virtual_columns
        .iter()
        .map(|vc| vc.name.as_str())
        .zip(&encoded)
        .collect();
    let mut cols = Vec::new();
    for c in table.columns() {
        match by_target.get(c.name()) {
            Some(aux) => cols.extend(aux.iter()),
            None => cols.push(c),
        }
    }
    let json = metadata.to_json()?;
    let stats = write_columns(path, &cols, Some(&json), options)?;
    if options.write_sidecar {
        fs::write(sidecar_path(path), &json)?;
    }
    Ok(stats)
}

fn parquet_type(meta: &ColumnMeta) -> Result<Type> {
    let rep = if meta.nullable {
        Repetition::OPTIONAL
    } else {
        Repetition::REQUIRED
    };
    let name = meta.name.as_str();
    let builder = match meta.kind {
        ColumnKind::Integer if name.ends_with("__switch") => {
            Type::primitive_type_builder(name, PhysicalType::INT32).with_logical_type(Some(
                LogicalType::Integer {
                    bit_width: 32,
                    is_signed: true,
                },
            ))
        }
        ColumnKind::Integer => Type::primitive_type_builder(name, PhysicalType::INT64)
            .with_logical_type(Some(LogicalType::Integer {
                bit_width: 64,
                is_signed: true,
            })),
        ColumnKind::Decimal => Type::primitive_type_builder(name, PhysicalType::INT64)
            .with_logical_type(Some(LogicalType::Decimal {
                scale: meta.precision as i32,
                precision: DECIMAL_PRECISION,
            }))
            .with_precision(DECIMAL_PRECISION)
            .with_scale(meta.precision as i32),
        ColumnKind::Float => Type::primitive_type_builder(name, PhysicalType::DOUBLE),
        ColumnKind::Boolean => Type::primitive_type_builder(name, PhysicalType::BOOLEAN),
        ColumnKind::String | ColumnKind::Other => {
            Type::primitive_type_builder(name, PhysicalType::BYTE_ARRAY)
                .with_logical_type(Some(LogicalType::String))
        }
    };
    Ok(builder.with_repetition(rep).build()?)
}

fn writer_properties(footer: Option<&str>) -> WriterProperties {
    WriterProperties::builder()
        .set_compression(Compression::SNAPPY)
        .set_key_value_metadata(
            footer.map(|json| vec![KeyValue::new(FOOTER_KEY.to_string(), json.to_string())]),
        )
        .build()
}

fn write_typed<T: DataType>(
    w: &mut SerializedColumnWriter<'_>,
    values: &[T::T],
    def: Option<&[i16]>,
) -> Result<()> {
    w.typed::<T>().write_batch(values, def, None)?;
    Ok(())
}

fn non_null<'a, T: Clone + 'a>(values: &'a [T], nulls: &'a [bool]) -> impl Iterator<Item = T> + 'a {
    values
        .iter()
        .zip(nulls)
        .filter(|(_, &null)| !null)
        .map(|(v, _)| v.clone())
}

fn write_chunk(
    w: &mut SerializedColumnWriter<'_>,
    col: &Column,
    rows: std::ops::Range<usize>,
) -> Result<()> {
    let nulls = &col.nulls[rows.clone()];
    if !col.meta.nullable && nulls.iter().any(|&b| b) {
        return Err(Error::InvalidArgument(format!(
            "column `{}` holds nulls but is declared non-nullable",
            col.name()
        )));
    }
    let def: Option<Vec<i16>> = col
        .meta
        .nullable
        .then(|| nulls.iter().map(|&b| i16::from(!b)).collect());
    let def = def.as_deref();
    match &col.data {
        ColumnData::Scaled(v) if col.name().ends_with("__switch") => {
            let vals = non_null(&v[rows], nulls)
                .map(|x| {
                    i32::try_from(x).map_err(|_| {
                        Error::InvalidArgument(format!("switch value {x} does not fit in 32 bits"))
                    })
                })
                .collect::<Result<Vec<_>>>()?;
            write_typed::<Int32Type>(w, &vals, def)
        }
        ColumnData::Scaled(v) => {
            write_typed::<Int64Type>(w, &non_null(&v[rows], nulls).collect::<Vec<_>>(), def)
        }
        ColumnData::Float(v) => {
            write_typed::<DoubleType>(w, &non_null(&v[rows], nulls).collect::<Vec<_>>(), def)
        }
        ColumnData::Boolean(v) => {
            write_typed::<BoolType>(w, &non_null(&v[rows], nulls).collect::<Vec<_>>(), def)
        }
        ColumnData::Text(v) => {
            let vals: Vec<ByteArray> = v[rows]
                .iter()
                .zip(nulls)
                .filter(|(_, &null)| !null)
                .map(|(s, _)| ByteArray::from(s.as_str()))
                .collect();
            write_typed::<ByteArrayType>(w, &vals, def)
        }
    }
}

/// Encodes physical columns as one Parquet file with the shared writer
/// settings (Snappy, default dictionary and RLE encodings).
pub fn encode_columns(
    columns: &[&Column],
    footer: Option<&str>,
    options: &WriteOptions,
) -> Result<(Vec<u8>, WriteStats)> {
    let rows = columns.first().map_or(0, |c| c.len());
    if columns.iter().any(|c| c.len() != rows) {
        return Err(Error::InvalidArgument("columns differ in length".into()));
    }
    let fields = columns
        .iter()
        .map(|c| parquet_type(&c.meta).map(Arc::new))
        .collect::<Result<Vec<_>>>()?;
    let schema = Type::group_type_builder("schema")
        .with_fields(fields)
        .build()?;
    let mut buf = Vec::new();
    let mut writer = SerializedFileWriter::new(
        &mut buf,
        Arc::new(schema),
        Arc::new(writer_properties(footer)),
    )?;
    let group = options.row_group_size.max(1);
    let mut start = 0;
    while start < rows {
        let end = (start + group).min(rows);
        let mut rg = writer.next_row_group()?;
        for col in columns {
            let mut w = rg
                .next_column()?
                .ok_or_else(|| Error::InvalidArgument("schema and columns disagree".into()))?;
            write_chunk(&mut w, col, start..end)?;
            w.close()?;
        }
        rg.close()?;
        start = end;
    }
    let meta = writer.close()?;

    let mut sizes: Vec<ColumnSize> = columns
        .iter()
        .map(|c| ColumnSize {
            name: c.name().to_string(),
            compressed_bytes: 0,
            uncompressed_bytes: 0,
        })
        .collect();
    for rg in &meta.row_groups {
        for (size, chunk) in sizes.iter_mut().zip(&rg.columns) {
            if let Some(m) = &chunk.meta_data {
                size.compressed_bytes += m.total_compressed_size as u64;
                size.uncompressed_bytes += m.total_uncompressed_size as u64;
            }
        }
    }
    let stats = WriteStats {
        rows,
        row_groups: meta.row_groups.len(),
        total_bytes: buf.len() as u64,
        columns: sizes,
        metadata_bytes: footer.map_or(0, str::len),
    };
    Ok((buf, stats))
}

pub fn write_columns(
    path: &Path,
    columns: &[&Column],
    footer: Option<&str>,
    options: &WriteOptions,
) -> Result<WriteStats> {
    let (bytes, stats) = encode_columns(columns, footer, options)?;
    fs::write(path, bytes)?;
    Ok(stats)
}

/// Size of `table` written as plain Parquet with the shared settings.
pub fn plain_size(table: &Table, options: &WriteOptions) -> Result<WriteStats> {
    let cols: Vec<&Column> = table.columns().iter().collect();
    Ok(encode_columns(&cols, None, options)?.1)
}

fn physical_meta(desc: &ColumnDescriptor) -> Result<ColumnMeta> {
    let name = desc.name();
    if desc.path().parts().len() != 1 || desc.max_rep_level() > 0 {
        return Err(Error::Format(format!(
            "nested column `{}` is not supported",
            desc.path()
        )));
    }
    let nullable = desc.max_def_level() > 0;
    let decimal = matches!(desc.logical_type(), Some(LogicalType::Decimal { .. }))
        || desc.converted_type() == parquet::basic::ConvertedType::DECIMAL;
    let (kind, p) = match desc.physical_type() {
        PhysicalType::BOOLEAN => (ColumnKind::Boolean, 0),
        PhysicalType::INT32 | PhysicalType::INT64 if decimal => {
            let scale = desc.type_scale();
            if !(0..crate::table::POW10.len() as i32).contains(&scale) {
                return Err(Error::Format(format!("column `{name}` has scale {scale}")));
            }
            (ColumnKind::Decimal, scale as u32)
        }
        PhysicalType::INT32 | PhysicalType::INT64 => (ColumnKind::Integer, 0),
        PhysicalType::FLOAT | PhysicalType::DOUBLE => (ColumnKind::Float, 0),
        PhysicalType::BYTE_ARRAY => (ColumnKind::String, 0),
        other => {
            return Err(Error::Format(format!(
                "column `{name}` has unsupported type {other}"
            )))
        }
    };
    Ok(ColumnMeta::new(name, kind, p, nullable))
}

fn read_typed<T: DataType>(
    reader: ColumnReader,
    rows: usize,
    nullable: bool,
) -> Result<(Vec<T::T>, Vec<bool>)>
where
    T::T: Default + Clone,
{
    let mut r = get_typed_column_reader::<T>(reader);
    let mut values = Vec::with_capacity(rows);
    let mut def = Vec::with_capacity(if nullable { rows } else { 0 });
    let mut read = 0;
    while read < rows {
        let (records, _, _) =
            r.read_records(rows - read, nullable.then_some(&mut def), None, &mut values)?;
        if records == 0 {
            return Err(Error::Format(format!(
                "column chunk ends after {read} of {rows} rows"
            )));
        }
        read += records;
    }
    if !nullable {
        return Ok((values, vec![false; rows]));
    }
    let nulls: Vec<bool> = def.iter().map(|&d| d == 0).collect();
    let mut dense = Vec::with_capacity(rows);
    let mut it = values.into_iter();
    for &null in &nulls {
        dense.push(if null {
            T::T::default()
        } else {
            it.next().unwrap_or_default()
        });
    }
    Ok((dense, nulls))
}

fn read_chunk(rg: &dyn RowGroupReader, idx: usize, meta: &ColumnMeta) -> Result<Column> {
    let rows = rg.metadata().num_rows() as usize;
    let reader = rg.get_column_reader(idx)?;
    let nullable = meta.nullable;
    let (data, nulls) = match reader {
        ColumnReader::BoolColumnReader(_) => {
            let (v, n) = read_typed::<BoolType>(reader, rows, nullable)?;
            (ColumnData::Boolean(v), n)
        }
        ColumnReader::Int32ColumnReader(_) => {
            let (v, n) = read_typed::<Int32Type>(reader, rows, nullable)?;
            (
                ColumnData::Scaled(v.into_iter().map(i64::from).collect()),
                n,
            )
        }
        ColumnReader::Int64ColumnReader(_) => {
            let (v, n) = read_typed::<Int64Type>(reader, rows, nullable)?;
            (ColumnData::Scaled(v), n)
        }
        ColumnReader::FloatColumnReader(_) => {
            let (v, n) = read_typed::<FloatType>(reader, rows, nullable)?;
            (ColumnData::Float(v.into_iter().map(f64::from).collect()), n)
        }
        ColumnReader::DoubleColumnReader(_) => {
            let (v, n) = read_typed::<DoubleType>(reader, rows, nullable)?;
            (ColumnData::Float(v), n)
        }
        ColumnReader::ByteArrayColumnReader(_) => {
            let (v, n) = read_typed::<ByteArrayType>(reader, rows, nullable)?;
            let text = v
                .iter()
                .map(|b| String::from_utf8_lossy(b.data()).into_owned())
                .collect();
            (ColumnData::Text(text), n)
        }
        _ => {
            return Err(Error::Format(format!(
                "column `{}` has an unsupported physical type",
                meta.name
            )))
        }
    };
    Column::new(meta.clone(), data, nulls)
}

struct VirtualEntry {
    candidate: KRegressionCandidate,
    aux: AuxNames,
    meta: ColumnMeta,
}

/// Read access to a (possibly virtualized) Parquet file. The file is held
/// in memory, so timings measure decoding and reconstruction only.
pub struct VirtualReader {
    file: SerializedFileReader<Bytes>,
    physical: Vec<ColumnMeta>,
    physical_index: HashMap<String, usize>,
    logical: Vec<ColumnMeta>,
    metadata: Option<VirtualFileMetadata>,
    footer_json: Option<String>,
    warning: Option<String>,
    virtuals: HashMap<String, VirtualEntry>,
}

impl VirtualReader {
    /// Opens a file. Invalid metadata is reported through [`Self::warning`]
    /// and the file is exposed with its raw physical columns.
    pub fn open(path: &Path) -> Result<Self> {
        Self::open_with(path, false)
    }

    /// Like [`Self::open`] but fails on invalid metadata.
    pub fn open_strict(path: &Path) -> Result<Self> {
        Self::open_with(path, true)
    }

    fn open_with(path: &Path, strict: bool) -> Result<Self> {
        let bytes = Bytes::from(fs::read(path)?);
        Self::from_bytes(bytes, strict)
    }

    pub fn from_bytes(bytes: Bytes, strict: bool) -> Result<Self> {
        let file = SerializedFileReader::new(bytes)?;
        let physical = file
            .metadata()
            .file_metadata()
            .schema_descr()
            .columns()
            .iter()
            .map(|d| physical_meta(d))
            .collect::<Result<Vec<_>>>()?;
        let physical_index = physical
            .iter()
            .enumerate()
            .map(|(i, m)| (m.name.clone(), i))
            .collect();
        let footer_json = file
            .metadata()
            .file_metadata()
            .key_value_metadata()
            .and_then(|kv| kv.iter().find(|e| e.key == FOOTER_KEY))
            .map(|e| e.value.clone().unwrap_or_default());
        let mut reader = Self {
            file,
            logical: physical.clone(),
            physical,
            physical_index,
            metadata: None,
            footer_json,
            warning: None,
            virtuals: HashMap::new(),
        };
        if let Some(json) = reader.footer_json.clone() {
            match reader.load_metadata(&json) {
                Ok(()) => {}
                Err(e) if strict => return Err(e),
                Err(e) => {
                    log::warn!("ignoring virtual metadata: {e}");
                    reader.warning = Some(e.to_string());
                    reader.metadata = None;
                    reader.virtuals.clear();
                }
            }
        }
        Ok(reader)
    }

    fn load_metadata(&mut self, json: &str) -> Result<()> {
        let meta = VirtualFileMetadata::from_json(json)?;
        meta.validate(&self.physical)?;
        let mut virtuals = HashMap::new();
        let mut owner: HashMap<&str, &str> = HashMap::new();
        for vc in &meta.virtual_columns {
            let outlier = &self.physical[self.physical_index[&vc.aux_names.outlier]];
            if outlier.precision != vc.precision {
                return Err(Error::Metadata(format!(
                    "`{}`: precision {} disagrees with its outlier column",
                    vc.name, vc.precision
                )));
            }
            let nullable = self.any_true(&vc.aux_names.is_nan)?;
            let entry = VirtualEntry {
                candidate: vc.to_candidate()?,
                aux: vc.aux_names.clone(),
                meta: ColumnMeta::new(&vc.name, outlier.kind, vc.precision, nullable),
            };
            for aux in vc.aux_names.physical() {
                owner.insert(aux, vc.name.as_str());
            }
            virtuals.insert(vc.name.clone(), entry);
        }
        let mut logical = Vec::new();
        let mut emitted = HashSet::new();
        for m in &self.physical {
            match owner.get(m.name.as_str()) {
                Some(&target) => {
                    if emitted.insert(target) {
                        logical.push(virtuals[target].meta.clone());
                    }
                }
                None => logical.push(m.clone()),
            }
        }
        self.logical = logical;
        self.virtuals = virtuals;
        self.metadata = Some(meta);
        Ok(())
    }

    /// Whether a boolean column holds any `true`, from chunk statistics when
    /// every row group has them.
    fn any_true(&self, name: &str) -> Result<bool> {
        let idx = self.physical_index[name];
        let mut unknown = false;
        for rg in self.file.metadata().row_groups() {
            match rg.column(idx).statistics() {
                Some(Statistics::Boolean(s)) => match s.max_opt() {
                    Some(true) => return Ok(true),
                    Some(false) => {}
                    None => unknown |= rg.num_rows() > 0,
                },
                _ => unknown |= rg.num_rows() > 0,
            }
        }
        if !unknown {
            return Ok(false);
        }
        for rg in 0..self.num_row_groups() {
            if let ColumnData::Boolean(v) = &self.read_physical_chunk(rg, name)?.data {
                if v.iter().any(|&b| b) {
                    return Ok(true);
                }
            }
        }
        Ok(false)
    }

    /// Stored bytes per physical column, summed over row groups.
    pub fn column_sizes(&self) -> Vec<ColumnSize> {
        let mut sizes: Vec<ColumnSize> = self
            .physical
            .iter()
            .map(|m| ColumnSize {
                name: m.name.clone(),
                compressed_bytes: 0,
                uncompressed_bytes: 0,
            })
            .collect();
        for rg in self.file.metadata().row_groups() {
            for (size, chunk) in sizes.iter_mut().zip(rg.columns()) {
                size.compressed_bytes += chunk.compressed_size() as u64;
                size.uncompressed_bytes += chunk.uncompressed_size() as u64;
            }
        }
        sizes
    }

    pub fn metadata(&self) -> Option<&VirtualFileMetadata> {
        self.metadata.as_ref()
    }

    /// Raw footer JSON, present even when it failed validation.
    pub fn footer_json(&self) -> Option<&str> {
        self.footer_json.as_deref()
    }

    pub fn warning(&self) -> Option<&str> {
        self.warning.as_deref()
    }

    pub fn physical_schema(&self) -> &[ColumnMeta] {
        &self.physical
    }

    pub fn logical_schema(&self) -> &[ColumnMeta] {
        &self.logical
    }

    pub fn num_rows(&self) -> usize {
        self.file.metadata().file_metadata().num_rows() as usize
    }

    pub fn num_row_groups(&self) -> usize {
        self.file.metadata().num_row_groups()
    }

    pub fn has_logical_column(&self, name: &str) -> bool {
        self.logical.iter().any(|m| m.name == name)
    }

    pub fn is_virtual(&self, name: &str) -> bool {
        self.virtuals.contains_key(name)
    }

    pub fn candidate(&self, name: &str) -> Option<&KRegressionCandidate> {
        self.virtuals.get(name).map(|v| &v.candidate)
    }

    pub fn read_physical_chunk(&self, row_group: usize, name: &str) -> Result<Column> {
        let idx = *self
            .physical_index
            .get(name)
            .ok_or_else(|| Error::UnknownColumn(name.to_string()))?;
        let rg = self.file.get_row_group(row_group)?;
        read_chunk(rg.as_ref(), idx, &self.physical[idx])
    }

    /// One row group of a logical column; virtual columns are rebuilt from
    /// their references and auxiliary columns only.
    pub fn read_logical_chunk(&self, row_group: usize, name: &str) -> Result<Column> {
        let Some(entry) = self.virtuals.get(name) else {
            if !self.physical_index.contains_key(name) {
                return Err(Error::UnknownColumn(name.to_string()));
            }
            return self.read_physical_chunk(row_group, name);
        };
        let refs = entry
            .candidate
            .references
            .iter()
            .map(|r| Ok((r.clone(), self.read_logical_chunk(row_group, r)?)))
            .collect::<Result<HashMap<_, _>>>()?;
        let virt = self.read_aux(row_group, entry)?;
        let mut col = reconstruct_with(&virt, &entry.candidate, |n| refs.get(n))?;
        col.meta = entry.meta.clone();
        Ok(col)
    }

    fn read_aux(&self, row_group: usize, entry: &VirtualEntry) -> Result<VirtualizedColumn> {
        let target = &entry.meta.name;
        let corrupt = |reason: String| Error::CorruptAux {
            column: target.clone(),
            reason,
        };
        let scaled = |col: Column| -> Result<(Vec<i64>, Vec<bool>)> {
            match col.data {
                ColumnData::Scaled(v) => Ok((v, col.nulls)),
                _ => Err(corrupt(format!(
                    "`{}` is not an integer column",
                    col.meta.name
                ))),
            }
        };
        let (offset, offset_nulls) =
            scaled(self.read_physical_chunk(row_group, &entry.aux.offset)?)?;
        if offset_nulls.iter().any(|&b| b) {
            return Err(corrupt("offset column holds nulls".into()));
        }
        let switch = match &entry.aux.switch {
            Some(name) => {
                let (v, nulls) = scaled(self.read_physical_chunk(row_group, name)?)?;
                if nulls.iter().any(|&b| b) {
                    return Err(corrupt("switch column holds nulls".into()));
                }
                Some(
                    v.into_iter()
                        .map(|x| i32::try_from(x).map_err(|_| corrupt(format!("switch value {x}"))))
                        .collect::<Result<Vec<_>>>()?,
                )
            }
            None => None,
        };
        let (outlier, outlier_nulls) =
            scaled(self.read_physical_chunk(row_group, &entry.aux.outlier)?)?;
        let is_nan_col = self.read_physical_chunk(row_group, &entry.aux.is_nan)?;
        let ColumnData::Boolean(is_nan) = is_nan_col.data else {
            return Err(corrupt("is_nan column is not boolean".into()));
        };
        Ok(VirtualizedColumn {
            target: target.clone(),
            kind: entry.meta.kind,
            precision: entry.meta.precision,
            offset,
            switch,
            outlier: outlier
                .into_iter()
                .zip(outlier_nulls)
                .map(|(v, null)| (!null).then_some(v))
                .collect(),
            is_nan,
        })
    }

    fn concat<F>(&self, meta: &ColumnMeta, mut chunk: F) -> Result<Column>
    where
        F: FnMut(usize) -> Result<Column>,
    {
        let mut out = Column::new(meta.clone(), ColumnData::empty_like(meta.kind), Vec::new())?;
        for rg in 0..self.num_row_groups() {
            out.extend_from(&chunk(rg)?)?;
        }
        Ok(out)
    }

    pub fn read_column(&self, name: &str) -> Result<Column> {
        let meta = self
            .logical
            .iter()
            .find(|m| m.name == name)
            .ok_or_else(|| Error::UnknownColumn(name.to_string()))?;
        self.concat(meta, |rg| self.read_logical_chunk(rg, name))
    }

    /// The logical table, in the original column order.
    pub fn read_table(&self) -> Result<Table> {
        let cols = self
            .logical
            .par_iter()
            .map(|m| self.read_column(&m.name))
            .collect::<Result<Vec<_>>>()?;
        Table::new(cols)
    }

    /// The stored columns, auxiliary columns included.
    pub fn read_physical_table(&self) -> Result<Table> {
        let cols = self
            .physical
            .iter()
            .map(|m| self.concat(m, |rg| self.read_physical_chunk(rg, &m.name)))
            .collect::<Result<Vec<_>>>()?;
        Table::new(cols)
    }
}

/// Rewrites the physical columns of `src` into `dst`, keeping the footer
/// JSON verbatim. Used to inject faults in tests.
#[doc(hidden)]
pub fn rewrite_physical<F>(src: &Path, dst: &Path, edit: F) -> Result<()>
where
    F: FnOnce(&mut Vec<Column>),
{
    let reader = VirtualReader::open(src)?;
    let mut cols = reader.read_physical_table()?.into_columns();
    edit(&mut cols);
    let refs: Vec<&Column> = cols.iter().collect();
    write_columns(dst, &refs, reader.footer_json(), &WriteOptions::default())?;
    Ok(())
}
