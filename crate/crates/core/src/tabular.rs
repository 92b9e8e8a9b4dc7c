//! Typed cohort tables: schema, CSV ingestion/emission and design-matrix encoding.
//!
//! Every value is held as `f64`. Binary and event/dropout columns carry `0.0`/`1.0`,
//! categorical and ordered columns carry the zero-based index of their label in the
//! declared level list.

use std::collections::HashMap;
use std::path::Path;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Role {
    Covariate,
    EntryTime,
    Dropout,
    SurvTime,
    Event,
    Ignore,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Kind {
    Continuous,
    Binary,
    Categorical { levels: Vec<String> },
    Ordered { levels: Vec<String> },
}

impl Kind {
    pub fn levels(&self) -> Option<&[String]> {
        match self {
            Kind::Categorical { levels } | Kind::Ordered { levels } => Some(levels),
            _ => None,
        }
    }

    /// Number of distinct values a discrete column may take (binary counts as 2).
    pub fn n_classes(&self) -> Option<usize> {
        match self {
            Kind::Continuous => None,
            Kind::Binary => Some(2),
            Kind::Categorical { levels } | Kind::Ordered { levels } => Some(levels.len()),
        }
    }

    pub fn is_discrete(&self) -> bool {
        !matches!(self, Kind::Continuous)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ColumnSpec {
    pub name: String,
    pub role: Role,
    pub kind: Kind,
}

impl ColumnSpec {
    pub fn new(name: impl Into<String>, role: Role, kind: Kind) -> Self {
        Self {
            name: name.into(),
            role,
            kind,
        }
    }

    pub fn continuous(name: impl Into<String>) -> Self {
        Self::new(name, Role::Covariate, Kind::Continuous)
    }

    pub fn binary(name: impl Into<String>) -> Self {
        Self::new(name, Role::Covariate, Kind::Binary)
    }

    pub fn categorical<S: Into<String>>(name: impl Into<String>, levels: impl IntoIterator<Item = S>) -> Self {
        Self::new(
            name,
            Role::Covariate,
            Kind::Categorical {
                levels: levels.into_iter().map(Into::into).collect(),
            },
        )
    }

    pub fn ordered<S: Into<String>>(name: impl Into<String>, levels: impl IntoIterator<Item = S>) -> Self {
        Self::new(
            name,
            Role::Covariate,
            Kind::Ordered {
                levels: levels.into_iter().map(Into::into).collect(),
            },
        )
    }

    pub fn surv_time(name: impl Into<String>) -> Self {
        Self::new(name, Role::SurvTime, Kind::Continuous)
    }

    pub fn event(name: impl Into<String>) -> Self {
        Self::new(name, Role::Event, Kind::Binary)
    }

    pub fn entry_time(name: impl Into<String>) -> Self {
        Self::new(name, Role::EntryTime, Kind::Continuous)
    }

    pub fn dropout(name: impl Into<String>) -> Self {
        Self::new(name, Role::Dropout, Kind::Binary)
    }

    fn check(&self) -> Result<()> {
        if self.name.is_empty() {
            return Err(Error::Schema("empty column name".into()));
        }
        if let Some(levels) = self.kind.levels() {
            if levels.is_empty() {
                return Err(Error::Schema(format!("column `{}` has no levels", self.name)));
            }
            let mut seen = std::collections::HashSet::new();
            for l in levels {
                if !seen.insert(l) {
                    return Err(Error::Schema(format!(
                        "column `{}` declares level `{l}` twice",
                        self.name
                    )));
                }
            }
        }
        let kind_ok = match self.role {
            Role::SurvTime | Role::EntryTime => self.kind == Kind::Continuous,
            Role::Event | Role::Dropout => self.kind == Kind::Binary,
            Role::Covariate | Role::Ignore => true,
        };
        if !kind_ok {
            return Err(Error::Schema(format!(
                "column `{}`: role {:?} incompatible with kind {:?}",
                self.name, self.role, self.kind
            )));
        }
        Ok(())
    }
}

/// Checks the role cardinalities of a full cohort schema.
pub fn validate_schema(schema: &[ColumnSpec]) -> Result<()> {
    let mut names = std::collections::HashSet::new();
    for c in schema {
        c.check()?;
        if !names.insert(c.name.as_str()) {
            return Err(Error::Schema(format!("duplicate column `{}`", c.name)));
        }
    }
    let count = |r: Role| schema.iter().filter(|c| c.role == r).count();
    for (role, min, max) in [
        (Role::SurvTime, 1, 1),
        (Role::Event, 1, 1),
        (Role::EntryTime, 0, 1),
        (Role::Dropout, 0, 1),
    ] {
        let n = count(role);
        if n < min || n > max {
            return Err(Error::Schema(format!(
                "expected between {min} and {max} columns with role {role:?}, found {n}"
            )));
        }
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    schema: Vec<ColumnSpec>,
    n_rows: usize,
    columns: Vec<Vec<f64>>,
}

impl Dataset {
    /// Builds a dataset from already-coded columns. Only lengths and per-kind value
    /// ranges are checked; role cardinality is checked by [`validate_schema`].
    pub fn new(schema: Vec<ColumnSpec>, columns: Vec<Vec<f64>>) -> Result<Self> {
        if schema.len() != columns.len() {
            return Err(Error::LengthMismatch {
                expected: schema.len(),
                got: columns.len(),
            });
        }
        let n_rows = columns.first().map_or(0, Vec::len);
        for (spec, col) in schema.iter().zip(&columns) {
            spec.check()?;
            if col.len() != n_rows {
                return Err(Error::LengthMismatch {
                    expected: n_rows,
                    got: col.len(),
                });
            }
            for (row, &v) in col.iter().enumerate() {
                check_value(spec, v).map_err(|reason| Error::InvalidValue {
                    row,
                    column: spec.name.clone(),
                    reason,
                })?;
            }
        }
        Ok(Self {
            schema,
            n_rows,
            columns,
        })
    }

    pub fn schema(&self) -> &[ColumnSpec] {
        &self.schema
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn columns(&self) -> &[Vec<f64>] {
        &self.columns
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.schema.iter().position(|c| c.name == name)
    }

    pub fn spec(&self, name: &str) -> Result<&ColumnSpec> {
        self.index_of(name)
            .map(|i| &self.schema[i])
            .ok_or_else(|| Error::MissingColumn(name.to_string()))
    }

    pub fn column(&self, name: &str) -> Result<&[f64]> {
        self.index_of(name)
            .map(|i| self.columns[i].as_slice())
            .ok_or_else(|| Error::MissingColumn(name.to_string()))
    }

    pub fn column_with_role(&self, role: Role) -> Option<(&ColumnSpec, &[f64])> {
        self.schema
            .iter()
            .position(|c| c.role == role)
            .map(|i| (&self.schema[i], self.columns[i].as_slice()))
    }

    /// Survival times and event indicators.
    pub fn survival(&self) -> Result<(&[f64], &[f64])> {
        let (_, t) = self
            .column_with_role(Role::SurvTime)
            .ok_or_else(|| Error::Schema("no surv_time column".into()))?;
        let (_, d) = self
            .column_with_role(Role::Event)
            .ok_or_else(|| Error::Schema("no event column".into()))?;
        Ok((t, d))
    }

    /// Keeps the named columns, in the given order.
    pub fn select(&self, names: &[&str]) -> Result<Dataset> {
        let mut schema = Vec::with_capacity(names.len());
        let mut columns = Vec::with_capacity(names.len());
        for name in names {
            let i = self
                .index_of(name)
                .ok_or_else(|| Error::MissingColumn(name.to_string()))?;
            schema.push(self.schema[i].clone());
            columns.push(self.columns[i].clone());
        }
        Ok(Dataset {
            schema,
            n_rows: self.n_rows,
            columns,
        })
    }

    pub fn take_rows(&self, rows: &[usize]) -> Dataset {
        Dataset {
            schema: self.schema.clone(),
            n_rows: rows.len(),
            columns: self
                .columns
                .iter()
                .map(|c| rows.iter().map(|&r| c[r]).collect())
                .collect(),
        }
    }

    /// Appends a column; its length must equal `n_rows` (any length is accepted
    /// when the dataset has no columns yet).
    pub fn push_column(&mut self, spec: ColumnSpec, values: Vec<f64>) -> Result<()> {
        if self.index_of(&spec.name).is_some() {
            return Err(Error::Schema(format!("duplicate column `{}`", spec.name)));
        }
        if !self.columns.is_empty() && values.len() != self.n_rows {
            return Err(Error::LengthMismatch {
                expected: self.n_rows,
                got: values.len(),
            });
        }
        spec.check()?;
        for (row, &v) in values.iter().enumerate() {
            check_value(&spec, v).map_err(|reason| Error::InvalidValue {
                row,
                column: spec.name.clone(),
                reason,
            })?;
        }
        if self.columns.is_empty() {
            self.n_rows = values.len();
        }
        self.schema.push(spec);
        self.columns.push(values);
        Ok(())
    }

    pub fn empty() -> Dataset {
        Dataset {
            schema: Vec::new(),
            n_rows: 0,
            columns: Vec::new(),
        }
    }

    /// Text form of a cell, as emitted to CSV.
    pub fn format_cell(&self, col: usize, row: usize) -> String {
        format_value(&self.schema[col], self.columns[col][row])
    }

    /// Encodes the named predictors into a design matrix (no intercept column).
    pub fn encode_design(&self, predictors: &[String]) -> Result<DesignMatrix> {
        let mut legend = Vec::new();
        let mut blocks: Vec<Vec<f64>> = Vec::new();
        for name in predictors {
            let spec = self.spec(name)?;
            if spec.role == Role::Ignore {
                return Err(Error::Schema(format!(
                    "column `{name}` has role ignore and cannot be a predictor"
                )));
            }
            let values = self.column(name)?;
            match &spec.kind {
                Kind::Continuous | Kind::Binary | Kind::Ordered { .. } => {
                    blocks.push(values.to_vec());
                    legend.push(DesignColumn::new(name.clone(), name));
                }
                Kind::Categorical { levels } => {
                    for (li, level) in levels.iter().enumerate().skip(1) {
                        blocks.push(
                            values
                                .iter()
                                .map(|&v| if v as usize == li { 1.0 } else { 0.0 })
                                .collect(),
                        );
                        legend.push(DesignColumn::new(format!("{name}[{level}]"), name));
                    }
                }
            }
        }
        for (col, entry) in blocks.iter().zip(legend.iter_mut()) {
            entry.zero_variance = col.windows(2).all(|w| w[0] == w[1]);
        }
        let matrix = DMatrix::from_fn(self.n_rows, blocks.len(), |r, c| blocks[c][r]);
        Ok(DesignMatrix { matrix, legend })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DesignColumn {
    pub name: String,
    pub source: String,
    pub zero_variance: bool,
}

impl DesignColumn {
    fn new(name: String, source: &str) -> Self {
        Self {
            name,
            source: source.to_string(),
            zero_variance: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DesignMatrix {
    pub matrix: DMatrix<f64>,
    pub legend: Vec<DesignColumn>,
}

impl DesignMatrix {
    pub fn n_rows(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn n_cols(&self) -> usize {
        self.matrix.ncols()
    }

    pub fn names(&self) -> Vec<String> {
        self.legend.iter().map(|c| c.name.clone()).collect()
    }

    pub fn row(&self, r: usize) -> Vec<f64> {
        self.matrix.row(r).iter().copied().collect()
    }
}

fn check_value(spec: &ColumnSpec, v: f64) -> std::result::Result<(), String> {
    if !v.is_finite() {
        return Err("value is not finite".into());
    }
    match spec.role {
        Role::SurvTime if v <= 0.0 => return Err(format!("survival time {v} is not positive")),
        Role::EntryTime if v < 0.0 => return Err(format!("entry time {v} is negative")),
        _ => {}
    }
    match &spec.kind {
        Kind::Continuous => Ok(()),
        Kind::Binary if v == 0.0 || v == 1.0 => Ok(()),
        Kind::Binary => Err(format!("value {v} outside {{0,1}}")),
        Kind::Categorical { levels } | Kind::Ordered { levels } => {
            if v.fract() == 0.0 && v >= 0.0 && (v as usize) < levels.len() {
                Ok(())
            } else {
                Err(format!("level index {v} out of range"))
            }
        }
    }
}

fn format_value(spec: &ColumnSpec, v: f64) -> String {
    match &spec.kind {
        Kind::Continuous => format!("{v}"),
        Kind::Binary => (if v == 1.0 { "1" } else { "0" }).to_string(),
        Kind::Categorical { levels } | Kind::Ordered { levels } => levels[v as usize].clone(),
    }
}

fn parse_cell(spec: &ColumnSpec, raw: &str, row: usize) -> Result<f64> {
    let s = raw.trim();
    if s.is_empty() {
        return Err(Error::InvalidValue {
            row,
            column: spec.name.clone(),
            reason: "missing value".into(),
        });
    }
    let v = match &spec.kind {
        Kind::Categorical { levels } | Kind::Ordered { levels } => levels
            .iter()
            .position(|l| l == s)
            .ok_or_else(|| Error::UnknownLabel {
                row,
                column: spec.name.clone(),
                label: s.to_string(),
            })? as f64,
        Kind::Continuous | Kind::Binary => s.parse::<f64>().map_err(|_| Error::Parse {
            row,
            column: spec.name.clone(),
            value: s.to_string(),
        })?,
    };
    check_value(spec, v).map_err(|reason| Error::InvalidValue {
        row,
        column: spec.name.clone(),
        reason,
    })?;
    Ok(v)
}

/// Reads and validates a cohort CSV. Columns not named in the schema are dropped.
pub fn load_dataset(path: impl AsRef<Path>, schema: &[ColumnSpec]) -> Result<Dataset> {
    validate_schema(schema)?;
    let reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_path(path.as_ref())?;
    read_dataset(reader, schema)
}

/// Like [`load_dataset`] but without the role-cardinality check, for covariate-only tables.
pub fn load_partial(path: impl AsRef<Path>, schema: &[ColumnSpec]) -> Result<Dataset> {
    for c in schema {
        c.check()?;
    }
    let reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_path(path.as_ref())?;
    read_dataset(reader, schema)
}

fn read_dataset<R: std::io::Read>(mut reader: csv::Reader<R>, schema: &[ColumnSpec]) -> Result<Dataset> {
    let headers = reader.headers()?.clone();
    let positions: HashMap<&str, usize> = headers.iter().enumerate().map(|(i, h)| (h.trim(), i)).collect();
    let mut index = Vec::with_capacity(schema.len());
    for spec in schema {
        let i = positions
            .get(spec.name.as_str())
            .copied()
            .ok_or_else(|| Error::MissingColumn(spec.name.clone()))?;
        index.push(i);
    }
    let mut columns: Vec<Vec<f64>> = vec![Vec::new(); schema.len()];
    for (row, record) in reader.records().enumerate() {
        let record = record?;
        for ((spec, &i), col) in schema.iter().zip(&index).zip(columns.iter_mut()) {
            let raw = record.get(i).unwrap_or("");
            col.push(parse_cell(spec, raw, row)?);
        }
    }
    let n_rows = columns.first().map_or(0, Vec::len);
    Ok(Dataset {
        schema: schema.to_vec(),
        n_rows,
        columns,
    })
}

/// Writes the dataset as CSV; continuous values use the shortest text that
/// parses back to the same `f64`.
pub fn write_dataset(data: &Dataset, path: impl AsRef<Path>) -> Result<()> {
    let mut writer = csv::Writer::from_path(path.as_ref())?;
    write_records(data, &mut writer)?;
    writer.flush()?;
    Ok(())
}

pub fn write_dataset_to<W: std::io::Write>(data: &Dataset, out: W) -> Result<()> {
    let mut writer = csv::Writer::from_writer(out);
    write_records(data, &mut writer)?;
    writer.flush()?;
    Ok(())
}

fn write_records<W: std::io::Write>(data: &Dataset, writer: &mut csv::Writer<W>) -> Result<()> {
    writer.write_record(data.schema.iter().map(|c| c.name.as_str()))?;
    for r in 0..data.n_rows {
        writer.write_record((0..data.schema.len()).map(|c| data.format_cell(c, r)))?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    fn write_tmp(contents: &str) -> tempfile::NamedTempFile {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        f.write_all(contents.as_bytes()).unwrap();
        f
    }

    fn surv_schema() -> Vec<ColumnSpec> {
        vec![ColumnSpec::surv_time("time"), ColumnSpec::event("status")]
    }

    #[test]
    fn loads_three_rows() {
        let f = write_tmp("time,status,extra\n1.5,1,x\n2,0,y\n3.25,1,z\n");
        let d = load_dataset(f.path(), &surv_schema()).unwrap();
        assert_eq!(d.n_rows(), 3);
        assert_eq!(d.schema().len(), 2);
        assert_eq!(d.column("time").unwrap(), &[1.5, 2.0, 3.25]);
    }

    #[test]
    fn unknown_label_is_rejected() {
        let mut schema = surv_schema();
        schema.push(ColumnSpec::categorical("codon", ["MM", "MV", "VV"]));
        let f = write_tmp("time,status,codon\n1,1,MM\n2,0,MX\n");
        match load_dataset(f.path(), &schema) {
            Err(Error::UnknownLabel { label, .. }) => assert_eq!(label, "MX"),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn zero_time_is_rejected() {
        let f = write_tmp("time,status\n1,1\n0,1\n");
        assert!(matches!(
            load_dataset(f.path(), &surv_schema()),
            Err(Error::InvalidValue { row: 1, .. })
        ));
    }

    #[test]
    fn bad_event_missing_column_and_missing_value() {
        let f = write_tmp("time,status\n1,2\n");
        assert!(matches!(load_dataset(f.path(), &surv_schema()), Err(Error::InvalidValue { .. })));
        let f = write_tmp("time\n1\n");
        assert!(matches!(load_dataset(f.path(), &surv_schema()), Err(Error::MissingColumn(_))));
        let f = write_tmp("time,status\n,1\n");
        assert!(matches!(load_dataset(f.path(), &surv_schema()), Err(Error::InvalidValue { .. })));
        let f = write_tmp("time,status\nabc,1\n");
        assert!(matches!(load_dataset(f.path(), &surv_schema()), Err(Error::Parse { .. })));
    }

    #[test]
    fn schema_role_cardinality() {
        let schema = vec![ColumnSpec::surv_time("t")];
        assert!(validate_schema(&schema).is_err());
        let schema = vec![
            ColumnSpec::surv_time("t"),
            ColumnSpec::event("d"),
            ColumnSpec::dropout("a"),
            ColumnSpec::dropout("b"),
        ];
        assert!(validate_schema(&schema).is_err());
        let schema = vec![
            ColumnSpec::surv_time("t"),
            ColumnSpec::event("d"),
            ColumnSpec::categorical("c", ["a", "a"]),
        ];
        assert!(validate_schema(&schema).is_err());
        let empty: Vec<String> = vec![];
        let schema = vec![
            ColumnSpec::surv_time("t"),
            ColumnSpec::event("d"),
            ColumnSpec::categorical("c", empty),
        ];
        assert!(validate_schema(&schema).is_err());
    }

    #[test]
    fn categorical_reference_coding() {
        let d = Dataset::new(vec![ColumnSpec::categorical("c", ["A", "B", "C"])], vec![vec![0.0, 1.0, 2.0]]).unwrap();
        let x = d.encode_design(&["c".to_string()]).unwrap();
        assert_eq!(x.n_cols(), 2);
        assert_eq!(x.names(), vec!["c[B]", "c[C]"]);
        assert_eq!(x.row(0), vec![0.0, 0.0]);
        assert_eq!(x.row(1), vec![1.0, 0.0]);
        assert_eq!(x.row(2), vec![0.0, 1.0]);
    }

    #[test]
    fn binary_identity_and_empty_predictors() {
        let d = Dataset::new(vec![ColumnSpec::binary("b")], vec![vec![1.0, 0.0, 1.0]]).unwrap();
        let x = d.encode_design(&["b".to_string()]).unwrap();
        assert_eq!(x.matrix.column(0).iter().copied().collect::<Vec<_>>(), vec![1.0, 0.0, 1.0]);
        let x = d.encode_design(&[]).unwrap();
        assert_eq!(x.n_cols(), 0);
        assert_eq!(x.n_rows(), 3);
        assert!(x.legend.is_empty());
        assert!(matches!(d.encode_design(&["nope".to_string()]), Err(Error::MissingColumn(_))));
    }

    #[test]
    fn ordered_scores_and_zero_variance_flag() {
        let d = Dataset::new(
            vec![ColumnSpec::ordered("o", ["lo", "mid", "hi"]), ColumnSpec::continuous("k")],
            vec![vec![2.0, 0.0, 1.0], vec![4.0, 4.0, 4.0]],
        )
        .unwrap();
        let x = d.encode_design(&["o".to_string(), "k".to_string()]).unwrap();
        assert_eq!(x.row(0), vec![2.0, 4.0]);
        assert!(!x.legend[0].zero_variance);
        assert!(x.legend[1].zero_variance);
    }

    #[test]
    fn write_then_read_round_trip() {
        let schema = vec![
            ColumnSpec::surv_time("time"),
            ColumnSpec::event("status"),
            ColumnSpec::categorical("codon", ["MM", "MV", "VV"]),
            ColumnSpec::continuous("x"),
        ];
        let d = Dataset::new(
            schema.clone(),
            vec![
                vec![0.1, 2.718281828459045],
                vec![1.0, 0.0],
                vec![2.0, 1.0],
                vec![0.1, -1.0 / 3.0],
            ],
        )
        .unwrap();
        let f = tempfile::NamedTempFile::new().unwrap();
        write_dataset(&d, f.path()).unwrap();
        let text = std::fs::read_to_string(f.path()).unwrap();
        assert!(text.contains("VV"));
        assert!(text.contains("0.1,"));
        let back = load_dataset(f.path(), &schema).unwrap();
        assert_eq!(back, d);
    }

    #[test]
    fn unwritable_path_errors() {
        let d = Dataset::new(vec![ColumnSpec::continuous("x")], vec![vec![1.0]]).unwrap();
        assert!(write_dataset(&d, "/nonexistent-dir/sub/out.csv").is_err());
    }
}
