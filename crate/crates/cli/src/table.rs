//! Output tables and their CSV/JSON encodings.
//!
//! Every table starts with the key columns `experiment, model, ts_ns, L, M,
//! L_E, snr_db`; cells that do not apply are empty. Values in dB carry four
//! decimals and raw powers or probabilities ten significant digits, so
//! re-runs diff cleanly.

use serde_json::{Map, Value};

use crate::CliError;

/// Leading key columns of every table.
pub const KEY_COLUMNS: [&str; 7] = ["experiment", "model", "ts_ns", "L", "M", "L_E", "snr_db"];

/// A decibel value, four decimals.
pub fn fmt_db(x: f64) -> String {
    fmt_special(x).unwrap_or_else(|| format!("{x:.4}"))
}

/// A power or probability, scientific notation with ten significant digits.
pub fn fmt_sci(x: f64) -> String {
    fmt_special(x).unwrap_or_else(|| format!("{x:.9e}"))
}

fn fmt_special(x: f64) -> Option<String> {
    if x.is_nan() {
        Some("nan".into())
    } else if x.is_infinite() {
        Some(if x > 0.0 { "inf" } else { "-inf" }.into())
    } else {
        None
    }
}

/// Values of the key columns for one row.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Key {
    pub experiment: String,
    pub model: String,
    pub ts_ns: Option<f64>,
    pub len: Option<usize>,
    pub antennas: Option<usize>,
    pub eq_len: Option<usize>,
    pub snr_db: Option<f64>,
}

impl Key {
    pub fn new(experiment: &str, model: &str) -> Self {
        Key { experiment: experiment.into(), model: model.into(), ..Key::default() }
    }

    pub fn ts(mut self, ts_seconds: f64) -> Self {
        self.ts_ns = Some(ts_seconds * 1e9);
        self
    }

    pub fn len(mut self, len: usize) -> Self {
        self.len = Some(len);
        self
    }

    pub fn antennas(mut self, m: usize) -> Self {
        self.antennas = Some(m);
        self
    }

    pub fn eq_len(mut self, le: usize) -> Self {
        self.eq_len = Some(le);
        self
    }

    pub fn snr(mut self, snr_db: f64) -> Self {
        self.snr_db = Some(snr_db);
        self
    }

    fn cells(&self) -> Vec<String> {
        let opt = |v: Option<String>| v.unwrap_or_default();
        vec![
            self.experiment.clone(),
            self.model.clone(),
            opt(self.ts_ns.map(fmt_db)),
            opt(self.len.map(|v| v.to_string())),
            opt(self.antennas.map(|v| v.to_string())),
            opt(self.eq_len.map(|v| v.to_string())),
            opt(self.snr_db.map(fmt_db)),
        ]
    }
}

/// A named table of preformatted cells.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub name: String,
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    /// Creates a table whose header is the key columns followed by `columns`.
    pub fn new(name: &str, columns: &[&str]) -> Self {
        let header = KEY_COLUMNS.iter().chain(columns).map(|s| s.to_string()).collect();
        Table { name: name.into(), header, rows: Vec::new() }
    }

    /// Appends a row; `values` must match the non-key columns.
    pub fn push(&mut self, key: &Key, values: Vec<String>) {
        let mut row = key.cells();
        row.extend(values);
        assert_eq!(row.len(), self.header.len(), "row width mismatch in table {}", self.name);
        self.rows.push(row);
    }

    pub fn column(&self, name: &str) -> Option<usize> {
        self.header.iter().position(|h| h == name)
    }

    pub fn to_csv(&self) -> Result<String, CliError> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(&self.header).map_err(|e| CliError::Io(e.to_string()))?;
        for row in &self.rows {
            w.write_record(row).map_err(|e| CliError::Io(e.to_string()))?;
        }
        let bytes = w.into_inner().map_err(|e| CliError::Io(e.to_string()))?;
        String::from_utf8(bytes).map_err(|e| CliError::Io(e.to_string()))
    }

    pub fn from_csv(name: &str, text: &str) -> Result<Self, CliError> {
        let mut r = csv::ReaderBuilder::new().has_headers(true).from_reader(text.as_bytes());
        let header = r.headers().map_err(|e| CliError::Io(e.to_string()))?.iter().map(String::from).collect();
        let rows = r
            .records()
            .map(|rec| rec.map(|rec| rec.iter().map(String::from).collect()))
            .collect::<Result<Vec<Vec<String>>, _>>()
            .map_err(|e| CliError::Io(e.to_string()))?;
        Ok(Table { name: name.into(), header, rows })
    }

    /// Rows as JSON objects. Numeric cells become numbers, `inf`/`nan` and
    /// empty cells stay strings or null.
    pub fn to_json(&self) -> Value {
        let rows = self
            .rows
            .iter()
            .map(|row| {
                let obj: Map<String, Value> =
                    self.header.iter().zip(row).map(|(h, c)| (h.clone(), json_cell(c))).collect();
                Value::Object(obj)
            })
            .collect();
        Value::Array(rows)
    }
}

fn json_cell(cell: &str) -> Value {
    if cell.is_empty() {
        return Value::Null;
    }
    if let Ok(i) = cell.parse::<i64>() {
        return Value::from(i);
    }
    match cell.parse::<f64>() {
        Ok(x) if x.is_finite() => Value::from(x),
        _ => Value::from(cell),
    }
}
