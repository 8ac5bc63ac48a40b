//! Column-oriented result tables with a metadata block, written as CSV or JSON.

use serde_json::{Map, Number, Value};

#[derive(Debug, Clone, PartialEq)]
pub enum Column {
    Int(Vec<u64>),
    /// `None` is an absent value: empty CSV cell, JSON null.
    Real(Vec<Option<f64>>),
    Text(Vec<String>),
}

impl Column {
    pub fn real(values: impl IntoIterator<Item = f64>) -> Self {
        Column::Real(values.into_iter().map(Some).collect())
    }

    fn len(&self) -> usize {
        match self {
            Column::Int(v) => v.len(),
            Column::Real(v) => v.len(),
            Column::Text(v) => v.len(),
        }
    }

    fn csv_cell(&self, row: usize) -> String {
        match self {
            Column::Int(v) => v[row].to_string(),
            Column::Real(v) => v[row].map(format_real).unwrap_or_default(),
            Column::Text(v) => v[row].clone(),
        }
    }

    fn to_json(&self) -> Value {
        match self {
            Column::Int(v) => v.iter().map(|&x| Value::from(x)).collect(),
            Column::Real(v) => v.iter().map(|x| x.and_then(Number::from_f64).map_or(Value::Null, Value::Number)).collect(),
            Column::Text(v) => v.iter().map(|s| Value::from(s.as_str())).collect(),
        }
    }
}

/// 17 significant digits, enough to round-trip any `f64`.
pub fn format_real(x: f64) -> String {
    if x.is_finite() {
        format!("{x:.16e}")
    } else {
        x.to_string()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Format {
    Csv,
    Json,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ResultTable {
    meta: Map<String, Value>,
    names: Vec<String>,
    columns: Vec<Column>,
}

impl ResultTable {
    pub fn new(meta: Map<String, Value>) -> Self {
        Self { meta, names: Vec::new(), columns: Vec::new() }
    }

    pub fn push(&mut self, name: &str, column: Column) {
        if let Some(first) = self.columns.first() {
            assert_eq!(first.len(), column.len(), "column {name} breaks the rectangular shape");
        }
        self.names.push(name.to_owned());
        self.columns.push(column);
    }

    pub fn rows(&self) -> usize {
        self.columns.first().map_or(0, Column::len)
    }

    /// `# key: <json>` metadata lines, a header row, then data rows.
    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        for (key, value) in &self.meta {
            out.push_str(&format!("# {key}: {value}\n"));
        }
        out.push_str(&self.names.join(","));
        out.push('\n');
        for row in 0..self.rows() {
            let cells: Vec<String> = self.columns.iter().map(|c| c.csv_cell(row)).collect();
            out.push_str(&cells.join(","));
            out.push('\n');
        }
        out
    }

    /// `{"meta": {...}, "columns": {"name": [...]}}`.
    pub fn to_json(&self) -> String {
        let columns: Map<String, Value> =
            self.names.iter().cloned().zip(self.columns.iter().map(Column::to_json)).collect();
        let mut root = Map::new();
        root.insert("meta".into(), Value::Object(self.meta.clone()));
        root.insert("columns".into(), Value::Object(columns));
        let mut text = serde_json::to_string_pretty(&Value::Object(root)).expect("tables serialize");
        text.push('\n');
        text
    }

    pub fn render(&self, format: Format) -> String {
        match format {
            Format::Csv => self.to_csv(),
            Format::Json => self.to_json(),
        }
    }
}
