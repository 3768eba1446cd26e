//! CSV tables with a `# key=value` preamble and trailing summary lines.

use std::fmt::{self, Write as _};

use collideq_core::Error;

#[derive(Debug, Clone, PartialEq)]
pub enum Cell {
    Num(f64),
    Int(u64),
    Text(String),
    Empty,
}

impl Cell {
    pub fn as_f64(&self) -> Option<f64> {
        match self {
            Cell::Num(x) => Some(*x),
            Cell::Int(n) => Some(*n as f64),
            _ => None,
        }
    }
}

impl From<f64> for Cell {
    fn from(x: f64) -> Self {
        Cell::Num(x)
    }
}

impl From<usize> for Cell {
    fn from(n: usize) -> Self {
        Cell::Int(n as u64)
    }
}

impl From<Option<f64>> for Cell {
    fn from(x: Option<f64>) -> Self {
        x.map_or(Cell::Empty, Cell::Num)
    }
}

impl From<String> for Cell {
    fn from(s: String) -> Self {
        Cell::Text(s)
    }
}

impl From<&str> for Cell {
    fn from(s: &str) -> Self {
        Cell::Text(s.to_string())
    }
}

/// Shortest round-trip form, switching to exponent notation for very small
/// or very large magnitudes.
pub fn format_f64(x: f64) -> String {
    let a = x.abs();
    if a != 0.0 && a.is_finite() && !(1e-4..1e15).contains(&a) {
        format!("{x:e}")
    } else {
        format!("{x}")
    }
}

impl fmt::Display for Cell {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Cell::Num(x) => f.write_str(&format_f64(*x)),
            Cell::Int(n) => write!(f, "{n}"),
            Cell::Text(s) => f.write_str(s),
            Cell::Empty => Ok(()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Status {
    Ok,
    Unconverged,
    NonUniqueSteadyState,
    SkippedDeltaOutOfRange,
    InvalidParameter,
    IntegrationUnstable,
    HeatImbalance,
    Failed,
}

impl Status {
    pub fn as_str(self) -> &'static str {
        match self {
            Status::Ok => "ok",
            Status::Unconverged => "unconverged",
            Status::NonUniqueSteadyState => "non_unique_steady_state",
            Status::SkippedDeltaOutOfRange => "skipped_delta_out_of_range",
            Status::InvalidParameter => "invalid_parameter",
            Status::IntegrationUnstable => "integration_unstable",
            Status::HeatImbalance => "heat_imbalance",
            Status::Failed => "failed",
        }
    }
}

impl From<&Error> for Status {
    fn from(e: &Error) -> Self {
        match e {
            Error::NonUniqueSteadyState { .. } => Status::NonUniqueSteadyState,
            Error::InvalidParameter(_) => Status::InvalidParameter,
            Error::IntegrationUnstable { .. } => Status::IntegrationUnstable,
            _ => Status::Failed,
        }
    }
}

#[derive(Debug, Clone)]
pub struct Row {
    pub cells: Vec<Cell>,
    pub status: Status,
}

#[derive(Debug, Clone)]
pub struct Table {
    pub preamble: Vec<(String, String)>,
    pub columns: Vec<&'static str>,
    pub rows: Vec<Row>,
    /// Each entry renders as one `# summary k=v k=v ...` line.
    pub summary: Vec<Vec<(String, String)>>,
}

impl Table {
    pub fn new(preamble: Vec<(String, String)>, columns: &[&'static str]) -> Self {
        Self { preamble, columns: columns.to_vec(), rows: Vec::new(), summary: Vec::new() }
    }

    pub fn push(&mut self, cells: Vec<Cell>, status: Status) {
        assert_eq!(cells.len(), self.columns.len(), "row width");
        self.rows.push(Row { cells, status });
    }

    pub fn flagged(&self) -> usize {
        self.rows.iter().filter(|r| r.status != Status::Ok).count()
    }

    pub fn column_index(&self, name: &str) -> Option<usize> {
        self.columns.iter().position(|c| *c == name)
    }

    /// Numeric values of a column; `None` for empty or textual cells.
    pub fn numbers(&self, name: &str) -> Vec<Option<f64>> {
        let i = self.column_index(name).unwrap_or_else(|| panic!("no column {name}"));
        self.rows.iter().map(|r| r.cells[i].as_f64()).collect()
    }

    pub fn texts(&self, name: &str) -> Vec<String> {
        let i = self.column_index(name).unwrap_or_else(|| panic!("no column {name}"));
        self.rows.iter().map(|r| r.cells[i].to_string()).collect()
    }

    pub fn summary_value(&self, key: &str, filter: &[(&str, &str)]) -> Option<&str> {
        self.summary
            .iter()
            .filter(|line| filter.iter().all(|(k, v)| line.iter().any(|(a, b)| a == k && b == v)))
            .find_map(|line| line.iter().find(|(k, _)| k == key).map(|(_, v)| v.as_str()))
    }

    pub fn render(&self) -> String {
        let mut out = String::new();
        for (k, v) in &self.preamble {
            writeln!(out, "# {k}={v}").unwrap();
        }
        writeln!(out, "{},status", self.columns.join(",")).unwrap();
        for row in &self.rows {
            for cell in &row.cells {
                write!(out, "{cell},").unwrap();
            }
            writeln!(out, "{}", row.status.as_str()).unwrap();
        }
        for line in &self.summary {
            let body: Vec<String> = line.iter().map(|(k, v)| format!("{k}={v}")).collect();
            writeln!(out, "# summary {}", body.join(" ")).unwrap();
        }
        out
    }
}
