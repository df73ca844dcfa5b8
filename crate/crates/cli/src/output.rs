//! Result rows, CSV serialization and the pass/fail summary.

use std::fmt::Write as _;
use std::io;

use thiserror::Error;

use crate::config::Experiment;

/// Name under which a group of checks is reported.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum CheckKey {
    ExtinctionThreshold,
    Congruence,
    CriticalRadius,
    OrderCrossing,
    PopulationBound,
    Abundance,
    ResourceBeating,
    PeriodicConstant,
    TransmissionThreshold,
    StrategicPlan,
    Scaling,
}

impl CheckKey {
    pub fn name(self) -> &'static str {
        match self {
            CheckKey::ExtinctionThreshold => "extinction-threshold",
            CheckKey::Congruence => "congruence",
            CheckKey::CriticalRadius => "critical-radius",
            CheckKey::OrderCrossing => "order-crossing",
            CheckKey::PopulationBound => "population-bound",
            CheckKey::Abundance => "abundance",
            CheckKey::ResourceBeating => "resource-beating",
            CheckKey::PeriodicConstant => "periodic-constant",
            CheckKey::TransmissionThreshold => "transmission-threshold",
            CheckKey::StrategicPlan => "strategic-plan",
            CheckKey::Scaling => "scaling",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Cell {
    Num(f64),
    Int(u64),
    Text(String),
    Bool(bool),
    Empty,
}

impl From<f64> for Cell {
    fn from(v: f64) -> Self {
        Cell::Num(v)
    }
}

impl From<usize> for Cell {
    fn from(v: usize) -> Self {
        Cell::Int(v as u64)
    }
}

impl From<bool> for Cell {
    fn from(v: bool) -> Self {
        Cell::Bool(v)
    }
}

impl From<&str> for Cell {
    fn from(v: &str) -> Self {
        Cell::Text(v.to_string())
    }
}

impl<T: Into<Cell>> From<Option<T>> for Cell {
    fn from(v: Option<T>) -> Self {
        v.map_or(Cell::Empty, Into::into)
    }
}

/// `printf("%.12e")` formatting: two-digit signed exponent.
pub fn sci(v: f64) -> String {
    if v.is_nan() {
        return "nan".into();
    }
    if v.is_infinite() {
        return if v > 0.0 { "inf".into() } else { "-inf".into() };
    }
    let s = format!("{v:.12e}");
    let (mantissa, exp) = s.split_once('e').expect("exponent present");
    let exp: i32 = exp.parse().expect("integer exponent");
    let sign = if exp < 0 { '-' } else { '+' };
    format!("{mantissa}e{sign}{:02}", exp.abs())
}

impl Cell {
    pub fn render(&self) -> String {
        match self {
            Cell::Num(v) => sci(*v),
            Cell::Int(v) => v.to_string(),
            Cell::Text(t) => t.clone(),
            Cell::Bool(b) => b.to_string(),
            Cell::Empty => String::new(),
        }
    }
}

/// One parameter tuple of an experiment with its outputs and checks.
#[derive(Debug, Clone, PartialEq)]
pub struct ResultRow {
    pub experiment: Experiment,
    /// Values in the order of the experiment's columns, without `pass`.
    pub cells: Vec<Cell>,
    pub checks: Vec<(CheckKey, bool)>,
}

impl ResultRow {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|&(_, ok)| ok)
    }
}

/// Writes `rows` as CSV under `columns` plus a trailing `pass` column.
pub fn write_csv<W: io::Write>(out: W, columns: &[&str], rows: &[ResultRow]) -> io::Result<()> {
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(out);
    let to_io = |e: csv::Error| io::Error::other(e);
    w.write_record(columns.iter().copied().chain(["pass"])).map_err(to_io)?;
    for row in rows {
        assert_eq!(row.cells.len(), columns.len(), "row width of {}", row.experiment);
        let fields = row.cells.iter().map(Cell::render).chain([row.passed().to_string()]);
        w.write_record(fields).map_err(to_io)?;
    }
    w.flush()
}

#[derive(Debug, Error, PartialEq, Eq)]
#[error("no result rows to summarize")]
pub struct EmptyRows;

/// One line per check key: `PASS`/`FAIL`, the key and the passing row count.
pub fn report_summary(rows: &[ResultRow]) -> Result<String, EmptyRows> {
    if rows.is_empty() {
        return Err(EmptyRows);
    }
    let mut tally: Vec<(CheckKey, usize, usize)> = Vec::new();
    for &(key, ok) in rows.iter().flat_map(|r| &r.checks) {
        match tally.iter_mut().find(|t| t.0 == key) {
            Some(t) => {
                t.1 += ok as usize;
                t.2 += 1;
            }
            None => tally.push((key, ok as usize, 1)),
        }
    }
    tally.sort_by_key(|t| t.0);
    let mut text = String::new();
    for (key, passed, total) in tally {
        let verdict = if passed == total { "PASS" } else { "FAIL" };
        let _ = writeln!(text, "{verdict}  {:<24}{passed}/{total} rows", key.name());
    }
    Ok(text)
}
