use std::collections::{BTreeMap, HashMap};
use std::fmt::Write;

use serde::{Deserialize, Serialize};

use crate::data::DatasetManifest;
use crate::error::{Error, Result};
use crate::report::predictions::PredictionRow;

/// Fraction of positions where the prediction equals the label.
pub fn accuracy(predictions: &[u8], labels: &[u8]) -> Result<f64> {
    if predictions.len() != labels.len() {
        return Err(Error::dim(format!("{} predictions for {} labels", predictions.len(), labels.len())));
    }
    if predictions.is_empty() {
        return Err(Error::Domain("accuracy of an empty set".into()));
    }
    let hits = predictions.iter().zip(labels).filter(|(p, l)| p == l).count();
    Ok(hits as f64 / predictions.len() as f64)
}

/// One method's predictions on one split.
#[derive(Clone, Debug, PartialEq)]
pub struct MethodPredictions {
    pub method: String,
    pub rows: Vec<PredictionRow>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Cell {
    pub correct: usize,
    pub count: usize,
    pub accuracy: f64,
}

impl Cell {
    fn from_rows<'a>(rows: impl Iterator<Item = &'a PredictionRow>) -> Result<Self> {
        let (p, l): (Vec<u8>, Vec<u8>) = rows.map(|r| (r.predicted, r.label)).unzip();
        let accuracy = accuracy(&p, &l)?;
        let correct = p.iter().zip(&l).filter(|(a, b)| a == b).count();
        Ok(Cell { correct, count: p.len(), accuracy })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TableRow {
    pub name: String,
    pub cells: Vec<Cell>,
}

/// Accuracy per (row, method). Rows are `validation` (when given),
/// `test_overall`, then one per group in sorted order.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GroupAccuracyTable {
    pub methods: Vec<String>,
    pub rows: Vec<TableRow>,
}

pub const VALIDATION_ROW: &str = "validation";
pub const OVERALL_ROW: &str = "test_overall";

fn index_by_id<'a>(m: &'a MethodPredictions, manifest: &DatasetManifest) -> Result<HashMap<&'a str, &'a PredictionRow>> {
    let by_id: HashMap<&str, &PredictionRow> = m.rows.iter().map(|r| (r.id.as_str(), r)).collect();
    if let Some(s) = manifest.samples.iter().find(|s| !by_id.contains_key(s.id.as_str())) {
        return Err(Error::Manifest(format!("method {} has no prediction for sample {}", m.method, s.id)));
    }
    Ok(by_id)
}

/// Builds the table from per-method test predictions over `manifest`.
/// Every manifest sample must carry a group tag and have a prediction from
/// every method. Validation predictions, if given, must list the methods in
/// the same order.
pub fn group_accuracy_table(
    test: &[MethodPredictions],
    manifest: &DatasetManifest,
    validation: Option<&[MethodPredictions]>,
) -> Result<GroupAccuracyTable> {
    if test.is_empty() {
        return Err(Error::config("no methods to tabulate"));
    }
    let mut groups: BTreeMap<&str, Vec<&str>> = BTreeMap::new();
    for s in &manifest.samples {
        let g = s.group.as_deref().ok_or_else(|| Error::Manifest(format!("sample {} has no group tag", s.id)))?;
        groups.entry(g).or_default().push(&s.id);
    }
    let mut rows = Vec::new();
    if let Some(val) = validation {
        if val.iter().map(|m| &m.method).ne(test.iter().map(|m| &m.method)) {
            return Err(Error::config("validation and test predictions list different methods"));
        }
        let cells = val.iter().map(|m| Cell::from_rows(m.rows.iter())).collect::<Result<_>>()?;
        rows.push(TableRow { name: VALIDATION_ROW.into(), cells });
    }
    let indexed: Vec<_> = test.iter().map(|m| index_by_id(m, manifest)).collect::<Result<_>>()?;
    let slice = |ids: &[&str]| -> Result<Vec<Cell>> {
        indexed.iter().map(|by_id| Cell::from_rows(ids.iter().map(|id| by_id[id]))).collect()
    };
    let all: Vec<&str> = manifest.samples.iter().map(|s| s.id.as_str()).collect();
    rows.push(TableRow { name: OVERALL_ROW.into(), cells: slice(&all)? });
    for (g, ids) in &groups {
        rows.push(TableRow { name: (*g).to_string(), cells: slice(ids)? });
    }
    Ok(GroupAccuracyTable { methods: test.iter().map(|m| m.method.clone()).collect(), rows })
}

impl GroupAccuracyTable {
    pub fn row(&self, name: &str) -> Option<&TableRow> {
        self.rows.iter().find(|r| r.name == name)
    }

    pub fn cell(&self, row: &str, method: &str) -> Option<&Cell> {
        let col = self.methods.iter().position(|m| m == method)?;
        self.row(row).map(|r| &r.cells[col])
    }

    /// Methods as columns, accuracies to four decimals. The count column
    /// is the first method's sample count for the row.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("row,count");
        for m in &self.methods {
            out.push(',');
            out.push_str(&csv_field(m));
        }
        out.push('\n');
        for r in &self.rows {
            write!(out, "{},{}", csv_field(&r.name), r.cells.first().map_or(0, |c| c.count)).unwrap();
            for c in &r.cells {
                write!(out, ",{:.4}", c.accuracy).unwrap();
            }
            out.push('\n');
        }
        out
    }
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}
