use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One line of `predictions.csv`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PredictionRow {
    pub id: String,
    pub label: u8,
    pub group: Option<String>,
    pub score: f64,
    pub predicted: u8,
}

pub fn predictions_csv(rows: &[PredictionRow]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in rows {
        w.serialize(r).map_err(|e| Error::Domain(format!("writing predictions: {e}")))?;
    }
    if rows.is_empty() {
        w.write_record(["id", "label", "group", "score", "predicted"])
            .map_err(|e| Error::Domain(format!("writing predictions: {e}")))?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Domain(format!("writing predictions: {e}")))?;
    Ok(String::from_utf8(bytes).expect("csv output is UTF-8"))
}

pub fn parse_predictions_csv(text: &str) -> Result<Vec<PredictionRow>> {
    csv::Reader::from_reader(text.as_bytes())
        .deserialize()
        .enumerate()
        .map(|(i, r)| r.map_err(|e| Error::Domain(format!("predictions.csv record {}: {e}", i + 1))))
        .collect()
}
