use std::fmt::Write;

use crate::classifier::EpochStats;
use crate::error::{Error, Result};
use crate::report::histogram::{axes, legend, svg_open, xml_escape, PLOT};

/// Per-epoch history of one training run.
#[derive(Clone, Debug, PartialEq)]
pub struct TrainingCurve {
    pub run: String,
    pub history: Vec<EpochStats>,
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

/// `run,epoch,train_loss,train_accuracy,val_loss,val_accuracy`, values
/// copied from the history at full precision.
pub fn curves_csv(runs: &[TrainingCurve]) -> Result<String> {
    let mut out = String::from("run,epoch,train_loss,train_accuracy,val_loss,val_accuracy\n");
    for r in runs {
        if r.history.is_empty() {
            return Err(Error::Domain(format!("run {} has an empty history", r.run)));
        }
        if r.run.contains([',', '"', '\n']) {
            return Err(Error::Domain(format!("run id {:?} cannot be written to CSV", r.run)));
        }
        for e in &r.history {
            writeln!(
                out,
                "{},{},{},{},{},{}",
                r.run,
                e.epoch,
                e.train_loss,
                e.train_accuracy,
                opt(e.val_loss),
                opt(e.val_accuracy)
            )
            .unwrap();
        }
    }
    Ok(out)
}

const COLOURS: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"];

/// Accuracy curves of every run on one chart: solid for training, dashed
/// for validation.
pub fn curves_svg(runs: &[TrainingCurve], title: &str) -> String {
    let (w, h, pad) = PLOT;
    let epochs = runs.iter().flat_map(|r| r.history.iter().map(|e| e.epoch)).max().unwrap_or(1).max(2);
    let x = |e: usize| pad + (e - 1) as f64 / (epochs - 1) as f64 * (w - 2.0 * pad);
    let y = |a: f64| h - pad - a.clamp(0.0, 1.0) * (h - 2.0 * pad);
    let mut s = svg_open(title);
    let mut keys = Vec::new();
    for (i, r) in runs.iter().enumerate() {
        let colour = COLOURS[i % COLOURS.len()];
        let train: Vec<String> = r.history.iter().map(|e| format!("{:.2},{:.2}", x(e.epoch), y(e.train_accuracy))).collect();
        writeln!(s, r#"<polyline points="{}" fill="none" stroke="{colour}"/>"#, train.join(" ")).unwrap();
        let val: Vec<String> = r
            .history
            .iter()
            .filter_map(|e| e.val_accuracy.map(|a| format!("{:.2},{:.2}", x(e.epoch), y(a))))
            .collect();
        if !val.is_empty() {
            writeln!(s, r#"<polyline points="{}" fill="none" stroke="{colour}" stroke-dasharray="4 3"/>"#, val.join(" ")).unwrap();
        }
        keys.push((xml_escape(&r.run), colour));
    }
    axes(&mut s, "epoch", "accuracy");
    let keys: Vec<(&str, &str)> = keys.iter().map(|(n, c)| (n.as_str(), *c)).collect();
    legend(&mut s, &keys);
    s.push_str("</svg>\n");
    s
}
