use std::fmt::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const DEFAULT_BINS: usize = 50;

/// Class-conditional counts of scores over equal-width bins on [0, 1].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScoreHistogram {
    pub edges: Vec<f64>,
    /// `counts[class][bin]`.
    pub counts: [Vec<usize>; 2],
}

impl ScoreHistogram {
    pub fn bins(&self) -> usize {
        self.edges.len() - 1
    }

    pub fn total(&self, class: usize) -> usize {
        self.counts[class].iter().sum()
    }
}

/// Bins `(score, label)` pairs. A score of exactly 1 falls in the last bin.
pub fn score_histogram(samples: impl IntoIterator<Item = (f64, u8)>, bins: usize) -> Result<ScoreHistogram> {
    if bins == 0 {
        return Err(Error::config("histogram needs at least one bin"));
    }
    let edges = (0..=bins).map(|i| i as f64 / bins as f64).collect();
    let mut counts = [vec![0; bins], vec![0; bins]];
    for (s, label) in samples {
        if !(0.0..=1.0).contains(&s) {
            return Err(Error::Domain(format!("score {s} outside [0, 1]")));
        }
        if label > 1 {
            return Err(Error::Domain(format!("label {label} is not 0 or 1")));
        }
        let b = ((s * bins as f64) as usize).min(bins - 1);
        counts[label as usize][b] += 1;
    }
    Ok(ScoreHistogram { edges, counts })
}

const W: f64 = 640.0;
const H: f64 = 360.0;
const PAD: f64 = 40.0;

/// Overlaid class histograms with the band `[threshold, 1 - threshold]`
/// shaded: scores there are flagged whichever their label. Output depends
/// only on the inputs.
pub fn histogram_svg(h: &ScoreHistogram, threshold: f64, title: &str) -> String {
    let max = h.counts.iter().flatten().copied().max().unwrap_or(0).max(1) as f64;
    let pw = W - 2.0 * PAD;
    let ph = H - 2.0 * PAD;
    let x = |v: f64| PAD + v * pw;
    let mut s = svg_open(title);
    let (lo, hi) = (threshold.min(0.5), (1.0 - threshold).max(0.5));
    writeln!(
        s,
        r##"<rect x="{:.2}" y="{PAD:.2}" width="{:.2}" height="{ph:.2}" fill="#dddddd"/>"##,
        x(lo),
        (hi - lo) * pw
    )
    .unwrap();
    for (class, colour) in [(0, "#1f77b4"), (1, "#d62728")] {
        for (b, &c) in h.counts[class].iter().enumerate() {
            if c == 0 {
                continue;
            }
            let bh = c as f64 / max * ph;
            writeln!(
                s,
                r#"<rect x="{:.2}" y="{:.2}" width="{:.2}" height="{bh:.2}" fill="{colour}" fill-opacity="0.5"/>"#,
                x(h.edges[b]),
                H - PAD - bh,
                (h.edges[b + 1] - h.edges[b]) * pw
            )
            .unwrap();
        }
    }
    axes(&mut s, "score", &format!("count (max {})", max as usize));
    legend(&mut s, &[("class 0", "#1f77b4"), ("class 1", "#d62728")]);
    s.push_str("</svg>\n");
    s
}

pub(crate) fn svg_open(title: &str) -> String {
    let mut s = String::new();
    writeln!(s, r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}">"#).unwrap();
    writeln!(s, r#"<text x="{:.2}" y="20" text-anchor="middle" font-size="14">{}</text>"#, W / 2.0, xml_escape(title)).unwrap();
    s
}

pub(crate) fn axes(s: &mut String, xlabel: &str, ylabel: &str) {
    writeln!(s, r#"<line x1="{PAD}" y1="{0}" x2="{1}" y2="{0}" stroke="black"/>"#, H - PAD, W - PAD).unwrap();
    writeln!(s, r#"<line x1="{PAD}" y1="{PAD}" x2="{PAD}" y2="{}" stroke="black"/>"#, H - PAD).unwrap();
    writeln!(s, r#"<text x="{:.2}" y="{:.2}" text-anchor="middle" font-size="12">{}</text>"#, W / 2.0, H - 8.0, xml_escape(xlabel)).unwrap();
    writeln!(s, r#"<text x="12" y="{:.2}" font-size="12" transform="rotate(-90 12 {:.2})" text-anchor="middle">{}</text>"#, H / 2.0, H / 2.0, xml_escape(ylabel)).unwrap();
}

pub(crate) fn legend(s: &mut String, entries: &[(&str, &str)]) {
    for (i, (name, colour)) in entries.iter().enumerate() {
        let y = PAD + 14.0 * i as f64;
        writeln!(s, r#"<rect x="{:.2}" y="{:.2}" width="10" height="10" fill="{colour}"/>"#, W - PAD - 150.0, y).unwrap();
        writeln!(s, r#"<text x="{:.2}" y="{:.2}" font-size="11">{}</text>"#, W - PAD - 135.0, y + 9.0, xml_escape(name)).unwrap();
    }
}

pub(crate) fn xml_escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

pub(crate) const PLOT: (f64, f64, f64) = (W, H, PAD);
