use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{PairwiseMetric, Rdm};
use crate::error::{Error, Result};

/// JSON sidecar written next to an RDM CSV.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RdmSidecar {
    pub n: usize,
    pub metric: PairwiseMetric,
    pub labels: Vec<String>,
}

/// Writes `n` lines of `n` comma-separated values. Values use the shortest
/// decimal form that parses back to the same `f64`.
pub fn write_csv(rdm: &Rdm, path: &Path) -> Result<()> {
    let mut out = String::new();
    for i in 0..rdm.n() {
        let row: Vec<String> = (0..rdm.n()).map(|j| format!("{}", rdm.get(i, j))).collect();
        out.push_str(&row.join(","));
        out.push('\n');
    }
    fs::write(path, out)?;
    Ok(())
}

pub fn read_csv(path: &Path, metric: PairwiseMetric) -> Result<Rdm> {
    let text = fs::read_to_string(path)?;
    let mut values = Vec::new();
    let mut n = 0;
    for line in text.lines().filter(|l| !l.trim().is_empty()) {
        for field in line.split(',') {
            values.push(
                field
                    .trim()
                    .parse::<f64>()
                    .map_err(|e| Error::Format(format!("bad RDM entry `{}`: {}", field, e)))?,
            );
        }
        n += 1;
    }
    Rdm::from_matrix(n, values, metric)
}

pub fn write_sidecar(rdm: &Rdm, labels: &[String], path: &Path) -> Result<()> {
    if labels.len() != rdm.n() {
        return Err(Error::shape(format!("{} labels for {} inputs", labels.len(), rdm.n())));
    }
    let sidecar = RdmSidecar {
        n: rdm.n(),
        metric: rdm.metric(),
        labels: labels.to_vec(),
    };
    fs::write(path, serde_json::to_string_pretty(&sidecar)?)?;
    Ok(())
}

/// Grayscale heatmap, one `cell`-pixel square per entry. The smallest entry
/// maps to white and the largest to black, linearly in between; a constant
/// matrix is all white.
pub fn heatmap_svg(rdm: &Rdm, cell: usize, title: &str) -> String {
    let n = rdm.n();
    let (lo, hi) = rdm
        .values()
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)));
    let span = hi - lo;
    let size = n * cell;
    let mut svg = String::new();
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{s}" height="{h}" viewBox="0 0 {s} {h}">"#,
        s = size,
        h = size + 20
    );
    let _ = writeln!(svg, r#"<title>{}</title>"#, escape(title));
    for i in 0..n {
        for j in 0..n {
            let t = if span > 0.0 { (rdm.get(i, j) - lo) / span } else { 0.0 };
            let g = (255.0 * (1.0 - t)).round() as u8;
            let _ = writeln!(
                svg,
                r#"<rect x="{}" y="{}" width="{c}" height="{c}" fill="rgb({g},{g},{g})"/>"#,
                j * cell,
                i * cell,
                c = cell,
                g = g
            );
        }
    }
    let _ = writeln!(
        svg,
        r#"<text x="0" y="{}" font-size="12" font-family="sans-serif">{} (min {:.4}, max {:.4})</text>"#,
        size + 15,
        escape(title),
        lo,
        hi
    );
    svg.push_str("</svg>\n");
    svg
}

pub(crate) fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}
