use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rdm::escape;

/// Eigenvalues (descending) and matching unit eigenvectors (columns of
/// `vectors`, row-major `k x k`) of a symmetric matrix, by cyclic Jacobi
/// rotations.
pub fn symmetric_eigen(a: &[f64], k: usize) -> Result<(Vec<f64>, Vec<f64>)> {
    if a.len() != k * k {
        return Err(Error::shape(format!("{} entries for a {}x{} matrix", a.len(), k, k)));
    }
    let mut m = a.to_vec();
    let mut v = vec![0.0; k * k];
    for i in 0..k {
        v[i * k + i] = 1.0;
    }
    let scale: f64 = m.iter().map(|x| x * x).sum::<f64>().sqrt();
    for _sweep in 0..100 {
        let off: f64 = (0..k)
            .flat_map(|i| (0..k).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| m[i * k + j] * m[i * k + j])
            .sum::<f64>()
            .sqrt();
        if off <= 1e-15 * scale.max(f64::MIN_POSITIVE) {
            break;
        }
        for p in 0..k {
            for q in p + 1..k {
                let apq = m[p * k + q];
                if apq == 0.0 {
                    continue;
                }
                let theta = (m[q * k + q] - m[p * k + p]) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for r in 0..k {
                    let (mrp, mrq) = (m[r * k + p], m[r * k + q]);
                    m[r * k + p] = c * mrp - s * mrq;
                    m[r * k + q] = s * mrp + c * mrq;
                }
                for r in 0..k {
                    let (mpr, mqr) = (m[p * k + r], m[q * k + r]);
                    m[p * k + r] = c * mpr - s * mqr;
                    m[q * k + r] = s * mpr + c * mqr;
                }
                for r in 0..k {
                    let (vrp, vrq) = (v[r * k + p], v[r * k + q]);
                    v[r * k + p] = c * vrp - s * vrq;
                    v[r * k + q] = s * vrp + c * vrq;
                }
            }
        }
    }
    let mut order: Vec<usize> = (0..k).collect();
    order.sort_by(|&a, &b| m[b * k + b].total_cmp(&m[a * k + a]));
    let values = order.iter().map(|&i| m[i * k + i]).collect();
    let mut vectors = vec![0.0; k * k];
    for (col, &src) in order.iter().enumerate() {
        for r in 0..k {
            vectors[r * k + col] = v[r * k + src];
        }
    }
    Ok((values, vectors))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MdsEmbedding {
    /// `[x, y]` per item; missing dimensions are 0.
    pub points: Vec<[f64; 2]>,
    /// Number of dimensions backed by a positive eigenvalue (0, 1 or 2).
    pub dims: usize,
    /// `sqrt(sum of squared discarded eigenvalues / sum of all squared eigenvalues)`.
    pub stress: f64,
    pub warning: Option<String>,
}

impl MdsEmbedding {
    pub fn distance(&self, i: usize, j: usize) -> f64 {
        let (a, b) = (self.points[i], self.points[j]);
        ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)).sqrt()
    }
}

/// Classical (Torgerson) MDS into two dimensions. `d` is a row-major
/// `k x k` symmetric, zero-diagonal, nonnegative distance matrix.
pub fn classical_mds(d: &[f64], k: usize) -> Result<MdsEmbedding> {
    if d.len() != k * k {
        return Err(Error::shape(format!("{} entries for a {}x{} matrix", d.len(), k, k)));
    }
    let scale = d.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    for i in 0..k {
        if d[i * k + i] != 0.0 {
            return Err(Error::invalid(format!("nonzero diagonal at {}", i)));
        }
        for j in 0..k {
            let v = d[i * k + j];
            if !v.is_finite() || v < 0.0 {
                return Err(Error::invalid(format!("entry ({}, {}) = {} is not a distance", i, j, v)));
            }
            if (v - d[j * k + i]).abs() > 1e-12 * scale {
                return Err(Error::invalid(format!("matrix not symmetric at ({}, {})", i, j)));
            }
        }
    }
    // B = -1/2 J D^2 J
    let sq: Vec<f64> = d.iter().map(|v| v * v).collect();
    let row_mean: Vec<f64> = (0..k).map(|i| (0..k).map(|j| sq[i * k + j]).sum::<f64>() / k as f64).collect();
    let grand = row_mean.iter().sum::<f64>() / k.max(1) as f64;
    let mut b = vec![0.0; k * k];
    for i in 0..k {
        for j in 0..k {
            b[i * k + j] = -0.5 * (sq[i * k + j] - row_mean[i] - row_mean[j] + grand);
        }
    }
    let (values, vectors) = symmetric_eigen(&b, k)?;
    let total: f64 = values.iter().map(|v| v * v).sum();
    let tol = 1e-12 * values.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(f64::MIN_POSITIVE);
    let dims = values.iter().take(2).filter(|&&l| l > tol).count();
    let mut points = vec![[0.0; 2]; k];
    for axis in 0..dims {
        let root = values[axis].sqrt();
        let mut col: Vec<f64> = (0..k).map(|r| vectors[r * k + axis] * root).collect();
        if let Some(first) = col.iter().find(|v| v.abs() > 1e-12 * root) {
            if *first < 0.0 {
                col.iter_mut().for_each(|v| *v = -*v);
            }
        }
        for (p, c) in points.iter_mut().zip(col) {
            p[axis] = c;
        }
    }
    let kept: f64 = values.iter().take(dims).map(|v| v * v).sum();
    let stress = if total > 0.0 { ((total - kept).max(0.0) / total).sqrt() } else { 0.0 };
    let warning = (dims < 2).then(|| format!("only {} positive eigenvalue(s); embedding is {}-D", dims, dims));
    Ok(MdsEmbedding {
        points,
        dims,
        stress,
        warning,
    })
}

/// Scatter plot with one labelled dot per item.
pub fn mds_svg(embedding: &MdsEmbedding, labels: &[String], title: &str) -> Result<String> {
    if labels.len() != embedding.points.len() {
        return Err(Error::shape(format!("{} labels for {} points", labels.len(), embedding.points.len())));
    }
    let (size, margin) = (400.0, 60.0);
    let extent = embedding
        .points
        .iter()
        .flat_map(|p| p.iter())
        .fold(0.0f64, |m, v| m.max(v.abs()))
        .max(1e-12);
    let to_px = |v: f64| size / 2.0 + v / extent * (size / 2.0 - margin);
    let mut svg = String::new();
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{s}" height="{h}" viewBox="0 0 {s} {h}">"#,
        s = size,
        h = size + 20.0
    );
    let _ = writeln!(svg, r#"<title>{}</title>"#, escape(title));
    let _ = writeln!(svg, r#"<rect width="{s}" height="{s}" fill="white" stroke="black"/>"#, s = size);
    for (p, name) in embedding.points.iter().zip(labels) {
        let (x, y) = (to_px(p[0]), to_px(-p[1]));
        let _ = writeln!(svg, r#"<circle cx="{:.2}" cy="{:.2}" r="4" fill="black"/>"#, x, y);
        let _ = writeln!(
            svg,
            r#"<text x="{:.2}" y="{:.2}" font-size="12" font-family="sans-serif">{}</text>"#,
            x + 6.0,
            y - 6.0,
            escape(name)
        );
    }
    let _ = writeln!(
        svg,
        r#"<text x="0" y="{}" font-size="12" font-family="sans-serif">{} (stress {:.4})</text>"#,
        size + 15.0,
        escape(title),
        embedding.stress
    );
    svg.push_str("</svg>\n");
    Ok(svg)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MdsSidecar {
    pub points: BTreeMap<String, [f64; 2]>,
    pub stress: f64,
}

pub fn mds_sidecar(embedding: &MdsEmbedding, labels: &[String]) -> MdsSidecar {
    MdsSidecar {
        points: labels.iter().cloned().zip(embedding.points.iter().copied()).collect(),
        stress: embedding.stress,
    }
}
