//! Representational distance matrices and distances between them.

mod export;
mod metric;

pub use export::{heatmap_svg, read_csv, write_csv, write_sidecar, RdmSidecar};
pub(crate) use export::escape;
pub use metric::PairwiseMetric;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tensor::Tensor;

/// Dense `n × n` dissimilarity matrix over a batch of `n` inputs at one
/// layer. Symmetric with a zero diagonal.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Rdm {
    n: usize,
    values: Vec<f64>,
    metric: PairwiseMetric,
}

impl Rdm {
    /// Builds an RDM from an upper-triangle vector (`i < j`, row-major).
    pub fn from_upper(n: usize, upper: &[f64], metric: PairwiseMetric) -> Result<Self> {
        if upper.len() != n * n.saturating_sub(1) / 2 {
            return Err(Error::shape(format!(
                "{} upper-triangle entries do not fit n = {}",
                upper.len(),
                n
            )));
        }
        let mut values = vec![0.0; n * n];
        let mut it = upper.iter();
        for i in 0..n {
            for j in i + 1..n {
                let v = *it.next().unwrap();
                values[i * n + j] = v;
                values[j * n + i] = v;
            }
        }
        Ok(Rdm { n, values, metric })
    }

    /// Builds an RDM from a full matrix, checking symmetry and the diagonal.
    pub fn from_matrix(n: usize, values: Vec<f64>, metric: PairwiseMetric) -> Result<Self> {
        if values.len() != n * n {
            return Err(Error::shape(format!("{} values for a {}x{} RDM", values.len(), n, n)));
        }
        for i in 0..n {
            if values[i * n + i] != 0.0 {
                return Err(Error::invalid(format!("nonzero diagonal at {}", i)));
            }
            for j in i + 1..n {
                if values[i * n + j] != values[j * n + i] {
                    return Err(Error::invalid(format!("asymmetric at ({}, {})", i, j)));
                }
            }
        }
        Ok(Rdm { n, values, metric })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn metric(&self) -> PairwiseMetric {
        self.metric
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.n + j]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Entries with `i < j`, row-major.
    pub fn upper(&self) -> Vec<f64> {
        let n = self.n;
        let mut out = Vec::with_capacity(n * n.saturating_sub(1) / 2);
        for i in 0..n {
            out.extend_from_slice(&self.values[i * n + i + 1..(i + 1) * n]);
        }
        out
    }

    /// Restricts the RDM to the given inputs, in the given order.
    pub fn select(&self, idx: &[usize]) -> Rdm {
        let m = idx.len();
        let mut values = vec![0.0; m * m];
        for (a, &i) in idx.iter().enumerate() {
            for (b, &j) in idx.iter().enumerate() {
                values[a * m + b] = self.get(i, j);
            }
        }
        Rdm {
            n: m,
            values,
            metric: self.metric,
        }
    }
}

/// Computes the RDM of `activations` (`[n, ...]`, flattened per row).
pub fn compute_rdm(activations: &Tensor, metric: PairwiseMetric) -> Result<Rdm> {
    let n = activations.rows();
    if n < 2 {
        return Err(Error::invalid(format!("an RDM needs at least 2 inputs, got {}", n)));
    }
    let k = activations.row_len();
    if k == 0 {
        return Err(Error::shape("activations have no features"));
    }
    let rows: Vec<&[f64]> = (0..n).map(|i| activations.row(i)).collect();
    let mut values = vec![0.0; n * n];
    match metric {
        PairwiseMetric::Correlation => {
            let normalized: Vec<Vec<f64>> = rows
                .iter()
                .enumerate()
                .map(|(i, r)| {
                    metric::centered(r)
                        .map(|(c, norm)| c.into_iter().map(|v| v / norm).collect())
                        .map_err(|_| Error::Degenerate(format!("constant activation vector at input {}", i)))
                })
                .collect::<Result<_>>()?;
            for i in 0..n {
                for j in i + 1..n {
                    let r: f64 = normalized[i].iter().zip(&normalized[j]).map(|(a, b)| a * b).sum();
                    let d = 1.0 - r.clamp(-1.0, 1.0);
                    values[i * n + j] = d;
                    values[j * n + i] = d;
                }
            }
        }
        _ => {
            for i in 0..n {
                for j in i + 1..n {
                    let d = metric.distance(rows[i], rows[j])?;
                    values[i * n + j] = d;
                    values[j * n + i] = d;
                }
            }
        }
    }
    Ok(Rdm { n, values, metric })
}

/// How two RDMs are compared.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RdmComparison {
    /// `1 - pearson` of the upper triangles.
    Correlation,
    /// Euclidean distance between the upper triangles after each is
    /// scaled to unit norm.
    NormalizedEuclidean,
}

impl RdmComparison {
    pub fn as_str(self) -> &'static str {
        match self {
            RdmComparison::Correlation => "correlation",
            RdmComparison::NormalizedEuclidean => "normalized_euclidean",
        }
    }
}

impl std::str::FromStr for RdmComparison {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "correlation" => Ok(RdmComparison::Correlation),
            "normalized_euclidean" => Ok(RdmComparison::NormalizedEuclidean),
            other => Err(Error::invalid(format!("unknown RDM comparison `{}`", other))),
        }
    }
}

/// Distance between two RDMs over the same inputs, using their upper
/// triangles only.
pub fn rdm_distance(a: &Rdm, b: &Rdm, method: RdmComparison) -> Result<f64> {
    if a.n != b.n {
        return Err(Error::shape(format!("RDM sizes differ: {} vs {}", a.n, b.n)));
    }
    let (ua, ub) = (a.upper(), b.upper());
    match method {
        RdmComparison::Correlation => {
            if ua.len() < 2 {
                return Err(Error::Degenerate("correlation needs at least two pairs".into()));
            }
            let (ca, na) = metric::centered(&ua)
                .map_err(|_| Error::Degenerate("constant RDM upper triangle".into()))?;
            let (cb, nb) = metric::centered(&ub)
                .map_err(|_| Error::Degenerate("constant RDM upper triangle".into()))?;
            let r = ca.iter().zip(&cb).map(|(x, y)| x * y).sum::<f64>() / (na * nb);
            Ok(1.0 - r.clamp(-1.0, 1.0))
        }
        RdmComparison::NormalizedEuclidean => {
            let na = ua.iter().map(|v| v * v).sum::<f64>().sqrt();
            let nb = ub.iter().map(|v| v * v).sum::<f64>().sqrt();
            if !(na > 0.0 && nb > 0.0) {
                return Err(Error::Degenerate("all-zero RDM upper triangle".into()));
            }
            Ok(ua
                .iter()
                .zip(&ub)
                .map(|(x, y)| (x / na - y / nb).powi(2))
                .sum::<f64>()
                .sqrt())
        }
    }
}
