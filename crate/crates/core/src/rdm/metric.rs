use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Dissimilarity between two activation vectors.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PairwiseMetric {
    /// `mean_k (a_k - b_k)^2`
    MeanSquaredError,
    /// `sum_k (a_k - b_k)^2`
    SquaredEuclidean,
    /// `sqrt(sum_k (a_k - b_k)^2)`; intended for visualization.
    Euclidean,
    /// `1 - pearson(a, b)`, in `[0, 2]`.
    Correlation,
}

impl PairwiseMetric {
    pub fn as_str(self) -> &'static str {
        match self {
            PairwiseMetric::MeanSquaredError => "mean_squared_error",
            PairwiseMetric::SquaredEuclidean => "squared_euclidean",
            PairwiseMetric::Euclidean => "euclidean",
            PairwiseMetric::Correlation => "correlation",
        }
    }

    /// Distance between two equal-length vectors. Correlation on a
    /// constant vector is a [`Error::Degenerate`] error.
    pub fn distance(self, a: &[f64], b: &[f64]) -> Result<f64> {
        debug_assert_eq!(a.len(), b.len());
        match self {
            PairwiseMetric::MeanSquaredError => Ok(sq_diff(a, b) / a.len() as f64),
            PairwiseMetric::SquaredEuclidean => Ok(sq_diff(a, b)),
            PairwiseMetric::Euclidean => Ok(sq_diff(a, b).sqrt()),
            PairwiseMetric::Correlation => {
                let (ca, na) = centered(a)?;
                let (cb, nb) = centered(b)?;
                let r: f64 = ca.iter().zip(&cb).map(|(x, y)| x * y).sum::<f64>() / (na * nb);
                Ok(1.0 - r.clamp(-1.0, 1.0))
            }
        }
    }

    /// Adds `coef * d(a, b) / da` into `out`.
    ///
    /// For `Euclidean` the derivative at `a == b` is taken as zero.
    pub fn add_grad_first(self, a: &[f64], b: &[f64], coef: f64, out: &mut [f64]) -> Result<()> {
        match self {
            PairwiseMetric::MeanSquaredError | PairwiseMetric::SquaredEuclidean => {
                let scale = match self {
                    PairwiseMetric::MeanSquaredError => 2.0 / a.len() as f64,
                    _ => 2.0,
                } * coef;
                for ((o, &x), &y) in out.iter_mut().zip(a).zip(b) {
                    *o += scale * (x - y);
                }
            }
            PairwiseMetric::Euclidean => {
                let d = sq_diff(a, b).sqrt();
                if d > 0.0 {
                    let scale = coef / d;
                    for ((o, &x), &y) in out.iter_mut().zip(a).zip(b) {
                        *o += scale * (x - y);
                    }
                }
            }
            PairwiseMetric::Correlation => {
                // d = 1 - <â, b̂>;  dd/da = -(b̂ - r â) / |a_c|
                let (ca, na) = centered(a)?;
                let (cb, nb) = centered(b)?;
                let r: f64 = ca.iter().zip(&cb).map(|(x, y)| x * y).sum::<f64>() / (na * nb);
                for ((o, &x), &y) in out.iter_mut().zip(&ca).zip(&cb) {
                    *o -= coef * (y / nb - r * x / na) / na;
                }
            }
        }
        Ok(())
    }
}

impl fmt::Display for PairwiseMetric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for PairwiseMetric {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "mean_squared_error" | "mse" => Ok(PairwiseMetric::MeanSquaredError),
            "squared_euclidean" => Ok(PairwiseMetric::SquaredEuclidean),
            "euclidean" => Ok(PairwiseMetric::Euclidean),
            "correlation" => Ok(PairwiseMetric::Correlation),
            other => Err(Error::invalid(format!("unknown metric `{}`", other))),
        }
    }
}

fn sq_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Mean-centered copy and its Euclidean norm.
pub(crate) fn centered(v: &[f64]) -> Result<(Vec<f64>, f64)> {
    let mean = v.iter().sum::<f64>() / v.len() as f64;
    let c: Vec<f64> = v.iter().map(|x| x - mean).collect();
    let norm = c.iter().map(|x| x * x).sum::<f64>().sqrt();
    if !(norm > 0.0) {
        return Err(Error::Degenerate(
            "correlation of a constant vector is undefined".into(),
        ));
    }
    Ok((c, norm))
}
