//! RDM-matching auxiliary loss and its gradients.
//!
//! For student activations `f_1..f_n` at one layer and teacher RDM `T`,
//!
//! ```text
//! E = 2 / (n (n - 1)) * sum_{i<j} (d(f_i, f_j) - T_ij)^2
//! dE/df_i = 4 / (n (n - 1)) * sum_{j != i} (d(f_i, f_j) - T_ij) * dd(f_i, f_j)/df_i
//! ```
//!
//! With `d` the mean squared error over `K` features, `dd/df_i` is
//! `2 (f_i - f_j) / K`, giving the familiar `8 / (n (n - 1))` coefficient
//! times an extra `1/K`. With the squared Euclidean distance the `1/K`
//! disappears.
//!
//! The sampled estimator replaces the exact sum with the pairs `P_i` of a
//! [`PairSample`] that contain input `i`, normalized by
//! `|X_P| * |P_i|` where `X_P` is the set of distinct inputs in the sample:
//!
//! ```text
//! dE/df_i ≈ 4 / (|X_P| |P_i|) * sum_{(i,j) in P_i} (d(f_i, f_j) - T_ij) * dd(f_i, f_j)/df_i
//! ```
//!
//! Inputs not in the sample receive a zero gradient. With the full sample,
//! `|X_P| = n` and `|P_i| = n - 1`, so the estimator equals the exact
//! gradient (ratio 1).

use super::pairs::PairSample;
use crate::error::{Error, Result};
use crate::rdm::{compute_rdm, PairwiseMetric, Rdm};
use crate::tensor::Tensor;

fn check_sizes(acts: &Tensor, teacher: &Rdm) -> Result<usize> {
    let n = acts.rows();
    if n != teacher.n() {
        return Err(Error::shape(format!(
            "student batch of {} vs teacher RDM of {}",
            n,
            teacher.n()
        )));
    }
    if n < 2 {
        return Err(Error::invalid("auxiliary loss needs at least 2 inputs"));
    }
    Ok(n)
}

/// Mean squared difference between the student's RDM and `teacher` over
/// all `i < j` pairs.
pub fn aux_loss(acts: &Tensor, teacher: &Rdm, metric: PairwiseMetric) -> Result<f64> {
    let n = check_sizes(acts, teacher)?;
    let student = compute_rdm(acts, metric)?;
    Ok(rdm_mse(&student, teacher, n))
}

pub(crate) fn rdm_mse(student: &Rdm, teacher: &Rdm, n: usize) -> f64 {
    let mut sum = 0.0;
    for i in 0..n {
        for j in i + 1..n {
            let e = student.get(i, j) - teacher.get(i, j);
            sum += e * e;
        }
    }
    2.0 * sum / (n * (n - 1)) as f64
}

/// Exact gradient of [`aux_loss`] w.r.t. every activation.
pub fn aux_grad_exact(acts: &Tensor, teacher: &Rdm, metric: PairwiseMetric) -> Result<Tensor> {
    let n = check_sizes(acts, teacher)?;
    let student = compute_rdm(acts, metric)?;
    let coef = 4.0 / (n * (n - 1)) as f64;
    let mut grad = Tensor::zeros(acts.shape());
    for i in 0..n {
        let fi = acts.row(i);
        for j in 0..n {
            if j == i {
                continue;
            }
            let err = student.get(i, j) - teacher.get(i, j);
            if err != 0.0 {
                metric.add_grad_first(fi, acts.row(j), coef * err, grad.row_mut(i))?;
            }
        }
    }
    Ok(grad)
}

/// Pair-subsampled gradient estimate.
pub fn aux_grad_sampled(
    acts: &Tensor,
    teacher: &Rdm,
    sample: &PairSample,
    metric: PairwiseMetric,
) -> Result<Tensor> {
    let n = check_sizes(acts, teacher)?;
    if sample.n() != n {
        return Err(Error::shape(format!(
            "pair sample for n = {} used on a batch of {}",
            sample.n(),
            n
        )));
    }
    if sample.is_empty() {
        return Err(Error::invalid("empty pair sample"));
    }
    let degrees = sample.degrees();
    let distinct = degrees.iter().filter(|&&d| d > 0).count() as f64;
    let mut grad = Tensor::zeros(acts.shape());
    for &(i, j) in sample.pairs() {
        let (fi, fj) = (acts.row(i), acts.row(j));
        let err = metric.distance(fi, fj)? - teacher.get(i, j);
        if err == 0.0 {
            continue;
        }
        let ci = 4.0 * err / (distinct * degrees[i] as f64);
        metric.add_grad_first(fi, fj, ci, grad.row_mut(i))?;
        let cj = 4.0 * err / (distinct * degrees[j] as f64);
        metric.add_grad_first(fj, fi, cj, grad.row_mut(j))?;
    }
    Ok(grad)
}

/// Per-input coefficient ratio between the sampled estimator and the exact
/// gradient, `n (n - 1) / (|X_P| |P_i|)`. For a full sample this is 1 for
/// every input.
pub fn normalization_ratio(sample: &PairSample, i: usize) -> f64 {
    let n = sample.n() as f64;
    let degree = sample.degrees()[i] as f64;
    n * (n - 1.0) / (sample.distinct_inputs() as f64 * degree)
}

/// `backprop + alpha * aux`.
pub fn combine_gradients(backprop: &Tensor, aux: &Tensor, alpha: f64) -> Result<Tensor> {
    if !(alpha >= 0.0) {
        return Err(Error::invalid(format!("alpha {} must be >= 0", alpha)));
    }
    let mut out = backprop.clone();
    out.add_scaled(aux, alpha)?;
    Ok(out)
}
