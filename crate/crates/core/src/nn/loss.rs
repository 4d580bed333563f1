use super::layer::softmax_row;
use crate::error::{Error, Result};
use crate::tensor::Tensor;

/// Mean softmax cross-entropy over the batch.
/// Returns the loss and its gradient w.r.t. `logits`,
/// `(softmax - onehot) / batch_size`.
pub fn softmax_xent(logits: &Tensor, labels: &[usize]) -> Result<(f64, Tensor)> {
    let b = logits.rows();
    let k = logits.row_len();
    if labels.len() != b {
        return Err(Error::shape(format!("{} logit rows but {} labels", b, labels.len())));
    }
    if let Some(&bad) = labels.iter().find(|&&l| l >= k) {
        return Err(Error::invalid(format!("label {} out of range for {} classes", bad, k)));
    }
    if b == 0 {
        return Ok((0.0, logits.clone()));
    }
    let mut grad = vec![0.0; b * k];
    let mut loss = 0.0;
    for (i, &label) in labels.iter().enumerate() {
        let row = logits.row(i);
        let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let lse = max + row.iter().map(|&v| (v - max).exp()).sum::<f64>().ln();
        loss += lse - row[label];
        let g = &mut grad[i * k..(i + 1) * k];
        softmax_row(row, g);
        g[label] -= 1.0;
        for v in g.iter_mut() {
            *v /= b as f64;
        }
    }
    let grad = Tensor::new(logits.shape().to_vec(), grad)?;
    Ok((loss / b as f64, grad))
}
