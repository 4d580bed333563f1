use rand::Rng as _;
use rand_distr::StandardNormal;

use super::Dataset;
use crate::error::{Error, Result};
use crate::rng;
use crate::tensor::Tensor;

/// Floor on the per-image standard deviation in [`gcn`].
pub const GCN_EPSILON: f64 = 1e-8;

/// Global contrast normalization: per image, subtract the mean and divide
/// by `max(std, GCN_EPSILON)` (population standard deviation).
pub fn gcn(images: &Tensor) -> Result<Tensor> {
    if images.is_empty() || images.shape().is_empty() {
        return Err(Error::invalid("gcn needs a nonempty batch"));
    }
    let mut out = images.clone();
    for i in 0..out.rows() {
        let row = out.row_mut(i);
        let k = row.len() as f64;
        let mean = row.iter().sum::<f64>() / k;
        let var = row.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / k;
        let scale = var.sqrt().max(GCN_EPSILON);
        row.iter_mut().for_each(|v| *v = (*v - mean) / scale);
    }
    Ok(out)
}

/// Per-image flip decisions, each true with probability 0.5.
pub fn hflip_mask(n: usize, seed: u64) -> Vec<bool> {
    let mut r = rng::stream(seed, "hflip", &[]);
    (0..n).map(|_| r.gen_bool(0.5)).collect()
}

/// Mirrors the images selected by `mask` along the width axis.
pub fn flip_with_mask(images: &Tensor, mask: &[bool]) -> Result<Tensor> {
    let (n, c, h, w) = match *images.shape() {
        [n, c, h, w] => (n, c, h, w),
        _ => return Err(Error::shape(format!("expected [n, c, h, w], got {:?}", images.shape()))),
    };
    if mask.len() != n {
        return Err(Error::shape(format!("{} flags for {} images", mask.len(), n)));
    }
    let mut out = images.clone();
    for (i, _) in mask.iter().enumerate().filter(|(_, &f)| f) {
        for line in out.row_mut(i).chunks_mut(w).take(c * h) {
            line.reverse();
        }
    }
    Ok(out)
}

/// Random horizontal flips, each image independently with probability 0.5.
pub fn augment_hflip(images: &Tensor, seed: u64) -> Result<Tensor> {
    flip_with_mask(images, &hflip_mask(images.rows(), seed))
}

/// Gaussian class clusters: class `c` has mean `separation * z_c` with
/// `z_c` a standard normal vector, and unit-variance isotropic noise.
/// Samples are ordered class by class; `dims` is the per-sample image
/// shape `[channels, height, width]`.
pub fn synth_clusters(
    num_classes: usize,
    per_class: usize,
    dims: [usize; 3],
    separation: f64,
    seed: u64,
) -> Result<Dataset> {
    let k: usize = dims.iter().product();
    if num_classes == 0 || per_class == 0 || k == 0 || !(separation >= 0.0 && separation.is_finite()) {
        return Err(Error::invalid("synthetic clusters need positive sizes and a finite separation >= 0"));
    }
    let mut mr = rng::stream(seed, "synth_means", &[]);
    let means: Vec<Vec<f64>> = (0..num_classes)
        .map(|_| (0..k).map(|_| separation * mr.sample::<f64, _>(StandardNormal)).collect())
        .collect();
    let mut nr = rng::stream(seed, "synth_noise", &[]);
    let mut data = Vec::with_capacity(num_classes * per_class * k);
    let mut labels = Vec::with_capacity(num_classes * per_class);
    for (c, mean) in means.iter().enumerate() {
        for _ in 0..per_class {
            data.extend(mean.iter().map(|m| m + nr.sample::<f64, _>(StandardNormal)));
            labels.push(c);
        }
    }
    let images = Tensor::new(vec![num_classes * per_class, dims[0], dims[1], dims[2]], data)?;
    Dataset::new(
        images,
        labels,
        num_classes,
        format!(
            "synthetic clusters: {} classes x {}, dims {:?}, separation {}, seed {}",
            num_classes, per_class, dims, separation, seed
        ),
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gcn_cases() {
        let t = Tensor::new(vec![2, 2], vec![0.0, 2.0, 5.0, 5.0]).unwrap();
        let g = gcn(&t).unwrap();
        assert_eq!(g.row(0), &[-1.0, 1.0]);
        assert_eq!(g.row(1), &[0.0, 0.0]);
        assert!(gcn(&Tensor::zeros(&[0, 3])).is_err());
    }

    #[test]
    fn flips() {
        let t = Tensor::new(vec![1, 1, 2, 3], vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0]).unwrap();
        let f = flip_with_mask(&t, &[true]).unwrap();
        assert_eq!(f.data(), &[3.0, 2.0, 1.0, 6.0, 5.0, 4.0]);
        assert_eq!(flip_with_mask(&f, &[true]).unwrap(), t);
        assert_eq!(flip_with_mask(&t, &[false]).unwrap(), t);
        let sym = Tensor::new(vec![1, 1, 1, 3], vec![1.0, 2.0, 1.0]).unwrap();
        assert_eq!(augment_hflip(&sym, 3).unwrap(), sym);
        assert_eq!(hflip_mask(20, 5), hflip_mask(20, 5));
    }

    #[test]
    fn zero_separation_means_coincide() {
        let d = synth_clusters(3, 2, [1, 2, 2], 0.0, 1).unwrap();
        assert_eq!(d.len(), 6);
        assert_eq!(d.labels, vec![0, 0, 1, 1, 2, 2]);
        assert_eq!(synth_clusters(3, 2, [1, 2, 2], 0.0, 1).unwrap(), d);
        assert!(synth_clusters(0, 2, [1, 2, 2], 1.0, 1).is_err());
    }
}
