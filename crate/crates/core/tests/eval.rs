use num_bigint::BigUint;
use num_rational::BigRational;
use num_traits::{One, ToPrimitive, Zero};
use rand::Rng;
use rdl_core::eval::{bootstrap_rdm_distance, classical_mds, mcnemar_exact, BootstrapConfig, PairedOutcomes};
use rdl_core::rdm::{PairwiseMetric, RdmComparison};
use rdl_core::rng;
use rdl_core::Tensor;

fn binom(m: u64, i: u64) -> BigUint {
    let mut c = BigUint::one();
    for t in 0..i {
        c = c * BigUint::from(m - t) / BigUint::from(t + 1);
    }
    c
}

/// min(1, 2 * sum_{i <= min(b, c)} C(b + c, i) / 2^(b + c)) in exact arithmetic.
fn rational_p(b: u64, c: u64) -> BigRational {
    let m = b + c;
    if m == 0 {
        return BigRational::one();
    }
    let k = b.min(c);
    let mut tail = BigUint::zero();
    for i in 0..=k {
        tail += binom(m, i);
    }
    let p = BigRational::new((tail * 2u32).into(), (BigUint::one() << m as usize).into());
    p.min(BigRational::one())
}

fn outcomes(n01: u64, n10: u64) -> PairedOutcomes {
    PairedOutcomes {
        n00: 5,
        n01,
        n10,
        n11: 50,
    }
}

#[test]
fn mcnemar_matches_rational_oracle() {
    for b in 0..=40u64 {
        for c in 0..=40 - b {
            let exact = rational_p(b, c).to_f64().unwrap();
            let got = mcnemar_exact(&outcomes(b, c));
            assert!((got - exact).abs() <= 1e-12 * exact.max(1e-300), "({}, {}): {} vs {}", b, c, got, exact);
        }
    }
}

#[test]
fn mcnemar_is_symmetric_and_bounded() {
    let mut r = rng::stream(1, "test", &[]);
    for _ in 0..200 {
        let (b, c) = (r.gen_range(0..500u64), r.gen_range(0..500u64));
        let p = mcnemar_exact(&outcomes(b, c));
        assert_eq!(p, mcnemar_exact(&outcomes(c, b)));
        assert!(p > 0.0 && p <= 1.0);
    }
    assert_eq!(mcnemar_exact(&outcomes(7, 7)), 1.0);
}

fn planar(k: usize, seed: u64) -> (Vec<[f64; 2]>, Vec<f64>) {
    let mut r = rng::stream(seed, "test", &[]);
    let pts: Vec<[f64; 2]> = (0..k).map(|_| [r.gen_range(-5.0..5.0), r.gen_range(-5.0..5.0)]).collect();
    let d = (0..k * k)
        .map(|t| {
            let (a, b) = (pts[t / k], pts[t % k]);
            ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)).sqrt()
        })
        .collect();
    (pts, d)
}

#[test]
fn mds_recovers_planar_configurations() {
    for seed in 0..50 {
        for k in [3, 4, 7, 10] {
            let (_, d) = planar(k, seed * 100 + k as u64);
            let e = classical_mds(&d, k).unwrap();
            assert_eq!(e.dims, 2);
            assert!(e.stress < 1e-6);
            for i in 0..k {
                for j in 0..k {
                    assert!((e.distance(i, j) - d[i * k + j]).abs() < 1e-9);
                }
            }
        }
    }
}

#[test]
fn mds_of_non_euclidean_matrix_reports_stress() {
    // a 4-cycle with unit edges and long diagonals is not planar-embeddable
    let d = [0.0, 1.0, 3.0, 1.0, 1.0, 0.0, 1.0, 3.0, 3.0, 1.0, 0.0, 1.0, 1.0, 3.0, 1.0, 0.0];
    let e = classical_mds(&d, 4).unwrap();
    assert!(e.stress > 0.01);
}

fn noisy_pair(pool: usize, seed: u64) -> (Tensor, Tensor) {
    let mut r = rng::stream(seed, "test", &[]);
    let k = 6;
    let a: Vec<f64> = (0..pool * k).map(|_| r.gen_range(-1.0..1.0)).collect();
    let b: Vec<f64> = a.iter().map(|v| v + 0.8 * r.gen_range(-1.0..1.0)).collect();
    (Tensor::new(vec![pool, k], a).unwrap(), Tensor::new(vec![pool, k], b).unwrap())
}

fn spread(x: &[f64]) -> f64 {
    let m = x.iter().sum::<f64>() / x.len() as f64;
    x.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (x.len() - 1) as f64
}

#[test]
fn bootstrap_variance_shrinks_with_sample_size() {
    let (a, b) = noisy_pair(400, 3);
    let cfg = |size| BootstrapConfig {
        samples: 60,
        sample_size: size,
        metric: PairwiseMetric::Euclidean,
        method: RdmComparison::Correlation,
        with_replacement: false,
        seed: 0,
    };
    let small = bootstrap_rdm_distance(&a, &b, &cfg(10)).unwrap();
    let large = bootstrap_rdm_distance(&a, &b, &cfg(150)).unwrap();
    assert_eq!(small.distances.len(), 60);
    assert!(spread(&large.distances) < 0.5 * spread(&small.distances));
    let again = bootstrap_rdm_distance(&a, &b, &cfg(150)).unwrap();
    assert_eq!(large, again);
}

#[test]
fn bootstrap_distance_is_zero_against_itself() {
    let (a, _) = noisy_pair(50, 4);
    for method in [RdmComparison::Correlation, RdmComparison::NormalizedEuclidean] {
        let cfg = BootstrapConfig {
            samples: 5,
            sample_size: 20,
            metric: PairwiseMetric::MeanSquaredError,
            method,
            with_replacement: true,
            seed: 1,
        };
        let r = bootstrap_rdm_distance(&a, &a, &cfg).unwrap();
        assert!(r.mean.abs() < 1e-12);
    }
}
