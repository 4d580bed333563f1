use rand::seq::index;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng;

/// How many pairs to draw per mini-batch.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PairBudget {
    /// Fraction of the `n(n-1)/2` unordered pairs, rounded to nearest.
    Fraction(f64),
    /// Fixed number of unordered pairs, capped at `n(n-1)/2`.
    Count(usize),
}

impl PairBudget {
    pub fn pairs_for(self, n: usize) -> Result<usize> {
        let total = n * n.saturating_sub(1) / 2;
        let m = match self {
            PairBudget::Fraction(f) => {
                if !(f > 0.0 && f <= 1.0) {
                    return Err(Error::invalid(format!("pair fraction {} outside (0, 1]", f)));
                }
                (f * total as f64).round() as usize
            }
            PairBudget::Count(c) => c.min(total),
        };
        if m == 0 {
            return Err(Error::invalid(format!("{:?} selects no pairs for n = {}", self, n)));
        }
        Ok(m)
    }
}

/// Random subset of the unordered index pairs `(i, j)`, `i < j`, of a batch.
#[derive(Debug, Clone, PartialEq)]
pub struct PairSample {
    n: usize,
    pairs: Vec<(usize, usize)>,
}

impl PairSample {
    /// All `n(n-1)/2` pairs.
    pub fn full(n: usize) -> Self {
        let mut pairs = Vec::with_capacity(n * n.saturating_sub(1) / 2);
        for i in 0..n {
            for j in i + 1..n {
                pairs.push((i, j));
            }
        }
        PairSample { n, pairs }
    }

    /// Explicit pair list; duplicates, `i >= j` and out-of-range indices
    /// are rejected.
    pub fn from_pairs(n: usize, mut pairs: Vec<(usize, usize)>) -> Result<Self> {
        if pairs.is_empty() {
            return Err(Error::invalid("empty pair sample"));
        }
        if let Some(&(i, j)) = pairs.iter().find(|&&(i, j)| i >= j || j >= n) {
            return Err(Error::invalid(format!("invalid pair ({}, {}) for n = {}", i, j, n)));
        }
        pairs.sort_unstable();
        if pairs.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::invalid("duplicate pair in sample"));
        }
        Ok(PairSample { n, pairs })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn pairs(&self) -> &[(usize, usize)] {
        &self.pairs
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    pub fn fraction(&self) -> f64 {
        self.pairs.len() as f64 / (self.n * (self.n - 1) / 2) as f64
    }

    /// Number of pairs each input takes part in.
    pub fn degrees(&self) -> Vec<usize> {
        let mut deg = vec![0; self.n];
        for &(i, j) in &self.pairs {
            deg[i] += 1;
            deg[j] += 1;
        }
        deg
    }

    /// Number of distinct inputs appearing in any pair.
    pub fn distinct_inputs(&self) -> usize {
        self.degrees().iter().filter(|&&d| d > 0).count()
    }
}

/// Draws pairs uniformly without replacement; deterministic per seed.
pub fn sample_pairs(n: usize, budget: PairBudget, seed: u64) -> Result<PairSample> {
    if n < 2 {
        return Err(Error::invalid(format!("pair sampling needs n >= 2, got {}", n)));
    }
    let m = budget.pairs_for(n)?;
    let all = PairSample::full(n);
    let mut r = rng::stream(seed, "pairs", &[]);
    let mut chosen: Vec<(usize, usize)> = index::sample(&mut r, all.pairs.len(), m)
        .into_iter()
        .map(|t| all.pairs[t])
        .collect();
    chosen.sort_unstable();
    Ok(PairSample { n, pairs: chosen })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fraction_one_takes_every_pair() {
        let s = sample_pairs(7, PairBudget::Fraction(1.0), 3).unwrap();
        assert_eq!(s, PairSample::full(7));
        assert_eq!(s.len(), 21);
    }

    #[test]
    fn batch_of_hundred_at_five_percent() {
        let s = sample_pairs(100, PairBudget::Fraction(0.05), 0).unwrap();
        // round(0.05 * 4950) = round(247.5) = 248
        assert_eq!(s.len(), 248);
        let s = sample_pairs(100, PairBudget::Count(500), 0).unwrap();
        assert_eq!(s.len(), 500);
    }

    #[test]
    fn no_duplicates_and_valid_indices() {
        let s = sample_pairs(30, PairBudget::Fraction(0.3), 9).unwrap();
        let mut p = s.pairs().to_vec();
        p.dedup();
        assert_eq!(p.len(), s.len());
        assert!(s.pairs().iter().all(|&(i, j)| i < j && j < 30));
        assert_eq!(s.degrees().iter().sum::<usize>(), 2 * s.len());
    }

    #[test]
    fn deterministic_per_seed() {
        let a = sample_pairs(50, PairBudget::Fraction(0.1), 5).unwrap();
        let b = sample_pairs(50, PairBudget::Fraction(0.1), 5).unwrap();
        let c = sample_pairs(50, PairBudget::Fraction(0.1), 6).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
    }

    #[test]
    fn zero_pairs_is_an_error() {
        assert!(sample_pairs(3, PairBudget::Fraction(0.1), 0).is_err());
        assert!(sample_pairs(3, PairBudget::Fraction(0.0), 0).is_err());
        assert!(sample_pairs(3, PairBudget::Count(0), 0).is_err());
        assert!(sample_pairs(1, PairBudget::Fraction(1.0), 0).is_err());
    }

    #[test]
    fn tail_batch_uses_its_own_pair_count() {
        assert_eq!(PairBudget::Fraction(0.05).pairs_for(40).unwrap(), 39);
        assert_eq!(PairBudget::Count(500).pairs_for(20).unwrap(), 190);
    }

    #[test]
    fn explicit_pairs_validated() {
        assert!(PairSample::from_pairs(4, vec![(0, 1), (0, 1)]).is_err());
        assert!(PairSample::from_pairs(4, vec![(1, 0)]).is_err());
        assert!(PairSample::from_pairs(4, vec![(0, 4)]).is_err());
        assert!(PairSample::from_pairs(4, vec![]).is_err());
        let s = PairSample::from_pairs(4, vec![(2, 3), (0, 1)]).unwrap();
        assert_eq!(s.distinct_inputs(), 4);
    }

    #[test]
    fn inclusion_frequency_is_uniform() {
        // n = 6: 15 pairs, fraction 0.4 -> 6 pairs per draw.
        let trials = 20_000;
        let mut counts = [0usize; 15];
        let index_of = |i: usize, j: usize| i * 6 - i * (i + 1) / 2 + (j - i - 1);
        for seed in 0..trials {
            let s = sample_pairs(6, PairBudget::Fraction(0.4), seed).unwrap();
            for &(i, j) in s.pairs() {
                counts[index_of(i, j)] += 1;
            }
        }
        let p = 0.4;
        let sigma = (p * (1.0 - p) / trials as f64).sqrt();
        for (k, &c) in counts.iter().enumerate() {
            let freq = c as f64 / trials as f64;
            assert!((freq - p).abs() < 3.0 * sigma, "pair {} freq {}", k, freq);
        }
    }
}
