//! Uniform selection of pairwise-disjoint spans.
//!
//! Every operation picks the positions it perturbs from an eligibility set of
//! spans (single words, adjacent pairs, or paraphrasable phrases). The picked
//! spans must not overlap. [`sample_disjoint`] draws `k` spans uniformly over
//! all `k`-subsets of pairwise-disjoint eligible spans, where `k` is the
//! requested count capped by the largest disjoint subset that exists.
//!
//! Counting runs right to left over spans sorted by start: `ways[i][j]` is the
//! number of disjoint `j`-subsets drawn from spans `i..`. Taking span `i`
//! forbids every span that starts before it ends, so the recursion is
//! `ways[i][j] = ways[i + 1][j] + ways[next(i)][j - 1]`.

use rand::Rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Span {
    pub start: usize,
    pub len: usize,
}

impl Span {
    pub fn end(&self) -> usize {
        self.start + self.len
    }
}

struct Counts {
    next: Vec<usize>,
    /// `ways[i * (limit + 1) + j]`
    ways: Vec<u128>,
    limit: usize,
}

impl Counts {
    fn new(spans: &[Span], limit: usize) -> Self {
        debug_assert!(spans.windows(2).all(|w| w[0] < w[1]), "spans sorted and unique");
        let m = spans.len();
        let next = spans
            .iter()
            .map(|s| spans.partition_point(|o| o.start < s.end()))
            .collect();
        let width = limit + 1;
        let mut counts = Counts {
            next,
            ways: vec![0; (m + 1) * width],
            limit,
        };
        counts.ways[m * width] = 1;
        for i in (0..m).rev() {
            counts.ways[i * width] = 1;
            for j in 1..=limit {
                let skip = counts.get(i + 1, j);
                let take = counts.get(counts.next[i], j - 1);
                counts.ways[i * width + j] = skip.saturating_add(take);
            }
        }
        counts
    }

    fn get(&self, i: usize, j: usize) -> u128 {
        self.ways[i * (self.limit + 1) + j]
    }
}

/// Largest number of pairwise-disjoint spans, capped at `limit`.
pub fn max_disjoint(spans: &[Span], limit: usize) -> usize {
    let counts = Counts::new(spans, limit);
    (0..=limit).rev().find(|&j| counts.get(0, j) > 0).unwrap_or(0)
}

/// Draws `min(n, max_disjoint)` pairwise-disjoint spans uniformly. `spans`
/// must be sorted and free of duplicates. Returned spans are in order.
pub fn sample_disjoint<R: Rng + ?Sized>(spans: &[Span], n: usize, rng: &mut R) -> Vec<Span> {
    let counts = Counts::new(spans, n);
    let mut j = (0..=n).rev().find(|&j| counts.get(0, j) > 0).unwrap_or(0);
    let mut chosen = Vec::with_capacity(j);
    let mut i = 0;
    while j > 0 {
        let total = counts.get(i, j);
        let take = counts.get(counts.next[i], j - 1);
        if rng.random_range(0..total) < take {
            chosen.push(spans[i]);
            i = counts.next[i];
            j -= 1;
        } else {
            i += 1;
        }
    }
    chosen
}

#[cfg(test)]
mod tests {
    use std::collections::HashMap;

    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use statrs::distribution::{ChiSquared, ContinuousCDF};

    use super::*;

    fn spans(list: &[(usize, usize)]) -> Vec<Span> {
        list.iter().map(|&(start, len)| Span { start, len }).collect()
    }

    /// Brute force: every subset of size k with no two overlapping spans.
    fn enumerate(spans: &[Span], k: usize) -> Vec<Vec<Span>> {
        let m = spans.len();
        let mut out = Vec::new();
        for mask in 0u32..(1 << m) {
            if mask.count_ones() as usize != k {
                continue;
            }
            let picked: Vec<Span> = (0..m).filter(|i| mask & (1 << i) != 0).map(|i| spans[i]).collect();
            let disjoint = picked.windows(2).all(|w| w[0].end() <= w[1].start);
            if disjoint {
                out.push(picked);
            }
        }
        out
    }

    #[test]
    fn path_of_four_words_allows_two_swaps() {
        let pairs = spans(&[(0, 2), (1, 2), (2, 2)]);
        assert_eq!(max_disjoint(&pairs, 4), 2);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..50 {
            let picked = sample_disjoint(&pairs, 4, &mut rng);
            assert_eq!(picked, spans(&[(0, 2), (2, 2)]));
        }
    }

    #[test]
    fn empty_and_zero() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        assert!(sample_disjoint(&[], 3, &mut rng).is_empty());
        assert!(sample_disjoint(&spans(&[(0, 1)]), 0, &mut rng).is_empty());
    }

    #[test]
    fn counts_match_enumeration() {
        let cases = [
            spans(&[(0, 2), (1, 2), (2, 2), (3, 2), (5, 2), (6, 2)]),
            spans(&[(0, 1), (0, 2), (1, 1), (1, 3), (3, 1), (4, 2)]),
            spans(&[(0, 1), (1, 1), (2, 1), (3, 1), (4, 1)]),
        ];
        for case in &cases {
            for k in 0..=4 {
                let expected = enumerate(case, k).len() as u128;
                assert_eq!(Counts::new(case, k).get(0, k), expected, "{case:?} k={k}");
            }
        }
    }

    #[test]
    fn draws_are_uniform_over_disjoint_subsets() {
        let case = spans(&[(0, 1), (0, 2), (1, 1), (1, 3), (3, 1), (4, 2), (5, 1)]);
        let k = 2;
        let support = enumerate(&case, k);
        let mut freq: HashMap<Vec<Span>, usize> = HashMap::new();
        let trials = 60_000;
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..trials {
            *freq.entry(sample_disjoint(&case, k, &mut rng)).or_default() += 1;
        }
        assert_eq!(freq.len(), support.len());
        let expected = trials as f64 / support.len() as f64;
        let chi2: f64 = support
            .iter()
            .map(|s| {
                let o = *freq.get(s).unwrap_or(&0) as f64;
                (o - expected).powi(2) / expected
            })
            .sum();
        let critical = ChiSquared::new((support.len() - 1) as f64)
            .unwrap()
            .inverse_cdf(0.99);
        assert!(chi2 < critical, "chi2 {chi2} >= {critical}");
    }
}
