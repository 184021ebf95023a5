//! Permutation schemes used to disrupt one feature column at a time.
//!
//! The optimal scheme shifts *ranks* cyclically by ⌊n/2⌋, which maximizes the
//! minimum circular displacement between a value's rank and its replacement's
//! rank — every entry moves as far as possible in rank space. The index-shift
//! scheme applies the same cyclic shift to row positions instead (linear
//! time, no sort; identical on pre-sorted columns). Random permutations are
//! seeded Fisher–Yates shuffles for the classical baseline.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

/// How a [`Permutation`] was constructed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum PermKind {
    OptimalRankShift,
    IndexShift,
    Random,
}

/// An explicit bijection on `{0..n−1}` with provenance.
#[derive(Debug, Clone, serde::Serialize)]
pub struct Permutation {
    /// `mapping[j]` is the image of index `j`.
    pub mapping: Vec<usize>,
    pub kind: PermKind,
    /// Seed used for `Random` permutations; `None` for deterministic kinds.
    pub seed: Option<u64>,
}

impl Permutation {
    /// Build after checking that `mapping` is a bijection on `{0..n−1}`.
    pub fn new(mapping: Vec<usize>, kind: PermKind, seed: Option<u64>) -> Result<Self> {
        let n = mapping.len();
        let mut seen = vec![false; n];
        for &img in &mapping {
            if img >= n || seen[img] {
                return Err(Error::InvalidArgument(
                    "mapping is not a bijection on {0..n-1}".into(),
                ));
            }
            seen[img] = true;
        }
        Ok(Self {
            mapping,
            kind,
            seed,
        })
    }

    pub fn n(&self) -> usize {
        self.mapping.len()
    }
}

/// The cyclic shift by k = ⌊n/2⌋: `mapping[j] = (j + ⌊n/2⌋) mod n`. Among all
/// permutations of `{0..n−1}` this maximizes the minimum circular
/// displacement, and does so evenly — every index moves by exactly ⌊n/2⌋.
pub fn cyclic_shift(n: usize) -> Result<Permutation> {
    if n < 2 {
        return Err(Error::InvalidArgument(format!(
            "cyclic_shift: need n ≥ 2, got {n}"
        )));
    }
    let k = n / 2;
    let mapping = (0..n).map(|j| (j + k) % n).collect();
    Permutation::new(mapping, PermKind::OptimalRankShift, None)
}

/// Distance between `a` and `b` around an n-cycle: `min(|a−b|, n−|a−b|)`.
pub fn circular_displacement(a: usize, b: usize, n: usize) -> Result<usize> {
    if a >= n || b >= n {
        return Err(Error::InvalidArgument(format!(
            "circular_displacement: indices ({a}, {b}) out of range for n={n}"
        )));
    }
    let diff = a.abs_diff(b);
    Ok(diff.min(n - diff))
}

/// Minimum over all indices of the circular displacement `d(j, mapping[j])`.
/// Requires `perm.n() == n`.
pub fn min_displacement(perm: &Permutation, n: usize) -> Result<usize> {
    if perm.n() != n {
        return Err(Error::ShapeMismatch(format!(
            "min_displacement: permutation of length {} vs n={n}",
            perm.n()
        )));
    }
    let mut best = n; // larger than any displacement
    for (j, &img) in perm.mapping.iter().enumerate() {
        best = best.min(circular_displacement(j, img, n)?);
    }
    Ok(best)
}

/// Stable ascending ranks (ties broken by original index) and the inverse
/// order array; `order[r]` is the index of the value holding rank `r`.
fn stable_ranks(column: &[f64]) -> (Vec<usize>, Vec<usize>) {
    let n = column.len();
    let mut order: Vec<usize> = (0..n).collect();
    // Stable sort: equal values keep their original relative order, which is
    // what makes the rank shift deterministic on ties.
    order.sort_by(|&i, &j| column[i].partial_cmp(&column[j]).expect("finite values"));
    let mut rank = vec![0usize; n];
    for (r, &i) in order.iter().enumerate() {
        rank[i] = r;
    }
    (rank, order)
}

/// Replace each value by the value whose rank sits ⌊n/2⌋ further along the
/// rank cycle. Preserves the column's multiset of values.
pub fn apply_rank_shift(column: &[f64]) -> Vec<f64> {
    let n = column.len();
    if n < 2 {
        return column.to_vec();
    }
    let k = n / 2;
    let (rank, order) = stable_ranks(column);
    (0..n)
        .map(|i| column[order[(rank[i] + k) % n]])
        .collect()
}

/// Linear-time approximation: shift row positions instead of ranks,
/// `out[i] = column[(i + ⌊n/2⌋) mod n]`. Coincides with [`apply_rank_shift`]
/// on columns already sorted ascending.
pub fn apply_index_shift(column: &[f64]) -> Vec<f64> {
    let n = column.len();
    if n < 2 {
        return column.to_vec();
    }
    let k = n / 2;
    (0..n).map(|i| column[(i + k) % n]).collect()
}

/// Uniform random permutation of the column via a seeded Fisher–Yates
/// shuffle; identical seeds give identical output.
pub fn apply_random(column: &[f64], seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = column.to_vec();
    out.shuffle(&mut rng);
    out
}

/// Shuffle a slice in place with an existing generator (used for keyed
/// per-(feature, repetition) streams).
pub fn shuffle_with<T>(values: &mut [T], rng: &mut ChaCha8Rng) {
    values.shuffle(rng);
}

/// A generator whose stream is keyed by `(feature, repetition)` on top of a
/// base seed, so per-feature work can run in parallel without any thread
/// count or scheduling order changing the draws.
pub fn keyed_rng(seed: u64, feature: usize, repetition: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(((feature as u64) << 32) | repetition as u64);
    rng
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cyclic_shift_small_cases() {
        assert_eq!(cyclic_shift(5).unwrap().mapping, vec![2, 3, 4, 0, 1]);
        assert_eq!(cyclic_shift(2).unwrap().mapping, vec![1, 0]);
        assert_eq!(cyclic_shift(4).unwrap().mapping, vec![2, 3, 0, 1]);
        assert!(cyclic_shift(1).is_err());
    }

    #[test]
    fn displacement_basics() {
        assert_eq!(circular_displacement(3, 0, 5).unwrap(), 2);
        assert_eq!(circular_displacement(4, 4, 9).unwrap(), 0);
        assert_eq!(circular_displacement(0, 2, 4).unwrap(), 2);
        assert!(circular_displacement(5, 0, 5).is_err());
    }

    #[test]
    fn min_displacement_of_cyclic_and_identity() {
        let c5 = cyclic_shift(5).unwrap();
        assert_eq!(min_displacement(&c5, 5).unwrap(), 2);
        let id6 = Permutation::new((0..6).collect(), PermKind::IndexShift, None).unwrap();
        assert_eq!(min_displacement(&id6, 6).unwrap(), 0);
    }

    #[test]
    fn exhaustive_n4_maximum() {
        // Enumerate all 24 permutations of {0..3}; the best achievable
        // minimum displacement is 2, attained by the cyclic shift [2,3,0,1].
        let mut best = 0;
        let mut argbest = Vec::new();
        let idx = [0usize, 1, 2, 3];
        for a in idx {
            for b in idx {
                for c in idx {
                    for d in idx {
                        let mapping = vec![a, b, c, d];
                        if Permutation::new(mapping.clone(), PermKind::Random, None).is_err() {
                            continue;
                        }
                        let p = Permutation::new(mapping.clone(), PermKind::Random, None).unwrap();
                        let m = min_displacement(&p, 4).unwrap();
                        if m > best {
                            best = m;
                            argbest = mapping;
                        }
                    }
                }
            }
        }
        assert_eq!(best, 2);
        assert_eq!(argbest, vec![2, 3, 0, 1]);
    }

    #[test]
    fn full_reversal_has_fixed_point_for_odd_n() {
        // π(j) = n−1−j leaves the middle index fixed when n is odd, so its
        // minimum displacement collapses to 0 — reversal is not optimal.
        for n in [3usize, 5, 7, 9] {
            let rev = Permutation::new((0..n).rev().collect(), PermKind::Random, None).unwrap();
            assert_eq!(min_displacement(&rev, n).unwrap(), 0);
        }
    }

    #[test]
    fn rank_shift_hand_oracle() {
        // Ranks of [10,40,20,30] are [0,3,1,2]; shifting each rank by 2 mod 4
        // replaces 10→30, 40→20, 20→40, 30→10.
        assert_eq!(
            apply_rank_shift(&[10.0, 40.0, 20.0, 30.0]),
            vec![30.0, 20.0, 40.0, 10.0]
        );
        // On a sorted column ranks equal indices: shift by 3.
        assert_eq!(
            apply_rank_shift(&[1.0, 2.0, 3.0, 4.0, 5.0, 6.0]),
            vec![4.0, 5.0, 6.0, 1.0, 2.0, 3.0]
        );
    }

    #[test]
    fn rank_shift_constant_column_unchanged() {
        assert_eq!(
            apply_rank_shift(&[5.0, 5.0, 5.0, 5.0]),
            vec![5.0, 5.0, 5.0, 5.0]
        );
    }

    #[test]
    fn rank_shift_naive_reference() {
        // Independent re-implementation: sort (value, index) pairs, look up
        // each row's sorted position, then take the value ⌊n/2⌋ further on.
        fn naive(column: &[f64]) -> Vec<f64> {
            let n = column.len();
            let mut pairs: Vec<(f64, usize)> = column.iter().cloned().zip(0..n).collect();
            pairs.sort_by(|x, y| x.partial_cmp(y).unwrap());
            let mut out = vec![0.0; n];
            for i in 0..n {
                let r = pairs.iter().position(|&(_, idx)| idx == i).unwrap();
                out[i] = pairs[(r + n / 2) % n].0;
            }
            out
        }
        let cols: Vec<Vec<f64>> = vec![
            vec![0.3, -1.0, 2.5, 2.5, 0.3, 7.0],
            vec![9.0, 8.0, 7.0, 6.0, 5.0],
            vec![1.0, 1.0],
            (0..37).map(|i| ((i * 7919) % 101) as f64).collect(),
        ];
        for col in cols {
            assert_eq!(apply_rank_shift(&col), naive(&col));
        }
    }

    #[test]
    fn index_shift_definition() {
        let col = [1.0, 2.0, 3.0, 4.0, 5.0];
        assert_eq!(
            apply_index_shift(&col),
            vec![3.0, 4.0, 5.0, 1.0, 2.0]
        );
        assert_eq!(apply_index_shift(&[7.0, 9.0]), vec![9.0, 7.0]);
    }

    #[test]
    fn index_shift_equals_rank_shift_on_sorted_input() {
        let sorted: Vec<f64> = (0..11).map(|i| i as f64 * 1.5 - 3.0).collect();
        assert_eq!(apply_index_shift(&sorted), apply_rank_shift(&sorted));
    }

    #[test]
    fn random_permutation_determinism_and_multiset() {
        let col = [0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7];
        let a = apply_random(&col, 42);
        let b = apply_random(&col, 42);
        assert_eq!(a, b);
        let mut sorted = a.clone();
        sorted.sort_by(|x, y| x.partial_cmp(y).unwrap());
        assert_eq!(sorted, col.to_vec());
        assert_ne!(apply_random(&col, 43), a);
    }

    #[test]
    fn random_permutation_uniformity() {
        // Over 24 000 seeds at n=4, each of the 24 permutations should
        // appear with frequency 1/24 ± 0.01.
        let base = [0.0, 1.0, 2.0, 3.0];
        let mut counts = std::collections::HashMap::new();
        let draws = 24_000usize;
        for seed in 0..draws as u64 {
            let perm = apply_random(&base, seed);
            let key: Vec<u8> = perm.iter().map(|v| *v as u8).collect();
            *counts.entry(key).or_insert(0usize) += 1;
        }
        assert_eq!(counts.len(), 24);
        for (key, count) in counts {
            let freq = count as f64 / draws as f64;
            assert!(
                (freq - 1.0 / 24.0).abs() < 0.01,
                "permutation {key:?} frequency {freq}"
            );
        }
    }

    #[test]
    fn keyed_streams_are_distinct_and_stable() {
        let col: Vec<f64> = (0..50).map(|i| i as f64).collect();
        let mut a = col.clone();
        shuffle_with(&mut a, &mut keyed_rng(7, 3, 1));
        let mut a2 = col.clone();
        shuffle_with(&mut a2, &mut keyed_rng(7, 3, 1));
        assert_eq!(a, a2);
        let mut b = col.clone();
        shuffle_with(&mut b, &mut keyed_rng(7, 4, 1));
        let mut c = col.clone();
        shuffle_with(&mut c, &mut keyed_rng(7, 3, 2));
        assert_ne!(a, b);
        assert_ne!(a, c);
    }

    #[test]
    fn permutation_rejects_non_bijections() {
        assert!(Permutation::new(vec![0, 0, 1], PermKind::Random, None).is_err());
        assert!(Permutation::new(vec![0, 3], PermKind::Random, None).is_err());
    }
}
