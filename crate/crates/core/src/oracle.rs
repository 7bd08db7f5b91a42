//! Brute-force reference computations for the test suites.
//!
//! Everything here trades speed for obviousness: plain enumeration and partial
//! sums with interval bounds. Nothing in this module shares code with the
//! production paths it is used to check.

use std::collections::BTreeMap;

/// Bracket for `sum_{x>=1} x^-alpha` from `terms` direct summands plus the
/// integral test: the true value lies in `[lo, hi]`.
pub fn power_sum_bracket(alpha: f64, terms: u64) -> (f64, f64) {
    assert!(alpha > 1.0, "needs alpha > 1 to converge");
    let mut partial = 0.0f64;
    // ascending magnitude to keep the f64 error small
    for x in (1..=terms).rev() {
        partial += (x as f64).powf(-alpha);
    }
    // integral test: int_{T+1}^inf <= tail <= int_T^inf
    let t = terms as f64;
    let lo = partial + (t + 1.0).powf(1.0 - alpha) / (alpha - 1.0);
    let hi = partial + t.powf(1.0 - alpha) / (alpha - 1.0);
    (lo, hi)
}

/// Probability that `ell` i.i.d. draws from `weights` (a finite law, atom ids
/// `1..=weights.len()`) occupy exactly `k` distinct atoms, by enumerating all
/// `m^ell` ordered tuples.
pub fn distinct_occupancy_brute(weights: &[f64], k: usize, ell: usize) -> f64 {
    let m = weights.len();
    assert!(k >= 1 && k <= ell);
    let mut total = 0.0f64;
    let mut tuple = vec![0usize; ell];
    loop {
        let mut seen = vec![false; m];
        let mut distinct = 0usize;
        let mut p = 1.0f64;
        for &i in &tuple {
            if !seen[i] {
                seen[i] = true;
                distinct += 1;
            }
            p *= weights[i];
        }
        if distinct == k {
            total += p;
        }
        // odometer increment
        let mut pos = 0;
        loop {
            if pos == ell {
                return total;
            }
            tuple[pos] += 1;
            if tuple[pos] < m {
                break;
            }
            tuple[pos] = 0;
            pos += 1;
        }
    }
}

/// Statistics of one fixed sample sequence, computed the naive way (no
/// streaming updates): distinct count, number of atoms seen exactly once, and
/// the out-degree histogram of the trace graph (an edge `seq[i] -> seq[i+1]`
/// for every consecutive pair; out-degree of `x` = number of distinct
/// successors over all its occurrences before the last position).
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub struct NaiveSeqStats {
    pub r_n: u64,
    pub r_n1: u64,
    pub out_degree_hist: BTreeMap<u64, u64>,
}

pub fn naive_seq_stats(seq: &[u64]) -> NaiveSeqStats {
    let mut counts: BTreeMap<u64, u64> = BTreeMap::new();
    for &x in seq {
        *counts.entry(x).or_insert(0) += 1;
    }
    let r_n = counts.len() as u64;
    let r_n1 = counts.values().filter(|&&c| c == 1).count() as u64;
    let mut successors: BTreeMap<u64, std::collections::BTreeSet<u64>> = BTreeMap::new();
    for w in seq.windows(2) {
        successors.entry(w[0]).or_default().insert(w[1]);
    }
    let mut out_degree_hist: BTreeMap<u64, u64> = BTreeMap::new();
    for set in successors.values() {
        *out_degree_hist.entry(set.len() as u64).or_insert(0) += 1;
    }
    NaiveSeqStats { r_n, r_n1, out_degree_hist }
}

/// Visit every length-`n` sequence over atoms `1..=m` together with its
/// probability under `weights`.
pub fn for_each_sequence<F: FnMut(&[u64], f64)>(weights: &[f64], n: usize, mut visit: F) {
    let m = weights.len();
    let mut seq = vec![1u64; n];
    loop {
        let p: f64 = seq.iter().map(|&x| weights[(x - 1) as usize]).product();
        visit(&seq, p);
        let mut pos = 0;
        loop {
            if pos == n {
                return;
            }
            seq[pos] += 1;
            if seq[pos] <= m as u64 {
                break;
            }
            seq[pos] = 1;
            pos += 1;
        }
    }
}

/// Exact `E R_n` for a finite law by exhaustive enumeration.
pub fn expected_range_brute(weights: &[f64], n: usize) -> f64 {
    let mut acc = 0.0;
    for_each_sequence(weights, n, |seq, p| {
        acc += p * naive_seq_stats(seq).r_n as f64;
    });
    acc
}

/// Exact mean and variance of `R_n` for a finite law by enumeration.
pub fn range_moments_brute(weights: &[f64], n: usize) -> (f64, f64) {
    let mut m1 = 0.0;
    let mut m2 = 0.0;
    for_each_sequence(weights, n, |seq, p| {
        let r = naive_seq_stats(seq).r_n as f64;
        m1 += p * r;
        m2 += p * r * r;
    });
    (m1, m2 - m1 * m1)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn power_sum_bracket_contains_zeta2() {
        let zeta2 = std::f64::consts::PI * std::f64::consts::PI / 6.0;
        let (lo, hi) = power_sum_bracket(2.0, 10_000_000);
        assert!(lo <= zeta2 && zeta2 <= hi, "bracket [{lo}, {hi}] misses {zeta2}");
        assert!(hi - lo < 1e-13);
    }

    #[test]
    fn occupancy_brute_two_fair_atoms() {
        // two draws from (1/2, 1/2): same atom w.p. 1/2, distinct w.p. 1/2
        let w = [0.5, 0.5];
        assert!((distinct_occupancy_brute(&w, 1, 2) - 0.5).abs() < 1e-15);
        assert!((distinct_occupancy_brute(&w, 2, 2) - 0.5).abs() < 1e-15);
    }

    #[test]
    fn expected_range_two_fair_atoms_n2() {
        let w = [0.5, 0.5];
        assert!((expected_range_brute(&w, 2) - 1.5).abs() < 1e-15);
        let (mean, var) = range_moments_brute(&w, 2);
        assert!((mean - 1.5).abs() < 1e-15);
        assert!((var - 0.25).abs() < 1e-15);
    }

    #[test]
    fn naive_stats_small_sequence() {
        // 1 -> 2 -> 1 -> 3: out-neighbors: 1 -> {2, 3}, 2 -> {1}
        let s = naive_seq_stats(&[1, 2, 1, 3]);
        assert_eq!(s.r_n, 3);
        assert_eq!(s.r_n1, 2);
        assert_eq!(s.out_degree_hist.get(&2), Some(&1));
        assert_eq!(s.out_degree_hist.get(&1), Some(&1));
    }
}
