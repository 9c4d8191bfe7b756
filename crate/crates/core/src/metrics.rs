//! Pair-counting agreement between two labelings: Rand index, adjusted Rand
//! index (Hubert–Arabie) and pairwise F-score.
//!
//! Labels are arbitrary integers; only co-membership matters. The first
//! argument is the reference partition where it matters (F-score).

use std::collections::HashMap;

use serde::Serialize;

use crate::{PavaError, Result};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ContingencyTable {
    /// `counts[i][j]`: objects in class `i` of the first and `j` of the second.
    pub counts: Vec<Vec<u64>>,
    pub row_sums: Vec<u64>,
    pub col_sums: Vec<u64>,
    pub n: u64,
}

fn dense_ids(labels: &[usize]) -> (Vec<usize>, usize) {
    let mut seen = HashMap::new();
    let ids = labels
        .iter()
        .map(|l| {
            let next = seen.len();
            *seen.entry(*l).or_insert(next)
        })
        .collect();
    (ids, seen.len())
}

impl ContingencyTable {
    pub fn new(a: &[usize], b: &[usize]) -> Result<Self> {
        if a.len() != b.len() {
            return Err(PavaError::LengthMismatch(a.len(), b.len()));
        }
        let (ra, ma) = dense_ids(a);
        let (rb, mb) = dense_ids(b);
        let mut counts = vec![vec![0u64; mb]; ma];
        for (&i, &j) in ra.iter().zip(&rb) {
            counts[i][j] += 1;
        }
        let row_sums = counts.iter().map(|r| r.iter().sum()).collect();
        let col_sums = (0..mb).map(|j| counts.iter().map(|r| r[j]).sum()).collect();
        Ok(ContingencyTable {
            counts,
            row_sums,
            col_sums,
            n: a.len() as u64,
        })
    }

    pub fn pairs(&self) -> PairCounts {
        let within = |v: u64| v * v.saturating_sub(1) / 2;
        let both: u64 = self.counts.iter().flatten().map(|&c| within(c)).sum();
        let first: u64 = self.row_sums.iter().map(|&c| within(c)).sum();
        let second: u64 = self.col_sums.iter().map(|&c| within(c)).sum();
        let total = within(self.n);
        PairCounts {
            same_both: both,
            same_first_only: first - both,
            same_second_only: second - both,
            different_both: total + both - first - second,
        }
    }
}

/// Object pairs classified by co-membership in each partition.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct PairCounts {
    pub same_both: u64,
    pub same_first_only: u64,
    pub same_second_only: u64,
    pub different_both: u64,
}

impl PairCounts {
    pub fn total(&self) -> u64 {
        self.same_both + self.same_first_only + self.same_second_only + self.different_both
    }
}

pub fn rand_index(a: &[usize], b: &[usize]) -> Result<f64> {
    let p = ContingencyTable::new(a, b)?.pairs();
    if p.total() == 0 {
        return Ok(1.0);
    }
    Ok((p.same_both + p.different_both) as f64 / p.total() as f64)
}

/// Equals 1 for identical partitions and is 0 in expectation under random
/// labeling. When the chance-corrected denominator vanishes the value is 1 for
/// identical partitions and 0 otherwise.
pub fn adjusted_rand_index(a: &[usize], b: &[usize]) -> Result<f64> {
    let p = ContingencyTable::new(a, b)?.pairs();
    let total = p.total() as f64;
    let both = p.same_both as f64;
    let first = (p.same_both + p.same_first_only) as f64;
    let second = (p.same_both + p.same_second_only) as f64;
    let expected = if total > 0.0 {
        first * second / total
    } else {
        0.0
    };
    let denom = 0.5 * (first + second) - expected;
    if denom == 0.0 {
        let identical = p.same_first_only == 0 && p.same_second_only == 0;
        return Ok(if identical { 1.0 } else { 0.0 });
    }
    Ok((both - expected) / denom)
}

/// `2·TP / (2·TP + FP + FN)` over same-cluster pairs, with `a` as the truth.
/// Neither partition having a same-cluster pair counts as full agreement.
pub fn pairwise_f_score(a: &[usize], b: &[usize]) -> Result<f64> {
    let p = ContingencyTable::new(a, b)?.pairs();
    let tp = p.same_both as f64;
    let denom = 2.0 * tp + (p.same_second_only + p.same_first_only) as f64;
    if denom == 0.0 {
        return Ok(1.0);
    }
    Ok(2.0 * tp / denom)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Scores {
    pub ri: f64,
    pub ari: f64,
    pub fs: f64,
}

pub fn score_all(truth: &[usize], pred: &[usize]) -> Result<Scores> {
    Ok(Scores {
        ri: rand_index(truth, pred)?,
        ari: adjusted_rand_index(truth, pred)?,
        fs: pairwise_f_score(truth, pred)?,
    })
}
