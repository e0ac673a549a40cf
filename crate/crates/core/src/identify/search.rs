//! Tri-partition search over variable rows.
//!
//! All row-set conditions used by the checkers are monotone: if a row set
//! satisfies one, so does every superset. The exhaustive search exploits
//! this by pruning any first block whose complement already fails.

use std::collections::HashMap;

use rand::seq::SliceRandom;
use rand::Rng;

use crate::matrix::BinaryMatrix;
use crate::rngs::substream;

/// Largest p searched exhaustively over all 3^p assignments.
pub const EXHAUSTIVE_MAX_ROWS: usize = 15;

/// Limits on partition searches.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SearchBudget {
    /// Maximum number of candidate evaluations before giving up.
    pub max_evaluations: u64,
    /// Greedy random restarts used when p exceeds [`EXHAUSTIVE_MAX_ROWS`].
    pub restarts: usize,
    /// Largest number of 1→0 flips tried per block by the generic checker.
    pub max_flips: usize,
    pub seed: u64,
}

impl Default for SearchBudget {
    fn default() -> Self {
        Self {
            max_evaluations: 200_000_000,
            restarts: 1000,
            max_flips: 3,
            seed: 0,
        }
    }
}

/// True iff no two columns are equal.
pub fn has_distinct_columns(m: &BinaryMatrix) -> bool {
    let mut seen = std::collections::HashSet::with_capacity(m.cols());
    (0..m.cols()).all(|h| seen.insert(m.column(h)))
}

/// Bit-packed row codes of each column, for p ≤ 64.
pub(crate) fn column_codes(m: &BinaryMatrix) -> Vec<u64> {
    (0..m.cols())
        .map(|h| {
            (0..m.rows())
                .filter(|&r| m.get(r, h))
                .fold(0u64, |acc, r| acc | (1 << r))
        })
        .collect()
}

pub(crate) fn codes_distinct(codes: &[u64], mask: u64, scratch: &mut Vec<u64>) -> bool {
    scratch.clear();
    scratch.extend(codes.iter().map(|c| c & mask));
    scratch.sort_unstable();
    scratch.windows(2).all(|w| w[0] != w[1])
}

pub(crate) fn mask_to_rows(mask: u64) -> Vec<usize> {
    (0..64).filter(|r| mask & (1 << r) != 0).collect()
}

pub(crate) enum SearchResult {
    Found([u64; 3]),
    Exhausted,
    OutOfBudget,
}

/// Exhaustive search for disjoint `(A1, A2, A3)` covering all `p` rows with
/// `first(A1)`, `first(A2)` and `third(A3)` true. Both predicates must be
/// monotone under row-set inclusion.
pub(crate) fn exhaustive_partition(
    p: usize,
    budget: u64,
    mut first: impl FnMut(u64) -> bool,
    mut third: impl FnMut(u64) -> bool,
) -> SearchResult {
    debug_assert!(p <= EXHAUSTIVE_MAX_ROWS);
    let full: u64 = (1 << p) - 1;
    let mut evals = 0u64;
    for a1 in 1..full {
        let rest = full ^ a1;
        evals += 1;
        if evals > budget {
            return SearchResult::OutOfBudget;
        }
        if !first(a1) || !first(rest) || !third(rest) {
            continue;
        }
        // non-empty proper submasks of `rest`
        let mut a2 = (rest - 1) & rest;
        while a2 != 0 {
            let a3 = rest ^ a2;
            evals += 1;
            if evals > budget {
                return SearchResult::OutOfBudget;
            }
            if a3 != 0 && first(a2) && third(a3) {
                return SearchResult::Found([a1, a2, a3]);
            }
            a2 = (a2 - 1) & rest;
        }
    }
    SearchResult::Exhausted
}

/// Memoized monotone predicate over row masks.
pub(crate) struct Memo<F> {
    f: F,
    cache: HashMap<u64, bool>,
}

impl<F: FnMut(u64) -> bool> Memo<F> {
    pub(crate) fn new(f: F) -> Self {
        Self {
            f,
            cache: HashMap::new(),
        }
    }

    pub(crate) fn get(&mut self, mask: u64) -> bool {
        if let Some(&v) = self.cache.get(&mask) {
            return v;
        }
        let v = (self.f)(mask);
        self.cache.insert(mask, v);
        v
    }
}

/// Per-part deficiency used by the greedy search; zero means satisfied.
pub(crate) trait PartScore {
    /// Deficiency of the part after adding `row` to the rows in `part`.
    fn deficiency_with(&self, part: &[usize], row: Option<usize>) -> usize;
}

/// Number of duplicated columns (k minus distinct columns) of `S_{A,·}`.
pub(crate) struct DuplicateColumns<'a> {
    pub(crate) s: &'a BinaryMatrix,
    pub(crate) zobrist: Vec<u64>,
}

impl<'a> DuplicateColumns<'a> {
    pub(crate) fn new(s: &'a BinaryMatrix, seed: u64) -> Self {
        let mut rng = substream(seed, &[0x5a0b]);
        let zobrist = (0..s.rows()).map(|_| rng.random()).collect();
        Self { s, zobrist }
    }
}

impl PartScore for DuplicateColumns<'_> {
    fn deficiency_with(&self, part: &[usize], row: Option<usize>) -> usize {
        let mut keys: Vec<u64> = (0..self.s.cols())
            .map(|h| {
                part.iter()
                    .chain(row.iter())
                    .filter(|&&r| self.s.get(r, h))
                    .fold(0u64, |acc, &r| acc ^ self.zobrist[r])
            })
            .collect();
        keys.sort_unstable();
        keys.dedup();
        self.s.cols() - keys.len()
    }
}

/// Randomized greedy assignment of rows to three parts: rows are visited in
/// a random order and each joins the part whose deficiency it reduces most
/// (ties go to the smaller part, then at random). Returns the first
/// assignment whose three parts all have zero deficiency.
pub(crate) fn greedy_partition(
    p: usize,
    scores: [&dyn PartScore; 3],
    restarts: usize,
    seed: u64,
    mut accept: impl FnMut(&[Vec<usize>; 3]) -> bool,
) -> Option<[Vec<usize>; 3]> {
    for restart in 0..restarts {
        let mut rng = substream(seed, &[0x67d, restart as u64]);
        let mut order: Vec<usize> = (0..p).collect();
        order.shuffle(&mut rng);
        let mut parts: [Vec<usize>; 3] = Default::default();
        for &r in &order {
            let mut best: Option<(i64, usize, u32, usize)> = None;
            for (i, score) in scores.iter().enumerate() {
                let before = score.deficiency_with(&parts[i], None) as i64;
                let after = score.deficiency_with(&parts[i], Some(r)) as i64;
                let cand = (after - before, parts[i].len(), rng.random::<u32>(), i);
                if best.is_none_or(|b| (cand.0, cand.1, cand.2) < (b.0, b.1, b.2)) {
                    best = Some(cand);
                }
            }
            let target = best.map(|b| b.3).unwrap_or(0);
            parts[target].push(r);
        }
        for part in parts.iter_mut() {
            part.sort_unstable();
        }
        let done = scores
            .iter()
            .zip(&parts)
            .all(|(s, part)| !part.is_empty() && s.deficiency_with(part, None) == 0);
        if done && accept(&parts) {
            return Some(parts);
        }
    }
    None
}
