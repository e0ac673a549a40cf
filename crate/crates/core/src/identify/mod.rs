//! Identifiability checkers for constrained latent class models and
//! multilayer pyramids, plus the Khatri-Rao rank oracle.
//!
//! Every checker returns `strict`, `generic` or `undetermined`. The
//! conditions checked are sufficient only, so no checker ever reports that a
//! model is not identifiable.

mod kr;
mod search;

use std::collections::BTreeMap;

use nalgebra::DMatrix;
use serde::Serialize;

use crate::error::{input, Result};
use crate::lcm::{constraint_matrix_from_graph, ConstraintMatrix, GraphicalMatrix, LcmParams};
use crate::matrix::BinaryMatrix;

pub use kr::{
    khatri_rao, kr_rank_oracle, numerical_rank, random_constrained_lambdas, RankOutcome,
    RankReport, RANK_ORACLE_MAX_COLS,
};
pub use search::{has_distinct_columns, SearchBudget, EXHAUSTIVE_MAX_ROWS};

use search::{
    codes_distinct, column_codes, exhaustive_partition, greedy_partition, mask_to_rows,
    DuplicateColumns, Memo, PartScore, SearchResult,
};

/// Two Λ entries closer than this are treated as equal.
pub const SEPARATION_TOL: f64 = 1e-9;
/// Best separations below this (but above [`SEPARATION_TOL`]) are reported.
pub const NEAR_TIE_TOL: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum IdStatus {
    Strict,
    Generic,
    Undetermined,
}

/// Row tri-partition (0-based indices, each part sorted) plus the 1→0 entry
/// flips `(row, column)` applied by the generic checker.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Witness {
    pub parts: [Vec<usize>; 3],
    pub flips: Vec<(usize, usize)>,
}

impl Witness {
    fn from_masks(masks: [u64; 3]) -> Self {
        Self {
            parts: masks.map(mask_to_rows),
            flips: Vec::new(),
        }
    }

    /// True iff the parts are disjoint and cover `0..p`.
    pub fn is_partition_of(&self, p: usize) -> bool {
        let mut seen = vec![false; p];
        for &r in self.parts.iter().flatten() {
            if r >= p || seen[r] {
                return false;
            }
            seen[r] = true;
        }
        seen.into_iter().all(|s| s)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IdVerdict {
    pub status: IdStatus,
    pub witness: Option<Witness>,
    pub diagnostics: Vec<String>,
}

impl IdVerdict {
    fn found(status: IdStatus, witness: Witness, diagnostics: Vec<String>) -> Self {
        Self {
            status,
            witness: Some(witness),
            diagnostics,
        }
    }

    fn undetermined(diagnostics: Vec<String>) -> Self {
        Self {
            status: IdStatus::Undetermined,
            witness: None,
            diagnostics,
        }
    }
}

/// Generic tri-partition search. `first` must hold on A1 and A2, `third` on
/// A3; both are monotone. `scores` drive the greedy fallback.
fn find_partition(
    p: usize,
    budget: &SearchBudget,
    first: impl FnMut(u64) -> bool,
    third: impl FnMut(u64) -> bool,
    scores: [&dyn PartScore; 3],
    verify: impl FnMut(&[Vec<usize>; 3]) -> bool,
    diagnostics: &mut Vec<String>,
) -> Option<Witness> {
    if p < 3 {
        diagnostics.push(format!("only {p} rows; a tri-partition needs at least 3"));
        return None;
    }
    if p <= EXHAUSTIVE_MAX_ROWS {
        let mut first = Memo::new(first);
        let mut third = Memo::new(third);
        match exhaustive_partition(
            p,
            budget.max_evaluations,
            |m| first.get(m),
            |m| third.get(m),
        ) {
            SearchResult::Found(masks) => Some(Witness::from_masks(masks)),
            SearchResult::Exhausted => {
                diagnostics.push("exhaustive search: no valid tri-partition exists".into());
                None
            }
            SearchResult::OutOfBudget => {
                diagnostics.push(format!(
                    "search budget of {} evaluations exhausted",
                    budget.max_evaluations
                ));
                None
            }
        }
    } else {
        let found = greedy_partition(p, scores, budget.restarts, budget.seed, verify);
        if found.is_none() {
            diagnostics.push(format!(
                "greedy search found no tri-partition in {} restarts",
                budget.restarts
            ));
        }
        found.map(|parts| Witness {
            parts,
            flips: Vec::new(),
        })
    }
}

/// Rows of `s` as a 0..p mask-friendly check: distinct columns of `S_{A,·}`.
fn distinct_rows(s: &BinaryMatrix, rows: &[usize]) -> bool {
    has_distinct_columns(&s.select_rows(rows))
}

fn codes_predicate(s: &BinaryMatrix) -> impl FnMut(u64) -> bool {
    let codes = if s.rows() <= 64 {
        column_codes(s)
    } else {
        Vec::new()
    };
    let mut scratch = Vec::new();
    move |mask| codes_distinct(&codes, mask, &mut scratch)
}

/// Searches for a row tri-partition with every `S_{A_i,·}` having distinct
/// columns.
pub fn check_strict_corollary(s: &ConstraintMatrix, budget: &SearchBudget) -> IdVerdict {
    let m = s.matrix();
    let mut diagnostics = Vec::new();
    let score = DuplicateColumns::new(m, budget.seed);
    let found = find_partition(
        m.rows(),
        budget,
        codes_predicate(m),
        codes_predicate(m),
        [&score, &score, &score],
        |parts| parts.iter().all(|part| distinct_rows(m, part)),
        &mut diagnostics,
    );
    match found {
        Some(w) => IdVerdict::found(IdStatus::Strict, w, diagnostics),
        None => IdVerdict::undetermined(diagnostics),
    }
}

/// Pairs `(h1, h2)` of classes separated by each row's Λ.
struct PairSeparation {
    k: usize,
    words: usize,
    bits: Vec<Vec<u64>>,
    /// Largest entrywise gap per row and pair.
    gaps: Vec<Vec<f64>>,
}

impl PairSeparation {
    fn new(lambdas: &[DMatrix<f64>]) -> Self {
        let k = lambdas.first().map_or(0, |l| l.ncols());
        let npairs = k * k.saturating_sub(1) / 2;
        let words = npairs.div_ceil(64);
        let mut bits = Vec::with_capacity(lambdas.len());
        let mut gaps = Vec::with_capacity(lambdas.len());
        for lam in lambdas {
            let mut row_bits = vec![0u64; words];
            let mut row_gaps = vec![0.0; npairs];
            let mut idx = 0;
            for h1 in 0..k {
                for h2 in (h1 + 1)..k {
                    let gap = (0..lam.nrows())
                        .map(|c| (lam[(c, h1)] - lam[(c, h2)]).abs())
                        .fold(0.0, f64::max);
                    row_gaps[idx] = gap;
                    if gap > SEPARATION_TOL {
                        row_bits[idx / 64] |= 1 << (idx % 64);
                    }
                    idx += 1;
                }
            }
            bits.push(row_bits);
            gaps.push(row_gaps);
        }
        Self {
            k,
            words,
            bits,
            gaps,
        }
    }

    fn npairs(&self) -> usize {
        self.k * self.k.saturating_sub(1) / 2
    }

    fn unseparated<'a>(&self, rows: impl Iterator<Item = &'a usize>) -> usize {
        let mut acc = vec![0u64; self.words];
        for &r in rows {
            for (a, b) in acc.iter_mut().zip(&self.bits[r]) {
                *a |= b;
            }
        }
        self.npairs() - acc.iter().map(|w| w.count_ones() as usize).sum::<usize>()
    }

    fn pair_of(&self, mut idx: usize) -> (usize, usize) {
        for h1 in 0..self.k {
            let span = self.k - h1 - 1;
            if idx < span {
                return (h1, h1 + 1 + idx);
            }
            idx -= span;
        }
        unreachable!("pair index out of range")
    }

    fn near_ties(&self, rows: &[usize]) -> Vec<String> {
        (0..self.npairs())
            .filter_map(|idx| {
                let best = rows
                    .iter()
                    .map(|&r| self.gaps[r][idx])
                    .fold(0.0, f64::max);
                (best > SEPARATION_TOL && best <= NEAR_TIE_TOL).then(|| {
                    let (h1, h2) = self.pair_of(idx);
                    format!(
                        "near-tie: classes {} and {} separated in A3 only by {best:.3e}",
                        h1 + 1,
                        h2 + 1
                    )
                })
            })
            .collect()
    }
}

impl PartScore for PairSeparation {
    fn deficiency_with(&self, part: &[usize], row: Option<usize>) -> usize {
        self.unseparated(part.iter().chain(row.iter()))
    }
}

/// Like [`check_strict_corollary`], but A3 need only separate every pair of
/// classes through some Λ entry. Instances accepted by the corollary are
/// returned with the corollary's witness.
pub fn check_strict_theorem1(
    s: &ConstraintMatrix,
    lambdas: &[DMatrix<f64>],
    budget: &SearchBudget,
) -> Result<IdVerdict> {
    let k = s.cols();
    LcmParams::new(vec![1.0 / k as f64; k], lambdas.to_vec(), s.clone())?;
    let corollary = check_strict_corollary(s, budget);
    if corollary.status == IdStatus::Strict {
        return Ok(corollary);
    }
    let m = s.matrix();
    let sep = PairSeparation::new(lambdas);
    let mut diagnostics = Vec::new();
    let score = DuplicateColumns::new(m, budget.seed);
    let found = find_partition(
        m.rows(),
        budget,
        codes_predicate(m),
        |mask| sep.unseparated(mask_to_rows(mask).iter()) == 0,
        [&score, &score, &sep],
        |parts| {
            distinct_rows(m, &parts[0])
                && distinct_rows(m, &parts[1])
                && sep.unseparated(parts[2].iter()) == 0
        },
        &mut diagnostics,
    );
    Ok(match found {
        Some(w) => {
            diagnostics.extend(sep.near_ties(&w.parts[2]));
            IdVerdict::found(IdStatus::Strict, w, diagnostics)
        }
        None => IdVerdict::undetermined(diagnostics),
    })
}

/// Minimal set of 1→0 flips (at most `max_flips`, lexicographically first
/// among the smallest) making `S_{rows,·}` column-distinct. Returned flips
/// use the original row indices.
fn minimal_flips(
    s: &BinaryMatrix,
    rows: &[usize],
    max_flips: usize,
) -> Option<Vec<(usize, usize)>> {
    let sub = s.select_rows(rows);
    let k = sub.cols();
    if has_distinct_columns(&sub) {
        return Some(Vec::new());
    }
    if rows.len() < usize::BITS as usize && k > 1 << rows.len() {
        return None;
    }
    let mut groups: BTreeMap<Vec<u8>, Vec<usize>> = BTreeMap::new();
    for h in 0..k {
        groups.entry(sub.column(h)).or_default().push(h);
    }
    // each flip changes one column, so every duplicate group of size m
    // needs at least m − 1 flips
    let lower: usize = groups.values().map(|g| g.len() - 1).sum();
    if lower > max_flips {
        return None;
    }
    let mut candidates: Vec<(usize, usize)> = groups
        .values()
        .filter(|g| g.len() > 1)
        .flatten()
        .flat_map(|&h| {
            let sub = &sub;
            (0..sub.rows()).filter(move |&r| sub.get(r, h)).map(move |r| (r, h))
        })
        .collect();
    candidates.sort_unstable();
    for size in lower.max(1)..=max_flips {
        let mut idx: Vec<usize> = (0..size).collect();
        if size > candidates.len() {
            break;
        }
        loop {
            let mut trial = sub.clone();
            for &i in &idx {
                let (r, h) = candidates[i];
                trial.set(r, h, false);
            }
            if has_distinct_columns(&trial) {
                return Some(idx.iter().map(|&i| (rows[candidates[i].0], candidates[i].1)).collect());
            }
            // next combination
            let n = candidates.len();
            let Some(pos) = (0..size).rev().find(|&i| idx[i] != i + n - size) else {
                break;
            };
            idx[pos] += 1;
            for i in (pos + 1)..size {
                idx[i] = idx[i - 1] + 1;
            }
        }
    }
    None
}

fn zero_columns(s: &BinaryMatrix, rows: &[usize]) -> usize {
    (0..s.cols())
        .filter(|&h| rows.iter().all(|&r| !s.get(r, h)))
        .count()
}

struct FlipDeficiency<'a> {
    dup: DuplicateColumns<'a>,
    max_flips: usize,
}

impl PartScore for FlipDeficiency<'_> {
    fn deficiency_with(&self, part: &[usize], row: Option<usize>) -> usize {
        let d = self.dup.deficiency_with(part, row);
        if d == 0 {
            return 0;
        }
        let rows: Vec<usize> = part.iter().chain(row.iter()).copied().collect();
        if minimal_flips(self.dup.s, &rows, self.max_flips).is_some() {
            0
        } else {
            d
        }
    }
}

struct ZeroColumnExcess<'a>(&'a BinaryMatrix);

impl PartScore for ZeroColumnExcess<'_> {
    fn deficiency_with(&self, part: &[usize], row: Option<usize>) -> usize {
        let rows: Vec<usize> = part.iter().chain(row.iter()).copied().collect();
        zero_columns(self.0, &rows).saturating_sub(1)
    }
}

/// Searches for a tri-partition where A1 and A2 become column-distinct after
/// at most `budget.max_flips` 1→0 flips each, and `S_{A3,·}` has at most one
/// all-zero column (so generic Λ separate every class pair on A3).
pub fn check_generic(s: &ConstraintMatrix, budget: &SearchBudget) -> IdVerdict {
    let strict = check_strict_corollary(s, budget);
    if strict.status == IdStatus::Strict {
        let mut v = strict;
        v.status = IdStatus::Generic;
        v.diagnostics
            .push("strict condition holds; no flips needed".into());
        return v;
    }
    let m = s.matrix();
    let mut diagnostics = Vec::new();
    let flips = FlipDeficiency {
        dup: DuplicateColumns::new(m, budget.seed),
        max_flips: budget.max_flips,
    };
    let zeros = ZeroColumnExcess(m);
    let found = find_partition(
        m.rows(),
        budget,
        |mask| minimal_flips(m, &mask_to_rows(mask), budget.max_flips).is_some(),
        |mask| zero_columns(m, &mask_to_rows(mask)) <= 1,
        [&flips, &flips, &zeros],
        |parts| {
            minimal_flips(m, &parts[0], budget.max_flips).is_some()
                && minimal_flips(m, &parts[1], budget.max_flips).is_some()
                && zero_columns(m, &parts[2]) <= 1
        },
        &mut diagnostics,
    );
    match found {
        Some(mut w) => {
            for part in &w.parts[..2] {
                w.flips
                    .extend(minimal_flips(m, part, budget.max_flips).unwrap_or_default());
            }
            diagnostics.push(format!(
                "A3 condition: S restricted to A3 has {} all-zero column(s); generic Λ separate all class pairs",
                zero_columns(m, &w.parts[2])
            ));
            IdVerdict::found(IdStatus::Generic, w, diagnostics)
        }
        None => {
            diagnostics.push(format!(
                "no partition found with at most {} flips per block",
                budget.max_flips
            ));
            IdVerdict::undetermined(diagnostics)
        }
    }
}

/// Rows of `g` equal to the standard basis vector `e_k`, per latent `k`.
fn pure_rows(g: &BinaryMatrix) -> Vec<Vec<usize>> {
    let mut out = vec![Vec::new(); g.cols()];
    for r in 0..g.rows() {
        let row = g.row(r);
        if row.iter().filter(|&&v| v == 1).count() == 1 {
            let k = row.iter().position(|&v| v == 1).unwrap_or(0);
            out[k].push(r);
        }
    }
    out
}

fn identity_block_witness(g: &BinaryMatrix) -> Option<Witness> {
    let pure = pure_rows(g);
    if pure.iter().any(|rows| rows.len() < 3) {
        return None;
    }
    let mut parts: [Vec<usize>; 3] = Default::default();
    for rows in &pure {
        for (i, part) in parts.iter_mut().enumerate() {
            part.push(rows[i]);
        }
    }
    let used: std::collections::HashSet<usize> = parts.iter().flatten().copied().collect();
    parts[2].extend((0..g.rows()).filter(|r| !used.contains(r)));
    for part in parts.iter_mut() {
        part.sort_unstable();
    }
    Some(Witness {
        parts,
        flips: Vec::new(),
    })
}

/// Checks that every layer's graphical matrix contains three disjoint
/// identity blocks. `graphs[0]` links observed variables to the first latent
/// layer; the witness partitions its rows.
pub fn check_multilayer(graphs: &[GraphicalMatrix]) -> Result<IdVerdict> {
    if graphs.is_empty() {
        return input("need at least one graphical matrix");
    }
    for (m, pair) in graphs.windows(2).enumerate() {
        if pair[0].cols() != pair[1].rows() {
            return input(format!(
                "layer {} has {} latent columns but layer {} has {} rows",
                m + 1,
                pair[0].cols(),
                m + 2,
                pair[1].rows()
            ));
        }
    }
    let mut diagnostics = Vec::new();
    let mut ok = true;
    for (m, g) in graphs.iter().enumerate() {
        for (k, rows) in pure_rows(g.matrix()).iter().enumerate() {
            if rows.len() < 3 {
                ok = false;
                diagnostics.push(format!(
                    "layer {}: latent {} has {} pure row(s), needs 3",
                    m + 1,
                    k + 1,
                    rows.len()
                ));
            }
        }
        let (rows, cols) = (g.rows(), g.cols());
        diagnostics.push(format!(
            "layer {}: {rows} >= 3*{cols} is {}",
            m + 1,
            rows >= 3 * cols
        ));
    }
    if !ok {
        return Ok(IdVerdict::undetermined(diagnostics));
    }
    match identity_block_witness(graphs[0].matrix()) {
        Some(w) => Ok(IdVerdict::found(IdStatus::Strict, w, diagnostics)),
        None => Ok(IdVerdict::undetermined(diagnostics)),
    }
}

/// Kuhn's augmenting-path matching of each latent column to a distinct row
/// among `rows`, restricted to edges with `g = 1`. Returns the matched row
/// per column or `None`.
fn perfect_matching(g: &BinaryMatrix, rows: &[usize]) -> Option<Vec<usize>> {
    fn augment(
        g: &BinaryMatrix,
        rows: &[usize],
        col: usize,
        seen: &mut [bool],
        owner: &mut [Option<usize>],
    ) -> bool {
        for (i, &r) in rows.iter().enumerate() {
            if g.get(r, col) && !seen[i] {
                seen[i] = true;
                if owner[i].is_none_or(|c| augment(g, rows, c, seen, owner)) {
                    owner[i] = Some(col);
                    return true;
                }
            }
        }
        false
    }
    let k = g.cols();
    let mut owner = vec![None; rows.len()];
    for col in 0..k {
        let mut seen = vec![false; rows.len()];
        if !augment(g, rows, col, &mut seen, &mut owner) {
            return None;
        }
    }
    let mut out = vec![0; k];
    for (i, o) in owner.iter().enumerate() {
        if let Some(c) = o {
            out[*c] = rows[i];
        }
    }
    Some(out)
}

/// Three disjoint systems of distinct representatives: each latent column is
/// replicated three times and matched to distinct rows.
fn three_disjoint_sdrs(g: &BinaryMatrix) -> Option<Witness> {
    let k = g.cols();
    let mut tripled = BinaryMatrix::zeros(g.rows(), 3 * k);
    for r in 0..g.rows() {
        for c in 0..k {
            for copy in 0..3 {
                tripled.set(r, copy * k + c, g.get(r, c));
            }
        }
    }
    let all: Vec<usize> = (0..g.rows()).collect();
    let matched = perfect_matching(&tripled, &all)?;
    let mut parts: [Vec<usize>; 3] = Default::default();
    for (copy, part) in parts.iter_mut().enumerate() {
        part.extend_from_slice(&matched[copy * k..(copy + 1) * k]);
    }
    let used: std::collections::HashSet<usize> = matched.iter().copied().collect();
    parts[2].extend((0..g.rows()).filter(|r| !used.contains(r)));
    for part in parts.iter_mut() {
        part.sort_unstable();
    }
    Some(Witness {
        parts,
        flips: Vec::new(),
    })
}

fn depth_condition(k1: usize, b: usize) -> (bool, usize) {
    let log = if b <= 1 {
        0
    } else {
        (usize::BITS - (b - 1).leading_zeros()) as usize
    };
    let need = 2 * log + 1;
    (k1 >= need, need)
}

/// Two-layer conditions. Strict: three identity blocks in the graph and
/// (when `beta[j][c][k]` is supplied) nonzero main effects on every pure row.
/// Generic: three disjoint row sets each admitting a perfect matching onto
/// the latent columns. Both need `K1 ≥ 2⌈log2 B⌉ + 1`.
pub fn check_two_layer(
    graph: &GraphicalMatrix,
    deep_classes: usize,
    beta: Option<&[Vec<Vec<f64>>]>,
) -> IdVerdict {
    let g = graph.matrix();
    let k1 = g.cols();
    let mut diagnostics = Vec::new();
    let (depth_ok, need) = depth_condition(k1, deep_classes);
    diagnostics.push(format!(
        "K1 = {k1}, B = {deep_classes}: K1 >= {need} is {depth_ok}"
    ));
    if !depth_ok {
        return IdVerdict::undetermined(diagnostics);
    }
    if let Some(w) = identity_block_witness(g) {
        let mut beta_ok = true;
        if let Some(beta) = beta {
            for (k, rows) in pure_rows(g).iter().enumerate() {
                for &r in rows.iter().take(3) {
                    let zero = beta
                        .get(r)
                        .map_or(true, |cs| cs.iter().any(|b| b.get(k).is_none_or(|&v| v == 0.0)));
                    if zero {
                        beta_ok = false;
                        diagnostics.push(format!(
                            "row {} is pure for latent {} but has a zero main effect",
                            r + 1,
                            k + 1
                        ));
                    }
                }
            }
        }
        if beta_ok {
            diagnostics.push("three identity blocks found".into());
            return IdVerdict::found(IdStatus::Strict, w, diagnostics);
        }
    } else {
        diagnostics.push("fewer than three pure rows for some latent".into());
    }
    match three_disjoint_sdrs(g) {
        Some(w) => {
            diagnostics.push("three disjoint blocks with unit diagonal found".into());
            IdVerdict::found(IdStatus::Generic, w, diagnostics)
        }
        None => {
            diagnostics.push("no three disjoint blocks with unit diagonal".into());
            IdVerdict::undetermined(diagnostics)
        }
    }
}

/// Inputs shared by all registered checkers; each uses what it needs.
#[derive(Debug, Clone, Default)]
pub struct CheckInput {
    pub constraint: Option<ConstraintMatrix>,
    pub graphs: Vec<GraphicalMatrix>,
    pub lambdas: Option<Vec<DMatrix<f64>>>,
    pub deep_classes: Option<usize>,
    pub beta: Option<Vec<Vec<Vec<f64>>>>,
    pub budget: SearchBudget,
}

impl CheckInput {
    /// The constraint matrix, derived from the first graph when absent.
    pub fn constraint_matrix(&self) -> Result<ConstraintMatrix> {
        match (&self.constraint, self.graphs.first()) {
            (Some(s), _) => Ok(s.clone()),
            (None, Some(g)) => constraint_matrix_from_graph(g),
            (None, None) => input("need a constraint matrix or a graphical matrix"),
        }
    }
}

pub trait IdentifiabilityChecker: Send + Sync {
    fn name(&self) -> &'static str;
    fn check(&self, input: &CheckInput) -> Result<IdVerdict>;
}

struct StrictCorollary;
struct StrictTheorem;
struct Generic;
struct Multilayer;
struct TwoLayer;

impl IdentifiabilityChecker for StrictCorollary {
    fn name(&self) -> &'static str {
        "strict-corollary"
    }
    fn check(&self, input: &CheckInput) -> Result<IdVerdict> {
        Ok(check_strict_corollary(&input.constraint_matrix()?, &input.budget))
    }
}

impl IdentifiabilityChecker for StrictTheorem {
    fn name(&self) -> &'static str {
        "strict-theorem1"
    }
    fn check(&self, input: &CheckInput) -> Result<IdVerdict> {
        let Some(lambdas) = &input.lambdas else {
            return crate::error::input("strict-theorem1 needs class-conditional matrices");
        };
        check_strict_theorem1(&input.constraint_matrix()?, lambdas, &input.budget)
    }
}

impl IdentifiabilityChecker for Generic {
    fn name(&self) -> &'static str {
        "generic"
    }
    fn check(&self, input: &CheckInput) -> Result<IdVerdict> {
        Ok(check_generic(&input.constraint_matrix()?, &input.budget))
    }
}

impl IdentifiabilityChecker for Multilayer {
    fn name(&self) -> &'static str {
        "multilayer"
    }
    fn check(&self, input: &CheckInput) -> Result<IdVerdict> {
        check_multilayer(&input.graphs)
    }
}

impl IdentifiabilityChecker for TwoLayer {
    fn name(&self) -> &'static str {
        "two-layer"
    }
    fn check(&self, input: &CheckInput) -> Result<IdVerdict> {
        let Some(g) = input.graphs.first() else {
            return crate::error::input("two-layer needs a graphical matrix");
        };
        let Some(b) = input.deep_classes else {
            return crate::error::input("two-layer needs the number of deep classes");
        };
        Ok(check_two_layer(g, b, input.beta.as_deref()))
    }
}

/// Name-keyed registry of identifiability checkers.
pub struct CheckerRegistry {
    checkers: BTreeMap<&'static str, Box<dyn IdentifiabilityChecker>>,
}

impl Default for CheckerRegistry {
    fn default() -> Self {
        let mut r = Self {
            checkers: BTreeMap::new(),
        };
        r.register(Box::new(StrictCorollary));
        r.register(Box::new(StrictTheorem));
        r.register(Box::new(Generic));
        r.register(Box::new(Multilayer));
        r.register(Box::new(TwoLayer));
        r
    }
}

impl CheckerRegistry {
    pub fn register(&mut self, checker: Box<dyn IdentifiabilityChecker>) {
        self.checkers.insert(checker.name(), checker);
    }

    pub fn get(&self, name: &str) -> Result<&dyn IdentifiabilityChecker> {
        self.checkers.get(name).map(|c| c.as_ref()).ok_or_else(|| {
            crate::Error::Usage(format!(
                "unknown checker '{name}'; available: {}",
                self.names().join(", ")
            ))
        })
    }

    pub fn names(&self) -> Vec<&'static str> {
        self.checkers.keys().copied().collect()
    }
}
