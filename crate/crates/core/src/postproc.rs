//! Post-chain summaries: posterior means and modes, column alignment against
//! a reference graph, and the recovery metrics used in simulation studies.

use pathfinding::prelude::{kuhn_munkres_min, Matrix};
use serde::{Deserialize, Serialize};

use crate::error::{input, Error, Result};
use crate::gibbs::{estimate_k_star, estimate_k_star_indicator, PosteriorDraws};
use crate::lcm::TwoLayerParams;
use crate::matrix::BinaryMatrix;

/// Largest size solved by enumerating all permutations.
pub const EXHAUSTIVE_MAX: usize = 8;

/// Rearranges `v` into the next permutation in lexicographic order.
fn next_permutation(v: &mut [usize]) -> bool {
    let n = v.len();
    if n < 2 {
        return false;
    }
    let mut i = n - 1;
    while i > 0 && v[i - 1] >= v[i] {
        i -= 1;
    }
    if i == 0 {
        return false;
    }
    let mut j = n - 1;
    while v[j] <= v[i - 1] {
        j -= 1;
    }
    v.swap(i - 1, j);
    v[i..].reverse();
    true
}

/// Assignment `perm` minimizing `Σ_k cost[k][perm[k]]`. Sizes up to
/// [`EXHAUSTIVE_MAX`] are enumerated and ties go to the lexicographically
/// smallest permutation; larger sizes use the Hungarian method on costs
/// scaled to integers.
pub fn min_cost_assignment(cost: &[Vec<f64>]) -> Vec<usize> {
    let n = cost.len();
    if n <= EXHAUSTIVE_MAX {
        let mut perm: Vec<usize> = (0..n).collect();
        let mut best = perm.clone();
        let mut best_cost = f64::INFINITY;
        loop {
            let c: f64 = perm.iter().enumerate().map(|(k, &s)| cost[k][s]).sum();
            // strict improvement keeps the lexicographically first optimum
            if c < best_cost - 1e-12 {
                best_cost = c;
                best.clone_from(&perm);
            }
            if !next_permutation(&mut perm) {
                break;
            }
        }
        best
    } else {
        let scaled: Vec<i64> = cost
            .iter()
            .flatten()
            .map(|&c| (c * 1e6).round() as i64)
            .collect();
        let weights = Matrix::from_vec(n, n, scaled).expect("square cost matrix");
        kuhn_munkres_min(&weights).1
    }
}

/// Column permutation `perm` such that column `k` of `estimate` permuted
/// (that is, column `perm[k]` of `estimate`) best matches column `k` of
/// `reference` in Hamming distance.
pub fn align_columns(estimate: &BinaryMatrix, reference: &BinaryMatrix) -> Result<Vec<usize>> {
    if estimate.rows() != reference.rows() || estimate.cols() != reference.cols() {
        return input(format!(
            "cannot align a {}x{} estimate with a {}x{} reference",
            estimate.rows(),
            estimate.cols(),
            reference.rows(),
            reference.cols()
        ));
    }
    let k = reference.cols();
    let cost: Vec<Vec<f64>> = (0..k)
        .map(|r| {
            (0..k)
                .map(|e| {
                    (0..reference.rows())
                        .filter(|&j| reference.get(j, r) != estimate.get(j, e))
                        .count() as f64
                })
                .collect()
        })
        .collect();
    Ok(min_cost_assignment(&cost))
}

/// Elementwise posterior means of every block, in the sampler's flat layouts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PosteriorMeans {
    pub n: usize,
    pub p: usize,
    pub d: usize,
    pub k: usize,
    pub b: usize,
    pub g: Vec<f64>,
    pub beta: Vec<f64>,
    pub beta0: Vec<f64>,
    pub sigma2: Vec<f64>,
    pub gamma: f64,
    pub tau: Vec<f64>,
    pub eta: Vec<f64>,
    pub a: Vec<f64>,
    /// `z_freq[i*B+b]`: fraction of draws with subject `i` in class `b`.
    pub z_freq: Vec<f64>,
}

fn mean_of<T: Copy + Into<f64>>(rows: &[Vec<T>]) -> Vec<f64> {
    let Some(first) = rows.first() else {
        return Vec::new();
    };
    let mut acc = vec![0.0; first.len()];
    for r in rows {
        for (a, &v) in acc.iter_mut().zip(r) {
            *a += v.into();
        }
    }
    let m = rows.len() as f64;
    acc.iter_mut().for_each(|a| *a /= m);
    acc
}

impl PosteriorMeans {
    pub fn from_draws(draws: &PosteriorDraws) -> Result<Self> {
        if draws.is_empty() {
            return Err(Error::Usage("no retained draws to summarize".into()));
        }
        let m = draws.len() as f64;
        let mut z_freq = vec![0.0; draws.n * draws.b];
        for z in &draws.z {
            for (i, &zi) in z.iter().enumerate() {
                z_freq[i * draws.b + zi as usize] += 1.0 / m;
            }
        }
        Ok(Self {
            n: draws.n,
            p: draws.p,
            d: draws.d,
            k: draws.k,
            b: draws.b,
            g: mean_of(&draws.g),
            beta: mean_of(&draws.beta),
            beta0: mean_of(&draws.beta0),
            sigma2: mean_of(&draws.sigma2),
            gamma: draws.gamma.iter().sum::<f64>() / m,
            tau: mean_of(&draws.tau),
            eta: mean_of(&draws.eta),
            a: mean_of(&draws.a),
            z_freq,
        })
    }

    /// Average slab variance `(1/(d−1)) Σ_c σ²_{ck}` per column.
    pub fn column_variance(&self) -> Vec<f64> {
        let cm1 = self.d - 1;
        (0..self.k)
            .map(|k| (0..cm1).map(|c| self.sigma2[c * self.k + k]).sum::<f64>() / cm1 as f64)
            .collect()
    }
}

/// Indices (ascending) of the `keep` columns with the largest average
/// posterior slab variance; ties go to the lower index.
pub fn retain_columns(means: &PosteriorMeans, keep: usize) -> Result<Vec<usize>> {
    if keep > means.k {
        return input(format!("cannot keep {keep} of {} columns", means.k));
    }
    let var = means.column_variance();
    let mut order: Vec<usize> = (0..means.k).collect();
    order.sort_by(|&x, &y| var[y].total_cmp(&var[x]).then(x.cmp(&y)));
    let mut kept = order[..keep].to_vec();
    kept.sort_unstable();
    Ok(kept)
}

/// Elementwise posterior modes.
#[derive(Debug, Clone, PartialEq)]
pub struct ModeEstimates {
    pub g: BinaryMatrix,
    pub a: BinaryMatrix,
    /// Most frequent deep class per subject (0-based); ties go to the lower class.
    pub z: Vec<usize>,
}

fn threshold(means: &[f64], rows: usize, cols: usize) -> BinaryMatrix {
    let mut m = BinaryMatrix::zeros(rows, cols);
    for r in 0..rows {
        for c in 0..cols {
            // a frequency of exactly one half resolves to absent
            m.set(r, c, means[r * cols + c] > 0.5);
        }
    }
    m
}

pub fn posterior_mode_estimates(draws: &PosteriorDraws) -> Result<ModeEstimates> {
    let means = PosteriorMeans::from_draws(draws)?;
    Ok(modes_from_means(&means))
}

pub fn modes_from_means(means: &PosteriorMeans) -> ModeEstimates {
    let z = (0..means.n)
        .map(|i| {
            let row = &means.z_freq[i * means.b..(i + 1) * means.b];
            let mut best = 0;
            for (b, &f) in row.iter().enumerate() {
                if f > row[best] {
                    best = b;
                }
            }
            best
        })
        .collect();
    ModeEstimates {
        g: threshold(&means.g, means.p, means.k),
        a: threshold(&means.a, means.n, means.k),
        z,
    }
}

/// Matrix-, row- and entry-level disagreement between two graphs.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RecoveryErrors {
    pub matrix: f64,
    pub row: f64,
    pub entry: f64,
}

pub fn recovery_errors(estimate: &BinaryMatrix, truth: &BinaryMatrix) -> Result<RecoveryErrors> {
    if estimate.rows() != truth.rows() || estimate.cols() != truth.cols() {
        return input("graphs to compare must have equal dimensions");
    }
    let (p, k) = (truth.rows(), truth.cols());
    let wrong_entries = estimate
        .as_slice()
        .iter()
        .zip(truth.as_slice())
        .filter(|(x, y)| x != y)
        .count();
    let wrong_rows = (0..p).filter(|&j| estimate.row(j) != truth.row(j)).count();
    Ok(RecoveryErrors {
        matrix: if wrong_entries > 0 { 1.0 } else { 0.0 },
        row: wrong_rows as f64 / p as f64,
        entry: wrong_entries as f64 / (p * k).max(1) as f64,
    })
}

pub fn rmse(estimate: &[f64], truth: &[f64]) -> f64 {
    if estimate.is_empty() {
        return 0.0;
    }
    let ss: f64 = estimate.iter().zip(truth).map(|(e, t)| (e - t).powi(2)).sum();
    (ss / estimate.len() as f64).sqrt()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RmseBlocks {
    /// Main effects at the true edges only.
    pub beta: f64,
    /// Main effects over every entry, zeros included.
    pub beta_all: f64,
    pub beta0: f64,
    pub eta: f64,
}

/// Aligned estimate of the truth's blocks, built from posterior means.
#[derive(Debug, Clone, PartialEq)]
pub struct AlignedEstimate {
    /// Estimated column matched to each true column.
    pub columns: Vec<usize>,
    /// Estimated deep class matched to each true class.
    pub classes: Vec<usize>,
    pub g: BinaryMatrix,
    /// `beta[j][c][k]`, in truth's column order.
    pub beta: Vec<Vec<Vec<f64>>>,
    pub beta0: Vec<Vec<f64>>,
    /// `eta[k][b]`, in truth's column and class order.
    pub eta: Vec<Vec<f64>>,
}

/// Retains, aligns and reshapes the posterior means against `truth`.
pub fn align_to_truth(means: &PosteriorMeans, truth: &TwoLayerParams) -> Result<AlignedEstimate> {
    let (p, k1, b) = (truth.graph.rows(), truth.graph.cols(), truth.tau.len());
    if means.p != p || means.b != b || truth.cardinalities.iter().any(|&d| d != means.d) {
        return input("posterior draws and truth disagree on p, d or B");
    }
    let kept = retain_columns(means, k1)?;
    let modes = modes_from_means(means);
    let g_kept = modes.g.permute_columns(&kept);
    let perm = align_columns(&g_kept, truth.graph.matrix())?;
    let columns: Vec<usize> = perm.iter().map(|&e| kept[e]).collect();
    let cm1 = means.d - 1;
    let beta = (0..p)
        .map(|j| {
            (0..cm1)
                .map(|c| {
                    columns
                        .iter()
                        .map(|&k| means.beta[(j * cm1 + c) * means.k + k])
                        .collect()
                })
                .collect()
        })
        .collect();
    let beta0 = (0..p)
        .map(|j| means.beta0[j * cm1..(j + 1) * cm1].to_vec())
        .collect();
    // class alignment on squared η error, after column alignment
    let cost: Vec<Vec<f64>> = (0..b)
        .map(|tb| {
            (0..b)
                .map(|eb| {
                    (0..k1)
                        .map(|t| (means.eta[columns[t] * b + eb] - truth.eta[t][tb]).powi(2))
                        .sum()
                })
                .collect()
        })
        .collect();
    let classes = min_cost_assignment(&cost);
    let eta = (0..k1)
        .map(|t| classes.iter().map(|&eb| means.eta[columns[t] * b + eb]).collect())
        .collect();
    Ok(AlignedEstimate {
        g: modes.g.permute_columns(&columns),
        columns,
        classes,
        beta,
        beta0,
        eta,
    })
}

pub fn rmse_blocks(est: &AlignedEstimate, truth: &TwoLayerParams) -> RmseBlocks {
    let (mut act_e, mut act_t, mut all_e, mut all_t) = (vec![], vec![], vec![], vec![]);
    for (j, rows) in truth.beta.iter().enumerate() {
        for (c, row) in rows.iter().enumerate() {
            for (k, &t) in row.iter().enumerate() {
                let e = est.beta[j][c][k];
                all_e.push(e);
                all_t.push(t);
                if truth.graph.edge(j, k) {
                    act_e.push(e);
                    act_t.push(t);
                }
            }
        }
    }
    let flat = |m: &[Vec<f64>]| m.iter().flatten().copied().collect::<Vec<f64>>();
    RmseBlocks {
        beta: rmse(&act_e, &act_t),
        beta_all: rmse(&all_e, &all_t),
        beta0: rmse(&flat(&est.beta0), &flat(&truth.beta0)),
        eta: rmse(&flat(&est.eta), &flat(&truth.eta)),
    }
}

/// Evaluation of one fitted chain against the simulation truth.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub n: usize,
    /// 1 if the aligned graph estimate differs anywhere from the truth.
    pub g_error_matrix: f64,
    pub g_error_row: f64,
    pub g_error_entry: f64,
    pub rmse: RmseBlocks,
    /// Posterior mean of `Σ_k (1 − π_k)`; shrinkage-prior runs only.
    pub k_star: Option<f64>,
    /// Posterior mean number of slab columns; shrinkage-prior runs only.
    pub k_star_indicator: Option<f64>,
    /// 1-based estimated column matched to each true column.
    pub permutation: Vec<usize>,
    /// 1-based estimated deep class matched to each true class.
    pub class_permutation: Vec<usize>,
}

pub fn evaluate(draws: &PosteriorDraws, truth: &TwoLayerParams) -> Result<EvalReport> {
    let means = PosteriorMeans::from_draws(draws)?;
    let k_star = if draws.csp.is_empty() {
        None
    } else {
        Some((estimate_k_star(draws)?, estimate_k_star_indicator(draws)?))
    };
    evaluate_means(&means, k_star, truth)
}

/// Evaluation from posterior means; `k_star` holds the two effective-K
/// estimates of a shrinkage-prior run.
pub fn evaluate_means(
    means: &PosteriorMeans,
    k_star: Option<(f64, f64)>,
    truth: &TwoLayerParams,
) -> Result<EvalReport> {
    let est = align_to_truth(means, truth)?;
    let errors = recovery_errors(&est.g, truth.graph.matrix())?;
    Ok(EvalReport {
        n: means.n,
        g_error_matrix: errors.matrix,
        g_error_row: errors.row,
        g_error_entry: errors.entry,
        rmse: rmse_blocks(&est, truth),
        k_star: k_star.map(|k| k.0),
        k_star_indicator: k_star.map(|k| k.1),
        permutation: est.columns.iter().map(|c| c + 1).collect(),
        class_permutation: est.classes.iter().map(|c| c + 1).collect(),
    })
}

/// Linear-interpolation quantile of sorted data (`q ∈ [0, 1]`).
pub fn quantile_sorted(sorted: &[f64], q: f64) -> f64 {
    match sorted.len() {
        0 => f64::NAN,
        1 => sorted[0],
        n => {
            let h = q.clamp(0.0, 1.0) * (n - 1) as f64;
            let lo = h.floor() as usize;
            let hi = (lo + 1).min(n - 1);
            sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub mean: f64,
    pub q25: f64,
    pub median: f64,
    pub q75: f64,
}

impl Summary {
    pub fn of(values: &[f64]) -> Self {
        let mut v = values.to_vec();
        v.sort_by(f64::total_cmp);
        Self {
            mean: v.iter().sum::<f64>() / v.len().max(1) as f64,
            q25: quantile_sorted(&v, 0.25),
            median: quantile_sorted(&v, 0.5),
            q75: quantile_sorted(&v, 0.75),
        }
    }
}

/// Metrics across replications at one sample size; the mean of
/// `g_error_matrix` is the fraction of replications with any error.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Aggregate {
    pub n: usize,
    pub replications: usize,
    pub g_error_matrix: Summary,
    pub g_error_row: Summary,
    pub g_error_entry: Summary,
    pub rmse_beta: Summary,
    pub rmse_beta_all: Summary,
    pub rmse_beta0: Summary,
    pub rmse_eta: Summary,
    pub k_star: Option<Summary>,
}

pub fn aggregate(reports: &[EvalReport]) -> Result<Aggregate> {
    let first = reports
        .first()
        .ok_or_else(|| Error::Usage("no reports to aggregate".into()))?;
    let col = |f: &dyn Fn(&EvalReport) -> f64| Summary::of(&reports.iter().map(f).collect::<Vec<_>>());
    let k_star: Vec<f64> = reports.iter().filter_map(|r| r.k_star).collect();
    Ok(Aggregate {
        n: first.n,
        replications: reports.len(),
        g_error_matrix: col(&|r| r.g_error_matrix),
        g_error_row: col(&|r| r.g_error_row),
        g_error_entry: col(&|r| r.g_error_entry),
        rmse_beta: col(&|r| r.rmse.beta),
        rmse_beta_all: col(&|r| r.rmse.beta_all),
        rmse_beta0: col(&|r| r.rmse.beta0),
        rmse_eta: col(&|r| r.rmse.eta),
        k_star: (k_star.len() == reports.len()).then(|| Summary::of(&k_star)),
    })
}

#[cfg(test)]
mod tests;
