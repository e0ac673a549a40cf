//! Khatri-Rao products of class-conditional probability matrices and the
//! randomized rank oracle over constrained parameter draws.

use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::{Distribution, Exp1};
use serde::Serialize;

use crate::error::{input, Result};
use crate::lcm::{ConstraintMatrix, PROB_TOL};
use crate::rngs::substream;

/// Largest column count accepted by the rank oracle.
pub const RANK_ORACLE_MAX_COLS: usize = 1 << 12;

const MAX_REJECTIONS: usize = 100;

/// Column-wise Kronecker product. Row index of the result is
/// `(c_1, …, c_m)` with the first factor most significant.
pub fn khatri_rao(matrices: &[DMatrix<f64>]) -> Result<DMatrix<f64>> {
    let Some(first) = matrices.first() else {
        return input("khatri_rao needs at least one matrix");
    };
    let k = first.ncols();
    if let Some(pos) = matrices.iter().position(|m| m.ncols() != k) {
        return input(format!(
            "matrix {} has {} columns, expected {k}",
            pos + 1,
            matrices[pos].ncols()
        ));
    }
    let mut acc = first.clone();
    for m in &matrices[1..] {
        let mut next = DMatrix::zeros(acc.nrows() * m.nrows(), k);
        for h in 0..k {
            for a in 0..acc.nrows() {
                let left = acc[(a, h)];
                for b in 0..m.nrows() {
                    next[(a * m.nrows() + b, h)] = left * m[(b, h)];
                }
            }
        }
        acc = next;
    }
    Ok(acc)
}

/// Rank with threshold `max(rows, cols) · ε · σ_max`.
pub fn numerical_rank(m: &DMatrix<f64>) -> usize {
    if m.is_empty() {
        return 0;
    }
    let sv = m.clone().svd(false, false).singular_values;
    let smax = sv.iter().cloned().fold(0.0, f64::max);
    let tol = m.nrows().max(m.ncols()) as f64 * f64::EPSILON * smax;
    sv.iter().filter(|&&s| s > tol).count()
}

fn flat_dirichlet<R: Rng + ?Sized>(d: usize, rng: &mut R) -> Vec<f64> {
    let g: Vec<f64> = (0..d).map(|_| Exp1.sample(rng)).collect();
    let s: f64 = g.iter().sum();
    g.into_iter().map(|v| v / s).collect()
}

/// Draws conditional-probability matrices satisfying the equality and
/// inequality constraints of `s`. Tied columns share one flat-Dirichlet
/// baseline draw; free columns are independent flat-Dirichlet draws,
/// resampled until they differ from the baseline in every category.
///
/// With `tie_duplicate_columns`, classes whose columns of `s` are identical
/// also share their free draws, which makes those classes indistinguishable.
pub fn random_constrained_lambdas<R: Rng + ?Sized>(
    s: &ConstraintMatrix,
    cardinalities: &[usize],
    tie_duplicate_columns: bool,
    rng: &mut R,
) -> Result<Vec<DMatrix<f64>>> {
    let (p, k) = (s.rows(), s.cols());
    if cardinalities.len() != p {
        return input(format!("need {p} cardinalities, got {}", cardinalities.len()));
    }
    if cardinalities.iter().any(|&d| d < 2) {
        return input("cardinalities must be >= 2");
    }
    // representative column of each class (first identical column in S)
    let rep: Vec<usize> = (0..k)
        .map(|h| {
            if tie_duplicate_columns {
                (0..=h)
                    .find(|&h0| s.matrix().column(h0) == s.matrix().column(h))
                    .unwrap_or(h)
            } else {
                h
            }
        })
        .collect();
    let mut out = Vec::with_capacity(p);
    for (j, &d) in cardinalities.iter().enumerate() {
        let baseline = flat_dirichlet(d, rng);
        let mut lam = DMatrix::zeros(d, k);
        for h in 0..k {
            let col = if !s.get(j, h) {
                baseline.clone()
            } else if rep[h] != h {
                lam.column(rep[h]).iter().cloned().collect()
            } else {
                let mut attempt = 0;
                loop {
                    let c = flat_dirichlet(d, rng);
                    let separated = c
                        .iter()
                        .zip(&baseline)
                        .all(|(a, b)| (a - b).abs() > PROB_TOL);
                    attempt += 1;
                    if separated || attempt >= MAX_REJECTIONS {
                        break c;
                    }
                }
            };
            for (c, v) in col.into_iter().enumerate() {
                lam[(c, h)] = v;
            }
        }
        out.push(lam);
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum RankOutcome {
    AlwaysFullRank,
    RankDeficientFound,
}

#[derive(Debug, Clone, Serialize)]
pub struct RankReport {
    pub outcome: RankOutcome,
    pub trials: usize,
    pub deficient_trials: usize,
    pub min_rank: usize,
    pub columns: usize,
}

/// Forms `⊙_j Λ^(j)` for `trials` random constrained draws and reports
/// whether it always has full column rank. Trial `t` uses its own stream
/// derived from `seed`.
pub fn kr_rank_oracle(
    s: &ConstraintMatrix,
    cardinalities: &[usize],
    trials: usize,
    seed: u64,
    tie_duplicate_columns: bool,
) -> Result<RankReport> {
    let k = s.cols();
    if k > RANK_ORACLE_MAX_COLS {
        return input(format!(
            "rank oracle supports at most {RANK_ORACLE_MAX_COLS} columns"
        ));
    }
    let mut deficient = 0;
    let mut min_rank = k;
    for t in 0..trials {
        let mut rng = substream(seed, &[0x4b52, t as u64]);
        let lambdas =
            random_constrained_lambdas(s, cardinalities, tie_duplicate_columns, &mut rng)?;
        let rank = numerical_rank(&khatri_rao(&lambdas)?);
        min_rank = min_rank.min(rank);
        if rank < k {
            deficient += 1;
        }
    }
    Ok(RankReport {
        outcome: if deficient == 0 {
            RankOutcome::AlwaysFullRank
        } else {
            RankOutcome::RankDeficientFound
        },
        trials,
        deficient_trials: deficient,
        min_rank,
        columns: k,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matrix::BinaryMatrix;
    use rand::SeedableRng;

    fn brute_khatri_rao(ms: &[DMatrix<f64>]) -> DMatrix<f64> {
        let rows: usize = ms.iter().map(|m| m.nrows()).product();
        let k = ms[0].ncols();
        let mut out = DMatrix::zeros(rows, k);
        for r in 0..rows {
            // decode r into per-factor indices, first factor most significant
            let mut idx = vec![0; ms.len()];
            let mut rem = r;
            for f in (0..ms.len()).rev() {
                idx[f] = rem % ms[f].nrows();
                rem /= ms[f].nrows();
            }
            for h in 0..k {
                out[(r, h)] = idx.iter().zip(ms).map(|(&i, m)| m[(i, h)]).product();
            }
        }
        out
    }

    #[test]
    fn identity_factors() {
        let i2 = DMatrix::<f64>::identity(2, 2);
        let kr = khatri_rao(&[i2.clone(), i2]).unwrap();
        let expected = DMatrix::from_row_slice(4, 2, &[1., 0., 0., 0., 0., 0., 0., 1.]);
        assert_eq!(kr, expected);
    }

    #[test]
    fn unary_product_is_identity_map() {
        let m = DMatrix::from_row_slice(2, 2, &[1., 2., 3., 4.]);
        assert_eq!(khatri_rao(&[m.clone()]).unwrap(), m);
    }

    #[test]
    fn matches_elementwise_definition() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        for case in 0..3 {
            let k = 2 + case;
            let ms: Vec<DMatrix<f64>> = (0..3)
                .map(|f| DMatrix::from_fn(2 + f, k, |_, _| rng.random::<f64>()))
                .collect();
            let a = khatri_rao(&ms).unwrap();
            let b = brute_khatri_rao(&ms);
            assert!((a - b).amax() < 1e-15);
        }
        let two = DMatrix::from_row_slice(2, 2, &[1., 2., 3., 4.]);
        let one = DMatrix::from_row_slice(2, 1, &[5., 6.]);
        assert!(khatri_rao(&[two, one]).is_err());
    }

    #[test]
    fn distinct_columns_give_full_rank() {
        // rows 1-3 of the constraint matrix induced by the 6x3 example graph
        let s = ConstraintMatrix::new(
            BinaryMatrix::from_row_strings(&["10110010", "11010100", "11101000"]).unwrap(),
        );
        let r = kr_rank_oracle(&s, &[2, 2, 2], 100, 11, false).unwrap();
        assert_eq!(r.outcome, RankOutcome::AlwaysFullRank);
    }

    #[test]
    fn tied_duplicate_columns_are_rank_deficient() {
        let s = ConstraintMatrix::new(BinaryMatrix::from_row_strings(&["1100", "0011"]).unwrap());
        let r = kr_rank_oracle(&s, &[3, 3], 20, 5, true).unwrap();
        assert_eq!(r.outcome, RankOutcome::RankDeficientFound);
        assert_eq!(r.deficient_trials, 20);
    }

    #[test]
    fn scalar_all_ones() {
        let s = ConstraintMatrix::new(BinaryMatrix::from_row_strings(&["1"]).unwrap());
        let r = kr_rank_oracle(&s, &[2], 10, 1, false).unwrap();
        assert_eq!(r.min_rank, 1);
        assert_eq!(r.outcome, RankOutcome::AlwaysFullRank);
    }

    #[test]
    fn random_lambdas_satisfy_constraints() {
        let s = ConstraintMatrix::new(
            BinaryMatrix::from_row_strings(&["0101", "0011", "1111"]).unwrap(),
        );
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(9);
        let lam = random_constrained_lambdas(&s, &[3, 2, 4], false, &mut rng).unwrap();
        let params =
            crate::lcm::LcmParams::new(vec![0.25; 4], lam, s.clone()).expect("valid draw");
        assert!(params.constraint_violations().is_empty());
    }
}
