use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::*;
use crate::gibbs::{run_chain, CspState, SamplerConfig};
use crate::simgen::{paper_sim_truth, simulate_two_layer};

fn random_matrix(rows: usize, cols: usize, rng: &mut ChaCha8Rng) -> BinaryMatrix {
    let data: Vec<Vec<u8>> = (0..rows)
        .map(|_| (0..cols).map(|_| rng.random_range(0..2u8)).collect())
        .collect();
    BinaryMatrix::from_rows(&data).unwrap()
}

fn hamming(a: &BinaryMatrix, b: &BinaryMatrix) -> usize {
    a.as_slice().iter().zip(b.as_slice()).filter(|(x, y)| x != y).count()
}

fn all_perms(k: usize) -> Vec<Vec<usize>> {
    let mut out = vec![];
    let mut p: Vec<usize> = (0..k).collect();
    loop {
        out.push(p.clone());
        if !next_permutation(&mut p) {
            break;
        }
    }
    out
}

#[test]
fn permutations_enumerate_in_order() {
    let perms = all_perms(4);
    assert_eq!(perms.len(), 24);
    assert!(perms.windows(2).all(|w| w[0] < w[1]));
}

#[test]
fn alignment_small_examples() {
    let truth = paper_sim_truth();
    let g = truth.graph.matrix();
    assert_eq!(align_columns(g, g).unwrap(), vec![0, 1, 2, 3]);
    let swapped = g.permute_columns(&[1, 0, 2, 3]);
    let perm = align_columns(&swapped, g).unwrap();
    assert_eq!(perm, vec![1, 0, 2, 3]);
    assert_eq!(swapped.permute_columns(&perm), *g);
    assert!(align_columns(&BinaryMatrix::zeros(20, 3), g).is_err());
}

#[test]
fn ties_go_to_smallest_permutation() {
    // identical columns: every permutation is optimal
    let m = BinaryMatrix::from_row_strings(&["11", "00", "11"]).unwrap();
    assert_eq!(align_columns(&m, &m).unwrap(), vec![0, 1]);
}

#[test]
fn exhaustive_and_hungarian_agree_on_random_pairs() {
    let mut rng = ChaCha8Rng::seed_from_u64(14);
    for _ in 0..200 {
        let est = random_matrix(20, 4, &mut rng);
        let reference = random_matrix(20, 4, &mut rng);
        let perm = align_columns(&est, &reference).unwrap();
        let best = all_perms(4)
            .into_iter()
            .map(|p| hamming(&est.permute_columns(&p), &reference))
            .min()
            .unwrap();
        assert_eq!(hamming(&est.permute_columns(&perm), &reference), best);
        // the assignment solver reaches the same optimum
        let cost: Vec<Vec<i64>> = (0..4)
            .map(|r| {
                (0..4)
                    .map(|e| (0..20).filter(|&j| reference.get(j, r) != est.get(j, e)).count() as i64)
                    .collect()
            })
            .collect();
        let weights = Matrix::from_vec(4, 4, cost.into_iter().flatten().collect()).unwrap();
        assert_eq!(kuhn_munkres_min(&weights).0 as usize, best);
    }
}

#[test]
fn large_assignment_uses_hungarian() {
    let mut rng = ChaCha8Rng::seed_from_u64(15);
    let reference = random_matrix(40, 10, &mut rng);
    let shuffle = [3, 9, 0, 1, 7, 2, 8, 5, 4, 6];
    let est = reference.permute_columns(&shuffle);
    let perm = align_columns(&est, &reference).unwrap();
    assert_eq!(est.permute_columns(&perm), reference);
}

proptest! {
    #[test]
    fn alignment_is_optimal(seed in 0u64..5000) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let k = rng.random_range(1..=5);
        let est = random_matrix(8, k, &mut rng);
        let reference = random_matrix(8, k, &mut rng);
        let perm = align_columns(&est, &reference).unwrap();
        let got = hamming(&est.permute_columns(&perm), &reference);
        for p in all_perms(k) {
            prop_assert!(got <= hamming(&est.permute_columns(&p), &reference));
        }
    }

    #[test]
    fn errors_are_permutation_covariant(seed in 0u64..5000) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let a = random_matrix(10, 4, &mut rng);
        let b = random_matrix(10, 4, &mut rng);
        let perms = all_perms(4);
        let p = &perms[rng.random_range(0..perms.len())];
        prop_assert_eq!(
            recovery_errors(&a, &b).unwrap(),
            recovery_errors(&a.permute_columns(p), &b.permute_columns(p)).unwrap()
        );
    }
}

#[test]
fn recovery_error_counts() {
    let g = paper_sim_truth().graph.matrix().clone();
    let e = recovery_errors(&g, &g).unwrap();
    assert_eq!((e.matrix, e.row, e.entry), (0.0, 0.0, 0.0));
    let mut wrong = g.clone();
    wrong.set(7, 2, !g.get(7, 2));
    let e = recovery_errors(&wrong, &g).unwrap();
    assert_eq!((e.matrix, e.row, e.entry), (1.0, 1.0 / 20.0, 1.0 / 80.0));

    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for _ in 0..50 {
        let a = random_matrix(12, 3, &mut rng);
        let b = random_matrix(12, 3, &mut rng);
        let mut rows = 0;
        let mut entries = 0;
        for j in 0..12 {
            let mut bad = false;
            for k in 0..3 {
                if a.get(j, k) != b.get(j, k) {
                    entries += 1;
                    bad = true;
                }
            }
            rows += bad as usize;
        }
        let e = recovery_errors(&a, &b).unwrap();
        assert_eq!(e.row, rows as f64 / 12.0);
        assert_eq!(e.entry, entries as f64 / 36.0);
        assert_eq!(e.matrix, if entries > 0 { 1.0 } else { 0.0 });
    }
}

#[test]
fn rmse_examples() {
    assert_eq!(rmse(&[1.0, 2.0], &[1.0, 2.0]), 0.0);
    assert!((rmse(&[1.3, 2.3, -0.7], &[1.0, 2.0, -1.0]) - 0.3).abs() < 1e-12);
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let a: Vec<f64> = (0..30).map(|_| rng.random::<f64>()).collect();
    let b: Vec<f64> = (0..30).map(|_| rng.random::<f64>()).collect();
    let mut ss = 0.0;
    for i in 0..30 {
        ss += (a[i] - b[i]) * (a[i] - b[i]);
    }
    assert!((rmse(&a, &b) - (ss / 30.0).sqrt()).abs() < 1e-12);
}

/// Draws whose every retained sample equals the truth (with columns and
/// classes shuffled, plus extra inert columns).
fn draws_matching_truth(truth: &TwoLayerParams, shift: f64) -> PosteriorDraws {
    let (p, k1, b) = (truth.graph.rows(), truth.graph.cols(), truth.tau.len());
    let d = truth.cardinalities[0];
    let cm1 = d - 1;
    let k = k1 + 2;
    // true column t sits at sampler column place[t]; class tb at class_place[tb]
    let place = [4, 0, 5, 2];
    let class_place = [1, 0];
    let mut g = vec![0u8; p * k];
    let mut beta = vec![0.0; p * cm1 * k];
    let mut beta0 = vec![0.0; p * cm1];
    let mut sigma2 = vec![0.01; cm1 * k];
    let mut eta = vec![0.5; k * b];
    for j in 0..p {
        for c in 0..cm1 {
            beta0[j * cm1 + c] = truth.beta0[j][c] + shift;
            for t in 0..k1 {
                beta[(j * cm1 + c) * k + place[t]] = truth.beta[j][c][t] + shift;
            }
        }
        for t in 0..k1 {
            g[j * k + place[t]] = truth.graph.edge(j, t) as u8;
        }
    }
    for t in 0..k1 {
        for c in 0..cm1 {
            sigma2[c * k + place[t]] = 3.0 + t as f64;
        }
        for tb in 0..b {
            eta[place[t] * b + class_place[tb]] = truth.eta[t][tb] + shift;
        }
    }
    let n = 3;
    let mut d_draws = PosteriorDraws {
        n,
        p,
        d,
        k,
        b,
        mode: "csp".into(),
        iterations: vec![],
        g: vec![],
        beta: vec![],
        beta0: vec![],
        sigma2: vec![],
        gamma: vec![],
        tau: vec![],
        eta: vec![],
        a: vec![],
        z: vec![],
        csp: vec![],
        trace: vec![],
    };
    for t in 0..4 {
        d_draws.iterations.push(t + 1);
        d_draws.g.push(g.clone());
        d_draws.beta.push(beta.clone());
        d_draws.beta0.push(beta0.clone());
        d_draws.sigma2.push(sigma2.clone());
        d_draws.gamma.push(0.5);
        d_draws.tau.push(vec![0.5, 0.5]);
        d_draws.eta.push(eta.clone());
        d_draws.a.push(vec![0; n * k]);
        d_draws.z.push(vec![0; n]);
        d_draws.csp.push(CspState {
            v: vec![0.0; k],
            pi: vec![0.0, 0.0, 0.0, 0.0, 1.0, 1.0],
            zind: vec![6, 6, 6, 6, 1, 1],
        });
    }
    d_draws
}

#[test]
fn evaluation_recovers_shuffled_truth() {
    let truth = paper_sim_truth();
    let draws = draws_matching_truth(&truth, 0.0);
    let r = evaluate(&draws, &truth).unwrap();
    assert_eq!(r.permutation, vec![5, 1, 6, 3]);
    assert_eq!(r.class_permutation, vec![2, 1]);
    assert_eq!((r.g_error_matrix, r.g_error_row, r.g_error_entry), (0.0, 0.0, 0.0));
    assert!(r.rmse.beta < 1e-12 && r.rmse.beta_all < 1e-12);
    assert!(r.rmse.beta0 < 1e-12 && r.rmse.eta < 1e-12);
    assert_eq!(r.k_star, Some(4.0));
    assert_eq!(r.k_star_indicator, Some(4.0));

    let shifted = evaluate(&draws_matching_truth(&truth, 0.1), &truth).unwrap();
    assert!((shifted.rmse.beta - 0.1).abs() < 1e-12);
    assert!((shifted.rmse.beta0 - 0.1).abs() < 1e-12);
    assert!((shifted.rmse.eta - 0.1).abs() < 1e-12);
}

#[test]
fn retention_keeps_largest_variances() {
    let truth = paper_sim_truth();
    let means = PosteriorMeans::from_draws(&draws_matching_truth(&truth, 0.0)).unwrap();
    assert_eq!(retain_columns(&means, 4).unwrap(), vec![0, 2, 4, 5]);
    assert_eq!(retain_columns(&means, 1).unwrap(), vec![2]);
    assert!(retain_columns(&means, 7).is_err());
}

#[test]
fn mode_thresholds() {
    let truth = paper_sim_truth();
    let mut draws = draws_matching_truth(&truth, 0.0);
    // edge (1,1) present in 2 of 4 draws: exactly one half → absent
    for (t, g) in draws.g.iter_mut().enumerate() {
        g[0] = (t < 2) as u8;
        g[1] = (t < 3) as u8;
    }
    for (t, z) in draws.z.iter_mut().enumerate() {
        z[0] = (t < 3) as u16;
        z[1] = (t < 2) as u16;
    }
    let modes = posterior_mode_estimates(&draws).unwrap();
    assert!(!modes.g.get(0, 0));
    assert!(modes.g.get(0, 1));
    assert_eq!(modes.z[0], 1);
    assert_eq!(modes.z[1], 0);
    assert_eq!(modes.z[2], 0);
}

#[test]
fn quantiles_match_sorting_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    for n in 1..30 {
        let v: Vec<f64> = (0..n).map(|_| rng.random::<f64>()).collect();
        let mut s = v.clone();
        s.sort_by(f64::total_cmp);
        assert_eq!(quantile_sorted(&s, 0.0), s[0]);
        assert_eq!(quantile_sorted(&s, 1.0), s[n - 1]);
        let sum = Summary::of(&v);
        if n % 2 == 1 {
            assert_eq!(sum.median, s[n / 2]);
        } else {
            assert!((sum.median - 0.5 * (s[n / 2 - 1] + s[n / 2])).abs() < 1e-15);
        }
        assert!(sum.q25 <= sum.median && sum.median <= sum.q75);
    }
}

#[test]
fn aggregate_of_single_report_is_that_report() {
    let truth = paper_sim_truth();
    let r = evaluate(&draws_matching_truth(&truth, 0.2), &truth).unwrap();
    let agg = aggregate(std::slice::from_ref(&r)).unwrap();
    assert_eq!(agg.replications, 1);
    assert_eq!(agg.rmse_beta.median, r.rmse.beta);
    assert_eq!(agg.k_star.unwrap().mean, 4.0);
    assert!(aggregate(&[]).is_err());
}

#[test]
fn end_to_end_on_short_chain() {
    let truth = paper_sim_truth();
    let sim = simulate_two_layer(&truth, 200, 3).unwrap();
    let cfg = SamplerConfig {
        k_upper: 5,
        iterations: 40,
        burn_in: 20,
        thin: 2,
        mode: "csp".into(),
        seed: 1,
        ..Default::default()
    };
    let draws = run_chain(&sim.dataset, &cfg).unwrap();
    let r = evaluate(&draws, &truth).unwrap();
    assert!((0.0..=1.0).contains(&r.g_error_entry));
    assert!(r.rmse.beta >= 0.0 && r.rmse.eta >= 0.0);
    let mut perm = r.permutation.clone();
    perm.sort_unstable();
    perm.dedup();
    assert_eq!(perm.len(), 4);
    assert!(perm.iter().all(|&c| (1..=5).contains(&c)));
}
