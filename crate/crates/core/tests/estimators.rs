mod common;

use common::*;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use wsmom::estimators::*;
use wsmom::ising::{calibrate, CalibrationTarget, IsingModel};
use wsmom::SourceMatrix;

fn pop(model: &IsingModel, agg: Aggregation, known: &[(usize, usize)]) -> Vec<f64> {
    let mom = PairwiseMoments::population(model);
    estimate_triplet_from(&mom, agg, &mut rng(0), known).unwrap().a_hat
}

fn max_err(x: &[f64], y: &[f64]) -> f64 {
    x.iter().zip(y).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max)
}

#[test]
fn well_specified_population_is_exact_for_every_aggregation() {
    let model = f1_model(0);
    let a = model.diagnostics().a;
    for agg in [Aggregation::Single, Aggregation::Mean, Aggregation::Median] {
        assert!(max_err(&pop(&model, agg, &[]), &a) <= 1e-12, "{agg:?}");
    }
}

#[test]
fn median_is_exact_under_misspecification_and_mean_is_not() {
    let model = f1_model(5);
    let a = model.diagnostics().a;
    assert!(max_err(&pop(&model, Aggregation::Median, &[]), &a) <= 1e-12);
    assert!(max_err(&pop(&model, Aggregation::Mean, &[]), &a) > 1e-4);
}

#[test]
fn median_keeps_bias_when_conditions_fail() {
    // m = 4 with two edges: for every source two of its three pairs are biased
    let model = calibrate(&CalibrationTarget {
        accuracies: F1_ACCURACIES[..4].to_vec(),
        edges: vec![(0, 1), (2, 3)],
        eps: vec![0.1, 0.1],
        class_balance: 0.5,
    })
    .unwrap();
    let a = model.diagnostics().a;
    assert!(max_err(&pop(&model, Aggregation::Median, &[]), &a) > 1e-4);
}

#[test]
fn triplet_across_an_edge_underestimates() {
    let model = calibrate(&CalibrationTarget {
        accuracies: vec![0.6, 0.7, 0.65],
        edges: vec![(1, 2)],
        eps: vec![0.1],
        class_balance: 0.5,
    })
    .unwrap();
    let diag = model.diagnostics();
    let mom = PairwiseMoments::population(&model);
    let est = triplet_raw(&mom, 0, 1, 2, DEFAULT_FLOOR).unwrap();
    assert!(est < diag.a[0]);
    let b2 = diag.b_min * diag.b_min;
    assert!(diag.a[0] - est >= diag.eps_min * b2 / 2.0 - 1e-12);
}

#[test]
fn single_random_bias_direction() {
    let mut r = rng(13);
    for _ in 0..20 {
        let m = r.random_range(4..=8);
        let d = r.random_range(1..=m / 2);
        let model = random_model(&mut r, m, d);
        let a = model.diagnostics().a;
        // the expected single-random estimate is the mean over pairs
        let expected = pop(&model, Aggregation::Mean, &[]);
        for i in 0..m {
            if model.partner(i).is_none() {
                assert!(expected[i] <= a[i] + 1e-12, "source {i} outside every edge overestimated");
            }
        }
    }
}

/// Fraction of usable pairs whose triplet value misses `a_i`.
fn biased_fraction(model: &IsingModel, known: &[(usize, usize)]) -> Vec<f64> {
    let m = model.m();
    let a = model.diagnostics().a;
    let mom = PairwiseMoments::population(model);
    let hit = |x: usize, y: usize| known.iter().any(|&(p, q)| (p, q) == (x, y) || (q, p) == (x, y));
    (0..m)
        .map(|i| {
            let mut errs = Vec::new();
            for j in 0..m {
                for k in (j + 1)..m {
                    if j == i || k == i || hit(i, j) || hit(i, k) || hit(j, k) {
                        continue;
                    }
                    let e = (triplet_raw(&mom, i, j, k, DEFAULT_FLOOR).unwrap() - a[i]).abs();
                    errs.push(f64::from(u8::from(e > 1e-12)));
                }
            }
            errs.iter().sum::<f64>() / errs.len() as f64
        })
        .collect()
}

#[test]
fn excluding_known_edges_never_increases_biased_fraction() {
    let mut r = rng(29);
    for _ in 0..200 {
        let m = r.random_range(5..=8);
        let d = r.random_range(1..=m / 2);
        let model = random_model(&mut r, m, d);
        let edges: Vec<(usize, usize)> = model.edges().iter().map(|e| (e.i, e.j)).collect();
        let mut prev = biased_fraction(&model, &[]);
        for k in 1..=edges.len() {
            let cur = biased_fraction(&model, &edges[..k]);
            for i in 0..m {
                assert!(cur[i] <= prev[i] + 1e-12, "source {i}, {k} known of {edges:?}");
            }
            prev = cur;
        }
    }
}

#[test]
fn knowing_every_edge_removes_all_bias() {
    let mut r = rng(30);
    for _ in 0..30 {
        let m = r.random_range(5..=8);
        let d = r.random_range(1..=(m - 3) / 2);
        let model = random_model(&mut r, m, d);
        let a = model.diagnostics().a;
        let edges: Vec<(usize, usize)> = model.edges().iter().map(|e| (e.i, e.j)).collect();
        for agg in [Aggregation::Single, Aggregation::Mean, Aggregation::Median] {
            assert!(max_err(&pop(&model, agg, &edges), &a) < 1e-12);
        }
    }
}

#[test]
fn partial_knowledge_can_unbalance_the_median() {
    // edges (0,3) and (2,4); knowing (0,3) leaves source 2 with three
    // over-estimating pairs out of five
    let model = calibrate(&CalibrationTarget {
        accuracies: vec![0.7, 0.6, 0.65, 0.75, 0.7],
        edges: vec![(0, 3), (2, 4)],
        eps: vec![0.1, 0.1],
        class_balance: 0.5,
    })
    .unwrap();
    let a = model.diagnostics().a;
    let blind = pop(&model, Aggregation::Median, &[]);
    let partial = pop(&model, Aggregation::Median, &[(0, 3)]);
    assert!((blind[2] - a[2]).abs() < 1e-12);
    assert!(partial[2] > a[2] + 1e-4);
}

#[test]
fn labeled_estimate_on_large_sample() {
    let model = f1_model(5);
    let data = model.sample(100_000, &mut rng(4)).unwrap();
    let est = estimate_labeled(&data).unwrap();
    assert!(max_err(&est.a_hat, &model.diagnostics().a) <= 0.02);
}

#[test]
fn labeled_estimate_is_unbiased() {
    let model = f1_model(5);
    let a = model.diagnostics().a;
    let reps = 2000;
    let mut sum = vec![0.0; 10];
    let mut sq = vec![0.0; 10];
    for t in 0..reps {
        let counts = model.sample_counts(50, &mut rng(1000 + t)).unwrap();
        let est = estimate_labeled_from(&LabeledMoments::from_counts(&counts).unwrap());
        for i in 0..10 {
            sum[i] += est.a_hat[i];
            sq[i] += est.a_hat[i] * est.a_hat[i];
        }
    }
    for i in 0..10 {
        let mean = sum[i] / reps as f64;
        let var = sq[i] / reps as f64 - mean * mean;
        let se = (var / reps as f64).sqrt();
        assert!((mean - a[i]).abs() <= 3.0 * se, "source {i}");
    }
}

#[test]
fn triplet_is_consistent_when_well_specified() {
    let model = f1_model(0);
    let a = model.diagnostics().a;
    let mut errs = Vec::new();
    for n in [1_000usize, 10_000, 100_000] {
        // average over a few draws to make the ordering robust
        let mut e = 0.0;
        for t in 0..8 {
            let counts = model.sample_counts(n, &mut rng(t)).unwrap();
            let mom = PairwiseMoments::from_counts(&counts).unwrap();
            let est = estimate_triplet_from(&mom, Aggregation::Mean, &mut rng(t), &[]).unwrap();
            e += max_err(&est.a_hat, &a) / 8.0;
        }
        errs.push(e);
    }
    assert!(errs[0] > errs[1] && errs[1] > errs[2], "{errs:?}");
    assert!(errs[2] <= 0.01);
}

#[test]
fn triplet_needs_three_sources() {
    let data = SourceMatrix::from_rows(&[vec![1, 1]], None).unwrap();
    assert!(estimate_triplet(&data, Aggregation::Mean, 0, &[]).is_err());
}

#[test]
fn all_degenerate_is_estimation_error() {
    let rows: Vec<Vec<i8>> = (0..4)
        .map(|r| vec![1, if r % 2 == 0 { 1 } else { -1 }, if r < 2 { 1 } else { -1 }])
        .collect();
    // columns 1 and 2 are orthogonal, so source 0 has no usable pair
    let data = SourceMatrix::from_rows(&rows, None).unwrap();
    assert!(matches!(
        estimate_triplet(&data, Aggregation::Median, 0, &[]),
        Err(wsmom::Error::Estimation(_))
    ));
}

#[test]
fn gs_scalarised_check() {
    // rows z = lambda * y with sample covariance sigma^2 I: build a sample
    // whose columns are orthogonal with equal variance
    let rows = vec![
        vec![1, 1, 1],
        vec![1, -1, -1],
        vec![-1, 1, -1],
        vec![-1, -1, 1],
        vec![1, 1, 1],
        vec![1, -1, -1],
        vec![-1, 1, -1],
        vec![-1, -1, 1],
    ];
    let data = SourceMatrix::from_rows(&rows, Some(vec![1; 8])).unwrap();
    let stats = LabeledMoments::from_matrix(&data).unwrap();
    assert_eq!(stats.agreement(), &[0.0, 0.0, 0.0]);
    // sample covariance is (8/7) I, divided by n_L = 8 gives sigma^2 = 1/7
    let sigma = (1.0f64 / 7.0).sqrt();
    let u = AccuracyEstimate::new(vec![0.1, 0.2, 0.2], Method::TripletMean);
    let dist = (0.01f64 + 0.04 + 0.04).sqrt();
    for r in [0.1, 0.5, 1.0] {
        let out = combine_green_strawderman(&u, &stats, Some(r)).unwrap();
        let expect = (r / (dist / sigma)).min(1.0);
        assert!((out.alpha.unwrap() - expect).abs() < 1e-6, "r={r}");
        for i in 0..3 {
            assert!((out.a_hat[i] - expect * u.a_hat[i]).abs() < 1e-6);
        }
    }
}

#[test]
fn quadratic_triplets_recover_symmetric_ising_sources() {
    let model = f1_model(0);
    let diag = model.diagnostics();
    let mom = PairwiseMoments::population(&model);
    let est = estimate_quadratic_triplet_from(&mom, 0.5, Aggregation::Mean, &mut rng(0)).unwrap();
    for i in 0..10 {
        assert!((est.pos_given_pos[i] - 0.5 * (1.0 + diag.a[i])).abs() < 1e-9);
        assert!((est.pos_given_neg[i] - 0.5 * (1.0 - diag.a[i])).abs() < 1e-9);
    }
}

#[test]
fn quadratic_triplets_with_skewed_ising_balance() {
    let mut target = f1_target(0);
    target.class_balance = 0.35;
    let model = calibrate(&target).unwrap();
    let diag = model.diagnostics();
    let mom = PairwiseMoments::population(&model);
    let est = estimate_quadratic_triplet_from(&mom, 0.35, Aggregation::Median, &mut rng(0)).unwrap();
    for i in 0..10 {
        assert!((est.accuracy(i) - diag.a[i]).abs() < 1e-9);
    }
}

#[test]
fn median_of_quadratic_triplets_is_robust_to_edges() {
    let model = f1_model(5);
    let diag = model.diagnostics();
    let mom = PairwiseMoments::population(&model);
    let med = estimate_quadratic_triplet_from(&mom, 0.5, Aggregation::Median, &mut rng(0)).unwrap();
    let mean = estimate_quadratic_triplet_from(&mom, 0.5, Aggregation::Mean, &mut rng(0)).unwrap();
    let err = |e: &ClassConditionalEstimate| max_err(&e.accuracies(), &diag.a);
    assert!(err(&med) < 1e-9);
    assert!(err(&mean) > 1e-4);
}

proptest! {
    #[test]
    fn linear_combination_is_affine(
        u in prop::collection::vec(-1.0f64..1.0, 4),
        l in prop::collection::vec(-1.0f64..1.0, 4),
        x in 0.0f64..1.0,
    ) {
        let eu = AccuracyEstimate::new(u, Method::TripletMean);
        let el = AccuracyEstimate::new(l, Method::Labeled);
        let at = |a| combine_linear(&eu, &el, a).unwrap().a_hat;
        let (p0, p1, px) = (at(0.0), at(1.0), at(x));
        for i in 0..4 {
            prop_assert!((px[i] - (p0[i] + x * (p1[i] - p0[i]))).abs() < 1e-12);
        }
    }

    #[test]
    fn estimates_stay_in_range(seed in 0u64..500, n in 1usize..200) {
        let mut r = ChaCha8Rng::seed_from_u64(seed);
        let rows: Vec<Vec<i8>> = (0..n)
            .map(|_| (0..5).map(|_| if r.random_bool(0.6) { 1 } else { -1 }).collect())
            .collect();
        let labels = (0..n).map(|_| if r.random_bool(0.5) { 1 } else { -1 }).collect();
        let data = SourceMatrix::from_rows(&rows, Some(labels)).unwrap();
        for agg in [Aggregation::Single, Aggregation::Mean, Aggregation::Median] {
            if let Ok(est) = estimate_triplet(&data, agg, seed, &[]) {
                prop_assert!(est.a_hat.iter().all(|a| (0.0..=1.0).contains(a)));
            }
        }
        let lab = estimate_labeled(&data).unwrap();
        prop_assert!(lab.a_hat.iter().all(|a| (-1.0..=1.0).contains(a)));
        if let Ok(cc) = estimate_quadratic_triplet(&data, 0.5, Aggregation::Mean, seed) {
            for i in 0..5 {
                let mu = cc.mu(i);
                prop_assert!(mu.iter().flatten().all(|p| (0.0..=1.0).contains(p)));
            }
        }
    }
}
