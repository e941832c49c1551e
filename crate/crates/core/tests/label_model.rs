mod common;

use common::*;
use proptest::prelude::*;
use wsmom::analysis::exact_generalization_error;
use wsmom::estimators::*;
use wsmom::label_model::*;
use wsmom::SourceMatrix;

fn model(a: &[f64], p: f64) -> LabelModel {
    LabelModel::from_accuracies(&AccuracyEstimate::new(a.to_vec(), Method::Labeled), p).unwrap()
}

proptest! {
    #[test]
    fn normalized_posteriors_sum_to_one(
        a in prop::collection::vec(-0.99f64..0.99, 1..7),
        p in 0.01f64..0.99,
        config in 0u64..128,
    ) {
        let lm = model(&a, p);
        let config = config & ((1 << a.len()) - 1);
        let post = lm.posterior_pair(config).unwrap();
        prop_assert!((post[0] + post[1] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn flipping_votes_and_balance_complements_posterior(
        a in prop::collection::vec(-0.99f64..0.99, 1..7),
        p in 0.01f64..0.99,
        config in 0u64..128,
    ) {
        let m = a.len();
        let config = config & ((1 << m) - 1);
        let flipped = !config & ((1 << m) - 1);
        let q = model(&a, p).posterior_pair(config).unwrap()[1];
        let q_flip = model(&a, 1.0 - p).posterior_pair(flipped).unwrap()[1];
        prop_assert!((q + q_flip - 1.0).abs() < 1e-12);
        // the same holds when the accuracies are negated instead of the votes
        let neg: Vec<f64> = a.iter().map(|x| -x).collect();
        let q_neg = model(&neg, 1.0 - p).posterior_pair(config).unwrap()[1];
        prop_assert!((q + q_neg - 1.0).abs() < 1e-12);
    }

    #[test]
    fn positive_vote_never_lowers_posterior(
        a in prop::collection::vec(0.0f64..0.99, 1..7),
        config in 0u64..128,
        k in 0usize..7,
    ) {
        let m = a.len();
        let k = k % m;
        let config = config & ((1 << m) - 1) & !(1 << k);
        let lm = model(&a, 0.5);
        let before = lm.posterior_pair(config).unwrap()[1];
        let after = lm.posterior_pair(config | 1 << k).unwrap()[1];
        prop_assert!(after >= before - 1e-15);
    }
}

#[test]
fn labeled_fit_approaches_conditional_entropy() {
    let truth = f1_model(0);
    let data = truth.sample(10_000, &mut rng(6)).unwrap();
    let lm = LabelModel::from_accuracies(&estimate_labeled(&data).unwrap(), 0.5).unwrap();
    let ex = exact_generalization_error(&truth, &lm).unwrap();
    assert!(ex.excess.abs() <= 0.01, "{ex:?}");
    // the plug-in test loss on a fresh sample agrees with the exact value
    let test = truth.sample(50_000, &mut rng(7)).unwrap();
    let ce = cross_entropy(&lm, &test).unwrap();
    assert!((ce - ex.loss).abs() < 0.01);
}

#[test]
fn class_conditional_and_symmetric_models_agree() {
    let a = [0.3, 0.5, 0.7];
    let sym = model(&a, 0.4);
    let cc = ClassConditionalEstimate::from_accuracies(&a, 0.4).unwrap();
    let lm = LabelModel::from_class_conditional(&cc).unwrap();
    for c in 0..8 {
        let x = sym.posterior_pair(c).unwrap();
        let y = lm.posterior_pair(c).unwrap();
        assert!((x[1] - y[1]).abs() < 1e-12);
    }
}

#[test]
fn soft_labels_follow_rows() {
    let lm = model(&[0.6, 0.6], 0.5);
    let data = SourceMatrix::from_rows(&[vec![1, 1], vec![-1, -1], vec![1, -1]], None).unwrap();
    let soft = lm.soft_labels(&data).unwrap();
    assert!((soft.p_y1[0] - 0.64 / 0.68).abs() < 1e-12);
    assert!((soft.p_y1[0] + soft.p_y1[1] - 1.0).abs() < 1e-12);
    assert!((soft.p_y1[2] - 0.5).abs() < 1e-12);
    assert!(soft.soft_labels().iter().all(|s| (-1.0..=1.0).contains(s)));
}

#[test]
fn f1_uses_threshold() {
    let lm = model(&[0.6], 0.5);
    let data = SourceMatrix::from_rows(&[vec![1], vec![-1]], Some(vec![1, 1])).unwrap();
    let at_half = f1_score(&lm, &data, 0.5).unwrap();
    assert_eq!(at_half.recall, 0.5);
    let low = f1_score(&lm, &data, 0.1).unwrap();
    assert_eq!(low.f1, 1.0);
}
