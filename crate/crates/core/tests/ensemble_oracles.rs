mod common;

use arp_sentinel::classifiers::{DecisionTreeModel, LayerModel};
use arp_sentinel::ensemble::{accuracy_weights, evaluate, weighted_vote};
use arp_sentinel::featurize::Scaler;
use arp_sentinel::rng::SimRng;
use arp_sentinel::{train_ensemble, EnsembleConfig, EnsembleModel, Label};

/// Scores both classes separately and picks the strictly larger one,
/// benign on an exact-or-rounding tie.
fn brute_force(weights: &[f64], votes: &[Label]) -> Label {
    let score = |class: Label| -> f64 {
        weights
            .iter()
            .zip(votes)
            .filter(|(_, v)| **v == class)
            .map(|(w, _)| w)
            .sum()
    };
    let (a, b) = (score(Label::Attack), score(Label::Benign));
    if a > b + 1e-12 {
        Label::Attack
    } else {
        Label::Benign
    }
}

fn constant_model(votes: &[Label], weights: Vec<f64>) -> EnsembleModel {
    EnsembleModel {
        layers: votes
            .iter()
            .map(|&v| LayerModel::Tree(DecisionTreeModel::leaf(1, v)))
            .collect(),
        validation_accuracies: weights.clone(),
        weights,
        scaler: Scaler {
            min: vec![0.0],
            max: vec![1.0],
        },
        feature_names: vec!["x".into()],
    }
}

#[test]
fn ensemble_predict_equals_brute_force_over_all_patterns() {
    let mut rng = SimRng::new(2024);
    for l in 1..=5usize {
        for _ in 0..100 {
            let raw: Vec<f64> = (0..l).map(|_| rng.next_f64()).collect();
            let weights = accuracy_weights(&raw).unwrap();
            for pattern in 0..(1u32 << l) {
                let votes: Vec<Label> = (0..l)
                    .map(|i| Label::from_attack(pattern >> i & 1 == 1))
                    .collect();
                let model = constant_model(&votes, weights.clone());
                assert_eq!(model.layer_votes(&[0.3]).unwrap(), votes);
                assert_eq!(model.predict(&[0.3]).unwrap(), brute_force(&weights, &votes));
                assert_eq!(weighted_vote(&weights, &votes), brute_force(&weights, &votes));
            }
        }
    }
}

#[test]
fn balanced_split_is_benign() {
    let votes = [Label::Attack, Label::Benign, Label::Benign];
    assert_eq!(weighted_vote(&[0.5, 0.3, 0.2], &votes), Label::Benign);
    assert_eq!(weighted_vote(&[0.6, 0.2, 0.2], &votes), Label::Attack);
    assert_eq!(
        weighted_vote(
            &[0.25, 0.25, 0.25, 0.25],
            &[Label::Attack, Label::Attack, Label::Benign, Label::Benign]
        ),
        Label::Benign
    );
}

#[test]
fn weights_are_scale_invariant_and_monotone() {
    let mut rng = SimRng::new(9);
    for _ in 0..500 {
        let l = 1 + rng.below(5);
        let acc: Vec<f64> = (0..l).map(|_| 0.01 + rng.next_f64()).collect();
        let w = accuracy_weights(&acc).unwrap();
        let c = 0.1 + 10.0 * rng.next_f64();
        let scaled: Vec<f64> = acc.iter().map(|a| a * c).collect();
        for (a, b) in w.iter().zip(accuracy_weights(&scaled).unwrap()) {
            assert!((a - b).abs() <= 1e-12);
        }
        assert!((w.iter().sum::<f64>() - 1.0).abs() <= 1e-12);
        for i in 0..l {
            for j in 0..l {
                if acc[i] > acc[j] {
                    assert!(w[i] > w[j]);
                }
            }
        }
    }
}

#[test]
fn weight_law_examples() {
    let w = accuracy_weights(&[0.9, 0.6, 0.3]).unwrap();
    for (a, b) in w.iter().zip([0.5, 1.0 / 3.0, 1.0 / 6.0]) {
        assert!((a - b).abs() <= 1e-12);
    }
    assert!(accuracy_weights(&[0.7; 4])
        .unwrap()
        .iter()
        .all(|x| (x - 0.25).abs() <= 1e-12));
}

#[test]
fn evaluate_agrees_with_counting_on_random_labels() {
    let mut rng = SimRng::new(31);
    let labels = common::random_labels(&mut rng, 1000);
    let rows = labels
        .iter()
        .map(|&l| (vec![rng.next_f64(), rng.next_f64()], l))
        .collect();
    let data = common::dataset(rows);
    let model = train_ensemble(&data, &EnsembleConfig::default()).unwrap();
    let report = evaluate(&model, &data).unwrap();
    let (mut tp, mut fp, mut fn_, mut tn) = (0, 0, 0, 0);
    for ex in &data.examples {
        match (model.predict(ex.features.as_slice()).unwrap(), ex.label) {
            (Label::Attack, Label::Attack) => tp += 1,
            (Label::Attack, Label::Benign) => fp += 1,
            (Label::Benign, Label::Attack) => fn_ += 1,
            (Label::Benign, Label::Benign) => tn += 1,
        }
    }
    let m = report.ensemble.matrix;
    assert_eq!((m.tp, m.fp, m.fn_, m.tn), (tp, fp, fn_, tn));
    assert_eq!(report.layers.len(), model.layers.len());
}
