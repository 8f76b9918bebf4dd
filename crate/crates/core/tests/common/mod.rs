#![allow(dead_code)]

use arp_sentinel::featurize::Example;
use arp_sentinel::rng::SimRng;
use arp_sentinel::{FeatureVector, Label, LabeledDataset};

pub fn dataset(rows: Vec<(Vec<f64>, Label)>) -> LabeledDataset {
    let dim = rows.first().map_or(0, |r| r.0.len());
    let examples = rows
        .into_iter()
        .map(|(x, label)| Example {
            features: FeatureVector(x),
            label,
        })
        .collect();
    LabeledDataset::from_examples(dim, examples).unwrap()
}

/// `benign` points uniform in the unit box and `attack` points uniform in
/// the box shifted by `offset` on every axis.
pub fn two_boxes(benign: usize, attack: usize, dim: usize, offset: f64, seed: u64) -> LabeledDataset {
    let mut rng = SimRng::new(seed);
    let mut rows = Vec::new();
    for _ in 0..benign {
        rows.push(((0..dim).map(|_| rng.next_f64()).collect(), Label::Benign));
    }
    for _ in 0..attack {
        rows.push(((0..dim).map(|_| offset + rng.next_f64()).collect(), Label::Attack));
    }
    dataset(rows)
}

/// 2-D points in [0, 2)^2 on either side of the line x + y = 2 with a gap of `margin`
/// measured along the normal, shuffled.
pub fn blobs(n: usize, margin: f64, seed: u64) -> LabeledDataset {
    let mut rng = SimRng::new(seed);
    let mut rows = Vec::with_capacity(n);
    let half = margin / 2.0 * std::f64::consts::SQRT_2;
    while rows.len() < n {
        let x = rng.next_f64() * 2.0;
        let y = rng.next_f64() * 2.0;
        let s = x + y - 2.0;
        if s.abs() < half {
            continue;
        }
        rows.push((vec![x, y], Label::from_attack(s > 0.0)));
    }
    dataset(rows)
}

pub fn random_labels(rng: &mut SimRng, n: usize) -> Vec<Label> {
    (0..n)
        .map(|_| Label::from_attack(rng.next_u64() & 1 == 1))
        .collect()
}
