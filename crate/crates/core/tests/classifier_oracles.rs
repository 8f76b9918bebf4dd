mod common;

use arp_sentinel::classifiers::{
    train_mlp, train_tree, DecisionTreeModel, MlpModel, MlpParams, TreeNode, TreeParams,
};
use arp_sentinel::featurize::Example;
use arp_sentinel::rng::SimRng;
use arp_sentinel::{Label, LabeledDataset};

fn accuracy(data: &LabeledDataset, predict: impl Fn(&[f64]) -> Label) -> f64 {
    let hits = data
        .examples
        .iter()
        .filter(|e| predict(e.features.as_slice()) == e.label)
        .count();
    hits as f64 / data.len() as f64
}

#[test]
fn mlp_gradient_matches_central_differences() {
    let eps = 1e-4;
    let mut worst: f64 = 0.0;
    for seed in 0..20 {
        // d = 2, h = 1: two input weights, one hidden bias, one output
        // weight and one output bias.
        let params = MlpParams {
            hidden: 1,
            seed,
            ..MlpParams::default()
        };
        let mut net = MlpModel::init(2, &params);
        assert_eq!(net.parameter_count(), 5);
        let mut rng = SimRng::new(seed + 1000);
        let p0: Vec<f64> = (0..5).map(|_| rng.uniform(-2.0, 2.0)).collect();
        net.set_parameters(&p0);
        let data = common::blobs(16, 0.1, seed);
        let batch: Vec<&Example> = data.examples.iter().collect();
        let (_, grad) = net.gradient(&batch);
        for i in 0..5 {
            let mut p = p0.clone();
            p[i] = p0[i] + eps;
            net.set_parameters(&p);
            let up = net.loss(&batch);
            p[i] = p0[i] - eps;
            net.set_parameters(&p);
            let down = net.loss(&batch);
            net.set_parameters(&p0);
            worst = worst.max(((up - down) / (2.0 * eps) - grad[i]).abs());
        }
    }
    assert!(worst <= 1e-5, "max abs diff {worst}");
}

/// Plain logistic regression by full-batch gradient descent.
fn logistic_oracle(train: &LabeledDataset) -> impl Fn(&[f64]) -> Label {
    let d = train.dim();
    let mut w = vec![0.0; d + 1];
    for _ in 0..2000 {
        let mut g = vec![0.0; d + 1];
        for ex in &train.examples {
            let x = ex.features.as_slice();
            let z = w[d] + x.iter().zip(&w).map(|(a, b)| a * b).sum::<f64>();
            let err = 1.0 / (1.0 + (-z).exp()) - if ex.label.is_attack() { 1.0 } else { 0.0 };
            for j in 0..d {
                g[j] += err * x[j];
            }
            g[d] += err;
        }
        for j in 0..=d {
            w[j] -= 0.5 * g[j] / train.len() as f64;
        }
    }
    move |x: &[f64]| {
        let z = w[d] + x.iter().zip(&w).map(|(a, b)| a * b).sum::<f64>();
        Label::from_attack(z >= 0.0)
    }
}

#[test]
fn mlp_separates_blobs_like_logistic_regression() {
    let train = common::blobs(400, 0.4, 1);
    let test = common::blobs(200, 0.4, 2);
    let oracle = logistic_oracle(&train);
    assert!(accuracy(&test, &oracle) >= 0.95);
    let net = train_mlp(
        &train,
        &MlpParams {
            seed: 3,
            ..MlpParams::default()
        },
    )
    .unwrap();
    let acc = accuracy(&test, |x| net.predict(x).unwrap());
    assert!(acc >= 0.95, "mlp test accuracy {acc}");
}

fn random_tree(rng: &mut SimRng, dim: usize, depth: usize, nodes: &mut Vec<TreeNode>) -> usize {
    let at = nodes.len();
    if depth == 0 || rng.below(4) == 0 {
        let label = Label::from_attack(rng.below(2) == 1);
        nodes.push(TreeNode::Leaf {
            label,
            benign: 0,
            attack: 0,
        });
        return at;
    }
    nodes.push(TreeNode::Leaf {
        label: Label::Benign,
        benign: 0,
        attack: 0,
    });
    let feature = rng.below(dim);
    let threshold = rng.next_f64();
    let left = random_tree(rng, dim, depth - 1, nodes);
    let right = random_tree(rng, dim, depth - 1, nodes);
    nodes[at] = TreeNode::Split {
        feature,
        threshold,
        left,
        right,
    };
    at
}

/// Recursive evaluation over the same arena, written independently of the
/// library's iterative walk.
fn eval(nodes: &[TreeNode], at: usize, x: &[f64]) -> Label {
    match nodes[at] {
        TreeNode::Leaf { label, .. } => label,
        TreeNode::Split {
            feature,
            threshold,
            left,
            right,
        } => {
            if x[feature] > threshold {
                eval(nodes, right, x)
            } else {
                eval(nodes, left, x)
            }
        }
    }
}

#[test]
fn tree_prediction_follows_paths() {
    let mut rng = SimRng::new(77);
    for _ in 0..200 {
        let dim = 1 + rng.below(4);
        let mut nodes = Vec::new();
        random_tree(&mut rng, dim, 6, &mut nodes);
        let tree = DecisionTreeModel {
            nodes,
            dim,
            params: TreeParams::default(),
        };
        tree.validate().unwrap();
        for _ in 0..50 {
            let x: Vec<f64> = (0..dim).map(|_| rng.next_f64()).collect();
            assert_eq!(tree.predict(&x).unwrap(), eval(&tree.nodes, 0, &x));
        }
    }
}

#[test]
fn stump_threshold_matches_exhaustive_scan() {
    let mut rng = SimRng::new(5);
    for _ in 0..20 {
        let xs: Vec<f64> = (0..100).map(|_| rng.next_f64()).collect();
        let data = common::dataset(
            xs.iter()
                .map(|&x| (vec![x], Label::from_attack(x > 0.5)))
                .collect(),
        );
        let tree = train_tree(
            &data,
            &TreeParams {
                max_depth: 8,
                min_leaf: 1,
            },
        )
        .unwrap();
        assert_eq!(tree.depth(), 1);
        let TreeNode::Split { threshold, .. } = tree.nodes[0] else {
            panic!("root is a leaf")
        };
        // Exhaustive scan: the best split separates the classes, i.e. any
        // cut in [max benign, min attack).
        let max_benign = xs.iter().copied().filter(|&x| x <= 0.5).fold(f64::MIN, f64::max);
        let min_attack = xs.iter().copied().filter(|&x| x > 0.5).fold(f64::MAX, f64::min);
        assert!(threshold >= max_benign && threshold < min_attack, "{threshold}");
        assert_eq!(accuracy(&data, |x| tree.predict(x).unwrap()), 1.0);
    }
}
