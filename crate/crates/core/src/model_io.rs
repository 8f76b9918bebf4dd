//! `#arp-model v1` text format.
//!
//! The file is a header line followed by bracketed sections. Each section
//! holds `key=value` lines; tree sections additionally hold one line per
//! node in arena order, `S <feature> <threshold> <left> <right>` for splits
//! and `L <label> <benign> <attack>` for leaves.
//!
//! ```text
//! #arp-model v1
//! [ensemble]          layers, dim, features, weights, validation_accuracies
//! [scaler]            min, max
//! [layer 0 tree]      max_depth, min_leaf, nodes, then node lines
//! [layer 1 forest]    trees, features_per_split, dim
//! [layer 1 tree 0]    one section per forest tree
//! [layer 2 mlp]       inputs, hidden, training hyperparameters, w1, b1, w2, b2
//! ```

use std::fmt::Write as _;
use std::path::Path;

use crate::artifact::Header;
use crate::classifiers::{
    DecisionTreeModel, LayerModel, MlpModel, MlpParams, RandomForestModel, TreeNode, TreeParams,
};
use crate::ensemble::EnsembleModel;
use crate::error::{Error, Result};
use crate::featurize::Scaler;

pub const MODEL_MAGIC: &str = "arp-model";

fn join(values: &[f64]) -> String {
    values.iter().map(|v| v.to_string()).collect::<Vec<_>>().join(",")
}

fn render_tree(out: &mut String, title: &str, tree: &DecisionTreeModel) {
    let _ = writeln!(out, "[{title}]");
    let _ = writeln!(out, "max_depth={}", tree.params.max_depth);
    let _ = writeln!(out, "min_leaf={}", tree.params.min_leaf);
    let _ = writeln!(out, "dim={}", tree.dim);
    let _ = writeln!(out, "nodes={}", tree.nodes.len());
    for node in &tree.nodes {
        let _ = match node {
            TreeNode::Split {
                feature,
                threshold,
                left,
                right,
            } => writeln!(out, "S {feature} {threshold} {left} {right}"),
            TreeNode::Leaf {
                label,
                benign,
                attack,
            } => writeln!(out, "L {label} {benign} {attack}"),
        };
    }
}

pub fn render_model(model: &EnsembleModel, header: &Header) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "{header}");
    let _ = writeln!(out, "[ensemble]");
    let _ = writeln!(out, "layers={}", model.layers.len());
    let _ = writeln!(out, "dim={}", model.dim());
    let _ = writeln!(out, "features={}", model.feature_names.join(","));
    let _ = writeln!(out, "weights={}", join(&model.weights));
    let _ = writeln!(
        out,
        "validation_accuracies={}",
        join(&model.validation_accuracies)
    );
    let _ = writeln!(out, "[scaler]");
    let _ = writeln!(out, "min={}", join(&model.scaler.min));
    let _ = writeln!(out, "max={}", join(&model.scaler.max));
    for (l, layer) in model.layers.iter().enumerate() {
        match layer {
            LayerModel::Tree(t) => render_tree(&mut out, &format!("layer {l} tree"), t),
            LayerModel::Forest(f) => {
                let _ = writeln!(out, "[layer {l} forest]");
                let _ = writeln!(out, "trees={}", f.trees.len());
                let _ = writeln!(out, "features_per_split={}", f.features_per_split);
                let _ = writeln!(out, "dim={}", f.dim);
                for (i, t) in f.trees.iter().enumerate() {
                    render_tree(&mut out, &format!("layer {l} tree {i}"), t);
                }
            }
            LayerModel::Mlp(m) => {
                let _ = writeln!(out, "[layer {l} mlp]");
                let _ = writeln!(out, "inputs={}", m.inputs);
                let _ = writeln!(out, "hidden={}", m.hidden);
                let _ = writeln!(out, "learning_rate={}", m.params.learning_rate);
                let _ = writeln!(out, "epochs={}", m.params.epochs);
                let _ = writeln!(out, "batch_size={}", m.params.batch_size);
                let _ = writeln!(out, "seed={}", m.params.seed);
                let _ = writeln!(out, "w1={}", join(&m.w1));
                let _ = writeln!(out, "b1={}", join(&m.b1));
                let _ = writeln!(out, "w2={}", join(&m.w2));
                let _ = writeln!(out, "b2={}", m.b2);
            }
        }
    }
    out
}

pub fn write_model(model: &EnsembleModel, path: &Path, header: &Header) -> Result<()> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
    }
    std::fs::write(path, render_model(model, header)).map_err(|e| Error::io(path, e))
}

pub fn read_model(path: &Path) -> Result<EnsembleModel> {
    read_model_with_header(path).map(|(_, m)| m)
}

pub fn read_model_with_header(path: &Path) -> Result<(Header, EnsembleModel)> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_model(&text, path)
}

struct Section<'a> {
    title: &'a str,
    line: usize,
    body: Vec<(usize, &'a str)>,
}

struct Cursor<'a, 'p> {
    sections: Vec<Section<'a>>,
    next: usize,
    path: &'p Path,
}

impl<'a> Section<'a> {
    fn value(&self, key: &str, path: &Path) -> Result<&'a str> {
        self.body
            .iter()
            .find_map(|(_, l)| l.strip_prefix(key).and_then(|r| r.strip_prefix('=')))
            .ok_or_else(|| Error::parse(path, self.line, format!("section [{}] lacks `{key}`", self.title)))
    }

    fn number<T: std::str::FromStr>(&self, key: &str, path: &Path) -> Result<T> {
        let raw = self.value(key, path)?;
        raw.parse()
            .map_err(|_| Error::parse(path, self.line, format!("invalid `{key}` value `{raw}`")))
    }

    fn reals(&self, key: &str, path: &Path) -> Result<Vec<f64>> {
        let raw = self.value(key, path)?;
        if raw.is_empty() {
            return Ok(Vec::new());
        }
        raw.split(',')
            .map(|v| {
                v.parse::<f64>()
                    .ok()
                    .filter(|x| x.is_finite())
                    .ok_or_else(|| Error::parse(path, self.line, format!("invalid real `{v}` in `{key}`")))
            })
            .collect()
    }
}

impl<'a> Cursor<'a, '_> {
    fn take(&mut self, title: &str) -> Result<&Section<'a>> {
        let line = self.sections.get(self.next).map(|s| s.line).unwrap_or(0);
        match self.sections.get(self.next) {
            Some(s) if s.title == title => {
                self.next += 1;
                Ok(&self.sections[self.next - 1])
            }
            Some(s) => Err(Error::parse(
                self.path,
                line,
                format!("expected section [{title}], found [{}]", s.title),
            )),
            None => Err(Error::parse(
                self.path,
                line,
                format!("missing section [{title}]"),
            )),
        }
    }

    fn tree(&mut self, title: &str) -> Result<DecisionTreeModel> {
        let path = self.path;
        let s = self.take(title)?;
        let count: usize = s.number("nodes", path)?;
        let node_lines: Vec<_> = s
            .body
            .iter()
            .filter(|(_, l)| l.starts_with("S ") || l.starts_with("L "))
            .collect();
        if node_lines.len() != count {
            return Err(Error::parse(
                path,
                s.line,
                format!("nodes={count} but {} node lines", node_lines.len()),
            ));
        }
        let mut nodes = Vec::with_capacity(count);
        for &&(line, text) in &node_lines {
            let f: Vec<&str> = text.split(' ').collect();
            let bad = || Error::parse(path, line, format!("malformed node `{text}`"));
            let node = match (f.first().copied(), f.len()) {
                (Some("S"), 5) => TreeNode::Split {
                    feature: f[1].parse().map_err(|_| bad())?,
                    threshold: f[2].parse().map_err(|_| bad())?,
                    left: f[3].parse().map_err(|_| bad())?,
                    right: f[4].parse().map_err(|_| bad())?,
                },
                (Some("L"), 4) => TreeNode::Leaf {
                    label: f[1].parse().map_err(|_| bad())?,
                    benign: f[2].parse().map_err(|_| bad())?,
                    attack: f[3].parse().map_err(|_| bad())?,
                },
                _ => return Err(bad()),
            };
            nodes.push(node);
        }
        let tree = DecisionTreeModel {
            nodes,
            dim: s.number("dim", path)?,
            params: TreeParams {
                max_depth: s.number("max_depth", path)?,
                min_leaf: s.number("min_leaf", path)?,
            },
        };
        tree.validate()?;
        Ok(tree)
    }
}

pub fn parse_model(text: &str, path: &Path) -> Result<(Header, EnsembleModel)> {
    let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l));
    let (_, first) = lines
        .next()
        .ok_or_else(|| Error::parse(path, 1, "empty file, missing header"))?;
    let header = Header::parse(MODEL_MAGIC, first, path)?;

    let mut sections: Vec<Section> = Vec::new();
    for (line, text) in lines {
        if text.is_empty() {
            continue;
        }
        if let Some(title) = text.strip_prefix('[').and_then(|t| t.strip_suffix(']')) {
            sections.push(Section {
                title,
                line,
                body: Vec::new(),
            });
        } else {
            sections
                .last_mut()
                .ok_or_else(|| Error::parse(path, line, "content before first section"))?
                .body
                .push((line, text));
        }
    }
    let mut cur = Cursor {
        sections,
        next: 0,
        path,
    };

    let ens = cur.take("ensemble")?;
    let layer_count: usize = ens.number("layers", path)?;
    let dim: usize = ens.number("dim", path)?;
    let features: Vec<String> = ens
        .value("features", path)?
        .split(',')
        .filter(|s| !s.is_empty())
        .map(str::to_owned)
        .collect();
    let weights = ens.reals("weights", path)?;
    let validation_accuracies = ens.reals("validation_accuracies", path)?;

    let sc = cur.take("scaler")?;
    let scaler = Scaler {
        min: sc.reals("min", path)?,
        max: sc.reals("max", path)?,
    };
    if scaler.min.len() != dim || scaler.max.len() != dim {
        return Err(Error::parse(
            path,
            sc.line,
            format!("scaler does not have {dim} entries"),
        ));
    }

    let mut layers = Vec::with_capacity(layer_count);
    for l in 0..layer_count {
        let (title, line) = match cur.sections.get(cur.next) {
            Some(s) => (s.title.to_owned(), s.line),
            None => return Err(Error::parse(path, 0, format!("missing section for layer {l}"))),
        };
        let layer = if title == format!("layer {l} tree") {
            LayerModel::Tree(cur.tree(&title)?)
        } else if title == format!("layer {l} forest") {
            let s = cur.take(&title)?;
            let count: usize = s.number("trees", path)?;
            let features_per_split = s.number("features_per_split", path)?;
            let forest_dim = s.number("dim", path)?;
            let trees = (0..count)
                .map(|i| cur.tree(&format!("layer {l} tree {i}")))
                .collect::<Result<Vec<_>>>()?;
            LayerModel::Forest(RandomForestModel {
                trees,
                features_per_split,
                dim: forest_dim,
            })
        } else if title == format!("layer {l} mlp") {
            let s = cur.take(&title)?;
            let m = MlpModel {
                inputs: s.number("inputs", path)?,
                hidden: s.number("hidden", path)?,
                w1: s.reals("w1", path)?,
                b1: s.reals("b1", path)?,
                w2: s.reals("w2", path)?,
                b2: s.number("b2", path)?,
                params: MlpParams {
                    hidden: s.number("hidden", path)?,
                    learning_rate: s.number("learning_rate", path)?,
                    epochs: s.number("epochs", path)?,
                    batch_size: s.number("batch_size", path)?,
                    seed: s.number("seed", path)?,
                },
            };
            m.validate()?;
            LayerModel::Mlp(m)
        } else {
            return Err(Error::parse(
                path,
                line,
                format!("unexpected section [{title}] for layer {l}"),
            ));
        };
        layers.push(layer);
    }
    if let Some(extra) = cur.sections.get(cur.next) {
        return Err(Error::parse(
            path,
            extra.line,
            format!("unexpected section [{}]", extra.title),
        ));
    }
    let model = EnsembleModel {
        layers,
        weights,
        validation_accuracies,
        scaler,
        feature_names: features,
    };
    model.validate()?;
    Ok((header, model))
}
