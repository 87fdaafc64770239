//! Depth-limited CART-style decision trees for two classes.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::{FeatureMatrix, FeatureVector};
use crate::label::Label;

const GAIN_EPS: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Criterion {
    Gini,
    Entropy,
}

impl Criterion {
    /// Impurity of a two-class histogram.
    pub fn impurity(self, pos: f64, neg: f64) -> f64 {
        let n = pos + neg;
        if n <= 0.0 {
            return 0.0;
        }
        let (p, q) = (pos / n, neg / n);
        match self {
            Criterion::Gini => 1.0 - p * p - q * q,
            Criterion::Entropy => {
                let h = |x: f64| if x > 0.0 { -x * x.log2() } else { 0.0 };
                h(p) + h(q)
            }
        }
    }
}

impl fmt::Display for Criterion {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Criterion::Gini => "gini",
            Criterion::Entropy => "entropy",
        })
    }
}

impl FromStr for Criterion {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "gini" => Ok(Criterion::Gini),
            "entropy" => Ok(Criterion::Entropy),
            _ => Err(Error::InvalidInput(format!("unknown criterion {s:?}"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TreeConfig {
    pub criterion: Criterion,
    pub max_depth: usize,
    /// Inclusive range of depths searched during validation.
    pub depth_range: (usize, usize),
    /// Weight samples by `n / (2 n_c)` in impurities and leaf votes.
    #[serde(default)]
    pub weighted: bool,
}

/// Depth ranges searched for engineered/PCA features and for raw maps.
pub const PROFILE_DEPTH_RANGE: (usize, usize) = (1, 3);
pub const RAW_MAP_DEPTH_RANGE: (usize, usize) = (1, 5);

impl TreeConfig {
    pub fn new(criterion: Criterion, max_depth: usize) -> Self {
        TreeConfig {
            criterion,
            max_depth,
            depth_range: PROFILE_DEPTH_RANGE,
            weighted: false,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let (lo, hi) = self.depth_range;
        if self.max_depth < 1 || lo < 1 || lo > hi {
            return Err(Error::Config(format!(
                "invalid tree depths: max_depth {}, range {lo}..={hi}",
                self.max_depth
            )));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Split {
    pub feature: usize,
    pub threshold: f64,
    pub left: usize,
    pub right: usize,
    pub gain: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TreeNode {
    pub depth: usize,
    /// Sample counts `[reduced, unreduced]` reaching this node.
    pub counts: [usize; 2],
    /// Class weights summed the same way (equal to `counts` when unweighted).
    pub histogram: [f64; 2],
    /// Majority label; ties go to reduced.
    pub label: Label,
    pub split: Option<Split>,
}

/// Nodes in preorder; the root is `nodes[0]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TreeModel {
    pub criterion: Criterion,
    pub max_depth: usize,
    pub feature_names: Vec<String>,
    pub nodes: Vec<TreeNode>,
}

impl TreeModel {
    pub fn depth(&self) -> usize {
        self.nodes
            .iter()
            .filter(|n| n.split.is_none())
            .map(|n| n.depth)
            .max()
            .unwrap_or(0)
    }

    pub fn dim(&self) -> usize {
        self.feature_names.len()
    }

    /// Predict as if the tree had been grown to `depth` only. Greedy growth
    /// is top-down, so this equals training with `max_depth = depth`.
    pub fn predict_truncated(&self, x: &[f64], depth: usize) -> Result<Label> {
        if x.len() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                actual: x.len(),
            });
        }
        let mut node = &self.nodes[0];
        while let Some(s) = node.split.filter(|_| node.depth < depth) {
            node = &self.nodes[if x[s.feature] <= s.threshold {
                s.left
            } else {
                s.right
            }];
        }
        Ok(node.label)
    }
}

fn majority(hist: [f64; 2]) -> Label {
    if hist[0] >= hist[1] {
        Label::Reduced
    } else {
        Label::Unreduced
    }
}

struct Grower<'a> {
    rows: Vec<&'a [f64]>,
    labels: Vec<Label>,
    weight: [f64; 2],
    cfg: &'a TreeConfig,
    nodes: Vec<TreeNode>,
}

impl Grower<'_> {
    fn histogram(&self, idx: &[usize]) -> ([usize; 2], [f64; 2]) {
        let mut counts = [0, 0];
        for &i in idx {
            counts[usize::from(!self.labels[i].is_positive())] += 1;
        }
        let hist = [
            counts[0] as f64 * self.weight[0],
            counts[1] as f64 * self.weight[1],
        ];
        (counts, hist)
    }

    fn best_split(&self, idx: &[usize], hist: [f64; 2]) -> Option<(usize, f64, f64)> {
        let crit = self.cfg.criterion;
        let total = hist[0] + hist[1];
        let parent = crit.impurity(hist[0], hist[1]);
        let dim = self.rows[idx[0]].len();
        let mut best: Option<(usize, f64, f64)> = None;
        let mut order: Vec<usize> = idx.to_vec();
        for f in 0..dim {
            order.sort_by(|&a, &b| self.rows[a][f].total_cmp(&self.rows[b][f]).then(a.cmp(&b)));
            let first = self.rows[order[0]][f];
            if first == self.rows[order[order.len() - 1]][f] {
                continue;
            }
            let mut left = [0.0, 0.0];
            for k in 0..order.len() - 1 {
                let i = order[k];
                let c = usize::from(!self.labels[i].is_positive());
                left[c] += self.weight[c];
                let (a, b) = (self.rows[i][f], self.rows[order[k + 1]][f]);
                if a == b {
                    continue;
                }
                let right = [hist[0] - left[0], hist[1] - left[1]];
                let wl = left[0] + left[1];
                let wr = right[0] + right[1];
                let gain = parent
                    - (wl / total) * crit.impurity(left[0], left[1])
                    - (wr / total) * crit.impurity(right[0], right[1]);
                let bar = best.map_or(GAIN_EPS, |(_, _, g)| g + GAIN_EPS);
                if gain > bar {
                    let mut t = a + (b - a) / 2.0;
                    if t >= b {
                        t = a;
                    }
                    best = Some((f, t, gain));
                }
            }
        }
        best
    }

    fn grow(&mut self, idx: Vec<usize>, depth: usize) -> usize {
        let (counts, histogram) = self.histogram(&idx);
        let id = self.nodes.len();
        self.nodes.push(TreeNode {
            depth,
            counts,
            histogram,
            label: majority(histogram),
            split: None,
        });
        if depth >= self.cfg.max_depth || counts[0] == 0 || counts[1] == 0 {
            return id;
        }
        let Some((feature, threshold, gain)) = self.best_split(&idx, histogram) else {
            return id;
        };
        let (l, r): (Vec<usize>, Vec<usize>) = idx
            .into_iter()
            .partition(|&i| self.rows[i][feature] <= threshold);
        let left = self.grow(l, depth + 1);
        let right = self.grow(r, depth + 1);
        self.nodes[id].split = Some(Split {
            feature,
            threshold,
            left,
            right,
            gain,
        });
        id
    }
}

/// Train on raw rows; used directly by cross-validation to avoid copying.
pub fn tree_fit_rows(
    rows: Vec<&[f64]>,
    labels: Vec<Label>,
    feature_names: Vec<String>,
    cfg: &TreeConfig,
) -> Result<TreeModel> {
    cfg.validate()?;
    let n = labels.len();
    let pos = labels.iter().filter(|l| l.is_positive()).count();
    if pos == 0 || pos == n {
        return Err(Error::InvalidInput(
            "training data must contain both classes".into(),
        ));
    }
    let weight = if cfg.weighted {
        [
            n as f64 / (2.0 * pos as f64),
            n as f64 / (2.0 * (n - pos) as f64),
        ]
    } else {
        [1.0, 1.0]
    };
    let mut g = Grower {
        rows,
        labels,
        weight,
        cfg,
        nodes: Vec::new(),
    };
    g.grow((0..n).collect(), 0);
    Ok(TreeModel {
        criterion: cfg.criterion,
        max_depth: cfg.max_depth,
        feature_names,
        nodes: g.nodes,
    })
}

pub fn tree_train(data: &FeatureMatrix, cfg: &TreeConfig) -> Result<TreeModel> {
    data.validate_training()?;
    tree_fit_rows(data.values(), data.labels()?, data.names().to_vec(), cfg)
}

pub fn tree_predict(model: &TreeModel, v: &FeatureVector) -> Result<Label> {
    model.predict_truncated(&v.values, usize::MAX)
}
