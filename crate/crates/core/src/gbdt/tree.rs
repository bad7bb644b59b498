//! Regression trees on gradient statistics and depth-wise growth.

use serde::{Deserialize, Serialize};

use super::binning::{BinnedMatrix, FeatureInfo};
use super::histogram::{BinStats, Histogram};
use super::split::{best_categorical_split, best_numeric_split, leaf_weight, SplitParams};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum SplitRule {
    /// `x <= threshold` goes left. `bin` is the matching training bin.
    Numeric { threshold: f64, bin: u32 },
    /// Listed codes (ascending) go left, other known codes go right.
    Categorical { left: Vec<u32> },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum Node {
    Leaf {
        weight: f64,
    },
    Split {
        feature: u32,
        rule: SplitRule,
        /// Side taken by NaN and by categories unknown to the model.
        default_left: bool,
        gain: f64,
        left: u32,
        right: u32,
    },
}

/// One tree stored as a node arena; node 0 is the root.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Tree {
    pub nodes: Vec<Node>,
}

/// A single feature value as seen at prediction time.
#[derive(Clone, Copy, Debug)]
pub enum FeatureValue {
    Numeric(f64),
    /// Code in the model dictionary, `None` when unseen.
    Category(Option<u32>),
}

impl Tree {
    pub fn leaf(weight: f64) -> Tree {
        Tree {
            nodes: vec![Node::Leaf { weight }],
        }
    }

    pub fn depth(&self) -> usize {
        fn walk(nodes: &[Node], id: usize) -> usize {
            match &nodes[id] {
                Node::Leaf { .. } => 0,
                Node::Split { left, right, .. } => 1 + walk(nodes, *left as usize).max(walk(nodes, *right as usize)),
            }
        }
        walk(&self.nodes, 0)
    }

    pub fn n_leaves(&self) -> usize {
        self.nodes.iter().filter(|n| matches!(n, Node::Leaf { .. })).count()
    }

    /// Leaf weight reached by the row whose feature `f` reads `value(f)`.
    pub fn predict<F: Fn(usize) -> FeatureValue>(&self, value: F) -> f64 {
        let mut id = 0usize;
        loop {
            match &self.nodes[id] {
                Node::Leaf { weight } => return *weight,
                Node::Split {
                    feature,
                    rule,
                    default_left,
                    left,
                    right,
                    ..
                } => {
                    let go_left = match (rule, value(*feature as usize)) {
                        (SplitRule::Numeric { threshold, .. }, FeatureValue::Numeric(x)) => {
                            if x.is_nan() {
                                *default_left
                            } else {
                                x <= *threshold
                            }
                        }
                        (SplitRule::Categorical { left }, FeatureValue::Category(Some(code))) => {
                            left.binary_search(&code).is_ok()
                        }
                        _ => *default_left,
                    };
                    id = if go_left { *left } else { *right } as usize;
                }
            }
        }
    }
}

/// Tree-growth parameters.
#[derive(Clone, Copy, Debug)]
pub struct GrowParams {
    pub max_depth: usize,
    pub split: SplitParams,
}

#[derive(Clone, Debug)]
struct Candidate {
    feature: usize,
    gain: f64,
    rule: SplitRule,
    default_left: bool,
    left: BinStats,
}

fn best_split(hist: &Histogram, features: &[FeatureInfo], params: &SplitParams) -> Option<Candidate> {
    let mut best: Option<Candidate> = None;
    for (f, (slots, info)) in hist.features.iter().zip(features).enumerate() {
        let candidate = match &info.kind {
            super::binning::FeatureKind::Numeric { thresholds } => {
                let (values, missing) = slots.split_at(slots.len() - 1);
                best_numeric_split(values, missing[0], params).map(|s| Candidate {
                    feature: f,
                    gain: s.gain,
                    rule: SplitRule::Numeric {
                        threshold: thresholds[s.bin as usize],
                        bin: s.bin,
                    },
                    default_left: s.default_left,
                    left: s.left,
                })
            }
            super::binning::FeatureKind::Categorical { .. } => {
                best_categorical_split(slots, params).map(|s| Candidate {
                    feature: f,
                    gain: s.gain,
                    rule: SplitRule::Categorical {
                        left: s.left_categories,
                    },
                    default_left: s.default_left,
                    left: s.left,
                })
            }
        };
        if let Some(c) = candidate {
            if best.as_ref().is_none_or(|b| c.gain > b.gain) {
                best = Some(c);
            }
        }
    }
    best
}

fn goes_left(rule: &SplitRule, default_left: bool, bin: u32, n_slots: usize, mask: &[bool]) -> bool {
    match rule {
        SplitRule::Numeric { bin: cut, .. } => {
            if bin as usize == n_slots - 1 {
                default_left
            } else {
                bin <= *cut
            }
        }
        SplitRule::Categorical { .. } => mask[bin as usize],
    }
}

struct Pending {
    node: usize,
    rows: Vec<u32>,
    hist: Histogram,
}

/// Grows one tree level by level up to `params.max_depth`. Each training
/// row's leaf weight is written to `leaf_out[row]`.
pub fn grow_tree(
    rows: Vec<u32>,
    matrix: &BinnedMatrix,
    features: &[FeatureInfo],
    grad: &[f64],
    hess: &[f64],
    params: &GrowParams,
    leaf_out: &mut [f64],
) -> Tree {
    assert!(!rows.is_empty(), "cannot grow a tree on zero rows");
    let lambda = params.split.lambda;
    let mut nodes: Vec<Node> = vec![Node::Leaf { weight: 0.0 }];
    let root_hist = Histogram::build(&rows, matrix, grad, hess);
    let mut frontier = vec![Pending {
        node: 0,
        rows,
        hist: root_hist,
    }];

    for depth in 0..=params.max_depth {
        let mut next = Vec::new();
        for pending in frontier {
            let split = if depth < params.max_depth && pending.rows.len() >= 2 {
                best_split(&pending.hist, features, &params.split)
            } else {
                None
            };
            let Some(split) = split else {
                let (g, h) = pending
                    .rows
                    .iter()
                    .fold((0.0, 0.0), |(g, h), &r| (g + grad[r as usize], h + hess[r as usize]));
                let weight = leaf_weight(g, h, lambda);
                for &r in &pending.rows {
                    leaf_out[r as usize] = weight;
                }
                nodes[pending.node] = Node::Leaf { weight };
                continue;
            };

            let f = split.feature;
            let column = matrix.column(f);
            let n_slots = matrix.n_slots[f];
            let mut mask = Vec::new();
            if let SplitRule::Categorical { left } = &split.rule {
                mask = vec![false; n_slots];
                for &c in left {
                    mask[c as usize] = true;
                }
            }
            let (left_rows, right_rows): (Vec<u32>, Vec<u32>) = pending
                .rows
                .iter()
                .partition(|&&r| goes_left(&split.rule, split.default_left, column[r as usize], n_slots, &mask));
            debug_assert_eq!(left_rows.len() as u64, split.left.count);

            let (left_hist, right_hist) = if left_rows.len() <= right_rows.len() {
                let small = Histogram::build(&left_rows, matrix, grad, hess);
                let large = small.sibling_of(&pending.hist);
                (small, large)
            } else {
                let small = Histogram::build(&right_rows, matrix, grad, hess);
                let large = small.sibling_of(&pending.hist);
                (large, small)
            };

            let left_id = nodes.len();
            nodes.push(Node::Leaf { weight: 0.0 });
            let right_id = nodes.len();
            nodes.push(Node::Leaf { weight: 0.0 });
            nodes[pending.node] = Node::Split {
                feature: f as u32,
                rule: split.rule,
                default_left: split.default_left,
                gain: split.gain,
                left: left_id as u32,
                right: right_id as u32,
            };
            next.push(Pending {
                node: left_id,
                rows: left_rows,
                hist: left_hist,
            });
            next.push(Pending {
                node: right_id,
                rows: right_rows,
                hist: right_hist,
            });
        }
        frontier = next;
        if frontier.is_empty() {
            break;
        }
    }
    Tree { nodes }
}
