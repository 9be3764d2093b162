//! Second-order regression trees grown by exact greedy split search.
//!
//! A node holding gradient sum `G` and hessian sum `H` gets leaf weight
//! `-G / (H + lambda)`. A split into `(G_L, H_L)` / `(G_R, H_R)` scores
//!
//! ```text
//! gain = 1/2 * [G_L^2/(H_L+lambda) + G_R^2/(H_R+lambda) - (G_L+G_R)^2/(H_L+H_R+lambda)]
//! ```
//!
//! Candidate thresholds are midpoints between consecutive distinct feature
//! values; a row goes left iff `feature < threshold`.

use serde::{Deserialize, Serialize};

use super::matrix::Matrix;
use crate::error::{DpcError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TreeParams {
    pub max_depth: usize,
    pub lambda: f64,
    pub min_child_weight: f64,
}

impl Default for TreeParams {
    fn default() -> Self {
        TreeParams {
            max_depth: 6,
            lambda: 1.0,
            min_child_weight: 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum TreeNode {
    Leaf {
        weight: f64,
    },
    Split {
        feature: usize,
        threshold: f64,
        left: Box<TreeNode>,
        right: Box<TreeNode>,
    },
}

impl TreeNode {
    fn depth(&self) -> usize {
        match self {
            TreeNode::Leaf { .. } => 0,
            TreeNode::Split { left, right, .. } => 1 + left.depth().max(right.depth()),
        }
    }

    fn n_leaves(&self) -> usize {
        match self {
            TreeNode::Leaf { .. } => 1,
            TreeNode::Split { left, right, .. } => left.n_leaves() + right.n_leaves(),
        }
    }

    fn max_feature(&self) -> Option<usize> {
        match self {
            TreeNode::Leaf { .. } => None,
            TreeNode::Split {
                feature, left, right, ..
            } => Some(
                (*feature)
                    .max(left.max_feature().unwrap_or(0))
                    .max(right.max_feature().unwrap_or(0)),
            ),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegressionTree {
    pub root: TreeNode,
    pub max_depth: usize,
}

impl RegressionTree {
    pub fn leaf(weight: f64) -> Self {
        RegressionTree {
            root: TreeNode::Leaf { weight },
            max_depth: 0,
        }
    }

    /// Total on any row at least as wide as the highest feature index used.
    #[inline]
    pub fn predict(&self, row: &[f64]) -> f64 {
        let mut node = &self.root;
        loop {
            match node {
                TreeNode::Leaf { weight } => return *weight,
                TreeNode::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => {
                    node = if row[*feature] < *threshold { left } else { right };
                }
            }
        }
    }

    pub fn depth(&self) -> usize {
        self.root.depth()
    }

    pub fn n_leaves(&self) -> usize {
        self.root.n_leaves()
    }

    /// Smallest row width this tree can be evaluated on.
    pub fn min_features(&self) -> usize {
        self.root.max_feature().map_or(0, |f| f + 1)
    }
}

/// Row indices of each feature column sorted by value (ties by row index).
/// Computed once per training matrix and shared by every tree fitted on it.
#[derive(Debug, Clone)]
pub struct SortedColumns {
    order: Vec<Vec<u32>>,
}

impl SortedColumns {
    pub fn new(x: &Matrix) -> Self {
        let order = (0..x.n_cols())
            .map(|j| {
                let mut idx: Vec<u32> = (0..x.n_rows() as u32).collect();
                idx.sort_by(|&a, &b| {
                    x.get(a as usize, j)
                        .total_cmp(&x.get(b as usize, j))
                        .then(a.cmp(&b))
                });
                idx
            })
            .collect();
        SortedColumns { order }
    }
}

/// A fitted tree plus the leaf weight assigned to every training row.
pub struct FittedTree {
    pub tree: RegressionTree,
    pub row_outputs: Vec<f64>,
}

pub fn fit_tree(
    x: &Matrix,
    gradients: &[f64],
    hessians: &[f64],
    params: &TreeParams,
) -> Result<RegressionTree> {
    let sorted = SortedColumns::new(x);
    Ok(fit_tree_presorted(x, &sorted, gradients, hessians, params)?.tree)
}

fn leaf_weight(g: f64, h: f64, lambda: f64) -> f64 {
    let denom = h + lambda;
    if denom > 0.0 {
        -g / denom
    } else {
        0.0
    }
}

fn score(g: f64, h: f64, lambda: f64) -> f64 {
    g * g / (h + lambda)
}

#[derive(Clone, Copy)]
struct Candidate {
    gain: f64,
    feature: usize,
    threshold: f64,
    g_left: f64,
    h_left: f64,
}

#[derive(Clone, Copy)]
struct ScanState {
    g_left: f64,
    h_left: f64,
    last: f64,
    seen: bool,
}

struct BuildNode {
    g: f64,
    h: f64,
    depth: usize,
    split: Option<(usize, f64, usize, usize)>,
}

/// Whether some row's optimal weight differs from another's; a node where
/// every `g_i / h_i` agrees cannot be improved by splitting.
fn is_impure(rows: &[u32], gradients: &[f64], hessians: &[f64]) -> bool {
    let Some(&first) = rows.first() else {
        return false;
    };
    let (g0, h0) = (gradients[first as usize], hessians[first as usize]);
    rows.iter()
        .any(|&r| gradients[r as usize] * h0 != g0 * hessians[r as usize])
}

pub fn fit_tree_presorted(
    x: &Matrix,
    sorted: &SortedColumns,
    gradients: &[f64],
    hessians: &[f64],
    params: &TreeParams,
) -> Result<FittedTree> {
    let n = x.n_rows();
    if n == 0 {
        return Err(DpcError::EmptyDataset);
    }
    for len in [gradients.len(), hessians.len()] {
        if len != n {
            return Err(DpcError::DimensionMismatch {
                expected: n,
                actual: len,
            });
        }
    }
    if sorted.order.len() != x.n_cols() {
        return Err(DpcError::DimensionMismatch {
            expected: x.n_cols(),
            actual: sorted.order.len(),
        });
    }
    let lambda = params.lambda;
    let mcw = params.min_child_weight;

    let mut node_of: Vec<u32> = vec![0; n];
    let mut nodes = vec![BuildNode {
        g: gradients.iter().sum(),
        h: hessians.iter().sum(),
        depth: 0,
        split: None,
    }];
    let mut frontier: Vec<usize> = vec![0];

    while !frontier.is_empty() {
        // Nodes on this level that may still split.
        let mut slot_of = vec![usize::MAX; nodes.len()];
        let mut live = Vec::new();
        {
            let mut members: Vec<Vec<u32>> = vec![Vec::new(); frontier.len()];
            let mut frontier_slot = vec![usize::MAX; nodes.len()];
            for (s, &id) in frontier.iter().enumerate() {
                frontier_slot[id] = s;
            }
            for (r, &id) in node_of.iter().enumerate() {
                let s = frontier_slot[id as usize];
                if s != usize::MAX {
                    members[s].push(r as u32);
                }
            }
            for (s, &id) in frontier.iter().enumerate() {
                if nodes[id].depth < params.max_depth && is_impure(&members[s], gradients, hessians) {
                    slot_of[id] = live.len();
                    live.push(id);
                }
            }
        }
        if live.is_empty() {
            break;
        }

        let mut best: Vec<Option<Candidate>> = vec![None; live.len()];
        let mut states = vec![
            ScanState {
                g_left: 0.0,
                h_left: 0.0,
                last: 0.0,
                seen: false,
            };
            live.len()
        ];
        for (feature, order) in sorted.order.iter().enumerate() {
            for st in states.iter_mut() {
                *st = ScanState {
                    g_left: 0.0,
                    h_left: 0.0,
                    last: 0.0,
                    seen: false,
                };
            }
            for &r in order {
                let r = r as usize;
                let slot = slot_of[node_of[r] as usize];
                if slot == usize::MAX {
                    continue;
                }
                let v = x.get(r, feature);
                let st = &mut states[slot];
                if st.seen && v > st.last {
                    let node = &nodes[live[slot]];
                    let (gl, hl) = (st.g_left, st.h_left);
                    let (gr, hr) = (node.g - gl, node.h - hl);
                    if hl >= mcw && hr >= mcw && hl + lambda > 0.0 && hr + lambda > 0.0 {
                        let gain = 0.5
                            * (score(gl, hl, lambda) + score(gr, hr, lambda)
                                - score(node.g, node.h, lambda));
                        let better = match &best[slot] {
                            None => true,
                            Some(b) => gain > b.gain,
                        };
                        if better {
                            let mut threshold = st.last + (v - st.last) / 2.0;
                            if threshold <= st.last || threshold > v {
                                threshold = v;
                            }
                            best[slot] = Some(Candidate {
                                gain,
                                feature,
                                threshold,
                                g_left: gl,
                                h_left: hl,
                            });
                        }
                    }
                }
                st.g_left += gradients[r];
                st.h_left += hessians[r];
                st.last = v;
                st.seen = true;
            }
        }

        let mut next = Vec::new();
        let mut split_of: Vec<Option<(usize, f64, u32, u32)>> = vec![None; nodes.len()];
        for (slot, &id) in live.iter().enumerate() {
            let Some(c) = best[slot] else { continue };
            if c.gain.is_nan() || c.gain < 0.0 {
                continue;
            }
            let depth = nodes[id].depth + 1;
            let (g, h) = (nodes[id].g, nodes[id].h);
            let left = nodes.len();
            nodes.push(BuildNode {
                g: c.g_left,
                h: c.h_left,
                depth,
                split: None,
            });
            let right = nodes.len();
            nodes.push(BuildNode {
                g: g - c.g_left,
                h: h - c.h_left,
                depth,
                split: None,
            });
            nodes[id].split = Some((c.feature, c.threshold, left, right));
            split_of[id] = Some((c.feature, c.threshold, left as u32, right as u32));
            next.push(left);
            next.push(right);
        }
        split_of.resize(nodes.len(), None);
        for (r, id) in node_of.iter_mut().enumerate() {
            if let Some((f, thr, l, rt)) = split_of[*id as usize] {
                *id = if x.get(r, f) < thr { l } else { rt };
            }
        }
        frontier = next;
    }

    fn assemble(nodes: &[BuildNode], id: usize, lambda: f64) -> TreeNode {
        match nodes[id].split {
            None => TreeNode::Leaf {
                weight: leaf_weight(nodes[id].g, nodes[id].h, lambda),
            },
            Some((feature, threshold, l, r)) => TreeNode::Split {
                feature,
                threshold,
                left: Box::new(assemble(nodes, l, lambda)),
                right: Box::new(assemble(nodes, r, lambda)),
            },
        }
    }

    let row_outputs = node_of
        .iter()
        .map(|&id| leaf_weight(nodes[id as usize].g, nodes[id as usize].h, lambda))
        .collect();
    Ok(FittedTree {
        tree: RegressionTree {
            root: assemble(&nodes, 0, lambda),
            max_depth: params.max_depth,
        },
        row_outputs,
    })
}
