use rayon::prelude::*;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Node {
    Split {
        feature: usize,
        threshold: f64,
        /// missing values go left when set
        default_left: bool,
        left: usize,
        right: usize,
    },
    Leaf {
        value: f64,
    },
}

/// Regression tree stored as a flat node array with the root at index 0.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tree {
    pub nodes: Vec<Node>,
}

impl Tree {
    pub fn predict(&self, row: &[f64]) -> f64 {
        let mut i = 0;
        loop {
            match &self.nodes[i] {
                Node::Leaf { value } => return *value,
                Node::Split { feature, threshold, default_left, left, right } => {
                    let x = row[*feature];
                    let go_left = if x.is_nan() { *default_left } else { x < *threshold };
                    i = if go_left { *left } else { *right };
                }
            }
        }
    }

    pub fn depth(&self) -> usize {
        fn walk(t: &Tree, i: usize) -> usize {
            match &t.nodes[i] {
                Node::Leaf { .. } => 0,
                Node::Split { left, right, .. } => 1 + walk(t, *left).max(walk(t, *right)),
            }
        }
        walk(self, 0)
    }

    pub fn n_leaves(&self) -> usize {
        self.nodes.iter().filter(|n| matches!(n, Node::Leaf { .. })).count()
    }
}

pub(crate) struct GrowParams {
    pub max_depth: usize,
    pub lambda: f64,
    pub gamma: f64,
    pub learning_rate: f64,
}

#[derive(Debug, Clone, Copy)]
struct Candidate {
    gain: f64,
    feature: usize,
    threshold: f64,
    default_left: bool,
}

fn score(g: f64, h: f64, lambda: f64) -> f64 {
    g * g / (h + lambda)
}

/// Best split of one feature over `rows`, by exact greedy scan.
fn best_split_for_feature(
    x: &[Vec<f64>],
    grad: &[f64],
    hess: &[f64],
    rows: &[usize],
    feature: usize,
    p: &GrowParams,
) -> Option<Candidate> {
    let mut present: Vec<(f64, usize)> = Vec::with_capacity(rows.len());
    let (mut gm, mut hm) = (0.0, 0.0);
    for &r in rows {
        let v = x[r][feature];
        if v.is_nan() {
            gm += grad[r];
            hm += hess[r];
        } else {
            present.push((v, r));
        }
    }
    if present.len() < 2 {
        return None;
    }
    present.sort_by(|a, b| a.0.total_cmp(&b.0));
    let g_tot: f64 = present.iter().map(|&(_, r)| grad[r]).sum::<f64>() + gm;
    let h_tot: f64 = present.iter().map(|&(_, r)| hess[r]).sum::<f64>() + hm;
    let parent = score(g_tot, h_tot, p.lambda);
    let has_missing = present.len() < rows.len();
    let mut best: Option<Candidate> = None;
    let (mut gl, mut hl) = (0.0, 0.0);
    for k in 0..present.len() - 1 {
        let (v, r) = present[k];
        gl += grad[r];
        hl += hess[r];
        let next = present[k + 1].0;
        if next <= v {
            continue;
        }
        let hp = h_tot - hm;
        let gain_with = |gl: f64, hl: f64| 0.5 * (score(gl, hl, p.lambda) + score(g_tot - gl, h_tot - hl, p.lambda) - parent) - p.gamma;
        let right_gain = gain_with(gl, hl);
        let left_gain = gain_with(gl + gm, hl + hm);
        let default_left = if has_missing {
            left_gain > right_gain
        } else {
            // no training rows are missing: send them to the heavier side
            hl > hp - hl
        };
        let gain = if has_missing { left_gain.max(right_gain) } else { right_gain };
        let mut threshold = v + (next - v) / 2.0;
        if !(threshold > v) {
            threshold = next;
        }
        if best.is_none_or(|b| gain > b.gain) {
            best = Some(Candidate { gain, feature, threshold, default_left });
        }
    }
    best
}

pub(crate) fn grow(x: &[Vec<f64>], grad: &[f64], hess: &[f64], rows: Vec<usize>, p: &GrowParams) -> Option<Tree> {
    let mut tree = Tree { nodes: Vec::new() };
    let root_split = split_rows(x, grad, hess, &rows, p, 0);
    root_split.as_ref()?;
    build(&mut tree, x, grad, hess, rows, p, 0, root_split);
    Some(tree)
}

fn leaf_value(grad: &[f64], hess: &[f64], rows: &[usize], p: &GrowParams) -> f64 {
    let g: f64 = rows.iter().map(|&r| grad[r]).sum();
    let h: f64 = rows.iter().map(|&r| hess[r]).sum();
    -p.learning_rate * g / (h + p.lambda)
}

fn split_rows(x: &[Vec<f64>], grad: &[f64], hess: &[f64], rows: &[usize], p: &GrowParams, depth: usize) -> Option<Candidate> {
    if depth >= p.max_depth || rows.len() < 2 {
        return None;
    }
    let n_features = x.first().map_or(0, Vec::len);
    let per_feature: Vec<Option<Candidate>> = (0..n_features)
        .into_par_iter()
        .map(|f| best_split_for_feature(x, grad, hess, rows, f, p))
        .collect();
    // lowest feature index wins ties
    let mut best: Option<Candidate> = None;
    for c in per_feature.into_iter().flatten() {
        if best.is_none_or(|b| c.gain > b.gain) {
            best = Some(c);
        }
    }
    best.filter(|c| c.gain > 0.0)
}

#[allow(clippy::too_many_arguments)]
fn build(
    tree: &mut Tree,
    x: &[Vec<f64>],
    grad: &[f64],
    hess: &[f64],
    rows: Vec<usize>,
    p: &GrowParams,
    depth: usize,
    split: Option<Candidate>,
) -> usize {
    let idx = tree.nodes.len();
    let Some(c) = split else {
        tree.nodes.push(Node::Leaf { value: leaf_value(grad, hess, &rows, p) });
        return idx;
    };
    tree.nodes.push(Node::Leaf { value: 0.0 });
    let (l, r): (Vec<usize>, Vec<usize>) = rows.into_iter().partition(|&i| {
        let v = x[i][c.feature];
        if v.is_nan() {
            c.default_left
        } else {
            v < c.threshold
        }
    });
    let ls = split_rows(x, grad, hess, &l, p, depth + 1);
    let left = build(tree, x, grad, hess, l, p, depth + 1, ls);
    let rs = split_rows(x, grad, hess, &r, p, depth + 1);
    let right = build(tree, x, grad, hess, r, p, depth + 1, rs);
    tree.nodes[idx] = Node::Split { feature: c.feature, threshold: c.threshold, default_left: c.default_left, left, right };
    idx
}
