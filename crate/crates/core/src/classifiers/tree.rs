//! CART classification trees with Gini impurity.

use alloc::vec;
use alloc::vec::Vec;

use rand::Rng as _;
use serde::{Deserialize, Serialize};

use super::argmax;
use crate::seed::Rng;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TreeParams {
    pub max_depth: Option<usize>,
    pub min_samples_split: usize,
}

impl Default for TreeParams {
    fn default() -> Self {
        TreeParams {
            max_depth: None,
            min_samples_split: 2,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Node {
    Leaf { class: usize },
    Split { feature: usize, threshold: f64, left: usize, right: usize },
}

/// Flattened tree; node 0 is the root.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassificationTree {
    pub nodes: Vec<Node>,
    /// Unnormalized impurity decrease per feature, weighted by node share.
    pub importance: Vec<f64>,
}

impl ClassificationTree {
    pub fn predict(&self, x: &[f64]) -> usize {
        let mut i = 0;
        loop {
            match self.nodes[i] {
                Node::Leaf { class } => return class,
                Node::Split { feature, threshold, left, right } => {
                    i = if x[feature] <= threshold { left } else { right };
                }
            }
        }
    }

    pub fn has_splits(&self) -> bool {
        self.nodes.iter().any(|n| matches!(n, Node::Split { .. }))
    }

    pub fn depth(&self) -> usize {
        fn walk(nodes: &[Node], i: usize) -> usize {
            match nodes[i] {
                Node::Leaf { .. } => 0,
                Node::Split { left, right, .. } => 1 + walk(nodes, left).max(walk(nodes, right)),
            }
        }
        walk(&self.nodes, 0)
    }
}

pub fn gini(counts: &[usize]) -> f64 {
    let n: usize = counts.iter().sum();
    if n == 0 {
        return 0.0;
    }
    let n = n as f64;
    1.0 - counts.iter().map(|&c| (c as f64 / n) * (c as f64 / n)).sum::<f64>()
}

#[derive(Debug, Clone, Copy)]
struct Candidate {
    decrease: f64,
    feature: usize,
    threshold: f64,
}

impl Candidate {
    /// Larger decrease wins; ties go to the lower feature, then the lower
    /// threshold, so the result never depends on row or visit order.
    fn beats(&self, other: &Option<Candidate>) -> bool {
        match other {
            None => true,
            Some(o) => {
                self.decrease > o.decrease
                    || (self.decrease == o.decrease
                        && (self.feature < o.feature
                            || (self.feature == o.feature && self.threshold < o.threshold)))
            }
        }
    }
}

/// Feature sampling for random forests: each split examines features in a
/// random order until `max_features` non-constant ones have been scored.
pub(crate) struct FeatureSampler<'r> {
    pub max_features: usize,
    pub rng: &'r mut Rng,
}

pub(crate) struct TreeBuilder<'a, 'r> {
    pub x: &'a [f64],
    pub width: usize,
    pub y: &'a [usize],
    pub n_classes: usize,
    pub params: &'a TreeParams,
    pub sampler: Option<FeatureSampler<'r>>,
}

impl TreeBuilder<'_, '_> {
    fn value(&self, row: usize, f: usize) -> f64 {
        self.x[row * self.width + f]
    }

    fn counts(&self, rows: &[usize]) -> Vec<usize> {
        let mut c = vec![0; self.n_classes];
        for &r in rows {
            c[self.y[r]] += 1;
        }
        c
    }

    /// Best threshold on one feature; `None` when the feature is constant.
    fn score_feature(
        &self,
        rows: &[usize],
        f: usize,
        parent: &[usize],
        parent_gini: f64,
        buf: &mut Vec<(f64, usize)>,
    ) -> Option<Candidate> {
        buf.clear();
        buf.extend(rows.iter().map(|&r| (self.value(r, f), self.y[r])));
        buf.sort_by(|a, b| a.0.total_cmp(&b.0));
        let n = buf.len();
        let mut left = vec![0usize; self.n_classes];
        let mut right = parent.to_vec();
        let mut best: Option<Candidate> = None;
        for i in 0..n - 1 {
            let (v, c) = buf[i];
            left[c] += 1;
            right[c] -= 1;
            let next = buf[i + 1].0;
            if v == next {
                continue;
            }
            let nl = (i + 1) as f64;
            let nr = (n - i - 1) as f64;
            let weighted = (nl * gini(&left) + nr * gini(&right)) / n as f64;
            let mid = v + (next - v) / 2.0;
            let threshold = if mid < next { mid } else { v };
            let cand = Candidate {
                decrease: parent_gini - weighted,
                feature: f,
                threshold,
            };
            if cand.beats(&best) {
                best = Some(cand);
            }
        }
        best
    }

    fn best_split(&mut self, rows: &[usize], counts: &[usize]) -> Option<Candidate> {
        let parent_gini = gini(counts);
        let mut buf = Vec::with_capacity(rows.len());
        let mut best = None;
        match self.sampler.take() {
            None => {
                for f in 0..self.width {
                    if let Some(c) = self.score_feature(rows, f, counts, parent_gini, &mut buf) {
                        if c.beats(&best) {
                            best = Some(c);
                        }
                    }
                }
            }
            Some(sampler) => {
                let mut order: Vec<usize> = (0..self.width).collect();
                let mut scored = 0;
                for i in 0..self.width {
                    if scored == sampler.max_features {
                        break;
                    }
                    let j = sampler.rng.random_range(i..self.width);
                    order.swap(i, j);
                    if let Some(c) = self.score_feature(rows, order[i], counts, parent_gini, &mut buf) {
                        scored += 1;
                        if c.beats(&best) {
                            best = Some(c);
                        }
                    }
                }
                self.sampler = Some(sampler);
            }
        }
        best
    }

    /// Grow a tree over `rows` (which may repeat, for bootstrap samples).
    pub fn build(mut self, rows: Vec<usize>) -> ClassificationTree {
        let total = rows.len() as f64;
        let mut importance = vec![0.0; self.width];
        let mut nodes = vec![Node::Leaf { class: 0 }];
        let mut stack = vec![(0usize, rows, 0usize)];
        while let Some((idx, rows, depth)) = stack.pop() {
            let counts = self.counts(&rows);
            let majority = argmax(counts.iter().map(|&c| c as f64));
            let impure = counts.iter().filter(|&&c| c > 0).count() > 1;
            let capped = self.params.max_depth.is_some_and(|d| depth >= d);
            let split = if impure && !capped && rows.len() >= self.params.min_samples_split {
                self.best_split(&rows, &counts)
            } else {
                None
            };
            let Some(split) = split else {
                nodes[idx] = Node::Leaf { class: majority };
                continue;
            };
            importance[split.feature] += rows.len() as f64 / total * split.decrease.max(0.0);
            let (l, r): (Vec<usize>, Vec<usize>) = rows
                .iter()
                .partition(|&&row| self.value(row, split.feature) <= split.threshold);
            let (li, ri) = (nodes.len(), nodes.len() + 1);
            nodes.push(Node::Leaf { class: majority });
            nodes.push(Node::Leaf { class: majority });
            nodes[idx] = Node::Split {
                feature: split.feature,
                threshold: split.threshold,
                left: li,
                right: ri,
            };
            stack.push((ri, r, depth + 1));
            stack.push((li, l, depth + 1));
        }
        ClassificationTree { nodes, importance }
    }
}
