//! Multiclass gradient boosting with a softmax objective.
//!
//! Each round fits one regression tree per class to the softmax gradients
//! `p - y` with Hessians `max(2 p (1 - p), 1e-16)`. Leaf values are Newton
//! steps `-G / (H + lambda)` and splits maximize the second-order gain. The
//! round's step is halved until the training log-loss does not increase, so
//! the staged loss is non-increasing by construction.

use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use super::{argmax, Encoded};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GbtParams {
    pub rounds: usize,
    pub max_depth: usize,
    pub learning_rate: f64,
    pub lambda: f64,
    pub min_child_weight: f64,
}

impl Default for GbtParams {
    fn default() -> Self {
        GbtParams {
            rounds: 100,
            max_depth: 6,
            learning_rate: 0.3,
            lambda: 1.0,
            min_child_weight: 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum RegressionNode {
    Leaf { value: f64 },
    Split { feature: usize, threshold: f64, left: usize, right: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegressionTree {
    pub nodes: Vec<RegressionNode>,
}

impl RegressionTree {
    pub fn predict(&self, x: &[f64]) -> f64 {
        let mut i = 0;
        loop {
            match self.nodes[i] {
                RegressionNode::Leaf { value } => return value,
                RegressionNode::Split { feature, threshold, left, right } => {
                    i = if x[feature] <= threshold { left } else { right };
                }
            }
        }
    }

    fn scaled(mut self, s: f64) -> Self {
        for n in &mut self.nodes {
            if let RegressionNode::Leaf { value } = n {
                *value *= s;
            }
        }
        self
    }
}

struct Fit<'a> {
    x: &'a [f64],
    width: usize,
    grad: &'a [f64],
    hess: &'a [f64],
    params: &'a GbtParams,
}

impl Fit<'_> {
    fn score(&self, g: f64, h: f64) -> f64 {
        g * g / (h + self.params.lambda)
    }

    fn build(&self, rows: Vec<usize>, gains: &mut [f64]) -> RegressionTree {
        let mut nodes = vec![RegressionNode::Leaf { value: 0.0 }];
        let mut stack = vec![(0usize, rows, 0usize)];
        let mut buf: Vec<(f64, usize)> = Vec::new();
        while let Some((idx, rows, depth)) = stack.pop() {
            let g: f64 = rows.iter().map(|&r| self.grad[r]).sum();
            let h: f64 = rows.iter().map(|&r| self.hess[r]).sum();
            let leaf = -g / (h + self.params.lambda);
            let mut best: Option<(f64, usize, f64)> = None;
            if depth < self.params.max_depth && rows.len() >= 2 {
                let parent = self.score(g, h);
                for f in 0..self.width {
                    buf.clear();
                    buf.extend(rows.iter().map(|&r| (self.x[r * self.width + f], r)));
                    buf.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
                    let (mut gl, mut hl) = (0.0, 0.0);
                    for i in 0..buf.len() - 1 {
                        let (v, r) = buf[i];
                        gl += self.grad[r];
                        hl += self.hess[r];
                        let next = buf[i + 1].0;
                        if v == next {
                            continue;
                        }
                        let (gr, hr) = (g - gl, h - hl);
                        if hl < self.params.min_child_weight || hr < self.params.min_child_weight {
                            continue;
                        }
                        let gain = 0.5 * (self.score(gl, hl) + self.score(gr, hr) - parent);
                        let mid = v + (next - v) / 2.0;
                        let thr = if mid < next { mid } else { v };
                        if gain > 0.0 && best.is_none_or(|(b, _, _)| gain > b) {
                            best = Some((gain, f, thr));
                        }
                    }
                }
            }
            let Some((gain, feature, threshold)) = best else {
                nodes[idx] = RegressionNode::Leaf { value: leaf };
                continue;
            };
            gains[feature] += gain;
            let (l, r): (Vec<usize>, Vec<usize>) = rows
                .iter()
                .partition(|&&row| self.x[row * self.width + feature] <= threshold);
            let (li, ri) = (nodes.len(), nodes.len() + 1);
            nodes.push(RegressionNode::Leaf { value: 0.0 });
            nodes.push(RegressionNode::Leaf { value: 0.0 });
            nodes[idx] = RegressionNode::Split { feature, threshold, left: li, right: ri };
            stack.push((ri, r, depth + 1));
            stack.push((li, l, depth + 1));
        }
        RegressionTree { nodes }
    }
}

/// Mean multiclass log-loss of row-major margins.
pub fn log_loss(margins: &[f64], y: &[usize], n_classes: usize) -> f64 {
    let n = y.len();
    let total: f64 = margins
        .chunks_exact(n_classes)
        .zip(y)
        .map(|(m, &c)| {
            let max = m.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let lse = max + libm::log(m.iter().map(|v| libm::exp(v - max)).sum::<f64>());
            lse - m[c]
        })
        .sum();
    total / n as f64
}

fn softmax_into(m: &[f64], out: &mut [f64]) {
    let max = m.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let mut s = 0.0;
    for (o, v) in out.iter_mut().zip(m) {
        *o = libm::exp(v - max);
        s += *o;
    }
    for o in out.iter_mut() {
        *o /= s;
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GradientBoosted {
    pub params: GbtParams,
    /// `rounds[r][k]` is the class-`k` tree of round `r`, step already applied.
    pub rounds: Vec<Vec<RegressionTree>>,
    /// Training log-loss before the first round and after each round.
    pub training_loss: Vec<f64>,
    /// Total split gain per feature over accepted rounds.
    pub gains: Vec<f64>,
}

impl GradientBoosted {
    pub(crate) fn fit(data: &Encoded<'_>, params: &GbtParams) -> GradientBoosted {
        let (n, c, w) = (data.y.len(), data.n_classes, data.width);
        let mut margins = vec![0.0; n * c];
        let mut loss = log_loss(&margins, &data.y, c);
        let mut training_loss = vec![loss];
        let mut rounds = Vec::with_capacity(params.rounds);
        let mut gains = vec![0.0; w];
        let mut p = vec![0.0; c];
        for _ in 0..params.rounds {
            let mut grad = vec![vec![0.0; n]; c];
            let mut hess = vec![vec![0.0; n]; c];
            for i in 0..n {
                softmax_into(&margins[i * c..(i + 1) * c], &mut p);
                for k in 0..c {
                    let target = if data.y[i] == k { 1.0 } else { 0.0 };
                    grad[k][i] = p[k] - target;
                    hess[k][i] = (2.0 * p[k] * (1.0 - p[k])).max(1e-16);
                }
            }
            let mut round_gains = vec![0.0; w];
            let trees: Vec<RegressionTree> = (0..c)
                .map(|k| {
                    Fit {
                        x: data.x,
                        width: w,
                        grad: &grad[k],
                        hess: &hess[k],
                        params,
                    }
                    .build((0..n).collect(), &mut round_gains)
                })
                .collect();
            let raw: Vec<f64> = (0..n)
                .flat_map(|i| {
                    let row = &data.x[i * w..(i + 1) * w];
                    trees.iter().map(move |t| t.predict(row))
                })
                .collect();
            let mut step = params.learning_rate;
            let mut accepted = None;
            for _ in 0..40 {
                let cand: Vec<f64> = margins.iter().zip(&raw).map(|(m, d)| m + step * d).collect();
                let l = log_loss(&cand, &data.y, c);
                if l <= loss {
                    accepted = Some((cand, l));
                    break;
                }
                step /= 2.0;
            }
            let Some((cand, l)) = accepted else {
                log::debug!("boosting stopped: no step decreases the training loss");
                break;
            };
            margins = cand;
            loss = l;
            training_loss.push(l);
            for (g, r) in gains.iter_mut().zip(&round_gains) {
                *g += r;
            }
            rounds.push(trees.into_iter().map(|t| t.scaled(step)).collect());
        }
        GradientBoosted {
            params: params.clone(),
            rounds,
            training_loss,
            gains,
        }
    }

    pub fn margins(&self, x: &[f64], n_classes: usize) -> Vec<f64> {
        let mut m = vec![0.0; n_classes];
        for round in &self.rounds {
            for (k, t) in round.iter().enumerate() {
                m[k] += t.predict(x);
            }
        }
        m
    }

    pub fn predict(&self, x: &[f64], n_classes: usize) -> usize {
        argmax(self.margins(x, n_classes).into_iter())
    }
}
