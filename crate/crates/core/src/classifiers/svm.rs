//! RBF-kernel SVM trained by SMO, one binary machine per class pair.
//!
//! The binary solver follows the LIBSVM formulation: working pairs are
//! chosen by maximal violation with second-order gain, and training stops
//! once `max(-y G) over I_up - min(-y G) over I_low < tol`.

use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use super::{argmax, Encoded};

const TAU: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SvmParams {
    pub c: f64,
    /// Defaults to `1 / (width * variance of all training values)`.
    pub gamma: Option<f64>,
    pub tol: f64,
    /// Iteration cap per binary problem, in multiples of its row count.
    pub max_passes: usize,
}

impl Default for SvmParams {
    fn default() -> Self {
        SvmParams {
            c: 1.0,
            gamma: None,
            tol: 1e-3,
            max_passes: 10_000,
        }
    }
}

pub fn rbf(a: &[f64], b: &[f64], gamma: f64) -> f64 {
    let d: f64 = a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum();
    libm::exp(-gamma * d)
}

/// Variance-scaled default: `1 / (width * var(x))`, or 1 for constant data.
pub fn default_gamma(x: &[f64], width: usize) -> f64 {
    let n = x.len() as f64;
    let mean = x.iter().sum::<f64>() / n;
    let var = x.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    if var > 0.0 {
        1.0 / (width as f64 * var)
    } else {
        1.0
    }
}

/// One class pair. Positive decisions vote for `positive`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BinarySvm {
    pub positive: usize,
    pub negative: usize,
    /// Row-major support vectors.
    pub support: Vec<f64>,
    /// `alpha_i * y_i` per support vector.
    pub coef: Vec<f64>,
    pub rho: f64,
    pub iterations: usize,
    pub converged: bool,
    /// Largest KKT violation over the training rows, in margin units.
    pub kkt_violation: f64,
}

impl BinarySvm {
    pub fn decision(&self, x: &[f64], gamma: f64) -> f64 {
        let w = x.len();
        self.support
            .chunks_exact(w)
            .zip(&self.coef)
            .map(|(sv, c)| c * rbf(sv, x, gamma))
            .sum::<f64>()
            - self.rho
    }
}

pub(crate) struct DualSolution {
    pub alpha: Vec<f64>,
    pub rho: f64,
    pub iterations: usize,
    pub converged: bool,
}

/// Solve `min 1/2 a'Qa - e'a` s.t. `0 <= a <= c`, `y'a = 0`, with
/// `Q_ij = y_i y_j K_ij` and `k` the dense kernel matrix.
pub(crate) fn solve_dual(k: &[f64], y: &[f64], c: f64, tol: f64, max_iter: usize) -> DualSolution {
    let n = y.len();
    let kk = |i: usize, j: usize| k[i * n + j];
    let mut alpha = vec![0.0; n];
    let mut grad = vec![-1.0; n];
    let is_up = |a: f64, y: f64| (y > 0.0 && a < c) || (y < 0.0 && a > 0.0);
    let is_low = |a: f64, y: f64| (y > 0.0 && a > 0.0) || (y < 0.0 && a < c);
    let mut iterations = 0;
    let mut converged = false;
    loop {
        let mut gmax = f64::NEG_INFINITY;
        let mut sel_i = None;
        for t in 0..n {
            if is_up(alpha[t], y[t]) && -y[t] * grad[t] > gmax {
                gmax = -y[t] * grad[t];
                sel_i = Some(t);
            }
        }
        let mut gmax2 = f64::NEG_INFINITY;
        let mut sel_j = None;
        let mut obj_min = f64::INFINITY;
        if let Some(i) = sel_i {
            for t in 0..n {
                if !is_low(alpha[t], y[t]) {
                    continue;
                }
                gmax2 = gmax2.max(y[t] * grad[t]);
                let grad_diff = gmax + y[t] * grad[t];
                if grad_diff > 0.0 {
                    let mut quad = kk(i, i) + kk(t, t) - 2.0 * kk(i, t);
                    if quad <= 0.0 {
                        quad = TAU;
                    }
                    let obj = -(grad_diff * grad_diff) / quad;
                    if obj < obj_min {
                        obj_min = obj;
                        sel_j = Some(t);
                    }
                }
            }
        }
        let (Some(i), Some(j)) = (sel_i, sel_j) else {
            converged = true;
            break;
        };
        if gmax + gmax2 < tol {
            converged = true;
            break;
        }
        if iterations >= max_iter {
            break;
        }
        iterations += 1;

        let (old_i, old_j) = (alpha[i], alpha[j]);
        if y[i] != y[j] {
            let mut quad = kk(i, i) + kk(j, j) + 2.0 * kk(i, j);
            if quad <= 0.0 {
                quad = TAU;
            }
            let delta = (-grad[i] - grad[j]) / quad;
            let diff = alpha[i] - alpha[j];
            alpha[i] += delta;
            alpha[j] += delta;
            if diff > 0.0 {
                if alpha[j] < 0.0 {
                    alpha[j] = 0.0;
                    alpha[i] = diff;
                }
            } else if alpha[i] < 0.0 {
                alpha[i] = 0.0;
                alpha[j] = -diff;
            }
            if diff > 0.0 {
                if alpha[i] > c {
                    alpha[i] = c;
                    alpha[j] = c - diff;
                }
            } else if alpha[j] > c {
                alpha[j] = c;
                alpha[i] = c + diff;
            }
        } else {
            let mut quad = kk(i, i) + kk(j, j) - 2.0 * kk(i, j);
            if quad <= 0.0 {
                quad = TAU;
            }
            let delta = (grad[i] - grad[j]) / quad;
            let sum = alpha[i] + alpha[j];
            alpha[i] -= delta;
            alpha[j] += delta;
            if sum > c {
                if alpha[i] > c {
                    alpha[i] = c;
                    alpha[j] = sum - c;
                }
            } else if alpha[j] < 0.0 {
                alpha[j] = 0.0;
                alpha[i] = sum;
            }
            if sum > c {
                if alpha[j] > c {
                    alpha[j] = c;
                    alpha[i] = sum - c;
                }
            } else if alpha[i] < 0.0 {
                alpha[i] = 0.0;
                alpha[j] = sum;
            }
        }
        let (di, dj) = (alpha[i] - old_i, alpha[j] - old_j);
        for t in 0..n {
            grad[t] += y[t] * (y[i] * kk(t, i) * di + y[j] * kk(t, j) * dj);
        }
    }

    let (mut ub, mut lb) = (f64::INFINITY, f64::NEG_INFINITY);
    let (mut n_free, mut sum_free) = (0usize, 0.0);
    for t in 0..n {
        let yg = y[t] * grad[t];
        if alpha[t] >= c {
            if y[t] < 0.0 {
                ub = ub.min(yg);
            } else {
                lb = lb.max(yg);
            }
        } else if alpha[t] <= 0.0 {
            if y[t] > 0.0 {
                ub = ub.min(yg);
            } else {
                lb = lb.max(yg);
            }
        } else {
            n_free += 1;
            sum_free += yg;
        }
    }
    let rho = if n_free > 0 {
        sum_free / n_free as f64
    } else {
        (ub + lb) / 2.0
    };
    DualSolution {
        alpha,
        rho,
        iterations,
        converged,
    }
}

/// Largest KKT violation of a dual solution over its training rows.
pub(crate) fn kkt_violation(k: &[f64], y: &[f64], sol: &DualSolution, c: f64) -> f64 {
    let n = y.len();
    (0..n)
        .map(|i| {
            let f: f64 = (0..n).map(|j| sol.alpha[j] * y[j] * k[i * n + j]).sum::<f64>() - sol.rho;
            let margin = y[i] * f;
            if sol.alpha[i] <= 0.0 {
                (1.0 - margin).max(0.0)
            } else if sol.alpha[i] >= c {
                (margin - 1.0).max(0.0)
            } else {
                libm::fabs(margin - 1.0)
            }
        })
        .fold(0.0, f64::max)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SvmRbf {
    pub params: SvmParams,
    /// Resolved kernel width.
    pub gamma: f64,
    pub machines: Vec<BinarySvm>,
}

impl SvmRbf {
    pub(crate) fn fit(data: &Encoded<'_>, params: &SvmParams) -> SvmRbf {
        let gamma = params.gamma.unwrap_or_else(|| default_gamma(data.x, data.width));
        let w = data.width;
        let mut machines = Vec::new();
        for a in 0..data.n_classes {
            for b in a + 1..data.n_classes {
                let rows: Vec<usize> = (0..data.y.len())
                    .filter(|&r| data.y[r] == a || data.y[r] == b)
                    .collect();
                let y: Vec<f64> = rows.iter().map(|&r| if data.y[r] == a { 1.0 } else { -1.0 }).collect();
                let n = rows.len();
                let row = |r: usize| &data.x[r * w..(r + 1) * w];
                let mut k = vec![0.0; n * n];
                for i in 0..n {
                    k[i * n + i] = 1.0;
                    for j in i + 1..n {
                        let v = rbf(row(rows[i]), row(rows[j]), gamma);
                        k[i * n + j] = v;
                        k[j * n + i] = v;
                    }
                }
                let sol = solve_dual(&k, &y, params.c, params.tol, params.max_passes.saturating_mul(n));
                if !sol.converged {
                    log::warn!(
                        "SMO for classes {a}/{b} stopped after {} iterations without converging",
                        sol.iterations
                    );
                }
                let kkt = kkt_violation(&k, &y, &sol, params.c);
                let mut support = Vec::new();
                let mut coef = Vec::new();
                for (i, &alpha) in sol.alpha.iter().enumerate() {
                    if alpha > 0.0 {
                        support.extend_from_slice(row(rows[i]));
                        coef.push(alpha * y[i]);
                    }
                }
                machines.push(BinarySvm {
                    positive: a,
                    negative: b,
                    support,
                    coef,
                    rho: sol.rho,
                    iterations: sol.iterations,
                    converged: sol.converged,
                    kkt_violation: kkt,
                });
            }
        }
        SvmRbf {
            params: params.clone(),
            gamma,
            machines,
        }
    }

    pub fn predict(&self, x: &[f64], n_classes: usize) -> usize {
        let mut votes = vec![0.0; n_classes];
        for m in &self.machines {
            if m.decision(x, self.gamma) >= 0.0 {
                votes[m.positive] += 1.0;
            } else {
                votes[m.negative] += 1.0;
            }
        }
        argmax(votes.into_iter())
    }
}
