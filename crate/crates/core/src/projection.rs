//! Exact t-SNE into two dimensions and plot-ready rows.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::features::Dataset;
use crate::seed;
use crate::{Error, Result};

const ENTROPY_TOL: f64 = 1e-5;
const BISECTION_STEPS: usize = 200;
const INIT_SIGMA: f64 = 1e-4;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TsneParams {
    pub perplexity: f64,
    pub iterations: usize,
    pub learning_rate: f64,
    pub early_exaggeration: f64,
    pub exaggeration_iterations: usize,
    pub seed: u64,
}

impl Default for TsneParams {
    fn default() -> Self {
        TsneParams {
            perplexity: 30.0,
            iterations: 1000,
            learning_rate: 200.0,
            early_exaggeration: 12.0,
            exaggeration_iterations: 250,
            seed: 0,
        }
    }
}

impl TsneParams {
    pub fn validate(&self, n: usize) -> Result<()> {
        if n < 3 {
            return Err(Error::Projection(format!("t-SNE needs at least 3 points, got {n}")));
        }
        if !(self.perplexity >= 1.0 && self.perplexity < n as f64) {
            return Err(Error::Projection(format!(
                "perplexity {} must lie in [1, {n})",
                self.perplexity
            )));
        }
        if self.iterations == 0 {
            return Err(Error::Projection("iterations must be at least 1".into()));
        }
        if !(self.learning_rate.is_finite() && self.learning_rate > 0.0) {
            return Err(Error::Projection(format!("learning rate {} must be positive", self.learning_rate)));
        }
        if !(self.early_exaggeration.is_finite() && self.early_exaggeration >= 1.0) {
            return Err(Error::Projection(format!(
                "early exaggeration {} must be at least 1",
                self.early_exaggeration
            )));
        }
        Ok(())
    }
}

fn squared_distances(values: &[f64], width: usize) -> Vec<f64> {
    let n = values.len() / width;
    let mut d = vec![0.0; n * n];
    for i in 0..n {
        let a = &values[i * width..(i + 1) * width];
        for j in i + 1..n {
            let b = &values[j * width..(j + 1) * width];
            let s: f64 = a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum();
            d[i * n + j] = s;
            d[j * n + i] = s;
        }
    }
    d
}

/// Conditional row `p_{j|i}` at precision `beta`, with its entropy in nats.
fn conditional_row(dist: &[f64], i: usize, beta: f64, out: &mut [f64]) -> f64 {
    let min = dist
        .iter()
        .enumerate()
        .filter(|&(j, _)| j != i)
        .map(|(_, &d)| d)
        .fold(f64::INFINITY, f64::min);
    let mut sum = 0.0;
    let mut weighted = 0.0;
    for (j, (&d, o)) in dist.iter().zip(out.iter_mut()).enumerate() {
        *o = if j == i { 0.0 } else { libm::exp(-beta * (d - min)) };
        sum += *o;
        weighted += (d - min) * *o;
    }
    out.iter_mut().for_each(|o| *o /= sum);
    libm::log(sum) + beta * weighted / sum
}

/// Symmetric joint affinities `P` (row-major `N x N`) for row-major points.
pub fn perplexity_affinities(values: &[f64], width: usize, perplexity: f64) -> Result<Vec<f64>> {
    let cond = conditional_affinities(values, width, perplexity)?;
    let n = libm::sqrt(cond.len() as f64) as usize;
    let mut p = vec![0.0; n * n];
    let scale = 1.0 / (2.0 * n as f64);
    for i in 0..n {
        for j in 0..n {
            p[i * n + j] = (cond[i * n + j] + cond[j * n + i]) * scale;
        }
    }
    Ok(p)
}

fn conditional_affinities(values: &[f64], width: usize, perplexity: f64) -> Result<Vec<f64>> {
    if width == 0 || values.len() % width != 0 {
        return Err(Error::Projection(format!(
            "{} values do not form rows of width {width}",
            values.len()
        )));
    }
    let n = values.len() / width;
    if n < 3 {
        return Err(Error::Projection(format!("t-SNE needs at least 3 points, got {n}")));
    }
    if !(perplexity >= 1.0 && perplexity < n as f64) {
        return Err(Error::Projection(format!("perplexity {perplexity} must lie in [1, {n})")));
    }
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::Projection("features contain non-finite values".into()));
    }
    let dist = squared_distances(values, width);
    let target = libm::log(perplexity);
    let mut cond = vec![0.0; n * n];
    for i in 0..n {
        let row_d = &dist[i * n..(i + 1) * n];
        let row = &mut cond[i * n..(i + 1) * n];
        let (mut lo, mut hi, mut beta) = (0.0f64, f64::INFINITY, 1.0);
        let mut h = conditional_row(row_d, i, beta, row);
        let mut step = 0;
        while libm::fabs(h - target) > ENTROPY_TOL {
            step += 1;
            if step > BISECTION_STEPS {
                return Err(Error::Projection(format!(
                    "bandwidth search for point {i} did not reach perplexity {perplexity} \
                     (entropy {h:.6} vs {target:.6}); points may be identical"
                )));
            }
            if h > target {
                lo = beta;
                beta = if hi.is_infinite() { beta * 2.0 } else { 0.5 * (beta + hi) };
            } else {
                hi = beta;
                beta = 0.5 * (beta + lo);
            }
            h = conditional_row(row_d, i, beta, row);
        }
    }
    Ok(cond)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Embedding {
    pub coords: Vec<[f64; 2]>,
    /// KL(P || Q) before the first update and after every iteration.
    pub kl: Vec<f64>,
}

/// Student-t kernel values (zero diagonal) and their sum.
fn student_t(y: &[[f64; 2]], num: &mut [f64]) -> f64 {
    let n = y.len();
    let mut z = 0.0;
    for i in 0..n {
        num[i * n + i] = 0.0;
        for j in i + 1..n {
            let dx = y[i][0] - y[j][0];
            let dy = y[i][1] - y[j][1];
            let q = 1.0 / (1.0 + dx * dx + dy * dy);
            num[i * n + j] = q;
            num[j * n + i] = q;
            z += 2.0 * q;
        }
    }
    z
}

fn kl_divergence(p: &[f64], num: &[f64], z: f64) -> f64 {
    p.iter()
        .zip(num)
        .filter(|(&pij, _)| pij > 0.0)
        .map(|(&pij, &q)| pij * libm::log(pij / f64::max(q / z, f64::MIN_POSITIVE)))
        .sum()
}

pub fn tsne_points(values: &[f64], width: usize, params: &TsneParams) -> Result<Embedding> {
    let n = if width == 0 { 0 } else { values.len() / width };
    params.validate(n)?;
    let p = perplexity_affinities(values, width, params.perplexity)?;

    let mut rng = seed::rng(params.seed);
    let mut y: Vec<[f64; 2]> = (0..n)
        .map(|_| [INIT_SIGMA * seed::normal(&mut rng), INIT_SIGMA * seed::normal(&mut rng)])
        .collect();
    let mut update = vec![[0.0f64; 2]; n];
    let mut gains = vec![[1.0f64; 2]; n];
    let mut num = vec![0.0; n * n];
    let mut kl = Vec::with_capacity(params.iterations + 1);

    for iter in 0..params.iterations {
        let early = iter < params.exaggeration_iterations;
        let exaggeration = if early { params.early_exaggeration } else { 1.0 };
        let momentum = if early { 0.5 } else { 0.8 };
        let z = student_t(&y, &mut num);
        kl.push(kl_divergence(&p, &num, z));

        for i in 0..n {
            let mut grad = [0.0f64; 2];
            for j in 0..n {
                let q = num[i * n + j];
                let coeff = (exaggeration * p[i * n + j] - q / z) * q;
                grad[0] += coeff * (y[i][0] - y[j][0]);
                grad[1] += coeff * (y[i][1] - y[j][1]);
            }
            for d in 0..2 {
                let g = 4.0 * grad[d];
                let gain = &mut gains[i][d];
                *gain = if (g > 0.0) != (update[i][d] > 0.0) { *gain + 0.2 } else { *gain * 0.8 };
                *gain = gain.max(0.01);
                update[i][d] = momentum * update[i][d] - params.learning_rate * *gain * g;
            }
        }
        let mut mean = [0.0f64; 2];
        for (yi, u) in y.iter_mut().zip(&update) {
            yi[0] += u[0];
            yi[1] += u[1];
            mean[0] += yi[0];
            mean[1] += yi[1];
        }
        mean[0] /= n as f64;
        mean[1] /= n as f64;
        for yi in y.iter_mut() {
            yi[0] -= mean[0];
            yi[1] -= mean[1];
        }
        if y.iter().flatten().any(|v| !v.is_finite()) {
            return Err(Error::Projection(format!(
                "embedding diverged at iteration {iter}; lower the learning rate (currently {})",
                params.learning_rate
            )));
        }
    }
    let z = student_t(&y, &mut num);
    kl.push(kl_divergence(&p, &num, z));
    if kl.iter().any(|v| !v.is_finite()) {
        return Err(Error::Projection("KL divergence became non-finite".into()));
    }
    Ok(Embedding { coords: y, kl })
}

pub fn tsne(data: &Dataset, params: &TsneParams) -> Result<Embedding> {
    tsne_points(data.values(), data.width(), params)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Grouping {
    Class,
    Clip,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlotRow {
    pub x: f64,
    pub y: f64,
    pub class: String,
    pub clip_id: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlotData {
    pub rows: Vec<PlotRow>,
}

impl PlotData {
    pub fn group_key(row: &PlotRow, mode: Grouping) -> &str {
        match mode {
            Grouping::Class => &row.class,
            Grouping::Clip => &row.clip_id,
        }
    }

    /// Row indices per group key.
    pub fn groups(&self, mode: Grouping) -> BTreeMap<&str, Vec<usize>> {
        let mut g: BTreeMap<&str, Vec<usize>> = BTreeMap::new();
        for (i, r) in self.rows.iter().enumerate() {
            g.entry(Self::group_key(r, mode)).or_default().push(i);
        }
        g
    }

    /// Rows ordered by group key, input order within a group.
    pub fn grouped(&self, mode: Grouping) -> Vec<&PlotRow> {
        self.groups(mode)
            .into_values()
            .flatten()
            .map(|i| &self.rows[i])
            .collect()
    }
}

pub fn embedding_report(coords: &[[f64; 2]], labels: &[String], clip_ids: &[String]) -> Result<PlotData> {
    if coords.is_empty() {
        return Err(Error::Projection("no points to report".into()));
    }
    if labels.len() != coords.len() || clip_ids.len() != coords.len() {
        return Err(Error::Projection(format!(
            "{} coordinates but {} labels and {} clip ids",
            coords.len(),
            labels.len(),
            clip_ids.len()
        )));
    }
    Ok(PlotData {
        rows: coords
            .iter()
            .zip(labels.iter().zip(clip_ids))
            .map(|(c, (l, id))| PlotRow {
                x: c[0],
                y: c[1],
                class: l.clone(),
                clip_id: id.clone(),
            })
            .collect(),
    })
}
