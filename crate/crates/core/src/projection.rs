//! Two-dimensional views of embedding sets: PCA fit on a background sample
//! and exact t-SNE.

use std::io::Write;

use nalgebra::{DMatrix, SymmetricEigen};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::embedding::{keyed_seed, EmbeddingMatrix};

#[derive(Debug, Error)]
pub enum ProjectionError {
    #[error("need more than {min} points, got {got}")]
    TooFewPoints { min: usize, got: usize },
    #[error("background has no variance")]
    RankDeficient,
    #[error("dimension mismatch: model {model}, input {input}")]
    DimMismatch { model: usize, input: usize },
    #[error("perplexity {perplexity} infeasible for {n} points (need 1 < p < {max:.3})")]
    InfeasiblePerplexity { perplexity: f64, n: usize, max: f64 },
    #[error("invalid t-SNE config: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PcaModel {
    pub mean: Vec<f64>,
    pub components: [Vec<f64>; 2],
    pub explained_variance: [f64; 2],
    pub total_variance: f64,
}

impl PcaModel {
    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn explained_variance_ratio(&self) -> [f64; 2] {
        self.explained_variance.map(|v| v / self.total_variance)
    }

    fn project(&self, row: impl Iterator<Item = f64>) -> [f64; 2] {
        let mut out = [0.0; 2];
        for (j, x) in row.enumerate() {
            let c = x - self.mean[j];
            out[0] += c * self.components[0][j];
            out[1] += c * self.components[1][j];
        }
        out
    }
}

/// Flip `v` so its largest-magnitude entry (first on ties) is positive.
fn orient(v: &mut [f64]) {
    let mut best = 0;
    for (i, x) in v.iter().enumerate() {
        if x.abs() > v[best].abs() {
            best = i;
        }
    }
    if v[best] < 0.0 {
        v.iter_mut().for_each(|x| *x = -*x);
    }
}

/// Top two principal directions of the mean-centered background.
pub fn pca_fit(background: &EmbeddingMatrix) -> Result<PcaModel, ProjectionError> {
    let n = background.len();
    if n <= 2 {
        return Err(ProjectionError::TooFewPoints { min: 2, got: n });
    }
    let dim = background.dim();
    let x = DMatrix::from_fn(n, dim, |i, j| background.row(i)[j] as f64);
    let mean: Vec<f64> = (0..dim).map(|j| x.column(j).sum() / n as f64).collect();
    let centered = DMatrix::from_fn(n, dim, |i, j| x[(i, j)] - mean[j]);
    let cov = centered.tr_mul(&centered) / (n - 1) as f64;
    let total_variance = cov.trace();
    let eig = SymmetricEigen::new(cov);
    let mut order: Vec<usize> = (0..dim).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let scale = x.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(f64::MIN_POSITIVE);
    if dim < 2 || eig.eigenvalues[order[0]] <= 1e-12 * scale * scale {
        return Err(ProjectionError::RankDeficient);
    }
    let component = |k: usize| {
        let mut v: Vec<f64> = eig.eigenvectors.column(order[k]).iter().copied().collect();
        orient(&mut v);
        v
    };
    Ok(PcaModel {
        mean,
        components: [component(0), component(1)],
        explained_variance: [eig.eigenvalues[order[0]].max(0.0), eig.eigenvalues[order[1]].max(0.0)],
        total_variance,
    })
}

pub fn pca_transform(model: &PcaModel, x: &EmbeddingMatrix) -> Result<Vec<[f64; 2]>, ProjectionError> {
    if x.dim() != model.dim() {
        return Err(ProjectionError::DimMismatch { model: model.dim(), input: x.dim() });
    }
    Ok(x.rows().map(|r| model.project(r.iter().map(|&v| v as f64))).collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TsneConfig {
    pub perplexity: f64,
    pub iterations: usize,
    pub early_exaggeration: f64,
    pub exaggeration_iterations: usize,
    pub learning_rate: f64,
    pub initial_momentum: f64,
    pub final_momentum: f64,
    pub momentum_switch: usize,
    pub seed: u64,
}

impl Default for TsneConfig {
    fn default() -> Self {
        TsneConfig {
            perplexity: 15.0,
            iterations: 1000,
            early_exaggeration: 12.0,
            exaggeration_iterations: 250,
            learning_rate: 200.0,
            initial_momentum: 0.5,
            final_momentum: 0.8,
            momentum_switch: 250,
            seed: 0,
        }
    }
}

impl TsneConfig {
    pub fn validate(&self, n: usize) -> Result<(), ProjectionError> {
        if n < 4 {
            return Err(ProjectionError::TooFewPoints { min: 3, got: n });
        }
        let max = (n as f64 - 1.0) / 3.0;
        if !(self.perplexity > 1.0 && self.perplexity < max) {
            return Err(ProjectionError::InfeasiblePerplexity { perplexity: self.perplexity, n, max });
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(ProjectionError::InvalidConfig(format!("learning rate {}", self.learning_rate)));
        }
        if !(self.early_exaggeration >= 1.0 && self.early_exaggeration.is_finite()) {
            return Err(ProjectionError::InvalidConfig(format!(
                "early exaggeration {}",
                self.early_exaggeration
            )));
        }
        for m in [self.initial_momentum, self.final_momentum] {
            if !(0.0..1.0).contains(&m) {
                return Err(ProjectionError::InvalidConfig(format!("momentum {m}")));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TsneResult {
    pub ids: Vec<String>,
    pub coords: Vec<[f64; 2]>,
    /// Perplexity of each point's conditional distribution after the
    /// bandwidth search.
    pub perplexities: Vec<f64>,
    /// KL(P‖Q) after each iteration, measured against the unexaggerated P.
    pub kl_history: Vec<f64>,
}

const ENTROPY_TOL: f64 = 1e-10;
const BANDWIDTH_STEPS: usize = 200;
const MIN_GAIN: f64 = 0.01;
const P_FLOOR: f64 = 1e-12;
const INIT_SCALE: f64 = 1e-4;

/// Conditional distribution over row `i` of the squared distance matrix with
/// the given target entropy. Returns the row (self entry 0), the achieved
/// perplexity, and whether the uniform fallback was used.
fn conditional_row(d: &[f64], i: usize, log_perp: f64) -> (Vec<f64>, f64, bool) {
    let n = d.len();
    let others = || d.iter().enumerate().filter(move |&(j, _)| j != i).map(|(_, &v)| v);
    let dmin = others().fold(f64::INFINITY, f64::min);
    let dmax = others().fold(f64::NEG_INFINITY, f64::max);
    let mut p = vec![0.0; n];
    if dmax - dmin <= 1e-12 * dmax.max(f64::MIN_POSITIVE) {
        let u = 1.0 / (n - 1) as f64;
        for (j, v) in p.iter_mut().enumerate() {
            if j != i {
                *v = u;
            }
        }
        return (p, (n - 1) as f64, true);
    }
    let mut beta = 1.0 / (dmax - dmin).max(f64::MIN_POSITIVE);
    let (mut lo, mut hi) = (0.0f64, f64::INFINITY);
    let mut entropy = 0.0;
    for _ in 0..BANDWIDTH_STEPS {
        let mut z = 0.0;
        let mut weighted = 0.0;
        for (j, &dj) in d.iter().enumerate() {
            if j == i {
                continue;
            }
            let s = dj - dmin;
            let e = (-s * beta).exp();
            p[j] = e;
            z += e;
            weighted += s * e;
        }
        entropy = z.ln() + beta * weighted / z;
        for (j, v) in p.iter_mut().enumerate() {
            if j != i {
                *v /= z;
            }
        }
        let diff = entropy - log_perp;
        if diff.abs() < ENTROPY_TOL {
            break;
        }
        if diff > 0.0 {
            lo = beta;
            beta = if hi.is_infinite() { beta * 2.0 } else { (beta + hi) / 2.0 };
        } else {
            hi = beta;
            beta = (beta + lo) / 2.0;
        }
    }
    (p, entropy.exp(), false)
}

fn squared_distances(rows: &[Vec<f64>]) -> Vec<Vec<f64>> {
    rows.par_iter()
        .map(|a| {
            rows.iter()
                .map(|b| a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum())
                .collect()
        })
        .collect()
}

/// Symmetrized joint affinities, dense row-major, plus the per-point
/// achieved perplexities.
fn joint_affinities(rows: &[Vec<f64>], perplexity: f64) -> (Vec<f64>, Vec<f64>) {
    let n = rows.len();
    let d = squared_distances(rows);
    let log_perp = perplexity.ln();
    let conditional: Vec<(Vec<f64>, f64, bool)> =
        (0..n).into_par_iter().map(|i| conditional_row(&d[i], i, log_perp)).collect();
    let degenerate = conditional.iter().filter(|c| c.2).count();
    if degenerate > 0 {
        log::warn!("{degenerate} of {n} points have all-equal distances; using uniform affinities");
    }
    let mut p = vec![0.0; n * n];
    let scale = 1.0 / (2.0 * n as f64);
    for i in 0..n {
        for j in 0..n {
            if i != j {
                p[i * n + j] = ((conditional[i].0[j] + conditional[j].0[i]) * scale).max(P_FLOOR);
            }
        }
    }
    let total: f64 = p.iter().sum();
    p.iter_mut().for_each(|v| *v /= total);
    (p, conditional.into_iter().map(|c| c.1).collect())
}

fn initial_layout(ids: &[String], seed: u64) -> Vec<[f64; 2]> {
    ids.iter()
        .map(|id| {
            let mut rng = ChaCha8Rng::seed_from_u64(keyed_seed(seed, id));
            let a: f64 = StandardNormal.sample(&mut rng);
            let b: f64 = StandardNormal.sample(&mut rng);
            [a * INIT_SCALE, b * INIT_SCALE]
        })
        .collect()
}

/// Exact t-SNE. Points are processed in sentence-id order so the output is
/// equivariant under row permutation.
pub fn tsne(x: &EmbeddingMatrix, cfg: &TsneConfig) -> Result<TsneResult, ProjectionError> {
    let n = x.len();
    cfg.validate(n)?;
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| x.ids()[a].cmp(&x.ids()[b]));
    let ids: Vec<String> = order.iter().map(|&i| x.ids()[i].clone()).collect();
    let rows: Vec<Vec<f64>> = order
        .iter()
        .map(|&i| x.row(i).iter().map(|&v| v as f64).collect())
        .collect();

    let (p, perplexities) = joint_affinities(&rows, cfg.perplexity);
    let p_entropy: f64 = p.iter().filter(|&&v| v > 0.0).map(|&v| v * v.ln()).sum();
    let mut y = initial_layout(&ids, cfg.seed);
    let mut update = vec![[0.0f64; 2]; n];
    let mut gains = vec![[1.0f64; 2]; n];
    let mut kl_history = Vec::with_capacity(cfg.iterations);

    for iter in 0..cfg.iterations {
        let exaggeration = if iter < cfg.exaggeration_iterations { cfg.early_exaggeration } else { 1.0 };
        let momentum = if iter < cfg.momentum_switch { cfg.initial_momentum } else { cfg.final_momentum };

        // Row sums of the Student-t kernel, then the normalizer in row order.
        let kernel = |i: usize, j: usize| {
            let dx = y[i][0] - y[j][0];
            let dy = y[i][1] - y[j][1];
            1.0 / (1.0 + dx * dx + dy * dy)
        };
        let row_sums: Vec<f64> = (0..n)
            .into_par_iter()
            .map(|i| (0..n).filter(|&j| j != i).map(|j| kernel(i, j)).sum())
            .collect();
        let z: f64 = row_sums.iter().sum();

        let per_row: Vec<([f64; 2], f64)> = (0..n)
            .into_par_iter()
            .map(|i| {
                let mut g = [0.0; 2];
                let mut cross = 0.0;
                for j in 0..n {
                    if j == i {
                        continue;
                    }
                    let k = kernel(i, j);
                    let pij = p[i * n + j];
                    let w = (exaggeration * pij - k / z) * k;
                    g[0] += w * (y[i][0] - y[j][0]);
                    g[1] += w * (y[i][1] - y[j][1]);
                    cross += pij * k.ln();
                }
                ([4.0 * g[0], 4.0 * g[1]], cross)
            })
            .collect();
        let cross: f64 = per_row.iter().map(|r| r.1).sum();
        // KL = Σ p ln p − Σ p ln k + ln Z, with Σ p = 1.
        kl_history.push(p_entropy - cross + z.ln());

        for i in 0..n {
            let grad = per_row[i].0;
            for c in 0..2 {
                let same_sign = (grad[c] > 0.0) == (update[i][c] > 0.0);
                gains[i][c] = if same_sign { gains[i][c] * 0.8 } else { gains[i][c] + 0.2 };
                gains[i][c] = gains[i][c].max(MIN_GAIN);
                update[i][c] = momentum * update[i][c] - cfg.learning_rate * gains[i][c] * grad[c];
                y[i][c] += update[i][c];
            }
        }
        let mut centre = [0.0; 2];
        for v in &y {
            centre[0] += v[0];
            centre[1] += v[1];
        }
        for v in &mut y {
            v[0] -= centre[0] / n as f64;
            v[1] -= centre[1] / n as f64;
        }
    }

    // Back to input row order.
    let mut coords = vec![[0.0; 2]; n];
    let mut perp = vec![0.0; n];
    for (k, &i) in order.iter().enumerate() {
        coords[i] = y[k];
        perp[i] = perplexities[k];
    }
    Ok(TsneResult { ids: x.ids().to_vec(), coords, perplexities: perp, kl_history })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProjectionRow {
    pub sentence_id: String,
    pub x: f64,
    pub y: f64,
    pub note_type: String,
    pub specialty: String,
}

/// CSV with header `sentence_id,x,y,note_type,specialty`.
pub fn write_projection_csv(w: impl Write, rows: &[ProjectionRow]) -> Result<(), ProjectionError> {
    let mut out = csv::Writer::from_writer(w);
    for r in rows {
        out.serialize(r)?;
    }
    out.flush()?;
    Ok(())
}
