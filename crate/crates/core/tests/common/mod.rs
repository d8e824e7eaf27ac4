#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, StandardNormal};
use semdist_core::classifier::{gradient_check, LabeledData, SoftmaxHead};
use semdist_core::corpus::Label;
use semdist_core::distance::{intra_mcd, mcd};
use semdist_core::embedding::cosine_distance;
use semdist_core::metrics::auc;
use semdist_core::projection::{tsne, TsneConfig};
use semdist_core::EmbeddingMatrix;

pub type Check = Result<(), String>;

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Check {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

pub fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    let m = v.len() / 2;
    if v.len() % 2 == 0 {
        (v[m - 1] + v[m]) / 2.0
    } else {
        v[m]
    }
}

pub fn random_matrix(rng: &mut ChaCha8Rng, n: usize, dim: usize, prefix: &str) -> EmbeddingMatrix {
    let rows = (0..n)
        .map(|_| (0..dim).map(|_| StandardNormal.sample(rng)).collect())
        .collect();
    EmbeddingMatrix::from_rows((0..n).map(|i| format!("{prefix}{i}")).collect(), rows).unwrap()
}

pub fn naive_mcd(a: &EmbeddingMatrix, b: &EmbeddingMatrix) -> f64 {
    let mut d = Vec::new();
    for u in a.rows() {
        for v in b.rows() {
            d.push(cosine_distance(u, v).unwrap());
        }
    }
    median(d)
}

pub fn naive_intra_mcd(a: &EmbeddingMatrix) -> f64 {
    let mut d = Vec::new();
    for i in 0..a.len() {
        for j in i + 1..a.len() {
            d.push(cosine_distance(a.row(i), a.row(j)).unwrap());
        }
    }
    median(d)
}

/// Exact agreement with the quadratic oracle on `trials` random pairs of
/// matrices with up to 200 rows.
pub fn check_mcd_oracle(trials: usize) -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for trial in 0..trials {
        let na = rng.random_range(2..=200);
        let nb = rng.random_range(1..=200);
        let dim = rng.random_range(2..=48);
        let a = random_matrix(&mut rng, na, dim, "a");
        let b = random_matrix(&mut rng, nb, dim, "b");
        let (got, want) = (mcd(&a, &b).unwrap(), naive_mcd(&a, &b));
        ensure(got == want, || format!("trial {trial}: mcd {got} vs oracle {want}"))?;
        let (got, want) = (intra_mcd(&a).unwrap(), naive_intra_mcd(&a));
        ensure(got == want, || format!("trial {trial}: intra {got} vs oracle {want}"))?;
    }
    Ok(())
}

/// Tight cluster around basis vector `centre`.
pub fn cluster(rng: &mut ChaCha8Rng, n: usize, dim: usize, centre: usize, prefix: &str) -> Vec<(String, Vec<f32>)> {
    let noise = Normal::new(0.0f32, 0.05).unwrap();
    (0..n)
        .map(|i| {
            let row = (0..dim)
                .map(|d| noise.sample(rng) + if d == centre { 1.0 } else { 0.0 })
                .collect();
            (format!("{prefix}{i}"), row)
        })
        .collect()
}

pub fn matrix(rows: Vec<(String, Vec<f32>)>) -> EmbeddingMatrix {
    let (ids, rows) = rows.into_iter().unzip();
    EmbeddingMatrix::from_rows(ids, rows).unwrap()
}

/// Symmetry, scale invariance, and monotone growth as near rows are swapped
/// for rows from an orthogonal cluster.
pub fn check_mcd_invariants(seed: u64) -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let dim = 16;
    let a = random_matrix(&mut rng, 30, dim, "a");
    let b = random_matrix(&mut rng, 25, dim, "b");
    let (ab, ba) = (mcd(&a, &b).unwrap(), mcd(&b, &a).unwrap());
    ensure(ab == ba, || format!("seed {seed}: asymmetric {ab} vs {ba}"))?;

    let scale: f32 = rng.random_range(0.1..10.0);
    let scaled = matrix(a.iter().map(|(id, r)| (id.to_string(), r.iter().map(|v| v * scale).collect())).collect());
    let s = mcd(&scaled, &b).unwrap();
    ensure((s - ab).abs() < 1e-6, || format!("seed {seed}: scaling by {scale} moved mcd {ab} to {s}"))?;

    let reference = matrix(cluster(&mut rng, 20, dim, 0, "r"));
    let near = cluster(&mut rng, 20, dim, 0, "n");
    let far = cluster(&mut rng, 20, dim, 1, "f");
    let mut last = f64::NEG_INFINITY;
    for k in 0..=20 {
        let mix: Vec<_> = far[..k].iter().chain(&near[k..]).cloned().collect();
        let d = mcd(&reference, &matrix(mix)).unwrap();
        ensure(d >= last, || format!("seed {seed}: mixture step {k} fell from {last} to {d}"))?;
        last = d;
    }
    Ok(())
}

pub fn brute_auc(scores: &[f64], pos: &[bool]) -> f64 {
    let mut num = 0.0;
    let mut pairs = 0.0;
    for (i, &si) in scores.iter().enumerate() {
        for (j, &sj) in scores.iter().enumerate() {
            if pos[i] && !pos[j] {
                pairs += 1.0;
                num += if si > sj {
                    1.0
                } else if si == sj {
                    0.5
                } else {
                    0.0
                };
            }
        }
    }
    num / pairs
}

/// Rank AUC against pair counting on random instances with heavy ties.
pub fn check_auc(instances: usize) -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut checked = 0;
    while checked < instances {
        let n = rng.random_range(2..=50);
        let levels = rng.random_range(2..=20);
        let scores: Vec<f64> = (0..n).map(|_| rng.random_range(0..levels) as f64 / levels as f64).collect();
        let pos: Vec<bool> = (0..n).map(|_| rng.random_bool(0.4)).collect();
        if pos.iter().all(|&p| p) || pos.iter().all(|&p| !p) {
            continue;
        }
        let (got, want) = (auc(&scores, &pos).unwrap(), brute_auc(&scores, &pos));
        ensure((got - want).abs() <= 1e-12, || format!("instance {checked}: {got} vs {want}"))?;
        checked += 1;
    }
    Ok(())
}

/// Worst relative gradient error over random heads and minibatches.
pub fn worst_gradient_error(batches: usize) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let weight = Normal::new(0.0, 0.5).unwrap();
    let mut worst = 0.0f64;
    for batch in 0..batches {
        let dim = rng.random_range(2..=10);
        let n = rng.random_range(3..=40);
        let features: Vec<f64> = (0..n * dim).map(|_| StandardNormal.sample(&mut rng)).collect();
        let labels: Vec<Label> = (0..n).map(|_| Label::ALL[rng.random_range(0..3)]).collect();
        let data = LabeledData::new(dim, features, labels).unwrap();
        let weights = (0..dim * 3).map(|_| weight.sample(&mut rng)).collect();
        let bias = [weight.sample(&mut rng), weight.sample(&mut rng), weight.sample(&mut rng)];
        let head = SoftmaxHead::from_parts(dim, weights, bias).unwrap();
        let size = rng.random_range(1..=n);
        let idx: Vec<usize> = (0..size).map(|_| rng.random_range(0..n)).collect();
        let l2 = if batch % 2 == 0 { 0.0 } else { 1e-3 };
        worst = worst.max(gradient_check(&head, &data, &idx, l2));
    }
    worst
}

/// Three Gaussian clusters in 32 dimensions; the last `dups` rows repeat
/// earlier rows under new ids.
pub fn tsne_clusters(n: usize, dups: usize, seed: u64) -> EmbeddingMatrix {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let dim = 32;
    let mut rows: Vec<Vec<f32>> = (0..n - dups)
        .map(|i| {
            (0..dim)
                .map(|d| {
                    let z: f32 = StandardNormal.sample(&mut rng);
                    let centre = if d == i % 3 { 8.0 } else { 0.0 };
                    centre + z
                })
                .collect()
        })
        .collect();
    for k in 0..dups {
        rows.push(rows[k * 7].clone());
    }
    let ids = (0..n).map(|i| format!("s{i:05}")).collect();
    EmbeddingMatrix::from_rows(ids, rows).unwrap()
}

/// Perplexity calibration, late KL descent, and duplicate coincidence on 500
/// points at default settings.
pub fn check_tsne() -> Check {
    let (n, dups) = (500, 10);
    let x = tsne_clusters(n, dups, 11);
    let r = tsne(&x, &TsneConfig::default()).map_err(|e| e.to_string())?;
    ensure(r.coords.len() == n, || format!("{} coordinates", r.coords.len()))?;
    ensure(r.coords.iter().all(|c| c[0].is_finite() && c[1].is_finite()), || "non-finite coordinate".into())?;
    let worst = r.perplexities.iter().map(|p| (p - 15.0).abs()).fold(0.0, f64::max);
    ensure(worst < 1e-3, || format!("perplexity off by {worst}"))?;

    let tail = &r.kl_history[r.kl_history.len() - 100..];
    for w in tail.windows(2) {
        ensure(w[1] <= w[0] + 1e-12, || format!("KL rose from {} to {}", w[0], w[1]))?;
    }

    let dist = |a: [f64; 2], b: [f64; 2]| ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)).sqrt();
    let mut all = Vec::new();
    for i in 0..n {
        for j in i + 1..n {
            all.push(dist(r.coords[i], r.coords[j]));
        }
    }
    let med = median(all);
    for k in 0..dups {
        let d = dist(r.coords[k * 7], r.coords[n - dups + k]);
        ensure(d <= 1e-3 * med, || format!("duplicate pair {k} at {d}, median {med}"))?;
    }
    Ok(())
}
