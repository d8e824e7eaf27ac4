//! Pairwise cosine distances and the Median Cosine Distance (MCD) between
//! or within embedding sets.

use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::cohort::Relation;
use crate::embedding::{distance_from_parts, dot, sq_norm, EmbeddingMatrix};

#[derive(Debug, Error)]
pub enum DistanceError {
    #[error("empty embedding set")]
    Empty,
    #[error("dimension mismatch: {0} vs {1}")]
    DimMismatch(usize, usize),
    #[error("zero-norm row {0:?}")]
    ZeroNorm(String),
    #[error("intra-dataset distance needs at least 2 rows, got {0}")]
    TooFewRows(usize),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DistanceSummary {
    pub train_name: String,
    pub test_name: String,
    pub relation: Relation,
    pub pair_count: usize,
    pub mcd: f64,
}

fn row_sq_norms(m: &EmbeddingMatrix) -> Result<Vec<f64>, DistanceError> {
    m.iter()
        .map(|(id, row)| {
            let n = sq_norm(row);
            if n == 0.0 {
                Err(DistanceError::ZeroNorm(id.to_string()))
            } else {
                Ok(n)
            }
        })
        .collect()
}

fn check(a: &EmbeddingMatrix, b: &EmbeddingMatrix) -> Result<(), DistanceError> {
    if a.is_empty() || b.is_empty() {
        return Err(DistanceError::Empty);
    }
    if a.dim() != b.dim() {
        return Err(DistanceError::DimMismatch(a.dim(), b.dim()));
    }
    Ok(())
}

/// All `|A|·|B|` cross distances, row-major over `A`.
pub fn pairwise_cosine(a: &EmbeddingMatrix, b: &EmbeddingMatrix) -> Result<Vec<f64>, DistanceError> {
    check(a, b)?;
    let (na, nb) = (row_sq_norms(a)?, row_sq_norms(b)?);
    let rows: Vec<Vec<f64>> = (0..a.len())
        .into_par_iter()
        .map(|i| {
            let u = a.row(i);
            (0..b.len())
                .map(|j| distance_from_parts(dot(u, b.row(j)), na[i], nb[j]))
                .collect()
        })
        .collect();
    Ok(rows.concat())
}

/// Distances over unordered distinct pairs `i < j`.
pub fn intra_pairwise_cosine(a: &EmbeddingMatrix) -> Result<Vec<f64>, DistanceError> {
    if a.len() < 2 {
        return Err(DistanceError::TooFewRows(a.len()));
    }
    let na = row_sq_norms(a)?;
    let rows: Vec<Vec<f64>> = (0..a.len())
        .into_par_iter()
        .map(|i| {
            let u = a.row(i);
            (i + 1..a.len())
                .map(|j| distance_from_parts(dot(u, a.row(j)), na[i], na[j]))
                .collect()
        })
        .collect();
    Ok(rows.concat())
}

/// Exact median by selection; an even count averages the two central order
/// statistics. Reorders `values`.
pub fn median_in_place(values: &mut [f64]) -> Option<f64> {
    let n = values.len();
    if n == 0 {
        return None;
    }
    let mid = n / 2;
    let (lower, upper, _) = values.select_nth_unstable_by(mid, f64::total_cmp);
    let upper = *upper;
    if n % 2 == 1 {
        Some(upper)
    } else {
        let below = lower.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        Some((below + upper) / 2.0)
    }
}

/// Median cosine distance between two sets.
pub fn mcd(a: &EmbeddingMatrix, b: &EmbeddingMatrix) -> Result<f64, DistanceError> {
    let mut d = pairwise_cosine(a, b)?;
    Ok(median_in_place(&mut d).expect("non-empty"))
}

/// Median cosine distance within one set, self-pairs excluded.
pub fn intra_mcd(a: &EmbeddingMatrix) -> Result<f64, DistanceError> {
    let mut d = intra_pairwise_cosine(a)?;
    Ok(median_in_place(&mut d).expect("non-empty"))
}

pub fn summarize(
    train_name: &str,
    test_name: &str,
    relation: Relation,
    a: &EmbeddingMatrix,
    b: &EmbeddingMatrix,
) -> Result<DistanceSummary, DistanceError> {
    Ok(DistanceSummary {
        train_name: train_name.to_string(),
        test_name: test_name.to_string(),
        relation,
        pair_count: a.len() * b.len(),
        mcd: mcd(a, b)?,
    })
}

pub fn summarize_intra(name: &str, a: &EmbeddingMatrix) -> Result<DistanceSummary, DistanceError> {
    Ok(DistanceSummary {
        train_name: name.to_string(),
        test_name: name.to_string(),
        relation: Relation::Intra,
        pair_count: a.len() * (a.len().saturating_sub(1)) / 2,
        mcd: intra_mcd(a)?,
    })
}

/// CSV with header `train_name,test_name,relation,pair_count,mcd`, MCD to
/// six decimals.
pub fn write_summaries_csv(mut w: impl Write, rows: &[DistanceSummary]) -> Result<(), DistanceError> {
    writeln!(w, "train_name,test_name,relation,pair_count,mcd")?;
    for r in rows {
        writeln!(
            w,
            "{},{},{},{},{:.6}",
            r.train_name, r.test_name, r.relation, r.pair_count, r.mcd
        )?;
    }
    Ok(())
}
