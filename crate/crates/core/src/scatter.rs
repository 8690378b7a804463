//! Scatter estimators: spatial-sign covariance (SSCM), multivariate Kendall's
//! tau, and Pearson covariance, plus a Monte-Carlo evaluation of the population
//! SSCM eigenvalues of a Gaussian with a given spectrum.
//!
//! Outer products are accumulated in fixed row blocks (SSCM, Pearson) or
//! fixed pair blocks (Kendall). Block boundaries depend only on `n`, and block
//! sums are added in block order, so results do not depend on thread count.

use std::io::Write;
use std::path::Path;

use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::DataMatrix;
use crate::error::{Error, Result};
use crate::location::CenterEstimate;
use crate::numerics::{gram_accumulate, SymMatrix};
use crate::rng;

const MAX_BLOCKS: usize = 16;
const MIN_ROWS_PER_BLOCK: usize = 512;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScatterKind {
    Sscm,
    KendallTau,
    Pearson,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScatterEstimate {
    pub matrix: SymMatrix,
    pub kind: ScatterKind,
    /// Center used; `None` for Kendall's tau.
    pub center: Option<CenterEstimate>,
}

#[derive(Serialize, Deserialize)]
struct Sidecar {
    kind: ScatterKind,
    dim: usize,
    center: Option<CenterEstimate>,
}

impl ScatterEstimate {
    /// Writes the matrix as headerless CSV and the metadata as a JSON sidecar.
    pub fn write(&self, matrix_csv: impl AsRef<Path>, sidecar_json: impl AsRef<Path>) -> Result<()> {
        let mut f = std::io::BufWriter::new(std::fs::File::create(matrix_csv)?);
        for row in self.matrix.to_rows() {
            let line: Vec<String> = row.iter().map(|x| format!("{x:?}")).collect();
            writeln!(f, "{}", line.join(","))?;
        }
        f.flush()?;
        let side = Sidecar { kind: self.kind, dim: self.matrix.dim(), center: self.center.clone() };
        std::fs::write(sidecar_json, serde_json::to_string_pretty(&side)?)?;
        Ok(())
    }

    pub fn read(matrix_csv: impl AsRef<Path>, sidecar_json: impl AsRef<Path>) -> Result<Self> {
        let side: Sidecar = serde_json::from_str(&std::fs::read_to_string(sidecar_json)?)?;
        let rows = DataMatrix::read_csv_path(matrix_csv, false)?;
        if rows.n() != side.dim || rows.d() != side.dim {
            return Err(Error::invalid(format!(
                "matrix file is {}x{}, sidecar says {}",
                rows.n(),
                rows.d(),
                side.dim
            )));
        }
        let matrix = SymMatrix::from_row_major(side.dim, rows.as_slice().to_vec())?;
        Ok(ScatterEstimate { matrix, kind: side.kind, center: side.center })
    }
}

/// `U(x) = x/‖x‖₂`, with `U(0) = 0`. Writes into `out`.
#[inline]
pub fn spatial_sign_into(x: &[f64], out: &mut [f64]) {
    let n = x.iter().map(|v| v * v).sum::<f64>().sqrt();
    if n > 0.0 {
        out.iter_mut().zip(x).for_each(|(o, v)| *o = v / n);
    } else {
        out.iter_mut().for_each(|o| *o = 0.0);
    }
}

pub fn spatial_sign(x: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; x.len()];
    spatial_sign_into(x, &mut out);
    out
}

fn row_blocks(n: usize) -> Vec<std::ops::Range<usize>> {
    let blocks = (n / MIN_ROWS_PER_BLOCK).clamp(1, MAX_BLOCKS);
    (0..blocks).map(|b| b * n / blocks..(b + 1) * n / blocks).collect()
}

/// Sums `Σ_rows f(row)f(row)ᵀ` over row blocks, in block order.
fn accumulate_rows(
    x: &DataMatrix,
    transform: impl Fn(&[f64], &mut [f64]) + Sync,
) -> Vec<f64> {
    let d = x.d();
    let partials: Vec<Vec<f64>> = row_blocks(x.n())
        .into_par_iter()
        .map(|range| {
            let rows = range.len();
            let mut buf = vec![0.0; rows * d];
            for (i, out) in range.zip(buf.chunks_exact_mut(d)) {
                transform(x.row(i), out);
            }
            let mut acc = vec![0.0; d * d];
            gram_accumulate(&buf, rows, d, &mut acc);
            acc
        })
        .collect();
    sum_in_order(partials, d)
}

fn sum_in_order(partials: Vec<Vec<f64>>, d: usize) -> Vec<f64> {
    let mut total = vec![0.0; d * d];
    for p in partials {
        total.iter_mut().zip(&p).for_each(|(t, v)| *t += v);
    }
    total
}

/// Sample spatial-sign covariance `(1/n) Σᵢ U(xᵢ − μ̂) U(xᵢ − μ̂)ᵀ`.
///
/// Rows equal to the center contribute nothing, so the trace is the fraction
/// of rows that differ from the center.
pub fn sscm(x: &DataMatrix, center: &CenterEstimate) -> Result<ScatterEstimate> {
    let d = x.d();
    if center.dim() != d {
        return Err(Error::invalid(format!("center has dimension {}, data {d}", center.dim())));
    }
    let mu = &center.center;
    let mut acc = accumulate_rows(x, |row, out| {
        out.iter_mut().zip(row).zip(mu).for_each(|((o, r), m)| *o = r - m);
        let n = out.iter().map(|v| v * v).sum::<f64>().sqrt();
        if n > 0.0 {
            out.iter_mut().for_each(|o| *o /= n);
        }
    });
    let scale = 1.0 / x.n() as f64;
    acc.iter_mut().for_each(|v| *v *= scale);
    Ok(ScatterEstimate {
        matrix: SymMatrix::from_raw_parts(d, acc),
        kind: ScatterKind::Sscm,
        center: Some(center.clone()),
    })
}

/// Splits `i ∈ 0..n-1` (pairs `(i, j > i)`) into ranges with roughly equal pair counts.
fn pair_blocks(n: usize) -> Vec<std::ops::Range<usize>> {
    let total = n * (n - 1) / 2;
    let blocks = (total / (MIN_ROWS_PER_BLOCK * 64)).clamp(1, MAX_BLOCKS);
    let mut out = Vec::with_capacity(blocks);
    let mut start = 0;
    let mut seen = 0;
    for b in 1..=blocks {
        let goal = total * b / blocks;
        let mut end = start;
        while end < n - 1 && (seen < goal || b == blocks) {
            seen += n - 1 - end;
            end += 1;
        }
        if end > start {
            out.push(start..end);
        }
        start = end;
    }
    out
}

/// Sample multivariate Kendall's tau: the average of `U(xᵢ − xⱼ) U(xᵢ − xⱼ)ᵀ` over all pairs `i < j`.
pub fn kendall_tau(x: &DataMatrix) -> Result<ScatterEstimate> {
    let n = x.n();
    if n < 2 {
        return Err(Error::invalid("Kendall's tau needs at least two rows"));
    }
    let d = x.d();
    let partials: Vec<Vec<f64>> = pair_blocks(n)
        .into_par_iter()
        .map(|range| {
            let mut acc = vec![0.0; d * d];
            let mut buf = vec![0.0; (n - 1) * d];
            for i in range {
                let xi = x.row(i);
                let rows = n - 1 - i;
                for (j, out) in ((i + 1)..n).zip(buf.chunks_exact_mut(d)) {
                    let xj = x.row(j);
                    out.iter_mut().zip(xi).zip(xj).for_each(|((o, a), b)| *o = a - b);
                    let nrm = out.iter().map(|v| v * v).sum::<f64>().sqrt();
                    if nrm > 0.0 {
                        out.iter_mut().for_each(|o| *o /= nrm);
                    }
                }
                gram_accumulate(&buf[..rows * d], rows, d, &mut acc);
            }
            acc
        })
        .collect();
    let mut acc = sum_in_order(partials, d);
    let pairs = (n * (n - 1) / 2) as f64;
    acc.iter_mut().for_each(|v| *v /= pairs);
    Ok(ScatterEstimate { matrix: SymMatrix::from_raw_parts(d, acc), kind: ScatterKind::KendallTau, center: None })
}

/// Unbiased sample covariance about the column means.
pub fn pearson(x: &DataMatrix) -> Result<ScatterEstimate> {
    let n = x.n();
    if n < 2 {
        return Err(Error::invalid("covariance needs at least two rows"));
    }
    let d = x.d();
    let mean = x.column_means();
    let mut acc = accumulate_rows(x, |row, out| {
        out.iter_mut().zip(row).zip(&mean).for_each(|((o, r), m)| *o = r - m);
    });
    let scale = 1.0 / (n - 1) as f64;
    acc.iter_mut().for_each(|v| *v *= scale);
    Ok(ScatterEstimate {
        matrix: SymMatrix::from_raw_parts(d, acc),
        kind: ScatterKind::Pearson,
        center: Some(crate::location::mean_center(x)),
    })
}

/// Monte-Carlo values of `λ_j(S) = E[λ_j Y_j² / Σ_k λ_k Y_k²]`, `Y ~ N(0, I)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PopulationEigen {
    /// In the order of the input eigenvalues.
    pub values: Vec<f64>,
    pub std_errors: Vec<f64>,
    pub draws: usize,
}

pub const DEFAULT_MC_DRAWS: usize = 1_000_000;

pub fn population_sscm_eigen(sigma_eigenvalues: &[f64], mc_draws: usize, seed: u64) -> Result<PopulationEigen> {
    if sigma_eigenvalues.is_empty() || sigma_eigenvalues.iter().any(|l| !(*l >= 0.0) || !l.is_finite()) {
        return Err(Error::invalid("eigenvalues must be finite and non-negative"));
    }
    if !sigma_eigenvalues.iter().any(|l| *l > 0.0) {
        return Err(Error::invalid("at least one eigenvalue must be positive"));
    }
    if mc_draws < 2 {
        return Err(Error::invalid("need at least two Monte-Carlo draws"));
    }
    let q = sigma_eigenvalues.len();
    // Independent chunks on separate streams; merged in chunk order.
    let chunks = 16.min(mc_draws);
    let parts: Vec<(Vec<f64>, Vec<f64>)> = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let count = (c + 1) * mc_draws / chunks - c * mc_draws / chunks;
            let mut r = rng::stream(seed, c as u64);
            let mut sum = vec![0.0; q];
            let mut sum_sq = vec![0.0; q];
            let mut w = vec![0.0; q];
            for _ in 0..count {
                let mut total = 0.0;
                for (wk, lk) in w.iter_mut().zip(sigma_eigenvalues) {
                    let y: f64 = StandardNormal.sample(&mut r);
                    *wk = lk * y * y;
                    total += *wk;
                }
                for k in 0..q {
                    let share = w[k] / total;
                    sum[k] += share;
                    sum_sq[k] += share * share;
                }
            }
            (sum, sum_sq)
        })
        .collect();
    let mut sum = vec![0.0; q];
    let mut sum_sq = vec![0.0; q];
    for (s, ss) in parts {
        sum.iter_mut().zip(&s).for_each(|(a, b)| *a += b);
        sum_sq.iter_mut().zip(&ss).for_each(|(a, b)| *a += b);
    }
    let m = mc_draws as f64;
    let means: Vec<f64> = sum.iter().map(|s| s / m).collect();
    let total: f64 = means.iter().sum();
    let std_errors = means
        .iter()
        .zip(&sum_sq)
        .map(|(mean, ss)| ((ss / m - mean * mean).max(0.0) * m / (m - 1.0) / m).sqrt())
        .collect();
    Ok(PopulationEigen { values: means.iter().map(|v| v / total).collect(), std_errors, draws: mc_draws })
}
