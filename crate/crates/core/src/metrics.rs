//! Evaluation quantities: eigenvector and subspace distances, restricted
//! spectral norm, effective rank, hat-matrix leverage; plus the long-format
//! metric record used by experiment reports.

use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::{dot, norm2, spectral_norm, SymMatrix};
use crate::sparse_pca::combinatoric_sparse_pc;

const UNIT_TOL: f64 = 1e-8;

/// `√(1 − (v₁ᵀv₂)²)` for unit vectors.
pub fn sin_angle(v1: &[f64], v2: &[f64]) -> Result<f64> {
    if v1.len() != v2.len() {
        return Err(Error::invalid("vectors have different lengths"));
    }
    for v in [v1, v2] {
        if (norm2(v) - 1.0).abs() > UNIT_TOL {
            return Err(Error::invalid(format!("vector norm {} is not 1", norm2(v))));
        }
    }
    let c = dot(v1, v2).clamp(-1.0, 1.0);
    Ok((1.0 - c * c).max(0.0).sqrt())
}

fn check_orthonormal(basis: &[Vec<f64>]) -> Result<()> {
    for (i, a) in basis.iter().enumerate() {
        for (j, b) in basis.iter().enumerate().skip(i) {
            let expect = if i == j { 1.0 } else { 0.0 };
            if (dot(a, b) - expect).abs() > UNIT_TOL {
                return Err(Error::invalid(format!(
                    "basis is not orthonormal (columns {i}, {j}); rank-deficient or unnormalized"
                )));
            }
        }
    }
    Ok(())
}

/// `‖U₁U₁ᵀ − U₂U₂ᵀ‖_F` for bases given as lists of `m` orthonormal columns.
pub fn subspace_distance(u1: &[Vec<f64>], u2: &[Vec<f64>]) -> Result<f64> {
    if u1.is_empty() || u1.len() != u2.len() {
        return Err(Error::invalid("bases must have the same positive number of columns"));
    }
    let d = u1[0].len();
    if u1.iter().chain(u2).any(|c| c.len() != d) {
        return Err(Error::invalid("basis columns have inconsistent lengths"));
    }
    check_orthonormal(u1)?;
    check_orthonormal(u2)?;
    // ‖P₁ − P₂‖²_F = 2m − 2‖U₁ᵀU₂‖²_F.
    let m = u1.len() as f64;
    let cross: f64 = u1.iter().flat_map(|a| u2.iter().map(move |b| dot(a, b).powi(2))).sum();
    Ok((2.0 * m - 2.0 * cross).max(0.0).sqrt())
}

/// `sup { |vᵀMv| : ‖v‖₂ = 1, ‖v‖₀ ≤ s }`, by exact enumeration (small `d` only).
pub fn restricted_spectral_norm(m: &SymMatrix, s: usize) -> Result<f64> {
    Ok(combinatoric_sparse_pc(m, s)?.rayleigh.abs())
}

/// `tr(S) / ‖S‖₂`.
pub fn effective_rank(s: &SymMatrix) -> Result<f64> {
    let norm = spectral_norm(s)?;
    if norm == 0.0 {
        return Err(Error::invalid("effective rank of the zero matrix is undefined"));
    }
    Ok(s.trace() / norm)
}

/// Hat-matrix diagonals of the regression of `pc1_scores` on `pc2_scores` with intercept:
/// `hᵢ = 1/n + (xᵢ − x̄)² / Σⱼ(xⱼ − x̄)²` with `x = pc2_scores`.
pub fn leverage_influence(pc1_scores: &[f64], pc2_scores: &[f64]) -> Result<Vec<f64>> {
    let n = pc2_scores.len();
    if pc1_scores.len() != n {
        return Err(Error::invalid("score vectors have different lengths"));
    }
    if n < 2 {
        return Err(Error::invalid("leverage needs at least two observations"));
    }
    let mean = pc2_scores.iter().sum::<f64>() / n as f64;
    let sxx: f64 = pc2_scores.iter().map(|x| (x - mean).powi(2)).sum();
    if !(sxx > 0.0) {
        return Err(Error::invalid("regressor scores are constant"));
    }
    Ok(pc2_scores.iter().map(|x| 1.0 / n as f64 + (x - mean).powi(2) / sxx).collect())
}

/// Indices with leverage strictly above `threshold`.
pub fn flag_leverage(h: &[f64], threshold: f64) -> Vec<usize> {
    (0..h.len()).filter(|&i| h[i] > threshold).collect()
}

/// Context tags of a metric; unset tags serialize as empty CSV cells.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct MetricTags {
    pub n: Option<usize>,
    pub d: Option<usize>,
    pub s: Option<usize>,
    pub k: Option<usize>,
    pub method: Option<String>,
    pub distribution: Option<String>,
    pub replication: Option<usize>,
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricRecord {
    pub name: String,
    pub value: f64,
    pub tags: MetricTags,
}

pub const METRIC_CSV_HEADER: &str = "name,value,n,d,s,k,method,distribution,replication,seed";

impl MetricRecord {
    pub fn new(name: impl Into<String>, value: f64, tags: MetricTags) -> Result<Self> {
        if !value.is_finite() {
            return Err(Error::invalid("metric value must be finite"));
        }
        Ok(MetricRecord { name: name.into(), value, tags })
    }

    fn csv_line(&self) -> String {
        fn opt<T: ToString>(x: &Option<T>) -> String {
            x.as_ref().map(ToString::to_string).unwrap_or_default()
        }
        let t = &self.tags;
        format!(
            "{},{:?},{},{},{},{},{},{},{},{}",
            self.name,
            self.value,
            opt(&t.n),
            opt(&t.d),
            opt(&t.s),
            opt(&t.k),
            opt(&t.method),
            opt(&t.distribution),
            opt(&t.replication),
            opt(&t.seed)
        )
    }
}

/// Writes the header (if `header`) followed by one line per record.
pub fn write_metric_csv(mut w: impl Write, records: &[MetricRecord], header: bool) -> Result<()> {
    if header {
        writeln!(w, "{METRIC_CSV_HEADER}")?;
    }
    for r in records {
        writeln!(w, "{}", r.csv_line())?;
    }
    Ok(())
}

pub fn read_metric_csv(r: impl Read) -> Result<Vec<MetricRecord>> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(r);
    let mut out = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| Error::Parse {
            line: e.position().map_or(0, |p| p.line()),
            message: e.to_string(),
        })?;
        let line = rec.position().map_or(0, |p| p.line());
        let bad = |what: &str| Error::Parse { line, message: format!("bad {what}") };
        if rec.len() != 10 {
            return Err(bad("column count"));
        }
        fn parse_opt<T: std::str::FromStr>(s: &str) -> std::result::Result<Option<T>, ()> {
            if s.is_empty() {
                Ok(None)
            } else {
                s.parse().map(Some).map_err(|_| ())
            }
        }
        let text = |s: &str| if s.is_empty() { None } else { Some(s.to_string()) };
        out.push(MetricRecord {
            name: rec[0].to_string(),
            value: rec[1].parse().map_err(|_| bad("value"))?,
            tags: MetricTags {
                n: parse_opt(&rec[2]).map_err(|_| bad("n"))?,
                d: parse_opt(&rec[3]).map_err(|_| bad("d"))?,
                s: parse_opt(&rec[4]).map_err(|_| bad("s"))?,
                k: parse_opt(&rec[5]).map_err(|_| bad("k"))?,
                method: text(&rec[6]),
                distribution: text(&rec[7]),
                replication: parse_opt(&rec[8]).map_err(|_| bad("replication"))?,
                seed: parse_opt(&rec[9]).map_err(|_| bad("seed"))?,
            },
        });
    }
    Ok(out)
}
