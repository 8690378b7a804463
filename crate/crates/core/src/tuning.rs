//! Sparsity-level selection by repeated sample splitting.
//!
//! For each split the rows are shuffled and cut in two. A sparse leading
//! eigenvector is fitted on the first part's scatter and scored by its
//! Rayleigh quotient on the second part's scatter. The chosen `k` maximizes
//! the mean score over splits; ties go to the smallest `k`.

use std::io::{Read, Write};

use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::DataMatrix;
use crate::error::{Error, Result};
use crate::location::{spatial_median_or_best, DEFAULT_MAX_ITER, DEFAULT_TOL};
use crate::numerics::{sym_eigen, SymMatrix};
use crate::rng;
use crate::scatter::{kendall_tau, pearson, sscm, ScatterKind};
use crate::sparse_pca::{truncated_power, Init, SparsePCConfig};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TuneConfig {
    pub candidates: Vec<usize>,
    pub splits: usize,
    pub split_fraction: f64,
    pub seed: u64,
}

impl TuneConfig {
    pub fn new(candidates: Vec<usize>, seed: u64) -> Self {
        TuneConfig { candidates, splits: 10, split_fraction: 0.5, seed }
    }

    fn validate(&self, n: usize, d: usize) -> Result<()> {
        if self.candidates.is_empty() {
            return Err(Error::invalid("candidate set is empty"));
        }
        if let Some(k) = self.candidates.iter().find(|&&k| k == 0 || k > d) {
            return Err(Error::invalid(format!("candidate k = {k} outside [1, {d}]")));
        }
        if self.splits == 0 {
            return Err(Error::invalid("need at least one split"));
        }
        if !(self.split_fraction > 0.0 && self.split_fraction < 1.0) {
            return Err(Error::invalid("split fraction must lie in (0, 1)"));
        }
        if n < 4 {
            return Err(Error::invalid("need at least four rows to split"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CandidateScore {
    pub k: usize,
    /// Mean over valid splits; `None` when the candidate was disqualified.
    pub mean_score: Option<f64>,
    pub valid_splits: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitDiagnostics {
    pub split: usize,
    pub fit_rows: usize,
    pub validation_rows: usize,
    /// One entry per candidate (in candidate order); `None` if that fit failed.
    pub scores: Vec<Option<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TuneResult {
    pub chosen_k: usize,
    pub score_table: Vec<CandidateScore>,
    pub splits: Vec<SplitDiagnostics>,
}

impl TuneResult {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    /// `k,mean_score,valid_splits`; disqualified candidates have an empty score.
    pub fn write_score_csv(&self, mut w: impl Write) -> Result<()> {
        writeln!(w, "k,mean_score,valid_splits")?;
        for row in &self.score_table {
            let score = row.mean_score.map(|s| format!("{s:?}")).unwrap_or_default();
            writeln!(w, "{},{},{}", row.k, score, row.valid_splits)?;
        }
        Ok(())
    }
}

/// Reads a table written by [`TuneResult::write_score_csv`].
pub fn read_score_csv(r: impl Read) -> Result<Vec<CandidateScore>> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(r);
    let mut out = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| Error::Parse { line: e.position().map_or(0, |p| p.line()), message: e.to_string() })?;
        let line = rec.position().map_or(0, |p| p.line());
        let bad = |what: &str| Error::Parse { line, message: format!("bad {what}") };
        if rec.len() != 3 {
            return Err(bad("column count"));
        }
        out.push(CandidateScore {
            k: rec[0].parse().map_err(|_| bad("k"))?,
            mean_score: if rec[1].is_empty() { None } else { Some(rec[1].parse().map_err(|_| bad("score"))?) },
            valid_splits: rec[2].parse().map_err(|_| bad("valid_splits"))?,
        });
    }
    Ok(out)
}

fn scatter_of(x: &DataMatrix, kind: ScatterKind) -> Result<SymMatrix> {
    Ok(match kind {
        ScatterKind::Sscm => {
            let center = spatial_median_or_best(x, DEFAULT_TOL, DEFAULT_MAX_ITER)?;
            sscm(x, &center)?.matrix
        }
        ScatterKind::KendallTau => kendall_tau(x)?.matrix,
        ScatterKind::Pearson => pearson(x)?.matrix,
    })
}

/// Selects `k` using spatial-sign covariance on both halves.
pub fn select_k(x: &DataMatrix, cfg: &TuneConfig, template: &SparsePCConfig) -> Result<TuneResult> {
    select_k_with(x, cfg, template, ScatterKind::Sscm)
}

/// Same split criterion with any of the scatter estimators.
pub fn select_k_with(
    x: &DataMatrix,
    cfg: &TuneConfig,
    template: &SparsePCConfig,
    kind: ScatterKind,
) -> Result<TuneResult> {
    let n = x.n();
    cfg.validate(n, x.d())?;
    let fit_rows = ((n as f64 * cfg.split_fraction).round() as usize).clamp(2, n - 2);

    let splits: Vec<SplitDiagnostics> = (0..cfg.splits)
        .into_par_iter()
        .map(|l| {
            let mut order: Vec<usize> = (0..n).collect();
            order.shuffle(&mut rng::stream(rng::substream_seed(cfg.seed, l as u64), 0));
            let (first, second) = order.split_at(fit_rows);
            let scores = split_scores(x, first, second, cfg, template, kind)
                .unwrap_or_else(|_| vec![None; cfg.candidates.len()]);
            SplitDiagnostics { split: l, fit_rows, validation_rows: n - fit_rows, scores }
        })
        .collect();

    let score_table: Vec<CandidateScore> = cfg
        .candidates
        .iter()
        .enumerate()
        .map(|(c, &k)| {
            let valid: Vec<f64> = splits.iter().filter_map(|s| s.scores[c]).collect();
            let invalid = cfg.splits - valid.len();
            let mean_score = if valid.is_empty() || 2 * invalid > cfg.splits {
                None
            } else {
                Some(valid.iter().sum::<f64>() / valid.len() as f64)
            };
            CandidateScore { k, mean_score, valid_splits: valid.len() }
        })
        .collect();

    let chosen_k = score_table
        .iter()
        .filter_map(|row| row.mean_score.map(|s| (s, row.k)))
        .fold(None, |best: Option<(f64, usize)>, (s, k)| match best {
            Some((bs, bk)) if bs > s || (bs == s && bk <= k) => Some((bs, bk)),
            _ => Some((s, k)),
        })
        .map(|(_, k)| k)
        .ok_or_else(|| Error::invalid("every candidate was disqualified by failed fits"))?;

    Ok(TuneResult { chosen_k, score_table, splits })
}

fn split_scores(
    x: &DataMatrix,
    first: &[usize],
    second: &[usize],
    cfg: &TuneConfig,
    template: &SparsePCConfig,
    kind: ScatterKind,
) -> Result<Vec<Option<f64>>> {
    let s1 = scatter_of(&x.select_rows(first)?, kind)?;
    let s2 = scatter_of(&x.select_rows(second)?, kind)?;
    // The eigenvector start does not depend on k; compute it once per split.
    let init = match &template.init {
        Init::LeadingEigenvector => Init::Given(sym_eigen(&s1)?.swap_remove(0).vector),
        other => other.clone(),
    };
    Ok(cfg
        .candidates
        .iter()
        .map(|&k| {
            let pc_cfg = SparsePCConfig { k, init: init.clone(), ..template.clone() };
            truncated_power(&s1, &pc_cfg).ok().map(|r| s2.quad_form(&r.vector))
        })
        .collect())
}
