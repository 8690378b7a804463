//! Method pipelines: scatter estimate, starting vector, truncated power.

use sspca::fantope::{fantope_solve, threshold_leading, FantopeConfig};
use sspca::location::{mean_center, spatial_median_or_best, DEFAULT_MAX_ITER, DEFAULT_TOL};
use sspca::scatter::{kendall_tau, pearson, sscm, ScatterEstimate, ScatterKind};
use sspca::sparse_pca::{top_m_sparse_pcs, truncated_power, Init, SparsePCConfig, SparsePCResult};
use sspca::tuning::{select_k_with, TuneConfig, TuneResult};
use sspca::{CenterEstimate, DataMatrix, Error, LastIterate, Result, SymMatrix};

use crate::spec::{CenterMode, FantopeSpec, Method, PowerSpec, TuningSpec};

/// Center used by a method for its scatter (and for component scores).
pub fn center_for(x: &DataMatrix, method: Method, mode: CenterMode) -> Result<CenterEstimate> {
    match (mode, method) {
        (CenterMode::Mean, _) | (CenterMode::Auto, Method::Tp) => Ok(mean_center(x)),
        _ => spatial_median_or_best(x, DEFAULT_TOL, DEFAULT_MAX_ITER),
    }
}

pub fn scatter_for(x: &DataMatrix, method: Method, mode: CenterMode) -> Result<ScatterEstimate> {
    match method.scatter_kind() {
        ScatterKind::Pearson => pearson(x),
        ScatterKind::KendallTau => kendall_tau(x),
        ScatterKind::Sscm => sscm(x, &center_for(x, method, mode)?),
    }
}

/// Computes each distinct scatter once and hands it to every method that uses it.
pub struct ScatterCache<'a> {
    x: &'a DataMatrix,
    mode: CenterMode,
    entries: Vec<(ScatterKind, ScatterEstimate)>,
}

impl<'a> ScatterCache<'a> {
    pub fn new(x: &'a DataMatrix, mode: CenterMode) -> Self {
        ScatterCache { x, mode, entries: Vec::new() }
    }

    pub fn get(&mut self, method: Method) -> Result<&ScatterEstimate> {
        let kind = method.scatter_kind();
        if let Some(i) = self.entries.iter().position(|(k, _)| *k == kind) {
            return Ok(&self.entries[i].1);
        }
        let est = scatter_for(self.x, method, self.mode)?;
        self.entries.push((kind, est));
        Ok(&self.entries.last().expect("just pushed").1)
    }
}

/// Fantope start for SSPCA_FP. A solver that runs out of iterations still
/// yields a feasible point, which is used; an empty thresholded support falls
/// back to the leading eigenvector.
pub fn fantope_init(s: &SymMatrix, n: usize, k: usize, f: &FantopeSpec) -> Result<Init> {
    let mut cfg = FantopeConfig::heuristic(s, n, k, f.phi_const)?;
    cfg.lambda = f.lambda.unwrap_or(f.lambda_const * cfg.lambda);
    if let Some(phi) = f.phi {
        cfg.phi = phi;
    }
    cfg.admm_rho = f.rho;
    cfg.tol = f.tol;
    cfg.max_iter = f.max_iter;
    let y = match fantope_solve(s, &cfg) {
        Ok(sol) => sol.y,
        Err(Error::NotConverged { last, .. }) => match *last {
            LastIterate::Fantope(sol) => sol.y,
            _ => unreachable!("Fantope solver reports a Fantope iterate"),
        },
        Err(e) => return Err(e),
    };
    match threshold_leading(&y, cfg.phi) {
        Ok(v) => Ok(Init::Given(v)),
        Err(Error::EmptySupport { .. }) => Ok(Init::LeadingEigenvector),
        Err(e) => Err(e),
    }
}

pub fn pc_config(method: Method, s: &SymMatrix, n: usize, k: usize, power: &PowerSpec, fantope: &FantopeSpec) -> Result<SparsePCConfig> {
    let init = match method {
        Method::SspcaFp => fantope_init(s, n, k, fantope)?,
        _ => Init::LeadingEigenvector,
    };
    Ok(SparsePCConfig { k, eps: power.eps, max_iter: power.max_iter, init })
}

pub fn leading_component(
    method: Method,
    s: &SymMatrix,
    n: usize,
    k: usize,
    power: &PowerSpec,
    fantope: &FantopeSpec,
) -> Result<SparsePCResult> {
    truncated_power(s, &pc_config(method, s, n, k, power, fantope)?)
}

/// Sequential deflation; the Fantope start (if any) is used for the first component only.
pub fn top_components(
    method: Method,
    s: &SymMatrix,
    n: usize,
    ks: &[usize],
    power: &PowerSpec,
    fantope: &FantopeSpec,
) -> Result<Vec<SparsePCResult>> {
    let mut configs: Vec<SparsePCConfig> = ks
        .iter()
        .map(|&k| SparsePCConfig { k, eps: power.eps, max_iter: power.max_iter, init: Init::LeadingEigenvector })
        .collect();
    if let Some(first) = configs.first_mut() {
        *first = pc_config(method, s, n, first.k, power, fantope)?;
    }
    Ok(top_m_sparse_pcs(s, &configs)?.components)
}

/// Split-sample choice of `k` using the method's own scatter estimator.
/// Candidates above `d` are dropped.
pub fn tune_k(x: &DataMatrix, method: Method, tuning: &TuningSpec, power: &PowerSpec, seed: u64) -> Result<TuneResult> {
    let candidates: Vec<usize> = tuning.candidates.iter().copied().filter(|&k| k <= x.d()).collect();
    if candidates.is_empty() {
        return Err(Error::InvalidSpec(format!("no tuning candidate is ≤ d = {}", x.d())));
    }
    let cfg = TuneConfig { candidates, splits: tuning.splits, split_fraction: tuning.split_fraction, seed };
    let template = SparsePCConfig::new(1).with_eps(power.eps).with_max_iter(power.max_iter);
    select_k_with(x, &cfg, &template, method.scatter_kind())
}
