//! Fitting the estimators on observed data read from CSV.

use std::path::Path;

use serde::{Deserialize, Serialize};
use sspca::metrics::{flag_leverage, leverage_influence, MetricRecord, MetricTags};
use sspca::numerics::dot;
use sspca::sparse_pca::SparsePCResult;
use sspca::tuning::TuneResult;
use sspca::{CenterEstimate, DataMatrix, Error, Result};

use crate::pipeline::{center_for, scatter_for, top_components, tune_k};
use crate::spec::{CenterMode, ExperimentSpec, FantopeSpec, KChoice, KRule, Method, PowerSpec, TuningSpec};

#[derive(Debug, Clone, PartialEq)]
pub struct FitOptions {
    pub method: Method,
    /// A fixed sparsity level or [`KChoice::TUNED`]; every component uses the same `k`.
    pub k: KChoice,
    pub components: usize,
    pub leverage_threshold: f64,
    pub center: CenterMode,
    pub standardize: bool,
    pub tuning: TuningSpec,
    pub fantope: FantopeSpec,
    pub power: PowerSpec,
    pub seed: u64,
}

impl FitOptions {
    pub fn new(method: Method, k: KChoice) -> Self {
        FitOptions {
            method,
            k,
            components: 2,
            leverage_threshold: 0.05,
            center: CenterMode::Auto,
            standardize: false,
            tuning: TuningSpec::default(),
            fantope: FantopeSpec::default(),
            power: PowerSpec::default(),
            seed: 0,
        }
    }

    pub fn from_spec(spec: &ExperimentSpec, method: Method) -> Self {
        FitOptions {
            method,
            k: spec.grid.k.first().copied().unwrap_or(KChoice::TUNED),
            components: spec.fit.components,
            leverage_threshold: spec.fit.leverage_threshold,
            center: spec.fit.center,
            standardize: spec.input.as_ref().is_some_and(|i| i.standardize),
            tuning: spec.tuning.clone(),
            fantope: spec.fantope.clone(),
            power: spec.power.clone(),
            seed: spec.base_seed,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LeverageReport {
    pub threshold: f64,
    /// Hat-matrix diagonals of the PC1-on-PC2 score regression.
    pub values: Vec<f64>,
    pub flagged: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitReport {
    pub method: Method,
    pub n: usize,
    pub d: usize,
    pub standardized: bool,
    /// Center of the scatter; for ECA, the center used for scores only.
    pub center: CenterEstimate,
    pub k: usize,
    pub tune: Option<TuneResult>,
    pub components: Vec<SparsePCResult>,
    pub leverage: Option<LeverageReport>,
    /// Why leverage could not be computed, when it is absent with two or more components.
    pub leverage_error: Option<String>,
}

impl FitReport {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    /// Per-component Rayleigh values and support sizes, plus the flagged-row count.
    pub fn records(&self) -> Result<Vec<MetricRecord>> {
        let tags = MetricTags {
            n: Some(self.n),
            d: Some(self.d),
            k: Some(self.k),
            method: Some(self.method.label().to_string()),
            ..MetricTags::default()
        };
        let mut out = Vec::new();
        for (j, c) in self.components.iter().enumerate() {
            out.push(MetricRecord::new(format!("rayleigh_pc{}", j + 1), c.rayleigh, tags.clone())?);
            out.push(MetricRecord::new(format!("support_size_pc{}", j + 1), c.support.len() as f64, tags.clone())?);
        }
        if let Some(l) = &self.leverage {
            out.push(MetricRecord::new("leverage_flagged", l.flagged.len() as f64, tags)?);
        }
        Ok(out)
    }
}

pub fn fit_data(x: &DataMatrix, opts: &FitOptions) -> Result<FitReport> {
    let d = x.d();
    if opts.components == 0 || opts.components > d {
        return Err(Error::InvalidSpec(format!("components = {} outside [1, {d}]", opts.components)));
    }
    let standardized;
    let x = if opts.standardize {
        standardized = x.standardized_columns();
        &standardized
    } else {
        x
    };
    let (k, tune) = match opts.k {
        KChoice::Fixed(k) if k >= 1 && k <= d => (k, None),
        KChoice::Fixed(k) => return Err(Error::InvalidSpec(format!("k = {k} outside [1, {d}]"))),
        KChoice::Rule(KRule::Tuned) => {
            let t = tune_k(x, opts.method, &opts.tuning, &opts.power, opts.seed)?;
            (t.chosen_k, Some(t))
        }
        KChoice::Rule(KRule::Oracle) => return Err(Error::InvalidSpec("k = oracle needs a simulated truth".into())),
    };
    let scatter = scatter_for(x, opts.method, opts.center)?;
    let center = match &scatter.center {
        Some(c) => c.clone(),
        None => center_for(x, opts.method, opts.center)?,
    };
    let ks = vec![k; opts.components];
    let components = top_components(opts.method, &scatter.matrix, x.n(), &ks, &opts.power, &opts.fantope)?;

    let (mut leverage, mut leverage_error) = (None, None);
    if components.len() >= 2 {
        let scores = |v: &[f64]| -> Vec<f64> {
            x.rows()
                .map(|r| dot(&r.iter().zip(&center.center).map(|(a, b)| a - b).collect::<Vec<_>>(), v))
                .collect()
        };
        match leverage_influence(&scores(&components[0].vector), &scores(&components[1].vector)) {
            Ok(values) => {
                let flagged = flag_leverage(&values, opts.leverage_threshold);
                leverage = Some(LeverageReport { threshold: opts.leverage_threshold, values, flagged });
            }
            Err(e) => leverage_error = Some(e.to_string()),
        }
    }
    Ok(FitReport {
        method: opts.method,
        n: x.n(),
        d,
        standardized: opts.standardize,
        center,
        k,
        tune,
        components,
        leverage,
        leverage_error,
    })
}

pub fn fit_csv(path: impl AsRef<Path>, header: bool, opts: &FitOptions) -> Result<FitReport> {
    fit_data(&DataMatrix::read_csv_path(path, header)?, opts)
}
