//! Replicated simulation runs and the experiment report.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sspca::metrics::{sin_angle, subspace_distance, write_metric_csv, MetricRecord, MetricTags};
use sspca::numerics::{dot, norm2};
use sspca::rng::substream_seed;
use sspca::sampler::{sample, EllipticalModel, SpikedCovarianceSpec};
use sspca::{DataMatrix, Error, Result};

use crate::bench::{bench_runtime, write_bench_csv, BenchRow};
use crate::fit::{fit_data, FitOptions, FitReport};
use crate::pipeline::{leading_component, top_components, tune_k, ScatterCache};
use crate::spec::{Cell, ExperimentSpec, KChoice, KRule, Method, Scenario};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellFailure {
    pub cell: usize,
    pub method: Option<Method>,
    pub replication: usize,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellTiming {
    pub cell: usize,
    pub n: usize,
    pub d: usize,
    pub s: usize,
    pub k: KChoice,
    pub seconds: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub cell: usize,
    pub n: usize,
    pub d: usize,
    pub s: usize,
    pub k: KChoice,
    pub method: Method,
    pub metric: String,
    pub count: usize,
    pub mean: f64,
    pub std_dev: f64,
    pub std_error: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HistogramRow {
    pub cell: usize,
    pub method: Method,
    pub k: usize,
    pub count: usize,
}

/// Everything produced by one experiment. Wall-clock data lives only in
/// `timings` and `bench`, which are written to their own files so the record
/// CSV and the JSON summary are reproducible byte for byte.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentReport {
    pub version: String,
    pub spec: ExperimentSpec,
    pub records: Vec<MetricRecord>,
    pub summary: Vec<SummaryRow>,
    pub histogram: Vec<HistogramRow>,
    pub failures: Vec<CellFailure>,
    pub timings: Vec<CellTiming>,
    pub bench: Vec<BenchRow>,
    pub fits: Vec<FitReport>,
}

#[derive(Serialize)]
struct SummaryJson<'a> {
    version: &'a str,
    spec: &'a ExperimentSpec,
    summary: &'a [SummaryRow],
    #[serde(skip_serializing_if = "<[_]>::is_empty")]
    histogram: &'a [HistogramRow],
    failures: &'a [CellFailure],
    #[serde(skip_serializing_if = "<[_]>::is_empty")]
    fits: &'a [FitReport],
}

#[derive(Debug, Clone, PartialEq)]
pub struct WrittenFiles {
    pub records: PathBuf,
    pub summary: PathBuf,
    pub timings: PathBuf,
}

impl ExperimentReport {
    fn new(spec: &ExperimentSpec) -> Self {
        ExperimentReport {
            version: VERSION.to_string(),
            spec: spec.clone(),
            records: Vec::new(),
            summary: Vec::new(),
            histogram: Vec::new(),
            failures: Vec::new(),
            timings: Vec::new(),
            bench: Vec::new(),
            fits: Vec::new(),
        }
    }

    pub fn summary_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(&SummaryJson {
            version: &self.version,
            spec: &self.spec,
            summary: &self.summary,
            histogram: &self.histogram,
            failures: &self.failures,
            fits: &self.fits,
        })?)
    }

    pub fn write_records_csv(&self, w: impl Write) -> Result<()> {
        write_metric_csv(w, &self.records, true)
    }

    /// `cell,n,d,s,k,seconds` for simulation cells, or the bench table for runtime benches.
    pub fn write_timings_csv(&self, mut w: impl Write) -> Result<()> {
        if self.spec.scenario == Scenario::RuntimeBench {
            return write_bench_csv(w, &self.bench);
        }
        writeln!(w, "cell,n,d,s,k,seconds")?;
        for t in &self.timings {
            writeln!(w, "{},{},{},{},{},{:?}", t.cell, t.n, t.d, t.s, t.k, t.seconds)?;
        }
        Ok(())
    }

    /// Writes `<prefix>_records.csv`, `<prefix>_summary.json` and `<prefix>_timings.csv` into `dir`.
    pub fn write_to(&self, dir: impl AsRef<Path>) -> Result<WrittenFiles> {
        let dir = dir.as_ref();
        std::fs::create_dir_all(dir)?;
        let prefix = self.spec.prefix();
        let files = WrittenFiles {
            records: dir.join(format!("{prefix}_records.csv")),
            summary: dir.join(format!("{prefix}_summary.json")),
            timings: dir.join(format!("{prefix}_timings.csv")),
        };
        let mut f = std::io::BufWriter::new(std::fs::File::create(&files.records)?);
        self.write_records_csv(&mut f)?;
        f.flush()?;
        std::fs::write(&files.summary, self.summary_json()? + "\n")?;
        let mut f = std::io::BufWriter::new(std::fs::File::create(&files.timings)?);
        self.write_timings_csv(&mut f)?;
        f.flush()?;
        Ok(files)
    }

    /// Mean of `metric` for `method` in cell `cell`, if any records exist.
    pub fn mean(&self, cell: usize, method: Method, metric: &str) -> Option<f64> {
        self.summary
            .iter()
            .find(|r| r.cell == cell && r.method == method && r.metric == metric)
            .map(|r| r.mean)
    }
}

/// Reads the per-cell timings written by [`ExperimentReport::write_timings_csv`] for simulations.
pub fn read_timings_csv(r: impl std::io::Read) -> Result<Vec<CellTiming>> {
    let mut rdr = csv::ReaderBuilder::new().from_reader(r);
    let mut out = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| Error::Parse { line: e.position().map_or(0, |p| p.line()), message: e.to_string() })?;
        let line = rec.position().map_or(0, |p| p.line());
        let bad = |what: &str| Error::Parse { line, message: format!("bad {what}") };
        if rec.len() != 6 {
            return Err(bad("column count"));
        }
        out.push(CellTiming {
            cell: rec[0].parse().map_err(|_| bad("cell"))?,
            n: rec[1].parse().map_err(|_| bad("n"))?,
            d: rec[2].parse().map_err(|_| bad("d"))?,
            s: rec[3].parse().map_err(|_| bad("s"))?,
            k: rec[4].parse().map_err(|_| bad("k"))?,
            seconds: rec[5].parse().map_err(|_| bad("seconds"))?,
        });
    }
    Ok(out)
}

pub fn run_experiment(spec: &ExperimentSpec) -> Result<ExperimentReport> {
    spec.validate()?;
    let mut report = ExperimentReport::new(spec);
    match spec.scenario {
        Scenario::LeadingEigvec | Scenario::TopM | Scenario::TuneHistogram => simulate(spec, &mut report)?,
        Scenario::RuntimeBench => {
            report.bench = bench_runtime(&spec.grid.n, spec.grid.d[0], &spec.methods, spec.bench_runs, spec.base_seed)?;
            for row in &report.bench {
                let tags = MetricTags {
                    n: Some(row.n),
                    d: Some(row.d),
                    method: Some(row.method.label().to_string()),
                    seed: Some(spec.base_seed),
                    ..MetricTags::default()
                };
                report.records.push(MetricRecord::new("median_seconds", row.median_seconds, tags)?);
            }
        }
        Scenario::FitCsv => {
            let input = spec.input.as_ref().expect("validated");
            let x = DataMatrix::read_csv_path(&input.path, input.header)?;
            for &method in &spec.methods {
                let opts = FitOptions::from_spec(spec, method);
                let fit = fit_data(&x, &opts)?;
                report.records.extend(fit.records()?);
                report.fits.push(fit);
            }
        }
    }
    Ok(report)
}

struct RepOutcome {
    records: Vec<MetricRecord>,
    failures: Vec<CellFailure>,
}

fn simulate(spec: &ExperimentSpec, report: &mut ExperimentReport) -> Result<()> {
    for (ci, cell) in spec.grid.cells().into_iter().enumerate() {
        let started = Instant::now();
        let model_spec = spec.model.spiked_spec(cell.d, cell.s)?;
        let cell_seed = substream_seed(spec.base_seed, ci as u64);
        let outcomes: Vec<RepOutcome> = (0..spec.replications)
            .into_par_iter()
            .map(|r| run_replication(spec, ci, &cell, &model_spec, r, substream_seed(cell_seed, r as u64)))
            .collect();
        let mut records = Vec::new();
        for o in outcomes {
            records.extend(o.records);
            report.failures.extend(o.failures);
        }
        summarize_cell(spec, ci, &cell, &records, report);
        report.records.extend(records);
        report.timings.push(CellTiming {
            cell: ci,
            n: cell.n,
            d: cell.d,
            s: cell.s,
            k: cell.k,
            seconds: started.elapsed().as_secs_f64(),
        });
    }
    Ok(())
}

fn run_replication(
    spec: &ExperimentSpec,
    ci: usize,
    cell: &Cell,
    model_spec: &SpikedCovarianceSpec,
    r: usize,
    seed: u64,
) -> RepOutcome {
    let mut out = RepOutcome { records: Vec::new(), failures: Vec::new() };
    let fail = |method: Option<Method>, e: &Error| CellFailure { cell: ci, method, replication: r, message: e.to_string() };
    let model = EllipticalModel::spiked(model_spec.clone(), spec.model.family, seed);
    let x = match sample(&model, cell.n) {
        Ok(x) => x,
        Err(e) => {
            out.failures.push(fail(None, &e));
            return out;
        }
    };
    let mut cache = ScatterCache::new(&x, spec.fit.center);
    for &method in &spec.methods {
        let tags = MetricTags {
            n: Some(cell.n),
            d: Some(cell.d),
            s: Some(cell.s),
            k: None,
            method: Some(method.label().to_string()),
            distribution: Some(spec.model.family.label()),
            replication: Some(r),
            seed: Some(seed),
        };
        match method_records(spec, cell, model_spec, &x, &mut cache, method, seed, tags) {
            Ok(records) => out.records.extend(records),
            Err(e) => out.failures.push(fail(Some(method), &e)),
        }
    }
    out
}

#[allow(clippy::too_many_arguments)]
fn method_records(
    spec: &ExperimentSpec,
    cell: &Cell,
    model_spec: &SpikedCovarianceSpec,
    x: &DataMatrix,
    cache: &mut ScatterCache,
    method: Method,
    seed: u64,
    mut tags: MetricTags,
) -> Result<Vec<MetricRecord>> {
    let mut records = Vec::new();
    let cards = spec.model.cardinalities(cell.s);
    if spec.scenario == Scenario::TopM {
        let m = cards.len();
        let ks: Vec<usize> = match cell.k {
            KChoice::Fixed(k) => vec![k; m],
            _ => cards.clone(),
        };
        let s = &cache.get(method)?.matrix;
        let comps = top_components(method, s, cell.n, &ks, &spec.power, &spec.fantope)?;
        tags.k = Some(ks[0]);
        let mut total = 0.0;
        for (j, c) in comps.iter().enumerate() {
            let v = sin_angle(&c.vector, &model_spec.eigenvector(j))?;
            total += v;
            records.push(MetricRecord::new(format!("sin_angle_pc{}", j + 1), v, tags.clone())?);
        }
        records.push(MetricRecord::new("mean_sin_angle", total / m as f64, tags.clone())?);
        let truth: Vec<Vec<f64>> = (0..m).map(|j| model_spec.eigenvector(j)).collect();
        let estimate = orthonormalize(comps.iter().map(|c| c.vector.clone()).collect());
        if estimate.len() == m {
            records.push(MetricRecord::new("subspace_distance", subspace_distance(&estimate, &truth)?, tags)?);
        }
        return Ok(records);
    }

    let k = match cell.k {
        KChoice::Fixed(k) => k,
        KChoice::Rule(KRule::Oracle) => cards[0],
        KChoice::Rule(KRule::Tuned) => {
            let tuned = tune_k(x, method, &spec.tuning, &spec.power, substream_seed(seed, 1))?;
            tuned.chosen_k
        }
    };
    tags.k = Some(k);
    let s = &cache.get(method)?.matrix;
    let pc = leading_component(method, s, cell.n, k, &spec.power, &spec.fantope)?;
    records.push(MetricRecord::new("sin_angle", sin_angle(&pc.vector, &model_spec.eigenvector(0))?, tags.clone())?);
    if cell.k == KChoice::TUNED {
        records.push(MetricRecord::new("chosen_k", k as f64, tags)?);
    }
    Ok(records)
}

/// Gram–Schmidt; drops vectors that are (numerically) dependent on earlier ones.
fn orthonormalize(vectors: Vec<Vec<f64>>) -> Vec<Vec<f64>> {
    let mut basis: Vec<Vec<f64>> = Vec::new();
    for mut v in vectors {
        for _ in 0..2 {
            for b in &basis {
                let c = dot(&v, b);
                v.iter_mut().zip(b).for_each(|(a, bb)| *a -= c * bb);
            }
        }
        let n = norm2(&v);
        if n > 1e-8 {
            basis.push(v.into_iter().map(|x| x / n).collect());
        }
    }
    basis
}

fn summarize_cell(spec: &ExperimentSpec, ci: usize, cell: &Cell, records: &[MetricRecord], report: &mut ExperimentReport) {
    for &method in &spec.methods {
        // Metrics in first-seen order.
        let mut groups: Vec<(&str, Vec<f64>)> = Vec::new();
        for rec in records.iter().filter(|r| r.tags.method.as_deref() == Some(method.label())) {
            match groups.iter_mut().find(|(name, _)| *name == rec.name) {
                Some((_, values)) => values.push(rec.value),
                None => groups.push((&rec.name, vec![rec.value])),
            }
        }
        for (metric, values) in groups {
            let count = values.len();
            let mean = values.iter().sum::<f64>() / count as f64;
            let std_dev = if count > 1 {
                (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (count - 1) as f64).sqrt()
            } else {
                0.0
            };
            if metric == "chosen_k" {
                let mut counts: BTreeMap<usize, usize> = BTreeMap::new();
                for v in &values {
                    *counts.entry(*v as usize).or_default() += 1;
                }
                report.histogram.extend(counts.into_iter().map(|(k, count)| HistogramRow { cell: ci, method, k, count }));
            }
            report.summary.push(SummaryRow {
                cell: ci,
                n: cell.n,
                d: cell.d,
                s: cell.s,
                k: cell.k,
                method,
                metric: metric.to_string(),
                count,
                mean,
                std_dev,
                std_error: std_dev / (count as f64).sqrt(),
            });
        }
    }
}
