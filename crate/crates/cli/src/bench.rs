//! Wall-clock timing of the scatter step of each method.
//!
//! Only the estimator itself is timed (SSCM including its spatial median,
//! Kendall's tau, Pearson); the `O(d³)` eigen and truncated-power work is the
//! same for every `n` and would only blur the dependence on sample size.

use std::hint::black_box;
use std::io::{Read, Write};
use std::time::Instant;

use serde::{Deserialize, Serialize};
use sspca::rng::substream_seed;
use sspca::sampler::{sample, EllipticalModel, Family, SpikedCovarianceSpec};
use sspca::{Error, Result};

use crate::pipeline::scatter_for;
use crate::spec::{CenterMode, Method};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchRow {
    pub method: Method,
    pub n: usize,
    pub d: usize,
    pub runs: usize,
    pub median_seconds: f64,
    pub min_seconds: f64,
}

pub const BENCH_CSV_HEADER: &str = "method,n,d,runs,median_seconds,min_seconds";

/// Median of `runs` timings per `(method, n)`, on spherical Gaussian data.
pub fn bench_runtime(n_grid: &[usize], d: usize, methods: &[Method], runs: usize, seed: u64) -> Result<Vec<BenchRow>> {
    if runs == 0 || d == 0 {
        return Err(Error::InvalidSpec("bench needs d ≥ 1 and at least one run".into()));
    }
    let spec = SpikedCovarianceSpec::new(d, &[], 1.0)?;
    let mut rows = Vec::new();
    for (i, &n) in n_grid.iter().enumerate() {
        if n < 2 {
            return Err(Error::InvalidSpec("bench needs n ≥ 2".into()));
        }
        let x = sample(&EllipticalModel::spiked(spec.clone(), Family::Gaussian, substream_seed(seed, i as u64)), n)?;
        for &method in methods {
            let mut times = Vec::with_capacity(runs);
            for _ in 0..runs {
                let start = Instant::now();
                black_box(scatter_for(black_box(&x), method, CenterMode::Auto)?);
                times.push(start.elapsed().as_secs_f64());
            }
            times.sort_by(f64::total_cmp);
            rows.push(BenchRow { method, n, d, runs, median_seconds: times[runs / 2], min_seconds: times[0] });
        }
    }
    Ok(rows)
}

pub fn write_bench_csv(mut w: impl Write, rows: &[BenchRow]) -> Result<()> {
    writeln!(w, "{BENCH_CSV_HEADER}")?;
    for r in rows {
        writeln!(w, "{},{},{},{},{:?},{:?}", r.method, r.n, r.d, r.runs, r.median_seconds, r.min_seconds)?;
    }
    Ok(())
}

pub fn read_bench_csv(r: impl Read) -> Result<Vec<BenchRow>> {
    let mut rdr = csv::ReaderBuilder::new().from_reader(r);
    let mut out = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| Error::Parse { line: e.position().map_or(0, |p| p.line()), message: e.to_string() })?;
        let line = rec.position().map_or(0, |p| p.line());
        let bad = |what: &str| Error::Parse { line, message: format!("bad {what}") };
        if rec.len() != 6 {
            return Err(bad("column count"));
        }
        out.push(BenchRow {
            method: rec[0].parse().map_err(|_| bad("method"))?,
            n: rec[1].parse().map_err(|_| bad("n"))?,
            d: rec[2].parse().map_err(|_| bad("d"))?,
            runs: rec[3].parse().map_err(|_| bad("runs"))?,
            median_seconds: rec[4].parse().map_err(|_| bad("median_seconds"))?,
            min_seconds: rec[5].parse().map_err(|_| bad("min_seconds"))?,
        });
    }
    Ok(out)
}

/// `time(method_a) / time(method_b)` at each `n`, in grid order.
pub fn time_ratios(rows: &[BenchRow], a: Method, b: Method) -> Vec<(usize, f64)> {
    let mut out = Vec::new();
    for ra in rows.iter().filter(|r| r.method == a) {
        if let Some(rb) = rows.iter().find(|r| r.method == b && r.n == ra.n) {
            out.push((ra.n, ra.median_seconds / rb.median_seconds));
        }
    }
    out
}
