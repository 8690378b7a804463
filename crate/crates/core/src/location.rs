//! Centers: the spatial median and the coordinate mean.
//!
//! The spatial median minimizes `Σᵢ wᵢ ‖xᵢ − μ‖₂`. It is computed with the
//! Weiszfeld fixed-point iteration, using the Vardi–Zhang modified step when
//! the iterate lands on a data point. Identical rows are merged into weighted
//! points first.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::data::DataMatrix;
use crate::error::{Error, LastIterate, Result};
use crate::numerics::norm2;

pub const DEFAULT_TOL: f64 = 1e-8;
pub const DEFAULT_MAX_ITER: usize = 500;

/// Distances below this count as the iterate coinciding with a data point.
const COINCIDE: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CenterMethod {
    SpatialMedian,
    Mean,
    Fixed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CenterEstimate {
    pub center: Vec<f64>,
    pub method: CenterMethod,
    pub iterations: usize,
    /// Norm of the (sub)gradient of the spatial-median objective at exit.
    pub residual: f64,
}

impl CenterEstimate {
    pub fn fixed(center: Vec<f64>) -> Self {
        CenterEstimate { center, method: CenterMethod::Fixed, iterations: 0, residual: 0.0 }
    }

    pub fn dim(&self) -> usize {
        self.center.len()
    }
}

pub fn mean_center(x: &DataMatrix) -> CenterEstimate {
    CenterEstimate {
        center: x.column_means(),
        method: CenterMethod::Mean,
        iterations: 0,
        residual: 0.0,
    }
}

/// `Σᵢ ‖xᵢ − μ‖₂`.
pub fn spatial_median_objective(x: &DataMatrix, mu: &[f64]) -> f64 {
    x.rows().map(|r| distance(r, mu)).sum()
}

/// Spatial median, or [`Error::NotConverged`] carrying the best iterate.
///
/// Convergence means the optimality gap `max(0, ‖Σ_{xᵢ≠μ} wᵢ U(xᵢ − μ)‖ − w_μ)`
/// is at most `tol · n`, where `w_μ` is the weight of a data point sitting at
/// `μ` (zero if none). Away from data points this is the plain gradient norm.
pub fn spatial_median(x: &DataMatrix, tol: f64, max_iter: usize) -> Result<CenterEstimate> {
    if !(tol > 0.0) {
        return Err(Error::invalid("tol must be positive"));
    }
    let points = WeightedPoints::merge(x);
    let d = x.d();
    let target = tol * x.n() as f64;

    let mut mu = coordinate_median(x);
    let mut grad = vec![0.0; d];
    let mut numer = vec![0.0; d];
    let mut iterations = 0;
    loop {
        // One pass: gradient pieces, Weiszfeld numerator/denominator, coincident weight.
        grad.iter_mut().for_each(|g| *g = 0.0);
        numer.iter_mut().for_each(|g| *g = 0.0);
        let mut denom = 0.0;
        let mut at_point = 0.0;
        for (p, &w) in points.iter() {
            let r = distance(p, &mu);
            if r < COINCIDE {
                at_point += w;
                continue;
            }
            for k in 0..d {
                grad[k] += w * (p[k] - mu[k]) / r;
                numer[k] += w * p[k] / r;
            }
            denom += w / r;
        }
        let gnorm = norm2(&grad);
        let residual = (gnorm - at_point).max(0.0);
        if residual <= target || denom == 0.0 {
            return Ok(CenterEstimate {
                center: mu,
                method: CenterMethod::SpatialMedian,
                iterations,
                residual,
            });
        }
        if iterations == max_iter {
            return Err(Error::NotConverged {
                routine: "spatial_median",
                iterations,
                residual,
                last: Box::new(LastIterate::Center(CenterEstimate {
                    center: mu,
                    method: CenterMethod::SpatialMedian,
                    iterations,
                    residual,
                })),
            });
        }
        let weiszfeld: Vec<f64> = numer.iter().map(|v| v / denom).collect();
        if at_point > 0.0 {
            // Vardi–Zhang: blend the Weiszfeld point with the current data point.
            let beta = (at_point / gnorm).min(1.0);
            for k in 0..d {
                mu[k] = (1.0 - beta) * weiszfeld[k] + beta * mu[k];
            }
        } else {
            mu = weiszfeld;
        }
        iterations += 1;
    }
}

/// Like [`spatial_median`] but falls back to the best iterate instead of failing.
pub fn spatial_median_or_best(x: &DataMatrix, tol: f64, max_iter: usize) -> Result<CenterEstimate> {
    match spatial_median(x, tol, max_iter) {
        Err(Error::NotConverged { last, .. }) => match *last {
            LastIterate::Center(c) => Ok(c),
            _ => unreachable!("spatial_median only reports center iterates"),
        },
        other => other,
    }
}

pub fn coordinate_median(x: &DataMatrix) -> Vec<f64> {
    let mut col = Vec::with_capacity(x.n());
    (0..x.d())
        .map(|j| {
            col.clear();
            col.extend(x.rows().map(|r| r[j]));
            col.sort_by(f64::total_cmp);
            let n = col.len();
            if n % 2 == 1 {
                col[n / 2]
            } else {
                0.5 * (col[n / 2 - 1] + col[n / 2])
            }
        })
        .collect()
}

#[inline]
fn distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

struct WeightedPoints<'a> {
    rows: Vec<&'a [f64]>,
    weights: Vec<f64>,
}

impl<'a> WeightedPoints<'a> {
    fn merge(x: &'a DataMatrix) -> Self {
        let mut index: HashMap<Vec<u64>, usize> = HashMap::with_capacity(x.n());
        let mut rows = Vec::with_capacity(x.n());
        let mut weights: Vec<f64> = Vec::with_capacity(x.n());
        for r in x.rows() {
            // -0.0 and 0.0 are the same point.
            let key: Vec<u64> = r.iter().map(|v| (v + 0.0).to_bits()).collect();
            match index.get(&key) {
                Some(&i) => weights[i] += 1.0,
                None => {
                    index.insert(key, rows.len());
                    rows.push(r);
                    weights.push(1.0);
                }
            }
        }
        WeightedPoints { rows, weights }
    }

    fn iter(&self) -> impl Iterator<Item = (&'a [f64], &f64)> + '_ {
        self.rows.iter().copied().zip(&self.weights)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng;
    use rand::Rng;

    fn median(x: &DataMatrix) -> CenterEstimate {
        spatial_median(x, DEFAULT_TOL, DEFAULT_MAX_ITER).unwrap()
    }

    #[test]
    fn symmetric_cross_has_origin_median() {
        let x = DataMatrix::from_rows(&[
            vec![1.0, 0.0],
            vec![-1.0, 0.0],
            vec![0.0, 1.0],
            vec![0.0, -1.0],
        ])
        .unwrap();
        let c = median(&x);
        assert!(norm2(&c.center) < 1e-12, "{:?}", c.center);
    }

    #[test]
    fn constant_rows_do_not_move() {
        let x = DataMatrix::from_rows(&vec![vec![2.0, -3.0, 0.5]; 6]).unwrap();
        let c = median(&x);
        assert_eq!(c.center, vec![2.0, -3.0, 0.5]);
        assert_eq!(c.iterations, 0);
    }

    #[test]
    fn median_at_a_heavy_data_point() {
        // Three copies at the origin outweigh the pull of the others.
        let x = DataMatrix::from_rows(&[
            vec![0.0, 0.0],
            vec![0.0, 0.0],
            vec![0.0, 0.0],
            vec![1.0, 0.1],
            vec![-0.3, 2.0],
        ])
        .unwrap();
        let c = median(&x);
        assert!(norm2(&c.center) < 1e-12);
        assert_eq!(c.residual, 0.0);
    }

    /// Grid search on the convex objective, refined by successive zooming.
    fn grid_oracle(x: &DataMatrix) -> Vec<f64> {
        let mut best = x.column_means();
        let mut half = 4.0;
        while half > 1e-9 {
            let steps = 40;
            let mut cand = best.clone();
            let mut cand_val = spatial_median_objective(x, &best);
            for a in 0..=steps {
                for b in 0..=steps {
                    let p = [
                        best[0] - half + 2.0 * half * a as f64 / steps as f64,
                        best[1] - half + 2.0 * half * b as f64 / steps as f64,
                    ];
                    let v = spatial_median_objective(x, &p);
                    if v < cand_val {
                        cand_val = v;
                        cand = p.to_vec();
                    }
                }
            }
            best = cand;
            half /= 8.0;
        }
        best
    }

    #[test]
    fn matches_grid_search_oracle() {
        for seed in 0..5 {
            let mut r = rng::stream(seed, 0);
            let rows: Vec<Vec<f64>> =
                (0..7).map(|_| vec![r.random::<f64>() * 4.0 - 2.0, r.random::<f64>() * 4.0 - 2.0]).collect();
            let x = DataMatrix::from_rows(&rows).unwrap();
            let c = median(&x);
            let o = grid_oracle(&x);
            let diff = ((c.center[0] - o[0]).powi(2) + (c.center[1] - o[1]).powi(2)).sqrt();
            assert!(diff < 1e-5, "seed {seed}: {:?} vs {o:?}", c.center);
            assert!(spatial_median_objective(&x, &c.center) <= spatial_median_objective(&x, &x.column_means()));
        }
    }

    #[test]
    fn reports_best_iterate_when_out_of_iterations() {
        let mut r = rng::stream(3, 0);
        let rows: Vec<Vec<f64>> = (0..30).map(|_| (0..3).map(|_| r.random::<f64>()).collect()).collect();
        let x = DataMatrix::from_rows(&rows).unwrap();
        match spatial_median(&x, 1e-14, 1) {
            Err(Error::NotConverged { last, .. }) => assert!(matches!(*last, LastIterate::Center(_))),
            other => panic!("{other:?}"),
        }
        let best = spatial_median_or_best(&x, 1e-14, 1).unwrap();
        assert_eq!(best.iterations, 1);
    }

    #[test]
    fn objective_is_non_increasing_along_iterations() {
        let mut r = rng::stream(11, 0);
        let rows: Vec<Vec<f64>> = (0..25).map(|_| (0..4).map(|_| r.random::<f64>().powi(3)).collect()).collect();
        let x = DataMatrix::from_rows(&rows).unwrap();
        let mut prev = f64::INFINITY;
        for it in 0..30 {
            let c = spatial_median_or_best(&x, 1e-15, it).unwrap();
            let f = spatial_median_objective(&x, &c.center);
            assert!(f <= prev + 1e-12);
            prev = f;
        }
    }
}
