use rayon::prelude::*;
use sspca::fantope::{fantope_initializer, FantopeConfig};
use sspca::location::{spatial_median, spatial_median_or_best};
use sspca::metrics::sin_angle;
use sspca::numerics::{norm2, sym_eigen};
use sspca::sampler::{sample, EllipticalModel, Family, SpikedCovarianceSpec};
use sspca::scatter::{kendall_tau, pearson, population_sscm_eigen, sscm, DEFAULT_MC_DRAWS};
use sspca::sparse_pca::{top_m_sparse_pcs, SparsePCConfig};
use sspca::CenterEstimate;

/// `λ_j ∫₀^∞ (1 + 2λ_j t)^{-3/2} Π_{k≠j} (1 + 2λ_k t)^{-1/2} dt`, Simpson's rule in `t = eˢ`.
fn quadrature_sscm_eigen(values: &[f64], j: usize) -> f64 {
    let integrand = |s: f64| {
        let t = s.exp();
        let mut log_f = -1.5 * (2.0 * values[j]).mul_add(t, 1.0).ln();
        for (k, l) in values.iter().enumerate() {
            if k != j {
                log_f -= 0.5 * (2.0 * l).mul_add(t, 1.0).ln();
            }
        }
        (log_f + s).exp()
    };
    let (a, b, m) = (-40.0, 90.0, 400_000);
    let h = (b - a) / m as f64;
    let mut total = integrand(a) + integrand(b);
    for i in 1..m {
        total += integrand(a + i as f64 * h) * if i % 2 == 1 { 4.0 } else { 2.0 };
    }
    values[j] * total * h / 3.0
}

#[test]
fn quadrature_oracle_sanity() {
    for q in [1usize, 2, 5] {
        let v = quadrature_sscm_eigen(&vec![1.0; q], 0);
        assert!((v - 1.0 / q as f64).abs() < 1e-9, "q={q}: {v}");
    }
}

#[test]
fn population_eigen_matches_quadrature() {
    let mut values = vec![5.0, 3.0];
    values.extend(std::iter::repeat(1.0).take(98));
    let pop = population_sscm_eigen(&values, DEFAULT_MC_DRAWS, 2024).unwrap();
    assert!((pop.values.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    for j in [0, 1, 2, 99] {
        let exact = quadrature_sscm_eigen(&values, j);
        let err = (pop.values[j] - exact).abs();
        assert!(err <= 3.0 * pop.std_errors[j], "j={j}: mc {} vs {exact}", pop.values[j]);
    }
}

#[test]
fn population_eigen_standard_errors_are_calibrated() {
    // z-scores against the exact 1/q should be close to standard normal.
    let q = 3;
    let z: Vec<f64> = (0..600u64)
        .into_par_iter()
        .flat_map_iter(|seed| {
            let pop = population_sscm_eigen(&vec![1.0; q], 20_000, seed).unwrap();
            (0..q).map(move |j| (pop.values[j] - 1.0 / q as f64) / pop.std_errors[j])
        })
        .collect();
    let m = z.iter().sum::<f64>() / z.len() as f64;
    let var = z.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (z.len() - 1) as f64;
    assert!(m.abs() < 0.1 && (0.88..=1.12).contains(&var), "mean {m}, var {var}");
}

#[test]
fn spatial_median_rate() {
    let spec = SpikedCovarianceSpec::new(20, &[], 1.0).unwrap();
    let mean_error = |n: usize| {
        let errs: Vec<f64> = (0..100u64)
            .into_par_iter()
            .map(|r| {
                let x = sample(&EllipticalModel::spiked(spec.clone(), Family::Gaussian, 1000 * n as u64 + r), n).unwrap();
                norm2(&spatial_median(&x, 1e-10, 1000).unwrap().center)
            })
            .collect();
        errs.iter().sum::<f64>() / errs.len() as f64
    };
    let factor = mean_error(200) / mean_error(400);
    assert!((1.2..=1.7).contains(&factor), "factor {factor}");
}

#[test]
fn large_sample_eigenvectors_agree() {
    let spec = SpikedCovarianceSpec::leading_preset(20, 4).unwrap();
    let truth = spec.eigenvector(0);
    let model = EllipticalModel::spiked(spec, Family::Gaussian, 17);
    let x = sample(&model, 100_000).unwrap();
    let lead = |m: &sspca::SymMatrix| sym_eigen(m).unwrap().swap_remove(0).vector;
    let center = spatial_median(&x, 1e-8, 500).unwrap();
    assert!(sin_angle(&lead(&sscm(&x, &center).unwrap().matrix), &truth).unwrap() <= 0.05);
    assert!(sin_angle(&lead(&pearson(&x).unwrap().matrix), &truth).unwrap() <= 0.05);
    // Kendall's tau is quadratic in n; a smaller sample is used.
    let small = sample(&model.with_seed(18), 4000).unwrap();
    assert!(sin_angle(&lead(&kendall_tau(&small).unwrap().matrix), &truth).unwrap() <= 0.05);
}

#[test]
fn top_four_components_at_moderate_n() {
    let spec = SpikedCovarianceSpec::new(30, &[(10.1, 8), (6.2, 8), (3.3, 6), (1.4, 6)], 0.5).unwrap();
    let truth: Vec<Vec<f64>> = (0..4).map(|j| spec.eigenvector(j)).collect();
    let x = sample(&EllipticalModel::spiked(spec, Family::Gaussian, 4), 5000).unwrap();
    let s = sscm(&x, &spatial_median(&x, 1e-8, 500).unwrap()).unwrap();
    let configs: Vec<SparsePCConfig> = [8, 8, 6, 6].iter().map(|&k| SparsePCConfig::new(k)).collect();
    let res = top_m_sparse_pcs(&s.matrix, &configs).unwrap();
    let avg = res
        .components
        .iter()
        .zip(&truth)
        .map(|(c, t)| sin_angle(&c.vector, t).unwrap())
        .sum::<f64>()
        / 4.0;
    assert!(avg <= 0.1, "average sin {avg}");
}

#[test]
fn fantope_initializer_recovers_support() {
    let spec = SpikedCovarianceSpec::leading_preset(30, 5).unwrap();
    let block = spec.block(0);
    let n = 2000;
    let hits: usize = (0..100u64)
        .into_par_iter()
        .map(|r| {
            let x = sample(&EllipticalModel::spiked(spec.clone(), Family::Gaussian, 500 + r), n).unwrap();
            let s = sscm(&x, &spatial_median_or_best(&x, 1e-8, 500).unwrap()).unwrap().matrix;
            let cfg = FantopeConfig::heuristic(&s, n, 5, 0.5).unwrap();
            let v = fantope_initializer(&s, &cfg).unwrap();
            usize::from((0..30).all(|j| v[j] == 0.0 || block.contains(&j)))
        })
        .sum();
    assert!(hits >= 90, "{hits}/100");
}

#[test]
fn known_center_sscm_is_unbiased_for_identity() {
    // Spherical data: E[S] = I/d, and each diagonal entry is a mean of Beta(1/2, (d−1)/2) draws.
    let d = 8;
    let n = 50_000;
    let spec = SpikedCovarianceSpec::new(d, &[], 2.0).unwrap();
    let x = sample(&EllipticalModel::spiked(spec, Family::T3, 3), n).unwrap();
    let s = sscm(&x, &CenterEstimate::fixed(vec![0.0; d])).unwrap().matrix;
    let var = (1.0 / d as f64) * (1.0 - 1.0 / d as f64) / (d as f64 / 2.0 + 1.0);
    let se = (var / n as f64).sqrt();
    for i in 0..d {
        assert!((s.get(i, i) - 1.0 / d as f64).abs() <= 4.0 * se, "entry {i}");
    }
}
