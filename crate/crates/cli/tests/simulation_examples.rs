//! Desk-scale simulation and runtime checks through the library harness.

use sspca_cli::bench::{bench_runtime, time_ratios};
use sspca_cli::spec::Grid;
use sspca_cli::{run_experiment, ExperimentSpec, KChoice, Method, Scenario};

#[test]
fn gaussian_leading_eigenvector_at_n200() {
    let mut spec = ExperimentSpec::preset(Scenario::LeadingEigvec);
    spec.grid = Grid { n: vec![200], d: vec![100], s: vec![10], k: vec![KChoice::ORACLE] };
    spec.replications = 200;
    let report = run_experiment(&spec).unwrap();
    assert!(report.failures.is_empty());
    let sspca = report.mean(0, Method::Sspca, "sin_angle").unwrap();
    let tp = report.mean(0, Method::Tp, "sin_angle").unwrap();
    assert!((sspca - 0.121).abs() <= 0.03, "SSPCA {sspca}");
    assert!((tp - 0.118).abs() <= 0.03, "TP {tp}");
}

#[test]
fn sscm_cost_is_near_linear_and_kendall_grows_faster() {
    let rows = bench_runtime(&[500, 4000], 50, &[Method::Sspca, Method::Eca], 5, 3).unwrap();
    let time = |m: Method, n: usize| rows.iter().find(|r| r.method == m && r.n == n).unwrap().median_seconds;
    let sscm_ratio = time(Method::Sspca, 4000) / time(Method::Sspca, 500);
    let kendall_ratio = time(Method::Eca, 4000) / time(Method::Eca, 500);
    assert!((5.0..=13.0).contains(&sscm_ratio), "SSCM ratio {sscm_ratio}");
    assert!(kendall_ratio > sscm_ratio, "Kendall {kendall_ratio} vs SSCM {sscm_ratio}");
    assert_eq!(time_ratios(&rows, Method::Eca, Method::Sspca).len(), 2);
}
