//! Experiment harness for spatial-sign sparse PCA: replicated simulations,
//! sparsity tuning, fitting on CSV data and runtime benchmarks, with
//! long-format CSV and JSON reports.

pub mod bench;
pub mod fit;
pub mod harness;
pub mod pipeline;
pub mod spec;

pub use bench::{bench_runtime, BenchRow};
pub use fit::{fit_csv, fit_data, FitOptions, FitReport};
pub use harness::{run_experiment, ExperimentReport};
pub use spec::{ExperimentSpec, KChoice, Method, Scenario};

/// Process exit status for a failed command: 3 for numerical failures, 2 for
/// everything else (bad specs, unreadable or malformed input).
pub fn exit_code(err: &sspca::Error) -> u8 {
    if err.is_numerical() {
        3
    } else {
        2
    }
}
