//! Shared inputs for the criterion benches.

use sspca::location::{spatial_median_or_best, DEFAULT_MAX_ITER, DEFAULT_TOL};
use sspca::sampler::{sample, EllipticalModel, Family, SpikedCovarianceSpec};
use sspca::scatter::sscm;
use sspca::{DataMatrix, SymMatrix};

/// Standardized t₃ draws from the two-spike model with spikes of size `min(10, d / 2)`.
pub fn spiked_t3(n: usize, d: usize, seed: u64) -> DataMatrix {
    let s = 10.min(d / 2).max(1);
    let spec = SpikedCovarianceSpec::leading_preset(d, s).expect("valid preset");
    sample(&EllipticalModel::spiked(spec, Family::T3, seed), n).expect("sampler")
}

/// SSCM of [`spiked_t3`] data around its spatial median.
pub fn spiked_sscm(n: usize, d: usize, seed: u64) -> SymMatrix {
    let x = spiked_t3(n, d, seed);
    let center = spatial_median_or_best(&x, DEFAULT_TOL, DEFAULT_MAX_ITER).expect("median");
    sscm(&x, &center).expect("sscm").matrix
}
