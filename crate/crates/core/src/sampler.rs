//! Synthetic elliptical data over a spiked sparse scatter matrix.
//!
//! Observations are `X = μ + r · A z` with `z ~ N(0, I_d)`, `A Aᵀ = Σ`, and a
//! family-specific radial multiplier `r`:
//!
//! - Gaussian: `r = 1`;
//! - standardized Student t: `r = 1 / √(w/df) / √(df/(df−2))`, `w ~ χ²_df`;
//! - standardized normal mixture: `r = b / √(κ + τ(1−κ))` with `b = 1` with
//!   probability `κ` and `b = √τ` otherwise (`τ` is the variance inflation).
//!
//! The Gaussian draws and the radial draws come from two separate streams of
//! the model seed, so a mixture with `κ = 1` reproduces the Gaussian output bit
//! for bit.

use rand::Rng;
use rand_distr::{Bernoulli, ChiSquared, Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::data::DataMatrix;
use crate::error::{Error, Result};
use crate::numerics::{sym_eigen, SymMatrix};
use crate::rng;

/// One sparse spike: eigenvalue `omega` on a block of `cardinality` consecutive coordinates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Spike {
    pub omega: f64,
    pub cardinality: usize,
}

/// `Σ = Σ_j (ω_j − ω_tail) v_j v_jᵀ + ω_tail I_d` with block-constant sparse `v_j`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpikedCovarianceSpec {
    pub d: usize,
    pub spikes: Vec<Spike>,
    pub omega_tail: f64,
}

impl SpikedCovarianceSpec {
    pub fn new(d: usize, spikes: &[(f64, usize)], omega_tail: f64) -> Result<Self> {
        let spec = SpikedCovarianceSpec {
            d,
            spikes: spikes.iter().map(|&(omega, cardinality)| Spike { omega, cardinality }).collect(),
            omega_tail,
        };
        spec.validate()?;
        Ok(spec)
    }

    /// Two spikes `ω = 5, 3` over a unit tail, each of cardinality `s`.
    pub fn leading_preset(d: usize, s: usize) -> Result<Self> {
        Self::new(d, &[(5.0, s), (3.0, s)], 1.0)
    }

    /// Four spikes `ω = 10.1, 6.2, 3.3, 1.4` over a tail of 0.5 with cardinalities 10, 10, 8, 8.
    pub fn top_m_preset(d: usize) -> Result<Self> {
        Self::new(d, &[(10.1, 10), (6.2, 10), (3.3, 8), (1.4, 8)], 0.5)
    }

    pub fn validate(&self) -> Result<()> {
        if self.d == 0 {
            return Err(Error::InvalidSpec("dimension must be positive".into()));
        }
        if !(self.omega_tail > 0.0) || !self.omega_tail.is_finite() {
            return Err(Error::InvalidSpec("tail eigenvalue must be positive".into()));
        }
        let mut prev = f64::INFINITY;
        for (j, s) in self.spikes.iter().enumerate() {
            if !(s.omega < prev) || !(s.omega > self.omega_tail) || !s.omega.is_finite() {
                return Err(Error::InvalidSpec(format!(
                    "spike eigenvalues must strictly decrease and exceed the tail (spike {j})"
                )));
            }
            if s.cardinality == 0 {
                return Err(Error::InvalidSpec(format!("spike {j} has empty support")));
            }
            prev = s.omega;
        }
        let total: usize = self.spikes.iter().map(|s| s.cardinality).sum();
        if total > self.d {
            return Err(Error::InvalidSpec(format!(
                "spike supports need {total} coordinates but d = {}",
                self.d
            )));
        }
        Ok(())
    }

    /// Index range of spike `j`.
    pub fn block(&self, j: usize) -> std::ops::Range<usize> {
        let start: usize = self.spikes[..j].iter().map(|s| s.cardinality).sum();
        start..start + self.spikes[j].cardinality
    }

    pub fn eigenvector(&self, j: usize) -> Vec<f64> {
        let mut v = vec![0.0; self.d];
        let w = 1.0 / (self.spikes[j].cardinality as f64).sqrt();
        v[self.block(j)].iter_mut().for_each(|x| *x = w);
        v
    }

    /// All eigenvalues of Σ, descending.
    pub fn eigenvalues(&self) -> Vec<f64> {
        let mut values: Vec<f64> = self.spikes.iter().map(|s| s.omega).collect();
        values.resize(self.d, self.omega_tail);
        values
    }
}

#[derive(Debug, Clone)]
pub struct SpikedSigma {
    pub sigma: SymMatrix,
    /// Sparse leading eigenvectors `v_1, …, v_m`.
    pub eigenvectors: Vec<Vec<f64>>,
}

pub fn build_spiked_sigma(spec: &SpikedCovarianceSpec) -> Result<SpikedSigma> {
    spec.validate()?;
    let eigenvectors: Vec<Vec<f64>> = (0..spec.spikes.len()).map(|j| spec.eigenvector(j)).collect();
    let mut sigma = SymMatrix::identity(spec.d).scaled(spec.omega_tail);
    for (s, v) in spec.spikes.iter().zip(&eigenvectors) {
        sigma = sigma.add(&SymMatrix::outer(v).scaled(s.omega - spec.omega_tail));
    }
    Ok(SpikedSigma { sigma, eigenvectors })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Family {
    Gaussian,
    StudentT { df: f64 },
    MixtureNormal { kappa: f64, inflation: f64 },
}

impl Family {
    /// Heavy-tailed preset used in the simulations: t with 3 degrees of freedom.
    pub const T3: Family = Family::StudentT { df: 3.0 };
    /// Mixture preset: 80% N(0, Σ), 20% N(0, 9Σ).
    pub const MIXTURE: Family = Family::MixtureNormal { kappa: 0.8, inflation: 9.0 };

    pub fn label(&self) -> String {
        match self {
            Family::Gaussian => "gaussian".into(),
            Family::StudentT { df } => format!("t{df}"),
            Family::MixtureNormal { kappa, inflation } => format!("mixture_{kappa}_{inflation}"),
        }
    }

    fn validate(&self) -> Result<()> {
        match *self {
            Family::Gaussian => Ok(()),
            Family::StudentT { df } if df > 2.0 && df.is_finite() => Ok(()),
            Family::StudentT { df } => Err(Error::InvalidSpec(format!(
                "Student t needs df > 2 for the covariance standardization, got {df}"
            ))),
            Family::MixtureNormal { kappa, inflation }
                if (0.0..=1.0).contains(&kappa) && inflation > 0.0 && inflation.is_finite() =>
            {
                Ok(())
            }
            Family::MixtureNormal { .. } => Err(Error::InvalidSpec(
                "mixture needs kappa in [0, 1] and a positive inflation".into(),
            )),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ScatterSpec {
    Spiked(SpikedCovarianceSpec),
    /// Explicit Σ given as rows.
    Explicit { sigma: Vec<Vec<f64>> },
}

impl ScatterSpec {
    pub fn dim(&self) -> usize {
        match self {
            ScatterSpec::Spiked(s) => s.d,
            ScatterSpec::Explicit { sigma } => sigma.len(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EllipticalModel {
    pub mu: Vec<f64>,
    pub scatter: ScatterSpec,
    pub family: Family,
    pub seed: u64,
}

impl EllipticalModel {
    /// Centered model over a spiked Σ.
    pub fn spiked(spec: SpikedCovarianceSpec, family: Family, seed: u64) -> Self {
        EllipticalModel { mu: vec![0.0; spec.d], scatter: ScatterSpec::Spiked(spec), family, seed }
    }

    pub fn with_seed(&self, seed: u64) -> Self {
        EllipticalModel { seed, ..self.clone() }
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }
}

enum Factor {
    Spiked { sqrt_tail: f64, blocks: Vec<(std::ops::Range<usize>, f64)> },
    Dense { d: usize, a: Vec<f64> },
}

impl Factor {
    fn new(scatter: &ScatterSpec) -> Result<Self> {
        match scatter {
            ScatterSpec::Spiked(spec) => {
                spec.validate()?;
                let sqrt_tail = spec.omega_tail.sqrt();
                let blocks = (0..spec.spikes.len())
                    .map(|j| {
                        let s = spec.spikes[j].cardinality as f64;
                        // Σ^{1/2} z adds (√ω_j − √ω_tail) (v_jᵀz) v_j; v_j entries are 1/√s.
                        (spec.block(j), (spec.spikes[j].omega.sqrt() - sqrt_tail) / s)
                    })
                    .collect();
                Ok(Factor::Spiked { sqrt_tail, blocks })
            }
            ScatterSpec::Explicit { sigma } => {
                let m = SymMatrix::from_rows(sigma)
                    .map_err(|e| Error::InvalidSpec(format!("explicit sigma: {e}")))?;
                let pairs = sym_eigen(&m)?;
                let scale = pairs.iter().map(|p| p.value.abs()).fold(0.0, f64::max);
                if pairs.iter().any(|p| p.value < -1e-10 * scale.max(1.0)) {
                    return Err(Error::InvalidSpec("explicit sigma is not positive semidefinite".into()));
                }
                let d = m.dim();
                let mut a = vec![0.0; d * d];
                for p in &pairs {
                    let r = p.value.max(0.0).sqrt();
                    for i in 0..d {
                        for j in 0..d {
                            a[i * d + j] += r * p.vector[i] * p.vector[j];
                        }
                    }
                }
                Ok(Factor::Dense { d, a })
            }
        }
    }

    fn apply(&self, z: &[f64], out: &mut [f64]) {
        match self {
            Factor::Spiked { sqrt_tail, blocks } => {
                for (o, zi) in out.iter_mut().zip(z) {
                    *o = sqrt_tail * zi;
                }
                for (range, coef) in blocks {
                    let proj: f64 = z[range.clone()].iter().sum();
                    out[range.clone()].iter_mut().for_each(|o| *o += coef * proj);
                }
            }
            Factor::Dense { d, a } => {
                for (i, o) in out.iter_mut().enumerate() {
                    *o = a[i * d..(i + 1) * d].iter().zip(z).map(|(x, y)| x * y).sum();
                }
            }
        }
    }
}

enum Radial {
    One,
    StudentT { chi: ChiSquared<f64>, df: f64, standardize: f64 },
    Mixture { branch: Bernoulli, wide: f64, standardize: f64 },
}

impl Radial {
    fn new(family: Family) -> Result<Self> {
        family.validate()?;
        Ok(match family {
            Family::Gaussian => Radial::One,
            Family::StudentT { df } => Radial::StudentT {
                chi: ChiSquared::new(df).map_err(|e| Error::InvalidSpec(e.to_string()))?,
                df,
                standardize: (df / (df - 2.0)).sqrt(),
            },
            Family::MixtureNormal { kappa, inflation } => Radial::Mixture {
                branch: Bernoulli::new(kappa).map_err(|e| Error::InvalidSpec(e.to_string()))?,
                wide: inflation.sqrt(),
                standardize: (kappa + inflation * (1.0 - kappa)).sqrt(),
            },
        })
    }

    fn draw(&self, rng: &mut impl Rng) -> f64 {
        match self {
            Radial::One => 1.0,
            Radial::StudentT { chi, df, standardize } => {
                let w: f64 = chi.sample(rng);
                1.0 / (w / df).sqrt() / standardize
            }
            Radial::Mixture { branch, wide, standardize } => {
                let b = if branch.sample(rng) { 1.0 } else { *wide };
                b / standardize
            }
        }
    }
}

/// Draws `n` observations; bit-identical for identical `(model, n)`.
pub fn sample(model: &EllipticalModel, n: usize) -> Result<DataMatrix> {
    if n == 0 {
        return Err(Error::invalid("sample size must be at least 1"));
    }
    let d = model.scatter.dim();
    if model.mu.len() != d {
        return Err(Error::InvalidSpec(format!(
            "location has {} entries but the scatter is {d}x{d}",
            model.mu.len()
        )));
    }
    let factor = Factor::new(&model.scatter)?;
    let radial = Radial::new(model.family)?;

    let mut gauss = rng::stream(model.seed, 0);
    let mut radii = rng::stream(model.seed, 1);
    let mut values = vec![0.0; n * d];
    let mut z = vec![0.0; d];
    let mut y = vec![0.0; d];
    for row in values.chunks_exact_mut(d) {
        for zi in z.iter_mut() {
            *zi = StandardNormal.sample(&mut gauss);
        }
        factor.apply(&z, &mut y);
        let r = radial.draw(&mut radii);
        for ((x, m), yi) in row.iter_mut().zip(&model.mu).zip(&y) {
            *x = m + r * yi;
        }
    }
    DataMatrix::new(n, d, values)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::sym_eigenvalues;

    fn sample_cov(x: &DataMatrix) -> Vec<Vec<f64>> {
        let mean = x.column_means();
        let d = x.d();
        let mut c = vec![vec![0.0; d]; d];
        for row in x.rows() {
            for i in 0..d {
                for j in 0..d {
                    c[i][j] += (row[i] - mean[i]) * (row[j] - mean[j]);
                }
            }
        }
        c.iter_mut().flatten().for_each(|v| *v /= (x.n() - 1) as f64);
        c
    }

    #[test]
    fn spiked_sigma_has_requested_spectrum() {
        let spec = SpikedCovarianceSpec::new(100, &[(5.0, 10), (3.0, 10)], 1.0).unwrap();
        let built = build_spiked_sigma(&spec).unwrap();
        let values = sym_eigenvalues(&built.sigma).unwrap();
        assert!((values[0] - 5.0).abs() < 1e-10 && (values[1] - 3.0).abs() < 1e-10);
        assert!(values[2..].iter().all(|v| (v - 1.0).abs() < 1e-10));
        for (j, v) in built.eigenvectors.iter().enumerate() {
            let nz: Vec<usize> = (0..100).filter(|&i| v[i] != 0.0).collect();
            assert_eq!(nz, (10 * j..10 * j + 10).collect::<Vec<_>>());
            assert!(nz.iter().all(|&i| v[i] == 1.0 / 10f64.sqrt()));
        }
    }

    #[test]
    fn four_spike_spectrum() {
        let spec = SpikedCovarianceSpec::top_m_preset(100).unwrap();
        let values = sym_eigenvalues(&build_spiked_sigma(&spec).unwrap().sigma).unwrap();
        for (got, want) in values.iter().zip([10.1, 6.2, 3.3, 1.4, 0.5]) {
            assert!((got - want).abs() < 1e-10);
        }
        assert!(values[4..].iter().all(|v| (v - 0.5).abs() < 1e-10));
    }

    #[test]
    fn no_spikes_is_scaled_identity() {
        let spec = SpikedCovarianceSpec::new(4, &[], 2.5).unwrap();
        assert_eq!(build_spiked_sigma(&spec).unwrap().sigma, SymMatrix::identity(4).scaled(2.5));
    }

    #[test]
    fn invalid_specs_are_rejected() {
        assert!(matches!(
            SpikedCovarianceSpec::new(10, &[(5.0, 6), (3.0, 6)], 1.0),
            Err(Error::InvalidSpec(_))
        ));
        assert!(SpikedCovarianceSpec::new(10, &[(3.0, 2), (5.0, 2)], 1.0).is_err());
        assert!(SpikedCovarianceSpec::new(10, &[(1.0, 2)], 1.0).is_err());
        assert!(SpikedCovarianceSpec::new(10, &[], 0.0).is_err());
        let spec = SpikedCovarianceSpec::new(5, &[], 1.0).unwrap();
        for df in [2.0, 1.0] {
            let m = EllipticalModel::spiked(spec.clone(), Family::StudentT { df }, 0);
            assert!(matches!(sample(&m, 3), Err(Error::InvalidSpec(_))));
        }
    }

    #[test]
    fn reproducible_and_seed_sensitive() {
        let spec = SpikedCovarianceSpec::leading_preset(20, 3).unwrap();
        for family in [Family::Gaussian, Family::T3, Family::MIXTURE] {
            let m = EllipticalModel::spiked(spec.clone(), family, 42);
            assert_eq!(sample(&m, 50).unwrap(), sample(&m, 50).unwrap());
            assert_ne!(sample(&m, 50).unwrap(), sample(&m.with_seed(43), 50).unwrap());
        }
    }

    #[test]
    fn degenerate_mixture_equals_gaussian() {
        let spec = SpikedCovarianceSpec::leading_preset(12, 3).unwrap();
        let g = EllipticalModel::spiked(spec.clone(), Family::Gaussian, 9);
        let m = EllipticalModel::spiked(
            spec,
            Family::MixtureNormal { kappa: 1.0, inflation: 9.0 },
            9,
        );
        assert_eq!(sample(&g, 200).unwrap(), sample(&m, 200).unwrap());
    }

    #[test]
    fn gaussian_covariance_within_three_standard_errors() {
        let spec = SpikedCovarianceSpec::new(5, &[(5.0, 2), (3.0, 2)], 1.0).unwrap();
        let sigma = build_spiked_sigma(&spec).unwrap().sigma;
        let n = 200_000;
        let x = sample(&EllipticalModel::spiked(spec, Family::Gaussian, 2024), n).unwrap();
        let c = sample_cov(&x);
        for i in 0..5 {
            for j in 0..5 {
                let se = ((sigma.get(i, i) * sigma.get(j, j) + sigma.get(i, j).powi(2)) / n as f64).sqrt();
                assert!((c[i][j] - sigma.get(i, j)).abs() <= 3.0 * se, "({i},{j})");
            }
        }
    }

    #[test]
    fn explicit_sigma_uses_eigen_square_root() {
        let sigma = vec![vec![2.0, 0.5, 0.0], vec![0.5, 1.0, 0.3], vec![0.0, 0.3, 1.5]];
        let model = EllipticalModel {
            mu: vec![0.0; 3],
            scatter: ScatterSpec::Explicit { sigma: sigma.clone() },
            family: Family::Gaussian,
            seed: 5,
        };
        let n = 200_000;
        let c = sample_cov(&sample(&model, n).unwrap());
        for i in 0..3 {
            for j in 0..3 {
                let se = ((sigma[i][i] * sigma[j][j] + sigma[i][j].powi(2)) / n as f64).sqrt();
                assert!((c[i][j] - sigma[i][j]).abs() <= 4.0 * se, "({i},{j})");
            }
        }
    }

    #[test]
    fn standardized_t3_marginals() {
        // Any projection aᵀx is a t3 variable scaled to variance aᵀΣa, so
        // P(|aᵀx| ≤ √(aᵀΣa)) = P(|T₃| ≤ √3) = 1/2 + 1/π.
        let spec = SpikedCovarianceSpec::new(5, &[(5.0, 2)], 1.0).unwrap();
        let sigma = build_spiked_sigma(&spec).unwrap().sigma;
        let lead = spec.eigenvector(0);
        let n = 100_000;
        let x = sample(&EllipticalModel::spiked(spec, Family::T3, 77), n).unwrap();
        let p = 0.5 + std::f64::consts::FRAC_1_PI;
        let se = (p * (1.0 - p) / n as f64).sqrt();
        let mut directions: Vec<Vec<f64>> = (0..5).map(|i| (0..5).map(|j| f64::from(i == j)).collect()).collect();
        directions.push(lead);
        for a in &directions {
            let scale = sigma.quad_form(a).sqrt();
            let inside = x.rows().filter(|r| crate::numerics::dot(r, a).abs() <= scale).count();
            assert!((inside as f64 / n as f64 - p).abs() <= 4.0 * se, "{a:?}");
        }
    }

    #[test]
    fn mixture_has_unit_scaled_covariance() {
        let spec = SpikedCovarianceSpec::new(4, &[(5.0, 2)], 1.0).unwrap();
        let sigma = build_spiked_sigma(&spec).unwrap().sigma;
        let x = sample(&EllipticalModel::spiked(spec, Family::MIXTURE, 11), 200_000).unwrap();
        let c = sample_cov(&x);
        for i in 0..4 {
            for j in 0..4 {
                assert!((c[i][j] - sigma.get(i, j)).abs() <= 0.05 * sigma.get(i, i), "({i},{j})");
            }
        }
    }

    #[test]
    fn location_shift() {
        let spec = SpikedCovarianceSpec::leading_preset(10, 2).unwrap();
        let sd: Vec<f64> = build_spiked_sigma(&spec).unwrap().sigma.diagonal().iter().map(|v| v.sqrt()).collect();
        let mut model = EllipticalModel::spiked(spec, Family::Gaussian, 3);
        model.mu = vec![7.0; 10];
        let n = 5000;
        let mean = sample(&model, n).unwrap().column_means();
        for (m, s) in mean.iter().zip(&sd) {
            assert!((m - 7.0).abs() <= 4.0 * s / (n as f64).sqrt());
        }
    }

    #[test]
    fn tail_block_directions_are_exchangeable() {
        let spec = SpikedCovarianceSpec::new(8, &[(5.0, 2)], 1.0).unwrap();
        let x = sample(&EllipticalModel::spiked(spec, Family::T3, 8), 100_000).unwrap();
        let mut second = vec![0.0; 8];
        for row in x.rows() {
            let r2: f64 = row.iter().map(|v| v * v).sum();
            for (s, v) in second.iter_mut().zip(row) {
                *s += v * v / r2;
            }
        }
        second.iter_mut().for_each(|s| *s /= x.n() as f64);
        let tail = &second[2..];
        let mean = tail.iter().sum::<f64>() / tail.len() as f64;
        for t in tail {
            assert!((t - mean).abs() < 0.03 * mean + 3e-3, "{tail:?}");
        }
        assert!(second[0] > 2.0 * mean);
    }

    #[test]
    fn model_json_round_trip() {
        let model = EllipticalModel::spiked(SpikedCovarianceSpec::leading_preset(20, 4).unwrap(), Family::MIXTURE, 1);
        let back = EllipticalModel::from_json(&model.to_json().unwrap()).unwrap();
        assert_eq!(model, back);
        let text = r#"{"mu":[0,0],"scatter":{"kind":"explicit","sigma":[[1,0],[0,1]]},
                       "family":{"type":"student_t","df":3},"seed":4}"#;
        let m = EllipticalModel::from_json(text).unwrap();
        assert_eq!(m.family, Family::T3);
    }
}
