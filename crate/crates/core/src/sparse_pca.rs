//! Sparse leading eigenvectors.
//!
//! - [`truncated_power`]: power iteration that keeps only the `k` largest
//!   magnitude coordinates of `S v` at each step.
//! - [`combinatoric_sparse_pc`]: the exact `s`-sparse maximizer of `|vᵀ S v|`
//!   by enumerating supports; only for small `d`.
//! - [`deflate`] and [`top_m_sparse_pcs`]: several components by projection
//!   deflation `(I − v vᵀ) S (I − v vᵀ)`.

use itertools::Itertools;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fantope::{fantope_initializer, FantopeConfig};
use crate::numerics::{canonicalize_sign, norm2, sym_eigen, SymMatrix};

pub const DEFAULT_EPS: f64 = 1e-6;
pub const DEFAULT_MAX_ITER: usize = 1000;

/// Exhaustive support enumeration refuses dimensions above this.
pub const ENUMERATION_MAX_DIM: usize = 25;

#[derive(Debug, Clone, PartialEq)]
pub enum Init {
    /// Leading eigenvector of the input matrix.
    LeadingEigenvector,
    /// Thresholded leading eigenvector of the penalized Fantope solution.
    Fantope(FantopeConfig),
    /// Caller-supplied start (normalized before use).
    Given(Vec<f64>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct SparsePCConfig {
    pub k: usize,
    pub eps: f64,
    pub max_iter: usize,
    pub init: Init,
}

impl SparsePCConfig {
    pub fn new(k: usize) -> Self {
        SparsePCConfig { k, eps: DEFAULT_EPS, max_iter: DEFAULT_MAX_ITER, init: Init::LeadingEigenvector }
    }

    pub fn with_init(mut self, init: Init) -> Self {
        self.init = init;
        self
    }

    pub fn with_eps(mut self, eps: f64) -> Self {
        self.eps = eps;
        self
    }

    pub fn with_max_iter(mut self, max_iter: usize) -> Self {
        self.max_iter = max_iter;
        self
    }

    fn validate(&self, d: usize) -> Result<()> {
        if self.k == 0 || self.k > d {
            return Err(Error::invalid(format!("sparsity level k = {} outside [1, {d}]", self.k)));
        }
        if !(self.eps > 0.0) {
            return Err(Error::invalid("convergence threshold must be positive"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SparsePCResult {
    pub vector: Vec<f64>,
    pub support: Vec<usize>,
    pub rayleigh: f64,
    pub iterations: usize,
    pub converged: bool,
    /// `v⁽ᵗ⁾ᵀ S v⁽ᵗ⁾` after each iteration.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub trace: Vec<f64>,
}

impl SparsePCResult {
    fn finish(s: &SymMatrix, mut vector: Vec<f64>, iterations: usize, converged: bool, trace: Vec<f64>) -> Self {
        canonicalize_sign(&mut vector);
        let support = (0..vector.len()).filter(|&i| vector[i] != 0.0).collect();
        let rayleigh = s.quad_form(&vector);
        SparsePCResult { vector, support, rayleigh, iterations, converged, trace }
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

/// `v ⊙ 1_J`.
pub fn trc(v: &[f64], support: &[usize]) -> Vec<f64> {
    let mut out = vec![0.0; v.len()];
    for &j in support {
        out[j] = v[j];
    }
    out
}

/// Indices of the `k` largest `|w_i|`, ties going to the lower index; ascending order.
pub fn top_k_indices(w: &[f64], k: usize) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..w.len()).collect();
    let by_magnitude = |a: &usize, b: &usize| w[*b].abs().total_cmp(&w[*a].abs()).then(a.cmp(b));
    if k < idx.len() {
        idx.select_nth_unstable_by(k, by_magnitude);
        idx.truncate(k);
    }
    idx.sort_unstable();
    idx
}

fn initial_vector(s: &SymMatrix, init: &Init) -> Result<Vec<f64>> {
    let v = match init {
        Init::LeadingEigenvector => sym_eigen(s)?.swap_remove(0).vector,
        Init::Fantope(cfg) => fantope_initializer(s, cfg)?,
        Init::Given(v) => {
            if v.len() != s.dim() {
                return Err(Error::invalid(format!("initial vector has length {}, expected {}", v.len(), s.dim())));
            }
            v.clone()
        }
    };
    let n = norm2(&v);
    if !(n > 0.0) || !n.is_finite() {
        return Err(Error::invalid("initial vector must be finite and nonzero"));
    }
    Ok(v.into_iter().map(|x| x / n).collect())
}

/// Truncated power iteration for the `k`-sparse leading eigenvector.
///
/// Each step forms `W = S v`; if `W` has more than `k` nonzeros it is cut to
/// its `k` largest magnitudes, then normalized. Stops when consecutive
/// iterates differ by at most `eps` in Euclidean norm. Running out of
/// iterations is not an error: the result has `converged = false`.
pub fn truncated_power(s: &SymMatrix, cfg: &SparsePCConfig) -> Result<SparsePCResult> {
    let d = s.dim();
    cfg.validate(d)?;
    if !s.is_finite() {
        return Err(Error::invalid("matrix has non-finite entries"));
    }
    let mut v = initial_vector(s, &cfg.init)?;
    let mut trace = Vec::new();
    for t in 1..=cfg.max_iter {
        let w = s.mul_vec(&v);
        let nnz = w.iter().filter(|x| **x != 0.0).count();
        if nnz == 0 {
            return Err(Error::DegenerateIterate { iteration: t });
        }
        let w = if nnz <= cfg.k { w } else { trc(&w, &top_k_indices(&w, cfg.k)) };
        let n = norm2(&w);
        let next: Vec<f64> = w.iter().map(|x| x / n).collect();
        let delta = norm2(&next.iter().zip(&v).map(|(a, b)| a - b).collect::<Vec<_>>());
        v = next;
        trace.push(s.quad_form(&v));
        if delta <= cfg.eps {
            return Ok(SparsePCResult::finish(s, v, t, true, trace));
        }
    }
    Ok(SparsePCResult::finish(s, v, cfg.max_iter, false, trace))
}

/// Best `(|λ|, eigenvector)` of a principal submatrix, preferring the positive end on ties.
fn extreme_pair(sub: &SymMatrix) -> Result<(f64, Vec<f64>)> {
    let mut pairs = sym_eigen(sub)?;
    let last = pairs.pop().expect("non-empty");
    if pairs.is_empty() || pairs[0].value.abs() >= last.value.abs() {
        let first = if pairs.is_empty() { last } else { pairs.swap_remove(0) };
        Ok((first.value.abs(), first.vector))
    } else {
        Ok((last.value.abs(), last.vector))
    }
}

/// Exact maximizer of `|vᵀ S v|` over unit vectors with at most `s` nonzeros.
///
/// Enumerates all `C(d, s)` supports. Ties in the objective go to the
/// lexicographically smallest support.
pub fn combinatoric_sparse_pc(m: &SymMatrix, s: usize) -> Result<SparsePCResult> {
    let d = m.dim();
    if d > ENUMERATION_MAX_DIM {
        return Err(Error::TooLarge { d, limit: ENUMERATION_MAX_DIM });
    }
    if s == 0 || s > d {
        return Err(Error::invalid(format!("sparsity s = {s} outside [1, {d}]")));
    }
    if !m.is_finite() {
        return Err(Error::invalid("matrix has non-finite entries"));
    }
    let best = (0..d)
        .combinations(s)
        .par_bridge()
        .map(|support| {
            let (value, vector) = extreme_pair(&m.submatrix(&support))?;
            Ok::<_, Error>((value, support, vector))
        })
        .try_reduce_with(|a, b| {
            let keep_a = a.0 > b.0 || (a.0 == b.0 && a.1 < b.1);
            Ok(if keep_a { a } else { b })
        })
        .expect("at least one support")?;
    let (_, support, sub_vector) = best;
    let mut vector = vec![0.0; d];
    for (&j, x) in support.iter().zip(sub_vector) {
        vector[j] = x;
    }
    Ok(SparsePCResult::finish(m, vector, 0, true, Vec::new()))
}

/// `(I − v vᵀ) S (I − v vᵀ)`.
pub fn deflate(s: &SymMatrix, v: &[f64]) -> Result<SymMatrix> {
    if v.len() != s.dim() {
        return Err(Error::invalid("vector length does not match matrix dimension"));
    }
    if (norm2(v) - 1.0).abs() > 1e-8 {
        return Err(Error::invalid("deflation vector must have unit norm"));
    }
    let w = s.mul_vec(v);
    let a = crate::numerics::dot(v, &w);
    Ok(SymMatrix::from_fn(s.dim(), |i, j| s.get(i, j) - v[i] * w[j] - w[i] * v[j] + a * v[i] * v[j]))
}

#[derive(Debug, Clone, PartialEq)]
pub struct SubspaceResult {
    pub components: Vec<SparsePCResult>,
    /// Input matrix used for each component; the first is the original.
    pub deflation_trace: Vec<SymMatrix>,
}

impl SubspaceResult {
    /// Largest `|v_iᵀ v_j|` over distinct components.
    pub fn max_cross_inner_product(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for (i, a) in self.components.iter().enumerate() {
            for b in &self.components[i + 1..] {
                worst = worst.max(crate::numerics::dot(&a.vector, &b.vector).abs());
            }
        }
        worst
    }
}

/// One truncated-power run per config, deflating by each found component before the next.
pub fn top_m_sparse_pcs(s: &SymMatrix, configs: &[SparsePCConfig]) -> Result<SubspaceResult> {
    if configs.is_empty() {
        return Err(Error::invalid("need at least one component config"));
    }
    let mut current = s.clone();
    let mut components = Vec::with_capacity(configs.len());
    let mut deflation_trace = Vec::with_capacity(configs.len());
    for (i, cfg) in configs.iter().enumerate() {
        let pc = truncated_power(&current, cfg)?;
        deflation_trace.push(current.clone());
        if i + 1 < configs.len() {
            current = deflate(&current, &pc.vector)?;
        }
        components.push(pc);
    }
    Ok(SubspaceResult { components, deflation_trace })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::{dot, frobenius_norm, power_leading, spectral_norm, sym_eigenvalues};
    use crate::rng;
    use rand::Rng;

    fn random_symmetric(d: usize, seed: u64) -> SymMatrix {
        let mut r = rng::stream(seed, 7);
        SymMatrix::from_fn(d, |_, _| r.random::<f64>() * 2.0 - 1.0)
    }

    fn random_psd(d: usize, seed: u64) -> SymMatrix {
        let mut r = rng::stream(seed, 9);
        let a: Vec<Vec<f64>> = (0..d).map(|_| (0..d).map(|_| r.random::<f64>() - 0.5).collect()).collect();
        SymMatrix::from_fn(d, |i, j| (0..d).map(|k| a[k][i] * a[k][j]).sum())
    }

    fn sin(a: &[f64], b: &[f64]) -> f64 {
        let c = dot(a, b);
        (1.0 - c * c).max(0.0).sqrt()
    }

    /// Independent enumeration: every support, a randomly rotated copy of the
    /// submatrix, eigenvalues only.
    fn rotated_enumeration(m: &SymMatrix, s: usize, seed: u64) -> f64 {
        let mut r = rng::stream(seed, 3);
        let mut best: f64 = 0.0;
        for support in (0..m.dim()).combinations(s) {
            let sub = m.submatrix(&support);
            let q = random_orthogonal(s, &mut r);
            let values = sym_eigenvalues(&sub.congruence(&q)).unwrap();
            best = best.max(values[0].abs()).max(values[s - 1].abs());
        }
        best
    }

    fn random_orthogonal(n: usize, r: &mut impl Rng) -> Vec<Vec<f64>> {
        let mut q: Vec<Vec<f64>> = Vec::new();
        while q.len() < n {
            let mut v: Vec<f64> = (0..n).map(|_| r.random::<f64>() - 0.5).collect();
            for u in &q {
                let c = dot(&v, u);
                v.iter_mut().zip(u).for_each(|(a, b)| *a -= c * b);
            }
            let nv = norm2(&v);
            if nv > 1e-6 {
                q.push(v.into_iter().map(|x| x / nv).collect());
            }
        }
        q
    }

    #[test]
    fn trc_definition() {
        assert_eq!(trc(&[1.0, 2.0, 3.0], &[0, 2]), vec![1.0, 0.0, 3.0]);
        assert_eq!(trc(&[1.0, 2.0, 3.0], &[]), vec![0.0; 3]);
        assert_eq!(trc(&[1.0, 2.0, 3.0], &[0, 1, 2]), vec![1.0, 2.0, 3.0]);
    }

    #[test]
    fn top_k_breaks_ties_by_lower_index() {
        assert_eq!(top_k_indices(&[1.0, -3.0, 3.0, 2.0, -3.0], 2), vec![1, 2]);
        assert_eq!(top_k_indices(&[0.5, 0.5, 0.5], 1), vec![0]);
        assert_eq!(top_k_indices(&[0.5, 0.1], 5), vec![0, 1]);
    }

    #[test]
    fn diagonal_k1_picks_largest() {
        let s = SymMatrix::from_diag(&[3.0, 2.0, 1.0]);
        let cfg = SparsePCConfig::new(1).with_init(Init::Given(vec![1.0; 3]));
        let r = truncated_power(&s, &cfg).unwrap();
        assert_eq!(r.vector, vec![1.0, 0.0, 0.0]);
        assert_eq!(r.support, vec![0]);
        assert!(r.converged);
    }

    #[test]
    fn k_equal_d_is_power_iteration() {
        for seed in 0..10 {
            let s = random_psd(8, seed);
            let cfg = SparsePCConfig::new(8)
                .with_init(Init::Given(vec![1.0; 8]))
                .with_eps(1e-12)
                .with_max_iter(200_000);
            let r = truncated_power(&s, &cfg).unwrap();
            let p = power_leading(&s, 1e-12, 200_000).unwrap();
            assert!(sin(&r.vector, &p.vector) <= 1e-6);
        }
    }

    #[test]
    fn matches_enumeration_on_spiked_sscm() {
        use crate::location::CenterEstimate;
        use crate::sampler::{sample, EllipticalModel, Family, SpikedCovarianceSpec};
        let spec = SpikedCovarianceSpec::new(10, &[(6.0, 2), (3.0, 2)], 1.0).unwrap();
        let x = sample(&EllipticalModel::spiked(spec, Family::T3, 4), 3000).unwrap();
        let s = crate::scatter::sscm(&x, &CenterEstimate::fixed(vec![0.0; 10])).unwrap().matrix;
        let tp = truncated_power(&s, &SparsePCConfig::new(2).with_eps(1e-12)).unwrap();
        let exact = combinatoric_sparse_pc(&s, 2).unwrap();
        assert_eq!(tp.support, exact.support);
        assert_eq!(tp.support, vec![0, 1]);
        assert!(sin(&tp.vector, &exact.vector) <= 1e-6);
    }

    #[test]
    fn degenerate_iterate_is_reported() {
        let s = SymMatrix::from_diag(&[1.0, 0.0]);
        let cfg = SparsePCConfig::new(1).with_init(Init::Given(vec![0.0, 1.0]));
        assert!(matches!(truncated_power(&s, &cfg), Err(Error::DegenerateIterate { iteration: 1 })));
    }

    #[test]
    fn max_iter_yields_unconverged_result() {
        let s = random_psd(6, 1);
        let cfg = SparsePCConfig::new(3).with_init(Init::Given(vec![1.0; 6])).with_eps(1e-300).with_max_iter(2);
        let r = truncated_power(&s, &cfg).unwrap();
        assert!(!r.converged);
        assert_eq!(r.iterations, 2);
        assert!(r.support.len() <= 3);
    }

    #[test]
    fn invalid_configs() {
        let s = SymMatrix::identity(3);
        assert!(truncated_power(&s, &SparsePCConfig::new(0)).is_err());
        assert!(truncated_power(&s, &SparsePCConfig::new(4)).is_err());
        assert!(truncated_power(&s, &SparsePCConfig::new(1).with_eps(0.0)).is_err());
        assert!(truncated_power(&s, &SparsePCConfig::new(1).with_init(Init::Given(vec![0.0; 3]))).is_err());
    }

    #[test]
    fn combinatoric_uses_absolute_value() {
        let r = combinatoric_sparse_pc(&SymMatrix::from_diag(&[1.0, -5.0, 2.0]), 1).unwrap();
        assert_eq!(r.support, vec![1]);
        assert_eq!(r.vector, vec![0.0, 1.0, 0.0]);
        assert_eq!(r.rayleigh.abs(), 5.0);
    }

    #[test]
    fn combinatoric_full_support_is_extreme_eigenvector() {
        let m = random_symmetric(6, 2);
        let r = combinatoric_sparse_pc(&m, 6).unwrap();
        assert!((r.rayleigh.abs() - spectral_norm(&m).unwrap()).abs() < 1e-12);
    }

    #[test]
    fn combinatoric_matches_rotated_enumeration() {
        for seed in 0..10 {
            let m = random_symmetric(6, seed);
            let r = combinatoric_sparse_pc(&m, 2).unwrap();
            assert!((r.rayleigh.abs() - rotated_enumeration(&m, 2, seed)).abs() < 1e-10);
            assert!(r.support.len() <= 2);
        }
    }

    #[test]
    fn combinatoric_guard() {
        assert!(matches!(
            combinatoric_sparse_pc(&SymMatrix::identity(26), 2),
            Err(Error::TooLarge { d: 26, .. })
        ));
    }

    #[test]
    fn deflation_examples() {
        let s = SymMatrix::from_diag(&[3.0, 2.0, 1.0]);
        assert_eq!(deflate(&s, &[1.0, 0.0, 0.0]).unwrap(), SymMatrix::from_diag(&[0.0, 2.0, 1.0]));

        let m = random_psd(6, 5);
        let pairs = sym_eigen(&m).unwrap();
        let out = deflate(&m, &pairs[2].vector).unwrap();
        for (i, p) in pairs.iter().enumerate() {
            let mv = out.mul_vec(&p.vector);
            let expect = if i == 2 { 0.0 } else { p.value };
            let res: f64 = mv.iter().zip(&p.vector).map(|(a, b)| (a - expect * b).powi(2)).sum::<f64>().sqrt();
            assert!(res < 1e-12);
        }
        assert!(deflate(&m, &[1.0; 6]).is_err());
    }

    #[test]
    fn deflation_with_arbitrary_vector_interlaces() {
        let m = random_psd(7, 8);
        let mut r = rng::stream(8, 1);
        let v: Vec<f64> = (0..7).map(|_| r.random::<f64>() - 0.5).collect();
        let nv = norm2(&v);
        let v: Vec<f64> = v.iter().map(|x| x / nv).collect();
        let out = deflate(&m, &v).unwrap();
        assert!(out.quad_form(&v).abs() < 1e-12);
        let norm = spectral_norm(&m).unwrap();
        assert!(norm2(&out.mul_vec(&v)) <= 1e-8 * norm);
        // Compression to the complement of v: its d−1 eigenvalues interlace those of m.
        let a = sym_eigenvalues(&m).unwrap();
        let mut b = sym_eigenvalues(&out).unwrap();
        let zero = b.iter().position(|x| x.abs() < 1e-10).unwrap();
        b.remove(zero);
        for i in 0..6 {
            assert!(a[i] + 1e-10 >= b[i] && b[i] >= a[i + 1] - 1e-10);
        }
    }

    #[test]
    fn top_m_on_diagonal() {
        let s = SymMatrix::from_diag(&[4.0, 3.0, 2.0, 1.0]);
        let cfgs = vec![SparsePCConfig::new(1); 2];
        let r = top_m_sparse_pcs(&s, &cfgs).unwrap();
        assert_eq!(r.components[0].vector, vec![1.0, 0.0, 0.0, 0.0]);
        assert_eq!(r.components[1].vector, vec![0.0, 1.0, 0.0, 0.0]);
        assert_eq!(r.deflation_trace.len(), 2);
        assert!(r.max_cross_inner_product() < 1e-12);
    }

    #[test]
    fn single_component_reduces_to_truncated_power() {
        let s = random_psd(9, 3);
        let cfg = SparsePCConfig::new(4);
        let r = top_m_sparse_pcs(&s, std::slice::from_ref(&cfg)).unwrap();
        assert_eq!(r.components[0], truncated_power(&s, &cfg).unwrap());
    }

    #[test]
    fn result_json_shape() {
        let r = truncated_power(&SymMatrix::from_diag(&[2.0, 1.0]), &SparsePCConfig::new(1)).unwrap();
        let v: serde_json::Value = serde_json::from_str(&r.to_json().unwrap()).unwrap();
        for key in ["vector", "support", "rayleigh", "iterations", "converged"] {
            assert!(v.get(key).is_some(), "{key}");
        }
    }

    proptest::proptest! {
        #![proptest_config(proptest::prelude::ProptestConfig::with_cases(64))]

        #[test]
        fn output_is_sparse_and_unit(seed in 0u64..10_000, d in 2usize..12, kfrac in 0.0f64..1.0) {
            let s = random_symmetric(d, seed);
            let k = 1 + ((d - 1) as f64 * kfrac) as usize;
            if let Ok(r) = truncated_power(&s, &SparsePCConfig::new(k).with_max_iter(200)) {
                proptest::prop_assert!(r.support.len() <= k);
                proptest::prop_assert!((norm2(&r.vector) - 1.0).abs() < 1e-10);
                let nz: Vec<usize> = (0..d).filter(|&i| r.vector[i] != 0.0).collect();
                proptest::prop_assert_eq!(nz, r.support);
            }
        }

        #[test]
        fn positive_scaling_gives_same_iterates(seed in 0u64..10_000, c in 0.001f64..1000.0) {
            let s = random_psd(7, seed);
            let cfg = SparsePCConfig::new(3).with_init(Init::Given(vec![1.0; 7])).with_max_iter(50);
            let a = truncated_power(&s, &cfg).unwrap();
            let b = truncated_power(&s.scaled(c), &cfg).unwrap();
            proptest::prop_assert_eq!(&a.support, &b.support);
            proptest::prop_assert_eq!(a.iterations, b.iterations);
            for (x, y) in a.vector.iter().zip(&b.vector) {
                proptest::prop_assert!((x - y).abs() < 1e-12);
            }
        }

        #[test]
        fn rayleigh_is_monotone_for_psd(seed in 0u64..10_000, k in 1usize..6) {
            let s = random_psd(8, seed);
            let cfg = SparsePCConfig::new(k).with_init(Init::Given(vec![1.0; 8])).with_max_iter(300);
            let r = truncated_power(&s, &cfg).unwrap();
            let scale = frobenius_norm(&s);
            for w in r.trace.windows(2) {
                proptest::prop_assert!(w[1] >= w[0] - 1e-12 * scale);
            }
        }

        #[test]
        fn started_on_best_support_reaches_exact_value(seed in 0u64..10_000, d in 3usize..9, s in 1usize..4) {
            let m = random_psd(d, seed);
            let exact = combinatoric_sparse_pc(&m, s).unwrap().rayleigh.abs();
            let mut best: f64 = 0.0;
            for support in (0..d).combinations(s) {
                let v0 = sym_eigen(&m.submatrix(&support)).unwrap().swap_remove(0).vector;
                let cfg = SparsePCConfig::new(s)
                    .with_init(Init::Given(trc_embed(&v0, &support, d)))
                    .with_eps(1e-12)
                    .with_max_iter(5000);
                let r = truncated_power(&m, &cfg).unwrap();
                best = best.max(r.rayleigh.abs());
            }
            proptest::prop_assert!((best - exact).abs() <= 1e-8 * exact.max(1.0));
        }
    }

    fn trc_embed(sub: &[f64], support: &[usize], d: usize) -> Vec<f64> {
        let mut v = vec![0.0; d];
        for (&j, x) in support.iter().zip(sub) {
            v[j] = *x;
        }
        v
    }
}
