//! Fantope-based initial vector for the truncated power method.
//!
//! Solves
//!
//! ```text
//! max ⟨S, M⟩ − λ Σ_jk |M_jk|   over   { 0 ⪯ M ⪯ I, tr M = 1 }
//! ```
//!
//! by ADMM on the split `M = Y`, alternating a Euclidean projection onto the
//! Fantope with entrywise soft-thresholding, then thresholds the leading
//! eigenvector of the solution at `φ` and renormalizes.

use serde::{Deserialize, Serialize};

use crate::error::{Error, LastIterate, Result};
use crate::numerics::{canonicalize_sign, frobenius_norm, norm2, sym_eigen, SymMatrix};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FantopeConfig {
    /// ℓ₁ penalty λ.
    pub lambda: f64,
    /// Coordinate threshold φ applied to the leading eigenvector.
    pub phi: f64,
    pub admm_rho: f64,
    pub tol: f64,
    pub max_iter: usize,
}

impl FantopeConfig {
    pub fn new(lambda: f64, phi: f64) -> Self {
        FantopeConfig { lambda, phi, admm_rho: 1.0, tol: 1e-6, max_iter: 2000 }
    }

    /// `λ = λ₁(S) √(log d / n)` and `φ = c · k · log d / √n`.
    pub fn heuristic(s: &SymMatrix, n: usize, k: usize, phi_const: f64) -> Result<Self> {
        let d = s.dim() as f64;
        let n = n.max(1) as f64;
        let lead = sym_eigen(s)?[0].value.max(0.0);
        Ok(Self::new(lead * (d.ln().max(0.0) / n).sqrt(), phi_const * k as f64 * d.ln().max(0.0) / n.sqrt()))
    }

    fn validate(&self) -> Result<()> {
        let ok = self.lambda >= 0.0
            && self.lambda.is_finite()
            && self.phi >= 0.0
            && self.admm_rho > 0.0
            && self.tol > 0.0;
        if ok {
            Ok(())
        } else {
            Err(Error::invalid("Fantope config needs λ ≥ 0, φ ≥ 0, ρ > 0, tol > 0"))
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FantopeSolution {
    /// Feasible iterate (the projection step output).
    pub y: SymMatrix,
    pub primal_residual: f64,
    pub dual_residual: f64,
    pub iterations: usize,
    /// `⟨S, Y⟩ − λ‖Y‖₁` after each iteration.
    pub objective_trace: Vec<f64>,
}

/// `⟨S, M⟩ − λ Σ |M_jk|`.
pub fn fantope_objective(s: &SymMatrix, m: &SymMatrix, lambda: f64) -> f64 {
    let inner: f64 = s.as_slice().iter().zip(m.as_slice()).map(|(a, b)| a * b).sum();
    let l1: f64 = m.as_slice().iter().map(|x| x.abs()).sum();
    inner - lambda * l1
}

/// Euclidean projection onto `{0 ⪯ M ⪯ I, tr M = 1}`.
///
/// Eigenvalues `γ` are mapped to `clamp(γ − θ, 0, 1)` with the shift `θ` found
/// by bisection so that they sum to one.
pub fn project_fantope(a: &SymMatrix) -> Result<SymMatrix> {
    let pairs = sym_eigen(a)?;
    let gammas: Vec<f64> = pairs.iter().map(|p| p.value).collect();
    let mass = |theta: f64| gammas.iter().map(|g| (g - theta).clamp(0.0, 1.0)).sum::<f64>();
    // mass(lo) = d ≥ 1 and mass(hi) = 0; mass is non-increasing in θ.
    let mut lo = gammas[gammas.len() - 1] - 1.0;
    let mut hi = gammas[0];
    while hi - lo > 1e-12 * (1.0 + hi.abs().max(lo.abs())) {
        let mid = 0.5 * (lo + hi);
        if mass(mid) > 1.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let theta = 0.5 * (lo + hi);
    let d = a.dim();
    let mut out = vec![0.0; d * d];
    for p in &pairs {
        let w = (p.value - theta).clamp(0.0, 1.0);
        if w == 0.0 {
            continue;
        }
        for i in 0..d {
            let wi = w * p.vector[i];
            for j in i..d {
                out[i * d + j] += wi * p.vector[j];
            }
        }
    }
    Ok(SymMatrix::from_raw_parts(d, out))
}

fn soft_threshold(m: &SymMatrix, t: f64) -> SymMatrix {
    SymMatrix::from_fn(m.dim(), |i, j| {
        let x = m.get(i, j);
        x.signum() * (x.abs() - t).max(0.0)
    })
}

/// ADMM for the ℓ₁-penalized Fantope program.
///
/// Stops when both the primal residual `‖X − Y‖_F` and the dual residual
/// `ρ‖Y − Y_prev‖_F` are at most `tol`. The returned matrix is always the
/// projection-step iterate, so it is feasible regardless of convergence.
pub fn fantope_solve(s: &SymMatrix, cfg: &FantopeConfig) -> Result<FantopeSolution> {
    cfg.validate()?;
    if !s.is_finite() {
        return Err(Error::invalid("matrix has non-finite entries"));
    }
    let d = s.dim();
    let rho = cfg.admm_rho;
    let s_over_rho = s.scaled(1.0 / rho);
    let mut y = SymMatrix::zeros(d);
    let mut u = SymMatrix::zeros(d);
    let mut x = SymMatrix::zeros(d);
    let mut trace = Vec::new();
    let (mut primal, mut dual) = (f64::INFINITY, f64::INFINITY);
    for it in 1..=cfg.max_iter {
        x = project_fantope(&y.sub(&u).add(&s_over_rho))?;
        let y_prev = y;
        y = soft_threshold(&x.add(&u), cfg.lambda / rho);
        let gap = x.sub(&y);
        u = u.add(&gap);
        primal = frobenius_norm(&gap);
        dual = rho * frobenius_norm(&y.sub(&y_prev));
        trace.push(fantope_objective(s, &x, cfg.lambda));
        if primal <= cfg.tol && dual <= cfg.tol {
            return Ok(FantopeSolution {
                y: x,
                primal_residual: primal,
                dual_residual: dual,
                iterations: it,
                objective_trace: trace,
            });
        }
    }
    Err(Error::NotConverged {
        routine: "fantope_solve",
        iterations: cfg.max_iter,
        residual: primal.max(dual),
        last: Box::new(LastIterate::Fantope(FantopeSolution {
            y: x,
            primal_residual: primal,
            dual_residual: dual,
            iterations: cfg.max_iter,
            objective_trace: trace,
        })),
    })
}

/// Thresholds `u₁(Y)` at `φ` (keeping `|u_j| ≥ φ`) and normalizes.
pub fn threshold_leading(y: &SymMatrix, phi: f64) -> Result<Vec<f64>> {
    let lead = sym_eigen(y)?.swap_remove(0).vector;
    let mut w: Vec<f64> = lead.iter().map(|&x| if x.abs() >= phi { x } else { 0.0 }).collect();
    let n = norm2(&w);
    if n == 0.0 {
        return Err(Error::EmptySupport { phi });
    }
    w.iter_mut().for_each(|x| *x /= n);
    canonicalize_sign(&mut w);
    Ok(w)
}

/// Initial vector: the thresholded, normalized leading eigenvector of the Fantope solution.
pub fn fantope_initializer(s: &SymMatrix, cfg: &FantopeConfig) -> Result<Vec<f64>> {
    let sol = fantope_solve(s, cfg)?;
    threshold_leading(&sol.y, cfg.phi)
}
