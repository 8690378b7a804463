//! Dense symmetric matrices and the eigen machinery the estimators sit on.
//!
//! Storage is a full row-major `d×d` buffer kept exactly symmetric: every
//! constructor takes the upper triangle as authoritative and mirrors it.
//!
//! Eigendecomposition uses cyclic Jacobi rotations for `d ≤ 64` and
//! Householder tridiagonalization followed by implicit-shift QL above that.
//! Eigenpairs come back ordered by descending value, every vector is
//! sign-canonical (first entry with magnitude above [`SIGN_EPS`] is positive),
//! and tied eigenvalues are ordered by their canonical vectors, larger
//! lexicographic vector first.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, LastIterate, Result};

/// Largest dimension handled by Jacobi; bigger matrices go through tridiagonal QL.
pub const JACOBI_MAX_DIM: usize = 64;

/// Entries with magnitude at or below this are skipped when fixing the sign of a vector.
pub const SIGN_EPS: f64 = 1e-12;

const FALLBACK_SEED: u64 = 0x5eed_0f_1ead;

#[derive(Debug, Clone, PartialEq)]
pub struct SymMatrix {
    dim: usize,
    data: Vec<f64>,
}

impl SymMatrix {
    pub fn zeros(dim: usize) -> Self {
        assert!(dim >= 1, "SymMatrix dimension must be at least 1");
        SymMatrix { dim, data: vec![0.0; dim * dim] }
    }

    pub fn identity(dim: usize) -> Self {
        Self::from_diag(&vec![1.0; dim])
    }

    pub fn from_diag(diag: &[f64]) -> Self {
        let mut m = Self::zeros(diag.len());
        for (i, &x) in diag.iter().enumerate() {
            m.data[i * m.dim + i] = x;
        }
        m
    }

    /// Builds the matrix from `f(i, j)` evaluated on `i <= j`.
    pub fn from_fn(dim: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut m = Self::zeros(dim);
        for i in 0..dim {
            for j in i..dim {
                let x = f(i, j);
                m.data[i * dim + j] = x;
                m.data[j * dim + i] = x;
            }
        }
        m
    }

    /// Row-major buffer; the upper triangle is kept and mirrored.
    pub fn from_row_major(dim: usize, data: Vec<f64>) -> Result<Self> {
        if dim == 0 || data.len() != dim * dim {
            return Err(Error::invalid(format!(
                "expected {dim}x{dim} = {} entries, got {}",
                dim * dim,
                data.len()
            )));
        }
        let mut m = SymMatrix { dim, data };
        m.mirror_upper();
        Ok(m)
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let dim = rows.len();
        if rows.iter().any(|r| r.len() != dim) {
            return Err(Error::invalid("rows do not form a square matrix"));
        }
        Self::from_row_major(dim, rows.concat())
    }

    /// `v vᵀ`.
    pub fn outer(v: &[f64]) -> Self {
        Self::from_fn(v.len(), |i, j| v[i] * v[j])
    }

    fn mirror_upper(&mut self) {
        let d = self.dim;
        for i in 0..d {
            for j in (i + 1)..d {
                self.data[j * d + i] = self.data[i * d + j];
            }
        }
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.dim + j]
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn to_rows(&self) -> Vec<Vec<f64>> {
        self.data.chunks(self.dim).map(<[f64]>::to_vec).collect()
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|x| x.is_finite())
    }

    pub fn trace(&self) -> f64 {
        (0..self.dim).map(|i| self.get(i, i)).sum()
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.dim).map(|i| self.get(i, i)).collect()
    }

    pub fn mul_vec(&self, v: &[f64]) -> Vec<f64> {
        assert_eq!(v.len(), self.dim);
        self.data.chunks(self.dim).map(|row| dot(row, v)).collect()
    }

    /// `vᵀ M v`.
    pub fn quad_form(&self, v: &[f64]) -> f64 {
        dot(v, &self.mul_vec(v))
    }

    pub fn scaled(&self, c: f64) -> Self {
        SymMatrix { dim: self.dim, data: self.data.iter().map(|x| c * x).collect() }
    }

    pub fn add(&self, other: &SymMatrix) -> Self {
        self.zip_with(other, |a, b| a + b)
    }

    pub fn sub(&self, other: &SymMatrix) -> Self {
        self.zip_with(other, |a, b| a - b)
    }

    fn zip_with(&self, other: &SymMatrix, f: impl Fn(f64, f64) -> f64) -> Self {
        assert_eq!(self.dim, other.dim, "dimension mismatch");
        SymMatrix {
            dim: self.dim,
            data: self.data.iter().zip(&other.data).map(|(&a, &b)| f(a, b)).collect(),
        }
    }

    /// Principal submatrix on `idx` (in the given order).
    pub fn submatrix(&self, idx: &[usize]) -> Self {
        Self::from_fn(idx.len(), |a, b| self.get(idx[a], idx[b]))
    }

    /// `Q M Qᵀ` for a square `Q` given row-major.
    pub fn congruence(&self, q: &[Vec<f64>]) -> Self {
        let d = self.dim;
        assert_eq!(q.len(), d);
        let mq: Vec<Vec<f64>> = (0..d)
            .map(|i| (0..d).map(|k| (0..d).map(|l| self.get(i, l) * q[k][l]).sum()).collect())
            .collect();
        Self::from_fn(d, |k, j| (0..d).map(|i| q[k][i] * mq[i][j]).sum())
    }

    pub(crate) fn from_raw_parts(dim: usize, data: Vec<f64>) -> Self {
        debug_assert_eq!(data.len(), dim * dim);
        let mut m = SymMatrix { dim, data };
        m.mirror_upper();
        m
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EigenPair {
    pub value: f64,
    pub vector: Vec<f64>,
}

#[inline]
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[inline]
pub fn norm2(v: &[f64]) -> f64 {
    dot(v, v).sqrt()
}

/// Flips `v` so its first entry above [`SIGN_EPS`] in magnitude is positive.
pub fn canonicalize_sign(v: &mut [f64]) {
    if let Some(&first) = v.iter().find(|x| x.abs() > SIGN_EPS) {
        if first < 0.0 {
            v.iter_mut().for_each(|x| *x = -*x);
        }
    }
}

/// Full eigendecomposition, descending by value.
pub fn sym_eigen(m: &SymMatrix) -> Result<Vec<EigenPair>> {
    if !m.is_finite() {
        return Err(Error::invalid("matrix has non-finite entries"));
    }
    let d = m.dim();
    let (values, vectors) = if d <= JACOBI_MAX_DIM {
        jacobi(m)
    } else {
        tridiagonal_ql(m).unwrap_or_else(|| jacobi(m))
    };

    let mut pairs: Vec<EigenPair> = (0..d)
        .map(|j| {
            let mut vector: Vec<f64> = (0..d).map(|k| vectors[k * d + j]).collect();
            let n = norm2(&vector);
            vector.iter_mut().for_each(|x| *x /= n);
            canonicalize_sign(&mut vector);
            EigenPair { value: values[j], vector }
        })
        .collect();
    order_pairs(&mut pairs);
    Ok(pairs)
}

/// Eigenvalues only, descending.
pub fn sym_eigenvalues(m: &SymMatrix) -> Result<Vec<f64>> {
    Ok(sym_eigen(m)?.into_iter().map(|p| p.value).collect())
}

fn order_pairs(pairs: &mut [EigenPair]) {
    pairs.sort_by(|a, b| b.value.total_cmp(&a.value));
    let scale = pairs.iter().map(|p| p.value.abs()).fold(1.0, f64::max);
    let tie = 1e-12 * scale;
    let mut start = 0;
    while start < pairs.len() {
        let mut end = start + 1;
        while end < pairs.len() && (pairs[start].value - pairs[end].value).abs() <= tie {
            end += 1;
        }
        if end - start > 1 {
            pairs[start..end].sort_by(|a, b| lex_cmp(&b.vector, &a.vector));
        }
        start = end;
    }
}

fn lex_cmp(a: &[f64], b: &[f64]) -> std::cmp::Ordering {
    for (x, y) in a.iter().zip(b) {
        match x.total_cmp(y) {
            std::cmp::Ordering::Equal => continue,
            o => return o,
        }
    }
    std::cmp::Ordering::Equal
}

/// Cyclic Jacobi. Returns (values, row-major eigenvector matrix with vectors in columns).
fn jacobi(m: &SymMatrix) -> (Vec<f64>, Vec<f64>) {
    let d = m.dim();
    let mut a = m.as_slice().to_vec();
    let mut v = vec![0.0; d * d];
    for i in 0..d {
        v[i * d + i] = 1.0;
    }
    let fro2: f64 = a.iter().map(|x| x * x).sum();
    if fro2 == 0.0 {
        return (vec![0.0; d], v);
    }

    for _sweep in 0..100 {
        let off: f64 = (0..d)
            .flat_map(|p| ((p + 1)..d).map(move |q| (p, q)))
            .map(|(p, q)| a[p * d + q] * a[p * d + q])
            .sum();
        if off <= 1e-32 * fro2 {
            break;
        }
        for p in 0..d {
            for q in (p + 1)..d {
                let apq = a[p * d + q];
                if apq.abs() < f64::MIN_POSITIVE {
                    continue;
                }
                let theta = (a[q * d + q] - a[p * d + p]) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..d {
                    let akp = a[k * d + p];
                    let akq = a[k * d + q];
                    a[k * d + p] = c * akp - s * akq;
                    a[k * d + q] = s * akp + c * akq;
                }
                for k in 0..d {
                    let apk = a[p * d + k];
                    let aqk = a[q * d + k];
                    a[p * d + k] = c * apk - s * aqk;
                    a[q * d + k] = s * apk + c * aqk;
                }
                a[p * d + q] = 0.0;
                a[q * d + p] = 0.0;
                for k in 0..d {
                    let vkp = v[k * d + p];
                    let vkq = v[k * d + q];
                    v[k * d + p] = c * vkp - s * vkq;
                    v[k * d + q] = s * vkp + c * vkq;
                }
            }
        }
    }
    ((0..d).map(|i| a[i * d + i]).collect(), v)
}

/// Householder tridiagonalization + implicit QL (EISPACK tred2/tql2 lineage).
/// `None` if QL fails to converge, which should not happen for finite input.
fn tridiagonal_ql(m: &SymMatrix) -> Option<(Vec<f64>, Vec<f64>)> {
    let n = m.dim();
    let mut v = m.as_slice().to_vec();
    let mut d = vec![0.0; n];
    let mut e = vec![0.0; n];
    let at = |i: usize, j: usize| i * n + j;

    // tred2
    for j in 0..n {
        d[j] = v[at(n - 1, j)];
    }
    for i in (1..n).rev() {
        let mut scale = 0.0;
        let mut h = 0.0;
        for k in 0..i {
            scale += d[k].abs();
        }
        if scale == 0.0 {
            e[i] = d[i - 1];
            for j in 0..i {
                d[j] = v[at(i - 1, j)];
                v[at(i, j)] = 0.0;
                v[at(j, i)] = 0.0;
            }
        } else {
            for k in 0..i {
                d[k] /= scale;
                h += d[k] * d[k];
            }
            let mut f = d[i - 1];
            let mut g = h.sqrt();
            if f > 0.0 {
                g = -g;
            }
            e[i] = scale * g;
            h -= f * g;
            d[i - 1] = f - g;
            for ej in e.iter_mut().take(i) {
                *ej = 0.0;
            }
            for j in 0..i {
                f = d[j];
                v[at(j, i)] = f;
                g = e[j] + v[at(j, j)] * f;
                for k in (j + 1)..i {
                    g += v[at(k, j)] * d[k];
                    e[k] += v[at(k, j)] * f;
                }
                e[j] = g;
            }
            f = 0.0;
            for j in 0..i {
                e[j] /= h;
                f += e[j] * d[j];
            }
            let hh = f / (h + h);
            for j in 0..i {
                e[j] -= hh * d[j];
            }
            for j in 0..i {
                f = d[j];
                g = e[j];
                for k in j..i {
                    v[at(k, j)] -= f * e[k] + g * d[k];
                }
                d[j] = v[at(i - 1, j)];
                v[at(i, j)] = 0.0;
            }
        }
        d[i] = h;
    }
    for i in 0..n.saturating_sub(1) {
        v[at(n - 1, i)] = v[at(i, i)];
        v[at(i, i)] = 1.0;
        let h = d[i + 1];
        if h != 0.0 {
            for k in 0..=i {
                d[k] = v[at(k, i + 1)] / h;
            }
            for j in 0..=i {
                let mut g = 0.0;
                for k in 0..=i {
                    g += v[at(k, i + 1)] * v[at(k, j)];
                }
                for k in 0..=i {
                    v[at(k, j)] -= g * d[k];
                }
            }
        }
        for k in 0..=i {
            v[at(k, i + 1)] = 0.0;
        }
    }
    for j in 0..n {
        d[j] = v[at(n - 1, j)];
        v[at(n - 1, j)] = 0.0;
    }
    v[at(n - 1, n - 1)] = 1.0;
    e[0] = 0.0;

    // tql2
    for i in 1..n {
        e[i - 1] = e[i];
    }
    e[n - 1] = 0.0;
    let mut f = 0.0;
    let mut tst1: f64 = 0.0;
    let eps = f64::EPSILON;
    for l in 0..n {
        tst1 = tst1.max(d[l].abs() + e[l].abs());
        let mut mm = l;
        while mm < n {
            if e[mm].abs() <= eps * tst1 {
                break;
            }
            mm += 1;
        }
        if mm > l {
            let mut iter = 0;
            loop {
                iter += 1;
                if iter > 60 {
                    return None;
                }
                let mut g = d[l];
                let mut p = (d[l + 1] - g) / (2.0 * e[l]);
                let mut r = p.hypot(1.0);
                if p < 0.0 {
                    r = -r;
                }
                d[l] = e[l] / (p + r);
                d[l + 1] = e[l] * (p + r);
                let dl1 = d[l + 1];
                let mut h = g - d[l];
                for di in d.iter_mut().skip(l + 2) {
                    *di -= h;
                }
                f += h;

                p = d[mm];
                let mut c = 1.0;
                let mut c2 = c;
                let mut c3 = c;
                let el1 = e[l + 1];
                let mut s = 0.0;
                let mut s2 = 0.0;
                for i in (l..mm).rev() {
                    c3 = c2;
                    c2 = c;
                    s2 = s;
                    g = c * e[i];
                    h = c * p;
                    r = p.hypot(e[i]);
                    e[i + 1] = s * r;
                    s = e[i] / r;
                    c = p / r;
                    p = c * d[i] - s * g;
                    d[i + 1] = h + s * (c * g + s * d[i]);
                    for k in 0..n {
                        h = v[at(k, i + 1)];
                        v[at(k, i + 1)] = s * v[at(k, i)] + c * h;
                        v[at(k, i)] = c * v[at(k, i)] - s * h;
                    }
                }
                p = -s * s2 * c3 * el1 * e[l] / dl1;
                e[l] = s * p;
                d[l] = c * p;
                if e[l].abs() <= eps * tst1 {
                    break;
                }
            }
        }
        d[l] += f;
        e[l] = 0.0;
    }
    Some((d, v))
}

/// Dominant eigenpair by power iteration.
///
/// Starts from the normalized all-ones vector. If that start is annihilated by
/// `M` (it lies in the null space, so the iteration stagnates at once), a fixed
/// seeded Gaussian vector is used instead. If the iteration settles on a
/// negative eigenvalue the run is repeated on `M + |λ|·I` so the result is the
/// largest eigenvalue, matching the first pair of [`sym_eigen`].
pub fn power_leading(m: &SymMatrix, tol: f64, max_iter: usize) -> Result<EigenPair> {
    if !(tol > 0.0) {
        return Err(Error::invalid("tol must be positive"));
    }
    if !m.is_finite() {
        return Err(Error::invalid("matrix has non-finite entries"));
    }
    let d = m.dim();
    let fro = frobenius_norm(m);
    if fro == 0.0 {
        let mut vector = vec![0.0; d];
        vector[0] = 1.0;
        return Ok(EigenPair { value: 0.0, vector });
    }

    let ones = vec![1.0 / (d as f64).sqrt(); d];
    let start = if norm2(&m.mul_vec(&ones)) <= 1e-14 * fro {
        let mut rng = ChaCha8Rng::seed_from_u64(FALLBACK_SEED);
        let mut r: Vec<f64> = (0..d).map(|_| rng.random::<f64>() - 0.5).collect();
        let n = norm2(&r);
        r.iter_mut().for_each(|x| *x /= n);
        r
    } else {
        ones
    };

    let pair = power_from(m, start.clone(), 0.0, tol, max_iter)?;
    if pair.value >= 0.0 {
        return Ok(pair);
    }
    let shift = pair.value.abs();
    power_from(m, start, shift, tol, max_iter)
}

fn power_from(
    m: &SymMatrix,
    mut v: Vec<f64>,
    shift: f64,
    tol: f64,
    max_iter: usize,
) -> Result<EigenPair> {
    let apply = |v: &[f64]| -> Vec<f64> {
        let mut w = m.mul_vec(v);
        if shift != 0.0 {
            w.iter_mut().zip(v).for_each(|(wi, vi)| *wi += shift * vi);
        }
        w
    };
    let mut delta = f64::INFINITY;
    for _ in 0..max_iter {
        let w = apply(&v);
        let n = norm2(&w);
        if n == 0.0 {
            break;
        }
        let next: Vec<f64> = w.iter().map(|x| x / n).collect();
        // A negative dominant eigenvalue flips the sign every step.
        let same = next.iter().zip(&v).map(|(a, b)| (a - b) * (a - b)).sum::<f64>();
        let flip = next.iter().zip(&v).map(|(a, b)| (a + b) * (a + b)).sum::<f64>();
        delta = same.min(flip).sqrt();
        v = next;
        if delta <= tol {
            canonicalize_sign(&mut v);
            let value = m.quad_form(&v);
            return Ok(EigenPair { value, vector: v });
        }
    }
    canonicalize_sign(&mut v);
    let value = m.quad_form(&v);
    Err(Error::NotConverged {
        routine: "power_leading",
        iterations: max_iter,
        residual: delta,
        last: Box::new(LastIterate::Eigen(EigenPair { value, vector: v })),
    })
}

/// `max |λ|`.
pub fn spectral_norm(m: &SymMatrix) -> Result<f64> {
    let values = sym_eigenvalues(m)?;
    Ok(values.iter().fold(0.0, |acc: f64, x| acc.max(x.abs())))
}

pub fn frobenius_norm(m: &SymMatrix) -> f64 {
    m.as_slice().iter().map(|x| x * x).sum::<f64>().sqrt()
}

pub fn max_norm(m: &SymMatrix) -> f64 {
    m.as_slice().iter().fold(0.0, |acc: f64, x| acc.max(x.abs()))
}

/// `out += Rᵀ R` where `R` is `rows × d` row-major and `out` is `d × d`.
pub(crate) fn gram_accumulate(r: &[f64], rows: usize, d: usize, out: &mut [f64]) {
    debug_assert_eq!(r.len(), rows * d);
    debug_assert_eq!(out.len(), d * d);
    if rows == 0 {
        return;
    }
    // SAFETY: slice lengths match the declared shapes and strides.
    unsafe {
        matrixmultiply::dgemm(
            d,
            rows,
            d,
            1.0,
            r.as_ptr(),
            1,
            d as isize,
            r.as_ptr(),
            d as isize,
            1,
            1.0,
            out.as_mut_ptr(),
            d as isize,
            1,
        );
    }
}
