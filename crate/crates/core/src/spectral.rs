//! Spectral decomposition of a known correlation matrix and the principal
//! factor approximation (PFA) built on it.
//!
//! With eigenpairs `(λ_j, ρ_j)` sorted by decreasing eigenvalue, the first `k`
//! pairs define the loading matrix `G_k = (√λ_1 ρ_1, …, √λ_k ρ_k)`. An
//! observation `Z ~ N(μ, Σ)` then splits into `μ + G_k w + v`, where the minor
//! vector `v` is only weakly dependent once `k` is large enough.

use crate::error::{ensure_finite, invalid, Result};
use crate::linalg;

const SYMMETRY_TOL: f64 = 1e-12;
const DIAGONAL_TOL: f64 = 1e-10;
const ENTRY_TOL: f64 = 1e-10;
const PSD_TOL: f64 = 1e-8;
const ORTHONORMAL_TOL: f64 = 1e-8;

/// Relative slack when testing the weak-dependence bound, so that boundary
/// cases such as the identity matrix are not decided by the last ulp.
const BOUND_SLACK: f64 = 1e-12;

/// A validated dense correlation matrix, stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct CorrelationMatrix {
    dim: usize,
    data: Vec<f64>,
}

impl CorrelationMatrix {
    pub fn new(dim: usize, data: Vec<f64>) -> Result<Self> {
        if dim == 0 {
            return Err(invalid("correlation matrix must have positive dimension"));
        }
        if data.len() != dim * dim {
            return Err(invalid(format!(
                "correlation matrix data has {} entries, expected {}x{}",
                data.len(),
                dim,
                dim
            )));
        }
        ensure_finite("sigma", &data)?;
        for i in 0..dim {
            let diag = data[i * dim + i];
            if (diag - 1.0).abs() > DIAGONAL_TOL {
                return Err(invalid(format!(
                    "diagonal entry ({i},{i}) = {diag} is not 1"
                )));
            }
            for j in 0..i {
                let (a, b) = (data[i * dim + j], data[j * dim + i]);
                if (a - b).abs() > SYMMETRY_TOL {
                    return Err(invalid(format!(
                        "matrix is not symmetric at ({i},{j}): {a} vs {b}"
                    )));
                }
                if a.abs() > 1.0 + ENTRY_TOL {
                    return Err(invalid(format!(
                        "entry ({i},{j}) = {a} lies outside [-1, 1]"
                    )));
                }
            }
        }
        Ok(Self { dim, data })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let dim = rows.len();
        if let Some((i, r)) = rows.iter().enumerate().find(|(_, r)| r.len() != dim) {
            return Err(invalid(format!(
                "row {i} has {} entries but the matrix has {dim} rows",
                r.len()
            )));
        }
        Self::new(dim, rows.concat())
    }

    pub fn identity(dim: usize) -> Self {
        let mut data = vec![0.0; dim * dim];
        for i in 0..dim {
            data[i * dim + i] = 1.0;
        }
        Self { dim, data }
    }

    /// `Σ_ij = rho` for `i ≠ j`.
    pub fn equicorrelation(dim: usize, rho: f64) -> Result<Self> {
        let mut data = vec![rho; dim * dim];
        for i in 0..dim {
            data[i * dim + i] = 1.0;
        }
        Self::new(dim, data)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.dim + j]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|x| x * x).sum::<f64>().sqrt()
    }

    /// `P Σ P^T` where `perm[i]` is the source index of new coordinate `i`.
    pub fn permuted(&self, perm: &[usize]) -> Result<Self> {
        let n = self.dim;
        if perm.len() != n {
            return Err(invalid("permutation length does not match dimension"));
        }
        let mut data = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..n {
                data[i * n + j] = self.get(perm[i], perm[j]);
            }
        }
        Self::new(n, data)
    }
}

/// Eigenvalues in non-increasing order with matching orthonormal eigenvectors.
#[derive(Debug, Clone, PartialEq)]
pub struct SymmetricSpectrum {
    dim: usize,
    values: Vec<f64>,
    /// Row `j` is the eigenvector for `values[j]`.
    vectors: Vec<f64>,
}

impl SymmetricSpectrum {
    /// Assemble a spectrum from known eigenpairs. `vectors` holds one
    /// eigenvector per row.
    pub fn from_parts(values: Vec<f64>, vectors: Vec<f64>) -> Result<Self> {
        let dim = values.len();
        if vectors.len() != dim * dim {
            return Err(invalid(
                "eigenvector buffer does not match the number of eigenvalues",
            ));
        }
        ensure_finite("eigenvalues", &values)?;
        ensure_finite("eigenvectors", &vectors)?;
        if values.windows(2).any(|w| w[0] < w[1]) {
            return Err(invalid(
                "eigenvalues must be sorted in non-increasing order",
            ));
        }
        let spectrum = Self {
            dim,
            values,
            vectors,
        };
        let err = spectrum.orthonormality_error();
        if err > ORTHONORMAL_TOL {
            return Err(invalid(format!(
                "eigenvectors are not orthonormal (error {err:.3e})"
            )));
        }
        Ok(spectrum)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn eigenvalues(&self) -> &[f64] {
        &self.values
    }

    /// Eigenvalue `j`, with negative round-off clamped to zero.
    pub fn clamped_eigenvalue(&self, j: usize) -> f64 {
        self.values[j].max(0.0)
    }

    pub fn eigenvector(&self, j: usize) -> &[f64] {
        &self.vectors[j * self.dim..(j + 1) * self.dim]
    }

    /// `max_ij |V^T V - I|`.
    pub fn orthonormality_error(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for a in 0..self.dim {
            for b in a..self.dim {
                let g: f64 = self
                    .eigenvector(a)
                    .iter()
                    .zip(self.eigenvector(b))
                    .map(|(x, y)| x * y)
                    .sum();
                let target = if a == b { 1.0 } else { 0.0 };
                worst = worst.max((g - target).abs());
            }
        }
        worst
    }

    /// `‖Σ - V Λ V^T‖_F`.
    pub fn reconstruction_error(&self, sigma: &CorrelationMatrix) -> f64 {
        let n = self.dim;
        let mut acc = 0.0;
        for i in 0..n {
            for j in 0..n {
                let approx: f64 = (0..n)
                    .map(|k| self.values[k] * self.vectors[k * n + i] * self.vectors[k * n + j])
                    .sum();
                let diff = sigma.get(i, j) - approx;
                acc += diff * diff;
            }
        }
        acc.sqrt()
    }

    /// `Σ^{1/2} x` using the symmetric square root `V Λ^{1/2} V^T` (clamped).
    pub fn sqrt_apply(&self, x: &[f64]) -> Vec<f64> {
        let n = self.dim;
        let mut out = vec![0.0; n];
        for j in 0..n {
            let lam = self.clamped_eigenvalue(j);
            if lam == 0.0 {
                continue;
            }
            let v = self.eigenvector(j);
            let coef = lam.sqrt() * v.iter().zip(x).map(|(a, b)| a * b).sum::<f64>();
            for (o, vi) in out.iter_mut().zip(v) {
                *o += coef * vi;
            }
        }
        out
    }
}

/// Eigendecomposition of a correlation matrix.
///
/// Eigenvalues are sorted non-increasing (ties keep solver order) and each
/// eigenvector is signed so that its largest-magnitude entry is positive.
pub fn eigh_sym(sigma: &CorrelationMatrix) -> Result<SymmetricSpectrum> {
    let n = sigma.dim();
    let raw = linalg::symmetric_eigen(sigma.as_slice().to_vec(), n)?;

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| raw.values[b].total_cmp(&raw.values[a]).then(a.cmp(&b)));

    let mut values = Vec::with_capacity(n);
    let mut vectors = Vec::with_capacity(n * n);
    for &src in &order {
        values.push(raw.values[src]);
        let v = &raw.vectors[src * n..(src + 1) * n];
        let mut pivot = 0;
        for (i, x) in v.iter().enumerate() {
            if x.abs() > v[pivot].abs() {
                pivot = i;
            }
        }
        if v[pivot] < 0.0 {
            vectors.extend(v.iter().map(|x| -x));
        } else {
            vectors.extend_from_slice(v);
        }
    }

    let floor = -PSD_TOL * values.first().copied().unwrap_or(1.0).max(1.0);
    if let Some(&min) = values.last() {
        if min < floor {
            return Err(invalid(format!(
                "correlation matrix is not positive semidefinite (smallest eigenvalue {min:.3e})"
            )));
        }
    }
    Ok(SymmetricSpectrum {
        dim: n,
        values,
        vectors,
    })
}

/// Outcome of the factor-count search.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FactorCount {
    pub k: usize,
    /// `m^{-1} sqrt(Σ_{j>k} λ_j²)` at the returned `k`.
    pub tail_norm: f64,
    /// `m^{-δ}`.
    pub bound: f64,
    /// False only when even `k = m - 1` misses the bound.
    pub satisfied: bool,
}

/// Smallest `k ∈ [0, m-1]` with `m^{-1} sqrt(λ_{k+1}² + … + λ_m²) ≤ m^{-δ}`.
pub fn choose_k(spectrum: &SymmetricSpectrum, delta: f64) -> Result<FactorCount> {
    if !(delta > 0.0 && delta < 1.0) {
        return Err(invalid(format!("delta must lie in (0, 1), got {delta}")));
    }
    let m = spectrum.dim();
    if m == 0 {
        return Err(invalid("empty spectrum"));
    }
    let mf = m as f64;
    let bound = mf.powf(-delta);
    // tail[k] = Σ_{j >= k} λ_j², accumulated from the smallest eigenvalue up.
    let mut tail = vec![0.0; m + 1];
    for j in (0..m).rev() {
        let lam = spectrum.clamped_eigenvalue(j);
        tail[j] = tail[j + 1] + lam * lam;
    }
    for k in 0..m {
        let tail_norm = tail[k].sqrt() / mf;
        if tail_norm <= bound * (1.0 + BOUND_SLACK) {
            return Ok(FactorCount {
                k,
                tail_norm,
                bound,
                satisfied: true,
            });
        }
    }
    Ok(FactorCount {
        k: m - 1,
        tail_norm: tail[m - 1].sqrt() / mf,
        bound,
        satisfied: false,
    })
}

/// Principal factor approximation with `k` factors.
#[derive(Debug, Clone, PartialEq)]
pub struct PfaDecomposition {
    dim: usize,
    k: usize,
    /// `√λ_j` for the retained factors (eigenvalues clamped at zero).
    factor_sd: Vec<f64>,
    /// Row `j` is `ρ_j`.
    directions: Vec<f64>,
    /// Row `j` is `√λ_j ρ_j`, i.e. column `j` of `G_k`.
    loadings: Vec<f64>,
    sigma_major_sq: Vec<f64>,
    minor_sd: Vec<f64>,
    a_min: f64,
    gamma_m: f64,
    delta: Option<f64>,
}

/// Split the spectrum into `k` major factors and the minor remainder.
pub fn build_pfa(spectrum: &SymmetricSpectrum, k: usize) -> Result<PfaDecomposition> {
    let m = spectrum.dim();
    if m == 0 || k >= m {
        return Err(invalid(format!(
            "factor count k = {k} must lie in [0, {}]",
            m.saturating_sub(1)
        )));
    }
    let mut factor_sd = Vec::with_capacity(k);
    let mut directions = Vec::with_capacity(k * m);
    let mut loadings = Vec::with_capacity(k * m);
    let mut sigma_major_sq = vec![0.0; m];
    for j in 0..k {
        let lam = spectrum.clamped_eigenvalue(j);
        let sd = lam.sqrt();
        let rho = spectrum.eigenvector(j);
        factor_sd.push(sd);
        directions.extend_from_slice(rho);
        loadings.extend(rho.iter().map(|r| sd * r));
        for (s, r) in sigma_major_sq.iter_mut().zip(rho) {
            *s += lam * r * r;
        }
    }
    let minor_sd: Vec<f64> = sigma_major_sq
        .iter()
        .map(|s| (1.0 - s).max(0.0).sqrt())
        .collect();
    let max_sd = minor_sd.iter().copied().fold(0.0, f64::max);
    let a_min = if max_sd > 0.0 {
        1.0 / max_sd
    } else {
        f64::INFINITY
    };
    let gamma_m = max_sd * (2.0 * (m as f64).ln()).sqrt();
    Ok(PfaDecomposition {
        dim: m,
        k,
        factor_sd,
        directions,
        loadings,
        sigma_major_sq,
        minor_sd,
        a_min,
        gamma_m,
        delta: None,
    })
}

/// `choose_k` followed by `build_pfa`, remembering the `δ` that produced `k`.
pub fn pfa_for_delta(
    spectrum: &SymmetricSpectrum,
    delta: f64,
) -> Result<(PfaDecomposition, FactorCount)> {
    let count = choose_k(spectrum, delta)?;
    let mut pfa = build_pfa(spectrum, count.k)?;
    pfa.delta = Some(delta);
    Ok((pfa, count))
}

impl PfaDecomposition {
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn factor_sd(&self) -> &[f64] {
        &self.factor_sd
    }

    pub fn direction(&self, j: usize) -> &[f64] {
        &self.directions[j * self.dim..(j + 1) * self.dim]
    }

    /// Column `j` of `G_k`.
    pub fn loading(&self, j: usize) -> &[f64] {
        &self.loadings[j * self.dim..(j + 1) * self.dim]
    }

    /// Variance `σ_i²` of each entry of the major vector.
    pub fn sigma_major_sq(&self) -> &[f64] {
        &self.sigma_major_sq
    }

    /// Standard deviation `a_i^{-1}` of each entry of the minor vector.
    pub fn minor_sd(&self) -> &[f64] {
        &self.minor_sd
    }

    /// `a_(1) = min_i a_i`; infinite when every minor standard deviation is 0.
    pub fn a_min(&self) -> f64 {
        self.a_min
    }

    /// `a_(1)^{-1} sqrt(2 log m)`, the rough maximum of the minor entries.
    pub fn gamma_m(&self) -> f64 {
        self.gamma_m
    }

    pub fn delta(&self) -> Option<f64> {
        self.delta
    }

    /// `G_k w`.
    pub fn apply_loadings(&self, w: &[f64]) -> Vec<f64> {
        assert_eq!(w.len(), self.k, "factor vector length must equal k");
        let mut out = vec![0.0; self.dim];
        for (j, wj) in w.iter().enumerate() {
            for (o, g) in out.iter_mut().zip(self.loading(j)) {
                *o += g * wj;
            }
        }
        out
    }

    /// Projection of `x` onto the span of the retained eigenvectors.
    pub fn project_major(&self, x: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.dim];
        for j in 0..self.k {
            let rho = self.direction(j);
            let c: f64 = rho.iter().zip(x).map(|(a, b)| a * b).sum();
            for (o, r) in out.iter_mut().zip(rho) {
                *o += c * r;
            }
        }
        out
    }
}
