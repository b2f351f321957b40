//! Wiener phase-noise covariance and its Karhunen–Loève truncation `θ ≈ Π η`.

use nalgebra::SymmetricEigen;

use crate::error::{dim_err, Error, Result};
use crate::linalg::{RMat, RVec};

/// `Ψ(r, c) = σ² (min(r, c) + 1)`.
pub fn pn_covariance(n: usize, sigma2: f64) -> Result<RMat> {
    if !(sigma2 >= 0.0) {
        return Err(Error::NegativeVariance(sigma2));
    }
    Ok(RMat::from_fn(n, n, |r, c| sigma2 * (r.min(c) + 1) as f64))
}

/// Closed-form `Ψ⁻¹`: the increments are white, so the precision is
/// `σ⁻²·tridiag(−1, [2 … 2 1], −1)`. `None` when `σ² = 0`.
pub fn pn_precision(n: usize, sigma2: f64) -> Result<Option<RMat>> {
    if !(sigma2 >= 0.0) {
        return Err(Error::NegativeVariance(sigma2));
    }
    if sigma2 == 0.0 {
        return Ok(None);
    }
    let s = 1.0 / sigma2;
    Ok(Some(RMat::from_fn(n, n, |r, c| {
        if r == c {
            if r + 1 == n {
                s
            } else {
                2.0 * s
            }
        } else if r.abs_diff(c) == 1 {
            -s
        } else {
            0.0
        }
    })))
}

#[derive(Clone, Debug, PartialEq)]
pub struct PnBasis {
    /// `Π = Ũ·diag(√ν)`, N×M.
    pub pi: RMat,
    /// All eigenvalues of Ψ, descending.
    pub eigvals: RVec,
    /// All eigenvectors of Ψ in the same order, sign-normalized.
    pub eigvecs: RMat,
    pub m: usize,
}

/// Eigen-decompose `psi` and keep the `m` dominant directions.
///
/// Eigenvectors are ordered by decreasing eigenvalue and flipped so that
/// their largest-magnitude entry is positive, which keeps `Π` reproducible.
pub fn build_basis(psi: &RMat, m: usize) -> Result<PnBasis> {
    let n = psi.nrows();
    if psi.ncols() != n {
        return Err(dim_err("covariance must be square"));
    }
    if m == 0 || m > n {
        return Err(dim_err(format!("subspace dimension {m} outside 1..={n}")));
    }
    if psi.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("phase-noise covariance"));
    }
    let eig = SymmetricEigen::new(psi.clone());
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));

    let scale = eig.eigenvalues.iter().fold(0.0_f64, |a, v| a.max(v.abs()));
    let tol = 1e-10 * scale.max(f64::MIN_POSITIVE) * n as f64;
    let min = eig.eigenvalues.min();
    if min < -tol {
        return Err(Error::NotPositiveSemidefinite(min));
    }

    let eigvals = RVec::from_fn(n, |i, _| eig.eigenvalues[order[i]].max(0.0));
    let mut eigvecs = RMat::zeros(n, n);
    for (dst, &src) in order.iter().enumerate() {
        let mut col = eig.eigenvectors.column(src).into_owned();
        let lead = col.iter().fold(0.0_f64, |best, &v| if v.abs() > best.abs() { v } else { best });
        if lead < 0.0 {
            col.neg_mut();
        }
        eigvecs.set_column(dst, &col);
    }
    let mut pi = eigvecs.columns(0, m).into_owned();
    for k in 0..m {
        pi.column_mut(k).scale_mut(eigvals[k].sqrt());
    }
    Ok(PnBasis { pi, eigvals, eigvecs, m })
}

impl PnBasis {
    /// Basis for a Wiener process of `n` samples.
    pub fn wiener(n: usize, sigma2: f64, m: usize) -> Result<Self> {
        build_basis(&pn_covariance(n, sigma2)?, m)
    }

    pub fn n(&self) -> usize {
        self.pi.nrows()
    }

    /// `θ = Π η`.
    pub fn expand(&self, eta: &RVec) -> Result<RVec> {
        if eta.len() != self.m {
            return Err(dim_err(format!("η has length {}, basis has {}", eta.len(), self.m)));
        }
        Ok(&self.pi * eta)
    }

    /// Least-squares coordinates `Π⁺ θ`; directions with zero variance map to 0.
    pub fn coordinates(&self, theta: &RVec) -> Result<RVec> {
        if theta.len() != self.n() {
            return Err(dim_err("θ length does not match the basis"));
        }
        let u = self.eigvecs.columns(0, self.m);
        let proj = u.transpose() * theta;
        Ok(RVec::from_fn(self.m, |k, _| {
            let s = self.eigvals[k].sqrt();
            if s > 0.0 {
                proj[k] / s
            } else {
                0.0
            }
        }))
    }

    /// Orthogonal projection of `θ` onto the retained subspace.
    pub fn project(&self, theta: &RVec) -> RVec {
        let u = self.eigvecs.columns(0, self.m);
        &u * (u.transpose() * theta)
    }

    /// Fraction of `trace Ψ` captured by the retained eigenvalues.
    pub fn captured_fraction(&self) -> f64 {
        captured_fraction(&self.eigvals, self.m)
    }
}

pub fn captured_fraction(eigvals: &RVec, m: usize) -> f64 {
    let total: f64 = eigvals.iter().sum();
    if total <= 0.0 {
        return 1.0;
    }
    eigvals.iter().take(m).sum::<f64>() / total
}
