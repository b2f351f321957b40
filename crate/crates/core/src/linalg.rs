//! Dense linear-algebra helpers shared by the estimators, the bound and the receiver.
//!
//! All explicit matrix inverses in the signal model are carried out as
//! Cholesky solves. When a factorization fails, or its diagonal ratio shows a
//! condition number above [`RIDGE_CONDITION_LIMIT`], a ridge of
//! `RIDGE_SCALE * trace / n` is added and the solve is flagged.

use nalgebra::{Cholesky, ComplexField, DMatrix, DVector, Dyn};
use num_complex::Complex64;

use crate::error::{dim_err, Error, Result};

pub type C64 = Complex64;
pub type CMat = DMatrix<C64>;
pub type CVec = DVector<C64>;
pub type RMat = DMatrix<f64>;
pub type RVec = DVector<f64>;

/// The imaginary unit.
pub const J: C64 = C64::new(0.0, 1.0);

pub const RIDGE_CONDITION_LIMIT: f64 = 1e12;
pub const RIDGE_SCALE: f64 = 1e-10;

/// Cholesky factor of a Hermitian (or real symmetric) positive definite matrix.
#[derive(Clone, Debug)]
pub struct SpdSolver<T: ComplexField<RealField = f64>> {
    chol: Cholesky<T, Dyn>,
    /// `Lᵀ`, so that each row of `L` is a contiguous column here.
    lt: DMatrix<T>,
    ridged: bool,
}

pub type HermitianSolver = SpdSolver<C64>;
pub type SymmetricSolver = SpdSolver<f64>;

impl<T: ComplexField<RealField = f64>> SpdSolver<T> {
    pub fn new(m: DMatrix<T>, what: &'static str) -> Result<Self> {
        let n = m.nrows();
        if n != m.ncols() {
            return Err(dim_err(format!("{what}: {}x{} is not square", n, m.ncols())));
        }
        let trace: f64 = (0..n).map(|i| m[(i, i)].clone().real()).sum();
        if !trace.is_finite() {
            return Err(Error::NonFinite(what));
        }
        if let Some(chol) = Cholesky::new(m.clone()) {
            if condition_estimate(&chol) <= RIDGE_CONDITION_LIMIT {
                return Ok(Self::from_factor(chol, false));
            }
        }
        let tau = RIDGE_SCALE * trace.abs().max(f64::MIN_POSITIVE) / n.max(1) as f64;
        let mut ridged = m;
        for i in 0..n {
            ridged[(i, i)] += T::from_real(tau);
        }
        Cholesky::new(ridged)
            .map(|chol| Self::from_factor(chol, true))
            .ok_or(Error::NotPositiveDefinite(what))
    }

    fn from_factor(chol: Cholesky<T, Dyn>, ridged: bool) -> Self {
        let lt = chol.l_dirty().transpose();
        Self { chol, lt, ridged }
    }

    /// Forward substitution `L x = b` in place.
    fn lower_solve_in_place(&self, b: &mut [T]) {
        let n = b.len();
        for i in 0..n {
            let row = &self.lt.as_slice()[i * n..i * n + i];
            // Four partial sums break the floating-point add dependency chain.
            let mut acc = [T::zero(), T::zero(), T::zero(), T::zero()];
            let mut lc = row.chunks_exact(4);
            let mut xc = b[..i].chunks_exact(4);
            for (l, x) in (&mut lc).zip(&mut xc) {
                for k in 0..4 {
                    acc[k] += l[k].clone() * x[k].clone();
                }
            }
            for (l, x) in lc.remainder().iter().zip(xc.remainder()) {
                acc[0] += l.clone() * x.clone();
            }
            let [a0, a1, a2, a3] = acc;
            b[i] = (b[i].clone() - ((a0 + a1) + (a2 + a3))) / self.lt[(i, i)].clone();
        }
    }

    pub fn dim(&self) -> usize {
        self.chol.l_dirty().nrows()
    }

    /// Whether a ridge had to be added before the factorization succeeded.
    pub fn ridged(&self) -> bool {
        self.ridged
    }

    pub fn solve(&self, b: &DMatrix<T>) -> DMatrix<T> {
        self.chol.solve(b)
    }

    pub fn solve_vec(&self, b: &DVector<T>) -> DVector<T> {
        self.chol.solve(b)
    }

    /// `L⁻¹ b` where `A = L Lᴴ`.
    pub fn whiten(&self, b: &DMatrix<T>) -> DMatrix<T> {
        assert_eq!(b.nrows(), self.dim(), "whiten: row count mismatch");
        let mut out = b.clone();
        let n = self.dim();
        if n > 0 {
            for col in out.as_mut_slice().chunks_exact_mut(n) {
                self.lower_solve_in_place(col);
            }
        }
        out
    }

    pub fn whiten_vec(&self, b: &DVector<T>) -> DVector<T> {
        assert_eq!(b.len(), self.dim(), "whiten: length mismatch");
        let mut out = b.clone();
        self.lower_solve_in_place(out.as_mut_slice());
        out
    }

    /// `bᴴ A⁻¹ b`.
    pub fn quad_form(&self, b: &DVector<T>) -> f64 {
        self.whiten_vec(b).norm_squared()
    }

    pub fn log_det(&self) -> f64 {
        let l = self.chol.l_dirty();
        (0..l.nrows()).map(|i| 2.0 * l[(i, i)].clone().modulus().ln()).sum()
    }

    pub fn inverse(&self) -> DMatrix<T> {
        self.chol.inverse()
    }
}

fn condition_estimate<T: ComplexField<RealField = f64>>(chol: &Cholesky<T, Dyn>) -> f64 {
    let l = chol.l_dirty();
    let (mut lo, mut hi) = (f64::INFINITY, 0.0_f64);
    for i in 0..l.nrows() {
        let d = l[(i, i)].clone().modulus();
        lo = lo.min(d);
        hi = hi.max(d);
    }
    if lo == 0.0 {
        f64::INFINITY
    } else {
        (hi / lo).powi(2)
    }
}

/// Generalized least squares `argmin_x (y − A x)ᴴ Σ⁻¹ (y − A x)` for a whitened
/// design. Returns the solution and whether the normal equations were ridged.
pub fn whitened_least_squares(design: &CMat, y: &CVec) -> Result<(CVec, bool)> {
    if design.nrows() != y.len() {
        return Err(dim_err(format!(
            "design has {} rows, observation has {}",
            design.nrows(),
            y.len()
        )));
    }
    let normal = design.adjoint() * design;
    let rhs = design.adjoint() * y;
    let solver = HermitianSolver::new(normal, "normal equations")?;
    Ok((solver.solve_vec(&rhs), solver.ridged()))
}

/// Generalized least squares with a full noise covariance factor.
pub fn gls(design: &CMat, y: &CVec, cov: &HermitianSolver) -> Result<(CVec, bool)> {
    let (x, ridged) = whitened_least_squares(&cov.whiten(design), &cov.whiten_vec(y))?;
    Ok((x, ridged || cov.ridged()))
}

/// `[e^{j2πmφ/n}]_{m=0..n-1}`, the diagonal of the CFO matrix.
pub fn phase_ramp(n: usize, phi: f64) -> CVec {
    CVec::from_fn(n, |m, _| {
        C64::from_polar(1.0, 2.0 * std::f64::consts::PI * m as f64 * phi / n as f64)
    })
}

/// `[e^{jθ_m}]`, the diagonal of the phase-noise matrix.
pub fn phasors(theta: &RVec) -> CVec {
    theta.map(|t| C64::from_polar(1.0, t))
}

/// `Diag(d) · M`.
pub fn scale_rows(d: &CVec, m: &CMat) -> CMat {
    let mut out = m.clone();
    for (i, mut row) in out.row_iter_mut().enumerate() {
        row *= d[i];
    }
    out
}

/// `Diag(d) · M · Diag(d)ᴴ`.
pub fn diag_sandwich(d: &CVec, m: &CMat) -> CMat {
    CMat::from_fn(m.nrows(), m.ncols(), |i, j| d[i] * m[(i, j)] * d[j].conj())
}

/// Full linear convolution of two tap vectors.
pub fn convolve(a: &CVec, b: &CVec) -> CVec {
    if a.is_empty() || b.is_empty() {
        return CVec::zeros(0);
    }
    let mut out = CVec::zeros(a.len() + b.len() - 1);
    for (i, &ai) in a.iter().enumerate() {
        for (k, &bk) in b.iter().enumerate() {
            out[i + k] += ai * bk;
        }
    }
    out
}

/// Symmetrize in place: `(A + Aᴴ) / 2`.
pub fn hermitize(m: &mut CMat) {
    let n = m.nrows();
    for i in 0..n {
        m[(i, i)].im = 0.0;
        for j in (i + 1)..n {
            let v = (m[(i, j)] + m[(j, i)].conj()) * 0.5;
            m[(i, j)] = v;
            m[(j, i)] = v.conj();
        }
    }
}

pub fn symmetrize(m: &mut RMat) {
    let n = m.nrows();
    for i in 0..n {
        for j in (i + 1)..n {
            let v = 0.5 * (m[(i, j)] + m[(j, i)]);
            m[(i, j)] = v;
            m[(j, i)] = v;
        }
    }
}

/// Moore–Penrose pseudo-inverse of a real symmetric matrix through its
/// eigendecomposition; eigenvalues below `rel_tol * max|λ|` are dropped.
pub fn symmetric_pinv(m: &RMat, rel_tol: f64) -> RMat {
    let eig = m.clone().symmetric_eigen();
    let max = eig.eigenvalues.iter().fold(0.0_f64, |a, &v| a.max(v.abs()));
    let cut = rel_tol * max;
    let n = m.nrows();
    let mut out = RMat::zeros(n, n);
    for (k, &lambda) in eig.eigenvalues.iter().enumerate() {
        if lambda.abs() > cut && lambda.abs() > 0.0 {
            let u = eig.eigenvectors.column(k);
            out += (u * u.transpose()) / lambda;
        }
    }
    out
}
