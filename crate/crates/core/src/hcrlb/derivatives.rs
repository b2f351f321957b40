//! Derivatives of the observation mean and of the relay-noise covariance with
//! respect to `λ`, and the Gaussian Fisher information built from them.
//!
//! Only `φ_sd`, `θ_sd` and the `g` block move the covariance, so the trace
//! term `Tr[Σ⁻¹ ∂Σ_i Σ⁻¹ ∂Σ_j]` is evaluated on that index set (all pairs,
//! symmetrically). For `θ_sd(m)` the derivative is the rank-two
//! `j(E_m T − T E_m)` with `T = Σ_r − σ²_D I`, which lets the θ–θ block be
//! formed from a handful of N×N products instead of N² dense traces.

use std::f64::consts::PI;

use crate::error::Result;
use crate::linalg::{diag_sandwich, scale_rows, CMat, CVec, HermitianSolver, RMat, C64, J};
use crate::signal_model::{build_g_matrix, convolution_matrix};

use super::{BoundContext, ParamPoint};

fn ramp_weights(n: usize) -> Vec<C64> {
    (0..n).map(|m| J * (2.0 * PI * m as f64 / n as f64)).collect()
}

/// `∂μ/∂λ`, 2N×Q: source-hop rows on top, relay-hop rows below.
pub fn mean_jacobian(ctx: &BoundContext, p: &ParamPoint) -> CMat {
    let n = ctx.n;
    let lay = &ctx.layout;
    let d = p.decode(lay);
    let (rot_s, rot_r) = ctx.rotations(&d);
    let a = C64::from(ctx.alpha);
    let mu_s = ctx.mean_source(&d);
    let mu_r = ctx.mean_relay(&d);
    let w = ramp_weights(n);

    let mut jac = CMat::zeros(2 * n, lay.q());
    for m in 0..n {
        jac[(m, lay.phi_sd())] = w[m] * mu_s[m];
        jac[(m, lay.theta_sd(m))] = J * mu_s[m];
        jac[(n + m, lay.phi_rd())] = w[m] * mu_r[m];
        jac[(n + m, lay.theta_rd(m))] = J * mu_r[m];
    }

    let lg = lay.l_g;
    let lh = lay.l_h;
    let e_top = scale_rows(&(&rot_s * (a * d.ref_c())), &(&ctx.x_s * convolution_matrix(&d.h, lg)));
    let e_bot = scale_rows(&(&rot_r * d.ref_g), &ctx.x_r);
    let k_top = scale_rows(&(&rot_s * (a * d.ref_c())), &(&ctx.x_s * convolution_matrix(&d.g, lh)));
    for r in 0..n {
        jac[(r, lay.g0())] = e_top[(r, 0)];
        jac[(n + r, lay.g0())] = e_bot[(r, 0)];
        jac[(r, lay.h0())] = k_top[(r, 0)];
        for k in 1..lg {
            jac[(r, lay.g_re(k))] = e_top[(r, k)];
            jac[(n + r, lay.g_re(k))] = e_bot[(r, k)];
            jac[(r, lay.g_im(k))] = J * e_top[(r, k)];
            jac[(n + r, lay.g_im(k))] = J * e_bot[(r, k)];
        }
        for k in 1..lh {
            jac[(r, lay.h_re(k))] = k_top[(r, k)];
            jac[(r, lay.h_im(k))] = J * k_top[(r, k)];
        }
    }
    jac
}

/// Covariance derivatives that are not rank-two in `θ`.
#[derive(Clone, Debug)]
pub struct CovarianceDerivatives {
    /// `T = α²σ²_R D G Gᴴ Dᴴ`, the signal-dependent part of `Σ_r`.
    pub t: CMat,
    pub phi: CMat,
    /// One per `g`-block entry, in layout order.
    pub g: Vec<CMat>,
}

pub fn covariance_derivatives(ctx: &BoundContext, p: &ParamPoint) -> Result<CovarianceDerivatives> {
    let n = ctx.n;
    let d = p.decode(&ctx.layout);
    let (rot_s, _) = ctx.rotations(&d);
    let scale = C64::from(ctx.alpha * ctx.alpha * ctx.sim.noise_var_relay);
    let gm = build_g_matrix(&d.g, n)?;
    let t = diag_sandwich(&rot_s, &(&gm * gm.adjoint())) * scale;
    let w = ramp_weights(n);
    let phi = CMat::from_fn(n, n, |a, b| t[(a, b)] * (w[a] - w[b]));

    let lg = ctx.layout.l_g;
    let mut g = Vec::with_capacity(2 * lg - 1);
    let mut re = Vec::with_capacity(lg);
    let mut im = Vec::with_capacity(lg);
    for k in 0..lg {
        // D_k Gᴴ selects rows L_g−1−k … of Gᴴ.
        let pk = gm.columns(lg - 1 - k, n).adjoint();
        let sym = &pk + pk.adjoint();
        re.push(diag_sandwich(&rot_s, &sym) * scale);
        if k > 0 {
            let skew = (&pk - pk.adjoint()) * J;
            im.push(diag_sandwich(&rot_s, &skew) * scale);
        }
    }
    g.extend(re);
    g.extend(im);
    Ok(CovarianceDerivatives { t, phi, g })
}

/// Dense `∂Σ_r/∂θ_sd(m) = j(E_m T − T E_m)`.
pub fn theta_covariance_derivative(t: &CMat, m: usize) -> CMat {
    let n = t.nrows();
    CMat::from_fn(n, n, |a, b| {
        let mut v = C64::new(0.0, 0.0);
        if a == m {
            v += t[(m, b)];
        }
        if b == m {
            v -= t[(a, m)];
        }
        J * v
    })
}

fn trace_product(a: &CMat, b: &CMat) -> f64 {
    let n = a.nrows();
    let mut acc = 0.0;
    for i in 0..n {
        for k in 0..n {
            acc += (a[(i, k)] * b[(k, i)]).re;
        }
    }
    acc
}

/// Gaussian FIM `2 Re(ρᴴ Σ⁻¹ ρ) + Tr[Σ⁻¹ ∂Σ_i Σ⁻¹ ∂Σ_j]` at one point.
pub fn fim_at(ctx: &BoundContext, p: &ParamPoint) -> Result<RMat> {
    let n = ctx.n;
    let lay = &ctx.layout;
    let cov = covariance_derivatives(ctx, p)?;
    let mut sigma = cov.t.clone();
    for i in 0..n {
        sigma[(i, i)] += ctx.sim.noise_var_dest;
    }
    let solver = HermitianSolver::new(sigma, "relay noise covariance")?;

    let jac = mean_jacobian(ctx, p);
    let mut white = CMat::zeros(2 * n, lay.q());
    white.rows_mut(0, n).copy_from(&solver.whiten(&jac.rows(0, n).into_owned()));
    white.rows_mut(n, n).copy_from(&(jac.rows(n, n) / C64::from(ctx.sim.noise_var_dest.sqrt())));
    let mut fim: RMat = (white.adjoint() * &white).map(|z| 2.0 * z.re);

    // Covariance term on {φ_sd, θ_sd, g-block}.
    let s_inv = solver.inverse();
    let mut dense_idx = vec![lay.phi_sd()];
    dense_idx.extend(lay.g_block());
    let dense: Vec<CMat> = std::iter::once(&cov.phi).chain(cov.g.iter()).map(|w| &s_inv * w).collect();

    for (x, &i) in dense_idx.iter().enumerate() {
        for (y, &k) in dense_idx.iter().enumerate().skip(x) {
            let v = trace_product(&dense[x], &dense[y]);
            fim[(i, k)] += v;
            if i != k {
                fim[(k, i)] += v;
            }
        }
    }

    let ts = &cov.t * &s_inv;
    let st = &s_inv * &cov.t;
    let tst = &cov.t * &st;
    for (x, &i) in dense_idx.iter().enumerate() {
        let left = &cov.t * &dense[x] * &s_inv;
        let right = &dense[x] * &st;
        for m in 0..n {
            let v = (J * (left[(m, m)] - right[(m, m)])).re;
            let tm = lay.theta_sd(m);
            fim[(tm, i)] += v;
            fim[(i, tm)] += v;
        }
    }
    for m in 0..n {
        for k in 0..n {
            let v = -(ts[(m, k)] * ts[(k, m)] - tst[(m, k)] * s_inv[(k, m)] - s_inv[(m, k)] * tst[(k, m)]
                + st[(m, k)] * st[(k, m)]);
            fim[(lay.theta_sd(m), lay.theta_sd(k))] += v.re;
        }
    }
    Ok(fim)
}

/// Reference implementation of [`fim_at`] with every trace formed densely.
pub fn fim_at_dense(ctx: &BoundContext, p: &ParamPoint) -> Result<RMat> {
    let n = ctx.n;
    let lay = &ctx.layout;
    let cov = covariance_derivatives(ctx, p)?;
    let mut sigma = cov.t.clone();
    for i in 0..n {
        sigma[(i, i)] += ctx.sim.noise_var_dest;
    }
    let solver = HermitianSolver::new(sigma, "relay noise covariance")?;
    let s_inv = solver.inverse();
    let jac = mean_jacobian(ctx, p);

    let mut inv_full = CMat::zeros(2 * n, 2 * n);
    inv_full.view_mut((0, 0), (n, n)).copy_from(&s_inv);
    for i in 0..n {
        inv_full[(n + i, n + i)] = C64::from(1.0 / ctx.sim.noise_var_dest);
    }
    let mut fim: RMat = (jac.adjoint() * &inv_full * &jac).map(|z| 2.0 * z.re);

    let mut derivs: Vec<(usize, CMat)> = vec![(lay.phi_sd(), cov.phi.clone())];
    for m in 0..n {
        derivs.push((lay.theta_sd(m), theta_covariance_derivative(&cov.t, m)));
    }
    for (k, w) in lay.g_block().zip(cov.g.iter()) {
        derivs.push((k, w.clone()));
    }
    let a: Vec<(usize, CMat)> = derivs.into_iter().map(|(i, w)| (i, &s_inv * w)).collect();
    for (i, ai) in &a {
        for (k, ak) in &a {
            fim[(*i, *k)] += trace_product(ai, ak);
        }
    }
    Ok(fim)
}

/// Gradient-free helper for finite-difference checks: `Σ_r` as a function of `λ`.
pub fn relay_covariance_at(ctx: &BoundContext, p: &ParamPoint) -> Result<CMat> {
    let cov = covariance_derivatives(ctx, p)?;
    let mut s = cov.t;
    for i in 0..ctx.n {
        s[(i, i)] += ctx.sim.noise_var_dest;
    }
    Ok(s)
}

/// `μ(λ)` stacked as `[μ_s; μ_r]`.
pub fn mean_at(ctx: &BoundContext, p: &ParamPoint) -> CVec {
    let d = p.decode(&ctx.layout);
    let mut mu = CVec::zeros(2 * ctx.n);
    mu.rows_mut(0, ctx.n).copy_from(&ctx.mean_source(&d));
    mu.rows_mut(ctx.n, ctx.n).copy_from(&ctx.mean_relay(&d));
    mu
}
