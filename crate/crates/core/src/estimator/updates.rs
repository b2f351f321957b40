//! The four block updates of the coordinate descent and the objective they descend.

use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::linalg::{gls, scale_rows, whitened_least_squares, CMat, CVec, HermitianSolver, RMat, RVec, SymmetricSolver, C64, J};
use crate::signal_model::{convolution_matrix, Observation};

use super::{EstimatorContext, EstimatorState};

/// Phase-noise step. The rotation is linearized around `θ = 0`
/// (`e^{jθ} ≈ 1 + jθ`), which turns the source-hop likelihood plus the
/// `½‖η‖²` prior into a ridge regression in `η`. Refreshes `Σ̂_r`.
pub fn update_pn(ctx: &EstimatorContext, state: &mut EstimatorState, y_s: &CVec) -> Result<RVec> {
    let basis = &ctx.pn_sd.basis;
    let u = ctx.mean_s(&state.c_hat, state.phi_sd, &RVec::zeros(ctx.n));
    let ybar = y_s - &u;
    let b = scale_rows(&(&u * J), &basis.pi.map(C64::from));
    let solver = &state.sigma_r.solver;
    let bw = solver.whiten(&b);
    let yw = solver.whiten_vec(&ybar);
    let mut lhs: RMat = (bw.adjoint() * &bw).map(|z| z.re);
    for k in 0..basis.m {
        lhs[(k, k)] += 0.5;
    }
    let rhs = (bw.adjoint() * yw).map(|z| z.re);
    if rhs.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("phase-noise update"));
    }
    let normal = SymmetricSolver::new(lhs, "phase-noise normal matrix")?;
    state.regularized |= normal.ridged();
    state.eta_sd = normal.solve_vec(&rhs);
    state.theta_sd = &basis.pi * &state.eta_sd;
    state.refresh_sigma(ctx)?;
    Ok(state.eta_sd.clone())
}

/// Relay-channel step: generalized least squares on the stacked observations,
/// `Σ = blkdiag(Σ̂_r, σ²_D I)`. Refreshes `Σ̂_r`.
pub fn update_g(ctx: &EstimatorContext, state: &mut EstimatorState, obs: &Observation) -> Result<CVec> {
    let n = ctx.n;
    let lg = ctx.sim.l_g;
    let top = scale_rows(
        &(ctx.rotation(state.phi_sd, &state.theta_sd) * C64::from(ctx.alpha)),
        &(&ctx.x_s * convolution_matrix(&state.h_hat, lg)),
    );
    let bottom = scale_rows(&ctx.rotation(state.phi_rd, &state.theta_rd), &ctx.x_r);
    let solver = &state.sigma_r.solver;
    let inv_sd = 1.0 / ctx.noise_dest().sqrt();

    let mut design = CMat::zeros(2 * n, lg);
    design.rows_mut(0, n).copy_from(&solver.whiten(&top));
    design.rows_mut(n, n).copy_from(&(bottom * C64::from(inv_sd)));
    let mut y = CVec::zeros(2 * n);
    y.rows_mut(0, n).copy_from(&solver.whiten_vec(&obs.y_s));
    y.rows_mut(n, n).copy_from(&(&obs.y_r * C64::from(inv_sd)));

    let (g, ridged) = whitened_least_squares(&design, &y)?;
    state.regularized |= ridged;
    let h = state.h_hat.clone();
    state.set_channels(g.clone(), h);
    state.refresh_sigma(ctx)?;
    Ok(g)
}

/// Source-channel step: generalized least squares on `y_s` with `Σ̂_r` held fixed.
pub fn update_h(ctx: &EstimatorContext, state: &mut EstimatorState, y_s: &CVec) -> Result<CVec> {
    let design = scale_rows(
        &(ctx.rotation(state.phi_sd, &state.theta_sd) * C64::from(ctx.alpha)),
        &(&ctx.x_s * convolution_matrix(&state.g_hat, ctx.sim.l_h)),
    );
    let (h, ridged) = gls(&design, y_s, &state.sigma_r.solver)?;
    state.regularized |= ridged;
    let g = state.g_hat.clone();
    state.set_channels(g, h.clone());
    Ok(h)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CfoStep {
    pub delta: f64,
    pub skipped: bool,
}

/// CFO step: one Gauss–Newton update from the first-order expansion of the
/// ramp around the current estimate. Refreshes `Σ̂_r`.
pub fn update_cfo(ctx: &EstimatorContext, state: &mut EstimatorState, y_s: &CVec) -> Result<CfoStep> {
    let n = ctx.n;
    let d = ctx.mean_s(&state.c_hat, 0.0, &state.theta_sd);
    let ramp = crate::linalg::phase_ramp(n, state.phi_sd);
    let r = y_s - ramp.component_mul(&d);
    let t = CVec::from_fn(n, |m, _| J * (2.0 * PI * m as f64 / n as f64) * ramp[m] * d[m]);
    let solver = &state.sigma_r.solver;
    let tw = solver.whiten_vec(&t);
    let rw = solver.whiten_vec(&r);
    let den = tw.norm_squared();
    let num = rw.dotc(&tw).re;
    let delta = num / den;
    if !(den > 0.0) || !delta.is_finite() {
        state.regularized = true;
        return Ok(CfoStep { delta: 0.0, skipped: true });
    }
    state.phi_sd += delta;
    state.refresh_sigma(ctx)?;
    Ok(CfoStep { delta, skipped: false })
}

/// Negative log-posterior, up to constants:
/// `log det Σ + (y − μ)ᴴ Σ⁻¹ (y − μ) + ½ ηᵀη` over both training observations.
pub fn negative_llf(ctx: &EstimatorContext, state: &EstimatorState, obs: &Observation) -> Result<f64> {
    let n = ctx.n as f64;
    let sigma = HermitianSolver::new(
        ctx.sigma_r(&state.g_hat, state.phi_sd, &state.theta_sd),
        "relay noise covariance",
    )?;
    let res_s = &obs.y_s - ctx.mean_s(&state.c_hat, state.phi_sd, &state.theta_sd);
    let res_r = &obs.y_r - ctx.mean_r(&state.g_hat, state.phi_rd, &state.theta_rd);
    let sd = ctx.noise_dest();
    let value = sigma.log_det()
        + sigma.quad_form(&res_s)
        + n * sd.ln()
        + res_r.norm_squared() / sd
        + 0.5 * state.eta_sd.norm_squared();
    if !value.is_finite() {
        return Err(Error::NonFinite("negative log-likelihood"));
    }
    Ok(value)
}
