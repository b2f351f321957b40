//! Starting point of the coordinate descent.

use crate::error::Result;
use crate::linalg::{diag_sandwich, gls, phase_ramp, CMat, CVec, HermitianSolver, RVec, C64};
use crate::signal_model::{convolution_matrix, Observation};

use super::relay_hop::RelayHopEstimate;
use super::{relay_noise_gram, Covariance, EstimatorContext, EstimatorState};

/// Matched-filter estimate of `g` after removing the relay-hop rotation.
/// Exact least squares for constant-modulus training.
pub fn initial_relay_channel(ctx: &EstimatorContext, y_r: &CVec, phi_rd: f64, theta_rd: &RVec) -> CVec {
    let derot = ctx.rotation(phi_rd, theta_rd).map(|z| z.conj()).component_mul(y_r);
    let energy = ctx.s_relay.norm_squared();
    ctx.x_r.adjoint() * derot / C64::from(energy)
}

/// `S₀ = α²σ²_R Ĝ Ĝᴴ + σ²_D I`; the CFO only rotates it, so it is searched on
/// the derotated observation.
fn phase_free_covariance(ctx: &EstimatorContext, g0: &CVec) -> CMat {
    let mut s0 = relay_noise_gram(g0, ctx.n) * C64::from(ctx.alpha * ctx.alpha * ctx.sim.noise_var_relay);
    for i in 0..ctx.n {
        s0[(i, i)] += ctx.noise_dest();
    }
    s0
}

/// Joint ML `(ĥ⁰, φ̂⁰)` ignoring phase noise: a 1-D search over the CFO of the
/// generalized-least-squares residual, with `h` profiled out.
/// Returns `(ĥ⁰, φ̂⁰, ridged)`.
pub fn initial_source_hop(ctx: &EstimatorContext, y_s: &CVec, g0: &CVec) -> Result<(CVec, f64, bool)> {
    let s0 = HermitianSolver::new(phase_free_covariance(ctx, g0), "initial relay noise covariance")?;
    let design = &ctx.x_s * convolution_matrix(g0, ctx.sim.l_h) * C64::from(ctx.alpha);
    let derotate = |phi: f64| phase_ramp(ctx.n, phi).map(|z| z.conj()).component_mul(y_s);

    let phi0 = match ctx.cfg.warm_start_cfo {
        Some(phi) => phi,
        None => {
            let white = s0.whiten(&CMat::identity(ctx.n, ctx.n));
            let q = (&white * &design).qr().q();
            let residual = &white - &q * (q.adjoint() * &white);
            ctx.cfg.grid_sd.minimize(|phi| (&residual * derotate(phi)).norm_squared()).0
        }
    };
    let (h0, ridged) = gls(&design, &derotate(phi0), &s0)?;
    Ok((h0, phi0, ridged))
}

pub fn init_estimates(ctx: &EstimatorContext, obs: &Observation, rd: &RelayHopEstimate) -> Result<EstimatorState> {
    let g0 = initial_relay_channel(ctx, &obs.y_r, rd.phi, &rd.theta);
    let (h0, phi0, ridged) = initial_source_hop(ctx, &obs.y_s, &g0)?;

    let a2 = ctx.alpha * ctx.alpha * ctx.sim.noise_var_relay;
    let omega = diag_sandwich(&phase_ramp(ctx.n, phi0), &relay_noise_gram(&g0, ctx.n)) * C64::from(a2);
    let mut sigma0 = omega.clone();
    if ctx.models_pn() {
        let psi = &ctx.pn_sd.covariance;
        sigma0 += omega.zip_map(psi, |o, p| o * p);
    }
    for i in 0..ctx.n {
        sigma0[(i, i)] += ctx.noise_dest();
    }
    let sigma_r = Covariance::new(sigma0)?;
    let regularized = ridged || rd.regularized || sigma_r.solver.ridged();

    let mut state = EstimatorState {
        phi_sd: phi0,
        phi_rd: rd.phi,
        theta_sd: RVec::zeros(ctx.n),
        theta_rd: rd.theta.clone(),
        eta_sd: RVec::zeros(ctx.pn_sd.basis.m),
        h_hat: CVec::zeros(0),
        g_hat: CVec::zeros(0),
        c_hat: CVec::zeros(0),
        sigma_r,
        iteration: 0,
        nllf_trace: Vec::new(),
        regularized,
    };
    state.set_channels(g0, h0);
    Ok(state)
}
