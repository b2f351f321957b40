//! CFO and phase noise of the relay-to-destination hop, from `y_r` alone.
//!
//! Projecting the derotated observation onto the complement of the training
//! space removes `g`. Linearizing `e^{jθ} ≈ 1 + jθ` in the rotation then gives a
//! quadratic in `θ` that can be minimized in closed form, leaving a 1-D
//! search over the CFO.

use crate::error::Result;
use crate::linalg::{diag_sandwich, phase_ramp, CMat, CVec, RMat, RVec, SymmetricSolver};

use super::EstimatorContext;

#[derive(Clone, Debug, PartialEq)]
pub struct RelayHopEstimate {
    pub phi: f64,
    pub theta: RVec,
    pub eta: RVec,
    pub objective: f64,
    pub regularized: bool,
}

/// `Aᴴ`-free form of `A Aᴴ`: `Diag(ȳ) K Kᴴ Diag(y)`.
fn weighted_gram(ctx: &EstimatorContext, y_r: &CVec) -> CMat {
    CMat::from_fn(ctx.n, ctx.n, |a, b| y_r[a].conj() * ctx.q_r[(a, b)] * y_r[b])
}

/// Weight on the phase-noise prior: `σ²_D P_r / 2`.
fn prior_weight(ctx: &EstimatorContext) -> f64 {
    ctx.noise_dest() * ctx.sim.p_relay / 2.0
}

fn rotated(m0: &CMat, n: usize, phi: f64) -> CMat {
    diag_sandwich(&phase_ramp(n, phi), m0)
}

fn imag_row_sums(r: &CMat) -> RVec {
    RVec::from_fn(r.nrows(), |a, _| r.row(a).iter().map(|z| z.im).sum())
}

fn objective_from(ctx: &EstimatorContext, m0: &CMat, phi: f64) -> Result<(f64, bool)> {
    let r = rotated(m0, ctx.n, phi);
    let total: f64 = r.iter().map(|z| z.re).sum();
    let precision = match (&ctx.pn_rd.precision, ctx.models_pn()) {
        (Some(p), true) => p,
        // No phase noise: the prior pins θ to zero.
        _ => return Ok((total, false)),
    };
    let b = imag_row_sums(&r);
    let a: RMat = r.map(|z| z.re) + precision * prior_weight(ctx);
    let solver = SymmetricSolver::new(a, "relay-hop CFO normal matrix")?;
    Ok((total - b.dot(&solver.solve_vec(&b)), solver.ridged()))
}

/// The relay-hop CFO objective at `phi`.
pub fn rd_cfo_objective(ctx: &EstimatorContext, y_r: &CVec, phi: f64) -> Result<f64> {
    Ok(objective_from(ctx, &weighted_gram(ctx, y_r), phi)?.0)
}

/// Grid-refined minimizer of [`rd_cfo_objective`] over the configured range.
pub fn estimate_rd_cfo(ctx: &EstimatorContext, y_r: &CVec) -> Result<(f64, f64)> {
    let m0 = weighted_gram(ctx, y_r);
    minimize(ctx, &m0)
}

fn minimize(ctx: &EstimatorContext, m0: &CMat) -> Result<(f64, f64)> {
    let mut failure = None;
    let best = ctx.cfg.grid_rd.minimize(|phi| match objective_from(ctx, m0, phi) {
        Ok((v, _)) => v,
        Err(e) => {
            failure.get_or_insert(e);
            f64::NAN
        }
    });
    match failure {
        Some(e) if !best.1.is_finite() => Err(e),
        _ => Ok(best),
    }
}

fn pn_from(ctx: &EstimatorContext, m0: &CMat, phi: f64) -> Result<(RVec, RVec, bool)> {
    let basis = &ctx.pn_rd.basis;
    if !ctx.models_pn() || ctx.pn_rd.precision.is_none() {
        return Ok((RVec::zeros(ctx.n), RVec::zeros(basis.m), false));
    }
    let r = rotated(m0, ctx.n, phi);
    let re = r.map(|z| z.re);
    let pi = &basis.pi;
    let mut lhs = pi.transpose() * re * pi;
    for k in 0..basis.m {
        lhs[(k, k)] += prior_weight(ctx);
    }
    let rhs = pi.transpose() * imag_row_sums(&r);
    let solver = SymmetricSolver::new(lhs, "relay-hop phase-noise normal matrix")?;
    let eta = solver.solve_vec(&rhs);
    Ok((pi * &eta, eta, solver.ridged()))
}

/// Phase-noise estimate of the relay hop given its CFO.
pub fn estimate_rd_pn(ctx: &EstimatorContext, y_r: &CVec, phi: f64) -> Result<RVec> {
    Ok(pn_from(ctx, &weighted_gram(ctx, y_r), phi)?.0)
}

pub(crate) fn estimate_relay_hop(ctx: &EstimatorContext, y_r: &CVec) -> Result<RelayHopEstimate> {
    let m0 = weighted_gram(ctx, y_r);
    let (phi, objective) = minimize(ctx, &m0)?;
    let (theta, eta, ridged_pn) = pn_from(ctx, &m0, phi)?;
    let (_, ridged_cfo) = objective_from(ctx, &m0, phi)?;
    Ok(RelayHopEstimate { phi, theta, eta, objective, regularized: ridged_pn || ridged_cfo })
}
