//! Error metrics that ignore the unidentifiable parts of the estimates.
//!
//! Channels are compared after rotating both vectors so their reference tap
//! is real and positive; CFO and phase noise are compared through the
//! combined phase trajectory `δ(m) = θ(m) + 2πmφ/N` with its first sample
//! removed.

use std::f64::consts::PI;

use crate::error::{dim_err, Result};
use crate::linalg::{CVec, RVec, C64};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ChannelError {
    pub mse: f64,
    /// The first tap of either vector was zero and the largest tap was used
    /// as the phase reference instead.
    pub fallback: bool,
}

fn reference_phase(taps: &CVec) -> (C64, bool) {
    let first = taps[0];
    if first.norm() > 0.0 {
        return (first / first.norm(), false);
    }
    let big = taps.iter().copied().fold(C64::new(0.0, 0.0), |a, b| if b.norm() > a.norm() { b } else { a });
    if big.norm() > 0.0 {
        (big / big.norm(), true)
    } else {
        (C64::new(1.0, 0.0), true)
    }
}

/// `‖e^{−j∠est(0)} est − e^{−j∠truth(0)} truth‖²`.
pub fn mse_channel(est: &CVec, truth: &CVec) -> Result<ChannelError> {
    if est.len() != truth.len() || est.is_empty() {
        return Err(dim_err(format!("channel lengths {} and {} must match and be non-zero", est.len(), truth.len())));
    }
    let (pe, fe) = reference_phase(est);
    let (pt, ft) = reference_phase(truth);
    let mse = (est * pe.conj() - truth * pt.conj()).norm_squared();
    Ok(ChannelError { mse, fallback: fe || ft })
}

/// Combined CFO and phase-noise trajectory `δ(m) = θ(m) + 2πmφ/N`.
pub fn phase_trajectory(phi: f64, theta: &RVec) -> RVec {
    let n = theta.len() as f64;
    RVec::from_fn(theta.len(), |m, _| theta[m] + 2.0 * PI * m as f64 * phi / n)
}

/// `‖δ̲ − δ̲̂‖²`, where each trajectory has its own first element subtracted.
pub fn mse_cfo_pn(phi_hat: f64, theta_hat: &RVec, phi: f64, theta: &RVec) -> Result<f64> {
    if theta_hat.len() != theta.len() || theta.is_empty() {
        return Err(dim_err(format!("phase-noise lengths {} and {} must match and be non-zero", theta_hat.len(), theta.len())));
    }
    let d_hat = phase_trajectory(phi_hat, theta_hat);
    let d = phase_trajectory(phi, theta);
    Ok(d_hat
        .iter()
        .zip(d.iter())
        .map(|(a, b)| ((a - d_hat[0]) - (b - d[0])).powi(2))
        .sum())
}

/// Fraction of differing bits.
pub fn ber(bits_hat: &[u8], bits: &[u8]) -> Result<f64> {
    if bits_hat.len() != bits.len() {
        return Err(dim_err(format!("bit vectors of length {} and {}", bits_hat.len(), bits.len())));
    }
    Ok(bit_errors(bits_hat, bits) as f64 / bits.len().max(1) as f64)
}

pub fn bit_errors(bits_hat: &[u8], bits: &[u8]) -> usize {
    bits_hat.iter().zip(bits).filter(|(a, b)| a != b).count()
}

/// Outcome of one Monte Carlo trial. `ber` is NaN when no data phase ran.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TrialMetrics {
    pub mse_g: f64,
    pub mse_h: f64,
    pub mse_cfo_pn: f64,
    pub ber: f64,
    pub iterations: usize,
    pub converged: bool,
    pub diverged: bool,
}
