//! The unidentifiable transformations of the estimates.
//!
//! Rotating `g` by `e^{−jφ_g}` is undone by adding `φ_g` to both phase-noise
//! paths, rotating `h` by `e^{−jφ_h}` by adding `φ_h` to the source-hop path,
//! and lowering a CFO by `ε` by adding the ramp `2πmε/N` to the matching path.
//! None of these change the observation distribution.

use std::f64::consts::PI;

use rand::Rng;

use crate::estimator::EstimatorOutput;
use crate::linalg::{CVec, RVec, C64};
use crate::receiver::ChannelKnowledge;
use crate::signal_model::{ChannelTaps, LinkState};

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct AmbiguityTransform {
    pub phi_g: f64,
    pub phi_h: f64,
    pub eps_sd: f64,
    pub eps_rd: f64,
}

fn rotate(taps: &CVec, phase: f64) -> CVec {
    taps * C64::from_polar(1.0, -phase)
}

fn shift(theta: &RVec, offset: f64, eps: f64) -> RVec {
    let n = theta.len() as f64;
    RVec::from_fn(theta.len(), |m, _| theta[m] + offset + 2.0 * PI * m as f64 * eps / n)
}

impl AmbiguityTransform {
    /// Channel phases uniform on `(−π, π]`, CFO shifts uniform on `±0.5`.
    pub fn random<R: Rng + ?Sized>(rng: &mut R) -> Self {
        Self {
            phi_g: rng.gen_range(-PI..PI),
            phi_h: rng.gen_range(-PI..PI),
            eps_sd: rng.gen_range(-0.5..0.5),
            eps_rd: rng.gen_range(-0.5..0.5),
        }
    }

    pub fn g(&self, g: &CVec) -> CVec {
        rotate(g, self.phi_g)
    }

    pub fn h(&self, h: &CVec) -> CVec {
        rotate(h, self.phi_h)
    }

    pub fn c(&self, c: &CVec) -> CVec {
        rotate(c, self.phi_g + self.phi_h)
    }

    pub fn source_hop(&self, phi: f64, theta: &RVec) -> (f64, RVec) {
        (phi - self.eps_sd, shift(theta, self.phi_g + self.phi_h, self.eps_sd))
    }

    pub fn relay_hop(&self, phi: f64, theta: &RVec) -> (f64, RVec) {
        (phi - self.eps_rd, shift(theta, self.phi_g, self.eps_rd))
    }

    /// The relay noise covariance is unchanged: it only sees `GGᴴ` and a
    /// common phase.
    pub fn apply_estimate(&self, est: &EstimatorOutput) -> EstimatorOutput {
        let (phi_sd, theta_sd) = self.source_hop(est.phi_sd, &est.theta_sd);
        let (phi_rd, theta_rd) = self.relay_hop(est.phi_rd, &est.theta_rd);
        EstimatorOutput {
            g: self.g(&est.g),
            h: self.h(&est.h),
            c: self.c(&est.c),
            phi_sd,
            phi_rd,
            theta_sd,
            theta_rd,
            ..est.clone()
        }
    }

    pub fn apply_knowledge(&self, know: &ChannelKnowledge) -> ChannelKnowledge {
        let phi = know.phi - self.eps_sd;
        ChannelKnowledge {
            phi,
            c: self.c(&know.c),
            g: self.g(&know.g),
            theta: know.theta.as_ref().map(|t| self.source_hop(know.phi, t).1),
        }
    }

    pub fn apply_link(&self, state: &LinkState) -> LinkState {
        let (phi_sd, theta_sd) = self.source_hop(state.phi_sd, &state.theta_sd);
        let (phi_rd, theta_rd) = self.relay_hop(state.phi_rd, &state.theta_rd);
        LinkState {
            h: ChannelTaps::new(self.h(state.h.taps())).expect("rotation keeps taps finite"),
            g: ChannelTaps::new(self.g(state.g.taps())).expect("rotation keeps taps finite"),
            c: self.c(&state.c),
            phi_sd,
            phi_rd,
            theta_sd,
            theta_rd,
            alpha: state.alpha,
        }
    }
}
