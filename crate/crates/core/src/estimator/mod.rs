//! Joint MAP estimation of the channels, CFO and phase noise from one pair of
//! training symbols.
//!
//! The relay-to-destination CFO and phase noise are estimated first from
//! `y_r` alone. The remaining unknowns are then refined by block-coordinate
//! descent on the negative log-posterior: phase noise, relay channel `g`,
//! source channel `h`, CFO, in that order, with the noise covariance
//! `Σ_r` refreshed after the phase-noise, `g` and CFO steps.

mod grid;
mod init;
mod relay_hop;
mod updates;

use std::sync::Arc;

pub use grid::CfoGrid;
pub use init::{init_estimates, initial_relay_channel, initial_source_hop};
pub use relay_hop::{estimate_rd_cfo, estimate_rd_pn, rd_cfo_objective, RelayHopEstimate};
pub use updates::{negative_llf, update_cfo, update_g, update_h, update_pn, CfoStep};

use crate::error::{Error, Result};
use crate::linalg::{diag_sandwich, phase_ramp, phasors, CMat, CVec, HermitianSolver, RMat, RVec, C64};
use crate::pn_subspace::{pn_covariance, pn_precision, PnBasis};
use crate::signal_model::{training_matrix, Observation, SimConfig};

#[derive(Clone, Debug, PartialEq)]
pub struct EstimatorConfig {
    pub max_iters: usize,
    /// Stop once the objective changes by at most this much; `None` means `1e-6·N`.
    pub epsilon: Option<f64>,
    pub grid_sd: CfoGrid,
    pub grid_rd: CfoGrid,
    /// Run without any phase-noise modelling (`θ̂ ≡ 0`), the PN-unaware baseline.
    pub ignore_pn: bool,
    /// Skip the source-hop CFO search and start from this value instead.
    pub warm_start_cfo: Option<f64>,
    /// Consecutive objective increases tolerated before giving up.
    pub divergence_window: usize,
}

impl EstimatorConfig {
    /// Search ranges follow the configured CFO distributions; a fixed CFO is
    /// searched over the full `[-0.5, 0.5]` acquisition range.
    pub fn for_sim(sim: &SimConfig) -> Self {
        let range = |spec: crate::signal_model::CfoSpec| match spec {
            crate::signal_model::CfoSpec::Uniform(lo, hi) => CfoGrid::new(lo, hi),
            crate::signal_model::CfoSpec::Fixed(v) => CfoGrid::new(v.min(-0.5), v.max(0.5)),
        };
        Self {
            max_iters: 200,
            epsilon: None,
            grid_sd: range(sim.cfo_sd),
            grid_rd: range(sim.cfo_rd),
            ignore_pn: false,
            warm_start_cfo: None,
            divergence_window: 3,
        }
    }
}

/// Scenario quantities that do not depend on the training symbols.
#[derive(Clone, Debug)]
pub struct PnModel {
    pub basis: PnBasis,
    pub covariance: RMat,
    /// `Ψ⁻¹`, absent for a phase-noise-free link.
    pub precision: Option<RMat>,
}

impl PnModel {
    pub fn new(n: usize, sigma2: f64, m: usize) -> Result<Self> {
        let covariance = pn_covariance(n, sigma2)?;
        Ok(Self {
            basis: crate::pn_subspace::build_basis(&covariance, m)?,
            precision: pn_precision(n, sigma2)?,
            covariance,
        })
    }
}

/// Everything precomputable for a fixed scenario and training pair.
#[derive(Clone, Debug)]
pub struct EstimatorContext {
    pub sim: SimConfig,
    pub cfg: EstimatorConfig,
    pub n: usize,
    pub alpha: f64,
    pub s_src: CVec,
    pub s_relay: CVec,
    /// `Fᴴ Λ_s F_[L]`, N×L.
    pub x_s: CMat,
    /// `Fᴴ Λ_{s_r} F_[L_g]`, N×L_g.
    pub x_r: CMat,
    /// `Fᴴ Λ_{s_r} F(:, L_g..N)`: the part of the relay training space the channel cannot reach.
    pub k_r: CMat,
    /// `K_r K_rᴴ`.
    pub q_r: CMat,
    pub pn_sd: Arc<PnModel>,
    pub pn_rd: Arc<PnModel>,
}

impl EstimatorContext {
    pub fn new(sim: &SimConfig, cfg: EstimatorConfig, s_src: CVec, s_relay: CVec) -> Result<Self> {
        let m = sim.subspace_dim;
        let n = sim.n_subcarriers;
        let pn_sd = Arc::new(PnModel::new(n, sim.pn_var_sd, m)?);
        let pn_rd = if sim.pn_var_rd == sim.pn_var_sd {
            pn_sd.clone()
        } else {
            Arc::new(PnModel::new(n, sim.pn_var_rd, m)?)
        };
        Self::with_models(sim, cfg, s_src, s_relay, pn_sd, pn_rd)
    }

    /// Reuses already built phase-noise models (they only depend on `N`, `σ²` and `M`).
    pub fn with_models(
        sim: &SimConfig,
        cfg: EstimatorConfig,
        s_src: CVec,
        s_relay: CVec,
        pn_sd: Arc<PnModel>,
        pn_rd: Arc<PnModel>,
    ) -> Result<Self> {
        sim.validate()?;
        let n = sim.n_subcarriers;
        if s_src.len() != n || s_relay.len() != n {
            return Err(Error::Dimension(format!("training symbols must have length {n}")));
        }
        if !(sim.noise_var_dest > 0.0) {
            return Err(Error::InvalidConfig(
                "the estimator needs a positive destination noise variance".into(),
            ));
        }
        if pn_sd.basis.n() != n || pn_rd.basis.n() != n {
            return Err(Error::Dimension("phase-noise model size differs from N".into()));
        }
        let x_s = training_matrix(&s_src, sim.cascade_len());
        let full = training_matrix(&s_relay, n);
        let x_r = full.columns(0, sim.l_g).into_owned();
        // F(:, k) is the k-th circular delay of the unit impulse, scaled by 1/√N.
        let k_r = full.columns(sim.l_g, n - sim.l_g).into_owned() / C64::from((n as f64).sqrt());
        let q_r = &k_r * k_r.adjoint();
        Ok(Self {
            alpha: sim.alpha()?,
            sim: sim.clone(),
            cfg,
            n,
            s_src,
            s_relay,
            x_s,
            x_r,
            k_r,
            q_r,
            pn_sd,
            pn_rd,
        })
    }

    pub fn epsilon(&self) -> f64 {
        self.cfg.epsilon.unwrap_or(1e-6 * self.n as f64)
    }

    pub fn models_pn(&self) -> bool {
        !self.cfg.ignore_pn
    }

    /// `σ²_D`.
    pub fn noise_dest(&self) -> f64 {
        self.sim.noise_var_dest
    }

    /// Exact relay-noise covariance `α²σ²_R D G Gᴴ Dᴴ + σ²_D I`, `D = Λ_θ Λ_φ`.
    pub fn sigma_r(&self, g: &CVec, phi: f64, theta: &RVec) -> CMat {
        let rot = phasors(theta).component_mul(&phase_ramp(self.n, phi));
        let gram = relay_noise_gram(g, self.n) * C64::from(self.alpha * self.alpha * self.sim.noise_var_relay);
        let mut s = diag_sandwich(&rot, &gram);
        for i in 0..self.n {
            s[(i, i)] += self.sim.noise_var_dest;
        }
        s
    }

    /// Rotation `e^{jθ} ⊙ ϑ(φ)` applied by phase noise and CFO.
    pub fn rotation(&self, phi: f64, theta: &RVec) -> CVec {
        phasors(theta).component_mul(&phase_ramp(self.n, phi))
    }

    /// Noise-free source-hop observation for the given parameters.
    pub fn mean_s(&self, c: &CVec, phi: f64, theta: &RVec) -> CVec {
        self.rotation(phi, theta).component_mul(&(&self.x_s * c)) * C64::from(self.alpha)
    }

    /// Noise-free relay-hop observation.
    pub fn mean_r(&self, g: &CVec, phi: f64, theta: &RVec) -> CVec {
        self.rotation(phi, theta).component_mul(&(&self.x_r * g))
    }
}

/// `G Gᴴ` without forming `G`: a banded Hermitian Toeplitz matrix holding the
/// autocorrelation of `g`.
pub fn relay_noise_gram(g: &CVec, n: usize) -> CMat {
    let lg = g.len() as isize;
    CMat::from_fn(n, n, |a, b| {
        let d = b as isize - a as isize;
        if d.abs() >= lg {
            return C64::new(0.0, 0.0);
        }
        let mut acc = C64::new(0.0, 0.0);
        for m in 0..lg {
            let k = m + d;
            if (0..lg).contains(&k) {
                acc += g[m as usize] * g[k as usize].conj();
            }
        }
        acc
    })
}

/// The noise covariance estimate together with its factorization.
#[derive(Clone, Debug)]
pub struct Covariance {
    pub matrix: CMat,
    pub solver: HermitianSolver,
}

impl Covariance {
    pub fn new(matrix: CMat) -> Result<Self> {
        let solver = HermitianSolver::new(matrix.clone(), "relay noise covariance")?;
        Ok(Self { matrix, solver })
    }
}

/// Iterate of the coordinate descent.
#[derive(Clone, Debug)]
pub struct EstimatorState {
    pub phi_sd: f64,
    pub phi_rd: f64,
    pub theta_sd: RVec,
    pub theta_rd: RVec,
    pub eta_sd: RVec,
    pub h_hat: CVec,
    pub g_hat: CVec,
    pub c_hat: CVec,
    pub sigma_r: Covariance,
    pub iteration: usize,
    pub nllf_trace: Vec<f64>,
    /// Set when any solve needed a ridge or a CFO step had to be skipped.
    pub regularized: bool,
}

impl EstimatorState {
    pub fn set_channels(&mut self, g: CVec, h: CVec) {
        self.c_hat = crate::linalg::convolve(&g, &h);
        self.g_hat = g;
        self.h_hat = h;
    }

    /// Recompute `Σ̂_r` at the current `ĝ`, `φ̂`, `θ̂`.
    pub fn refresh_sigma(&mut self, ctx: &EstimatorContext) -> Result<()> {
        self.sigma_r = Covariance::new(ctx.sigma_r(&self.g_hat, self.phi_sd, &self.theta_sd))?;
        self.regularized |= self.sigma_r.solver.ridged();
        Ok(())
    }
}

#[derive(Clone, Debug)]
pub struct EstimatorOutput {
    pub h: CVec,
    pub g: CVec,
    pub c: CVec,
    pub phi_sd: f64,
    pub phi_rd: f64,
    pub theta_sd: RVec,
    pub theta_rd: RVec,
    pub eta_sd: RVec,
    pub sigma_r: CMat,
    /// Objective after initialization and after every sweep.
    pub nllf_trace: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
    pub diverged: bool,
    pub regularized: bool,
}

/// Full training-phase estimation.
pub fn run_joint_estimation(ctx: &EstimatorContext, obs: &Observation) -> Result<EstimatorOutput> {
    let n = ctx.n;
    if obs.y_s.len() != n || obs.y_r.len() != n {
        return Err(Error::Dimension(format!("observations must have length {n}")));
    }
    let rd = relay_hop::estimate_relay_hop(ctx, &obs.y_r)?;
    let mut state = init_estimates(ctx, obs, &rd)?;
    let e0 = negative_llf(ctx, &state, obs)?;
    state.nllf_trace.push(e0);

    let eps = ctx.epsilon();
    let mut best = state.clone();
    let mut best_value = e0;
    let mut rising = 0usize;
    let mut converged = false;
    let mut diverged = false;

    for _ in 0..ctx.cfg.max_iters {
        let prev = *state.nllf_trace.last().expect("trace starts non-empty");
        if ctx.models_pn() {
            update_pn(ctx, &mut state, &obs.y_s)?;
        }
        update_g(ctx, &mut state, obs)?;
        update_h(ctx, &mut state, &obs.y_s)?;
        update_cfo(ctx, &mut state, &obs.y_s)?;
        state.iteration += 1;

        let e = negative_llf(ctx, &state, obs)?;
        state.nllf_trace.push(e);
        if e < best_value {
            best_value = e;
            best = state.clone();
        }
        if (e - prev).abs() <= eps {
            converged = true;
            break;
        }
        if e > prev {
            rising += 1;
            if rising >= ctx.cfg.divergence_window {
                diverged = true;
                log::warn!("estimator objective rose for {rising} consecutive sweeps; keeping best iterate");
                break;
            }
        } else {
            rising = 0;
        }
    }

    let iterations = state.iteration;
    let trace = std::mem::take(&mut state.nllf_trace);
    let final_state = if diverged { best } else { state };
    Ok(EstimatorOutput {
        h: final_state.h_hat,
        g: final_state.g_hat,
        c: final_state.c_hat,
        phi_sd: final_state.phi_sd,
        phi_rd: final_state.phi_rd,
        theta_sd: final_state.theta_sd,
        theta_rd: final_state.theta_rd,
        eta_sd: final_state.eta_sd,
        sigma_r: final_state.sigma_r.matrix,
        nllf_trace: trace,
        iterations,
        converged,
        diverged,
        regularized: final_state.regularized,
    })
}
