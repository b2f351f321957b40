//! Data-phase receiver: comb-type symbols, joint phase-noise tracking and
//! symbol detection.
//!
//! Each data symbol carries `P ≥ M` known pilots. The receiver alternates a
//! phase-noise step (the same small-angle ridge regression as in training,
//! driven by pilots plus the current soft data) with a generalized
//! least-squares data step. Symbols stay soft inside the loop and are sliced
//! once on exit.

use std::f64::consts::{FRAC_1_SQRT_2, PI};
use std::sync::Arc;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{dim_err, Error, Result};
use crate::estimator::{relay_noise_gram, EstimatorOutput, PnModel};
use crate::linalg::{diag_sandwich, phase_ramp, phasors, scale_rows, CMat, CVec, HermitianSolver, RMat, RVec, SymmetricSolver, C64, J};
use crate::signal_model::{frequency_response, LinkState, SimConfig};

/// Gray-mapped unit-power QPSK:
/// `00 → (1+j)/√2`, `10 → (−1+j)/√2`, `01 → (1−j)/√2`, `11 → (−1−j)/√2`.
pub fn qpsk_map(bits: &[u8]) -> Result<CVec> {
    if bits.len() % 2 != 0 {
        return Err(Error::OddBitCount(bits.len()));
    }
    let sign = |b: u8| if b == 0 { FRAC_1_SQRT_2 } else { -FRAC_1_SQRT_2 };
    Ok(CVec::from_iterator(bits.len() / 2, bits.chunks_exact(2).map(|p| C64::new(sign(p[0]), sign(p[1])))))
}

/// Nearest-point slicing; the scale of `symbols` is irrelevant.
pub fn qpsk_demap(symbols: &CVec) -> Vec<u8> {
    symbols.iter().flat_map(|s| [u8::from(s.re < 0.0), u8::from(s.im < 0.0)]).collect()
}

/// Pilot layout and pilot values shared by every data symbol of a packet.
#[derive(Clone, Debug, PartialEq)]
pub struct CombTemplate {
    pub n: usize,
    pub pilot_indices: Vec<usize>,
    pub data_indices: Vec<usize>,
    pub pilot_values: CVec,
    /// Per-subcarrier power.
    pub power: f64,
}

impl CombTemplate {
    /// Uses the configured pilot positions; pilot values are a fixed QPSK point.
    pub fn from_config(cfg: &SimConfig) -> Result<Self> {
        cfg.validate()?;
        let pilot_indices = cfg.pilot_indices();
        let p = C64::new(FRAC_1_SQRT_2, FRAC_1_SQRT_2) * cfg.p_src.sqrt();
        Ok(Self {
            n: cfg.n_subcarriers,
            pilot_values: CVec::from_element(pilot_indices.len(), p),
            data_indices: cfg.data_indices(),
            pilot_indices,
            power: cfg.p_src,
        })
    }

    pub fn data_len(&self) -> usize {
        self.data_indices.len()
    }

    /// Assemble the frequency-domain symbol from pilots and data.
    pub fn assemble(&self, data: &CVec) -> Result<CVec> {
        if data.len() != self.data_len() {
            return Err(dim_err(format!("{} data symbols for {} data subcarriers", data.len(), self.data_len())));
        }
        let mut s = CVec::zeros(self.n);
        for (&k, &v) in self.pilot_indices.iter().zip(self.pilot_values.iter()) {
            s[k] = v;
        }
        for (&k, &v) in self.data_indices.iter().zip(data.iter()) {
            s[k] = v;
        }
        Ok(s)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct CombSymbol {
    pub values: CVec,
    pub pilot_indices: Vec<usize>,
    pub data_indices: Vec<usize>,
    pub bits: Vec<u8>,
}

impl CombSymbol {
    pub fn random<R: Rng + ?Sized>(template: &CombTemplate, rng: &mut R) -> Result<Self> {
        let bits: Vec<u8> = (0..2 * template.data_len()).map(|_| rng.gen_range(0..=1)).collect();
        let data = qpsk_map(&bits)?.map(|z| z * template.power.sqrt());
        Ok(Self {
            values: template.assemble(&data)?,
            pilot_indices: template.pilot_indices.clone(),
            data_indices: template.data_indices.clone(),
            bits,
        })
    }
}

/// What the detector believes about the link.
#[derive(Clone, Debug, PartialEq)]
pub struct ChannelKnowledge {
    pub phi: f64,
    pub c: CVec,
    pub g: CVec,
    /// Known phase noise (genie receiver only).
    pub theta: Option<RVec>,
}

impl ChannelKnowledge {
    pub fn from_estimate(est: &EstimatorOutput) -> Self {
        Self { phi: est.phi_sd, c: est.c.clone(), g: est.g.clone(), theta: None }
    }

    /// The same knowledge with `c` rotated by `e^{jφ₀}`, i.e. a known common
    /// phase at the start of the symbol.
    pub fn with_phase(&self, phase: f64) -> Self {
        let rot = C64::from_polar(1.0, phase);
        Self { c: self.c.map(|z| z * rot), ..self.clone() }
    }

    /// Perfect knowledge of channels, CFO and the phase noise of this symbol.
    pub fn genie(state: &LinkState) -> Self {
        Self {
            phi: state.phi_sd,
            c: state.c.clone(),
            g: state.g.taps().clone(),
            theta: Some(state.theta_sd.clone()),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DetectorMode {
    /// Joint phase-noise tracking and detection.
    Proposed,
    /// Treats the link as phase-noise free.
    IgnorePn,
    /// Uses the phase noise carried by [`ChannelKnowledge::theta`].
    Genie,
}

impl DetectorMode {
    pub fn name(self) -> &'static str {
        match self {
            DetectorMode::Proposed => "proposed",
            DetectorMode::IgnorePn => "ignore-pn",
            DetectorMode::Genie => "genie",
        }
    }
}

impl std::str::FromStr for DetectorMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        [DetectorMode::Proposed, DetectorMode::IgnorePn, DetectorMode::Genie]
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| Error::Parse { what: "receiver".into(), msg: format!("unknown receiver `{s}` (proposed, ignore-pn, genie)") })
    }
}

#[derive(Clone, Debug)]
pub struct ReceiverContext {
    pub n: usize,
    pub alpha: f64,
    pub noise_var_relay: f64,
    pub noise_var_dest: f64,
    pub pn: Arc<PnModel>,
    pub mode: DetectorMode,
    pub max_iters: usize,
    /// Objective tolerance; `None` means `1e-4·N`.
    pub epsilon: Option<f64>,
}

impl ReceiverContext {
    pub fn new(cfg: &SimConfig, pn: Arc<PnModel>, mode: DetectorMode) -> Result<Self> {
        cfg.validate()?;
        if !(cfg.noise_var_dest > 0.0) {
            return Err(Error::InvalidConfig("the receiver needs a positive destination noise variance".into()));
        }
        Ok(Self {
            n: cfg.n_subcarriers,
            alpha: cfg.alpha()?,
            noise_var_relay: cfg.noise_var_relay,
            noise_var_dest: cfg.noise_var_dest,
            pn,
            mode,
            max_iters: 30,
            epsilon: None,
        })
    }

    fn epsilon(&self) -> f64 {
        self.epsilon.unwrap_or(1e-4 * self.n as f64)
    }
}

/// Per-packet quantities derived from the channel knowledge.
#[derive(Clone, Debug)]
pub struct LinkModel {
    /// `Fᴴ Λ_c̃`, the circulant channel before rotation.
    pub base: CMat,
    /// `α²σ²_R Ĝ Ĝᴴ`.
    pub relay_gram: CMat,
    pub ramp: CVec,
    pub alpha: f64,
    pub noise_var_dest: f64,
}

impl LinkModel {
    pub fn new(ctx: &ReceiverContext, know: &ChannelKnowledge) -> Self {
        let n = ctx.n;
        let ct = frequency_response(&know.c, n);
        let scale = 1.0 / (n as f64).sqrt();
        let twiddle: Vec<C64> = (0..n).map(|i| C64::from_polar(scale, 2.0 * PI * i as f64 / n as f64)).collect();
        let base = CMat::from_fn(n, n, |t, k| twiddle[(t * k) % n] * ct[k]);
        Self {
            base,
            relay_gram: relay_noise_gram(&know.g, n) * C64::from(ctx.alpha * ctx.alpha * ctx.noise_var_relay),
            ramp: phase_ramp(n, know.phi),
            alpha: ctx.alpha,
            noise_var_dest: ctx.noise_var_dest,
        }
    }

    fn rotation(&self, theta: &RVec) -> CVec {
        phasors(theta).component_mul(&self.ramp)
    }

    /// `T = α Λ_θ Λ_φ Fᴴ Λ_c̃`.
    pub fn combined(&self, theta: &RVec) -> CMat {
        scale_rows(&(self.rotation(theta) * C64::from(self.alpha)), &self.base)
    }

    pub fn sigma(&self, theta: &RVec) -> CMat {
        let mut s = diag_sandwich(&self.rotation(theta), &self.relay_gram);
        for i in 0..s.nrows() {
            s[(i, i)] += self.noise_var_dest;
        }
        s
    }

    /// Starting covariance with the phase noise averaged over its prior.
    pub fn sigma_prior(&self, psi: &RMat) -> CMat {
        let omega = diag_sandwich(&self.ramp, &self.relay_gram);
        let mut s = &omega + omega.zip_map(psi, |o, p| o * p);
        for i in 0..s.nrows() {
            s[(i, i)] += self.noise_var_dest;
        }
        s
    }
}

fn columns(m: &CMat, idx: &[usize]) -> CMat {
    CMat::from_fn(m.nrows(), idx.len(), |r, c| m[(r, idx[c])])
}

/// Phase-noise update from the current symbol decisions `s_full` (pilots and
/// soft data). Returns `(θ̂, η̂)`.
pub fn track_pn_data(
    ctx: &ReceiverContext,
    link: &LinkModel,
    y: &CVec,
    s_full: &CVec,
    sigma: &HermitianSolver,
) -> Result<(RVec, RVec)> {
    let basis = &ctx.pn.basis;
    let u = link.combined(&RVec::zeros(ctx.n)) * s_full;
    let m = scale_rows(&(&u * J), &basis.pi.map(C64::from));
    let mw = sigma.whiten(&m);
    let rw = sigma.whiten_vec(&(y - &u));
    let mut lhs: RMat = (mw.adjoint() * &mw).map(|z| z.re);
    for k in 0..basis.m {
        lhs[(k, k)] += 0.5;
    }
    let rhs = (mw.adjoint() * rw).map(|z| z.re);
    let eta = SymmetricSolver::new(lhs, "data-phase phase-noise normal matrix")?.solve_vec(&rhs);
    Ok((&basis.pi * &eta, eta))
}

/// Generalized least-squares soft estimate of the data subcarriers.
pub fn detect_data(
    link: &LinkModel,
    y: &CVec,
    theta: &RVec,
    template: &CombTemplate,
    sigma: &HermitianSolver,
) -> Result<CVec> {
    if template.data_indices.is_empty() {
        return Ok(CVec::zeros(0));
    }
    let t = link.combined(theta);
    let t_p = columns(&t, &template.pilot_indices);
    let t_d = columns(&t, &template.data_indices);
    let rhs = y - t_p * &template.pilot_values;
    Ok(crate::linalg::gls(&t_d, &rhs, sigma)?.0)
}

/// Detection objective: `log det Σ + (y − μ)ᴴ Σ⁻¹ (y − μ) + ½‖η‖²`.
pub fn detection_objective(link: &LinkModel, y: &CVec, theta: &RVec, eta: &RVec, s_full: &CVec, sigma: &HermitianSolver) -> f64 {
    let mu = link.combined(theta) * s_full;
    sigma.log_det() + sigma.quad_form(&(y - mu)) + 0.5 * eta.norm_squared()
}

#[derive(Clone, Debug, PartialEq)]
pub struct DetectionResult {
    pub theta_hat: RVec,
    pub soft_symbols: CVec,
    pub hard_bits: Vec<u8>,
    pub iterations: usize,
    pub objective_trace: Vec<f64>,
    pub diverged: bool,
}

pub fn run_detection(
    ctx: &ReceiverContext,
    link: &LinkModel,
    know: &ChannelKnowledge,
    y: &CVec,
    template: &CombTemplate,
) -> Result<DetectionResult> {
    let n = ctx.n;
    if y.len() != n || template.n != n {
        return Err(dim_err(format!("received symbol and template must have length {n}")));
    }
    let fixed_theta = match ctx.mode {
        DetectorMode::IgnorePn => Some(RVec::zeros(n)),
        DetectorMode::Genie => Some(
            know.theta.clone().ok_or_else(|| Error::InvalidConfig("genie detection needs the true phase noise".into()))?,
        ),
        DetectorMode::Proposed => None,
    };

    if let Some(theta) = fixed_theta {
        let sigma = HermitianSolver::new(link.sigma(&theta), "relay noise covariance")?;
        let soft = detect_data(link, y, &theta, template, &sigma)?;
        let s_full = template.assemble(&soft)?;
        let q = detection_objective(link, y, &theta, &RVec::zeros(ctx.pn.basis.m), &s_full, &sigma);
        return Ok(DetectionResult {
            hard_bits: qpsk_demap(&soft),
            theta_hat: theta,
            soft_symbols: soft,
            iterations: 0,
            objective_trace: vec![q],
            diverged: false,
        });
    }

    // Training-style start: no phase-noise estimate, prior-averaged covariance.
    let mut theta = RVec::zeros(n);
    let mut eta = RVec::zeros(ctx.pn.basis.m);
    let sigma0 = HermitianSolver::new(link.sigma_prior(&ctx.pn.covariance), "initial relay noise covariance")?;
    let mut soft = detect_data(link, y, &theta, template, &sigma0)?;
    let mut sigma = HermitianSolver::new(link.sigma(&theta), "relay noise covariance")?;
    let mut trace = vec![detection_objective(link, y, &theta, &eta, &template.assemble(&soft)?, &sigma)];
    let mut best = (trace[0], theta.clone(), soft.clone());
    let mut rising = 0;
    let mut diverged = false;
    let mut iterations = 0;

    for _ in 0..ctx.max_iters {
        let s_full = template.assemble(&soft)?;
        let (t, e) = track_pn_data(ctx, link, y, &s_full, &sigma)?;
        theta = t;
        eta = e;
        sigma = HermitianSolver::new(link.sigma(&theta), "relay noise covariance")?;
        soft = detect_data(link, y, &theta, template, &sigma)?;
        iterations += 1;

        let q = detection_objective(link, y, &theta, &eta, &template.assemble(&soft)?, &sigma);
        let prev = *trace.last().expect("non-empty trace");
        trace.push(q);
        if q < best.0 {
            best = (q, theta.clone(), soft.clone());
        }
        if (q - prev).abs() <= ctx.epsilon() {
            break;
        }
        if q > prev {
            rising += 1;
            if rising >= 3 {
                diverged = true;
                break;
            }
        } else {
            rising = 0;
        }
    }
    if diverged {
        theta = best.1;
        soft = best.2;
    }
    Ok(DetectionResult {
        hard_bits: qpsk_demap(&soft),
        theta_hat: theta,
        soft_symbols: soft,
        iterations,
        objective_trace: trace,
        diverged,
    })
}
