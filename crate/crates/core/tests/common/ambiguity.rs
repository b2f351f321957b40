//! Invariance of metrics and detection under the ambiguity group, measured as
//! the worst relative discrepancy over random states.

use std::sync::Arc;

use ofdm_relay::ambiguity::AmbiguityTransform;
use ofdm_relay::estimator::{EstimatorConfig, EstimatorContext, EstimatorOutput, PnModel};
use ofdm_relay::linalg::{CMat, CVec, HermitianSolver};
use ofdm_relay::metrics::{mse_cfo_pn, mse_channel};
use ofdm_relay::receiver::*;
use ofdm_relay::signal_model::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[derive(Debug, Default, Clone, Copy)]
pub struct Violations {
    pub metrics: f64,
    pub observation: f64,
    pub detection_inputs: f64,
    pub soft_symbols: f64,
    pub decision_flips: usize,
}

impl Violations {
    pub fn worst(&self) -> f64 {
        self.metrics.max(self.observation).max(self.detection_inputs).max(self.soft_symbols)
    }
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1e-300)
}

fn mat_rel(a: &CMat, b: &CMat) -> f64 {
    (a - b).camax() / a.camax().max(1e-300)
}

fn vec_rel(a: &CVec, b: &CVec) -> f64 {
    (a - b).camax() / a.camax().max(1e-300)
}

/// An estimate near `truth`: perturbed channels and phases.
fn noisy_estimate(truth: &LinkState, rng: &mut ChaCha8Rng) -> EstimatorOutput {
    let n = truth.n();
    let g = truth.g.taps() + complex_gaussian(truth.g.len(), 0.01, rng);
    let h = truth.h.taps() + complex_gaussian(truth.h.len(), 0.01, rng);
    let c = ofdm_relay::linalg::convolve(&g, &h);
    let jitter = |rng: &mut ChaCha8Rng| generate_wiener_pn(n, 1e-4, rng).unwrap();
    EstimatorOutput {
        h,
        g,
        c,
        phi_sd: truth.phi_sd + 1e-3,
        phi_rd: truth.phi_rd - 1e-3,
        theta_sd: &truth.theta_sd + jitter(rng),
        theta_rd: &truth.theta_rd + jitter(rng),
        eta_sd: ofdm_relay::linalg::RVec::zeros(0),
        sigma_r: CMat::identity(n, n),
        nllf_trace: Vec::new(),
        iterations: 0,
        converged: true,
        diverged: false,
        regularized: false,
    }
}

pub fn check(states: usize, seed: u64) -> Violations {
    let mut cfg = SimConfig::default();
    cfg.set_snr_db(20.0);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = cfg.n_subcarriers;
    let src = qpsk_training(n, cfg.p_src, &mut rng);
    let rel_s = qpsk_training(n, cfg.p_relay, &mut rng);
    let est_ctx = EstimatorContext::new(&cfg, EstimatorConfig::for_sim(&cfg), src, rel_s).unwrap();
    let pn = Arc::new(PnModel::new(n, cfg.pn_var_sd, cfg.subspace_dim).unwrap());
    let rx = ReceiverContext::new(&cfg, pn, DetectorMode::Genie).unwrap();
    let template = CombTemplate::from_config(&cfg).unwrap();

    let mut v = Violations::default();
    for _ in 0..states {
        let truth = LinkState::draw(&cfg, &mut rng).unwrap();
        let t = AmbiguityTransform::random(&mut rng);

        // Metrics of a transformed estimate.
        let est = noisy_estimate(&truth, &mut rng);
        let moved = t.apply_estimate(&est);
        let m = [
            rel(mse_channel(&est.g, truth.g.taps()).unwrap().mse, mse_channel(&moved.g, truth.g.taps()).unwrap().mse),
            rel(mse_channel(&est.h, truth.h.taps()).unwrap().mse, mse_channel(&moved.h, truth.h.taps()).unwrap().mse),
            rel(
                mse_cfo_pn(est.phi_sd, &est.theta_sd, truth.phi_sd, &truth.theta_sd).unwrap(),
                mse_cfo_pn(moved.phi_sd, &moved.theta_sd, truth.phi_sd, &truth.theta_sd).unwrap(),
            ),
            rel(
                mse_cfo_pn(est.phi_rd, &est.theta_rd, truth.phi_rd, &truth.theta_rd).unwrap(),
                mse_cfo_pn(moved.phi_rd, &moved.theta_rd, truth.phi_rd, &truth.theta_rd).unwrap(),
            ),
        ];
        v.metrics = m.iter().fold(v.metrics, |a, &b| a.max(b));

        // Training observation distribution.
        let alt = t.apply_link(&truth);
        let o = [
            vec_rel(&est_ctx.mean_s(&truth.c, truth.phi_sd, &truth.theta_sd), &est_ctx.mean_s(&alt.c, alt.phi_sd, &alt.theta_sd)),
            vec_rel(
                &est_ctx.mean_r(truth.g.taps(), truth.phi_rd, &truth.theta_rd),
                &est_ctx.mean_r(alt.g.taps(), alt.phi_rd, &alt.theta_rd),
            ),
            mat_rel(
                &est_ctx.sigma_r(truth.g.taps(), truth.phi_sd, &truth.theta_sd),
                &est_ctx.sigma_r(alt.g.taps(), alt.phi_sd, &alt.theta_sd),
            ),
        ];
        v.observation = o.iter().fold(v.observation, |a, &b| a.max(b));

        // Detection: the combined channel and covariance, then the decisions.
        let know = ChannelKnowledge::genie(&truth);
        let know_alt = t.apply_knowledge(&know);
        let (link, link_alt) = (LinkModel::new(&rx, &know), LinkModel::new(&rx, &know_alt));
        let (th, th_alt) = (know.theta.clone().unwrap(), know_alt.theta.clone().unwrap());
        let d = [
            mat_rel(&link.combined(&th), &link_alt.combined(&th_alt)),
            mat_rel(&link.sigma(&th), &link_alt.sigma(&th_alt)),
        ];
        v.detection_inputs = d.iter().fold(v.detection_inputs, |a, &b| a.max(b));

        let sym = CombSymbol::random(&template, &mut rng).unwrap();
        let y = synthesize_data_symbol(&cfg, &truth, &sym.values, &mut rng).unwrap();
        let a = run_detection(&rx, &link, &know, &y, &template).unwrap();
        let b = run_detection(&rx, &link_alt, &know_alt, &y, &template).unwrap();
        v.soft_symbols = v.soft_symbols.max(vec_rel(&a.soft_symbols, &b.soft_symbols));
        v.decision_flips += a.hard_bits.iter().zip(&b.hard_bits).filter(|(x, y)| x != y).count();

        // Σ-weighted detection residual is the same function of the data.
        let sa = HermitianSolver::new(link.sigma(&th), "Σ").unwrap();
        let sb = HermitianSolver::new(link_alt.sigma(&th_alt), "Σ").unwrap();
        let ra = sa.quad_form(&(&y - link.combined(&th) * &sym.values));
        let rb = sb.quad_form(&(&y - link_alt.combined(&th_alt) * &sym.values));
        v.detection_inputs = v.detection_inputs.max(rel(ra, rb));
    }
    v
}
