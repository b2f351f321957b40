// One training exchange over the default 64-subcarrier relay link, followed
// by joint estimation of both channels, both CFOs and both phase-noise
// paths.

use ofdm_relay::estimator::{run_joint_estimation, EstimatorConfig, EstimatorContext};
use ofdm_relay::metrics::{mse_cfo_pn, mse_channel};
use ofdm_relay::signal_model::{qpsk_training, synthesize_training, LinkState, SimConfig};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub fn run() -> ofdm_relay::Result<()> {
    let mut cfg = SimConfig::default();
    cfg.set_snr_db(25.0);
    cfg.set_pn_var(1e-4);
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let s_src = qpsk_training(cfg.n_subcarriers, cfg.p_src, &mut rng);
    let s_relay = qpsk_training(cfg.n_subcarriers, cfg.p_relay, &mut rng);
    let ctx = EstimatorContext::new(&cfg, EstimatorConfig::for_sim(&cfg), s_src.clone(), s_relay.clone())?;

    let truth = LinkState::draw(&cfg, &mut rng)?;
    let obs = synthesize_training(&cfg, &truth, &s_src, &s_relay, &mut rng)?;
    let est = run_joint_estimation(&ctx, &obs)?;

    println!("iterations {} (converged: {})", est.iterations, est.converged);
    println!("φ_sd  true {:+.5}  est {:+.5}", truth.phi_sd, est.phi_sd);
    println!("φ_rd  true {:+.5}  est {:+.5}", truth.phi_rd, est.phi_rd);
    println!("MSE g        {:.3e}", mse_channel(&est.g, truth.g.taps())?.mse);
    println!("MSE h        {:.3e}", mse_channel(&est.h, truth.h.taps())?.mse);
    println!("MSE CFO+PN   {:.3e}", mse_cfo_pn(est.phi_sd, &est.theta_sd, truth.phi_sd, &truth.theta_sd)?);
    let first = est.nllf_trace[0];
    let last = *est.nllf_trace.last().unwrap();
    println!("negative log-likelihood {first:.2} -> {last:.2}");
    Ok(())
}

fn main() {
    run().unwrap();
}
