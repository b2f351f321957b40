// The estimation problem cannot tell a common rotation of the channels or a
// CFO that is traded against a linear phase-noise ramp from the truth. The
// error metrics are built to be blind to exactly those moves.

use ofdm_relay::ambiguity::AmbiguityTransform;
use ofdm_relay::estimator::{run_joint_estimation, EstimatorConfig, EstimatorContext};
use ofdm_relay::metrics::{mse_cfo_pn, mse_channel};
use ofdm_relay::signal_model::{qpsk_training, synthesize_training, LinkState, SimConfig};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub fn run() -> ofdm_relay::Result<()> {
    let mut cfg = SimConfig::default();
    cfg.set_snr_db(20.0);
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let s_src = qpsk_training(cfg.n_subcarriers, cfg.p_src, &mut rng);
    let s_relay = qpsk_training(cfg.n_subcarriers, cfg.p_relay, &mut rng);
    let ctx = EstimatorContext::new(&cfg, EstimatorConfig::for_sim(&cfg), s_src.clone(), s_relay.clone())?;
    let truth = LinkState::draw(&cfg, &mut rng)?;
    let est = run_joint_estimation(&ctx, &synthesize_training(&cfg, &truth, &s_src, &s_relay, &mut rng)?)?;

    let metrics = |e: &ofdm_relay::estimator::EstimatorOutput| -> ofdm_relay::Result<[f64; 3]> {
        Ok([
            mse_channel(&e.g, truth.g.taps())?.mse,
            mse_channel(&e.h, truth.h.taps())?.mse,
            mse_cfo_pn(e.phi_sd, &e.theta_sd, truth.phi_sd, &truth.theta_sd)?,
        ])
    };
    let base = metrics(&est)?;
    println!("estimate:          g {:.6e}  h {:.6e}  δ {:.6e}", base[0], base[1], base[2]);
    for _ in 0..3 {
        let t = AmbiguityTransform::random(&mut rng);
        let moved = t.apply_estimate(&est);
        let m = metrics(&moved)?;
        println!(
            "φ_g {:+.2} φ_h {:+.2} ε {:+.2}: g {:.6e}  h {:.6e}  δ {:.6e}   (CFO {:+.4} -> {:+.4})",
            t.phi_g, t.phi_h, t.eps_sd, m[0], m[1], m[2], est.phi_sd, moved.phi_sd
        );
    }
    Ok(())
}

fn main() {
    run().unwrap();
}
