// Hybrid Cramér–Rao bound for a small link, next to the estimator's
// empirical MSE at the same operating points.

use ofdm_relay::estimator::{run_joint_estimation, EstimatorConfig, EstimatorContext};
use ofdm_relay::hcrlb::{hcrlb, BoundContext};
use ofdm_relay::metrics::{mse_cfo_pn, mse_channel};
use ofdm_relay::signal_model::{qpsk_training, synthesize_training, LinkState, SimConfig};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub fn run() -> ofdm_relay::Result<()> {
    let base = SimConfig { n_subcarriers: 16, cp_len: 8, l_h: 3, l_g: 3, subspace_dim: 8, pilot_count: 8, ..Default::default() };
    let trials = 20;
    println!("snr   bound g    est g      bound h    est h      bound δ    est δ");
    for snr in [10.0, 20.0, 30.0] {
        let mut cfg = base.clone();
        cfg.set_snr_db(snr);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let s_src = qpsk_training(cfg.n_subcarriers, cfg.p_src, &mut rng);
        let s_relay = qpsk_training(cfg.n_subcarriers, cfg.p_relay, &mut rng);
        let bctx = BoundContext::new(&cfg, &s_src, &s_relay)?;
        let ectx = EstimatorContext::new(&cfg, EstimatorConfig::for_sim(&cfg), s_src.clone(), s_relay.clone())?;

        let mut bound = [0.0; 3];
        let mut est = [0.0; 3];
        for _ in 0..trials {
            let truth = LinkState::draw(&cfg, &mut rng)?;
            let b = hcrlb(&bctx, &truth, 20, &mut rng)?;
            let obs = synthesize_training(&cfg, &truth, &s_src, &s_relay, &mut rng)?;
            let e = run_joint_estimation(&ectx, &obs)?;
            bound[0] += b.mse_g;
            bound[1] += b.mse_h;
            bound[2] += b.mse_cfo_pn;
            est[0] += mse_channel(&e.g, truth.g.taps())?.mse;
            est[1] += mse_channel(&e.h, truth.h.taps())?.mse;
            est[2] += mse_cfo_pn(e.phi_sd, &e.theta_sd, truth.phi_sd, &truth.theta_sd)?;
        }
        let k = trials as f64;
        println!(
            "{snr:>4}  {:.3e}  {:.3e}  {:.3e}  {:.3e}  {:.3e}  {:.3e}",
            bound[0] / k,
            est[0] / k,
            bound[1] / k,
            est[1] / k,
            bound[2] / k,
            est[2] / k
        );
    }
    Ok(())
}

fn main() {
    run().unwrap();
}
