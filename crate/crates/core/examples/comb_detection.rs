// Comb-pilot data detection after training: the phase-noise-tracking
// receiver against one that ignores phase noise and one that knows it.

use std::sync::Arc;

use ofdm_relay::estimator::{run_joint_estimation, EstimatorConfig, EstimatorContext};
use ofdm_relay::metrics::bit_errors;
use ofdm_relay::receiver::{run_detection, ChannelKnowledge, CombSymbol, CombTemplate, DetectorMode, LinkModel, ReceiverContext};
use ofdm_relay::signal_model::{qpsk_training, synthesize_data_symbol, synthesize_training, LinkState, SimConfig};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub fn run() -> ofdm_relay::Result<()> {
    let mut cfg = SimConfig::default();
    cfg.set_snr_db(30.0);
    cfg.set_pn_var(1e-4);
    let n = cfg.n_subcarriers;
    let slot = n + cfg.cp_len;
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    let s_src = qpsk_training(n, cfg.p_src, &mut rng);
    let s_relay = qpsk_training(n, cfg.p_relay, &mut rng);
    let ectx = EstimatorContext::new(&cfg, EstimatorConfig::for_sim(&cfg), s_src.clone(), s_relay.clone())?;
    let template = CombTemplate::from_config(&cfg)?;

    let frames = 4;
    for mode in [DetectorMode::Proposed, DetectorMode::IgnorePn, DetectorMode::Genie] {
        let rx = ReceiverContext::new(&cfg, Arc::clone(&ectx.pn_sd), mode)?;
        let mut frame_rng = ChaCha8Rng::seed_from_u64(99);
        let (mut errors, mut bits) = (0, 0);
        for _ in 0..frames {
            let truth = LinkState::draw(&cfg, &mut frame_rng)?;
            let obs = synthesize_training(&cfg, &truth, &s_src, &s_relay, &mut frame_rng)?;
            let est = run_joint_estimation(&ectx, &obs)?;
            let know = ChannelKnowledge::from_estimate(&est);
            // Only the first data symbol, two slots after the source training.
            let state = truth.next_symbol(2 * slot, cfg.pn_var_sd, &mut frame_rng)?;
            let sym = CombSymbol::random(&template, &mut frame_rng)?;
            let y = synthesize_data_symbol(&cfg, &state, &sym.values, &mut frame_rng)?;
            let know = match mode {
                DetectorMode::Genie => ChannelKnowledge::genie(&state),
                DetectorMode::Proposed => {
                    know.with_phase(est.theta_sd[n - 1] + 2.0 * std::f64::consts::PI * est.phi_sd * (2 * slot) as f64 / n as f64)
                }
                DetectorMode::IgnorePn => know.with_phase(2.0 * std::f64::consts::PI * est.phi_sd * (2 * slot) as f64 / n as f64),
            };
            let det = run_detection(&rx, &LinkModel::new(&rx, &know), &know, &y, &template)?;
            errors += bit_errors(&det.hard_bits, &sym.bits);
            bits += sym.bits.len();
        }
        println!("{:>9}: {errors:4} errors in {bits} bits", mode.name());
    }
    Ok(())
}

fn main() {
    run().unwrap();
}
