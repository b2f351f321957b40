// Wiener phase noise and its reduced-rank eigenbasis: how much of the
// process a few eigenvectors carry, and how well a projected path follows
// the original.

use ofdm_relay::pn_subspace::{captured_fraction, PnBasis};
use ofdm_relay::signal_model::generate_wiener_pn;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub fn run() -> ofdm_relay::Result<()> {
    let n = 64;
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for sigma2 in [1e-5, 1e-4, 1e-3] {
        let full = PnBasis::wiener(n, sigma2, n)?;
        println!("σ² = {sigma2:e}");
        for m in [2, 4, 8, 16, 32] {
            println!("  M = {m:2}: {:.4} of the trace", captured_fraction(&full.eigvals, m));
        }
        let basis = PnBasis::wiener(n, sigma2, 16)?;
        let theta = generate_wiener_pn(n, sigma2, &mut rng)?;
        let residual = (&theta - basis.project(&theta)).norm_squared() / theta.norm_squared();
        println!("  one path projected on M = 16 keeps all but {:.3}% of its energy", 100.0 * residual);
    }
    Ok(())
}

fn main() {
    run().unwrap();
}
