// A small seeded sweep over SNR, written as CSV to stdout. The same call
// backs the `relay-sim` binary.

use ofdm_relay::harness::{run_sweep, write_csv, SweepMode, SweepSpec};

pub fn run() -> Result<(), Box<dyn std::error::Error>> {
    let spec = SweepSpec {
        snr_points: vec![10.0, 20.0, 30.0],
        n_trials: 8,
        mode: SweepMode::All,
        data_symbols: 2,
        bound_channels: 1,
        bound_pn_draws: 10,
        seed: 42,
        ..Default::default()
    };
    let rows = run_sweep(&spec)?;
    write_csv(&rows, std::io::stdout().lock())?;
    Ok(())
}

fn main() {
    run().unwrap();
}
