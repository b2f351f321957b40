//! Monte Carlo driver: `relay-sim --mode all --snr 0,10,20 --trials 200 --out results.csv`.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use ofdm_relay::harness::{emit_csv, run_sweep, write_csv, SweepMode, SweepSpec};
use ofdm_relay::receiver::DetectorMode;
use ofdm_relay::signal_model::CfoSpec;

/// Seed used when neither `--seed` nor the configuration file sets one.
const SEED_ENV: &str = "RELAY_SIM_SEED";

#[derive(Parser, Debug)]
#[command(version, about = "Channel/CFO/phase-noise estimation and detection sweeps for AF OFDM relaying")]
struct Cli {
    /// TOML sweep description; flags override its values.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, value_parser = parse_mode)]
    mode: Option<SweepMode>,
    /// SNR points in dB, comma separated.
    #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
    snr: Option<Vec<f64>>,
    /// Phase-noise innovation variances (rad²), comma separated.
    #[arg(long = "pn-var", value_delimiter = ',')]
    pn_var: Option<Vec<f64>>,
    /// Phase-noise subspace dimensions, comma separated.
    #[arg(long, value_delimiter = ',')]
    m: Option<Vec<usize>>,
    #[arg(long)]
    trials: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// Output CSV; standard output when absent.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads.
    #[arg(long)]
    jobs: Option<usize>,
    #[arg(long, value_parser = parse_receiver)]
    receiver: Option<DetectorMode>,
    /// Data symbols per frame in detection runs.
    #[arg(long)]
    data_symbols: Option<usize>,
    /// Fix the source–destination CFO instead of drawing it per trial.
    #[arg(long, allow_negative_numbers = true)]
    cfo_sd: Option<f64>,
    /// Fix the relay–destination CFO instead of drawing it per trial.
    #[arg(long, allow_negative_numbers = true)]
    cfo_rd: Option<f64>,
}

fn parse_mode(s: &str) -> Result<SweepMode, String> {
    s.parse().map_err(|e: ofdm_relay::Error| e.to_string())
}

fn parse_receiver(s: &str) -> Result<DetectorMode, String> {
    s.parse().map_err(|e: ofdm_relay::Error| e.to_string())
}

fn build_spec(cli: Cli) -> ofdm_relay::Result<SweepSpec> {
    let (mut spec, file_has_seed) = match &cli.config {
        Some(path) => {
            let text = std::fs::read_to_string(path).map_err(|source| ofdm_relay::Error::Io { path: path.clone(), source })?;
            let seeded = text.parse::<toml::Table>().is_ok_and(|t| t.contains_key("seed"));
            (SweepSpec::from_toml_str(&text)?, seeded)
        }
        None => (SweepSpec::default(), false),
    };
    if !file_has_seed {
        if let Ok(v) = std::env::var(SEED_ENV) {
            spec.seed = v.trim().parse().map_err(|_| ofdm_relay::Error::Parse {
                what: SEED_ENV.into(),
                msg: format!("`{v}` is not an unsigned integer"),
            })?;
        }
    }
    if let Some(v) = cli.mode {
        spec.mode = v;
    }
    if let Some(v) = cli.snr {
        spec.snr_points = v;
    }
    if let Some(v) = cli.pn_var {
        spec.pn_vars = v;
    }
    if let Some(v) = cli.m {
        spec.m_values = v;
    }
    if let Some(v) = cli.trials {
        spec.n_trials = v;
    }
    if let Some(v) = cli.seed {
        spec.seed = v;
    }
    if let Some(v) = cli.out {
        spec.output = Some(v);
    }
    if let Some(v) = cli.jobs {
        spec.jobs = Some(v);
    }
    if let Some(v) = cli.receiver {
        spec.receiver = v;
    }
    if let Some(v) = cli.data_symbols {
        spec.data_symbols = v;
    }
    if let Some(v) = cli.cfo_sd {
        spec.scenario.cfo_sd = CfoSpec::Fixed(v);
    }
    if let Some(v) = cli.cfo_rd {
        spec.scenario.cfo_rd = CfoSpec::Fixed(v);
    }
    Ok(spec)
}

fn run(cli: Cli) -> ofdm_relay::Result<()> {
    let spec = build_spec(cli)?;
    let rows = run_sweep(&spec)?;
    match &spec.output {
        Some(path) => emit_csv(&rows, path),
        None => write_csv(&rows, std::io::stdout().lock())
            .map_err(|source| ofdm_relay::Error::Io { path: PathBuf::from("<stdout>"), source }),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
