//! Monte Carlo sweeps over SNR, phase-noise variance and subspace dimension.
//!
//! Every trial draws from its own ChaCha stream keyed by the master seed,
//! the grid point's values and the trial index, so results do not depend on
//! the evaluation order, the grid layout or the number of worker threads.

mod csv;

use std::f64::consts::PI;
use std::path::PathBuf;
use std::str::FromStr;
use std::sync::Arc;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use csv::{emit_csv, parse_csv, write_csv, CSV_HEADER};

use crate::error::{Error, Result};
use crate::estimator::{run_joint_estimation, EstimatorConfig, EstimatorContext, EstimatorOutput};
use crate::hcrlb::{hcrlb, BoundContext};
use crate::linalg::CVec;
use crate::metrics::{bit_errors, mse_cfo_pn, mse_channel, TrialMetrics};
use crate::receiver::{run_detection, ChannelKnowledge, CombSymbol, CombTemplate, DetectorMode, LinkModel, ReceiverContext};
use crate::signal_model::{qpsk_training, synthesize_data_symbol, synthesize_training, LinkState, SimConfig};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SweepMode {
    Estimate,
    Detect,
    Bound,
    All,
}

impl SweepMode {
    pub fn name(self) -> &'static str {
        match self {
            SweepMode::Estimate => "estimate",
            SweepMode::Detect => "detect",
            SweepMode::Bound => "bound",
            SweepMode::All => "all",
        }
    }

    fn estimates(self) -> bool {
        matches!(self, SweepMode::Estimate | SweepMode::Detect | SweepMode::All)
    }

    fn detects(self) -> bool {
        matches!(self, SweepMode::Detect | SweepMode::All)
    }

    fn bounds(self) -> bool {
        matches!(self, SweepMode::Bound | SweepMode::All)
    }
}

impl FromStr for SweepMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        [SweepMode::Estimate, SweepMode::Detect, SweepMode::Bound, SweepMode::All]
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| Error::Parse { what: "mode".into(), msg: format!("unknown mode `{s}` (estimate, detect, bound, all)") })
    }
}

/// A sweep description; deserializable from TOML with the scenario in a
/// `[scenario]` table.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepSpec {
    pub scenario: SimConfig,
    pub snr_points: Vec<f64>,
    pub pn_vars: Vec<f64>,
    pub m_values: Vec<usize>,
    pub n_trials: usize,
    pub mode: SweepMode,
    pub receiver: DetectorMode,
    /// Comb-type data symbols per trial in detection runs.
    pub data_symbols: usize,
    /// Channel realizations the bound is averaged over, per grid point.
    pub bound_channels: usize,
    /// Phase-noise draws per channel realization in the BIM.
    pub bound_pn_draws: usize,
    pub seed: u64,
    /// Worker threads; `None` uses the global rayon pool.
    pub jobs: Option<usize>,
    pub output: Option<PathBuf>,
}

impl Default for SweepSpec {
    fn default() -> Self {
        Self {
            scenario: SimConfig::default(),
            snr_points: (0..=8).map(|k| 5.0 * k as f64).collect(),
            pn_vars: vec![1e-4],
            m_values: vec![32],
            n_trials: 100,
            mode: SweepMode::Estimate,
            receiver: DetectorMode::Proposed,
            data_symbols: 10,
            bound_channels: 10,
            bound_pn_draws: 200,
            seed: 0,
            jobs: None,
            output: None,
        }
    }
}

impl SweepSpec {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Parse { what: "sweep configuration".into(), msg: e.to_string() })
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: &str| Err(Error::InvalidConfig(msg.into()));
        if self.snr_points.is_empty() || self.pn_vars.is_empty() || self.m_values.is_empty() {
            return bad("SNR, phase-noise variance and M lists must be non-empty");
        }
        if self.n_trials == 0 {
            return bad("n_trials must be at least 1");
        }
        if self.mode.detects() && self.data_symbols == 0 {
            return bad("detection needs at least one data symbol per trial");
        }
        if self.mode.bounds() && (self.bound_channels == 0 || self.bound_pn_draws == 0) {
            return bad("the bound needs at least one channel and one phase-noise draw");
        }
        if self.jobs == Some(0) {
            return bad("jobs must be positive");
        }
        if self.snr_points.iter().chain(&self.pn_vars).any(|v| !v.is_finite()) {
            return bad("grid values must be finite");
        }
        for p in self.grid() {
            p.config(&self.scenario).validate()?;
        }
        Ok(())
    }

    /// Grid points in SNR-major order.
    pub fn grid(&self) -> Vec<GridPoint> {
        let mut out = Vec::new();
        for &snr_db in &self.snr_points {
            for &pn_var in &self.pn_vars {
                for &m in &self.m_values {
                    out.push(GridPoint { snr_db, pn_var, m });
                }
            }
        }
        out
    }

    /// Value of the CSV `mode` column, e.g. `all:proposed`.
    pub fn mode_label(&self) -> String {
        if self.mode.detects() {
            format!("{}:{}", self.mode.name(), self.receiver.name())
        } else {
            self.mode.name().to_string()
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GridPoint {
    pub snr_db: f64,
    pub pn_var: f64,
    pub m: usize,
}

impl GridPoint {
    pub fn config(&self, base: &SimConfig) -> SimConfig {
        let mut cfg = base.clone();
        cfg.set_snr_db(self.snr_db);
        cfg.set_pn_var(self.pn_var);
        cfg.subspace_dim = self.m;
        cfg
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Stream {
    Trial(u64),
    /// Training symbols shared by every trial of a grid point.
    Training,
    /// Channel realization used for the bound.
    BoundChannel(u64),
}

/// The independent random stream for one trial (or per-point draw).
pub fn stream_rng(master: u64, point: &GridPoint, stream: Stream) -> ChaCha8Rng {
    let (domain, index) = match stream {
        Stream::Trial(t) => (0u64, t),
        Stream::Training => (1, 0),
        Stream::BoundChannel(c) => (2, c),
    };
    assert!(index < 1 << 40 && (point.m as u64) < 1 << 22, "stream index out of range");
    let words = [master, point.snr_db.to_bits(), point.pn_var.to_bits(), domain << 62 | (point.m as u64) << 40 | index];
    let mut seed = [0u8; 32];
    for (chunk, w) in seed.chunks_exact_mut(8).zip(words) {
        chunk.copy_from_slice(&w.to_le_bytes());
    }
    ChaCha8Rng::from_seed(seed)
}

/// Everything a grid point's trials share.
pub struct PointContext {
    pub point: GridPoint,
    pub cfg: SimConfig,
    pub s_src: CVec,
    pub s_relay: CVec,
    /// Estimator for the selected receiver (PN-unaware for `IgnorePn`).
    pub estimator: EstimatorContext,
    pub template: CombTemplate,
    pub receiver: ReceiverContext,
}

impl PointContext {
    pub fn new(spec: &SweepSpec, point: GridPoint) -> Result<Self> {
        let cfg = point.config(&spec.scenario);
        cfg.validate()?;
        let n = cfg.n_subcarriers;
        let mut rng = stream_rng(spec.seed, &point, Stream::Training);
        let s_src = qpsk_training(n, cfg.p_src, &mut rng);
        let s_relay = qpsk_training(n, cfg.p_relay, &mut rng);
        let mut est_cfg = EstimatorConfig::for_sim(&cfg);
        est_cfg.ignore_pn = spec.mode.detects() && spec.receiver == DetectorMode::IgnorePn;
        let estimator = EstimatorContext::new(&cfg, est_cfg, s_src.clone(), s_relay.clone())?;
        let template = CombTemplate::from_config(&cfg)?;
        let receiver = ReceiverContext::new(&cfg, Arc::clone(&estimator.pn_sd), spec.receiver)?;
        Ok(Self { point, cfg, s_src, s_relay, estimator, template, receiver })
    }
}

/// One trial's outcome. Inapplicable metrics are NaN; `iterations` only
/// means something when `estimated` is set.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TrialRecord {
    pub metrics: TrialMetrics,
    pub estimated: bool,
}

fn estimation_metrics(est: &EstimatorOutput, state: &LinkState) -> Result<TrialMetrics> {
    Ok(TrialMetrics {
        mse_g: mse_channel(&est.g, state.g.taps())?.mse,
        mse_h: mse_channel(&est.h, state.h.taps())?.mse,
        mse_cfo_pn: mse_cfo_pn(est.phi_sd, &est.theta_sd, state.phi_sd, &state.theta_sd)?,
        ber: f64::NAN,
        iterations: est.iterations,
        converged: est.converged,
        diverged: est.diverged,
    })
}

/// Runs trial `t` of a grid point.
pub fn run_trial(spec: &SweepSpec, ctx: &PointContext, t: u64) -> Result<TrialRecord> {
    let mut rng = stream_rng(spec.seed, &ctx.point, Stream::Trial(t));
    let cfg = &ctx.cfg;
    let state = LinkState::draw(cfg, &mut rng)?;
    let needs_estimate = spec.mode.estimates() && !(spec.mode.detects() && spec.receiver == DetectorMode::Genie);
    let mut metrics = TrialMetrics {
        mse_g: f64::NAN,
        mse_h: f64::NAN,
        mse_cfo_pn: f64::NAN,
        ber: f64::NAN,
        iterations: 0,
        converged: false,
        diverged: false,
    };
    let mut estimate = None;
    if needs_estimate {
        let obs = synthesize_training(cfg, &state, &ctx.s_src, &ctx.s_relay, &mut rng)?;
        let est = run_joint_estimation(&ctx.estimator, &obs)?;
        metrics = estimation_metrics(&est, &state)?;
        estimate = Some(est);
    }

    if spec.mode.detects() {
        let know = match &estimate {
            Some(est) => ChannelKnowledge::from_estimate(est),
            None => ChannelKnowledge::genie(&state),
        };
        // Frame layout: source training, relay training, then the data symbols.
        // Estimate-based receivers carry their phase reference across the
        // frame: the phase estimated at the end of one symbol plus the CFO
        // phase predicted over the gap to the next.
        let n = cfg.n_subcarriers;
        let slot = n + cfg.cp_len;
        let mut sym_state = state.clone();
        let mut reference = estimate.as_ref().map_or(0.0, |e| e.theta_sd[n - 1]);
        let mut errors = 0usize;
        let mut total = 0usize;
        for k in 0..spec.data_symbols {
            let gap = if k == 0 { 2 * slot } else { slot };
            sym_state = sym_state.next_symbol(gap, cfg.pn_var_sd, &mut rng)?;
            let sym = CombSymbol::random(&ctx.template, &mut rng)?;
            let y = synthesize_data_symbol(cfg, &sym_state, &sym.values, &mut rng)?;
            reference += 2.0 * PI * know.phi * gap as f64 / n as f64;
            let know_sym = match ctx.receiver.mode {
                DetectorMode::Genie => ChannelKnowledge::genie(&sym_state),
                _ => know.with_phase(reference),
            };
            let link = LinkModel::new(&ctx.receiver, &know_sym);
            let det = run_detection(&ctx.receiver, &link, &know_sym, &y, &ctx.template)?;
            reference += det.theta_hat[n - 1];
            errors += bit_errors(&det.hard_bits, &sym.bits);
            total += sym.bits.len();
        }
        metrics.ber = errors as f64 / total.max(1) as f64;
    }
    Ok(TrialRecord { metrics, estimated: estimate.is_some() })
}

/// Bound averaged over `bound_channels` channel realizations of a grid point.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BoundSummary {
    pub mse_g: f64,
    pub mse_h: f64,
    pub mse_cfo_pn: f64,
    /// Realizations whose BIM needed a pseudo-inverse.
    pub pseudo_inverse: usize,
}

pub fn point_bound(spec: &SweepSpec, ctx: &PointContext) -> Result<BoundSummary> {
    let bctx = BoundContext::new(&ctx.cfg, &ctx.s_src, &ctx.s_relay)?;
    let mut sum = BoundSummary { mse_g: 0.0, mse_h: 0.0, mse_cfo_pn: 0.0, pseudo_inverse: 0 };
    for c in 0..spec.bound_channels as u64 {
        let mut rng = stream_rng(spec.seed, &ctx.point, Stream::BoundChannel(c));
        let state = LinkState::draw(&ctx.cfg, &mut rng)?;
        let report = hcrlb(&bctx, &state, spec.bound_pn_draws, &mut rng)?;
        sum.mse_g += report.mse_g;
        sum.mse_h += report.mse_h;
        sum.mse_cfo_pn += report.mse_cfo_pn;
        sum.pseudo_inverse += report.pseudo_inverse as usize;
    }
    let k = spec.bound_channels as f64;
    Ok(BoundSummary { mse_g: sum.mse_g / k, mse_h: sum.mse_h / k, mse_cfo_pn: sum.mse_cfo_pn / k, ..sum })
}

/// Sample mean and standard error of the mean (NaN below two samples).
pub fn mean_and_se(values: &[f64]) -> (f64, f64) {
    let n = values.len();
    if n == 0 {
        return (f64::NAN, f64::NAN);
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    if n < 2 {
        return (mean, f64::NAN);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    (mean, (var / n as f64).sqrt())
}

#[derive(Clone, Debug, PartialEq)]
pub struct ResultRow {
    pub snr_db: f64,
    pub pn_var: f64,
    pub m: usize,
    pub mode: String,
    pub mse_g: f64,
    pub mse_g_se: f64,
    pub mse_h: f64,
    pub mse_h_se: f64,
    pub mse_cfopn: f64,
    pub mse_cfopn_se: f64,
    pub ber: f64,
    pub ber_se: f64,
    pub hcrlb_g: f64,
    pub hcrlb_h: f64,
    pub hcrlb_cfopn: f64,
    pub iters_mean: f64,
    pub diverged_count: usize,
}

impl ResultRow {
    pub fn aggregate(point: GridPoint, mode: String, trials: &[TrialRecord], bound: Option<BoundSummary>) -> Self {
        let col = |f: fn(&TrialMetrics) -> f64| mean_and_se(&trials.iter().map(|t| f(&t.metrics)).collect::<Vec<_>>());
        let (mse_g, mse_g_se) = col(|m| m.mse_g);
        let (mse_h, mse_h_se) = col(|m| m.mse_h);
        let (mse_cfopn, mse_cfopn_se) = col(|m| m.mse_cfo_pn);
        let (ber, ber_se) = col(|m| m.ber);
        let iters: Vec<f64> = trials.iter().filter(|t| t.estimated).map(|t| t.metrics.iterations as f64).collect();
        Self {
            snr_db: point.snr_db,
            pn_var: point.pn_var,
            m: point.m,
            mode,
            mse_g,
            mse_g_se,
            mse_h,
            mse_h_se,
            mse_cfopn,
            mse_cfopn_se,
            ber,
            ber_se,
            hcrlb_g: bound.map_or(f64::NAN, |b| b.mse_g),
            hcrlb_h: bound.map_or(f64::NAN, |b| b.mse_h),
            hcrlb_cfopn: bound.map_or(f64::NAN, |b| b.mse_cfo_pn),
            iters_mean: mean_and_se(&iters).0,
            diverged_count: trials.iter().filter(|t| t.estimated && t.metrics.diverged).count(),
        }
    }
}

/// Per-trial records of one grid point, in trial order.
pub fn run_point(spec: &SweepSpec, ctx: &PointContext) -> Result<Vec<TrialRecord>> {
    let records: Vec<Result<TrialRecord>> =
        (0..spec.n_trials as u64).into_par_iter().map(|t| run_trial(spec, ctx, t)).collect();
    records.into_iter().collect()
}

fn sweep(spec: &SweepSpec) -> Result<Vec<ResultRow>> {
    let mut rows = Vec::new();
    for point in spec.grid() {
        let ctx = PointContext::new(spec, point)?;
        let trials = if spec.mode.estimates() || spec.mode.detects() { run_point(spec, &ctx)? } else { Vec::new() };
        let bound = if spec.mode.bounds() { Some(point_bound(spec, &ctx)?) } else { None };
        let row = ResultRow::aggregate(point, spec.mode_label(), &trials, bound);
        log::info!(
            "snr {} dB, pn {:e}, M {}: mse_g {:.3e}, mse_h {:.3e}, cfo+pn {:.3e}, ber {:.3e}, iters {:.1}",
            point.snr_db,
            point.pn_var,
            point.m,
            row.mse_g,
            row.mse_h,
            row.mse_cfopn,
            row.ber,
            row.iters_mean
        );
        rows.push(row);
    }
    Ok(rows)
}

/// Runs every grid point and returns one row per point, in grid order.
pub fn run_sweep(spec: &SweepSpec) -> Result<Vec<ResultRow>> {
    spec.validate()?;
    match spec.jobs {
        Some(jobs) => rayon::ThreadPoolBuilder::new()
            .num_threads(jobs)
            .build()
            .map_err(|e| Error::InvalidConfig(format!("cannot start {jobs} worker threads: {e}")))?
            .install(|| sweep(spec)),
        None => sweep(spec),
    }
}
