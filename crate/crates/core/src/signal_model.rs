//! Discrete baseband model of the two-hop amplify-and-forward OFDM link.
//!
//! Everything is 0-based: the CFO ramp is `e^{j2πmφ/N}` for `m = 0..N-1`,
//! the DFT matrix entry `(r, k)` is `e^{-j2πrk/N}/√N`.
//!
//! The cyclic prefix is not simulated sample by sample. Observations are
//! synthesized from the post-CP circular model directly; `cp_len` only enters
//! the relay gain.

use std::f64::consts::PI;

use rand::Rng;
use rand_distr::{Distribution, Normal, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{dim_err, Error, Result};
use crate::linalg::{convolve, phase_ramp, phasors, CMat, CVec, RVec, C64};
use crate::receiver::qpsk_map;

/// A normalized CFO, either fixed or drawn uniformly per trial.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum CfoSpec {
    Fixed(f64),
    Uniform(f64, f64),
}

impl CfoSpec {
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match *self {
            CfoSpec::Fixed(v) => v,
            CfoSpec::Uniform(lo, hi) if hi > lo => rng.gen_range(lo..hi),
            CfoSpec::Uniform(lo, _) => lo,
        }
    }

    /// The interval a CFO search has to cover.
    pub fn bounds(&self) -> (f64, f64) {
        match *self {
            CfoSpec::Fixed(v) => (v, v),
            CfoSpec::Uniform(lo, hi) => (lo.min(hi), lo.max(hi)),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimConfig {
    pub n_subcarriers: usize,
    pub cp_len: usize,
    pub l_h: usize,
    pub l_g: usize,
    /// Per-sample Wiener increment variances (rad²).
    pub pn_var_sd: f64,
    pub pn_var_rd: f64,
    pub cfo_sd: CfoSpec,
    pub cfo_rd: CfoSpec,
    pub p_src: f64,
    pub p_relay: f64,
    pub noise_var_relay: f64,
    pub noise_var_dest: f64,
    pub subspace_dim: usize,
    pub pilot_count: usize,
    /// Explicit pilot subcarriers; when absent, `pilot_count` pilots are spread uniformly.
    pub pilot_indices: Option<Vec<usize>>,
    /// Fixed relay gain. `None` derives it from the power budget with [`relay_gain`].
    pub alpha: Option<f64>,
    pub rng_seed: u64,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            n_subcarriers: 64,
            cp_len: 16,
            l_h: 6,
            l_g: 6,
            pn_var_sd: 1e-4,
            pn_var_rd: 1e-4,
            cfo_sd: CfoSpec::Uniform(-0.4, 0.4),
            cfo_rd: CfoSpec::Uniform(-0.2, 0.2),
            p_src: 100.0,
            p_relay: 100.0,
            noise_var_relay: 1.0,
            noise_var_dest: 1.0,
            subspace_dim: 32,
            pilot_count: 32,
            pilot_indices: None,
            alpha: Some(1.0),
            rng_seed: 0,
        }
    }
}

impl SimConfig {
    /// Cascade length `L = L_h + L_g − 1`.
    pub fn cascade_len(&self) -> usize {
        self.l_h + self.l_g - 1
    }

    /// Sets both transmit powers to the linear SNR (noise variances are the reference).
    pub fn set_snr_db(&mut self, snr_db: f64) {
        let p = 10f64.powf(snr_db / 10.0);
        self.p_src = p;
        self.p_relay = p;
    }

    pub fn set_pn_var(&mut self, var: f64) {
        self.pn_var_sd = var;
        self.pn_var_rd = var;
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidConfig(msg));
        let n = self.n_subcarriers;
        if n == 0 {
            return bad("n_subcarriers must be positive".into());
        }
        if self.l_h == 0 || self.l_g == 0 {
            return bad("channel tap counts must be positive".into());
        }
        if self.cascade_len() > n {
            return bad(format!("cascade length {} exceeds N = {n}", self.cascade_len()));
        }
        if self.cp_len < self.cascade_len() {
            return bad(format!(
                "cp_len {} is shorter than the cascade length {}",
                self.cp_len,
                self.cascade_len()
            ));
        }
        if self.subspace_dim == 0 || self.subspace_dim > n {
            return bad(format!("subspace_dim must lie in 1..={n}"));
        }
        for v in [self.pn_var_sd, self.pn_var_rd, self.noise_var_relay, self.noise_var_dest] {
            if !(v >= 0.0) {
                return Err(Error::NegativeVariance(v));
            }
        }
        if !(self.p_src > 0.0 && self.p_relay > 0.0) {
            return bad("transmit powers must be positive".into());
        }
        let pilots = self.pilot_indices();
        if pilots.len() < self.subspace_dim {
            return bad(format!(
                "{} pilots cannot track a {}-dimensional phase-noise subspace",
                pilots.len(),
                self.subspace_dim
            ));
        }
        let mut seen = vec![false; n];
        for &k in &pilots {
            if k >= n || seen[k] {
                return bad(format!("pilot index {k} is out of range or repeated"));
            }
            seen[k] = true;
        }
        if let Some(a) = self.alpha {
            if !(a > 0.0 && a.is_finite()) {
                return bad(format!("alpha must be positive, got {a}"));
            }
        }
        Ok(())
    }

    /// Relay gain: the configured value or the power-budget one.
    pub fn alpha(&self) -> Result<f64> {
        match self.alpha {
            Some(a) => Ok(a),
            None => relay_gain(self),
        }
    }

    /// Pilot subcarriers of a comb symbol, sorted.
    pub fn pilot_indices(&self) -> Vec<usize> {
        if let Some(p) = &self.pilot_indices {
            let mut p = p.clone();
            p.sort_unstable();
            return p;
        }
        let n = self.n_subcarriers;
        let p = self.pilot_count.min(n);
        (0..p).map(|k| k * n / p.max(1)).collect()
    }

    pub fn data_indices(&self) -> Vec<usize> {
        let pilots = self.pilot_indices();
        (0..self.n_subcarriers).filter(|k| pilots.binary_search(k).is_err()).collect()
    }
}

/// Channel impulse response with unit expected total energy.
#[derive(Clone, Debug, PartialEq)]
pub struct ChannelTaps(CVec);

impl ChannelTaps {
    pub fn new(taps: CVec) -> Result<Self> {
        if taps.is_empty() {
            return Err(dim_err("a channel needs at least one tap"));
        }
        if taps.iter().any(|t| !t.re.is_finite() || !t.im.is_finite()) {
            return Err(Error::NonFinite("channel taps"));
        }
        Ok(Self(taps))
    }

    pub fn from_slice(taps: &[C64]) -> Result<Self> {
        Self::new(CVec::from_column_slice(taps))
    }

    /// Rayleigh taps, each with variance `1/len`.
    pub fn draw<R: Rng + ?Sized>(len: usize, rng: &mut R) -> Result<Self> {
        if len == 0 {
            return Err(dim_err("a channel needs at least one tap"));
        }
        Self::new(complex_gaussian(len, 1.0 / len as f64, rng))
    }

    pub fn taps(&self) -> &CVec {
        &self.0
    }

    pub fn into_inner(self) -> CVec {
        self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

/// Ground truth for one trial.
#[derive(Clone, Debug, PartialEq)]
pub struct LinkState {
    pub h: ChannelTaps,
    pub g: ChannelTaps,
    /// `g ⋆ h`.
    pub c: CVec,
    pub phi_sd: f64,
    pub phi_rd: f64,
    pub theta_sd: RVec,
    pub theta_rd: RVec,
    pub alpha: f64,
}

impl LinkState {
    pub fn new(
        h: ChannelTaps,
        g: ChannelTaps,
        phi_sd: f64,
        phi_rd: f64,
        theta_sd: RVec,
        theta_rd: RVec,
        alpha: f64,
    ) -> Result<Self> {
        if theta_sd.len() != theta_rd.len() {
            return Err(dim_err("phase-noise paths have different lengths"));
        }
        let c = convolve(g.taps(), h.taps());
        Ok(Self { h, g, c, phi_sd, phi_rd, theta_sd, theta_rd, alpha })
    }

    pub fn draw<R: Rng + ?Sized>(cfg: &SimConfig, rng: &mut R) -> Result<Self> {
        cfg.validate()?;
        let n = cfg.n_subcarriers;
        let h = ChannelTaps::draw(cfg.l_h, rng)?;
        let g = ChannelTaps::draw(cfg.l_g, rng)?;
        let phi_sd = cfg.cfo_sd.sample(rng);
        let phi_rd = cfg.cfo_rd.sample(rng);
        let theta_sd = generate_wiener_pn(n, cfg.pn_var_sd, rng)?;
        let theta_rd = generate_wiener_pn(n, cfg.pn_var_rd, rng)?;
        Self::new(h, g, phi_sd, phi_rd, theta_sd, theta_rd, cfg.alpha()?)
    }

    /// State seen by a later OFDM symbol of the same frame whose first sample
    /// lies `gap` samples (`gap ≥ N`) after the first sample of `self`.
    ///
    /// The source–destination phase noise keeps walking through the gap and
    /// the CFO phase accumulated over it is folded into the new `θ_sd`, so
    /// each symbol keeps the usual `e^{j2πmφ/N}` ramp starting at `m = 0`.
    pub fn next_symbol<R: Rng + ?Sized>(&self, gap: usize, sigma2: f64, rng: &mut R) -> Result<Self> {
        let n = self.n();
        if gap < n {
            return Err(Error::InvalidConfig(format!("symbols of length {n} cannot start {gap} samples apart")));
        }
        let drift: f64 = if sigma2 > 0.0 && gap > n {
            Normal::new(0.0, (sigma2 * (gap - n) as f64).sqrt()).map_err(|_| Error::NegativeVariance(sigma2))?.sample(rng)
        } else {
            0.0
        };
        let start = self.theta_sd[n - 1] + drift + 2.0 * PI * self.phi_sd * gap as f64 / n as f64;
        let mut next = self.clone();
        next.theta_sd = generate_wiener_pn(n, sigma2, rng)?.add_scalar(start);
        Ok(next)
    }

    pub fn n(&self) -> usize {
        self.theta_sd.len()
    }
}

/// Received training vectors after CP removal.
#[derive(Clone, Debug, PartialEq)]
pub struct Observation {
    pub y_s: CVec,
    pub y_r: CVec,
}

/// Unitary DFT matrix.
pub fn dft_matrix(n: usize) -> Result<CMat> {
    if n == 0 {
        return Err(dim_err("DFT size must be positive"));
    }
    let scale = 1.0 / (n as f64).sqrt();
    Ok(CMat::from_fn(n, n, |r, k| {
        // reduce rk mod n first so large sizes keep full phase accuracy
        let idx = (r * k) % n;
        C64::from_polar(scale, -2.0 * PI * idx as f64 / n as f64)
    }))
}

/// Unitary inverse DFT of a frequency-domain vector, `Fᴴ s`.
pub fn idft(s: &CVec) -> CVec {
    let n = s.len();
    let scale = 1.0 / (n as f64).sqrt();
    CVec::from_fn(n, |t, _| {
        let mut acc = C64::new(0.0, 0.0);
        for (k, &sk) in s.iter().enumerate() {
            acc += sk * C64::from_polar(1.0, 2.0 * PI * ((t * k) % n) as f64 / n as f64);
        }
        acc * scale
    })
}

/// Unitary forward DFT, `F x`.
pub fn dft(x: &CVec) -> CVec {
    idft(&x.map(|v| v.conj())).map(|v| v.conj())
}

/// Frequency response `√N · F [taps; 0]`.
pub fn frequency_response(taps: &CVec, n: usize) -> CVec {
    let mut padded = CVec::zeros(n);
    padded.rows_mut(0, taps.len().min(n)).copy_from(&taps.rows(0, taps.len().min(n)));
    dft(&padded).map(|z| z * (n as f64).sqrt())
}

/// Circularly-symmetric Gaussian vector with per-entry variance `var`.
pub fn complex_gaussian<R: Rng + ?Sized>(n: usize, var: f64, rng: &mut R) -> CVec {
    let s = (var / 2.0).sqrt();
    CVec::from_fn(n, |_, _| {
        let re: f64 = StandardNormal.sample(rng);
        let im: f64 = StandardNormal.sample(rng);
        C64::new(s * re, s * im)
    })
}

/// Wiener phase noise with `θ(−1) = 0`, so `Var θ(k) = (k+1)σ²`.
pub fn generate_wiener_pn<R: Rng + ?Sized>(n: usize, sigma2: f64, rng: &mut R) -> Result<RVec> {
    if !(sigma2 >= 0.0) {
        return Err(Error::NegativeVariance(sigma2));
    }
    if sigma2 == 0.0 {
        return Ok(RVec::zeros(n));
    }
    let step = Normal::new(0.0, sigma2.sqrt()).map_err(|_| Error::NegativeVariance(sigma2))?;
    let mut acc = 0.0;
    Ok(RVec::from_fn(n, |_, _| {
        acc += step.sample(rng);
        acc
    }))
}

/// Tall Toeplitz matrix `T` with `T·x = taps ⋆ x` (full linear convolution).
pub fn convolution_matrix(taps: &CVec, ncols: usize) -> CMat {
    let l = taps.len();
    CMat::from_fn(l + ncols - 1, ncols, |i, k| {
        if i >= k && i - k < l {
            taps[i - k]
        } else {
            C64::new(0.0, 0.0)
        }
    })
}

/// Relay noise filter: `N × (N+L_g−1)`, row `r` holds `[g(L_g−1) … g(0)]`
/// from column `r`, so `G·v` is the valid part of `g ⋆ v`.
pub fn build_g_matrix(g: &CVec, n: usize) -> Result<CMat> {
    let lg = g.len();
    if lg == 0 || n == 0 {
        return Err(dim_err("G needs at least one tap and one row"));
    }
    Ok(CMat::from_fn(n, n + lg - 1, |r, col| {
        if col >= r && col - r < lg {
            g[lg - 1 - (col - r)]
        } else {
            C64::new(0.0, 0.0)
        }
    }))
}

/// `(G̃, H̃)` with `G̃·h = H̃·g = g ⋆ h`.
pub fn build_toeplitz_pair(h: &CVec, g: &CVec) -> Result<(CMat, CMat)> {
    if h.is_empty() || g.is_empty() {
        return Err(dim_err("toeplitz pair needs nonempty tap vectors"));
    }
    Ok((convolution_matrix(g, h.len()), convolution_matrix(h, g.len())))
}

/// Amplify-and-forward gain that normalizes the relay output to `p_relay`,
/// assuming per-tap variance `1/L_h`.
pub fn relay_gain(cfg: &SimConfig) -> Result<f64> {
    let n = cfg.n_subcarriers as f64;
    let sigma2_h = 1.0 / cfg.l_h as f64;
    let pz = n * cfg.l_h as f64 * sigma2_h * cfg.p_src + n * cfg.noise_var_relay;
    let pz_bar = pz * (cfg.cp_len as f64 + n) / n;
    if !(pz_bar > 0.0) || !(cfg.p_relay > 0.0) {
        return Err(Error::InvalidConfig(format!(
            "relay gain needs positive powers (P_z = {pz_bar}, P_relay = {})",
            cfg.p_relay
        )));
    }
    Ok((cfg.p_relay / pz_bar).sqrt())
}

/// `Fᴴ Λ_s F_[l]`: column `k` is the time-domain training symbol circularly
/// delayed by `k` samples.
pub fn training_matrix(s: &CVec, l: usize) -> CMat {
    let x = idft(s);
    let n = x.len();
    CMat::from_fn(n, l, |t, k| x[(t + n - k % n) % n])
}

/// Unit-modulus QPSK training symbol scaled to per-subcarrier power `power`.
pub fn qpsk_training<R: Rng + ?Sized>(n: usize, power: f64, rng: &mut R) -> CVec {
    let bits: Vec<u8> = (0..2 * n).map(|_| rng.gen_range(0..=1)).collect();
    qpsk_map(&bits).expect("even bit count").map(|z| z * power.sqrt())
}

fn check_len(what: &str, len: usize, n: usize) -> Result<()> {
    if len != n {
        return Err(dim_err(format!("{what} has length {len}, expected {n}")));
    }
    Ok(())
}

/// First-hop received vector for an arbitrary frequency-domain symbol.
fn first_hop<R: Rng + ?Sized>(
    cfg: &SimConfig,
    state: &LinkState,
    s: &CVec,
    rng: &mut R,
) -> Result<CVec> {
    let n = cfg.n_subcarriers;
    check_len("source symbol", s.len(), n)?;
    check_len("phase-noise path", state.theta_sd.len(), n)?;
    let signal = training_matrix(s, state.c.len()) * &state.c;
    let v = complex_gaussian(n + state.g.len() - 1, cfg.noise_var_relay, rng);
    let relayed = signal + build_g_matrix(state.g.taps(), n)? * v;
    let rot = phasors(&state.theta_sd).component_mul(&phase_ramp(n, state.phi_sd));
    let w = complex_gaussian(n, cfg.noise_var_dest, rng);
    Ok(rot.component_mul(&relayed) * C64::from(state.alpha) + w)
}

pub fn synthesize_training<R: Rng + ?Sized>(
    cfg: &SimConfig,
    state: &LinkState,
    s_src: &CVec,
    s_relay: &CVec,
    rng: &mut R,
) -> Result<Observation> {
    let n = cfg.n_subcarriers;
    check_len("relay symbol", s_relay.len(), n)?;
    check_len("relay phase-noise path", state.theta_rd.len(), n)?;
    let y_s = first_hop(cfg, state, s_src, rng)?;
    let rot = phasors(&state.theta_rd).component_mul(&phase_ramp(n, state.phi_rd));
    let direct = training_matrix(s_relay, state.g.len()) * state.g.taps();
    let w = complex_gaussian(n, cfg.noise_var_dest, rng);
    let y_r = rot.component_mul(&direct) + w;
    Ok(Observation { y_s, y_r })
}

/// Received comb symbol during the data phase.
pub fn synthesize_data_symbol<R: Rng + ?Sized>(
    cfg: &SimConfig,
    state: &LinkState,
    s_comb: &CVec,
    rng: &mut R,
) -> Result<CVec> {
    first_hop(cfg, state, s_comb, rng)
}
