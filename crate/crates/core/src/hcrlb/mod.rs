//! Hybrid Cramér–Rao bound for the joint channel, CFO and phase-noise problem.
//!
//! Parameters are ordered
//!
//! | index                     | parameter                 |
//! |---------------------------|---------------------------|
//! | `0`                       | `φ_sd`                    |
//! | `1 ..= N`                 | `θ_sd(0..N)`              |
//! | `N+1`                     | `φ_rd`                    |
//! | `N+2 ..= 2N+1`            | `θ_rd(0..N)`              |
//! | `2N+2`                    | `|g(0)|`                  |
//! | `2N+3 ..`                 | `Re g(1..L_g)`, `Im g(1..L_g)` |
//! | `2N+2L_g+1`               | `|h(0)|`                  |
//! | then                      | `Re h(1..L_h)`, `Im h(1..L_h)` |
//!
//! Channels are expressed after rotating their first tap onto the positive
//! real axis; the removed phases are absorbed into the (known) training
//! symbols, so the observation model itself is unchanged.
//!
//! The bound is reported for `[δ(1..N) − δ(0), φ_rd, θ_rd, g, h]` where
//! `δ(m) = θ_sd(m) + 2πmφ_sd/N`, matching the error metrics.

pub mod derivatives;

use std::f64::consts::PI;
use std::ops::Range;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{dim_err, Result};
use crate::linalg::{phase_ramp, phasors, symmetric_pinv, CMat, CVec, RMat, RVec, C64};
use crate::pn_subspace::pn_precision;
use crate::signal_model::{generate_wiener_pn, training_matrix, LinkState, SimConfig};

pub use derivatives::{fim_at, fim_at_dense, mean_at, mean_jacobian, relay_covariance_at};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ParamLayout {
    pub n: usize,
    pub l_g: usize,
    pub l_h: usize,
}

impl ParamLayout {
    pub fn new(n: usize, l_g: usize, l_h: usize) -> Self {
        Self { n, l_g, l_h }
    }

    pub fn q(&self) -> usize {
        2 * (self.n + self.l_g + self.l_h)
    }
    pub fn phi_sd(&self) -> usize {
        0
    }
    pub fn theta_sd(&self, m: usize) -> usize {
        1 + m
    }
    pub fn phi_rd(&self) -> usize {
        self.n + 1
    }
    pub fn theta_rd(&self, m: usize) -> usize {
        self.n + 2 + m
    }
    pub fn g0(&self) -> usize {
        2 * self.n + 2
    }
    pub fn g_re(&self, k: usize) -> usize {
        self.g0() + k
    }
    pub fn g_im(&self, k: usize) -> usize {
        self.g0() + self.l_g - 1 + k
    }
    pub fn g_block(&self) -> Range<usize> {
        self.g0()..self.g0() + 2 * self.l_g - 1
    }
    pub fn h0(&self) -> usize {
        self.g_block().end
    }
    pub fn h_re(&self, k: usize) -> usize {
        self.h0() + k
    }
    pub fn h_im(&self, k: usize) -> usize {
        self.h0() + self.l_h - 1 + k
    }
    pub fn h_block(&self) -> Range<usize> {
        self.h0()..self.q()
    }

    /// Rows of the transformed bound holding `δ(1..N) − δ(0)`.
    pub fn delta_rows(&self) -> Range<usize> {
        0..self.n - 1
    }
    /// Transformed row of an original index `i > N` (the two folded
    /// reference parameters shift everything after the `δ` block by two).
    pub fn transformed(&self, i: usize) -> usize {
        debug_assert!(i > self.n);
        i - 2
    }
}

/// A value of `λ` plus the first-tap phases that were rotated out of `g` and `h`.
#[derive(Clone, Debug, PartialEq)]
pub struct ParamPoint {
    pub lambda: RVec,
    pub ref_g: C64,
    pub ref_h: C64,
}

fn unit_phase(z: C64) -> C64 {
    if z.norm() > 0.0 {
        z / z.norm()
    } else {
        C64::new(1.0, 0.0)
    }
}

impl ParamPoint {
    pub fn from_link(layout: &ParamLayout, state: &LinkState) -> Result<Self> {
        let (g, h) = (state.g.taps(), state.h.taps());
        if g.len() != layout.l_g || h.len() != layout.l_h || state.n() != layout.n {
            return Err(dim_err("link state does not match the parameter layout"));
        }
        let ref_g = unit_phase(g[0]);
        let ref_h = unit_phase(h[0]);
        let gu = g * ref_g.conj();
        let hu = h * ref_h.conj();
        let mut lambda = RVec::zeros(layout.q());
        lambda[layout.phi_sd()] = state.phi_sd;
        lambda[layout.phi_rd()] = state.phi_rd;
        for m in 0..layout.n {
            lambda[layout.theta_sd(m)] = state.theta_sd[m];
            lambda[layout.theta_rd(m)] = state.theta_rd[m];
        }
        lambda[layout.g0()] = gu[0].re;
        for k in 1..layout.l_g {
            lambda[layout.g_re(k)] = gu[k].re;
            lambda[layout.g_im(k)] = gu[k].im;
        }
        lambda[layout.h0()] = hu[0].re;
        for k in 1..layout.l_h {
            lambda[layout.h_re(k)] = hu[k].re;
            lambda[layout.h_im(k)] = hu[k].im;
        }
        Ok(Self { lambda, ref_g, ref_h })
    }

    /// Same channels and CFOs with the given phase-noise paths.
    pub fn with_pn(&self, layout: &ParamLayout, theta_sd: &RVec, theta_rd: &RVec) -> Self {
        let mut next = self.clone();
        for m in 0..layout.n {
            next.lambda[layout.theta_sd(m)] = theta_sd[m];
            next.lambda[layout.theta_rd(m)] = theta_rd[m];
        }
        next
    }

    pub fn decode(&self, layout: &ParamLayout) -> Decoded {
        let l = &self.lambda;
        let n = layout.n;
        let mut g = CVec::zeros(layout.l_g);
        g[0] = C64::from(l[layout.g0()]);
        for k in 1..layout.l_g {
            g[k] = C64::new(l[layout.g_re(k)], l[layout.g_im(k)]);
        }
        let mut h = CVec::zeros(layout.l_h);
        h[0] = C64::from(l[layout.h0()]);
        for k in 1..layout.l_h {
            h[k] = C64::new(l[layout.h_re(k)], l[layout.h_im(k)]);
        }
        Decoded {
            phi_sd: l[layout.phi_sd()],
            theta_sd: RVec::from_fn(n, |m, _| l[layout.theta_sd(m)]),
            phi_rd: l[layout.phi_rd()],
            theta_rd: RVec::from_fn(n, |m, _| l[layout.theta_rd(m)]),
            g,
            h,
            ref_g: self.ref_g,
            ref_h: self.ref_h,
        }
    }
}

/// `λ` unpacked into model quantities; `g`, `h` have real first taps.
#[derive(Clone, Debug, PartialEq)]
pub struct Decoded {
    pub phi_sd: f64,
    pub theta_sd: RVec,
    pub phi_rd: f64,
    pub theta_rd: RVec,
    pub g: CVec,
    pub h: CVec,
    pub ref_g: C64,
    pub ref_h: C64,
}

impl Decoded {
    pub fn ref_c(&self) -> C64 {
        self.ref_g * self.ref_h
    }
}

/// Scenario constants shared by every bound evaluation.
#[derive(Clone, Debug)]
pub struct BoundContext {
    pub sim: SimConfig,
    pub n: usize,
    pub alpha: f64,
    pub layout: ParamLayout,
    pub x_s: CMat,
    pub x_r: CMat,
    /// Expected negative Hessian of the phase-noise log-priors, Q×Q.
    pub prior: RMat,
}

impl BoundContext {
    pub fn new(sim: &SimConfig, s_src: &CVec, s_relay: &CVec) -> Result<Self> {
        sim.validate()?;
        let n = sim.n_subcarriers;
        if s_src.len() != n || s_relay.len() != n {
            return Err(dim_err(format!("training symbols must have length {n}")));
        }
        if !(sim.noise_var_dest > 0.0) {
            return Err(crate::Error::InvalidConfig("the bound needs a positive destination noise variance".into()));
        }
        let layout = ParamLayout::new(n, sim.l_g, sim.l_h);
        Ok(Self {
            n,
            alpha: sim.alpha()?,
            x_s: training_matrix(s_src, sim.cascade_len()),
            x_r: training_matrix(s_relay, sim.l_g),
            prior: prior_information(&layout, sim.pn_var_sd, sim.pn_var_rd)?,
            layout,
            sim: sim.clone(),
        })
    }

    pub(crate) fn rotations(&self, d: &Decoded) -> (CVec, CVec) {
        (
            phasors(&d.theta_sd).component_mul(&phase_ramp(self.n, d.phi_sd)),
            phasors(&d.theta_rd).component_mul(&phase_ramp(self.n, d.phi_rd)),
        )
    }

    pub(crate) fn mean_source(&self, d: &Decoded) -> CVec {
        let (rot_s, _) = self.rotations(d);
        let c = crate::linalg::convolve(&d.g, &d.h);
        (&self.x_s * c).component_mul(&rot_s) * (d.ref_c() * self.alpha)
    }

    pub(crate) fn mean_relay(&self, d: &Decoded) -> CVec {
        let (_, rot_r) = self.rotations(d);
        (&self.x_r * &d.g).component_mul(&rot_r) * d.ref_g
    }
}

/// Prior information: `Ψ⁻¹` in the two phase-noise blocks, zero elsewhere.
/// A zero variance leaves its block at zero (pseudo-inverse of `Ψ = 0`).
pub fn prior_information(layout: &ParamLayout, var_sd: f64, var_rd: f64) -> Result<RMat> {
    let n = layout.n;
    let mut out = RMat::zeros(layout.q(), layout.q());
    for (var, first) in [(var_sd, layout.theta_sd(0)), (var_rd, layout.theta_rd(0))] {
        match pn_precision(n, var)? {
            Some(p) => out.view_mut((first, first), (n, n)).copy_from(&p),
            None => log::warn!("phase-noise covariance is singular; its prior block is left at zero"),
        }
    }
    Ok(out)
}

/// BIM from explicit phase-noise draws: `(mean FIM, mean FIM + prior)`.
pub fn bim_from_draws(ctx: &BoundContext, base: &ParamPoint, draws: &[(RVec, RVec)]) -> Result<(RMat, RMat)> {
    if draws.is_empty() {
        return Err(crate::Error::InvalidConfig("the BIM needs at least one phase-noise draw".into()));
    }
    let fims: Vec<Result<RMat>> = draws
        .par_iter()
        .map(|(ts, tr)| fim_at(ctx, &base.with_pn(&ctx.layout, ts, tr)))
        .collect();
    let q = ctx.layout.q();
    let mut sum = RMat::zeros(q, q);
    for f in fims {
        sum += f?;
    }
    let avg = sum / draws.len() as f64;
    let bim = &avg + &ctx.prior;
    Ok((avg, bim))
}

/// Monte Carlo BIM over `n_mc` Wiener draws of both phase-noise paths.
pub fn bim<R: Rng + ?Sized>(ctx: &BoundContext, base: &ParamPoint, n_mc: usize, rng: &mut R) -> Result<(RMat, RMat)> {
    let n = ctx.n;
    let seeds: Vec<u64> = (0..n_mc).map(|_| rng.gen()).collect();
    let draws = seeds
        .into_iter()
        .map(|s| {
            let mut r = ChaCha8Rng::seed_from_u64(s);
            Ok((generate_wiener_pn(n, ctx.sim.pn_var_sd, &mut r)?, generate_wiener_pn(n, ctx.sim.pn_var_rd, &mut r)?))
        })
        .collect::<Result<Vec<_>>>()?;
    bim_from_draws(ctx, base, &draws)
}

/// `Ξ`, (Q−2)×Q: maps `λ` to `[δ(1..N) − δ(0), φ_rd, θ_rd, g, h]`.
///
/// Built as the product of a reference-removal step (`θ(m) − θ(0)`, CFO kept)
/// and a ramp-folding step (`+ 2πmφ/N`); the identically zero `δ(0)` row is
/// dropped.
pub fn transformation(layout: &ParamLayout) -> RMat {
    let n = layout.n;
    let q = layout.q();
    let mut xi1 = RMat::identity(q, q);
    for m in 1..n {
        xi1[(layout.theta_sd(m), layout.theta_sd(0))] = -1.0;
    }
    xi1[(layout.theta_sd(0), layout.theta_sd(0))] = 0.0;

    let mut xi2 = RMat::zeros(q - 1, q);
    for m in 0..n {
        xi2[(m, layout.phi_sd())] = 2.0 * PI * m as f64 / n as f64;
        xi2[(m, layout.theta_sd(m))] = 1.0;
    }
    for i in n + 1..q {
        xi2[(i - 1, i)] = 1.0;
    }
    (xi2 * xi1).remove_row(0)
}

#[derive(Clone, Debug)]
pub struct BoundReport {
    pub fim_avg: RMat,
    pub bim: RMat,
    pub xi: RMat,
    pub hcrlb_mod: RMat,
    pub mse_g: f64,
    pub mse_h: f64,
    pub mse_cfo_pn: f64,
    /// The BIM was not positive definite and a pseudo-inverse was used.
    pub pseudo_inverse: bool,
}

pub fn transform_and_extract(layout: &ParamLayout, fim_avg: RMat, bim: RMat) -> Result<BoundReport> {
    let q = layout.q();
    if bim.nrows() != q || bim.ncols() != q {
        return Err(dim_err(format!("BIM must be {q}×{q}")));
    }
    let mut sym = bim.clone();
    crate::linalg::symmetrize(&mut sym);
    let (inv, pseudo_inverse) = match nalgebra::Cholesky::new(sym.clone()) {
        Some(ch) => (ch.inverse(), false),
        None => {
            log::warn!("BIM is not positive definite; using a pseudo-inverse");
            (symmetric_pinv(&sym, 1e-12), true)
        }
    };
    let xi = transformation(layout);
    let mut hcrlb_mod = &xi * inv * xi.transpose();
    crate::linalg::symmetrize(&mut hcrlb_mod);
    let trace = |r: Range<usize>| r.map(|i| hcrlb_mod[(i, i)]).sum::<f64>();
    let g_rows = layout.transformed(layout.g_block().start)..layout.transformed(layout.g_block().end);
    let h_rows = layout.transformed(layout.h_block().start)..layout.transformed(layout.h_block().end);
    Ok(BoundReport {
        mse_g: trace(g_rows),
        mse_h: trace(h_rows),
        mse_cfo_pn: trace(layout.delta_rows()),
        fim_avg,
        bim,
        xi,
        hcrlb_mod,
        pseudo_inverse,
    })
}

/// Bound for one channel/CFO realization, averaged over `n_mc` phase-noise draws.
pub fn hcrlb<R: Rng + ?Sized>(ctx: &BoundContext, state: &LinkState, n_mc: usize, rng: &mut R) -> Result<BoundReport> {
    let base = ParamPoint::from_link(&ctx.layout, state)?;
    let (fim_avg, b) = bim(ctx, &base, n_mc, rng)?;
    transform_and_extract(&ctx.layout, fim_avg, b)
}
