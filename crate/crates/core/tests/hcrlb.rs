use ofdm_relay::hcrlb::derivatives::{covariance_derivatives, theta_covariance_derivative};
use ofdm_relay::hcrlb::*;
use ofdm_relay::linalg::{CMat, RMat, RVec};
use ofdm_relay::signal_model::{qpsk_training, LinkState, SimConfig};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn small_config() -> SimConfig {
    SimConfig {
        n_subcarriers: 8,
        cp_len: 4,
        l_h: 2,
        l_g: 2,
        subspace_dim: 4,
        pilot_count: 4,
        pn_var_sd: 1e-3,
        pn_var_rd: 1e-3,
        noise_var_relay: 0.05,
        noise_var_dest: 0.02,
        ..Default::default()
    }
}

fn instance(seed: u64) -> (BoundContext, ParamPoint) {
    let cfg = small_config();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let s = qpsk_training(8, cfg.p_src, &mut rng);
    let sr = qpsk_training(8, cfg.p_relay, &mut rng);
    let ctx = BoundContext::new(&cfg, &s, &sr).unwrap();
    let state = LinkState::draw(&cfg, &mut rng).unwrap();
    let p = ParamPoint::from_link(&ctx.layout, &state).unwrap();
    (ctx, p)
}

fn nudged(p: &ParamPoint, i: usize, h: f64) -> ParamPoint {
    let mut q = p.clone();
    q.lambda[i] += h;
    q
}

const STEP: f64 = 1e-6;

#[test]
fn mean_derivatives_match_finite_differences() {
    for seed in 0..10 {
        let (ctx, p) = instance(seed);
        let jac = mean_jacobian(&ctx, &p);
        for i in 0..ctx.layout.q() {
            let fd = (mean_at(&ctx, &nudged(&p, i, STEP)) - mean_at(&ctx, &nudged(&p, i, -STEP))) / ofdm_relay::linalg::C64::from(2.0 * STEP);
            let col = jac.column(i);
            let rel = (&fd - col).norm() / col.norm();
            assert!(rel <= 1e-5, "seed {seed} index {i}: relative error {rel:.2e}");
        }
    }
}

#[test]
fn covariance_derivatives_match_finite_differences() {
    for seed in 0..10 {
        let (ctx, p) = instance(seed);
        let lay = ctx.layout;
        let d = covariance_derivatives(&ctx, &p).unwrap();
        let mut analytic: Vec<(usize, CMat)> = vec![(lay.phi_sd(), d.phi.clone())];
        for m in 0..lay.n {
            analytic.push((lay.theta_sd(m), theta_covariance_derivative(&d.t, m)));
        }
        analytic.extend(lay.g_block().zip(d.g.iter().cloned()));
        let scale = d.t.norm();
        for i in 0..lay.q() {
            let fd = (relay_covariance_at(&ctx, &nudged(&p, i, STEP)).unwrap()
                - relay_covariance_at(&ctx, &nudged(&p, i, -STEP)).unwrap())
                / ofdm_relay::linalg::C64::from(2.0 * STEP);
            match analytic.iter().find(|(k, _)| *k == i) {
                Some((_, w)) => {
                    let rel = (&fd - w).norm() / w.norm();
                    assert!(rel <= 1e-5, "seed {seed} index {i}: relative error {rel:.2e}");
                }
                None => assert!(fd.norm() <= 1e-9 * scale, "seed {seed} index {i} should not move Σ"),
            }
        }
    }
}

#[test]
fn fast_trace_terms_match_dense_traces() {
    for seed in 0..5 {
        let (ctx, p) = instance(seed);
        let mut rng = ChaCha8Rng::seed_from_u64(100 + seed);
        let ts = ofdm_relay::signal_model::generate_wiener_pn(8, 1e-3, &mut rng).unwrap();
        let tr = ofdm_relay::signal_model::generate_wiener_pn(8, 1e-3, &mut rng).unwrap();
        let p = p.with_pn(&ctx.layout, &ts, &tr);
        let fast = fim_at(&ctx, &p).unwrap();
        let dense = fim_at_dense(&ctx, &p).unwrap();
        let rel = (&fast - &dense).norm() / dense.norm();
        assert!(rel < 1e-10, "seed {seed}: {rel:.2e}");
    }
}

#[test]
fn fim_is_symmetric_psd() {
    let (ctx, p) = instance(3);
    let f = fim_at(&ctx, &p).unwrap();
    let q = ctx.layout.q() as f64;
    assert!((&f - f.transpose()).norm() <= 1e-10 * f.norm());
    let ev = f.clone().symmetric_eigen().eigenvalues;
    assert!(ev.min() >= -1e-8 * f.trace() / q, "min eigenvalue {}", ev.min());
}

#[test]
fn single_zero_draw_is_fim_plus_prior() {
    let (ctx, p) = instance(4);
    let zero = RVec::zeros(8);
    let p0 = p.with_pn(&ctx.layout, &zero, &zero);
    let (avg, b) = bim_from_draws(&ctx, &p0, &[(zero.clone(), zero.clone())]).unwrap();
    let f = fim_at(&ctx, &p0).unwrap();
    assert!((&avg - &f).norm() <= 1e-12 * f.norm());
    assert!((&b - (&f + &ctx.prior)).norm() <= 1e-12 * f.norm());
}

#[test]
fn prior_blocks_are_wiener_precisions() {
    let lay = ParamLayout::new(3, 1, 1);
    let prior = prior_information(&lay, 0.5, 0.25).unwrap();
    let psi = RMat::from_fn(3, 3, |r, c| 0.5 * (r.min(c) + 1) as f64);
    let block = prior.view((lay.theta_sd(0), lay.theta_sd(0)), (3, 3)).into_owned();
    assert!((block * psi - RMat::identity(3, 3)).norm() < 1e-12);
    assert_eq!(prior[(lay.phi_sd(), lay.phi_sd())], 0.0);
    // A vanishing innovation variance carries no usable prior block.
    let flat = prior_information(&lay, 0.0, 0.0).unwrap();
    assert_eq!(flat.norm(), 0.0);
}

#[test]
fn transformation_shape_and_delta_rows() {
    let lay = ParamLayout::new(8, 2, 3);
    let xi = transformation(&lay);
    assert_eq!((xi.nrows(), xi.ncols()), (lay.q() - 2, lay.q()));
    // A common PN offset with its matching CFO change cancels in δ.
    let mut lam = RVec::zeros(lay.q());
    let eps = 0.03;
    lam[lay.phi_sd()] = -eps;
    for m in 0..8 {
        lam[lay.theta_sd(m)] = 0.4 + 2.0 * std::f64::consts::PI * m as f64 * eps / 8.0;
    }
    let out = &xi * lam;
    assert!(out.rows(0, 7).norm() < 1e-14);
}

#[test]
fn bim_grows_with_snr() {
    let mut cfg = small_config();
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let s = qpsk_training(8, cfg.p_src, &mut rng);
    let sr = qpsk_training(8, cfg.p_relay, &mut rng);
    let state = LinkState::draw(&cfg, &mut rng).unwrap();
    let mut prev: Option<RMat> = None;
    for snr in [0.0, 10.0, 20.0] {
        cfg.set_snr_db(snr);
        let ctx = BoundContext::new(&cfg, &s, &sr).unwrap();
        let p = ParamPoint::from_link(&ctx.layout, &state).unwrap();
        let (_, b) = bim(&ctx, &p, 20, &mut ChaCha8Rng::seed_from_u64(1)).unwrap();
        if let Some(prev) = prev {
            let diff = &b - prev;
            let min = diff.symmetric_eigen().eigenvalues.min();
            assert!(min >= -1e-8 * b.norm(), "BIM shrank: {min}");
        }
        prev = Some(b);
    }
}
