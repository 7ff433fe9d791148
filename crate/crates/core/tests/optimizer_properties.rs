use aoi_core::delay::busy_window_prob;
use aoi_core::optimizer::{
    cycle_moments, fixed_point_residual, optimal_at_k, search_k, solve_beta, wait_for_ack_optimum,
    OptimizerConfig, Regime, SearchMode,
};
use aoi_core::presets::{constant_uniform_ack, random_system, shifted_exp_uniform_ack};
use aoi_core::{DelayDistribution, DelayModel, SystemConfig};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn ratio(cfg: &SystemConfig, regime: Regime, beta: f64) -> f64 {
    let m = cycle_moments(cfg, regime, beta).unwrap();
    m.q / (2.0 * m.r)
}

/// Golden-section minimizer over `[a, b]`, seeded by a coarse grid scan.
fn grid_then_golden<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, n: usize) -> f64 {
    let step = (b - a) / n as f64;
    let i = (0..=n)
        .map(|i| (i, f(a + step * i as f64)))
        .fold((0, f64::INFINITY), |acc, (i, v)| if v < acc.1 { (i, v) } else { acc })
        .0;
    let (mut lo, mut hi) = ((a + step * (i as f64 - 1.0)).max(a), (a + step * (i as f64 + 1.0)).min(b));
    let g = 0.5 * (5f64.sqrt() - 1.0);
    let (mut c, mut d) = (hi - g * (hi - lo), lo + g * (hi - lo));
    let (mut fc, mut fd) = (f(c), f(d));
    while hi - lo > 1e-9 {
        if fc < fd {
            hi = d;
            d = c;
            fd = fc;
            c = hi - g * (hi - lo);
            fc = f(c);
        } else {
            lo = c;
            c = d;
            fc = fd;
            d = lo + g * (hi - lo);
            fd = f(d);
        }
    }
    0.5 * (lo + hi)
}

#[test]
fn unconstrained_threshold_matches_dense_grid() {
    let cfg = shifted_exp_uniform_ack(10.0, 1.0, 0.0).unwrap();
    let k = 20.0;
    let beta = solve_beta(&cfg, k, &OptimizerConfig::default()).unwrap();
    // the ratio is flat below inf(X + Y), so compare minimum values: the
    // optimal threshold equals the optimal ratio
    let g = |b: f64| ratio(&cfg, Regime::Early { k }, b);
    let best = g(grid_then_golden(g, 0.0, 80.0, 8000));
    assert!((beta - best).abs() < 1e-6 * best, "solver {beta}, oracle {best}");
    assert!(g(beta) <= best + 1e-9, "{} vs {best}", g(beta));
}

#[test]
fn constrained_threshold_meets_rate_with_equality() {
    let cfg = shifted_exp_uniform_ack(10.0, 1.0, 30.0).unwrap();
    let k = 20.0;
    let beta = solve_beta(&cfg, k, &OptimizerConfig::default()).unwrap();
    let m = cycle_moments(&cfg, Regime::Early { k }, beta).unwrap();
    assert!(m.r >= m.t_rate * (1.0 - 1e-12));
    assert!((m.r - m.t_rate).abs() <= 1e-7 * m.t_rate, "{m:?}");
    // the unconstrained optimum violates the rate bound here
    let g = |b: f64| ratio(&cfg, Regime::Early { k }, b);
    let free = g(grid_then_golden(g, 0.0, 80.0, 8000));
    assert!(beta > free);
}

#[test]
fn wait_for_ack_matches_golden_section() {
    let cfg = constant_uniform_ack(8.0).unwrap();
    let (beta, aoi) = wait_for_ack_optimum(&cfg, &OptimizerConfig::default()).unwrap();
    let g = |b: f64| ratio(&cfg, Regime::WaitForAck, b);
    let best = g(grid_then_golden(g, 0.0, 60.0, 6000));
    assert!((beta - best).abs() < 1e-6 * best, "{beta} vs {best}");
    assert!((aoi - (best + 10.0)).abs() < 1e-7, "{aoi} vs {}", best + 10.0);
}

fn check_stitch(cfg: &SystemConfig, boundary: f64) {
    let r = OptimizerConfig::default().resolve(cfg).unwrap();
    let d = 1e-6;
    let a = optimal_at_k(cfg, boundary - d, &r).unwrap();
    let b = optimal_at_k(cfg, boundary + d, &r).unwrap();
    // one side uses the state-1-only formula, the other the general one
    assert!((a.p == 1.0) != (b.p == 1.0), "{a:?} {b:?}");
    assert!((a.aoi - b.aoi).abs() <= 10.0 * d, "{a:?} {b:?}");
}

#[test]
fn landscape_is_continuous_at_window_edges() {
    let cfg = SystemConfig::new(DelayModel::uniform(10.0, 11.0).unwrap(), DelayModel::constant(5.0).unwrap(), 0.0)
        .unwrap();
    check_stitch(&cfg, 11.0);
    check_stitch(&cfg, 15.0);
}

#[test]
fn grid_search_dominates_wait_for_ack_and_converges() {
    let opt = OptimizerConfig::default();
    for inv_fmax in [2.0, 10.0, 30.0] {
        let cfg = shifted_exp_uniform_ack(10.0, 1.0, inv_fmax).unwrap();
        let s = search_k(&cfg, &opt, SearchMode::Grid).unwrap();
        let (_, w) = wait_for_ack_optimum(&cfg, &opt).unwrap();
        assert!(s.aoi_star <= w + 1e-6, "inv_fmax {inv_fmax}: {} vs {w}", s.aoi_star);
    }
}

#[test]
fn descent_never_beats_grid_by_much() {
    let cfg = shifted_exp_uniform_ack(10.0, 1.0, 8.0).unwrap();
    let opt = OptimizerConfig::default();
    let g = search_k(&cfg, &opt, SearchMode::Grid).unwrap();
    let d = search_k(&cfg, &opt, SearchMode::Descent).unwrap();
    assert!(g.aoi_star <= d.aoi_star + 1e-9);
    assert!(d.aoi_star >= cfg.mean_y());
}

fn arb_system() -> impl Strategy<Value = SystemConfig> {
    (any::<u64>(), prop_oneof![Just(0.0), 0.5f64..40.0])
        .prop_map(|(s, f)| random_system(&mut ChaCha8Rng::seed_from_u64(s), f))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn solver_satisfies_fixed_point(cfg in arb_system(), t in 0.0f64..1.0) {
        let k = cfg.y.support_bounds().0 + 0.01 + t * 25.0;
        prop_assume!(busy_window_prob(&cfg, k) < 1.0 - 1e-9);
        let beta = solve_beta(&cfg, k, &OptimizerConfig::default()).unwrap();
        let m = cycle_moments(&cfg, Regime::Early { k }, beta).unwrap();
        prop_assert!(fixed_point_residual(&m, beta).abs() <= 1e-6 * m.r, "{:?} beta={}", m, beta);
        prop_assert!(m.r >= m.t_rate * (1.0 - 1e-12));
    }

    #[test]
    fn ratio_slope_sign(cfg in arb_system(), t in 0.0f64..1.0, b in 0.0f64..1.0) {
        let k = cfg.y.support_bounds().0 + 0.01 + t * 25.0;
        prop_assume!(busy_window_prob(&cfg, k) < 1.0 - 1e-6);
        let scale = cfg.y.mean() + cfg.x.mean();
        let beta = 0.05 * scale + b * 3.0 * scale;
        let h = 1e-4 * scale;
        let g = |x: f64| ratio(&cfg, Regime::Early { k }, x);
        let slope = (g(beta + h) - g(beta - h)) / (2.0 * h);
        let at = g(beta);
        // decreasing below the optimal ratio, increasing above it
        if beta + h < at {
            prop_assert!(slope <= 1e-7, "slope {} at beta {} < {}", slope, beta, at);
        } else if beta - h > at {
            prop_assert!(slope >= -1e-7, "slope {} at beta {} > {}", slope, beta, at);
        }
    }

    #[test]
    fn cycle_sums_convex_in_beta(cfg in arb_system(), t in 0.0f64..1.0, b in 0.0f64..1.0) {
        let k = cfg.y.support_bounds().0 + t * 25.0;
        let scale = cfg.y.mean() + cfg.x.mean();
        let (beta, h) = (b * 3.0 * scale + 1e-2 * scale, 1e-2 * scale);
        let m = |x: f64| cycle_moments(&cfg, Regime::Early { k }, x).unwrap();
        let (lo, mid, hi) = (m(beta - h), m(beta), m(beta + h));
        prop_assert!(lo.r + hi.r - 2.0 * mid.r >= -1e-7 * mid.r);
        prop_assert!(lo.q + hi.q - 2.0 * mid.q >= -1e-7 * mid.q);
        // the state-2 objective Q - 2 theta R is minimized by beta = theta
        let theta = beta;
        let obj = |v: &aoi_core::delay::CycleMoments| v.q - 2.0 * theta * v.r;
        prop_assert!(obj(&mid) <= obj(&lo) + 1e-7 * mid.q && obj(&mid) <= obj(&hi) + 1e-7 * mid.q);
    }

    #[test]
    fn aoi_bounded_below_and_monotone_in_rate(cfg in arb_system(), t in 0.0f64..1.0, f in 0.5f64..30.0) {
        let k = cfg.y.support_bounds().0 + 0.01 + t * 25.0;
        let loose = cfg.with_inv_fmax(f).unwrap();
        let tight = cfg.with_inv_fmax(1.5 * f).unwrap();
        let opt = OptimizerConfig::default();
        let a = optimal_at_k(&loose, k, &opt.resolve(&loose).unwrap()).unwrap();
        let b = optimal_at_k(&tight, k, &opt.resolve(&tight).unwrap()).unwrap();
        prop_assert!(a.aoi >= cfg.mean_y());
        prop_assert!(b.aoi >= a.aoi * (1.0 - 1e-9), "{:?} {:?}", a, b);
    }

    #[test]
    fn wait_for_ack_is_large_k_limit(cfg in arb_system()) {
        let opt = OptimizerConfig::default();
        let r = opt.resolve(&cfg).unwrap();
        let far = optimal_at_k(&cfg, r.k0, &r).unwrap();
        let (_, w) = wait_for_ack_optimum(&cfg, &opt).unwrap();
        prop_assert!((far.aoi - w).abs() <= 1e-6 * w, "{} vs {}", far.aoi, w);
    }
}
