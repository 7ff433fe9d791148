//! Forward service times `Y`, ACK delays `X`, and the probabilities and
//! censored moments the threshold optimizer is built on.
//!
//! The state-1 period `K` splits the outcome space of an independent pair
//! `(Y, X)` into the busy window `B_K = {Y < K < Y + X}` (the early sample
//! lands after delivery but before the ACK) and its complement, on which the
//! transmitter ends up in state 2. Moments of `max(beta, X + Y)` restricted to
//! the complement are computed by an outer adaptive Simpson rule over `Y`
//! with the inner expectation over `X` in closed form.

use rand::Rng;
use rand_distr::{Distribution, Exp};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quadrature::integrate_pieces;

/// Tail mass dropped when an unbounded support is truncated for quadrature.
pub const TRUNCATION_TAIL: f64 = 1e-12;
/// Absolute tolerance for probability integrals.
pub const PROB_TOL: f64 = 1e-9;
/// Absolute tolerance for moment integrals.
pub const MOMENT_TOL: f64 = 1e-8;
/// Below this mass the state-2 conditioning set is treated as empty.
pub const DEGENERATE_MASS: f64 = 1e-12;

/// How a distribution puts its mass on the line.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Law {
    /// All mass at a single point.
    Atom(f64),
    /// Absolutely continuous with a density on `[lo, hi]` (`hi` may be infinite).
    Density { lo: f64, hi: f64 },
}

/// Extension point for delay families. Everything the optimizer and
/// simulator need from a distribution goes through this trait.
pub trait DelayDistribution {
    fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64;
    fn cdf(&self, t: f64) -> f64;
    /// `(E[D], E[D^2])`.
    fn moments(&self) -> (f64, f64);
    /// Tight `(inf, sup)` of the support; `sup` may be `f64::INFINITY`.
    fn support_bounds(&self) -> (f64, f64);
    /// Smallest `t` with `P(D > t) <= tail`.
    fn tail_quantile(&self, tail: f64) -> f64;
    /// `[P(D <= t), E[D; D <= t], E[D^2; D <= t]]`, right-continuous in `t`.
    fn lower_partial_moments(&self, t: f64) -> [f64; 3];
    fn law(&self) -> Law;
    /// Density on the interior of the support (only meaningful for [`Law::Density`]).
    fn density(&self, t: f64) -> f64;
}

/// The delay families used throughout: constant, uniform and shifted exponential.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum DelayModel {
    Constant { c: f64 },
    Uniform { lo: f64, hi: f64 },
    ShiftedExponential { shift: f64, rate: f64 },
}

impl DelayModel {
    pub fn constant(c: f64) -> Result<Self> {
        DelayModel::Constant { c }.validated()
    }

    pub fn uniform(lo: f64, hi: f64) -> Result<Self> {
        DelayModel::Uniform { lo, hi }.validated()
    }

    pub fn shifted_exponential(shift: f64, rate: f64) -> Result<Self> {
        DelayModel::ShiftedExponential { shift, rate }.validated()
    }

    pub fn validated(self) -> Result<Self> {
        self.validate()?;
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidModel(msg));
        match *self {
            DelayModel::Constant { c } => {
                if !(c.is_finite() && c >= 0.0) {
                    return bad(format!("constant delay must be finite and >= 0, got {c}"));
                }
            }
            DelayModel::Uniform { lo, hi } => {
                if !(lo.is_finite() && hi.is_finite() && lo >= 0.0 && lo <= hi) {
                    return bad(format!("uniform delay needs 0 <= lo <= hi < inf, got [{lo}, {hi}]"));
                }
            }
            DelayModel::ShiftedExponential { shift, rate } => {
                if !(shift.is_finite() && shift >= 0.0) {
                    return bad(format!("shift must be finite and >= 0, got {shift}"));
                }
                if !(rate.is_finite() && rate > 0.0) {
                    return bad(format!("rate must be finite and > 0, got {rate}"));
                }
            }
        }
        Ok(())
    }

    pub fn mean(&self) -> f64 {
        self.moments().0
    }
}

impl DelayDistribution for DelayModel {
    fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match *self {
            DelayModel::Constant { c } => c,
            DelayModel::Uniform { lo, hi } => lo + (hi - lo) * rng.random::<f64>(),
            DelayModel::ShiftedExponential { shift, rate } => {
                shift + Exp::new(rate).expect("validated rate").sample(rng)
            }
        }
    }

    fn cdf(&self, t: f64) -> f64 {
        match *self {
            DelayModel::Constant { c } => {
                if t >= c {
                    1.0
                } else {
                    0.0
                }
            }
            DelayModel::Uniform { lo, hi } => {
                if t < lo {
                    0.0
                } else if t >= hi {
                    1.0
                } else {
                    (t - lo) / (hi - lo)
                }
            }
            DelayModel::ShiftedExponential { shift, rate } => {
                if t <= shift {
                    0.0
                } else {
                    -(-rate * (t - shift)).exp_m1()
                }
            }
        }
    }

    fn moments(&self) -> (f64, f64) {
        match *self {
            DelayModel::Constant { c } => (c, c * c),
            DelayModel::Uniform { lo, hi } => {
                (0.5 * (lo + hi), (lo * lo + lo * hi + hi * hi) / 3.0)
            }
            DelayModel::ShiftedExponential { shift, rate } => {
                let m = 1.0 / rate;
                (shift + m, shift * shift + 2.0 * shift * m + 2.0 * m * m)
            }
        }
    }

    fn support_bounds(&self) -> (f64, f64) {
        match *self {
            DelayModel::Constant { c } => (c, c),
            DelayModel::Uniform { lo, hi } => (lo, hi),
            DelayModel::ShiftedExponential { shift, .. } => (shift, f64::INFINITY),
        }
    }

    fn tail_quantile(&self, tail: f64) -> f64 {
        let tail = tail.clamp(0.0, 1.0);
        match *self {
            DelayModel::Constant { c } => c,
            DelayModel::Uniform { lo, hi } => hi - tail * (hi - lo),
            DelayModel::ShiftedExponential { shift, rate } => {
                if tail >= 1.0 {
                    shift
                } else {
                    shift - tail.ln() / rate
                }
            }
        }
    }

    fn lower_partial_moments(&self, t: f64) -> [f64; 3] {
        match *self {
            DelayModel::Constant { c } => {
                if t >= c {
                    [1.0, c, c * c]
                } else {
                    [0.0; 3]
                }
            }
            DelayModel::Uniform { lo, hi } => {
                if t < lo {
                    return [0.0; 3];
                }
                if hi <= lo {
                    return [1.0, lo, lo * lo];
                }
                let u = t.min(hi);
                let w = hi - lo;
                [
                    (u - lo) / w,
                    (u * u - lo * lo) / (2.0 * w),
                    (u * u * u - lo * lo * lo) / (3.0 * w),
                ]
            }
            DelayModel::ShiftedExponential { shift, rate } => {
                if t <= shift {
                    return [0.0; 3];
                }
                if t == f64::INFINITY {
                    let (m1, m2) = self.moments();
                    return [1.0, m1, m2];
                }
                // W = D - shift ~ Exp(rate), truncated to W <= w
                let w = t - shift;
                let x = rate * w;
                let e = (-x).exp();
                let p0 = -(-x).exp_m1();
                let w1 = (p0 - x * e) / rate;
                let w2 = (2.0 * p0 - e * x * (x + 2.0)) / (rate * rate);
                [
                    p0,
                    shift * p0 + w1,
                    shift * shift * p0 + 2.0 * shift * w1 + w2,
                ]
            }
        }
    }

    fn law(&self) -> Law {
        match *self {
            DelayModel::Constant { c } => Law::Atom(c),
            DelayModel::Uniform { lo, hi } if hi <= lo => Law::Atom(lo),
            DelayModel::Uniform { lo, hi } => Law::Density { lo, hi },
            DelayModel::ShiftedExponential { shift, .. } => Law::Density {
                lo: shift,
                hi: f64::INFINITY,
            },
        }
    }

    fn density(&self, t: f64) -> f64 {
        match *self {
            DelayModel::Constant { .. } => 0.0,
            DelayModel::Uniform { lo, hi } => {
                if t >= lo && t <= hi && hi > lo {
                    1.0 / (hi - lo)
                } else {
                    0.0
                }
            }
            DelayModel::ShiftedExponential { shift, rate } => {
                if t < shift {
                    0.0
                } else {
                    rate * (-rate * (t - shift)).exp()
                }
            }
        }
    }
}

/// The delay pair plus the sampling-rate bound, stored as `1/f_max`
/// (`0` means unconstrained).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SystemConfig {
    pub y: DelayModel,
    pub x: DelayModel,
    pub inv_fmax: f64,
}

impl SystemConfig {
    pub fn new(y: DelayModel, x: DelayModel, inv_fmax: f64) -> Result<Self> {
        let cfg = SystemConfig { y, x, inv_fmax };
        cfg.validate()?;
        Ok(cfg)
    }

    /// Checks both models and the ordering `sup X <= inf Y`, which together
    /// with independence gives `X <= Y` almost surely.
    pub fn validate(&self) -> Result<()> {
        self.y.validate()?;
        self.x.validate()?;
        if !(self.inv_fmax.is_finite() && self.inv_fmax >= 0.0) {
            return Err(Error::InvalidConfig(format!(
                "inv_fmax must be finite and >= 0, got {}",
                self.inv_fmax
            )));
        }
        let (_, sup_x) = self.x.support_bounds();
        let (inf_y, _) = self.y.support_bounds();
        if sup_x > inf_y {
            return Err(Error::InvalidConfig(format!(
                "ACK delays must not exceed service times: sup X = {sup_x} > inf Y = {inf_y}"
            )));
        }
        if self.y.mean() <= 0.0 {
            return Err(Error::InvalidConfig("service time Y must have positive mean".into()));
        }
        Ok(())
    }

    pub fn with_inv_fmax(&self, inv_fmax: f64) -> Result<Self> {
        SystemConfig::new(self.y, self.x, inv_fmax)
    }

    pub fn mean_y(&self) -> f64 {
        self.y.mean()
    }
}

/// Per-`(K, beta)` quantities of the threshold iteration: `p`, the rate
/// target `T`, and the cycle sums `Q` and `R`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CycleMoments {
    pub p: f64,
    /// `(1 + P(Y > K)) / f_max`.
    pub t_rate: f64,
    /// `(1 - p) E[max(beta^2, U^2) | not B_K] + p K^2`.
    pub q: f64,
    /// `(1 - p) E[max(beta, U) | not B_K] + p K`.
    pub r: f64,
    /// `P(Y > K)`.
    pub late_prob: f64,
}

/// Integrates `g` against the law of `model`, splitting at `breaks`.
fn expect_over<const N: usize, F>(model: &DelayModel, g: F, breaks: &[f64], tol: f64) -> [f64; N]
where
    F: Fn(f64) -> [f64; N],
{
    match model.law() {
        Law::Atom(c) => g(c),
        Law::Density { lo, hi } => {
            let hi = if hi.is_finite() {
                hi
            } else {
                model.tail_quantile(TRUNCATION_TAIL)
            };
            integrate_pieces(
                |y| {
                    let d = model.density(y);
                    let v = g(y);
                    std::array::from_fn(|i| d * v[i])
                },
                lo,
                hi,
                breaks,
                tol,
            )
        }
    }
}

/// `P(Y < k < Y + X)` for independent `Y` and `X`.
pub fn busy_window_prob(cfg: &SystemConfig, k: f64) -> f64 {
    let (inf_y, _) = cfg.y.support_bounds();
    if !(k > inf_y) {
        return 0.0;
    }
    let (inf_x, sup_x) = cfg.x.support_bounds();
    let x = cfg.x;
    let [p] = expect_over(
        &cfg.y,
        |y| {
            if y < k {
                [1.0 - x.cdf(k - y)]
            } else {
                [0.0]
            }
        },
        &[k, k - sup_x, k - inf_x],
        PROB_TOL,
    );
    p.clamp(0.0, 1.0)
}

/// `P(Y > k)`.
pub fn late_ack_prob(cfg: &SystemConfig, k: f64) -> f64 {
    (1.0 - cfg.y.cdf(k)).clamp(0.0, 1.0)
}

/// The event on which the state-2 threshold moments are taken.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum StateTwoSet {
    /// No conditioning: the wait-for-ACK problem.
    Everything,
    /// The complement of the busy window, `{Y >= K} u {Y + X <= K}`.
    OutsideBusyWindow { k: f64 },
}

/// Unnormalized threshold moments over a [`StateTwoSet`]:
/// `mass = P(S)`, `first = E[max(beta, U); S]`, `second = E[max(beta, U)^2; S]`
/// with `U = X + Y`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ThresholdMoments {
    pub mass: f64,
    pub first: f64,
    pub second: f64,
}

/// `E[h(y + X); X <= a]` for `h = max(beta, .)` and its square, plus the mass.
fn inner_over_x(x: &DelayModel, y: f64, a: f64, beta: f64) -> [f64; 3] {
    let full = x.lower_partial_moments(a);
    let cut = beta - y;
    let low = if cut >= a { full } else { x.lower_partial_moments(cut) };
    let hi0 = full[0] - low[0];
    let hi1 = full[1] - low[1];
    let hi2 = full[2] - low[2];
    [
        full[0],
        beta * low[0] + y * hi0 + hi1,
        beta * beta * low[0] + y * y * hi0 + 2.0 * y * hi1 + hi2,
    ]
}

pub fn threshold_moments(cfg: &SystemConfig, set: StateTwoSet, beta: f64) -> ThresholdMoments {
    let x = cfg.x;
    let (inf_x, sup_x) = cfg.x.support_bounds();
    let mut breaks = vec![beta - sup_x, beta - inf_x];
    let v = match set {
        StateTwoSet::Everything => expect_over(
            &cfg.y,
            |y| inner_over_x(&x, y, f64::INFINITY, beta),
            &breaks,
            MOMENT_TOL,
        ),
        StateTwoSet::OutsideBusyWindow { k } => {
            breaks.extend([k, k - sup_x, k - inf_x]);
            expect_over(
                &cfg.y,
                |y| {
                    let a = if y >= k { f64::INFINITY } else { k - y };
                    inner_over_x(&x, y, a, beta)
                },
                &breaks,
                MOMENT_TOL,
            )
        }
    };
    ThresholdMoments {
        mass: v[0].clamp(0.0, 1.0),
        first: v[1].max(0.0),
        second: v[2].max(0.0),
    }
}

/// `(E[max(beta, X+Y) | not B_k], E[max(beta^2, (X+Y)^2) | not B_k])`.
pub fn censored_conditional_moments(cfg: &SystemConfig, k: f64, beta: f64) -> Result<(f64, f64)> {
    if !(k >= 0.0) {
        return Err(Error::InvalidK(k));
    }
    if !(beta >= 0.0 && beta.is_finite()) {
        return Err(Error::InvalidBeta(beta));
    }
    let m = threshold_moments(cfg, StateTwoSet::OutsideBusyWindow { k }, beta);
    if m.mass < DEGENERATE_MASS {
        return Err(Error::DegenerateConditioning { k, mass: m.mass });
    }
    Ok((m.first / m.mass, m.second / m.mass))
}

/// `P(Y + X <= t)`.
pub fn sum_cdf(cfg: &SystemConfig, t: f64) -> f64 {
    let x = cfg.x;
    let (inf_x, sup_x) = cfg.x.support_bounds();
    let [v] = expect_over(&cfg.y, |y| [x.cdf(t - y)], &[t - sup_x, t - inf_x], PROB_TOL);
    v.clamp(0.0, 1.0)
}

/// Smallest `t` (to within `1e-9` relative) with `P(Y + X > t) <= tail`.
pub fn sum_tail_quantile(cfg: &SystemConfig, tail: f64) -> f64 {
    let lo0 = cfg.y.support_bounds().0 + cfg.x.support_bounds().0;
    // union bound: P(Y+X > a+b) <= P(Y > a) + P(X > b)
    let hi0 = cfg.y.tail_quantile(0.5 * tail) + cfg.x.tail_quantile(0.5 * tail);
    let (mut lo, mut hi) = (lo0, hi0);
    if 1.0 - sum_cdf(cfg, lo) <= tail {
        return lo;
    }
    while hi - lo > 1e-9 * hi.abs().max(1.0) {
        let mid = 0.5 * (lo + hi);
        if 1.0 - sum_cdf(cfg, mid) <= tail {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    hi
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    fn cfg(y: DelayModel, x: DelayModel) -> SystemConfig {
        SystemConfig::new(y, x, 0.0).unwrap()
    }

    const C10: DelayModel = DelayModel::Constant { c: 10.0 };
    const C5: DelayModel = DelayModel::Constant { c: 5.0 };
    const U010: DelayModel = DelayModel::Uniform { lo: 0.0, hi: 10.0 };
    const SE101: DelayModel = DelayModel::ShiftedExponential { shift: 10.0, rate: 1.0 };

    #[test]
    fn sampling_means() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        assert_eq!(C10.sample(&mut rng), 10.0);
        let n = 1_000_000;
        let mu: f64 = (0..n).map(|_| U010.sample(&mut rng)).sum::<f64>() / n as f64;
        assert!(close(mu, 5.0, 0.02), "{mu}");
        let mu: f64 = (0..n).map(|_| SE101.sample(&mut rng)).sum::<f64>() / n as f64;
        assert!(close(mu, 11.0, 0.01), "{mu}");
    }

    #[test]
    fn samples_stay_in_support() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for m in [C10, U010, SE101, DelayModel::Uniform { lo: 3.0, hi: 3.0 }] {
            let (lo, hi) = m.support_bounds();
            for _ in 0..10_000 {
                let v = m.sample(&mut rng);
                assert!(v >= lo && v <= hi);
            }
        }
    }

    #[test]
    fn cdf_values() {
        assert_eq!(U010.cdf(5.0), 0.5);
        assert_eq!(SE101.cdf(10.0), 0.0);
        assert_eq!(C10.cdf(9.99), 0.0);
        assert_eq!(C10.cdf(10.0), 1.0);
        assert_eq!(U010.cdf(-1.0), 0.0);
        assert_eq!(U010.cdf(11.0), 1.0);
    }

    #[test]
    fn closed_form_moments() {
        assert_eq!(C10.moments(), (10.0, 100.0));
        let (m, s) = U010.moments();
        assert!(close(m, 5.0, 1e-15) && close(s, 100.0 / 3.0, 1e-12));
        // s^2 + 2s/rate + 2/rate^2
        assert_eq!(SE101.moments(), (11.0, 122.0));
    }

    #[test]
    fn bounds() {
        assert_eq!(SE101.support_bounds(), (10.0, f64::INFINITY));
        assert_eq!(U010.support_bounds(), (0.0, 10.0));
        assert_eq!(DelayModel::Constant { c: 5.0 }.support_bounds(), (5.0, 5.0));
    }

    #[test]
    fn lower_partials_reach_full_moments() {
        for m in [C10, U010, SE101] {
            let (m1, m2) = m.moments();
            let l = m.lower_partial_moments(f64::INFINITY);
            assert!(close(l[0], 1.0, 1e-15) && close(l[1], m1, 1e-12) && close(l[2], m2, 1e-10));
            let t = m.tail_quantile(1e-15);
            let l = m.lower_partial_moments(t);
            assert!(close(l[1], m1, 1e-9) && close(l[2], m2, 1e-8), "{m:?} {l:?}");
        }
    }

    #[test]
    fn exponential_partials_match_quadrature() {
        let t = 12.3;
        let l = SE101.lower_partial_moments(t);
        for (j, lj) in l.iter().enumerate() {
            let q = crate::quadrature::simpson(|y| SE101.density(y) * y.powi(j as i32), 10.0, t, 1e-13, 40);
            assert!(close(*lj, q, 1e-10), "j={j}: {lj} vs {q}");
        }
    }

    #[test]
    fn rejects_bad_models() {
        assert!(DelayModel::constant(-1.0).is_err());
        assert!(DelayModel::uniform(3.0, 2.0).is_err());
        assert!(DelayModel::uniform(-1.0, 2.0).is_err());
        assert!(DelayModel::shifted_exponential(1.0, 0.0).is_err());
        assert!(DelayModel::shifted_exponential(f64::NAN, 1.0).is_err());
    }

    #[test]
    fn rejects_ack_longer_than_service() {
        let err = SystemConfig::new(C5, C10, 0.0).unwrap_err();
        assert!(matches!(err, Error::InvalidConfig(_)));
        assert!(SystemConfig::new(SE101, DelayModel::Uniform { lo: 0.0, hi: 10.5 }, 0.0).is_err());
        // boundary equality is allowed
        assert!(SystemConfig::new(C10, U010, 0.0).is_ok());
        assert!(SystemConfig::new(C10, U010, -1.0).is_err());
    }

    #[test]
    fn busy_window_examples() {
        assert!(close(busy_window_prob(&cfg(C10, U010), 15.0), 0.5, 1e-12));
        assert_eq!(busy_window_prob(&cfg(C10, C5), 12.0), 1.0);
        for c in [cfg(C10, U010), cfg(SE101, U010), cfg(C10, C5)] {
            assert_eq!(busy_window_prob(&c, c.y.support_bounds().0), 0.0);
        }
    }

    #[test]
    fn busy_window_exponential_closed_form() {
        // Y = 10 + Exp(1), X ~ U[0,10], K = 15:
        // p = int_10^15 e^{-(y-10)} (1 - (15-y)/10) dy
        let k: f64 = 15.0;
        let a = k - 10.0;
        // int_0^a e^{-w} (1 - (a - w)/10) dw
        let exact = (1.0 - (-a).exp()) * (1.0 - a / 10.0) + (1.0 - (-a).exp() * (1.0 + a)) / 10.0;
        let p = busy_window_prob(&cfg(SE101, U010), k);
        assert!(close(p, exact, 1e-9), "{p} vs {exact}");
    }

    #[test]
    fn late_ack_examples() {
        assert_eq!(late_ack_prob(&cfg(C10, C5), 12.0), 0.0);
        assert!(close(late_ack_prob(&cfg(SE101, U010), 11.0), (-1.0f64).exp(), 1e-12));
        let u = DelayModel::Uniform { lo: 8.0, hi: 12.0 };
        assert!(close(late_ack_prob(&cfg(u, DelayModel::Constant { c: 2.0 }), 10.0), 0.5, 1e-15));
    }

    #[test]
    fn censored_constant_examples() {
        let c = cfg(C10, C5);
        assert_eq!(censored_conditional_moments(&c, 20.0, 0.0).unwrap(), (15.0, 225.0));
        assert_eq!(censored_conditional_moments(&c, 20.0, 20.0).unwrap(), (20.0, 400.0));
    }

    #[test]
    fn censored_degenerate_inside_window() {
        let err = censored_conditional_moments(&cfg(C10, C5), 12.0, 1.0).unwrap_err();
        assert!(matches!(err, Error::DegenerateConditioning { .. }));
    }

    #[test]
    fn mass_matches_busy_window() {
        for (c, k) in [(cfg(SE101, U010), 14.0), (cfg(C10, U010), 13.0), (cfg(SE101, C5), 16.0)] {
            let m = threshold_moments(&c, StateTwoSet::OutsideBusyWindow { k }, 3.0);
            assert!(close(m.mass, 1.0 - busy_window_prob(&c, k), 1e-8));
        }
    }

    #[test]
    fn unconditioned_constant_and_uniform() {
        let m = threshold_moments(&cfg(C10, C5), StateTwoSet::Everything, 7.5);
        assert_eq!((m.mass, m.first, m.second), (1.0, 15.0, 225.0));
        let m = threshold_moments(&cfg(C10, U010), StateTwoSet::Everything, 10.0);
        assert!(close(m.first, 15.0, 1e-12));
        assert!(close(m.second, 225.0 + 100.0 / 12.0, 1e-10));
    }

    #[test]
    fn sum_quantile_constant_and_uniform() {
        assert!(close(sum_tail_quantile(&cfg(C10, C5), 1e-4), 15.0, 1e-8));
        let q = sum_tail_quantile(&cfg(C10, U010), 1e-4);
        assert!(close(q, 20.0 - 1e-3, 1e-7), "{q}");
    }
}
