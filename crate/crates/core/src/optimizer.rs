//! Closed-form average AoI of the two-threshold early-sampling policy, the
//! threshold fixed point, the search over the state-1 period `K`, and the
//! wait-for-ACK and periodic baselines.
//!
//! For a fixed `K` the state-2 wait is `(beta - (X + Y))^+`, so every
//! state-2 cycle has length `max(beta, X + Y)`. With
//! `R = (1-p) E[max(beta, U) | not B_K] + p K` and
//! `Q = (1-p) E[max(beta^2, U^2) | not B_K] + p K^2` the average age is
//! `Q / 2R + E[Y]`, subject to `R >= T = (1 + P(Y > K)) / f_max`.
//! Both `R` and `Q` are assembled from unnormalized moments, so nothing is
//! divided by `1 - p`.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::delay::{
    busy_window_prob, late_ack_prob, sum_tail_quantile, threshold_moments, CycleMoments,
    DelayDistribution, StateTwoSet, SystemConfig, DEGENERATE_MASS,
};
use crate::error::{Error, Result};
use crate::policy::PolicySpec;

const MAX_DOUBLINGS: u32 = 60;
/// Tolerance on the rate constraint when flagging feasibility.
pub const FEASIBILITY_TOL: f64 = 1e-9;

/// Which optimization problem the threshold belongs to.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Regime {
    /// Early sampling with state-1 period `k`.
    Early { k: f64 },
    /// Always wait for the ACK: `p = 0`, unconditioned moments, `T = 1/f_max`.
    WaitForAck,
}

/// State-1 period and state-2 threshold of an early-sampling policy.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EarlyPolicy {
    pub k: f64,
    pub beta: f64,
}

impl EarlyPolicy {
    pub fn new(k: f64, beta: f64) -> Result<Self> {
        if !(k > 0.0 && k.is_finite()) {
            return Err(Error::InvalidK(k));
        }
        if !(beta >= 0.0 && beta.is_finite()) {
            return Err(Error::InvalidBeta(beta));
        }
        Ok(EarlyPolicy { k, beta })
    }

    /// State-2 wait after an ACK that reports service `y` and ACK delay `x`.
    pub fn state_two_wait(&self, y: f64, x: f64) -> f64 {
        (self.beta - (x + y)).max(0.0)
    }

    /// State-1 wait after an ACK that arrives `elapsed` after the last sample.
    pub fn state_one_wait(&self, elapsed: f64) -> f64 {
        (self.k - elapsed).max(0.0)
    }
}

/// Search mode for [`search_k`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SearchMode {
    /// Step `K` upward from `inf Y` until the objective stops improving.
    Descent,
    /// Evaluate a fixed grid (plus a dense grid inside the periodic window).
    Grid,
}

/// Knobs of the threshold solver and the `K` search. Unset values are
/// derived from the system configuration by [`OptimizerConfig::resolve`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OptimizerConfig {
    /// Bisection width, relative to the bracket `u0`.
    pub eps_rel: f64,
    /// `K` step for descent mode; default `(k0 - inf Y) / k_grid_points`.
    pub lambda_step: Option<f64>,
    /// Upper end of the `K` range; default twice the `1 - 1e-4` quantile of `X + Y`.
    pub k0: Option<f64>,
    /// Initial bisection bracket; default `4 (E[X + Y] + 1/f_max)`, doubled as needed.
    pub u0: Option<f64>,
    pub k_grid_points: usize,
    /// Grid densification factor inside the periodic window.
    pub window_densify: usize,
    /// Offset of the chosen period above the window's lower end, as a fraction of its width.
    pub window_offset_frac: f64,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        OptimizerConfig {
            eps_rel: 1e-9,
            lambda_step: None,
            k0: None,
            u0: None,
            k_grid_points: 400,
            window_densify: 10,
            window_offset_frac: 1e-6,
        }
    }
}

/// [`OptimizerConfig`] with every default filled in for a given system.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ResolvedOptimizer {
    pub eps_rel: f64,
    pub lambda_step: f64,
    pub k0: f64,
    pub u0: f64,
    pub k_grid_points: usize,
    pub window_densify: usize,
    pub window_offset_frac: f64,
}

impl OptimizerConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidOptimizer(m.to_string()));
        if !(self.eps_rel > 0.0 && self.eps_rel < 1.0) {
            return bad("eps_rel must lie in (0, 1)");
        }
        if matches!(self.lambda_step, Some(l) if !(l > 0.0 && l.is_finite())) {
            return bad("lambda_step must be positive");
        }
        if matches!(self.u0, Some(u) if !(u > 0.0 && u.is_finite())) {
            return bad("u0 must be positive");
        }
        if matches!(self.k0, Some(k) if !k.is_finite()) {
            return bad("k0 must be finite");
        }
        if self.k_grid_points < 2 {
            return bad("k_grid_points must be at least 2");
        }
        if self.window_densify == 0 {
            return bad("window_densify must be at least 1");
        }
        if !(self.window_offset_frac > 0.0 && self.window_offset_frac < 1.0) {
            return bad("window_offset_frac must lie in (0, 1)");
        }
        Ok(())
    }

    pub fn resolve(&self, cfg: &SystemConfig) -> Result<ResolvedOptimizer> {
        self.validate()?;
        let inf_y = cfg.y.support_bounds().0;
        let k0 = match self.k0 {
            Some(k) => k,
            None => 2.0 * sum_tail_quantile(cfg, 1e-4),
        };
        if !(k0 > inf_y) {
            return Err(Error::InvalidRange(format!("k0 = {k0} must exceed inf Y = {inf_y}")));
        }
        let u0 = self
            .u0
            .unwrap_or_else(|| 4.0 * (cfg.y.mean() + cfg.x.mean() + cfg.inv_fmax));
        Ok(ResolvedOptimizer {
            eps_rel: self.eps_rel,
            lambda_step: self
                .lambda_step
                .unwrap_or((k0 - inf_y) / self.k_grid_points as f64),
            k0,
            u0,
            k_grid_points: self.k_grid_points,
            window_densify: self.window_densify,
            window_offset_frac: self.window_offset_frac,
        })
    }
}

/// Outcome of evaluating or optimizing one policy.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PolicyReport {
    pub policy: PolicySpec,
    /// Closed-form average AoI.
    pub aoi: f64,
    /// Mean time between samples, corrupted ones included.
    pub rate_lhs: f64,
    /// `1/f_max`.
    pub rate_rhs: f64,
    pub feasible: bool,
}

impl PolicyReport {
    pub fn new(policy: PolicySpec, aoi: f64, rate_lhs: f64, rate_rhs: f64) -> Self {
        PolicyReport {
            policy,
            aoi,
            rate_lhs,
            rate_rhs,
            feasible: rate_lhs >= rate_rhs - FEASIBILITY_TOL,
        }
    }
}

fn is_full_busy(p: f64) -> bool {
    p >= 1.0 - DEGENERATE_MASS
}

/// `p`, `T`, `Q` and `R` for the given regime and threshold.
pub fn cycle_moments(cfg: &SystemConfig, regime: Regime, beta: f64) -> Result<CycleMoments> {
    if !(beta >= 0.0 && beta.is_finite()) {
        return Err(Error::InvalidBeta(beta));
    }
    match regime {
        Regime::WaitForAck => {
            let m = threshold_moments(cfg, StateTwoSet::Everything, beta);
            Ok(CycleMoments {
                p: 0.0,
                t_rate: cfg.inv_fmax,
                q: m.second,
                r: m.first,
                late_prob: 0.0,
            })
        }
        Regime::Early { k } => {
            if !(k > 0.0 && k.is_finite()) {
                return Err(Error::InvalidK(k));
            }
            let p = busy_window_prob(cfg, k);
            let late_prob = late_ack_prob(cfg, k);
            let t_rate = (1.0 + late_prob) * cfg.inv_fmax;
            if is_full_busy(p) {
                return Ok(CycleMoments {
                    p: 1.0,
                    t_rate,
                    q: k * k,
                    r: k,
                    late_prob,
                });
            }
            let m = threshold_moments(cfg, StateTwoSet::OutsideBusyWindow { k }, beta);
            Ok(CycleMoments {
                p,
                t_rate,
                q: m.second + p * k * k,
                r: m.first + p * k,
                late_prob,
            })
        }
    }
}

/// Average AoI of early sampling with period `k` and threshold `beta`.
pub fn eval_aoi(cfg: &SystemConfig, k: f64, beta: f64) -> Result<f64> {
    let m = cycle_moments(cfg, Regime::Early { k }, beta)?;
    Ok(m.q / (2.0 * m.r) + cfg.mean_y())
}

/// Average AoI of the wait-for-ACK policy with threshold `beta`.
pub fn eval_aoi_wait_for_ack(cfg: &SystemConfig, beta: f64) -> Result<f64> {
    let m = cycle_moments(cfg, Regime::WaitForAck, beta)?;
    Ok(m.q / (2.0 * m.r) + cfg.mean_y())
}

/// Both sides of the rate constraint, `(R, T)`.
pub fn eval_rate(cfg: &SystemConfig, k: f64, beta: f64) -> Result<(f64, f64)> {
    let m = cycle_moments(cfg, Regime::Early { k }, beta)?;
    Ok((m.r, m.t_rate))
}

/// `R - max(T, Q / 2 beta)`.
pub fn fixed_point_residual(m: &CycleMoments, beta: f64) -> f64 {
    m.r - m.t_rate.max(m.q / (2.0 * beta))
}

/// A solved threshold with the moments at the solution.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ThresholdSolution {
    pub beta: f64,
    pub moments: CycleMoments,
    /// `Q / 2R + E[Y]` at `beta`.
    pub aoi: f64,
}

/// Bisection for the threshold fixed point `R = max(T, Q / 2 beta)` on
/// `[0, u0]`, doubling `u0` until the residual is positive there.
/// Returns the upper end of the final bracket, which satisfies the rate
/// constraint.
pub fn solve_threshold(cfg: &SystemConfig, regime: Regime, opt: &ResolvedOptimizer) -> Result<ThresholdSolution> {
    if let Regime::Early { k } = regime {
        if !(k > 0.0 && k.is_finite()) {
            return Err(Error::InvalidK(k));
        }
        let p = busy_window_prob(cfg, k);
        if is_full_busy(p) {
            return Err(Error::DegenerateConditioning { k, mass: 1.0 - p });
        }
    }
    let diff = |beta: f64| -> Result<(f64, CycleMoments)> {
        let m = cycle_moments(cfg, regime, beta)?;
        Ok((fixed_point_residual(&m, beta), m))
    };

    let mut upper = opt.u0;
    let mut hi = diff(upper)?;
    let mut doublings = 0;
    while !(hi.0 > 0.0) {
        if doublings == MAX_DOUBLINGS {
            return Err(Error::BracketFailure { doublings, upper });
        }
        upper *= 2.0;
        doublings += 1;
        hi = diff(upper)?;
    }

    let eps = opt.eps_rel * upper;
    let (mut l, mut u) = (0.0_f64, upper);
    let mut d_l = f64::NEG_INFINITY;
    let (mut d_u, mut at_u) = hi;
    while u - l > eps {
        let mid = 0.5 * (l + u);
        let (d, m) = diff(mid)?;
        if d == 0.0 {
            return Ok(ThresholdSolution {
                beta: mid,
                moments: m,
                aoi: m.q / (2.0 * m.r) + cfg.mean_y(),
            });
        }
        if d < 0.0 {
            l = mid;
            d_l = d;
        } else {
            u = mid;
            d_u = d;
            at_u = m;
        }
    }

    // one secant step inside the final bracket; kept only if it lowers the
    // residual without breaking the rate constraint
    let (mut beta, mut moments) = (u, at_u);
    if d_l.is_finite() && d_u > d_l {
        let s = l + (u - l) * (-d_l) / (d_u - d_l);
        if s > l && s < u {
            let (d, m) = diff(s)?;
            if d.abs() < d_u.abs() && m.r >= m.t_rate * (1.0 - 1e-12) {
                beta = s;
                moments = m;
            }
        }
    }
    Ok(ThresholdSolution {
        beta,
        moments,
        aoi: moments.q / (2.0 * moments.r) + cfg.mean_y(),
    })
}

/// Optimal state-2 threshold for early sampling with period `k`.
pub fn solve_beta(cfg: &SystemConfig, k: f64, opt: &OptimizerConfig) -> Result<f64> {
    let r = opt.resolve(cfg)?;
    Ok(solve_threshold(cfg, Regime::Early { k }, &r)?.beta)
}

/// Optimal threshold and AoI of the best policy that always waits for the ACK.
pub fn wait_for_ack_optimum(cfg: &SystemConfig, opt: &OptimizerConfig) -> Result<(f64, f64)> {
    let r = opt.resolve(cfg)?;
    let s = solve_threshold(cfg, Regime::WaitForAck, &r)?;
    Ok((s.beta, s.aoi))
}

pub fn wait_for_ack_report(cfg: &SystemConfig, opt: &OptimizerConfig) -> Result<PolicyReport> {
    let r = opt.resolve(cfg)?;
    let s = solve_threshold(cfg, Regime::WaitForAck, &r)?;
    Ok(PolicyReport::new(
        PolicySpec::WaitForAck { beta: s.beta },
        s.aoi,
        s.moments.r,
        cfg.inv_fmax,
    ))
}

/// Open interval `(max(sup Y, 1/f_max), inf Y + inf X)` of periods for which
/// every early sample lands in the busy window, with the period chosen
/// inside it.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PeriodicWindow {
    pub k_lo: f64,
    pub k_hi: f64,
    pub k_best: f64,
}

pub fn periodic_window_with_offset(cfg: &SystemConfig, offset_frac: f64) -> Option<PeriodicWindow> {
    let (inf_y, sup_y) = cfg.y.support_bounds();
    let inf_x = cfg.x.support_bounds().0;
    let k_lo = sup_y.max(cfg.inv_fmax);
    let k_hi = inf_y + inf_x;
    if k_lo < k_hi {
        Some(PeriodicWindow {
            k_lo,
            k_hi,
            k_best: k_lo + offset_frac * (k_hi - k_lo),
        })
    } else {
        None
    }
}

pub fn periodic_window(cfg: &SystemConfig) -> Option<PeriodicWindow> {
    periodic_window_with_offset(cfg, OptimizerConfig::default().window_offset_frac)
}

/// Average AoI of periodic sampling with period `k` inside `(sup Y, inf Y + inf X)`.
pub fn periodic_aoi(cfg: &SystemConfig, k: f64) -> Result<f64> {
    let (inf_y, sup_y) = cfg.y.support_bounds();
    let hi = inf_y + cfg.x.support_bounds().0;
    if !(k > sup_y && k < hi) {
        return Err(Error::OutsidePeriodicWindow { k, lo: sup_y, hi });
    }
    Ok(0.5 * k + cfg.mean_y())
}

/// Period of the periodic-with-preemption baseline under a rate bound.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PeriodicBaseline {
    pub period: f64,
    /// Closed-form AoI; only known when the period lies in the periodic window.
    pub aoi: Option<f64>,
    /// Estimated mean time between samples, `period / (1 + P(Y > period))`.
    pub rate_lhs: f64,
}

/// Picks the baseline period: the solution of
/// `period = (1 + P(Y > period)) / f_max`, raised to the window's chosen
/// period when the window exists. `None` when unconstrained and no window
/// exists (the period would be 0).
pub fn periodic_baseline(cfg: &SystemConfig, offset_frac: f64) -> Option<PeriodicBaseline> {
    let a = cfg.inv_fmax;
    // t - a (1 + P(Y > t)) is increasing; the root lies in [a, 2a]
    let mut period = a;
    if a > 0.0 {
        let (mut lo, mut hi) = (a, 2.0 * a);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if mid - a * (1.0 + late_ack_prob(cfg, mid)) >= 0.0 {
                hi = mid;
            } else {
                lo = mid;
            }
            if hi - lo <= 1e-15 * hi {
                break;
            }
        }
        period = hi;
    }
    if let Some(w) = periodic_window_with_offset(cfg, offset_frac) {
        period = period.max(w.k_best);
    }
    if !(period > 0.0) {
        return None;
    }
    Some(PeriodicBaseline {
        period,
        aoi: periodic_aoi(cfg, period).ok(),
        rate_lhs: period / (1.0 + late_ack_prob(cfg, period)),
    })
}

/// One point of the `K` landscape. `beta` is `None` where state 2 is never
/// visited (`p = 1`); `aoi` is infinite where no threshold meets the rate
/// constraint.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KPoint {
    pub k: f64,
    pub beta: Option<f64>,
    pub aoi: f64,
    pub p: f64,
    pub rate_lhs: f64,
    pub feasible: bool,
}

impl KPoint {
    pub fn report(&self, cfg: &SystemConfig) -> PolicyReport {
        PolicyReport::new(
            PolicySpec::EarlySampling {
                k: self.k,
                beta: self.beta.unwrap_or(0.0),
            },
            self.aoi,
            self.rate_lhs,
            cfg.inv_fmax,
        )
    }
}

/// Optimal AoI for a fixed state-1 period `k`, with its threshold.
pub fn optimal_at_k(cfg: &SystemConfig, k: f64, opt: &ResolvedOptimizer) -> Result<KPoint> {
    if !(k > 0.0 && k.is_finite()) {
        return Err(Error::InvalidK(k));
    }
    let p = busy_window_prob(cfg, k);
    if is_full_busy(p) {
        // state 2 is never entered: pure periodic sampling, P(Y > k) = 0
        let t = (1.0 + late_ack_prob(cfg, k)) * cfg.inv_fmax;
        let feasible = k >= t - FEASIBILITY_TOL;
        return Ok(KPoint {
            k,
            beta: None,
            aoi: if feasible { 0.5 * k + cfg.mean_y() } else { f64::INFINITY },
            p: 1.0,
            rate_lhs: k,
            feasible,
        });
    }
    let s = solve_threshold(cfg, Regime::Early { k }, opt)?;
    Ok(KPoint {
        k,
        beta: Some(s.beta),
        aoi: s.aoi,
        p,
        rate_lhs: s.moments.r / (1.0 + s.moments.late_prob),
        feasible: true,
    })
}

/// `alpha(K)` and its threshold at every requested `K`, evaluated in parallel.
pub fn k_landscape(cfg: &SystemConfig, opt: &OptimizerConfig, k_values: &[f64]) -> Result<Vec<KPoint>> {
    let r = opt.resolve(cfg)?;
    k_values
        .par_iter()
        .map(|&k| optimal_at_k(cfg, k, &r))
        .collect()
}

/// Best `(K, beta)` found by [`search_k`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SearchResult {
    pub k_star: f64,
    pub beta_star: Option<f64>,
    pub aoi_star: f64,
    pub point: KPoint,
}

/// Grid of `K` values used by [`SearchMode::Grid`].
pub fn k_grid(cfg: &SystemConfig, opt: &ResolvedOptimizer) -> Vec<f64> {
    let inf_y = cfg.y.support_bounds().0;
    let n = opt.k_grid_points;
    let step = (opt.k0 - inf_y) / (n - 1) as f64;
    let mut ks: Vec<f64> = (0..n)
        .map(|i| inf_y + step * i as f64)
        .filter(|k| *k > 0.0)
        .collect();
    if let Some(w) = periodic_window_with_offset(cfg, opt.window_offset_frac) {
        let m = n * opt.window_densify;
        let width = w.k_hi - w.k_lo;
        ks.push(w.k_best);
        ks.extend((1..m).map(|i| w.k_lo + width * i as f64 / m as f64));
    }
    ks.sort_by(f64::total_cmp);
    ks.dedup();
    ks
}

pub fn search_k(cfg: &SystemConfig, opt: &OptimizerConfig, mode: SearchMode) -> Result<SearchResult> {
    let r = opt.resolve(cfg)?;
    match mode {
        SearchMode::Grid => {
            let points: Vec<KPoint> = k_grid(cfg, &r)
                .par_iter()
                .map(|&k| optimal_at_k(cfg, k, &r))
                .collect::<Result<_>>()?;
            let best = points
                .iter()
                .filter(|p| p.feasible)
                .fold(None::<&KPoint>, |acc, p| match acc {
                    Some(a) if a.aoi <= p.aoi => Some(a),
                    _ => Some(p),
                })
                .ok_or_else(|| Error::InvalidRange("no feasible K on the grid".into()))?;
            Ok(SearchResult {
                k_star: best.k,
                beta_star: best.beta,
                aoi_star: best.aoi,
                point: *best,
            })
        }
        SearchMode::Descent => descent(cfg, &r),
    }
}

/// Steps `K` up from `inf Y` by `lambda` and stops at the first step that
/// does not improve `Q / 2R`.
fn descent(cfg: &SystemConfig, opt: &ResolvedOptimizer) -> Result<SearchResult> {
    let inf_y = cfg.y.support_bounds().0;
    let mut best = optimal_at_k(cfg, opt.k0, opt)?;
    let mut k = if inf_y > 0.0 { inf_y } else { opt.lambda_step };
    let mut old = f64::INFINITY;
    let mut new = f64::MAX;
    while old > new && k < opt.k0 {
        old = new;
        let point = optimal_at_k(cfg, k, opt)?;
        new = point.aoi - cfg.mean_y();
        if old - new > 0.0 {
            best = point;
        }
        k += opt.lambda_step;
    }
    Ok(SearchResult {
        k_star: best.k,
        beta_star: best.beta,
        aoi_star: best.aoi,
        point: best,
    })
}
