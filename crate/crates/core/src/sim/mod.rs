//! Discrete-event simulation of sampling over a channel with delayed ACKs.
//!
//! The channel serves one sample at a time and has a single storage slot. A
//! sample taken while a transmission is in progress is corrupted: it goes
//! into the slot, or is lost if the slot is full. When the channel frees up,
//! a stored sample is transmitted anyway. Every uncorrupted delivery triggers
//! an ACK, carrying the delivery time, which reaches the transmitter after an
//! independent delay `X`.
//!
//! Statistics come from regeneration cycles. For early sampling and
//! wait-for-ACK a cycle ends whenever a sample is taken from state 2. When
//! state 2 is never visited (periodic sampling, or early sampling that stays
//! in state 1) a batch is closed every `batch_samples` samples instead.

mod engine;
mod policies;

use serde::{Deserialize, Serialize};

use crate::delay::SystemConfig;
use crate::error::{Error, Result};
use crate::optimizer::{cycle_moments, Regime};
use crate::policy::PolicySpec;
use crate::trace::TraceSink;

use engine::{Controller, Core, CycleRecord};

pub const DEFAULT_BATCH_SAMPLES: u64 = 1000;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimConfig {
    /// Total cycles simulated, warmup included.
    pub cycles: u64,
    /// Leading cycles discarded; defaults to 2% of `cycles`, at least 100.
    pub warmup_cycles: Option<u64>,
    pub seed: u64,
    /// Event cap; defaults to `10_000 * cycles + 1_000_000`.
    pub max_events: Option<u64>,
    pub batch_samples: u64,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig {
            cycles: 100_000,
            warmup_cycles: None,
            seed: 0,
            max_events: None,
            batch_samples: DEFAULT_BATCH_SAMPLES,
        }
    }
}

impl SimConfig {
    pub fn new(cycles: u64, seed: u64) -> Self {
        SimConfig {
            cycles,
            seed,
            ..SimConfig::default()
        }
    }

    pub fn with_warmup(mut self, warmup: u64) -> Self {
        self.warmup_cycles = Some(warmup);
        self
    }

    pub fn warmup(&self) -> u64 {
        self.warmup_cycles.unwrap_or_else(|| {
            (self.cycles / 50)
                .max(100)
                .min(self.cycles.saturating_sub(1))
        })
    }

    pub fn event_cap(&self) -> u64 {
        self.max_events
            .unwrap_or_else(|| self.cycles.saturating_mul(10_000).saturating_add(1_000_000))
    }

    pub fn validate(&self) -> Result<()> {
        if self.cycles < 1 {
            return Err(Error::InvalidSimConfig("cycles must be at least 1".into()));
        }
        if self.warmup() >= self.cycles {
            return Err(Error::InvalidSimConfig(format!(
                "warmup_cycles ({}) must be below cycles ({})",
                self.warmup(),
                self.cycles
            )));
        }
        if self.batch_samples < 1 {
            return Err(Error::InvalidSimConfig("batch_samples must be at least 1".into()));
        }
        if self.event_cap() < 1 {
            return Err(Error::InvalidSimConfig("max_events must be at least 1".into()));
        }
        Ok(())
    }
}

/// Statistics over the post-warmup cycles of one run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimStats {
    pub avg_aoi: f64,
    /// Half-width of the 95% interval of `avg_aoi`.
    pub aoi_ci95: f64,
    pub aoi_se: f64,
    /// Elapsed time per sample taken.
    pub mean_intersample: f64,
    pub intersample_se: f64,
    pub cycles_completed: u64,
    /// Includes corrupted samples.
    pub samples_taken: u64,
    pub corrupted_samples: u64,
    pub preemptions: u64,
    /// Fraction of ACK checks in state 1 that kept the system in state 1.
    pub empirical_p: f64,
    pub p_trials: u64,
    /// Length of the post-warmup horizon.
    pub sim_time: f64,
    pub aoi_integral: f64,
    pub cycle_len_mean: f64,
    pub cycle_len_se: f64,
    pub samples_per_cycle_mean: f64,
    pub samples_per_cycle_se: f64,
}

/// Kahan-compensated sum.
#[derive(Default, Clone, Copy)]
struct Kahan {
    sum: f64,
    c: f64,
}

impl Kahan {
    fn add(&mut self, v: f64) {
        let y = v - self.c;
        let t = self.sum + y;
        self.c = (t - self.sum) - y;
        self.sum = t;
    }
}

fn kahan_sum<I: IntoIterator<Item = f64>>(it: I) -> f64 {
    let mut k = Kahan::default();
    for v in it {
        k.add(v);
    }
    k.sum
}

/// Standard error of `sum(a) / sum(b)` from paired per-cycle values.
fn ratio_se(a: &[f64], b: &[f64], ratio: f64) -> f64 {
    let n = a.len();
    if n < 2 {
        return f64::NAN;
    }
    let mean_b = kahan_sum(b.iter().copied()) / n as f64;
    let ss = kahan_sum(a.iter().zip(b).map(|(x, y)| (x - ratio * y).powi(2)));
    (ss / (n - 1) as f64 / n as f64).sqrt() / mean_b
}

fn mean_se(v: &[f64]) -> (f64, f64) {
    let n = v.len();
    let mean = kahan_sum(v.iter().copied()) / n as f64;
    if n < 2 {
        return (mean, f64::NAN);
    }
    let ss = kahan_sum(v.iter().map(|x| (x - mean).powi(2)));
    (mean, (ss / (n - 1) as f64 / n as f64).sqrt())
}

fn summarize(records: &[CycleRecord], totals: engine::Totals) -> SimStats {
    let area: Vec<f64> = records.iter().map(|r| r.area).collect();
    let len: Vec<f64> = records.iter().map(|r| r.len).collect();
    let samples: Vec<f64> = records.iter().map(|r| r.samples as f64).collect();
    let total_area = kahan_sum(area.iter().copied());
    let total_len = kahan_sum(len.iter().copied());
    let total_samples: u64 = records.iter().map(|r| r.samples).sum();
    let avg_aoi = total_area / total_len;
    let aoi_se = ratio_se(&area, &len, avg_aoi);
    let mean_intersample = total_len / total_samples as f64;
    let intersample_se = ratio_se(&len, &samples, mean_intersample);
    let (cycle_len_mean, cycle_len_se) = mean_se(&len);
    let (samples_per_cycle_mean, samples_per_cycle_se) = mean_se(&samples);
    let empirical_p = if totals.trials == 0 {
        0.0
    } else {
        totals.stays as f64 / totals.trials as f64
    };
    SimStats {
        avg_aoi,
        aoi_ci95: 1.96 * aoi_se,
        aoi_se,
        mean_intersample,
        intersample_se,
        cycles_completed: records.len() as u64,
        samples_taken: total_samples,
        corrupted_samples: totals.corrupted,
        preemptions: totals.preemptions,
        empirical_p,
        p_trials: totals.trials,
        sim_time: total_len,
        aoi_integral: total_area,
        cycle_len_mean,
        cycle_len_se,
        samples_per_cycle_mean,
        samples_per_cycle_se,
    }
}

fn run_with<C: Controller>(
    cfg: &SystemConfig,
    sim: &SimConfig,
    mut ctrl: C,
    trace: Option<&mut dyn TraceSink>,
) -> Result<SimStats> {
    let mut core = Core::new(cfg, sim.seed, sim.warmup(), sim.cycles, sim.event_cap(), trace);
    core.run(&mut ctrl, sim.cycles)?;
    debug_assert_eq!(core.cycles_closed(), sim.cycles);
    Ok(summarize(&core.records, core.totals))
}

fn dispatch(
    cfg: &SystemConfig,
    policy: &PolicySpec,
    sim: &SimConfig,
    trace: Option<&mut dyn TraceSink>,
) -> Result<SimStats> {
    cfg.validate()?;
    policy.validate()?;
    sim.validate()?;
    match *policy {
        PolicySpec::EarlySampling { k, beta } => {
            run_with(cfg, sim, policies::Early::new(k, beta, sim.batch_samples), trace)
        }
        PolicySpec::WaitForAck { beta } => run_with(cfg, sim, policies::WaitForAck::new(beta), trace),
        PolicySpec::PeriodicPreempt { period } => {
            run_with(cfg, sim, policies::Periodic::new(period, sim.batch_samples), trace)
        }
    }
}

/// Simulates `policy` and returns statistics over the post-warmup cycles.
pub fn simulate(cfg: &SystemConfig, policy: &PolicySpec, sim: &SimConfig) -> Result<SimStats> {
    dispatch(cfg, policy, sim, None)
}

/// As [`simulate`], recording every event into `trace`.
pub fn simulate_traced(
    cfg: &SystemConfig,
    policy: &PolicySpec,
    sim: &SimConfig,
    trace: &mut dyn TraceSink,
) -> Result<SimStats> {
    dispatch(cfg, policy, sim, Some(trace))
}

/// Simulated early sampling next to its closed-form predictions.
///
/// Each `*_z` is `(simulated - predicted) / standard error`. Cycle length and
/// samples per cycle are only predicted when `p < 1`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ValidationReport {
    pub stats: SimStats,
    pub sim_aoi: f64,
    pub formula_aoi: f64,
    pub z_score: f64,
    pub empirical_p: f64,
    pub formula_p: f64,
    pub p_z: f64,
    pub rate_sim: f64,
    pub rate_formula: f64,
    pub rate_z: f64,
    pub cycle_len_formula: Option<f64>,
    pub cycle_len_z: Option<f64>,
    pub samples_per_cycle_formula: Option<f64>,
    pub samples_per_cycle_z: Option<f64>,
}

/// z-score with the standard error floored at rounding level, so runs whose
/// cycles are (nearly) deterministic are not judged on accumulated roundoff.
fn z(sim: f64, formula: f64, se: f64) -> f64 {
    let d = sim - formula;
    let se = se.max(1e-9 * formula.abs().max(1.0));
    d / se
}

pub fn validate_against_closed_form(
    cfg: &SystemConfig,
    k: f64,
    beta: f64,
    sim: &SimConfig,
) -> Result<ValidationReport> {
    let m = cycle_moments(cfg, Regime::Early { k }, beta)?;
    let stats = simulate(cfg, &PolicySpec::EarlySampling { k, beta }, sim)?;
    let formula_aoi = m.q / (2.0 * m.r) + cfg.mean_y();
    let rate_formula = m.r / (1.0 + m.late_prob);
    let p_sigma = (m.p * (1.0 - m.p) / stats.p_trials.max(1) as f64).sqrt();
    let (cycle_len_formula, samples_per_cycle_formula) = if m.p < 1.0 {
        (
            Some(m.r / (1.0 - m.p)),
            Some((1.0 + m.late_prob) / (1.0 - m.p)),
        )
    } else {
        (None, None)
    };
    Ok(ValidationReport {
        sim_aoi: stats.avg_aoi,
        formula_aoi,
        z_score: z(stats.avg_aoi, formula_aoi, stats.aoi_se),
        empirical_p: stats.empirical_p,
        formula_p: m.p,
        p_z: z(stats.empirical_p, m.p, p_sigma),
        rate_sim: stats.mean_intersample,
        rate_formula,
        rate_z: z(stats.mean_intersample, rate_formula, stats.intersample_se),
        cycle_len_formula,
        cycle_len_z: cycle_len_formula.map(|f| z(stats.cycle_len_mean, f, stats.cycle_len_se)),
        samples_per_cycle_formula,
        samples_per_cycle_z: samples_per_cycle_formula
            .map(|f| z(stats.samples_per_cycle_mean, f, stats.samples_per_cycle_se)),
        stats,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::delay::DelayModel;
    use crate::trace::{audit, EventKind, TraceRecord};

    fn sys(y: DelayModel, x: DelayModel) -> SystemConfig {
        SystemConfig::new(y, x, 0.0).unwrap()
    }

    fn const_sys() -> SystemConfig {
        sys(DelayModel::constant(10.0).unwrap(), DelayModel::constant(5.0).unwrap())
    }

    #[test]
    fn warmup_defaults() {
        assert_eq!(SimConfig::new(100_000, 0).warmup(), 2000);
        assert_eq!(SimConfig::new(1000, 0).warmup(), 100);
        assert_eq!(SimConfig::new(50, 0).warmup(), 49);
        assert!(SimConfig::new(0, 0).validate().is_err());
        assert!(SimConfig::new(10, 0).with_warmup(10).validate().is_err());
    }

    #[test]
    fn periodic_constant_delays() {
        let s = simulate(
            &const_sys(),
            &PolicySpec::PeriodicPreempt { period: 12.0 },
            &SimConfig::new(1000, 1),
        )
        .unwrap();
        assert!((s.avg_aoi - 16.0).abs() < 1e-9, "{}", s.avg_aoi);
        assert_eq!(s.preemptions, 0);
        assert_eq!(s.corrupted_samples, 0);
        assert!((s.mean_intersample - 12.0).abs() < 1e-9);
    }

    #[test]
    fn zero_wait_constant_delays() {
        let s = simulate(
            &const_sys(),
            &PolicySpec::WaitForAck { beta: 0.0 },
            &SimConfig::new(10_000, 1),
        )
        .unwrap();
        assert!((s.avg_aoi - 17.5).abs() < 1e-9, "{}", s.avg_aoi);
        assert!((s.mean_intersample - 15.0).abs() < 1e-9);
        assert_eq!(s.empirical_p, 0.0);
        assert_eq!(s.samples_taken, s.cycles_completed);
    }

    #[test]
    fn full_busy_window_stays_in_state_one() {
        let r = validate_against_closed_form(&const_sys(), 12.0, 0.0, &SimConfig::new(200, 3)).unwrap();
        assert_eq!(r.empirical_p, 1.0);
        assert!((r.rate_sim - 12.0).abs() < 1e-9, "{}", r.rate_sim);
        assert!((r.sim_aoi - 16.0).abs() < 1e-9);
        assert_eq!(r.formula_p, 1.0);
        assert!(r.cycle_len_formula.is_none());
    }

    #[test]
    fn late_timer_corrupts_and_preempts() {
        // K = 8 < Y = 10: every early sample is corrupted and later preempted
        let s = simulate(
            &const_sys(),
            &PolicySpec::EarlySampling { k: 8.0, beta: 0.0 },
            &SimConfig::new(1000, 1),
        )
        .unwrap();
        assert_eq!(s.empirical_p, 0.0);
        assert_eq!(s.samples_taken, 2 * s.cycles_completed);
        assert_eq!(s.corrupted_samples, s.cycles_completed);
        assert_eq!(s.preemptions, s.cycles_completed);
        // cycle length 15, age 10..25
        assert!((s.avg_aoi - 17.5).abs() < 1e-9);
    }

    #[test]
    fn busy_window_half() {
        let cfg = sys(DelayModel::constant(10.0).unwrap(), DelayModel::uniform(0.0, 10.0).unwrap());
        let r = validate_against_closed_form(&cfg, 15.0, 0.0, &SimConfig::new(100_000, 7)).unwrap();
        assert!((r.formula_p - 0.5).abs() < 1e-9);
        assert!(r.p_z.abs() <= 3.0, "{r:?}");
        assert!(r.z_score.abs() <= 4.0, "{r:?}");
    }

    #[test]
    fn deterministic_for_fixed_seed() {
        let cfg = sys(
            DelayModel::shifted_exponential(10.0, 1.0).unwrap(),
            DelayModel::uniform(0.0, 10.0).unwrap(),
        );
        let p = PolicySpec::EarlySampling { k: 14.0, beta: 18.0 };
        let a = simulate(&cfg, &p, &SimConfig::new(5000, 42)).unwrap();
        let b = simulate(&cfg, &p, &SimConfig::new(5000, 42)).unwrap();
        let c = simulate(&cfg, &p, &SimConfig::new(5000, 43)).unwrap();
        assert_eq!(a, b);
        assert_ne!(a.avg_aoi, c.avg_aoi);
    }

    #[test]
    fn event_cap_is_enforced() {
        let sim = SimConfig {
            max_events: Some(50),
            ..SimConfig::new(1000, 0)
        };
        let e = simulate(&const_sys(), &PolicySpec::WaitForAck { beta: 0.0 }, &sim).unwrap_err();
        assert_eq!(e, Error::EventCapExceeded(50));
    }

    #[test]
    fn rejects_bad_policy() {
        let e = simulate(&const_sys(), &PolicySpec::PeriodicPreempt { period: 0.0 }, &SimConfig::new(10, 0));
        assert!(matches!(e, Err(Error::InvalidPolicy(_))));
    }

    #[test]
    fn trace_matches_stats() {
        let cfg = sys(
            DelayModel::shifted_exponential(10.0, 1.0).unwrap(),
            DelayModel::uniform(0.0, 10.0).unwrap(),
        );
        let p = PolicySpec::EarlySampling { k: 14.0, beta: 18.0 };
        let sim = SimConfig::new(2000, 5).with_warmup(0);
        let mut recs: Vec<TraceRecord> = Vec::new();
        let s = simulate_traced(&cfg, &p, &sim, &mut recs).unwrap();
        assert_eq!(s, simulate(&cfg, &p, &sim).unwrap());
        let a = audit(&recs, s.sim_time, true);
        assert!(a.clean(), "{a:?}");
        assert!((a.integral - s.aoi_integral).abs() <= 1e-9 * s.aoi_integral);
        assert_eq!(a.integral, a.integral_without_corrupted);
        let samples = recs.iter().filter(|r| r.kind == EventKind::Sample && r.time < s.sim_time).count();
        assert_eq!(samples as u64, s.samples_taken);
    }

    #[test]
    fn periodic_small_period_loses_samples() {
        let cfg = sys(DelayModel::uniform(10.0, 12.0).unwrap(), DelayModel::uniform(0.0, 5.0).unwrap());
        let mut recs: Vec<TraceRecord> = Vec::new();
        let s = simulate_traced(
            &cfg,
            &PolicySpec::PeriodicPreempt { period: 3.0 },
            &SimConfig::new(50, 2).with_warmup(0),
            &mut recs,
        )
        .unwrap();
        assert!(s.preemptions > 0);
        assert!(recs.iter().any(|r| r.field("fate") == Some("lost")));
        let a = audit(&recs, s.sim_time, false);
        assert!(a.clean(), "{a:?}");
        assert_eq!(a.integral, a.integral_without_corrupted);
    }
}
