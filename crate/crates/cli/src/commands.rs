//! The four subcommands as library functions. Each returns its rows; the
//! binary decides where they go.

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};

use aoi_core::optimizer::{
    k_landscape, optimal_at_k, periodic_baseline, search_k, wait_for_ack_report, OptimizerConfig,
    FEASIBILITY_TOL,
};
use aoi_core::trace::CsvTraceWriter;
use aoi_core::{simulate, simulate_traced, Error, PolicySpec, SimConfig, SimStats, SystemConfig};
use rayon::prelude::*;
use serde::Serialize;

use crate::config::{ExperimentConfig, PolicyKind};
use crate::error::CliError;

/// One optimized (or baseline) policy at one rate bound.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SolveRow {
    pub inv_fmax: f64,
    pub policy: PolicyKind,
    /// State-1 period for `early`, sampling period for `periodic`.
    pub k: Option<f64>,
    pub beta: Option<f64>,
    pub aoi: Option<f64>,
    pub rate_lhs: Option<f64>,
    pub rate_rhs: f64,
    pub feasible: bool,
    pub note: String,
}

impl SolveRow {
    fn infeasible(inv_fmax: f64, policy: PolicyKind, note: String) -> Self {
        SolveRow {
            inv_fmax,
            policy,
            k: None,
            beta: None,
            aoi: None,
            rate_lhs: None,
            rate_rhs: inv_fmax,
            feasible: false,
            note,
        }
    }

    /// The policy to simulate for this row, if any.
    pub fn policy_spec(&self) -> Option<PolicySpec> {
        match self.policy {
            PolicyKind::Early => self.k.map(|k| PolicySpec::EarlySampling {
                k,
                beta: self.beta.unwrap_or(0.0),
            }),
            PolicyKind::WaitAck => self.beta.map(|beta| PolicySpec::WaitForAck { beta }),
            PolicyKind::Periodic => self.k.map(|period| PolicySpec::PeriodicPreempt { period }),
        }
    }
}

fn solve_point(cfg: &SystemConfig, policy: PolicyKind, exp: &ExperimentConfig) -> Result<SolveRow, CliError> {
    let inv_fmax = cfg.inv_fmax;
    let opt = &exp.optimizer;
    // a bad search range is a configuration error, not an infeasible row
    opt.resolve(cfg)?;
    match policy {
        PolicyKind::Early => match search_k(cfg, opt, exp.search_mode) {
            Ok(s) => {
                let rep = s.point.report(cfg);
                Ok(SolveRow {
                    inv_fmax,
                    policy,
                    k: Some(s.k_star),
                    beta: s.beta_star,
                    aoi: Some(s.aoi_star),
                    rate_lhs: Some(rep.rate_lhs),
                    rate_rhs: inv_fmax,
                    feasible: rep.feasible,
                    note: String::new(),
                })
            }
            Err(Error::InvalidRange(m)) => Ok(SolveRow::infeasible(inv_fmax, policy, m)),
            Err(e) => Err(e.into()),
        },
        PolicyKind::WaitAck => {
            let rep = wait_for_ack_report(cfg, opt)?;
            let PolicySpec::WaitForAck { beta } = rep.policy else {
                unreachable!("wait-for-ACK report carries a wait-for-ACK policy")
            };
            Ok(SolveRow {
                inv_fmax,
                policy,
                k: None,
                beta: Some(beta),
                aoi: Some(rep.aoi),
                rate_lhs: Some(rep.rate_lhs),
                rate_rhs: inv_fmax,
                feasible: rep.feasible,
                note: String::new(),
            })
        }
        PolicyKind::Periodic => match periodic_baseline(cfg, opt.window_offset_frac) {
            None => Ok(SolveRow::infeasible(
                inv_fmax,
                policy,
                "periodic window is empty and there is no rate bound to set the period".into(),
            )),
            Some(b) => Ok(SolveRow {
                inv_fmax,
                policy,
                k: Some(b.period),
                beta: None,
                aoi: b.aoi,
                rate_lhs: Some(b.rate_lhs),
                rate_rhs: inv_fmax,
                feasible: b.aoi.is_some() && b.rate_lhs >= inv_fmax - FEASIBILITY_TOL,
                note: if b.aoi.is_some() {
                    String::new()
                } else {
                    "periodic window is empty: no closed form".into()
                },
            }),
        },
    }
}

fn tasks(exp: &ExperimentConfig) -> Vec<(f64, PolicyKind)> {
    let policies = exp.sorted_policies();
    exp.inv_fmax_values
        .iter()
        .flat_map(|&f| policies.iter().map(move |&p| (f, p)))
        .collect()
}

/// Optimizes every requested policy at every rate bound. Rows are ordered by
/// `(inv_fmax, policy)`.
pub fn cmd_solve(exp: &ExperimentConfig) -> Result<Vec<SolveRow>, CliError> {
    tasks(exp)
        .par_iter()
        .map(|&(f, p)| solve_point(&exp.system_at(f)?, p, exp))
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRow {
    pub inv_fmax: f64,
    pub policy: PolicyKind,
    pub k: Option<f64>,
    pub beta: Option<f64>,
    pub aoi_closed: Option<f64>,
    pub aoi_sim: Option<f64>,
    pub aoi_ci95: Option<f64>,
    pub rate_lhs: Option<f64>,
    pub rate_rhs: f64,
    pub feasible: bool,
}

/// [`cmd_solve`] plus, when `sim` is given, a simulation of each row's
/// policy. Every row is simulated with the same seed.
pub fn cmd_sweep(exp: &ExperimentConfig, sim: Option<&SimConfig>) -> Result<Vec<SweepRow>, CliError> {
    tasks(exp)
        .par_iter()
        .map(|&(f, p)| {
            let cfg = exp.system_at(f)?;
            let row = solve_point(&cfg, p, exp)?;
            let stats = match (sim, row.policy_spec()) {
                (Some(s), Some(spec)) => Some(simulate(&cfg, &spec, s)?),
                _ => None,
            };
            Ok(SweepRow {
                inv_fmax: row.inv_fmax,
                policy: row.policy,
                k: row.k,
                beta: row.beta,
                aoi_closed: row.aoi,
                aoi_sim: stats.as_ref().map(|s| s.avg_aoi),
                aoi_ci95: stats.as_ref().map(|s| s.aoi_ci95),
                rate_lhs: row.rate_lhs,
                rate_rhs: row.rate_rhs,
                feasible: row.feasible,
            })
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LandscapeRow {
    pub k: f64,
    /// Empty where state 2 is never visited.
    pub beta: Option<f64>,
    /// Empty where no threshold meets the rate bound.
    pub aoi: Option<f64>,
}

/// Evenly spaced `K` values from `k_min` to `k_max`.
pub fn linspace(k_min: f64, k_max: f64, points: usize) -> Vec<f64> {
    if points == 1 {
        return vec![k_min];
    }
    let step = (k_max - k_min) / (points - 1) as f64;
    (0..points)
        .map(|i| if i + 1 == points { k_max } else { k_min + step * i as f64 })
        .collect()
}

/// Default `K` range of the landscape: from `inf Y` (or a small positive
/// value when `inf Y = 0`) to the optimizer's `k0`.
pub fn default_k_range(cfg: &SystemConfig, opt: &OptimizerConfig) -> Result<(f64, f64), CliError> {
    use aoi_core::DelayDistribution;
    let r = opt.resolve(cfg)?;
    let inf_y = cfg.y.support_bounds().0;
    let lo = if inf_y > 0.0 { inf_y } else { 1e-3 * r.k0 };
    Ok((lo, r.k0))
}

/// Optimal AoI at each `K` of an evenly spaced grid.
pub fn cmd_landscape(
    exp: &ExperimentConfig,
    inv_fmax: f64,
    k_min: f64,
    k_max: f64,
    points: usize,
) -> Result<Vec<LandscapeRow>, CliError> {
    if !(k_min > 0.0 && k_min.is_finite()) {
        return Err(CliError::Config(format!("--k-min must be positive, got {k_min}")));
    }
    if !(k_max >= k_min && k_max.is_finite()) {
        return Err(CliError::Config(format!("--k-max must be at least --k-min, got {k_max}")));
    }
    if points < 1 {
        return Err(CliError::Config("--points must be at least 1".into()));
    }
    let cfg = exp.system_at(inv_fmax)?;
    let ks = linspace(k_min, k_max, points);
    Ok(k_landscape(&cfg, &exp.optimizer, &ks)?
        .into_iter()
        .map(|p| LandscapeRow {
            k: p.k,
            beta: p.beta,
            aoi: p.aoi.is_finite().then_some(p.aoi),
        })
        .collect())
}

/// Parameters of `simulate`; unset policy parameters are optimized.
#[derive(Debug, Clone, PartialEq)]
pub struct SimulateRequest {
    pub policy: PolicyKind,
    pub k: Option<f64>,
    pub beta: Option<f64>,
    pub period: Option<f64>,
    pub inv_fmax: f64,
    pub sim: SimConfig,
    pub trace: Option<PathBuf>,
}

/// Fills in unset parameters of the requested policy.
pub fn resolve_policy(exp: &ExperimentConfig, req: &SimulateRequest) -> Result<PolicySpec, CliError> {
    let cfg = exp.system_at(req.inv_fmax)?;
    let spec = match req.policy {
        PolicyKind::Early => match (req.k, req.beta) {
            (Some(k), Some(beta)) => PolicySpec::EarlySampling { k, beta },
            (Some(k), None) => {
                let p = optimal_at_k(&cfg, k, &exp.optimizer.resolve(&cfg)?)?;
                PolicySpec::EarlySampling {
                    k,
                    beta: p.beta.unwrap_or(0.0),
                }
            }
            (None, _) => {
                let row = solve_point(&cfg, PolicyKind::Early, exp)?;
                let k = row.k.ok_or_else(|| CliError::Config(format!("no feasible early policy: {}", row.note)))?;
                PolicySpec::EarlySampling {
                    k,
                    beta: req.beta.or(row.beta).unwrap_or(0.0),
                }
            }
        },
        PolicyKind::WaitAck => match req.beta {
            Some(beta) => PolicySpec::WaitForAck { beta },
            None => wait_for_ack_report(&cfg, &exp.optimizer)?.policy,
        },
        PolicyKind::Periodic => match req.period {
            Some(period) => PolicySpec::PeriodicPreempt { period },
            None => {
                let b = periodic_baseline(&cfg, exp.optimizer.window_offset_frac).ok_or_else(|| {
                    CliError::Config("no period given and none can be derived without a rate bound".into())
                })?;
                PolicySpec::PeriodicPreempt { period: b.period }
            }
        },
    };
    spec.validate()?;
    Ok(spec)
}

/// Simulates one policy, writing the event trace when requested.
pub fn cmd_simulate(exp: &ExperimentConfig, req: &SimulateRequest) -> Result<(PolicySpec, SimStats), CliError> {
    let spec = resolve_policy(exp, req)?;
    let cfg = exp.system_at(req.inv_fmax)?;
    let stats = match &req.trace {
        None => simulate(&cfg, &spec, &req.sim)?,
        Some(path) => {
            let file = File::create(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
            let mut w = CsvTraceWriter::new(BufWriter::new(file))?;
            let stats = simulate_traced(&cfg, &spec, &req.sim, &mut w)?;
            w.into_inner().flush()?;
            stats
        }
    };
    Ok((spec, stats))
}

/// Writes `rows` as CSV with a header row.
pub fn write_csv<T: Serialize, W: Write>(rows: &[T], out: W) -> Result<(), CliError> {
    let mut w = csv::Writer::from_writer(out);
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

/// Writes CSV to `path`, or to stdout when `path` is `None`.
pub fn emit_csv<T: Serialize>(rows: &[T], path: Option<&Path>) -> Result<(), CliError> {
    match path {
        Some(p) => {
            let f = File::create(p).map_err(|e| CliError::Io(format!("{}: {e}", p.display())))?;
            write_csv(rows, BufWriter::new(f))
        }
        None => write_csv(rows, io::stdout().lock()),
    }
}

/// A gnuplot script plotting closed-form and simulated AoI against
/// `1/f_max` for each policy in a sweep CSV.
pub fn gnuplot_script(csv_path: &Path, policies: &[PolicyKind]) -> String {
    let csv = csv_path.display();
    let mut s = String::from(
        "set datafile separator ','\nset key top left\nset xlabel '1/f_max'\nset ylabel 'average AoI'\n",
    );
    let mut curves = Vec::new();
    for p in policies {
        let filter = format!("'< grep \",{p},\" {csv}'");
        curves.push(format!("{filter} using 1:5 with linespoints title '{p}'"));
        curves.push(format!("{filter} using 1:6:7 with yerrorbars title '{p} (sim)'"));
    }
    s.push_str("plot ");
    s.push_str(&curves.join(", \\\n     "));
    s.push('\n');
    s
}
