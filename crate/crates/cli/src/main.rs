use std::path::{Path, PathBuf};
use std::process::ExitCode;

use aoi_cli::commands::{
    cmd_landscape, cmd_simulate, cmd_solve, cmd_sweep, default_k_range, emit_csv, gnuplot_script,
    SimulateRequest,
};
use aoi_cli::{CliError, ExperimentConfig, PolicyKind};
use aoi_core::SimConfig;
use clap::{Args, Parser, Subcommand};

/// Age-of-information sampling policies under delayed ACKs.
#[derive(Parser)]
#[command(name = "aoi", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Experiment configuration (TOML).
    #[arg(long, value_name = "PATH")]
    config: PathBuf,
    /// Output CSV; overrides `outputs.csv_path`. Defaults to stdout.
    #[arg(long, value_name = "PATH")]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct SimOverrides {
    /// Simulation seed; overrides `simulator.seed`.
    #[arg(long)]
    seed: Option<u64>,
    /// Simulated cycles; overrides `simulator.cycles`.
    #[arg(long)]
    cycles: Option<u64>,
}

#[derive(Subcommand)]
enum Command {
    /// Optimize each policy at each rate bound.
    Solve {
        #[command(flatten)]
        common: Common,
    },
    /// Optimize and simulate each policy at each rate bound.
    Sweep {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        sim: SimOverrides,
        /// Skip simulation even if the config has a `[simulator]` section.
        #[arg(long)]
        no_sim: bool,
    },
    /// Optimal AoI as a function of the state-1 period K.
    Landscape {
        #[command(flatten)]
        common: Common,
        /// Rate bound 1/f_max; defaults to the first configured value.
        #[arg(long)]
        inv_fmax: Option<f64>,
        #[arg(long)]
        k_min: Option<f64>,
        #[arg(long)]
        k_max: Option<f64>,
        #[arg(long, default_value_t = 200)]
        points: usize,
    },
    /// Simulate one policy and print its statistics.
    Simulate {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        sim: SimOverrides,
        #[arg(long, value_name = "NAME")]
        policy: PolicyKind,
        #[arg(long)]
        k: Option<f64>,
        #[arg(long)]
        beta: Option<f64>,
        #[arg(long)]
        period: Option<f64>,
        /// Rate bound 1/f_max; defaults to the first configured value.
        #[arg(long)]
        inv_fmax: Option<f64>,
        /// Event trace output; overrides `outputs.trace_path`.
        #[arg(long, value_name = "PATH")]
        trace: Option<PathBuf>,
    },
}

fn sim_config(base: Option<SimConfig>, o: &SimOverrides) -> Option<SimConfig> {
    if base.is_none() && o.seed.is_none() && o.cycles.is_none() {
        return None;
    }
    let mut s = base.unwrap_or_default();
    if let Some(seed) = o.seed {
        s.seed = seed;
    }
    if let Some(c) = o.cycles {
        s.cycles = c;
    }
    Some(s)
}

fn out_path<'a>(common: &'a Common, exp: &'a ExperimentConfig) -> Option<&'a Path> {
    common.out.as_deref().or(exp.outputs.csv_path.as_deref())
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Solve { common } => {
            let exp = ExperimentConfig::load(&common.config)?;
            let rows = cmd_solve(&exp)?;
            emit_csv(&rows, out_path(&common, &exp))
        }
        Command::Sweep { common, sim, no_sim } => {
            let exp = ExperimentConfig::load(&common.config)?;
            let s = if no_sim { None } else { sim_config(exp.simulator, &sim) };
            if let Some(s) = &s {
                s.validate()?;
            }
            let rows = cmd_sweep(&exp, s.as_ref())?;
            let out = out_path(&common, &exp);
            emit_csv(&rows, out)?;
            if let (Some(gp), Some(csv)) = (&exp.outputs.gnuplot_path, out) {
                std::fs::write(gp, gnuplot_script(csv, &exp.sorted_policies()))?;
            }
            Ok(())
        }
        Command::Landscape {
            common,
            inv_fmax,
            k_min,
            k_max,
            points,
        } => {
            let exp = ExperimentConfig::load(&common.config)?;
            let f = inv_fmax.unwrap_or(exp.inv_fmax_values[0]);
            let (lo, hi) = default_k_range(&exp.system_at(f)?, &exp.optimizer)?;
            let rows = cmd_landscape(&exp, f, k_min.unwrap_or(lo), k_max.unwrap_or(hi), points)?;
            emit_csv(&rows, out_path(&common, &exp))
        }
        Command::Simulate {
            common,
            sim,
            policy,
            k,
            beta,
            period,
            inv_fmax,
            trace,
        } => {
            let exp = ExperimentConfig::load(&common.config)?;
            let req = SimulateRequest {
                policy,
                k,
                beta,
                period,
                inv_fmax: inv_fmax.unwrap_or(exp.inv_fmax_values[0]),
                sim: sim_config(exp.simulator, &sim).unwrap_or_default(),
                trace: trace.or_else(|| exp.outputs.trace_path.clone()),
            };
            let (spec, stats) = cmd_simulate(&exp, &req)?;
            let text = toml::to_string(&Report { policy: spec, stats })
                .map_err(|e| CliError::Io(e.to_string()))?;
            match &common.out {
                Some(p) => std::fs::write(p, text)?,
                None => print!("{text}"),
            }
            Ok(())
        }
    }
}

#[derive(serde::Serialize)]
struct Report {
    policy: aoi_core::PolicySpec,
    stats: aoi_core::SimStats,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("aoi: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
