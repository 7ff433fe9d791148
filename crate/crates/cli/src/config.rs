//! Experiment configuration files (TOML).
//!
//! ```toml
//! schema_version = 1
//! inv_fmax_values = [2.0, 4.0, 8.0]
//! policies = ["early", "wait_ack", "periodic"]
//! search_mode = "grid"          # or "descent"
//!
//! [system.y]
//! kind = "shifted_exponential"
//! shift = 10.0
//! rate = 1.0
//!
//! [system.x]
//! kind = "uniform"
//! lo = 0.0
//! hi = 10.0
//!
//! [optimizer]                   # optional, every key optional
//! k_grid_points = 400
//!
//! [simulator]                   # optional; without it nothing is simulated
//! cycles = 100000
//! seed = 1
//!
//! [outputs]                     # optional
//! csv_path = "sweep.csv"
//! trace_path = "trace.csv"
//! gnuplot_path = "sweep.gp"
//! ```

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use aoi_core::optimizer::{OptimizerConfig, SearchMode};
use aoi_core::{DelayModel, SimConfig, SystemConfig};
use serde::{Deserialize, Serialize};

use crate::error::CliError;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PolicyKind {
    Early,
    WaitAck,
    Periodic,
}

impl PolicyKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            PolicyKind::Early => "early",
            PolicyKind::WaitAck => "wait_ack",
            PolicyKind::Periodic => "periodic",
        }
    }
}

impl fmt::Display for PolicyKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for PolicyKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "early" => Ok(PolicyKind::Early),
            "wait_ack" => Ok(PolicyKind::WaitAck),
            "periodic" => Ok(PolicyKind::Periodic),
            other => Err(format!("unknown policy {other:?}; expected early, wait_ack or periodic")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SystemSection {
    pub y: DelayModel,
    pub x: DelayModel,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Outputs {
    pub csv_path: Option<PathBuf>,
    pub trace_path: Option<PathBuf>,
    pub gnuplot_path: Option<PathBuf>,
}

fn default_search_mode() -> SearchMode {
    SearchMode::Grid
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub schema_version: u32,
    pub system: SystemSection,
    pub inv_fmax_values: Vec<f64>,
    pub policies: Vec<PolicyKind>,
    #[serde(default = "default_search_mode")]
    pub search_mode: SearchMode,
    #[serde(default)]
    pub optimizer: OptimizerConfig,
    pub simulator: Option<SimConfig>,
    #[serde(default)]
    pub outputs: Outputs,
}

fn config_err(msg: impl Into<String>) -> CliError {
    CliError::Config(msg.into())
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self, CliError> {
        let cfg: ExperimentConfig = toml::from_str(text).map_err(|e| config_err(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| config_err(format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml(&text).map_err(|e| match e {
            CliError::Config(m) => config_err(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    pub fn validate(&self) -> Result<(), CliError> {
        if self.schema_version != SCHEMA_VERSION {
            return Err(config_err(format!(
                "schema_version: expected {SCHEMA_VERSION}, got {}",
                self.schema_version
            )));
        }
        self.system_at(0.0).map_err(|e| config_err(format!("system: {e}")))?;
        if self.inv_fmax_values.is_empty() {
            return Err(config_err("inv_fmax_values: must not be empty"));
        }
        for (i, v) in self.inv_fmax_values.iter().enumerate() {
            if !(v.is_finite() && *v >= 0.0) {
                return Err(config_err(format!("inv_fmax_values[{i}]: must be finite and >= 0, got {v}")));
            }
        }
        if let Some(i) = self.inv_fmax_values.windows(2).position(|w| !(w[1] > w[0])) {
            return Err(config_err(format!(
                "inv_fmax_values[{}]: values must be strictly increasing",
                i + 1
            )));
        }
        if self.policies.is_empty() {
            return Err(config_err("policies: must list at least one policy"));
        }
        let mut seen = self.policies.clone();
        seen.sort();
        seen.dedup();
        if seen.len() != self.policies.len() {
            return Err(config_err("policies: duplicate entry"));
        }
        self.optimizer
            .validate()
            .map_err(|e| config_err(format!("optimizer: {e}")))?;
        if let Some(sim) = &self.simulator {
            sim.validate().map_err(|e| config_err(format!("simulator: {e}")))?;
        }
        for (name, p) in [
            ("outputs.csv_path", &self.outputs.csv_path),
            ("outputs.trace_path", &self.outputs.trace_path),
            ("outputs.gnuplot_path", &self.outputs.gnuplot_path),
        ] {
            if let Some(p) = p {
                check_writable(name, p)?;
            }
        }
        Ok(())
    }

    pub fn system_at(&self, inv_fmax: f64) -> aoi_core::Result<SystemConfig> {
        SystemConfig::new(self.system.y, self.system.x, inv_fmax)
    }

    /// Policies in output order.
    pub fn sorted_policies(&self) -> Vec<PolicyKind> {
        let mut p = self.policies.clone();
        p.sort();
        p
    }
}

/// Fails when the parent directory of `path` does not exist.
pub fn check_writable(name: &str, path: &Path) -> Result<(), CliError> {
    let parent = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    if !parent.is_dir() {
        return Err(config_err(format!(
            "{name}: directory {} does not exist",
            parent.display()
        )));
    }
    if path.is_dir() {
        return Err(config_err(format!("{name}: {} is a directory", path.display())));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    const BASE: &str = r#"
schema_version = 1
inv_fmax_values = [2.0, 4.0]
policies = ["wait_ack", "early"]

[system.y]
kind = "constant"
c = 10.0

[system.x]
kind = "uniform"
lo = 0.0
hi = 10.0
"#;

    #[test]
    fn parses_minimal_config() {
        let c = ExperimentConfig::from_toml(BASE).unwrap();
        assert_eq!(c.sorted_policies(), vec![PolicyKind::Early, PolicyKind::WaitAck]);
        assert_eq!(c.search_mode, SearchMode::Grid);
        assert!(c.simulator.is_none());
        assert_eq!(c.optimizer, OptimizerConfig::default());
    }

    fn err(text: &str) -> String {
        match ExperimentConfig::from_toml(text) {
            Err(CliError::Config(m)) => m,
            other => panic!("expected config error, got {other:?}"),
        }
    }

    #[test]
    fn schema_version_is_required() {
        let m = err(&BASE.replace("schema_version = 1\n", ""));
        assert!(m.contains("schema_version"), "{m}");
        let m = err(&BASE.replace("schema_version = 1", "schema_version = 2"));
        assert!(m.contains("schema_version"), "{m}");
    }

    #[test]
    fn rejects_non_increasing_grid() {
        let m = err(&BASE.replace("[2.0, 4.0]", "[2.0, 2.0]"));
        assert!(m.contains("inv_fmax_values[1]"), "{m}");
        let m = err(&BASE.replace("[2.0, 4.0]", "[]"));
        assert!(m.contains("inv_fmax_values"), "{m}");
    }

    #[test]
    fn rejects_unknown_keys_with_location() {
        let m = err(&BASE.replace("c = 10.0", "c = 10.0\nscale = 2"));
        assert!(m.contains("line"), "{m}");
        let m = err(&BASE.replace("\"early\"", "\"eager\""));
        assert!(m.contains("eager"), "{m}");
    }

    #[test]
    fn rejects_ack_slower_than_service() {
        let m = err(&BASE.replace("hi = 10.0", "hi = 12.0"));
        assert!(m.starts_with("system:"), "{m}");
    }

    #[test]
    fn rejects_missing_output_directory() {
        let m = err(&format!("{BASE}\n[outputs]\ncsv_path = \"/no/such/dir/out.csv\"\n"));
        assert!(m.contains("outputs.csv_path"), "{m}");
    }

    #[test]
    fn simulator_section() {
        let c = ExperimentConfig::from_toml(&format!("{BASE}\n[simulator]\ncycles = 500\nseed = 9\n")).unwrap();
        let s = c.simulator.unwrap();
        assert_eq!((s.cycles, s.seed, s.warmup()), (500, 9, 100));
        let m = err(&format!("{BASE}\n[simulator]\ncycles = 0\n"));
        assert!(m.starts_with("simulator:"), "{m}");
    }
}
