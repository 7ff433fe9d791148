//! Sampling for minimum Age of Information over a channel whose ACKs arrive
//! with a random delay: delay models, the closed-form objective and its
//! optimizer, and a discrete-event simulator.

pub mod delay;
pub mod error;
pub mod optimizer;
pub mod policy;
pub mod presets;
pub mod quadrature;
pub mod sim;
pub mod trace;

pub use delay::{DelayDistribution, DelayModel, SystemConfig};
pub use error::{Error, Result};
pub use optimizer::{OptimizerConfig, PolicyReport, SearchMode, SearchResult};
pub use policy::PolicySpec;
pub use sim::{simulate, simulate_traced, validate_against_closed_form, SimConfig, SimStats};
