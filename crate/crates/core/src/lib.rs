//! Discrete-time simulator of autonomous agents that exchange possibly
//! tainted messages and decide, per message, whether to trust the sender,
//! distrust it, or pay for a check against a central database.
//!
//! Trust in each partner is a decaying memory of past checks; the check
//! threshold is a decaying perception of how much infection is around. The
//! crate also carries a mean-field model of the trust distribution and the
//! tools used to compare simulation output against it.

pub mod analysis;
pub mod engine;
pub mod meanfield;
pub mod metrics;
pub mod params;
pub mod risk;
pub mod trust;

pub use engine::{run, Decision, NullRecorder, Recorder, RunError, RunOptions, SimState, SnapshotMode};
pub use metrics::{InfectionState, StepMetrics};
pub use params::{ModelParams, ParamError, ScenarioSpec, ValidatedParams};
pub use risk::RiskState;
pub use trust::{AgentId, DecayMode, Layout, Step, TrustStore};
