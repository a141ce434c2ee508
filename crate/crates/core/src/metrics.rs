//! Per-step observables and the infection bookkeeping behind them.

use serde::{Deserialize, Serialize};

/// Which agents emit tainted messages at the current step.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct InfectionState {
    /// Spreaders by scenario decree at the current step.
    pub sources: Vec<bool>,
    /// Agents that accepted at least one tainted message on the previous step.
    pub processing_infected: Vec<bool>,
}

impl InfectionState {
    pub fn new(n: usize) -> Self {
        InfectionState {
            sources: vec![false; n],
            processing_infected: vec![false; n],
        }
    }

    #[inline]
    pub fn emitting(&self, j: usize) -> bool {
        self.sources[j] || self.processing_infected[j]
    }

    pub fn emitting_count(&self) -> usize {
        (0..self.sources.len()).filter(|&j| self.emitting(j)).count()
    }
}

/// Counters for one synchronous step.
///
/// `checked` messages end up either accepted (clean) or refused (tainted), so
/// `accepted + refused` always equals N·K.
#[allow(non_snake_case)]
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct StepMetrics {
    pub t: u64,
    /// Database checks.
    pub C: u64,
    /// Agents emitting tainted messages.
    pub I: u64,
    /// Tainted accepted plus clean refused.
    pub E: u64,
    pub accepted: u64,
    pub refused: u64,
    pub checked: u64,
    pub e_false_accept: u64,
    pub e_false_reject: u64,
}

impl StepMetrics {
    pub fn c_frac(&self, messages: usize) -> f64 {
        self.C as f64 / messages as f64
    }

    pub fn i_frac(&self, n: usize) -> f64 {
        self.I as f64 / n as f64
    }

    pub fn e_frac(&self, messages: usize) -> f64 {
        self.E as f64 / messages as f64
    }
}
