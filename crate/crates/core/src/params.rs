//! Model parameters and infection-source scenarios.

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Raw, unchecked model parameters. Field names follow the config schema.
#[allow(non_snake_case)]
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    /// Number of agents.
    pub N: usize,
    /// Messages received by each agent per step.
    pub K: usize,
    /// Trust increment applied after a database check.
    pub v_alpha: f64,
    /// Trust oblivion rate per step.
    pub r_alpha: f64,
    /// Risk baseline, also the unit of risk increments.
    pub v_A: f64,
    /// Risk oblivion rate per step.
    pub r_A: f64,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ParamError {
    #[error("parameter `{field}` = {value} out of range: {expected}")]
    Range {
        field: &'static str,
        value: f64,
        expected: &'static str,
    },
    #[error("K = {k} exceeds population N = {n}")]
    ConnectivityExceedsPopulation { k: usize, n: usize },
}

fn open_unit(field: &'static str, value: f64) -> Result<(), ParamError> {
    if value > 0.0 && value < 1.0 {
        Ok(())
    } else {
        Err(ParamError::Range {
            field,
            value,
            expected: "0 < x < 1",
        })
    }
}

fn half_open_unit(field: &'static str, value: f64) -> Result<(), ParamError> {
    if value > 0.0 && value <= 1.0 {
        Ok(())
    } else {
        Err(ParamError::Range {
            field,
            value,
            expected: "0 < x <= 1",
        })
    }
}

impl ModelParams {
    pub fn validate(self) -> Result<ValidatedParams, ParamError> {
        if self.N < 1 {
            return Err(ParamError::Range {
                field: "N",
                value: self.N as f64,
                expected: "N >= 1",
            });
        }
        if self.K < 1 {
            return Err(ParamError::Range {
                field: "K",
                value: self.K as f64,
                expected: "K >= 1",
            });
        }
        if self.K > self.N {
            return Err(ParamError::ConnectivityExceedsPopulation {
                k: self.K,
                n: self.N,
            });
        }
        half_open_unit("v_alpha", self.v_alpha)?;
        open_unit("r_alpha", self.r_alpha)?;
        half_open_unit("v_A", self.v_A)?;
        open_unit("r_A", self.r_A)?;
        Ok(ValidatedParams(self))
    }
}

/// Parameters that passed [`ModelParams::validate`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ValidatedParams(ModelParams);

impl ValidatedParams {
    pub fn raw(&self) -> &ModelParams {
        &self.0
    }

    pub fn n(&self) -> usize {
        self.0.N
    }

    pub fn k(&self) -> usize {
        self.0.K
    }

    pub fn v_alpha(&self) -> f64 {
        self.0.v_alpha
    }

    pub fn r_alpha(&self) -> f64 {
        self.0.r_alpha
    }

    pub fn v_a(&self) -> f64 {
        self.0.v_A
    }

    pub fn r_a(&self) -> f64 {
        self.0.r_A
    }

    /// Mean-field interaction probability per ordered pair per step, K/N.
    pub fn a(&self) -> f64 {
        self.0.K as f64 / self.0.N as f64
    }

    /// Messages exchanged per step, N·K.
    pub fn messages_per_step(&self) -> usize {
        self.0.N * self.0.K
    }
}

/// Schedule of agents that emit tainted messages by decree.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "variant", rename_all = "lowercase")]
pub enum ScenarioSpec {
    None,
    /// A fixed set of `round(p·N)` agents, drawn once at t = 0.
    Quenched { p: f64 },
    /// `round(p·N)` agents resampled every step.
    Annealed { p: f64 },
    /// `round(p·N)` agents resampled every step for `t_start <= t < t_start + duration`.
    Pulse { p: f64, t_start: u64, duration: u64 },
}

impl Default for ScenarioSpec {
    fn default() -> Self {
        ScenarioSpec::None
    }
}

impl ScenarioSpec {
    pub fn validate(&self) -> Result<(), ParamError> {
        let p = self.fraction();
        if !(0.0..=1.0).contains(&p) {
            return Err(ParamError::Range {
                field: "p",
                value: p,
                expected: "0 <= p <= 1",
            });
        }
        if let ScenarioSpec::Pulse { duration, .. } = self {
            if *duration < 1 {
                return Err(ParamError::Range {
                    field: "duration",
                    value: *duration as f64,
                    expected: "duration >= 1",
                });
            }
        }
        Ok(())
    }

    pub fn fraction(&self) -> f64 {
        match *self {
            ScenarioSpec::None => 0.0,
            ScenarioSpec::Quenched { p }
            | ScenarioSpec::Annealed { p }
            | ScenarioSpec::Pulse { p, .. } => p,
        }
    }

    /// Number of spreaders while the scenario is active.
    pub fn spreader_count(&self, n: usize) -> usize {
        ((self.fraction() * n as f64).round() as usize).min(n)
    }

    /// First step after the pulse window, if this is a pulse.
    pub fn pulse_end(&self) -> Option<u64> {
        match *self {
            ScenarioSpec::Pulse {
                t_start, duration, ..
            } => Some(t_start + duration),
            _ => None,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn base() -> ModelParams {
        ModelParams {
            N: 500,
            K: 5,
            v_alpha: 0.01,
            r_alpha: 0.005,
            v_A: 0.01,
            r_A: 0.005,
        }
    }

    #[test]
    fn fig2_params_give_a_one_percent() {
        let p = base().validate().unwrap();
        assert_eq!(p.a(), 0.01);
        assert_eq!(p.messages_per_step(), 2500);
    }

    #[test]
    fn k_equal_n_is_allowed() {
        let p = ModelParams { K: 500, ..base() }.validate().unwrap();
        assert_eq!(p.a(), 1.0);
    }

    #[test]
    fn zero_oblivion_rejected() {
        let err = ModelParams {
            r_alpha: 0.0,
            ..base()
        }
        .validate()
        .unwrap_err();
        assert!(matches!(err, ParamError::Range { field: "r_alpha", .. }));
    }

    #[test]
    fn range_errors_name_the_field() {
        let cases: [(ModelParams, &str); 6] = [
            (ModelParams { N: 0, ..base() }, "N"),
            (ModelParams { K: 0, ..base() }, "K"),
            (ModelParams { v_alpha: 1.5, ..base() }, "v_alpha"),
            (ModelParams { v_A: 0.0, ..base() }, "v_A"),
            (ModelParams { r_A: 1.0, ..base() }, "r_A"),
            (ModelParams { r_alpha: -0.1, ..base() }, "r_alpha"),
        ];
        for (params, name) in cases {
            match params.validate() {
                Err(ParamError::Range { field, .. }) => assert_eq!(field, name),
                other => panic!("expected range error on {name}, got {other:?}"),
            }
        }
    }

    #[test]
    fn k_above_n_rejected() {
        let err = ModelParams { K: 501, ..base() }.validate().unwrap_err();
        assert_eq!(err, ParamError::ConnectivityExceedsPopulation { k: 501, n: 500 });
    }

    #[test]
    fn spreader_count_rounds() {
        assert_eq!(ScenarioSpec::Quenched { p: 0.01 }.spreader_count(500), 5);
        assert_eq!(ScenarioSpec::Annealed { p: 1e-6 }.spreader_count(500), 0);
        assert_eq!(ScenarioSpec::None.spreader_count(500), 0);
        let pulse = ScenarioSpec::Pulse {
            p: 1.0,
            t_start: 500,
            duration: 20,
        };
        assert_eq!(pulse.spreader_count(500), 500);
        assert_eq!(pulse.pulse_end(), Some(520));
    }

    #[test]
    fn scenario_validation() {
        assert!(ScenarioSpec::Annealed { p: 1.2 }.validate().is_err());
        assert!(ScenarioSpec::Pulse {
            p: 0.5,
            t_start: 0,
            duration: 0
        }
        .validate()
        .is_err());
        assert!(ScenarioSpec::Quenched { p: 0.0 }.validate().is_ok());
    }
}
