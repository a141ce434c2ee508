//! Per-agent perceived risk.
//!
//! The exposed threshold is `min(1, v_A + excess)`. Only the excess decays,
//! so an agent that never finds an infected sender sits exactly at `v_A`.

#[derive(Debug, Clone, PartialEq)]
pub struct RiskState {
    excess: Vec<f64>,
    baseline: f64,
}

impl RiskState {
    pub fn new(n: usize, v_a: f64) -> Self {
        RiskState {
            excess: vec![0.0; n],
            baseline: v_a,
        }
    }

    pub fn baseline(&self) -> f64 {
        self.baseline
    }

    pub fn excess(&self, i: usize) -> f64 {
        self.excess[i]
    }

    /// Threshold A_i compared against |alpha|.
    #[inline]
    pub fn threshold(&self, i: usize) -> f64 {
        exposed(self.baseline, self.excess[i])
    }

    pub fn set_excess(&mut self, i: usize, value: f64) {
        debug_assert!(value >= 0.0);
        self.excess[i] = value;
    }

    pub fn thresholds(&self) -> impl Iterator<Item = f64> + '_ {
        self.excess.iter().map(|&e| exposed(self.baseline, e))
    }
}

#[inline]
pub(crate) fn exposed(baseline: f64, excess: f64) -> f64 {
    (baseline + excess).min(1.0)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fresh_state_sits_at_baseline() {
        let r = RiskState::new(10, 0.01);
        assert!(r.thresholds().all(|a| a == 0.01));
    }

    #[test]
    fn threshold_is_capped_at_one() {
        let mut r = RiskState::new(1, 0.5);
        r.set_excess(0, 0.8);
        assert_eq!(r.threshold(0), 1.0);
    }
}
