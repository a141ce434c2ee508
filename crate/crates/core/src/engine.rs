//! Synchronous step update.
//!
//! Every step reads trust, risk and infection as they stood at time `t` and
//! buffers all writes, which land at `t + 1`. The result therefore does not
//! depend on the order in which receivers are visited.

use std::io;

use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::metrics::{InfectionState, StepMetrics};
use crate::params::{ScenarioSpec, ValidatedParams};
use crate::risk::{exposed, RiskState};
use crate::trust::{AgentId, DecayMode, Step, TrustRecord, TrustStore};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Decision {
    AcceptTrust,
    RefuseDistrust,
    Check,
}

/// Trust the sender when `|alpha|` strictly exceeds the risk threshold, check otherwise.
#[inline]
pub fn decide(alpha: f64, threshold: f64) -> Decision {
    if alpha.abs() > threshold {
        if alpha > 0.0 {
            Decision::AcceptTrust
        } else {
            Decision::RefuseDistrust
        }
    } else {
        Decision::Check
    }
}

/// New trust after a check: increment by ±v_alpha, then one step of oblivion.
#[inline]
pub fn apply_check_update(alpha: f64, sender_clean: bool, params: &ValidatedParams) -> f64 {
    let step = if sender_clean {
        params.v_alpha()
    } else {
        -params.v_alpha()
    };
    ((1.0 - params.r_alpha()) * (alpha + step)).clamp(-1.0, 1.0)
}

/// New risk excess after a step with `checks` database queries of which
/// `infected_found` revealed a tainted sender.
#[inline]
pub fn update_risk(excess: f64, infected_found: u32, checks: u32, params: &ValidatedParams) -> f64 {
    debug_assert!(infected_found <= checks);
    let bump = if checks > 0 {
        params.v_a() * f64::from(infected_found) / f64::from(checks)
    } else {
        0.0
    };
    (1.0 - params.r_a()) * (excess + bump)
}

/// Agents emitting tainted messages by scenario decree at step `t`.
///
/// `quenched` is the set drawn at initialization; it is only consulted for
/// the quenched variant.
pub fn spreaders_at<R: Rng + ?Sized>(
    scenario: &ScenarioSpec,
    t: Step,
    n: usize,
    quenched: &[AgentId],
    rng: &mut R,
) -> Vec<AgentId> {
    match *scenario {
        ScenarioSpec::None => Vec::new(),
        ScenarioSpec::Quenched { .. } => quenched.to_vec(),
        ScenarioSpec::Annealed { .. } => sample_agents(rng, n, scenario.spreader_count(n)),
        ScenarioSpec::Pulse {
            t_start, duration, ..
        } => {
            if t >= t_start && t < t_start + duration {
                sample_agents(rng, n, scenario.spreader_count(n))
            } else {
                Vec::new()
            }
        }
    }
}

fn sample_agents<R: Rng + ?Sized>(rng: &mut R, n: usize, count: usize) -> Vec<AgentId> {
    if count == 0 {
        return Vec::new();
    }
    if count == n {
        return (0..n as AgentId).collect();
    }
    let mut ids: Vec<AgentId> = index::sample(rng, n, count)
        .into_iter()
        .map(|i| i as AgentId)
        .collect();
    ids.sort_unstable();
    ids
}

/// K senders per receiver, drawn uniformly with replacement (self allowed).
/// Receiver `i` owns slots `i*K .. (i+1)*K`.
pub fn draw_senders<R: Rng + ?Sized>(n: usize, k: usize, rng: &mut R) -> Vec<AgentId> {
    (0..n * k).map(|_| rng.gen_range(0..n) as AgentId).collect()
}

/// Which pairs a trust histogram is built from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SnapshotMode {
    /// Only pairs that have been checked at least once.
    #[default]
    TouchedPairs,
    /// All N² ordered pairs, untouched ones contributing alpha = 0.
    AllPairs,
}

#[derive(Debug, Clone)]
pub struct SimState {
    t: Step,
    params: ValidatedParams,
    scenario: ScenarioSpec,
    trust: TrustStore,
    risk: RiskState,
    infection: InfectionState,
    quenched: Vec<AgentId>,
    rng: ChaCha8Rng,
}

impl SimState {
    pub fn new(params: ValidatedParams, scenario: ScenarioSpec, seed: u64) -> Self {
        Self::with_mode(params, scenario, seed, DecayMode::Lazy)
    }

    pub fn with_mode(
        params: ValidatedParams,
        scenario: ScenarioSpec,
        seed: u64,
        mode: DecayMode,
    ) -> Self {
        let n = params.n();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let quenched = match scenario {
            ScenarioSpec::Quenched { .. } => {
                sample_agents(&mut rng, n, scenario.spreader_count(n))
            }
            _ => Vec::new(),
        };
        SimState {
            t: 0,
            trust: TrustStore::new(n, params.r_alpha(), mode),
            risk: RiskState::new(n, params.v_a()),
            infection: InfectionState::new(n),
            params,
            scenario,
            quenched,
            rng,
        }
    }

    pub fn t(&self) -> Step {
        self.t
    }

    pub fn params(&self) -> &ValidatedParams {
        &self.params
    }

    pub fn scenario(&self) -> &ScenarioSpec {
        &self.scenario
    }

    pub fn trust(&self) -> &TrustStore {
        &self.trust
    }

    pub fn risk(&self) -> &RiskState {
        &self.risk
    }

    pub fn infection(&self) -> &InfectionState {
        &self.infection
    }

    /// The fixed spreader set of a quenched scenario (empty otherwise).
    pub fn quenched_sources(&self) -> &[AgentId] {
        &self.quenched
    }

    /// Marks `agents` as having processed a tainted message, so they emit
    /// tainted messages on the next step.
    pub fn seed_infection(&mut self, agents: &[AgentId]) {
        for &j in agents {
            self.infection.processing_infected[j as usize] = true;
        }
    }

    /// Effective trust values at the current step.
    pub fn alpha_values(&self, mode: SnapshotMode) -> Vec<f64> {
        let mut values = self.trust.effective_values(self.t);
        if mode == SnapshotMode::AllPairs {
            let n = self.params.n();
            values.resize(n * n, 0.0);
        }
        values
    }

    /// Flat `(receiver, sender, effective alpha)` dump of the stored pairs.
    pub fn trust_snapshot(&self) -> Vec<TrustRecord> {
        self.trust.snapshot(self.t)
    }

    /// Advances the state by one synchronous step and returns its metrics.
    pub fn step(&mut self) -> StepMetrics {
        let t = self.t;
        let n = self.params.n();
        let k = self.params.k();

        let sources = spreaders_at(&self.scenario, t, n, &self.quenched, &mut self.rng);
        self.infection.sources.iter_mut().for_each(|s| *s = false);
        for &j in &sources {
            self.infection.sources[j as usize] = true;
        }
        let emitting: Vec<bool> = (0..n).map(|j| self.infection.emitting(j)).collect();

        let senders = draw_senders(n, k, &mut self.rng);

        let mut metrics = StepMetrics {
            t,
            ..Default::default()
        };
        let mut checks = vec![0u32; n];
        let mut found = vec![0u32; n];
        let mut next_infected = vec![false; n];
        let mut writes: Vec<(AgentId, AgentId, f64)> = Vec::new();

        // Gather first so the trust loads are independent of the decisions.
        let alphas: Vec<f64> = senders
            .iter()
            .enumerate()
            .map(|(slot, &j)| self.trust.effective_alpha((slot / k) as AgentId, j, t))
            .collect();

        for (i, (slots, alphas)) in senders.chunks_exact(k).zip(alphas.chunks_exact(k)).enumerate() {
            let threshold = self.risk.threshold(i);
            for (&j, &alpha) in slots.iter().zip(alphas) {
                let tainted = emitting[j as usize];
                match decide(alpha, threshold) {
                    Decision::Check => {
                        metrics.checked += 1;
                        checks[i] += 1;
                        if tainted {
                            found[i] += 1;
                            metrics.refused += 1;
                        } else {
                            metrics.accepted += 1;
                        }
                        let updated = apply_check_update(alpha, !tainted, &self.params);
                        writes.push((i as AgentId, j, updated));
                    }
                    Decision::AcceptTrust => {
                        metrics.accepted += 1;
                        if tainted {
                            metrics.e_false_accept += 1;
                            next_infected[i] = true;
                        }
                    }
                    Decision::RefuseDistrust => {
                        metrics.refused += 1;
                        if !tainted {
                            metrics.e_false_reject += 1;
                        }
                    }
                }
            }
        }

        for i in 0..n {
            let e = update_risk(self.risk.excess(i), found[i], checks[i], &self.params);
            self.risk.set_excess(i, e);
        }

        self.trust.advance(t);
        // Duplicate (i, j) messages in one step all read the same time-t alpha,
        // so their writes carry the same value.
        for (i, j, alpha) in writes {
            self.trust.set(i, j, alpha, t + 1);
        }

        metrics.C = metrics.checked;
        metrics.I = emitting.iter().filter(|&&e| e).count() as u64;
        metrics.E = metrics.e_false_accept + metrics.e_false_reject;

        self.infection.processing_infected = next_infected;
        self.t = t + 1;
        metrics
    }
}

/// Sink for a run's output.
pub trait Recorder {
    fn record(&mut self, metrics: &StepMetrics) -> io::Result<()>;

    /// Called every `snapshot_every` steps with the state after the step.
    fn snapshot(&mut self, _state: &SimState) -> io::Result<()> {
        Ok(())
    }
}

/// Recorder that keeps nothing.
#[derive(Debug, Default)]
pub struct NullRecorder;

impl Recorder for NullRecorder {
    fn record(&mut self, _metrics: &StepMetrics) -> io::Result<()> {
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RunOptions {
    pub steps: u64,
    /// 0 disables snapshots.
    pub snapshot_every: u64,
    pub mode: DecayMode,
}

impl RunOptions {
    pub fn steps(steps: u64) -> Self {
        RunOptions {
            steps,
            snapshot_every: 0,
            mode: DecayMode::Lazy,
        }
    }
}

#[derive(Debug, Error)]
pub enum RunError {
    #[error("run needs at least one step")]
    NoSteps,
    #[error("recorder failed at step {step} after {} recorded steps: {source}", partial.len())]
    Recorder {
        step: Step,
        #[source]
        source: io::Error,
        /// Metrics produced before the failure.
        partial: Vec<StepMetrics>,
    },
}

/// Runs `opts.steps` steps from a fresh state, streaming metrics to `recorder`.
pub fn run<R: Recorder + ?Sized>(
    params: ValidatedParams,
    scenario: ScenarioSpec,
    seed: u64,
    opts: &RunOptions,
    recorder: &mut R,
) -> Result<Vec<StepMetrics>, RunError> {
    let mut state = SimState::with_mode(params, scenario, seed, opts.mode);
    run_from(&mut state, opts, recorder)
}

/// Like [`run`], continuing from an existing state.
pub fn run_from<R: Recorder + ?Sized>(
    state: &mut SimState,
    opts: &RunOptions,
    recorder: &mut R,
) -> Result<Vec<StepMetrics>, RunError> {
    if opts.steps == 0 {
        return Err(RunError::NoSteps);
    }
    let mut series = Vec::with_capacity(opts.steps as usize);
    for _ in 0..opts.steps {
        let m = state.step();
        series.push(m);
        let step = m.t;
        let fail = |source, partial| RunError::Recorder {
            step,
            source,
            partial,
        };
        if let Err(e) = recorder.record(&m) {
            return Err(fail(e, series));
        }
        if opts.snapshot_every > 0 && state.t() % opts.snapshot_every == 0 {
            if let Err(e) = recorder.snapshot(state) {
                return Err(fail(e, series));
            }
        }
    }
    Ok(series)
}

/// Stand-alone risk threshold for a given excess, as [`RiskState`] exposes it.
pub fn risk_threshold(excess: f64, params: &ValidatedParams) -> f64 {
    exposed(params.v_a(), excess)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::params::ModelParams;

    fn params(n: usize, k: usize, v_a: f64, r_a: f64) -> ValidatedParams {
        ModelParams {
            N: n,
            K: k,
            v_alpha: 0.01,
            r_alpha: 0.005,
            v_A: v_a,
            r_A: r_a,
        }
        .validate()
        .unwrap()
    }

    #[test]
    fn decide_sign_and_tie() {
        assert_eq!(decide(0.5, 0.01), Decision::AcceptTrust);
        assert_eq!(decide(-0.5, 0.01), Decision::RefuseDistrust);
        assert_eq!(decide(0.01, 0.01), Decision::Check);
        assert_eq!(decide(-0.01, 0.01), Decision::Check);
        assert_eq!(decide(0.0, 0.01), Decision::Check);
    }

    #[test]
    fn check_update_values() {
        let p = params(500, 5, 0.01, 0.005);
        assert!((apply_check_update(0.3, true, &p) - 0.995 * 0.31).abs() < 1e-15);
        assert!((apply_check_update(0.3, true, &p) - 0.30845).abs() < 1e-12);
        assert!((apply_check_update(0.0, false, &p) + 0.00995).abs() < 1e-15);
        assert_eq!(apply_check_update(0.999, true, &p), 1.0);
        assert_eq!(apply_check_update(-0.999, false, &p), -1.0);
    }

    #[test]
    fn risk_update_branches() {
        let p = params(500, 5, 0.01, 0.005);
        assert_eq!(update_risk(0.0, 0, 4, &p), 0.0);
        assert_eq!(risk_threshold(0.0, &p), 0.01);

        let p = params(500, 5, 0.001, 0.01);
        let e = update_risk(0.002, 2, 5, &p);
        assert!((e - 0.002376).abs() < 1e-15, "{e}");
        assert!((risk_threshold(e, &p) - 0.003376).abs() < 1e-15);
        let e = update_risk(0.002, 0, 0, &p);
        assert!((e - 0.00198).abs() < 1e-15, "{e}");
    }

    #[test]
    fn pulse_window_is_half_open() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let s = ScenarioSpec::Pulse {
            p: 1.0,
            t_start: 500,
            duration: 20,
        };
        assert_eq!(spreaders_at(&s, 510, 500, &[], &mut rng).len(), 500);
        assert!(spreaders_at(&s, 520, 500, &[], &mut rng).is_empty());
        assert!(spreaders_at(&s, 499, 500, &[], &mut rng).is_empty());
        assert_eq!(spreaders_at(&s, 500, 500, &[], &mut rng).len(), 500);
    }

    #[test]
    fn annealed_sample_is_distinct() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let s = ScenarioSpec::Annealed { p: 0.01 };
        for t in 0..100 {
            let ids = spreaders_at(&s, t, 500, &[], &mut rng);
            assert_eq!(ids.len(), 5);
            assert!(ids.windows(2).all(|w| w[0] < w[1]));
        }
    }

    #[test]
    fn senders_fill_every_slot() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let s = draw_senders(500, 5, &mut rng);
        assert_eq!(s.len(), 2500);
        assert!(s.iter().all(|&j| j < 500));
        assert_eq!(draw_senders(1, 3, &mut rng), vec![0, 0, 0]);
    }

    #[test]
    fn init_state_is_empty() {
        let st = SimState::new(params(500, 5, 0.01, 0.005), ScenarioSpec::None, 42);
        assert_eq!(st.t(), 0);
        assert!(st.trust().is_empty());
        assert!(st.risk().thresholds().all(|a| a == 0.01));
        assert!(st.quenched_sources().is_empty());
    }

    #[test]
    fn quenched_set_is_drawn_once() {
        let p = params(500, 5, 0.01, 0.005);
        let s = ScenarioSpec::Quenched { p: 0.01 };
        let mut a = SimState::new(p, s, 42);
        let b = SimState::new(p, s, 42);
        let drawn = a.quenched_sources().to_vec();
        assert_eq!(drawn.len(), 5);
        assert_eq!(drawn, b.quenched_sources());
        for _ in 0..5 {
            let m = a.step();
            assert!(m.I >= 5);
            for &j in &drawn {
                assert!(a.infection().sources[j as usize]);
            }
        }
        assert_eq!(a.quenched_sources(), drawn.as_slice());
    }

    #[test]
    fn cold_start_checks_everything() {
        let mut st = SimState::new(params(500, 5, 0.01, 0.005), ScenarioSpec::None, 42);
        let m = st.step();
        assert_eq!(m.C, 2500);
        assert_eq!(m.E, 0);
        assert_eq!(m.I, 0);
        assert_eq!(m.accepted, 2500);
        assert_eq!(m.refused, 0);
    }

    fn single_agent(v_a: f64, r_a: f64) -> ValidatedParams {
        ModelParams {
            N: 1,
            K: 1,
            v_alpha: 0.01,
            r_alpha: 0.005,
            v_A: v_a,
            r_A: r_a,
        }
        .validate()
        .unwrap()
    }

    #[test]
    fn one_step_matches_hand_computation() {
        // N = 1: the only message is a self-message, checked while alpha <= A.
        let mut st = SimState::new(single_agent(0.01, 0.005), ScenarioSpec::None, 0);
        let m = st.step();
        assert_eq!(m.C, 1);
        assert!((st.trust().effective_alpha(0, 0, 1) - 0.00995).abs() < 1e-15);
        // alpha = 0.00995 <= A = 0.01, still checked.
        let m = st.step();
        assert_eq!(m.C, 1);
        let expected = 0.995 * (0.00995 + 0.01);
        assert!((st.trust().effective_alpha(0, 0, 2) - expected).abs() < 1e-15);
        // Now above threshold: trusted without a check.
        let m = st.step();
        assert_eq!(m.C, 0);
        assert_eq!(m.accepted, 1);
    }

    #[test]
    fn duplicate_checks_write_once() {
        // N = K = 2: duplicates are common; every first check starts from 0.
        let p = ModelParams {
            N: 2,
            K: 2,
            v_alpha: 0.01,
            r_alpha: 0.005,
            v_A: 0.01,
            r_A: 0.005,
        }
        .validate()
        .unwrap();
        let mut st = SimState::new(p, ScenarioSpec::None, 4);
        let m = st.step();
        assert_eq!(m.C, 4);
        for r in st.trust_snapshot() {
            assert!((r.alpha - 0.00995).abs() < 1e-15, "{r:?}");
        }
    }

    #[test]
    fn tainted_check_lowers_trust_and_raises_risk() {
        let mut st = SimState::new(single_agent(0.001, 0.01), ScenarioSpec::Annealed { p: 1.0 }, 0);
        let m = st.step();
        assert_eq!((m.C, m.refused, m.E, m.I), (1, 1, 0, 1));
        assert!((st.trust().effective_alpha(0, 0, 1) + 0.00995).abs() < 1e-15);
        // n/c = 1 → excess = 0.99 * 0.001
        assert!((st.risk().excess(0) - 0.00099).abs() < 1e-15);
        // |alpha| = 0.00995 > A = 0.00199 and negative: refused on distrust.
        let m = st.step();
        assert_eq!((m.C, m.refused, m.e_false_reject), (0, 1, 0));
    }

    #[test]
    fn trusted_tainted_message_infects_for_one_step() {
        let p = ModelParams {
            N: 2,
            K: 1,
            v_alpha: 0.5,
            r_alpha: 0.01,
            v_A: 0.01,
            r_A: 0.5,
        }
        .validate()
        .unwrap();
        let mut st = SimState::new(p, ScenarioSpec::None, 5);
        // Build trust everywhere first.
        for _ in 0..50 {
            st.step();
        }
        let all_trusted = (0..2).all(|i| (0..2).all(|j| st.trust().effective_alpha(i, j, st.t()) > 0.01));
        assert!(all_trusted);
        st.seed_infection(&[0, 1]);
        let m = st.step();
        assert_eq!(m.I, 2);
        assert_eq!(m.e_false_accept, 2);
        assert!(st.infection().processing_infected.iter().all(|&x| x));
    }

    #[test]
    fn run_rejects_zero_steps() {
        let p = params(10, 2, 0.01, 0.005);
        let err = run(p, ScenarioSpec::None, 1, &RunOptions::steps(0), &mut NullRecorder);
        assert!(matches!(err, Err(RunError::NoSteps)));
    }

    struct FailAt(u64);

    impl Recorder for FailAt {
        fn record(&mut self, m: &StepMetrics) -> io::Result<()> {
            if m.t == self.0 {
                Err(io::Error::other("disk full"))
            } else {
                Ok(())
            }
        }
    }

    #[test]
    fn recorder_failure_returns_partial_series() {
        let p = params(10, 2, 0.01, 0.005);
        let err = run(p, ScenarioSpec::None, 1, &RunOptions::steps(10), &mut FailAt(4)).unwrap_err();
        match err {
            RunError::Recorder { step, partial, .. } => {
                assert_eq!(step, 4);
                assert_eq!(partial.len(), 5);
            }
            other => panic!("{other:?}"),
        }
    }
}
