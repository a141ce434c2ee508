//! Running configs: one seed, an ensemble of seeds, and the per-seed and
//! pooled observables that go into `summary.json`.

use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::Serialize;
use serde_json::{json, Value};
use trustnet_core::analysis::{
    alpha_histogram, classify_outcome, default_fit_range, estimate_period, fit_power_exponent,
    settling_time, summarize, AnalysisError, FitResult, Histogram, Outcome, OutcomeLabel,
    OutcomeOptions, PeriodEstimate, PeriodOptions, Summary,
};
use trustnet_core::engine::run_from;
use trustnet_core::meanfield::{theory_exponent, theory_period};
use trustnet_core::{NullRecorder, RunOptions, SimState, SnapshotMode, StepMetrics, ValidatedParams};

use crate::config::RunConfig;
use crate::output::{self, CsvRecorder, HIST_BINS};
use crate::CliError;

/// Fraction of the run treated as stationary.
pub const TAIL_FRACTION: f64 = 0.25;

/// Settling band, in tail standard deviations, and its smoothing window as
/// a fraction of the oblivion period.
pub const SETTLE_SIGMAS: f64 = 3.0;
pub const SETTLE_SMOOTH_PERIODS: f64 = 1.0;

/// Outcome evaluation starts at least this long after the pulse.
pub const OUTCOME_SETTLE: u64 = 500;

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

/// Everything kept from one seed's run.
#[derive(Debug, Clone)]
pub struct SeedRun {
    pub seed: u64,
    pub series: Vec<StepMetrics>,
    /// Effective α of touched pairs after the last step.
    pub final_alpha: Vec<f64>,
}

/// Runs one seed. With `dir`, streams its CSV outputs there.
pub fn run_seed(cfg: &RunConfig, seed: u64, dir: Option<&Path>, dump_trust: bool) -> Result<SeedRun, CliError> {
    let params = cfg.validate()?;
    let opts = RunOptions {
        snapshot_every: cfg.snapshot_every,
        ..RunOptions::steps(cfg.steps)
    };
    let mut state = SimState::new(params, cfg.scenario, seed);
    let series = match dir {
        Some(dir) => {
            std::fs::create_dir_all(dir).map_err(|e| CliError::io(format!("creating {}", dir.display()), e))?;
            let mut rec = CsvRecorder::create(dir, params.n(), params.messages_per_step(), params.v_alpha())
                .map_err(|e| CliError::io(format!("writing to {}", dir.display()), e))?;
            let series = run_from(&mut state, &opts, &mut rec)?;
            rec.finish()
                .map_err(|e| CliError::io(format!("writing to {}", dir.display()), e))?;
            if dump_trust {
                output::write_trust_dump(&dir.join("trust_final.csv"), &state.trust_snapshot())
                    .map_err(|e| CliError::io("writing trust dump", e))?;
            }
            series
        }
        None => run_from(&mut state, &opts, &mut NullRecorder)?,
    };
    Ok(SeedRun {
        seed,
        series,
        final_alpha: state.alpha_values(SnapshotMode::TouchedPairs),
    })
}

/// Directory for one seed's files: the output dir itself for single runs,
/// `seed_<s>/` inside it for ensembles.
pub fn seed_dir(cfg: &RunConfig, out: &Path, seed: u64) -> PathBuf {
    if cfg.ensemble == 1 {
        out.to_owned()
    } else {
        out.join(format!("seed_{seed}"))
    }
}

/// Worker pool sized by `TRUSTNET_WORKERS` when set, else by rayon's default.
pub fn worker_pool() -> Result<rayon::ThreadPool, CliError> {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(n) = std::env::var("TRUSTNET_WORKERS")
        .ok()
        .and_then(|s| s.trim().parse::<usize>().ok())
        .filter(|&n| n > 0)
    {
        builder = builder.num_threads(n);
    }
    builder.build().map_err(|e| CliError::Pool(e.to_string()))
}

/// Runs every seed of the ensemble on `pool`, in seed order.
pub fn run_ensemble(
    cfg: &RunConfig,
    out: Option<&Path>,
    dump_trust: bool,
    pool: &rayon::ThreadPool,
) -> Result<Vec<SeedRun>, CliError> {
    cfg.validate()?;
    let seeds = cfg.seeds();
    pool.install(|| {
        seeds
            .par_iter()
            .map(|&seed| {
                let dir = out.map(|o| seed_dir(cfg, o, seed));
                run_seed(cfg, seed, dir.as_deref(), dump_trust)
            })
            .collect()
    })
}

/// Autocorrelation period of the cost series, searched up to 1.5 oblivion
/// periods after detrending over one oblivion period.
pub fn cost_period(series: &[StepMetrics], r_alpha: f64) -> Option<PeriodEstimate> {
    let t: f64 = theory_period(r_alpha).ok()?;
    let c: Vec<f64> = series.iter().map(|m| m.C as f64).collect();
    let opts = PeriodOptions::new((1.5 * t).ceil() as usize, t.round() as usize);
    estimate_period(&c, &opts).ok()
}

/// Steps until the smoothed cost stays inside the stationary band.
pub fn cost_settling_time(series: &[StepMetrics], r_alpha: f64) -> Option<usize> {
    let t = theory_period(r_alpha).ok()?;
    let c: Vec<f64> = series.iter().map(|m| m.C as f64).collect();
    let smooth = (SETTLE_SMOOTH_PERIODS * t).round().max(1.0) as usize;
    settling_time(&c, TAIL_FRACTION, SETTLE_SIGMAS, smooth)
}

/// Post-pulse label over the second half of the run, starting no earlier
/// than [`OUTCOME_SETTLE`] steps after the pulse. `None` without a pulse or
/// when the run ends too soon.
pub fn outcome(cfg: &RunConfig, series: &[StepMetrics]) -> Option<OutcomeLabel> {
    let pulse_end = cfg.scenario.pulse_end()?;
    let start = (pulse_end + OUTCOME_SETTLE).max(cfg.steps / 2);
    if start >= series.len() as u64 {
        return None;
    }
    let infected: Vec<u64> = series.iter().map(|m| m.I).collect();
    let opts = OutcomeOptions {
        settle: start - pulse_end,
        window: series.len() as u64 - start,
        ..OutcomeOptions::default()
    };
    classify_outcome(&infected, cfg.model.N, pulse_end, &opts).ok()
}

/// Pooled histogram of the final α values of all seeds over `[0, 2 v]`.
pub fn pooled_histogram(runs: &[SeedRun], v_alpha: f64, bins: usize) -> Result<Histogram, AnalysisError> {
    let mut pooled: Option<Histogram> = None;
    for run in runs {
        let h = alpha_histogram(&run.final_alpha, bins, (0.0, 2.0 * v_alpha))?;
        match &mut pooled {
            Some(p) => p.merge(&h),
            None => pooled = Some(h),
        }
    }
    pooled.ok_or(AnalysisError::EmptySnapshot)
}

/// Power-law fit of the pooled histogram over the default P1 window.
pub fn pooled_fit(runs: &[SeedRun], v_alpha: f64, bins: usize) -> Result<FitResult, AnalysisError> {
    let h = pooled_histogram(runs, v_alpha, bins)?;
    fit_power_exponent(&h.centers(), &h.density(), default_fit_range(v_alpha))
}

#[derive(Debug, Clone, Serialize)]
pub struct SeedReport {
    pub seed: u64,
    #[serde(flatten)]
    pub summary: FlatSummary,
    pub period: Option<f64>,
    pub settling_time: Option<usize>,
    pub outcome: Option<Outcome>,
    pub outcome_evidence: Option<f64>,
}

/// [`Summary`] as flat `key: number` pairs.
#[allow(non_snake_case)]
#[derive(Debug, Clone, Copy, Serialize)]
pub struct FlatSummary {
    pub C_mean: f64,
    pub C_var: f64,
    pub C_stderr: f64,
    pub I_mean: f64,
    pub I_var: f64,
    pub I_stderr: f64,
    pub E_mean: f64,
    pub E_var: f64,
    pub E_stderr: f64,
    pub tail_start: u64,
}

impl From<Summary> for FlatSummary {
    fn from(s: Summary) -> Self {
        FlatSummary {
            C_mean: s.C.mean,
            C_var: s.C.variance,
            C_stderr: s.C.stderr,
            I_mean: s.I.mean,
            I_var: s.I.variance,
            I_stderr: s.I.stderr,
            E_mean: s.E.mean,
            E_var: s.E.variance,
            E_stderr: s.E.stderr,
            tail_start: s.tail_start,
        }
    }
}

pub fn seed_report(cfg: &RunConfig, run: &SeedRun) -> SeedReport {
    let label = outcome(cfg, &run.series);
    SeedReport {
        seed: run.seed,
        summary: summarize(&run.series, TAIL_FRACTION).into(),
        period: cost_period(&run.series, cfg.model.r_alpha).map(|p| p.period),
        settling_time: cost_settling_time(&run.series, cfg.model.r_alpha),
        outcome: label.map(|l| l.label),
        outcome_evidence: label.map(|l| l.evidence),
    }
}

fn mean_of(values: impl Iterator<Item = f64>) -> Option<f64> {
    let (sum, n) = values.fold((0.0, 0usize), |(s, n), v| (s + v, n + 1));
    (n > 0).then(|| sum / n as f64)
}

/// Flat summary document: config echo, seeds, ensemble means of the per-seed
/// observables, pooled exponent fit, majority outcome and the per-seed rows.
pub fn summary_json(cfg: &RunConfig, params: &ValidatedParams, runs: &[SeedRun]) -> Value {
    let reports: Vec<SeedReport> = runs.iter().map(|r| seed_report(cfg, r)).collect();
    let avg = |f: &dyn Fn(&SeedReport) -> f64| mean_of(reports.iter().map(f));
    let mut doc = json!({
        "version": VERSION,
        "seed": cfg.seed,
        "seeds": cfg.seeds(),
        "config": cfg.to_value(),
        "a": params.a(),
        "C_mean": avg(&|r| r.summary.C_mean),
        "C_var": avg(&|r| r.summary.C_var),
        "I_mean": avg(&|r| r.summary.I_mean),
        "I_var": avg(&|r| r.summary.I_var),
        "E_mean": avg(&|r| r.summary.E_mean),
        "E_var": avg(&|r| r.summary.E_var),
        "C_frac_mean": avg(&|r| r.summary.C_mean / params.messages_per_step() as f64),
        "period": mean_of(reports.iter().filter_map(|r| r.period)),
        "period_theory": theory_period(params.r_alpha()).ok(),
        "settling_time": mean_of(reports.iter().filter_map(|r| r.settling_time.map(|s| s as f64))),
        "exponent_theory": theory_exponent(params.a(), params.r_alpha()).ok(),
    });
    let obj = doc.as_object_mut().expect("object literal");
    match pooled_fit(runs, params.v_alpha(), HIST_BINS) {
        Ok(fit) => {
            obj.insert("fit_slope".into(), json!(fit.slope));
            obj.insert("fit_stderr".into(), json!(fit.stderr));
            obj.insert("fit_r2".into(), json!(fit.r2));
            obj.insert("fit_range".into(), json!([fit.fit_range.0, fit.fit_range.1]));
            obj.insert("fit_bins_used".into(), json!(fit.bins_used));
        }
        Err(e) => {
            obj.insert("fit_error".into(), json!(e.to_string()));
        }
    }
    let labels: Vec<Outcome> = reports.iter().filter_map(|r| r.outcome).collect();
    if !labels.is_empty() {
        let endemic = labels.iter().filter(|&&l| l == Outcome::Endemic).count();
        let majority = if 2 * endemic > labels.len() {
            Outcome::Endemic
        } else {
            Outcome::Eradicated
        };
        obj.insert("outcome".into(), json!(majority));
        obj.insert("endemic_seeds".into(), json!(endemic));
        obj.insert(
            "outcome_evidence".into(),
            json!(mean_of(reports.iter().filter_map(|r| r.outcome_evidence))),
        );
        if let Some(l) = outcome(cfg, &runs[0].series) {
            obj.insert("outcome_window".into(), json!([l.window.0, l.window.1]));
        }
    }
    obj.insert("per_seed".into(), serde_json::to_value(&reports).expect("reports serialize"));
    doc
}
