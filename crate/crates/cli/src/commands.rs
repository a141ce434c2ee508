//! The four subcommands, as library functions returning what they printed
//! or wrote so they can be driven from tests.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde_json::{json, Value};
use trustnet_core::analysis::{default_fit_range, fit_power_exponent, FitResult};
use trustnet_core::meanfield::{
    mf_fixed_point, theory_exponent, theory_exponent_approx, theory_period, theory_period_approx, FixedPoint,
    DEFAULT_BINS,
};

use crate::config::{parse_field_value, ConfigError, RunConfig};
use crate::output;
use crate::runner::{self, SeedReport};
use crate::CliError;

/// Default iteration cap of the mean-field fixed-point search.
pub const ORACLE_MAX_ITER: usize = 2_000_000;

/// Runs the config's ensemble, writes all files under `cfg.outputs` and
/// returns the summary document.
pub fn cmd_run(cfg: &RunConfig, dump_trust: bool) -> Result<Value, CliError> {
    let params = cfg.validate()?;
    let out = &cfg.outputs;
    std::fs::create_dir_all(out).map_err(|e| CliError::io(format!("creating {}", out.display()), e))?;
    let pool = runner::worker_pool()?;
    let runs = runner::run_ensemble(cfg, Some(out), dump_trust, &pool)?;
    let summary = runner::summary_json(cfg, &params, &runs);
    output::write_json(&out.join("summary.json"), &summary)
        .map_err(|e| CliError::io("writing summary.json", e))?;
    Ok(summary)
}

/// Directory name of one sweep point.
pub fn point_dir_name(param: &str, value: &str) -> String {
    format!("{param}={}", value.trim())
}

/// Runs `cfg` once per value of `param`. Each point gets its own output
/// directory and summary; `sweep.csv` collects one row per (point, seed)
/// followed by one `mean` row per point.
pub fn cmd_sweep(cfg: &RunConfig, param: &str, values: &[String]) -> Result<PathBuf, CliError> {
    if values.is_empty() {
        return Err(ConfigError::Value {
            field: "values".into(),
            reason: "empty value list".into(),
        }
        .into());
    }
    let mut points = Vec::with_capacity(values.len());
    for v in values {
        let mut point = cfg.with_field(param, parse_field_value(v))?;
        point.outputs = cfg.outputs.join(point_dir_name(param, v));
        points.push((v.trim().to_owned(), point));
    }
    let out = &cfg.outputs;
    std::fs::create_dir_all(out).map_err(|e| CliError::io(format!("creating {}", out.display()), e))?;

    let pool = runner::worker_pool()?;
    let mut table = String::from(
        "param,value,seed,C_mean,C_var,I_mean,I_var,E_mean,E_var,period,settling_time,outcome\n",
    );
    for (value, point) in &points {
        let params = point.validate()?;
        std::fs::create_dir_all(&point.outputs)
            .map_err(|e| CliError::io(format!("creating {}", point.outputs.display()), e))?;
        let runs = runner::run_ensemble(point, Some(&point.outputs), false, &pool)?;
        let summary = runner::summary_json(point, &params, &runs);
        output::write_json(&point.outputs.join("summary.json"), &summary)
            .map_err(|e| CliError::io("writing summary.json", e))?;
        let reports: Vec<SeedReport> = runs.iter().map(|r| runner::seed_report(point, r)).collect();
        for r in &reports {
            sweep_row(&mut table, param, value, &r.seed.to_string(), r);
        }
        let mean = |key: &str| summary.get(key).cloned().unwrap_or(Value::Null);
        let _ = writeln!(
            table,
            "{param},{value},mean,{},{},{},{},{},{},{},{},{}",
            csv_num(&mean("C_mean")),
            csv_num(&mean("C_var")),
            csv_num(&mean("I_mean")),
            csv_num(&mean("I_var")),
            csv_num(&mean("E_mean")),
            csv_num(&mean("E_var")),
            csv_num(&mean("period")),
            csv_num(&mean("settling_time")),
            mean("outcome").as_str().unwrap_or(""),
        );
    }
    let path = out.join("sweep.csv");
    std::fs::write(&path, table).map_err(|e| CliError::io("writing sweep.csv", e))?;
    Ok(path)
}

fn csv_num(v: &Value) -> String {
    match v {
        Value::Number(n) => n.to_string(),
        _ => String::new(),
    }
}

fn opt<T: ToString>(v: Option<T>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

fn sweep_row(table: &mut String, param: &str, value: &str, seed: &str, r: &SeedReport) {
    let s = &r.summary;
    let outcome = r.outcome.map(|o| format!("{o:?}"));
    let _ = writeln!(
        table,
        "{param},{value},{seed},{},{},{},{},{},{},{},{},{}",
        s.C_mean,
        s.C_var,
        s.I_mean,
        s.I_var,
        s.E_mean,
        s.E_var,
        opt(r.period),
        opt(r.settling_time),
        opt(outcome),
    );
}

/// Closed-form values as `key=value` lines. With `v`, also solves the
/// mean-field fixed point for the asymptotic cost per ordered pair.
pub fn cmd_theory(a: f64, r: f64, v: Option<f64>) -> Result<Vec<(String, f64)>, CliError> {
    let mut lines = vec![
        ("x_exact".to_owned(), theory_exponent(a, r)?),
        ("x_approx".to_owned(), theory_exponent_approx(a, r)?),
        ("T_exact".to_owned(), theory_period(r)?),
        ("T_approx".to_owned(), theory_period_approx(r)?),
    ];
    if let Some(v) = v {
        let fp = mf_fixed_point(a, r, v, DEFAULT_BINS, 1e-12, ORACLE_MAX_ITER)?;
        lines.push(("C_inf".to_owned(), fp.asymptotic_cost(a)));
    }
    Ok(lines)
}

#[derive(Debug, Clone)]
pub struct OracleReport {
    pub fixed_point: FixedPoint,
    pub fit: FitResult,
    pub theory: f64,
    pub c_inf: f64,
    pub csv: PathBuf,
}

impl OracleReport {
    pub fn lines(&self) -> Vec<(String, f64)> {
        let p = &self.fixed_point;
        vec![
            ("slope".into(), self.fit.slope),
            ("slope_stderr".into(), self.fit.stderr),
            ("x_exact".into(), self.theory),
            ("slope_minus_theory".into(), self.fit.slope - self.theory),
            ("mass".into(), p.distribution.total_mass()),
            ("p1_mass".into(), p.distribution.p1_mass()),
            ("C_inf".into(), self.c_inf),
            ("residual".into(), p.residual),
            ("iterations".into(), p.iterations as f64),
        ]
    }
}

/// Solves the mean-field fixed point, writes `mf_dist.csv` to `out` and
/// fits the P1 branch over the same window used for simulated histograms.
pub fn cmd_oracle(
    a: f64,
    r: f64,
    v: f64,
    grid: usize,
    tol: f64,
    max_iter: usize,
    out: &Path,
) -> Result<OracleReport, CliError> {
    let theory = theory_exponent(a, r)?;
    let fixed_point = mf_fixed_point(a, r, v, grid, tol, max_iter)?;
    let d = &fixed_point.distribution;
    let fit = fit_power_exponent(&d.centers(), &d.density(), default_fit_range(v))
        .map_err(|e| CliError::Oracle(e.into()))?;
    std::fs::create_dir_all(out).map_err(|e| CliError::io(format!("creating {}", out.display()), e))?;
    let csv = out.join("mf_dist.csv");
    output::write_distribution(&csv, d).map_err(|e| CliError::io("writing mf_dist.csv", e))?;
    let c_inf = fixed_point.asymptotic_cost(a);
    Ok(OracleReport {
        fixed_point,
        fit,
        theory,
        c_inf,
        csv,
    })
}

/// `key=value` rendering used for theory and oracle output.
pub fn render(lines: &[(String, f64)]) -> String {
    lines.iter().map(|(k, v)| format!("{k}={v}\n")).collect()
}

/// Summary keys printed after a run.
pub fn run_digest(summary: &Value) -> String {
    let keys = [
        "C_mean",
        "I_mean",
        "E_mean",
        "period",
        "period_theory",
        "fit_slope",
        "exponent_theory",
        "outcome",
    ];
    let mut s = String::new();
    for k in keys {
        if let Some(v) = summary.get(k).filter(|v| !v.is_null()) {
            let text = match v {
                Value::String(t) => t.clone(),
                other => other.to_string(),
            };
            let _ = writeln!(s, "{k}={text}");
        }
    }
    s
}

/// Echo document for reproducing a run from its summary.
pub fn config_from_summary(summary: &Value) -> Result<RunConfig, ConfigError> {
    let echo = summary.get("config").cloned().unwrap_or_else(|| json!(null));
    RunConfig::from_value(echo)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn lookup(lines: &[(String, f64)], key: &str) -> f64 {
        lines.iter().find(|(k, _)| k == key).unwrap().1
    }

    #[test]
    fn theory_values() {
        let lines = cmd_theory(0.01, 0.005, None).unwrap();
        assert!((lookup(&lines, "x_exact") - 1.005038).abs() < 5e-7);
        assert_eq!(lookup(&lines, "x_approx"), 1.0);
        let lines = cmd_theory(0.006, 0.01, None).unwrap();
        assert!((lookup(&lines, "x_exact") + 0.401207).abs() < 5e-7);
        let lines = cmd_theory(0.01, 1e-4, None).unwrap();
        assert!((lookup(&lines, "T_approx") - 6931.5).abs() < 0.05);
    }

    #[test]
    fn theory_domain_error_maps_to_exit_two() {
        let err = cmd_theory(1.5, 0.005, None).unwrap_err();
        assert_eq!(err.exit_code(), 2);
        let err = cmd_theory(0.01, 0.0, None).unwrap_err();
        assert_eq!(err.exit_code(), 2);
    }

    #[test]
    fn render_is_key_value_lines() {
        let text = render(&[("x".into(), 1.5), ("y".into(), -2.0)]);
        assert_eq!(text, "x=1.5\ny=-2\n");
    }
}
