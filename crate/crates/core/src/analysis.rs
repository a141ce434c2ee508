//! Observables computed from simulation output: trust histograms, power-law
//! fits, oscillation periods, outcome labels and stationary summaries.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::metrics::StepMetrics;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum AnalysisError {
    #[error("empty snapshot")]
    EmptySnapshot,
    #[error("invalid histogram range [{lo}, {hi}] with {bins} bins")]
    BadRange { lo: f64, hi: f64, bins: usize },
    #[error("only {found} positive bins inside the fit range, need at least {needed}")]
    InsufficientBins { found: usize, needed: usize },
    #[error("series of length {len} is too short, need {needed}")]
    SeriesTooShort { len: usize, needed: usize },
    #[error("no autocorrelation peak above prominence {floor}")]
    NoPeak { floor: f64 },
}

/// Fixed-width histogram over `[lo, hi]`. Values equal to `hi` fall in the last bin.
#[derive(Debug, Clone, PartialEq)]
pub struct Histogram {
    lo: f64,
    hi: f64,
    counts: Vec<u64>,
    out_of_range: u64,
}

impl Histogram {
    pub fn new(bins: usize, lo: f64, hi: f64) -> Result<Self, AnalysisError> {
        if bins == 0 || !(hi > lo) {
            return Err(AnalysisError::BadRange { lo, hi, bins });
        }
        Ok(Histogram {
            lo,
            hi,
            counts: vec![0; bins],
            out_of_range: 0,
        })
    }

    #[inline]
    pub fn add(&mut self, x: f64) {
        if !(x >= self.lo && x <= self.hi) {
            self.out_of_range += 1;
            return;
        }
        let bins = self.counts.len();
        let b = (((x - self.lo) / (self.hi - self.lo)) * bins as f64) as usize;
        self.counts[b.min(bins - 1)] += 1;
    }

    pub fn extend<I: IntoIterator<Item = f64>>(&mut self, values: I) {
        for x in values {
            self.add(x);
        }
    }

    /// Adds the counts of a histogram with the same binning.
    pub fn merge(&mut self, other: &Histogram) {
        assert_eq!(self.counts.len(), other.counts.len());
        assert!(self.lo == other.lo && self.hi == other.hi, "binning mismatch");
        for (c, o) in self.counts.iter_mut().zip(&other.counts) {
            *c += o;
        }
        self.out_of_range += other.out_of_range;
    }

    pub fn counts(&self) -> &[u64] {
        &self.counts
    }

    pub fn in_range(&self) -> u64 {
        self.counts.iter().sum()
    }

    pub fn out_of_range(&self) -> u64 {
        self.out_of_range
    }

    pub fn range(&self) -> (f64, f64) {
        (self.lo, self.hi)
    }

    pub fn width(&self) -> f64 {
        (self.hi - self.lo) / self.counts.len() as f64
    }

    pub fn centers(&self) -> Vec<f64> {
        let w = self.width();
        (0..self.counts.len())
            .map(|b| self.lo + (b as f64 + 0.5) * w)
            .collect()
    }

    /// Density normalized over in-range values (zeros if nothing is in range).
    pub fn density(&self) -> Vec<f64> {
        let total = self.in_range();
        if total == 0 {
            return vec![0.0; self.counts.len()];
        }
        let norm = total as f64 * self.width();
        self.counts.iter().map(|&c| c as f64 / norm).collect()
    }

    /// Per-bin probability mass (density times width).
    pub fn mass(&self) -> Vec<f64> {
        let total = self.in_range().max(1) as f64;
        self.counts.iter().map(|&c| c as f64 / total).collect()
    }
}

/// Histogram of trust values over `range`, with `bins` bins.
pub fn alpha_histogram(values: &[f64], bins: usize, range: (f64, f64)) -> Result<Histogram, AnalysisError> {
    if values.is_empty() {
        return Err(AnalysisError::EmptySnapshot);
    }
    let mut h = Histogram::new(bins, range.0, range.1)?;
    h.extend(values.iter().copied());
    Ok(h)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    pub slope: f64,
    pub intercept: f64,
    pub stderr: f64,
    pub r2: f64,
    pub fit_range: (f64, f64),
    pub bins_used: usize,
    /// Bins inside the range dropped for non-positive density.
    pub bins_skipped: usize,
}

pub const MIN_FIT_BINS: usize = 5;

/// Least-squares slope of `ln density` against `ln x` over bins whose center
/// lies in `fit_range`.
pub fn fit_power_exponent(
    centers: &[f64],
    density: &[f64],
    fit_range: (f64, f64),
) -> Result<FitResult, AnalysisError> {
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    let mut skipped = 0;
    for (&c, &d) in centers.iter().zip(density) {
        if c < fit_range.0 || c > fit_range.1 || c <= 0.0 {
            continue;
        }
        if d > 0.0 {
            xs.push(c.ln());
            ys.push(d.ln());
        } else {
            skipped += 1;
        }
    }
    let n = xs.len();
    if n < MIN_FIT_BINS {
        return Err(AnalysisError::InsufficientBins {
            found: n,
            needed: MIN_FIT_BINS,
        });
    }
    let nf = n as f64;
    let mx = xs.iter().sum::<f64>() / nf;
    let my = ys.iter().sum::<f64>() / nf;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let syy: f64 = ys.iter().map(|y| (y - my).powi(2)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let sse: f64 = xs
        .iter()
        .zip(&ys)
        .map(|(x, y)| (y - intercept - slope * x).powi(2))
        .sum();
    let stderr = if n > 2 {
        (sse / (nf - 2.0) / sxx).sqrt()
    } else {
        f64::NAN
    };
    let r2 = if syy > 0.0 { 1.0 - sse / syy } else { 1.0 };
    Ok(FitResult {
        slope,
        intercept,
        stderr,
        r2,
        fit_range,
        bins_used: n,
        bins_skipped: skipped,
    })
}

/// Default fit window inside the P1 branch, `[0.1 v, 0.9 v]`.
pub fn default_fit_range(v: f64) -> (f64, f64) {
    (0.1 * v, 0.9 * v)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PeriodOptions {
    /// Largest lag searched.
    pub max_lag: usize,
    /// Width of the moving average subtracted before correlating; 0 or 1
    /// subtracts the global mean only.
    pub detrend_window: usize,
    /// Minimum rise of the autocorrelation peak above the preceding trough.
    pub min_prominence: f64,
}

impl PeriodOptions {
    pub fn new(max_lag: usize, detrend_window: usize) -> Self {
        PeriodOptions {
            max_lag,
            detrend_window,
            min_prominence: 0.1,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PeriodEstimate {
    /// Peak lag refined by parabolic interpolation.
    pub period: f64,
    pub lag: usize,
    pub acf_at_peak: f64,
    pub prominence: f64,
}

/// Means of consecutive blocks of `block` samples; a short final block is
/// averaged over what it has. Used to thin long series before
/// autocorrelation.
pub fn block_means(series: &[f64], block: usize) -> Vec<f64> {
    series
        .chunks(block.max(1))
        .map(|c| c.iter().sum::<f64>() / c.len() as f64)
        .collect()
}

/// Subtracts a centered moving average of width `window`. The output is
/// shorter than the input by `window - 1`.
pub fn detrend(series: &[f64], window: usize) -> Vec<f64> {
    if window <= 1 {
        let mean = series.iter().sum::<f64>() / series.len().max(1) as f64;
        return series.iter().map(|x| x - mean).collect();
    }
    if series.len() < window {
        return Vec::new();
    }
    let mut prefix = Vec::with_capacity(series.len() + 1);
    prefix.push(0.0);
    for x in series {
        prefix.push(prefix.last().unwrap() + x);
    }
    let half = window / 2;
    (0..=series.len() - window)
        .map(|s| series[s + half] - (prefix[s + window] - prefix[s]) / window as f64)
        .collect()
}

/// Autocorrelation for lags `0..=max_lag`, each lag normalized by its own
/// number of products.
pub fn autocorrelation(series: &[f64], max_lag: usize) -> Vec<f64> {
    let n = series.len();
    let mean = series.iter().sum::<f64>() / n as f64;
    let y: Vec<f64> = series.iter().map(|x| x - mean).collect();
    let var = y.iter().map(|v| v * v).sum::<f64>() / n as f64;
    if var == 0.0 {
        return vec![0.0; max_lag + 1];
    }
    (0..=max_lag.min(n - 1))
        .map(|lag| {
            let s: f64 = y[..n - lag].iter().zip(&y[lag..]).map(|(a, b)| a * b).sum();
            s / (n - lag) as f64 / var
        })
        .collect()
}

/// Period of an oscillating series from the first prominent positive lobe of
/// its autocorrelation.
pub fn estimate_period(series: &[f64], opts: &PeriodOptions) -> Result<PeriodEstimate, AnalysisError> {
    let needed = 4 * opts.max_lag;
    if series.len() < needed || opts.max_lag < 2 {
        return Err(AnalysisError::SeriesTooShort {
            len: series.len(),
            needed: needed.max(8),
        });
    }
    let y = detrend(series, opts.detrend_window);
    if y.len() <= opts.max_lag + 1 {
        return Err(AnalysisError::SeriesTooShort {
            len: series.len(),
            needed: opts.max_lag + opts.detrend_window + 2,
        });
    }
    let acf = autocorrelation(&y, opts.max_lag);
    let no_peak = AnalysisError::NoPeak {
        floor: opts.min_prominence,
    };

    let mut lag = match acf.iter().position(|&c| c < 0.0) {
        Some(l) => l,
        None => return Err(no_peak),
    };
    let last = acf.len() - 1;
    while lag < last {
        let mut trough = acf[lag];
        while lag < last && acf[lag] <= 0.0 {
            trough = trough.min(acf[lag]);
            lag += 1;
        }
        if acf[lag] <= 0.0 {
            break;
        }
        let start = lag;
        while lag < last && acf[lag + 1] > 0.0 {
            lag += 1;
        }
        let peak = (start..=lag)
            .max_by(|&a, &b| acf[a].total_cmp(&acf[b]))
            .unwrap();
        let prominence = acf[peak] - trough;
        if prominence >= opts.min_prominence && peak < last {
            let (l, c, r) = (acf[peak - 1], acf[peak], acf[peak + 1]);
            let denom = l - 2.0 * c + r;
            let shift = if denom < 0.0 {
                (0.5 * (l - r) / denom).clamp(-0.5, 0.5)
            } else {
                0.0
            };
            return Ok(PeriodEstimate {
                period: peak as f64 + shift,
                lag: peak,
                acf_at_peak: c,
                prominence,
            });
        }
        lag += 1;
    }
    Err(no_peak)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Outcome {
    Eradicated,
    Endemic,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OutcomeLabel {
    pub label: Outcome,
    /// Mean of I/N over the window.
    pub evidence: f64,
    /// Half-open step window `[lo, hi)`.
    pub window: (u64, u64),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OutcomeOptions {
    pub threshold: f64,
    /// Steps skipped after the pulse ends.
    pub settle: u64,
    pub window: u64,
}

impl Default for OutcomeOptions {
    fn default() -> Self {
        OutcomeOptions {
            threshold: 0.01,
            settle: 500,
            window: 1000,
        }
    }
}

/// Labels a post-pulse infection series. `infected[t]` is I at step t.
pub fn classify_outcome(
    infected: &[u64],
    n: usize,
    pulse_end: u64,
    opts: &OutcomeOptions,
) -> Result<OutcomeLabel, AnalysisError> {
    let lo = pulse_end + opts.settle;
    let hi = lo + opts.window.max(1);
    if (infected.len() as u64) < hi {
        return Err(AnalysisError::SeriesTooShort {
            len: infected.len(),
            needed: hi as usize,
        });
    }
    let slice = &infected[lo as usize..hi as usize];
    let evidence = slice.iter().map(|&i| i as f64).sum::<f64>() / (slice.len() as f64 * n as f64);
    let label = if evidence < opts.threshold {
        Outcome::Eradicated
    } else {
        Outcome::Endemic
    };
    Ok(OutcomeLabel {
        label,
        evidence,
        window: (lo, hi),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SeriesStats {
    pub mean: f64,
    pub variance: f64,
    /// Block-bootstrap standard error of the mean.
    pub stderr: f64,
}

#[allow(non_snake_case)]
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub C: SeriesStats,
    pub I: SeriesStats,
    pub E: SeriesStats,
    pub tail_start: u64,
    pub tail_len: usize,
    pub block_len: usize,
}

const BOOTSTRAP_RESAMPLES: usize = 200;

fn mean_var(x: &[f64]) -> (f64, f64) {
    let n = x.len() as f64;
    let mean = x.iter().sum::<f64>() / n;
    let var = x.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    (mean, var)
}

/// Circular block bootstrap standard error of the mean.
fn block_bootstrap_stderr(x: &[f64], block: usize, rng: &mut ChaCha8Rng) -> f64 {
    let n = x.len();
    if n < 2 {
        return 0.0;
    }
    let block = block.clamp(1, n);
    let blocks = n.div_ceil(block);
    let means: Vec<f64> = (0..BOOTSTRAP_RESAMPLES)
        .map(|_| {
            let mut s = 0.0;
            let mut taken = 0;
            for _ in 0..blocks {
                let start = rng.gen_range(0..n);
                for k in 0..block {
                    if taken == n {
                        break;
                    }
                    s += x[(start + k) % n];
                    taken += 1;
                }
            }
            s / n as f64
        })
        .collect();
    mean_var(&means).1.sqrt()
}

/// Means and variances of C, I and E over the last `tail_fraction` of the run.
///
/// The bootstrap block length is the period of the tail's cost series when
/// one is detectable, else `sqrt(len)`.
pub fn summarize(series: &[StepMetrics], tail_fraction: f64) -> Summary {
    assert!(!series.is_empty(), "summarize needs a nonempty series");
    let len = ((series.len() as f64 * tail_fraction.clamp(0.0, 1.0)).ceil() as usize)
        .clamp(1, series.len());
    let tail = &series[series.len() - len..];
    let c: Vec<f64> = tail.iter().map(|m| m.C as f64).collect();
    let i: Vec<f64> = tail.iter().map(|m| m.I as f64).collect();
    let e: Vec<f64> = tail.iter().map(|m| m.E as f64).collect();

    let fallback = (len as f64).sqrt().ceil() as usize;
    let block_len = if len >= 16 {
        estimate_period(&c, &PeriodOptions::new(len / 4, 0))
            .map(|p| p.lag.max(1))
            .unwrap_or(fallback)
    } else {
        fallback
    };

    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let mut stats = |x: &[f64]| {
        let (mean, variance) = mean_var(x);
        SeriesStats {
            mean,
            variance,
            stderr: block_bootstrap_stderr(x, block_len, &mut rng),
        }
    };
    Summary {
        C: stats(&c),
        I: stats(&i),
        E: stats(&e),
        tail_start: tail[0].t,
        tail_len: len,
        block_len,
    }
}

/// First index after which a moving average of `series` (width `smooth`)
/// stays inside `mean ± band_sigmas·std` of the final `tail_fraction`.
pub fn settling_time(series: &[f64], tail_fraction: f64, band_sigmas: f64, smooth: usize) -> Option<usize> {
    let smooth = smooth.max(1);
    if series.len() < smooth * 2 {
        return None;
    }
    let tail_len = ((series.len() as f64 * tail_fraction).ceil() as usize).clamp(1, series.len());
    let (mean, var) = mean_var(&series[series.len() - tail_len..]);
    let band = band_sigmas * var.sqrt();
    let mut acc: f64 = series[..smooth].iter().sum();
    let mut smoothed = Vec::with_capacity(series.len() - smooth + 1);
    smoothed.push(acc / smooth as f64);
    for k in smooth..series.len() {
        acc += series[k] - series[k - smooth];
        smoothed.push(acc / smooth as f64);
    }
    let last_out = smoothed.iter().rposition(|s| (s - mean).abs() > band);
    match last_out {
        None => Some(0),
        Some(k) if k + 1 < smoothed.len() => Some(k + 1 + smooth / 2),
        Some(_) => None,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn block_means_average_each_chunk() {
        assert_eq!(block_means(&[1.0, 3.0, 5.0, 7.0, 9.0], 2), vec![2.0, 6.0, 9.0]);
        assert_eq!(block_means(&[4.0, 6.0], 0), vec![4.0, 6.0]);
    }
    use std::f64::consts::PI;

    #[test]
    fn cold_start_histogram() {
        let h = alpha_histogram(&[0.0; 100], 50, (0.0, 0.02)).unwrap();
        assert_eq!(h.counts()[0], 100);
        let d = h.density();
        assert!((d.iter().sum::<f64>() * h.width() - 1.0).abs() < 1e-9);
    }

    #[test]
    fn histogram_reports_out_of_range() {
        let h = alpha_histogram(&[-0.001, 0.005, 0.02, 0.03], 10, (0.0, 0.02)).unwrap();
        assert_eq!(h.in_range(), 2);
        assert_eq!(h.out_of_range(), 2);
        assert_eq!(h.counts()[9], 1);
        assert!(alpha_histogram(&[], 10, (0.0, 1.0)).is_err());
    }

    #[test]
    fn linear_density_sample_fits_slope_one() {
        // Inverse-CDF sample of density ∝ x on [0, v].
        let v = 0.01;
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let xs: Vec<f64> = (0..400_000).map(|_| v * rng.gen::<f64>().sqrt()).collect();
        let h = alpha_histogram(&xs, 100, (0.0, 2.0 * v)).unwrap();
        let fit = fit_power_exponent(&h.centers(), &h.density(), default_fit_range(v)).unwrap();
        assert!((fit.slope - 1.0).abs() < 0.05, "{fit:?}");
    }

    #[test]
    fn exact_power_laws() {
        let centers: Vec<f64> = (0..100).map(|k| (k as f64 + 0.5) * 1e-4).collect();
        for x in [1.0, 3.0, -0.4] {
            let d: Vec<f64> = centers.iter().map(|c| 7.0 * c.powf(x)).collect();
            let fit = fit_power_exponent(&centers, &d, (1e-3, 9e-3)).unwrap();
            assert!((fit.slope - x).abs() < 1e-6);
            assert!(fit.r2 > 0.999_999);
        }
    }

    #[test]
    fn fit_skips_empty_bins() {
        let centers: Vec<f64> = (1..=10).map(f64::from).collect();
        let mut d: Vec<f64> = centers.iter().map(|c| c * c).collect();
        d[3] = 0.0;
        let fit = fit_power_exponent(&centers, &d, (1.0, 10.0)).unwrap();
        assert_eq!(fit.bins_used, 9);
        assert_eq!(fit.bins_skipped, 1);
        d.iter_mut().skip(4).for_each(|x| *x = 0.0);
        assert!(matches!(
            fit_power_exponent(&centers, &d, (1.0, 10.0)),
            Err(AnalysisError::InsufficientBins { found: 3, .. })
        ));
    }

    #[test]
    fn pure_tone_period() {
        let s: Vec<f64> = (0..4000).map(|t| (2.0 * PI * t as f64 / 100.0).sin()).collect();
        let p = estimate_period(&s, &PeriodOptions::new(250, 100)).unwrap();
        assert!((p.period - 100.0).abs() <= 1.0, "{p:?}");
    }

    #[test]
    fn damped_tone_with_offset() {
        let s: Vec<f64> = (0..4000)
            .map(|t| {
                let t = t as f64;
                3.0 + (-t / 1000.0).exp() * (2.0 * PI * t / 100.0).sin()
            })
            .collect();
        let p = estimate_period(&s, &PeriodOptions::new(250, 100)).unwrap();
        assert!((p.period - 100.0).abs() <= 2.0, "{p:?}");
    }

    #[test]
    fn planted_periods_within_two_percent() {
        for period in [37.0, 138.3, 692.8] {
            let n = (period * 20.0) as usize;
            let s: Vec<f64> = (0..n)
                .map(|t| (2.0 * PI * t as f64 / period).cos() + 0.3 * (4.0 * PI * t as f64 / period).cos())
                .collect();
            let max_lag = (period * 1.5) as usize;
            let p = estimate_period(&s, &PeriodOptions::new(max_lag, period.round() as usize)).unwrap();
            assert!((p.period - period).abs() / period < 0.02, "{period}: {p:?}");
        }
    }

    #[test]
    fn flat_series_has_no_peak() {
        let s = vec![2.0; 1000];
        assert!(matches!(
            estimate_period(&s, &PeriodOptions::new(100, 0)),
            Err(AnalysisError::NoPeak { .. })
        ));
        assert!(matches!(
            estimate_period(&s[..100], &PeriodOptions::new(100, 0)),
            Err(AnalysisError::SeriesTooShort { .. })
        ));
    }

    #[test]
    fn outcome_labels() {
        let n = 500;
        let mut series = vec![500u64; 520];
        series.extend(std::iter::repeat(0).take(2000));
        let label = classify_outcome(&series, n, 520, &OutcomeOptions::default()).unwrap();
        assert_eq!(label.label, Outcome::Eradicated);
        assert_eq!(label.window, (1020, 2020));

        let mut series = vec![500u64; 520];
        series.extend(std::iter::repeat(25).take(2000));
        let label = classify_outcome(&series, n, 520, &OutcomeOptions::default()).unwrap();
        assert_eq!(label.label, Outcome::Endemic);
        assert!((label.evidence - 0.05).abs() < 1e-12);

        assert!(classify_outcome(&series[..1500], n, 520, &OutcomeOptions::default()).is_err());
    }

    #[test]
    fn constant_series_summary() {
        let series: Vec<StepMetrics> = (0..400)
            .map(|t| StepMetrics {
                t,
                C: 7,
                I: 2,
                E: 1,
                ..Default::default()
            })
            .collect();
        let s = summarize(&series, 0.25);
        assert_eq!(s.tail_len, 100);
        assert_eq!(s.tail_start, 300);
        assert_eq!(s.C.mean, 7.0);
        assert_eq!(s.C.variance, 0.0);
        assert_eq!(s.C.stderr, 0.0);
        assert_eq!(s.I.mean, 2.0);
    }

    #[test]
    fn settling_of_a_step() {
        let mut s = vec![10.0; 100];
        s.extend((0..900).map(|t| if t % 2 == 0 { 1.0 } else { -1.0 }));
        let t = settling_time(&s, 0.25, 3.0, 1).unwrap();
        assert_eq!(t, 100);
    }
}
