//! Mean-field theory of the trust distribution without infection.
//!
//! With the risk threshold pinned at `v` (the same value as the trust
//! increment) every pair with `0 <= alpha <= v` is checked with probability
//! `a = K/N` per step and then jumps to `(1 - r)(alpha + v)`; all other mass
//! contracts to `(1 - r) alpha`. The stationary density is split into a
//! power-law branch P1 on `[0, v]` and a branch P2 on `(v, 2v]` that has no
//! closed form.
//!
//! The recursion is iterated in measure form on a uniform grid: each bin is
//! pushed forward as an interval and deposited onto the bins it overlaps,
//! which conserves mass exactly (up to rounding).

use thiserror::Error;

use crate::analysis::{fit_power_exponent, AnalysisError, FitResult};

/// Minimum number of bins on each branch.
pub const MIN_BINS_PER_BRANCH: usize = 16;

/// Default grid resolution over `[0, 2v]`.
pub const DEFAULT_BINS: usize = 2048;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum MeanFieldError {
    #[error("`{name}` = {value} outside the open interval (0, 1)")]
    Domain { name: &'static str, value: f64 },
    #[error("grid of {bins} bins is too coarse; need an even count with at least {MIN_BINS_PER_BRANCH} per branch")]
    GridTooCoarse { bins: usize },
    #[error("no convergence after {iterations} iterations (L1 residual {residual:e})")]
    NotConverged { iterations: usize, residual: f64 },
    #[error(transparent)]
    Fit(#[from] AnalysisError),
}

fn check_open(name: &'static str, value: f64) -> Result<(), MeanFieldError> {
    if value > 0.0 && value < 1.0 {
        Ok(())
    } else {
        Err(MeanFieldError::Domain { name, value })
    }
}

/// Exponent of the power law `P1(alpha) ∝ alpha^x`: `ln(1-a)/ln(1-r) - 1`.
pub fn theory_exponent(a: f64, r: f64) -> Result<f64, MeanFieldError> {
    check_open("a", a)?;
    check_open("r", r)?;
    Ok((1.0 - a).ln() / (1.0 - r).ln() - 1.0)
}

/// Small-rate form `a/r - 1`.
pub fn theory_exponent_approx(a: f64, r: f64) -> Result<f64, MeanFieldError> {
    check_open("a", a)?;
    check_open("r", r)?;
    Ok(a / r - 1.0)
}

/// Steps for trust to decay from `2v` to `v`: `-ln 2 / ln(1-r)`.
pub fn theory_period(r: f64) -> Result<f64, MeanFieldError> {
    check_open("r", r)?;
    Ok(-std::f64::consts::LN_2 / (1.0 - r).ln())
}

/// Small-rate form `ln 2 / r`.
pub fn theory_period_approx(r: f64) -> Result<f64, MeanFieldError> {
    check_open("r", r)?;
    Ok(std::f64::consts::LN_2 / r)
}

/// Checks per ordered pair per step in the stationary state: `a · ∫₀^v P`.
pub fn theory_asymptotic_cost(p: &AlphaDistribution, a: f64) -> f64 {
    a * p.p1_mass()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Branch {
    P1,
    P2,
}

impl Branch {
    pub fn label(self) -> &'static str {
        match self {
            Branch::P1 => "P1",
            Branch::P2 => "P2",
        }
    }
}

/// Probability mass per bin on a uniform grid over `[0, 2v]`.
#[derive(Debug, Clone, PartialEq)]
pub struct AlphaDistribution {
    v: f64,
    mass: Vec<f64>,
}

impl AlphaDistribution {
    /// All mass in the bin at alpha = 0.
    pub fn point_at_zero(v: f64, bins: usize) -> Result<Self, MeanFieldError> {
        if bins % 2 != 0 || bins / 2 < MIN_BINS_PER_BRANCH {
            return Err(MeanFieldError::GridTooCoarse { bins });
        }
        if !(v > 0.0) {
            return Err(MeanFieldError::Domain { name: "v", value: v });
        }
        let mut mass = vec![0.0; bins];
        mass[0] = 1.0;
        Ok(AlphaDistribution { v, mass })
    }

    /// Wraps per-bin masses; the caller is responsible for normalization.
    pub fn from_mass(v: f64, mass: Vec<f64>) -> Result<Self, MeanFieldError> {
        let bins = mass.len();
        if bins % 2 != 0 || bins / 2 < MIN_BINS_PER_BRANCH {
            return Err(MeanFieldError::GridTooCoarse { bins });
        }
        Ok(AlphaDistribution { v, mass })
    }

    pub fn v(&self) -> f64 {
        self.v
    }

    pub fn bins(&self) -> usize {
        self.mass.len()
    }

    pub fn width(&self) -> f64 {
        2.0 * self.v / self.mass.len() as f64
    }

    pub fn mass(&self) -> &[f64] {
        &self.mass
    }

    pub fn total_mass(&self) -> f64 {
        self.mass.iter().sum()
    }

    pub fn p1_mass(&self) -> f64 {
        self.mass[..self.mass.len() / 2].iter().sum()
    }

    pub fn centers(&self) -> Vec<f64> {
        let h = self.width();
        (0..self.mass.len()).map(|k| (k as f64 + 0.5) * h).collect()
    }

    pub fn density(&self) -> Vec<f64> {
        let h = self.width();
        self.mass.iter().map(|m| m / h).collect()
    }

    pub fn branch_of(&self, bin: usize) -> Branch {
        if bin < self.mass.len() / 2 {
            Branch::P1
        } else {
            Branch::P2
        }
    }

    pub fn l1_distance(&self, other: &AlphaDistribution) -> f64 {
        self.mass
            .iter()
            .zip(&other.mass)
            .map(|(x, y)| (x - y).abs())
            .sum()
    }

    /// Sums groups of `factor` adjacent bins.
    pub fn coarsen(&self, factor: usize) -> Vec<f64> {
        self.mass.chunks(factor).map(|c| c.iter().sum()).collect()
    }

    /// Power-law fit of the P1 branch, skipping `skip` bins at each end.
    pub fn fit_p1(&self, skip: usize) -> Result<FitResult, MeanFieldError> {
        let half = self.mass.len() / 2;
        let h = self.width();
        let lo = (skip as f64) * h;
        let hi = (half - skip) as f64 * h;
        Ok(fit_power_exponent(&self.centers(), &self.density(), (lo, hi))?)
    }
}

/// Deposits `mass`, spread uniformly over `[lo, hi)`, onto the grid.
fn deposit(out: &mut [f64], h: f64, lo: f64, hi: f64, mass: f64) {
    if mass == 0.0 {
        return;
    }
    let last = out.len() - 1;
    let first_bin = ((lo / h) as usize).min(last);
    let last_bin = ((hi / h) as usize).min(last);
    if first_bin == last_bin {
        out[first_bin] += mass;
        return;
    }
    let span = hi - lo;
    let mut placed = 0.0;
    for (b, slot) in out.iter_mut().enumerate().take(last_bin).skip(first_bin) {
        let overlap = ((b + 1) as f64 * h).min(hi) - (b as f64 * h).max(lo);
        let part = mass * overlap / span;
        *slot += part;
        placed += part;
    }
    // Remainder to the last bin so the deposit sums to `mass` exactly.
    out[last_bin] += mass - placed;
}

/// One synchronous mean-field update.
pub fn mf_step(p: &AlphaDistribution, a: f64, r: f64) -> Result<AlphaDistribution, MeanFieldError> {
    check_open("a", a)?;
    check_open("r", r)?;
    Ok(step_unchecked(p, a, r))
}

fn step_unchecked(p: &AlphaDistribution, a: f64, r: f64) -> AlphaDistribution {
    let bins = p.mass.len();
    let half = bins / 2;
    let h = p.width();
    let keep = 1.0 - r;
    let mut out = vec![0.0; bins];
    for (b, &m) in p.mass.iter().enumerate() {
        if m == 0.0 {
            continue;
        }
        let lo = b as f64 * h;
        let hi = lo + h;
        if b < half {
            let jumped = a * m;
            deposit(&mut out, h, keep * lo, keep * hi, m - jumped);
            deposit(&mut out, h, keep * (lo + p.v), keep * (hi + p.v), jumped);
        } else {
            deposit(&mut out, h, keep * lo, keep * hi, m);
        }
    }
    AlphaDistribution { v: p.v, mass: out }
}

#[derive(Debug, Clone)]
pub struct FixedPoint {
    pub distribution: AlphaDistribution,
    pub iterations: usize,
    /// L1 change produced by the final iteration.
    pub residual: f64,
}

impl FixedPoint {
    /// Asymptotic cost per ordered pair, `a · ∫₀^v P`.
    pub fn asymptotic_cost(&self, a: f64) -> f64 {
        theory_asymptotic_cost(&self.distribution, a)
    }
}

/// Iterates [`mf_step`] from a point mass at zero until the L1 change per
/// step falls below `tol`.
pub fn mf_fixed_point(
    a: f64,
    r: f64,
    v: f64,
    bins: usize,
    tol: f64,
    max_iter: usize,
) -> Result<FixedPoint, MeanFieldError> {
    check_open("a", a)?;
    check_open("r", r)?;
    let mut p = AlphaDistribution::point_at_zero(v, bins)?;
    let mut residual = f64::INFINITY;
    for it in 1..=max_iter {
        let next = step_unchecked(&p, a, r);
        residual = next.l1_distance(&p);
        p = next;
        if residual < tol {
            return Ok(FixedPoint {
                distribution: p,
                iterations: it,
                residual,
            });
        }
    }
    Err(MeanFieldError::NotConverged {
        iterations: max_iter,
        residual,
    })
}

/// Mean-field cost per ordered pair, `a · ∫₀^v P`, for the first `steps`
/// steps of relaxation from a point mass at zero (all pairs untouched).
pub fn mf_cost_series(a: f64, r: f64, v: f64, bins: usize, steps: usize) -> Result<Vec<f64>, MeanFieldError> {
    check_open("a", a)?;
    check_open("r", r)?;
    let mut p = AlphaDistribution::point_at_zero(v, bins)?;
    let mut out = Vec::with_capacity(steps);
    for _ in 0..steps {
        out.push(a * p.p1_mass());
        p = step_unchecked(&p, a, r);
    }
    Ok(out)
}
