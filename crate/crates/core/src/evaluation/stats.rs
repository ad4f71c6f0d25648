//! Wilson score interval, McNemar and Fisher exact tests.

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum StatsError {
    #[error("domain error: {0}")]
    Domain(String),
}

/// Standard normal quantile for a two-sided 95% interval.
pub const Z_95: f64 = 1.959963984540054;

/// Wilson score interval for `successes` out of `n`, clamped to `[0, 1]`.
pub fn wilson_interval(successes: u64, n: u64, z: f64) -> Result<(f64, f64), StatsError> {
    if n == 0 {
        return Err(StatsError::Domain("n must be at least 1".into()));
    }
    if successes > n {
        return Err(StatsError::Domain(format!("successes {successes} exceed n {n}")));
    }
    if !(z.is_finite() && z >= 0.0) {
        return Err(StatsError::Domain(format!("z must be finite and non-negative, got {z}")));
    }
    let nf = n as f64;
    let p = successes as f64 / nf;
    let z2 = z * z;
    let denom = 1.0 + z2 / nf;
    let center = (p + z2 / (2.0 * nf)) / denom;
    let half = z * (p * (1.0 - p) / nf + z2 / (4.0 * nf * nf)).sqrt() / denom;
    let mut low = (center - half).max(0.0);
    let mut high = (center + half).min(1.0);
    // Rounding can push a bound a few ulps past the point estimate.
    if successes == 0 {
        low = 0.0;
    }
    if successes == n {
        high = 1.0;
    }
    Ok((low.min(p), high.max(p)))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum McNemarMethod {
    /// Two-sided exact binomial test.
    #[default]
    Exact,
    /// Chi-squared with continuity correction, one degree of freedom.
    ChiSquaredCorrected,
}

/// `ln C(n, k)` for every `k` in `0..=n`, by the multiplicative recurrence.
fn ln_binomials(n: u64) -> Vec<f64> {
    let mut out = Vec::with_capacity(n as usize + 1);
    let mut acc = 0.0f64;
    out.push(acc);
    for k in 1..=n {
        acc += ((n - k + 1) as f64).ln() - (k as f64).ln();
        out.push(acc);
    }
    out
}

/// Exact two-sided McNemar p-value `2·P(X ≥ max(b, c))`, `X ~ Bin(b + c, ½)`,
/// clamped to 1. No discordant pairs gives 1.
pub fn mcnemar_exact(b: u64, c: u64) -> f64 {
    let n = b + c;
    if n == 0 {
        return 1.0;
    }
    let m = b.max(c);
    let ln_c = ln_binomials(n);
    let ln_half = -(n as f64) * std::f64::consts::LN_2;
    let tail: f64 = (m..=n).map(|k| (ln_c[k as usize] + ln_half).exp()).sum();
    (2.0 * tail).min(1.0)
}

/// Continuity-corrected McNemar: `(|b − c| − 1)² / (b + c)` against χ²(1).
pub fn mcnemar_chi_squared(b: u64, c: u64) -> f64 {
    let n = b + c;
    if n == 0 {
        return 1.0;
    }
    let diff = (b as f64 - c as f64).abs() - 1.0;
    let stat = diff.max(0.0).powi(2) / n as f64;
    libm::erfc((stat / 2.0).sqrt()).min(1.0)
}

pub fn mcnemar_test(b: u64, c: u64, method: McNemarMethod) -> f64 {
    match method {
        McNemarMethod::Exact => mcnemar_exact(b, c),
        McNemarMethod::ChiSquaredCorrected => mcnemar_chi_squared(b, c),
    }
}

fn ln_factorials(n: u64) -> Vec<f64> {
    let mut out = Vec::with_capacity(n as usize + 1);
    let mut acc = 0.0f64;
    out.push(acc);
    for k in 1..=n {
        acc += (k as f64).ln();
        out.push(acc);
    }
    out
}

/// Relative slack when comparing hypergeometric masses against the observed
/// table, so tables of equal probability are not split by rounding.
const FISHER_TIE_SLACK: f64 = 1e-7;

/// Two-sided Fisher exact test on `[[a, b], [c, d]]`: the total mass of all
/// tables with the observed margins whose probability does not exceed the
/// observed table's.
pub fn fisher_exact(table: [[u64; 2]; 2]) -> f64 {
    let [[a, b], [c, d]] = table;
    let r1 = a + b;
    let r2 = c + d;
    let c1 = a + c;
    let n = r1 + r2;
    if n == 0 {
        return 1.0;
    }
    let lf = ln_factorials(n);
    let ln_choose = |n: u64, k: u64| lf[n as usize] - lf[k as usize] - lf[(n - k) as usize];
    let ln_denominator = ln_choose(n, c1);
    let ln_p = |x: u64| ln_choose(r1, x) + ln_choose(r2, c1 - x) - ln_denominator;
    let lo = c1.saturating_sub(r2);
    let hi = r1.min(c1);
    let observed = ln_p(a);
    let cutoff = observed + FISHER_TIE_SLACK.ln_1p();
    let p: f64 = (lo..=hi).map(ln_p).filter(|&lp| lp <= cutoff).map(f64::exp).sum();
    p.min(1.0)
}
