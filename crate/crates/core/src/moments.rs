//! Exact mean and variance of the long-run default rate.
//!
//! The long-run default rate is the plain average of the one-year default
//! rates over the active dates. Windows of dates less than a year apart
//! overlap, and every obligor present on both dates couples the two rates:
//! for an obligor with PD `p_t` at the earlier date and `p_s` at the later
//! one, `Cov(x_t, x_s) = w_{t,s} p_s (1 - p_t)` (uniform default timing
//! inside the later window).

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::portfolio::{overlap_weight, Panel, PdTable};
use crate::scalar::Real;
use crate::sum::KahanSum;

/// Mean and variance of the long-run default rate, split by source.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VarianceBreakdown<T> {
    /// `μ`.
    pub mean: T,
    /// `Σ_t σ_t²`, not yet divided by `R(N)²`.
    pub per_date_variance_sum: T,
    /// Entry `i - 1` is `2 Σ_t Cov(X_t, X_{t+i})` for lag `i = 1..q-1`, not yet divided by `R(N)²`.
    pub lag_covariance: Vec<T>,
    /// `R(N)`.
    pub active_count: usize,
    /// `σ²`.
    pub total_variance: T,
}

impl<T: Real> VarianceBreakdown<T> {
    pub fn std_dev(&self) -> T {
        self.total_variance.sqrt()
    }
}

/// Covariance of the default states of one obligor in two overlapping
/// windows. `p_earlier` belongs to the earlier window, `p_later` to the
/// later one; the argument order matters.
#[inline]
pub fn state_covariance<T: Real>(p_earlier: T, p_later: T, w: T) -> T {
    w * p_later * (T::one() - p_earlier)
}

fn inv_count<T: Real>(n: usize) -> T {
    if n == 0 {
        T::zero()
    } else {
        T::one() / T::count(n)
    }
}

/// Sum of `p_{t+lag,j} (1 - p_{t,j})` over the obligors present at both dates.
fn cross_sum<T: Real>(panel: &Panel<T>, pds: &PdTable<T>, t: usize, lag: usize) -> T {
    let earlier = pds.date(t);
    let later = pds.date(t + lag);
    let mut acc = KahanSum::new();
    for &(a, b) in panel.overlap_pairs(t, lag) {
        acc += later[b as usize] * (T::one() - earlier[a as usize]);
    }
    acc.value()
}

/// `Cov(X_t, X_s)` for `t < s`; zero when either date is empty or the
/// windows do not overlap.
pub fn rate_covariance<T: Real>(panel: &Panel<T>, pds: &PdTable<T>, t: usize, s: usize) -> Result<T> {
    panel.overlap_weight(t, s)?;
    if t >= s {
        return Err(Error::Validation(format!(
            "rate covariance expects the earlier date first (got t={t}, s={s})"
        )));
    }
    pds.check_against(panel)?;
    let lag = s - t;
    let (nt, ns) = (panel.n(t), panel.n(s));
    if lag >= panel.windows_per_year() || nt == 0 || ns == 0 {
        return Ok(T::zero());
    }
    let w: T = overlap_weight(t, s, panel.windows_per_year());
    Ok(w * cross_sum(panel, pds, t, lag) / (T::count(nt) * T::count(ns)))
}

/// `μ`: average over active dates of the mean PD per date.
pub fn long_run_mean<T: Real>(panel: &Panel<T>, pds: &PdTable<T>) -> Result<T> {
    pds.check_against(panel)?;
    let mut acc = KahanSum::new();
    for t in 1..=panel.n_dates() {
        let n = panel.n(t);
        if n > 0 {
            let date_sum: KahanSum<T> = pds.date(t).iter().copied().collect();
            acc += date_sum.value() / T::count(n);
        }
    }
    Ok(acc.value() / T::count(panel.active_count()))
}

/// Exact `σ²` of the long-run default rate for the given PDs.
pub fn long_run_variance_exact<T: Real>(panel: &Panel<T>, pds: &PdTable<T>) -> Result<VarianceBreakdown<T>> {
    let mean = long_run_mean(panel, pds)?;
    let n_dates = panel.n_dates();
    let q = panel.windows_per_year();

    let mut per_date = KahanSum::new();
    for t in 1..=n_dates {
        let n = panel.n(t);
        if n == 0 {
            continue;
        }
        let inner: KahanSum<T> = pds.date(t).iter().map(|&p| p * (T::one() - p)).collect();
        per_date += inner.value() / T::count(n * n);
    }

    let lag_covariance: Vec<T> = (1..q)
        .map(|lag| {
            let weight = T::lit(2.0) * overlap_weight::<T>(0, lag, q);
            let mut acc = KahanSum::new();
            for t in 1..=n_dates.saturating_sub(lag) {
                let (nt, ns) = (panel.n(t), panel.n(t + lag));
                if nt == 0 || ns == 0 {
                    continue;
                }
                acc += cross_sum(panel, pds, t, lag) / (T::count(nt) * T::count(ns));
            }
            weight * acc.value()
        })
        .collect();

    let mut numerator = KahanSum::new();
    numerator += per_date.value();
    for &c in &lag_covariance {
        numerator += c;
    }
    let r = T::count(panel.active_count());
    Ok(VarianceBreakdown {
        mean,
        per_date_variance_sum: per_date.value(),
        lag_covariance,
        active_count: panel.active_count(),
        total_variance: numerator.value() / (r * r),
    })
}

/// `λ_i = (2(q-i)/q) Σ_t k_{t,t+i} / (n_t n_{t+i})` for `i = 1..q-1`.
pub fn lambda_coefficients<T: Real>(panel: &Panel<T>) -> Vec<T> {
    let q = panel.windows_per_year();
    (1..q)
        .map(|lag| {
            let weight = T::lit(2.0) * overlap_weight::<T>(0, lag, q);
            let mut acc = KahanSum::new();
            for t in 1..=panel.n_dates().saturating_sub(lag) {
                let k = panel.overlap_pairs(t, lag).len();
                if k > 0 {
                    acc += T::count(k) / (T::count(panel.n(t)) * T::count(panel.n(t + lag)));
                }
            }
            weight * acc.value()
        })
        .collect()
}

/// `Σ_{t ∈ R_N} 1/n_t`.
pub fn inverse_count_sum<T: Real>(panel: &Panel<T>) -> T {
    (1..=panel.n_dates())
        .map(|t| inv_count::<T>(panel.n(t)))
        .collect::<KahanSum<T>>()
        .value()
}

/// Closed-form `σ²` for a single grade whose obligors all carry `pd_grade`.
pub fn grade_variance<T: Real>(pd_grade: T, panel: &Panel<T>) -> T {
    let r = T::count(panel.active_count());
    let lambda_sum: T = lambda_coefficients(panel).into_iter().collect::<KahanSum<T>>().value();
    pd_grade * (T::one() - pd_grade) / (r * r) * (inverse_count_sum(panel) + lambda_sum)
}

/// Realized long-run default rate from the panel's default flags.
pub fn realized_lrdr<T: Real>(panel: &Panel<T>) -> Result<T> {
    let mut acc = KahanSum::new();
    for t in 1..=panel.n_dates() {
        let n = panel.n(t);
        if n == 0 {
            continue;
        }
        acc += T::count(panel.default_count(t)?) / T::count(n);
    }
    Ok(acc.value() / T::count(panel.active_count()))
}
