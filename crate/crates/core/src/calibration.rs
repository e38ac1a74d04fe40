//! Two-sided calibration test of the long-run default rate.
//!
//! The test statistic is approximately normal, so the acceptance range is
//! `[center + Φ⁻¹(α/2) σ, center + Φ⁻¹(1-α/2) σ]`. What differs between the
//! grade and portfolio variants is the center and where `σ` comes from.

// AS241 coefficients are kept as published
#![allow(clippy::excessive_precision)]

use serde::{Deserialize, Serialize};

use crate::bounds::{linearization, pd_bar, sigma_alt, sigma_min, AltBound, Linearization, LinearizationMode};
use crate::error::{Error, Result};
use crate::moments::{grade_variance, inverse_count_sum, lambda_coefficients, realized_lrdr};
use crate::portfolio::{MasterScale, Panel, PdTable};
use crate::scalar::{is_probability, Real};
use crate::sum::KahanSum;

// AS 241 (PPND16) rational approximations, coefficients from degree 0 upwards.
const CENTRAL_NUM: [f64; 8] = [
    3.387132872796366608,
    133.14166789178437745,
    1971.5909503065514427,
    13731.693765509461125,
    45921.953931549871457,
    67265.770927008700853,
    33430.575583588128105,
    2509.0809287301226727,
];
const CENTRAL_DEN: [f64; 8] = [
    1.0,
    42.313330701600911252,
    687.1870074920579083,
    5394.1960214247511077,
    21213.794301586595867,
    39307.89580009271061,
    28729.085735721942674,
    5226.495278852545925,
];
const NEAR_NUM: [f64; 8] = [
    1.42343711074968357734,
    4.6303378461565452959,
    5.7694972214606914055,
    3.64784832476320460504,
    1.27045825245236838258,
    0.24178072517745061177,
    0.0227238449892691845833,
    7.7454501427834140764e-4,
];
const NEAR_DEN: [f64; 8] = [
    1.0,
    2.05319162663775882187,
    1.6763848301838038494,
    0.68976733498510000455,
    0.14810397642748007459,
    0.0151986665636164571966,
    5.475938084995344946e-4,
    1.05075007164441684324e-9,
];
const FAR_NUM: [f64; 8] = [
    6.6579046435011037772,
    5.4637849111641143699,
    1.7848265399172913358,
    0.29656057182850489123,
    0.026532189526576123093,
    0.0012426609473880784386,
    2.71155556874348757815e-5,
    2.01033439929228813265e-7,
];
const FAR_DEN: [f64; 8] = [
    1.0,
    0.59983220655588793769,
    0.13692988092273580531,
    0.0148753612908506148525,
    7.868691311456132591e-4,
    1.8463183175100546818e-5,
    1.4215117583164458887e-7,
    2.04426310338993978564e-15,
];

fn horner<T: Real>(coeffs: &[f64], x: T) -> T {
    coeffs.iter().rev().fold(T::zero(), |acc, &c| acc * x + T::lit(c))
}

/// Inverse of the standard normal CDF (Wichura's AS 241).
pub fn normal_quantile<T: Real>(p: T) -> Result<T> {
    if !is_probability(p) {
        return Err(Error::NotAProbability(p.as_f64()));
    }
    let q = p - T::lit(0.5);
    if q.abs() <= T::lit(0.425) {
        let r = T::lit(0.180625) - q * q;
        return Ok(q * horner(&CENTRAL_NUM, r) / horner(&CENTRAL_DEN, r));
    }
    let tail = if q < T::zero() { p } else { T::one() - p };
    let r = (-tail.ln()).sqrt();
    let val = if r <= T::lit(5.0) {
        let r = r - T::lit(1.6);
        horner(&NEAR_NUM, r) / horner(&NEAR_DEN, r)
    } else {
        let r = r - T::lit(5.0);
        horner(&FAR_NUM, r) / horner(&FAR_DEN, r)
    };
    Ok(if q < T::zero() { -val } else { val })
}

/// Acceptance bounds, raw and clamped to `[0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AcceptanceRange<T> {
    pub lower_raw: T,
    pub upper_raw: T,
    pub lower: T,
    pub upper: T,
}

impl<T: Real> AcceptanceRange<T> {
    pub fn contains(&self, x: T) -> bool {
        x >= self.lower_raw && x <= self.upper_raw
    }

    pub fn width(&self) -> T {
        self.upper_raw - self.lower_raw
    }
}

pub fn acceptance_range<T: Real>(center: T, sigma: T, alpha: T) -> Result<AcceptanceRange<T>> {
    if !(sigma >= T::zero()) {
        return Err(Error::Validation(format!("sigma must be non-negative, got {sigma}")));
    }
    let half = alpha / T::lit(2.0);
    let lo = normal_quantile(half)?;
    let hi = normal_quantile(T::one() - half)?;
    let lower_raw = center + lo * sigma;
    let upper_raw = center + hi * sigma;
    let clamp = |x: T| x.max(T::zero()).min(T::one());
    Ok(AcceptanceRange {
        lower_raw,
        upper_raw,
        lower: clamp(lower_raw),
        upper: clamp(upper_raw),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    /// Closed-form variance of a homogeneous grade.
    Grade,
    LpIdentity,
    LpPdMax,
    LpPdBar,
    AltBound,
}

impl Method {
    pub fn name(self) -> &'static str {
        match self {
            Method::Grade => "grade",
            Method::LpIdentity => "lp_identity",
            Method::LpPdMax => "lp_pdmax",
            Method::LpPdBar => "lp_pdbar",
            Method::AltBound => "alt_bound",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TestConfig<T> {
    pub alpha: T,
    pub method: Method,
    pub pd_min: Option<T>,
    pub pd_max: Option<T>,
    /// Source for `pd_min`/`pd_max` when those are unset, and for `PD-bar`.
    pub master_scale: Option<MasterScale<T>>,
    pub n_worst: Option<usize>,
    pub gamma: Option<T>,
    pub mu_old: Option<T>,
}

impl<T: Real> TestConfig<T> {
    pub fn new(alpha: T, method: Method) -> Self {
        Self {
            alpha,
            method,
            pd_min: None,
            pd_max: None,
            master_scale: None,
            n_worst: None,
            gamma: None,
            mu_old: None,
        }
    }

    pub fn with_pd_range(mut self, pd_min: T, pd_max: T) -> Self {
        self.pd_min = Some(pd_min);
        self.pd_max = Some(pd_max);
        self
    }

    pub fn with_master_scale(mut self, scale: MasterScale<T>) -> Self {
        self.master_scale = Some(scale);
        self
    }

    pub fn with_n_worst(mut self, n_worst: usize) -> Self {
        self.n_worst = Some(n_worst);
        self
    }

    pub fn with_alt_params(mut self, gamma: T, mu_old: T) -> Self {
        self.gamma = Some(gamma);
        self.mu_old = Some(mu_old);
        self
    }

    fn check_alpha(&self) -> Result<()> {
        if is_probability(self.alpha) {
            Ok(())
        } else {
            Err(Error::Validation(format!(
                "significance level {} outside (0, 1)",
                self.alpha
            )))
        }
    }

    fn pd_min(&self) -> Result<T> {
        self.pd_min
            .or_else(|| self.master_scale.as_ref().map(MasterScale::pd_min))
            .ok_or(Error::MissingParameter("pd_min"))
    }

    fn pd_max(&self) -> Result<T> {
        self.pd_max
            .or_else(|| self.master_scale.as_ref().map(MasterScale::pd_max))
            .ok_or(Error::MissingParameter("pd_max"))
    }

    /// The linearization an LP method uses, or `None` for the other methods.
    pub fn linearization(&self, q: usize) -> Result<Option<Linearization<T>>> {
        let lin = match self.method {
            Method::LpIdentity => linearization(LinearizationMode::Identity, self.pd_min()?, self.pd_max()?, q)?,
            Method::LpPdMax => linearization(LinearizationMode::PdMax, self.pd_min()?, self.pd_max()?, q)?,
            Method::LpPdBar => {
                let scale = self
                    .master_scale
                    .as_ref()
                    .ok_or(Error::MissingParameter("master_scale"))?;
                let n_worst = self.n_worst.ok_or(Error::MissingParameter("n_worst"))?;
                linearization(LinearizationMode::PdBar, self.pd_min()?, pd_bar(scale, n_worst)?, q)?
            }
            Method::Grade | Method::AltBound => return Ok(None),
        };
        Ok(Some(lin))
    }
}

#[derive(Debug, Clone)]
pub enum Diagnostics<T> {
    Grade {
        /// `Σ_{t ∈ R_N} 1/n_t`.
        inverse_count_sum: T,
        lambdas: Vec<T>,
        active_count: usize,
    },
    Lp {
        linearization: Linearization<T>,
        /// `C`.
        constant: T,
        /// `m(μ)`.
        minimal_value: T,
        boundary_value: Option<T>,
        at_lower: usize,
        at_upper: usize,
        interior: usize,
        /// The minimizing PD assignment `p(μ)`.
        minimizer: PdTable<T>,
    },
    Alt(AltBound<T>),
}

#[derive(Debug, Clone)]
pub struct TestResult<T> {
    pub method: Method,
    pub center: T,
    pub sigma: T,
    pub range: AcceptanceRange<T>,
    pub lrdr: T,
    pub passed: bool,
    pub diagnostics: Diagnostics<T>,
}

impl<T: Real> TestResult<T> {
    pub fn variance(&self) -> T {
        self.sigma * self.sigma
    }
}

fn grade_diagnostics<T: Real>(panel: &Panel<T>) -> Diagnostics<T> {
    Diagnostics::Grade {
        inverse_count_sum: inverse_count_sum(panel),
        lambdas: lambda_coefficients(panel),
        active_count: panel.active_count(),
    }
}

fn finish<T: Real>(
    method: Method,
    center: T,
    variance: T,
    lrdr: T,
    alpha: T,
    diagnostics: Diagnostics<T>,
) -> Result<TestResult<T>> {
    let sigma = variance.max(T::zero()).sqrt();
    let range = acceptance_range(center, sigma, alpha)?;
    Ok(TestResult {
        method,
        center,
        sigma,
        range,
        lrdr,
        passed: range.contains(lrdr),
        diagnostics,
    })
}

/// Grade-level test of `H_0: μ = pd_grade`.
pub fn grade_test<T: Real>(panel: &Panel<T>, pd_grade: T, config: &TestConfig<T>) -> Result<TestResult<T>> {
    config.check_alpha()?;
    if !is_probability(pd_grade) {
        return Err(Error::NotAProbability(pd_grade.as_f64()));
    }
    let lrdr = realized_lrdr(panel)?;
    let variance = grade_variance(pd_grade, panel);
    finish(
        Method::Grade,
        pd_grade,
        variance,
        lrdr,
        config.alpha,
        grade_diagnostics(panel),
    )
}

/// Long-run central tendency: mean over all dates of the mean PD estimate.
pub fn long_run_central_tendency<T: Real>(panel: &Panel<T>) -> Result<T> {
    let mut acc = KahanSum::new();
    for t in 1..=panel.n_dates() {
        let n = panel.n(t);
        if n == 0 {
            return Err(Error::EmptyDate(t));
        }
        let s: KahanSum<T> = panel.pd_estimates(t).iter().copied().collect();
        acc += s.value() / T::count(n);
    }
    Ok(acc.value() / T::count(panel.n_dates()))
}

/// Portfolio-level test of `H_0: μ = LRCT`.
pub fn portfolio_test<T: Real>(panel: &Panel<T>, config: &TestConfig<T>) -> Result<TestResult<T>> {
    config.check_alpha()?;
    let lrct = long_run_central_tendency(panel)?;
    let lrdr = realized_lrdr(panel)?;
    let method = config.method;
    match method {
        Method::Grade => {
            let variance = grade_variance(lrct, panel);
            finish(method, lrct, variance, lrdr, config.alpha, grade_diagnostics(panel))
        }
        Method::AltBound => {
            let gamma = config.gamma.ok_or(Error::MissingParameter("gamma"))?;
            let mu_old = config.mu_old.ok_or(Error::MissingParameter("mu_old"))?;
            let pd_max = config.pd_max()?;
            if lrct > pd_max {
                return Err(Error::Infeasible {
                    target: lrct.as_f64(),
                    lower: 0.0,
                    upper: pd_max.as_f64(),
                });
            }
            let alt = sigma_alt(panel, lrct, pd_max, gamma, mu_old)?;
            finish(method, lrct, alt.variance, lrdr, config.alpha, Diagnostics::Alt(alt))
        }
        Method::LpIdentity | Method::LpPdMax | Method::LpPdBar => {
            let lin = config
                .linearization(panel.windows_per_year())?
                .expect("LP methods always linearize");
            let sm = sigma_min(panel, &lin, lrct)?;
            let (at_lower, at_upper, interior) = sm.solution.histogram(lin.pd_lo, lin.pd_hi);
            let diagnostics = Diagnostics::Lp {
                constant: sm.constant,
                minimal_value: sm.minimal_value,
                boundary_value: sm.solution.boundary_value,
                at_lower,
                at_upper,
                interior,
                linearization: lin,
                minimizer: sm.assignment,
            };
            finish(method, lrct, sm.variance, lrdr, config.alpha, diagnostics)
        }
    }
}
