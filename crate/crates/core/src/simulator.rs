//! Monte Carlo panels of overlapping default windows.
//!
//! Each obligor carries i.i.d. default indicators on subperiods of length
//! `1/q` years with hazard `θ = 1 - (1-p)^{1/q}`. The window of date `t`
//! covers subperiods `t, ..., t+q-1` and defaults if any of them fires.
//! Marginals are exact; lagged covariances match the analytic ones to first
//! order in `p`.
//!
//! Randomness is a stateless hash of `(seed, replication, obligor, subperiod)`,
//! so results do not depend on the number of threads.

use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::distribution::{Binomial, ContinuousCDF, Discrete, Normal};

use crate::error::{Error, Result};
use crate::moments::{long_run_mean, long_run_variance_exact};
use crate::portfolio::{build_panel, MasterScale, ObligorRecord, Panel};
use crate::scalar::is_probability;
use crate::sum::KahanSum;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum Persistence {
    /// `k_{t,t+i}` for `i = 1, 2, ...`, the same for every `t`. Missing lags are 0.
    LagCounts(Vec<usize>),
    /// `k_{t,t+i} = floor(r_i · min(n_t, n_{t+i}))`, reduced where the counts cannot be realized.
    Ratios(Vec<f64>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GradeMixture {
    pub master_scale: Vec<f64>,
    pub weights: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum PdSpec {
    Constant(f64),
    /// Each obligor is assigned a grade once, with the given weights.
    Mixture(GradeMixture),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub n_dates: usize,
    pub windows_per_year: usize,
    pub customers_per_date: Vec<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub persistence: Option<Persistence>,
    pub pd: PdSpec,
    pub replications: usize,
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub tail_thresholds: Vec<f64>,
}

impl Scenario {
    /// Constant PD, no persistence.
    pub fn independent(
        customers_per_date: Vec<usize>,
        windows_per_year: usize,
        pd: f64,
        replications: usize,
        seed: u64,
    ) -> Self {
        Self {
            n_dates: customers_per_date.len(),
            windows_per_year,
            customers_per_date,
            persistence: None,
            pd: PdSpec::Constant(pd),
            replications,
            seed,
            tail_thresholds: Vec::new(),
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let s: Scenario = serde_json::from_str(text)?;
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Validation(m));
        if self.n_dates == 0 {
            return bad("scenario needs at least one reference date".into());
        }
        if self.windows_per_year == 0 {
            return bad("windows_per_year must be at least 1".into());
        }
        if self.customers_per_date.len() != self.n_dates {
            return bad(format!(
                "customers_per_date has {} entries, expected {}",
                self.customers_per_date.len(),
                self.n_dates
            ));
        }
        if self.customers_per_date.iter().all(|&n| n == 0) {
            return bad("scenario has no customers".into());
        }
        if self.replications == 0 {
            return bad("replications must be at least 1".into());
        }
        match &self.pd {
            PdSpec::Constant(p) => {
                if !is_probability(*p) {
                    return Err(Error::NotAProbability(*p));
                }
            }
            PdSpec::Mixture(m) => {
                MasterScale::new(m.master_scale.clone())?;
                if m.weights.len() != m.master_scale.len() {
                    return bad("mixture weights and master scale differ in length".into());
                }
                if m.weights.iter().any(|w| !(*w >= 0.0) || !w.is_finite()) {
                    return bad("mixture weights must be non-negative".into());
                }
                let total: f64 = m.weights.iter().sum();
                if (total - 1.0).abs() > 1e-9 {
                    return bad(format!("mixture weights sum to {total}, expected 1"));
                }
            }
        }
        match &self.persistence {
            Some(Persistence::LagCounts(k)) if k.len() >= self.windows_per_year => {
                return bad(format!(
                    "lag_counts has {} entries, at most q-1 = {} allowed",
                    k.len(),
                    self.windows_per_year - 1
                ));
            }
            Some(Persistence::Ratios(r)) => {
                if r.len() >= self.windows_per_year {
                    return bad(format!(
                        "ratios has {} entries, at most q-1 = {} allowed",
                        r.len(),
                        self.windows_per_year - 1
                    ));
                }
                if r.iter().any(|x| !(0.0..=1.0).contains(x)) {
                    return bad("persistence ratios must lie in [0, 1]".into());
                }
            }
            _ => {}
        }
        if self.tail_thresholds.iter().any(|x| !x.is_finite()) {
            return bad("tail thresholds must be finite".into());
        }
        Ok(())
    }
}

/// Subperiod default probability such that `q` subperiods default with probability `p`.
pub fn quarterly_hazard(p: f64, q: usize) -> Result<f64> {
    if !is_probability(p) {
        return Err(Error::NotAProbability(p));
    }
    if q == 0 {
        return Err(Error::Validation("q must be at least 1".into()));
    }
    if q == 1 {
        return Ok(p);
    }
    // 1 - exp(ln(1-p)/q) without cancellation
    Ok(-((-p).ln_1p() / q as f64).exp_m1())
}

#[inline]
fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_4764_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Stateless 64-bit draw for one `(seed, replication, obligor, subperiod)` cell.
#[inline]
pub fn counter_hash(seed: u64, rep: u64, obligor: u64, subperiod: u64) -> u64 {
    splitmix64(splitmix64(splitmix64(splitmix64(seed) ^ rep) ^ obligor) ^ subperiod)
}

#[inline]
fn unit_uniform(bits: u64) -> f64 {
    (bits >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

/// Reserved replication key for per-obligor draws that stay fixed across replications.
const STATIC_REP: u64 = u64::MAX;

/// Date membership with contiguous tenures; obligor `j` is the `j`-th one created.
#[derive(Debug, Clone, PartialEq)]
pub struct Membership {
    pub members: Vec<Vec<u32>>,
    /// Inclusive `(first, last)` dates per obligor.
    pub tenures: Vec<(usize, usize)>,
}

impl Membership {
    pub fn n_obligors(&self) -> usize {
        self.tenures.len()
    }
}

/// Realizes the scenario's date sizes and persistence with contiguous tenures.
///
/// Obligors at date `t` are bucketed by age. Exact ages `1..q-2` come from the
/// previous date's next-younger bucket, the last bucket (age ≥ q-1) from the two
/// oldest ones, and the rest are new. Oldest obligors are kept first.
pub fn build_membership(counts: &[usize], q: usize, persistence: Option<&Persistence>) -> Result<Membership> {
    let n_dates = counts.len();
    let mut tenures: Vec<(usize, usize)> = Vec::new();
    let mut members = Vec::with_capacity(n_dates);
    let fresh = |t: usize, k: usize, tenures: &mut Vec<(usize, usize)>| -> Vec<u32> {
        (0..k)
            .map(|_| {
                tenures.push((t, t));
                (tenures.len() - 1) as u32
            })
            .collect()
    };

    if q == 1 || persistence.is_none() {
        for (i, &n) in counts.iter().enumerate() {
            members.push(fresh(i + 1, n, &mut tenures));
        }
        return Ok(Membership { members, tenures });
    }

    let explicit = matches!(persistence, Some(Persistence::LagCounts(_)));
    let target = |t: usize, lag: usize| -> Result<usize> {
        if lag >= t {
            return Ok(0);
        }
        let (a, b) = (counts[t - lag - 1], counts[t - 1]);
        match persistence {
            Some(Persistence::LagCounts(k)) => {
                let k = k.get(lag - 1).copied().unwrap_or(0);
                if k > a.min(b) {
                    return Err(Error::Persistence(format!(
                        "k_{{{},{}}} = {k} exceeds min(n_{}, n_{}) = {}",
                        t - lag,
                        t,
                        t - lag,
                        t,
                        a.min(b)
                    )));
                }
                Ok(k)
            }
            Some(Persistence::Ratios(r)) => {
                let r = r.get(lag - 1).copied().unwrap_or(0.0);
                Ok((r * a.min(b) as f64).floor() as usize)
            }
            None => Ok(0),
        }
    };

    // buckets[a]: members of exact age a, the last one holding age ≥ q-1
    let mut buckets: Vec<Vec<u32>> = vec![Vec::new(); q];
    for t in 1..=n_dates {
        let n = counts[t - 1];
        let mut s = vec![0usize; q];
        s[0] = n;
        for lag in 1..q {
            let want = target(t, lag)?;
            if want > s[lag - 1] {
                if explicit {
                    return Err(Error::Persistence(format!(
                        "k_{{{},{t}}} = {want} exceeds k_{{{},{t}}} = {}; persisting counts must not increase with the lag",
                        t - lag,
                        t + 1 - lag,
                        s[lag - 1]
                    )));
                }
                s[lag] = s[lag - 1];
            } else {
                s[lag] = want;
            }
        }

        let mut next: Vec<Vec<u32>> = vec![Vec::new(); q];
        let mut kept_above = 0usize;
        for age in (1..q).rev() {
            let want = if age == q - 1 { s[age] } else { s[age] - s[age + 1] };
            let mut source: Vec<u32> = if age == q - 1 && q >= 3 {
                let mut v = buckets[q - 1].clone();
                v.extend_from_slice(&buckets[q - 2]);
                v
            } else if age == q - 1 {
                // q == 2: every previous member is eligible
                let mut v = buckets[1].clone();
                v.extend_from_slice(&buckets[0]);
                v
            } else {
                buckets[age - 1].clone()
            };
            source.sort_unstable();
            let take = if want > source.len() {
                if explicit {
                    return Err(Error::Persistence(format!(
                        "date {t} needs {want} obligors of age {age}{} but only {} are available; \
                         the lag counts cannot be realized with contiguous tenures",
                        if age == q - 1 { "+" } else { "" },
                        source.len()
                    )));
                }
                source.len()
            } else {
                want
            };
            source.truncate(take);
            kept_above += take;
            next[age] = source;
        }
        debug_assert!(kept_above <= n);
        next[0] = fresh(t, n - kept_above, &mut tenures);

        let mut at_t: Vec<u32> = next.iter().flatten().copied().collect();
        at_t.sort_unstable();
        for &j in &at_t {
            tenures[j as usize].1 = t;
        }
        members.push(at_t);
        buckets = next;
    }
    Ok(Membership { members, tenures })
}

/// A scenario with membership and PDs realized, ready for replications.
#[derive(Debug, Clone)]
pub struct Simulation {
    scenario: Scenario,
    membership: Membership,
    obligor_pd: Vec<f64>,
    thresholds: Vec<u64>,
    template: Panel<f64>,
}

fn threshold(theta: f64) -> u64 {
    if theta >= 1.0 {
        u64::MAX
    } else {
        (theta * 18_446_744_073_709_551_616.0) as u64
    }
}

fn obligor_name(j: u32) -> String {
    format!("c{j:010}")
}

impl Simulation {
    pub fn new(scenario: &Scenario) -> Result<Self> {
        scenario.validate()?;
        let q = scenario.windows_per_year;
        let membership = build_membership(&scenario.customers_per_date, q, scenario.persistence.as_ref())?;
        let obligor_pd: Vec<f64> = (0..membership.n_obligors() as u64)
            .map(|j| match &scenario.pd {
                PdSpec::Constant(p) => *p,
                PdSpec::Mixture(m) => {
                    let u = unit_uniform(counter_hash(scenario.seed, STATIC_REP, j, 0));
                    let mut acc = 0.0;
                    for (p, w) in m.master_scale.iter().zip(&m.weights) {
                        acc += w;
                        if u < acc {
                            return *p;
                        }
                    }
                    *m.master_scale.last().expect("validated non-empty")
                }
            })
            .collect();
        let thresholds = obligor_pd
            .iter()
            .map(|&p| quarterly_hazard(p, q).map(threshold))
            .collect::<Result<Vec<_>>>()?;
        let records = membership.members.iter().enumerate().flat_map(|(i, m)| {
            let pd = &obligor_pd;
            m.iter()
                .map(move |&j| ObligorRecord::new(i + 1, obligor_name(j), pd[j as usize], None))
        });
        let template = build_panel(records, scenario.n_dates, q)?;
        Ok(Self {
            scenario: scenario.clone(),
            membership,
            obligor_pd,
            thresholds,
            template,
        })
    }

    pub fn scenario(&self) -> &Scenario {
        &self.scenario
    }

    pub fn membership(&self) -> &Membership {
        &self.membership
    }

    /// Membership and true PDs, without realizations.
    pub fn template(&self) -> &Panel<f64> {
        &self.template
    }

    pub fn obligor_pd(&self, j: u32) -> f64 {
        self.obligor_pd[j as usize]
    }

    /// Calls `f(t)` for every date `t` whose window defaults for obligor `j` in replication `rep`.
    fn for_each_window_default(&self, rep: u64, j: u32, mut f: impl FnMut(usize)) {
        let q = self.scenario.windows_per_year;
        let (first, last) = self.membership.tenures[j as usize];
        let thr = self.thresholds[j as usize];
        let base = splitmix64(splitmix64(splitmix64(self.scenario.seed) ^ rep) ^ j as u64);
        let mut marked = first - 1;
        for u in first..last + q {
            if splitmix64(base ^ u as u64) < thr {
                let from = marked.max(u.saturating_sub(q - 1).max(first) - 1) + 1;
                let to = u.min(last);
                for t in from..=to {
                    f(t);
                }
                marked = marked.max(to);
            }
        }
    }

    /// Default counts per date for one replication.
    pub fn default_counts(&self, rep: u64) -> Vec<u32> {
        let mut d = vec![0u32; self.scenario.n_dates];
        for j in 0..self.membership.n_obligors() as u32 {
            self.for_each_window_default(rep, j, |t| d[t - 1] += 1);
        }
        d
    }

    /// Realized long-run default rate of one replication.
    pub fn lrdr(&self, rep: u64) -> f64 {
        let d = self.default_counts(rep);
        let mut acc = KahanSum::new();
        let mut active = 0usize;
        for (dt, &n) in d.iter().zip(&self.scenario.customers_per_date) {
            if n > 0 {
                active += 1;
                acc += *dt as f64 / n as f64;
            }
        }
        acc.value() / active as f64
    }

    pub fn panel(&self, rep: u64) -> Result<Panel<f64>> {
        let mut flags: Vec<Vec<bool>> = self.membership.members.iter().map(|m| vec![false; m.len()]).collect();
        for j in 0..self.membership.n_obligors() as u32 {
            self.for_each_window_default(rep, j, |t| {
                let pos = self.membership.members[t - 1]
                    .binary_search(&j)
                    .expect("obligor present during its tenure");
                flags[t - 1][pos] = true;
            });
        }
        self.template.with_default_flags(flags)
    }

    /// Analytic mean and variance of the long-run default rate under the true PDs.
    pub fn analytic_moments(&self) -> Result<(f64, f64)> {
        let pds = self.template.estimates();
        let mean = long_run_mean(&self.template, &pds)?;
        let var = long_run_variance_exact(&self.template, &pds)?.total_variance;
        Ok((mean, var))
    }

    pub fn samples(&self) -> Vec<f64> {
        (0..self.scenario.replications as u64)
            .into_par_iter()
            .map(|r| self.lrdr(r))
            .collect()
    }

    pub fn run(&self) -> Result<SimulationSummary> {
        let (mean, var) = self.analytic_moments()?;
        summarize(self.samples(), mean, var, &self.scenario.tail_thresholds)
    }
}

/// One realized panel of the scenario, with default flags.
pub fn simulate_panel(scenario: &Scenario, rep: u64) -> Result<Panel<f64>> {
    Simulation::new(scenario)?.panel(rep)
}

pub fn simulate_lrdr(scenario: &Scenario) -> Result<SimulationSummary> {
    Simulation::new(scenario)?.run()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TailProbability {
    pub threshold: f64,
    /// Empirical `P(Z ≥ threshold)`.
    pub probability: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulationSummary {
    #[serde(skip)]
    pub samples: Vec<f64>,
    pub replications: usize,
    pub analytic_mean: f64,
    pub analytic_variance: f64,
    pub empirical_mean: f64,
    pub empirical_variance: f64,
    pub ks_distance: f64,
    pub tail_probs: Vec<TailProbability>,
}

impl SimulationSummary {
    pub fn variance_relative_error(&self) -> f64 {
        (self.empirical_variance - self.analytic_variance).abs() / self.analytic_variance
    }
}

/// Sample moments, KS distance to `Normal(mean, variance)` and tail frequencies.
pub fn summarize(samples: Vec<f64>, mean: f64, variance: f64, thresholds: &[f64]) -> Result<SimulationSummary> {
    if samples.is_empty() {
        return Err(Error::Validation("no samples".into()));
    }
    let n = samples.len();
    let emp_mean = samples.iter().copied().collect::<KahanSum<f64>>().value() / n as f64;
    let emp_var = if n > 1 {
        samples
            .iter()
            .map(|x| (x - emp_mean).powi(2))
            .collect::<KahanSum<f64>>()
            .value()
            / (n - 1) as f64
    } else {
        0.0
    };
    let mut sorted = samples.clone();
    sorted.sort_by(f64::total_cmp);
    let ks = ks_distance(&sorted, mean, variance)?;
    let tail_probs = thresholds
        .iter()
        .map(|&c| TailProbability {
            threshold: c,
            probability: sorted.iter().filter(|&&x| x >= c).count() as f64 / n as f64,
        })
        .collect();
    Ok(SimulationSummary {
        samples,
        replications: n,
        analytic_mean: mean,
        analytic_variance: variance,
        empirical_mean: emp_mean,
        empirical_variance: emp_var,
        ks_distance: ks,
        tail_probs,
    })
}

/// `sup_x |F_n(x) - Φ((x-μ)/σ)|` over sorted samples, both sides of every jump.
pub fn ks_distance(sorted: &[f64], mean: f64, variance: f64) -> Result<f64> {
    if !(variance > 0.0) {
        return Err(Error::Validation(format!(
            "normal reference needs positive variance, got {variance}"
        )));
    }
    let normal = Normal::new(mean, variance.sqrt()).map_err(|e| Error::Validation(e.to_string()))?;
    let n = sorted.len() as f64;
    let mut d: f64 = 0.0;
    for (i, &x) in sorted.iter().enumerate() {
        let f = normal.cdf(x);
        d = d.max((i + 1) as f64 / n - f).max(f - i as f64 / n);
    }
    Ok(d.clamp(0.0, 1.0))
}

/// Points `(x, empirical CDF, normal CDF)` on an even grid spanning the samples.
pub fn cdf_curve(summary: &SimulationSummary, points: usize) -> Result<Vec<(f64, f64, f64)>> {
    let normal = Normal::new(summary.analytic_mean, summary.analytic_variance.sqrt())
        .map_err(|e| Error::Validation(e.to_string()))?;
    let mut sorted = summary.samples.clone();
    sorted.sort_by(f64::total_cmp);
    let (lo, hi) = match (sorted.first(), sorted.last()) {
        (Some(&a), Some(&b)) => (a, b),
        _ => return Err(Error::Validation("no samples".into())),
    };
    let sd = summary.analytic_variance.sqrt();
    let (lo, hi) = (
        lo.min(summary.analytic_mean - 4.0 * sd),
        hi.max(summary.analytic_mean + 4.0 * sd),
    );
    let points = points.max(2);
    let n = sorted.len() as f64;
    Ok((0..points)
        .map(|i| {
            let x = lo + (hi - lo) * i as f64 / (points - 1) as f64;
            let below = sorted.partition_point(|&s| s <= x) as f64;
            (x, below / n, normal.cdf(x))
        })
        .collect())
}

/// Single-column CSV of samples, header `lrdr`.
pub fn write_samples_csv<W: Write>(samples: &[f64], mut writer: W) -> Result<()> {
    writeln!(writer, "lrdr")?;
    for x in samples {
        writeln!(writer, "{x:e}")?;
    }
    Ok(())
}

/// Exact law of `Z` for `q = 1`, where the dates are independent binomials:
/// ascending `(value, probability)` pairs.
///
/// Support points closer than `1e-13` are merged. Fails when the support would
/// exceed `max_support` points.
pub fn exact_distribution_q1(counts: &[usize], p: f64, max_support: usize) -> Result<Vec<(f64, f64)>> {
    if !is_probability(p) {
        return Err(Error::NotAProbability(p));
    }
    let active: Vec<usize> = counts.iter().copied().filter(|&n| n > 0).collect();
    if active.is_empty() {
        return Err(Error::Validation("no active dates".into()));
    }
    let r = active.len() as f64;
    let mut dist: Vec<(f64, f64)> = vec![(0.0, 1.0)];
    for &n in &active {
        let bin = Binomial::new(p, n as u64).map_err(|e| Error::Validation(e.to_string()))?;
        let step: Vec<(f64, f64)> = (0..=n as u64)
            .map(|d| (d as f64 / (n as f64 * r), bin.pmf(d)))
            .filter(|&(_, w)| w > 0.0)
            .collect();
        if dist.len().saturating_mul(step.len()) > max_support.saturating_mul(256) {
            return Err(Error::Validation("exact enumeration support too large".into()));
        }
        let mut next: Vec<(f64, f64)> = Vec::with_capacity(dist.len() * step.len());
        for &(z, w) in &dist {
            for &(dz, dw) in &step {
                next.push((z + dz, w * dw));
            }
        }
        next.sort_by(|a, b| a.0.total_cmp(&b.0));
        let mut merged: Vec<(f64, f64)> = Vec::with_capacity(next.len());
        for (z, w) in next {
            match merged.last_mut() {
                Some(last) if z - last.0 < 1e-13 => last.1 += w,
                _ => merged.push((z, w)),
            }
        }
        if merged.len() > max_support {
            return Err(Error::Validation("exact enumeration support too large".into()));
        }
        dist = merged;
    }
    Ok(dist)
}

/// Exact `P(Z ≥ threshold)` for `q = 1`; see [`exact_distribution_q1`].
pub fn exact_tail_probability_q1(counts: &[usize], p: f64, threshold: f64, max_support: usize) -> Result<f64> {
    Ok(exact_distribution_q1(counts, p, max_support)?
        .iter()
        .filter(|&&(z, _)| z >= threshold - 1e-12)
        .map(|&(_, w)| w)
        .collect::<KahanSum<f64>>()
        .value())
}

/// Sup-norm distance between a discrete law (ascending atoms) and `Normal(mean, variance)`.
pub fn ks_distance_discrete(atoms: &[(f64, f64)], mean: f64, variance: f64) -> Result<f64> {
    if !(variance > 0.0) {
        return Err(Error::Validation(format!(
            "normal reference needs positive variance, got {variance}"
        )));
    }
    let normal = Normal::new(mean, variance.sqrt()).map_err(|e| Error::Validation(e.to_string()))?;
    let mut below: KahanSum<f64> = KahanSum::new();
    let mut d: f64 = 0.0;
    for &(z, w) in atoms {
        let f = normal.cdf(z);
        d = d.max((f - below.value()).abs());
        below += w;
        d = d.max((below.value() - f).abs());
    }
    Ok(d.clamp(0.0, 1.0))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HeuristicCheck {
    pub condition: String,
    pub value: f64,
    pub passed: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceReport {
    pub passed: bool,
    /// Active reference dates (`n_t > 0`).
    pub n_active: usize,
    pub n_min: usize,
    pub n_max: usize,
    pub checks: Vec<HeuristicCheck>,
}

impl ConvergenceReport {
    /// `"<condition> violated"` for every failing check.
    pub fn reasons(&self) -> Vec<String> {
        self.checks
            .iter()
            .filter(|c| !c.passed)
            .map(|c| format!("{} violated", c.condition))
            .collect()
    }
}

/// Rule of thumb for the normal approximation: `N ≥ 30`, `n_min ≥ 2`, `n_min/n_max ≥ 1/10`,
/// all over active dates.
pub fn convergence_heuristic(counts: &[usize]) -> ConvergenceReport {
    let active: Vec<usize> = counts.iter().copied().filter(|&n| n > 0).collect();
    let n_min = active.iter().copied().min().unwrap_or(0);
    let n_max = active.iter().copied().max().unwrap_or(0);
    let ratio = if n_max == 0 { 0.0 } else { n_min as f64 / n_max as f64 };
    let checks = vec![
        HeuristicCheck {
            condition: "N ≥ 30".into(),
            value: active.len() as f64,
            passed: active.len() >= 30,
        },
        HeuristicCheck {
            condition: "n_min ≥ 2".into(),
            value: n_min as f64,
            passed: n_min >= 2,
        },
        HeuristicCheck {
            condition: "n_min/n_max ≥ 1/10".into(),
            value: ratio,
            // integer form avoids 0.1 rounding at the boundary
            passed: n_max > 0 && 10 * n_min >= n_max,
        },
    ];
    ConvergenceReport {
        passed: checks.iter().all(|c| c.passed),
        n_active: active.len(),
        n_min,
        n_max,
        checks,
    }
}
