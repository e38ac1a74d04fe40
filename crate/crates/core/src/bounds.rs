//! Conservative lower bounds for the variance of the long-run default rate
//! on portfolio level.
//!
//! Under the portfolio null only the mean PD is fixed, so the exact variance
//! is unknown. Two bounds are provided:
//!
//! * [`sigma_min`]: each concave `x(1-x)` term is replaced by an affine
//!   minorant, which turns "smallest variance compatible with the null mean"
//!   into a linear program with box constraints and one equality. That LP is
//!   solved exactly by a sort-and-scan ([`greedy_minimize`]).
//! * [`sigma_alt`]: a closed form built from portfolio-wide minima, with two
//!   extra parameters `γ` and `μ_old`.

use std::cmp::Ordering;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::portfolio::{MasterScale, Panel, PdTable};
use crate::scalar::{is_probability, Real};
use crate::sum::KahanSum;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LinearizationMode {
    /// Chord of `x(1-x)` through `PD_min` and `PD_max`.
    Identity,
    /// `x(1 - PD_max)`: the earlier-date PD replaced by its worst case.
    PdMax,
    /// Chord through `PD_min` and the mean of the worst grades.
    PdBar,
}

/// Affine minorants `f_i(x) = α_i x + c_i` of `g_i(x) = ((q-i)/q) x (1-x)`, `i = 0..q-1`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Linearization<T> {
    pub mode: LinearizationMode,
    pub alphas: Vec<T>,
    pub constants: Vec<T>,
    pub pd_lo: T,
    pub pd_hi: T,
}

impl<T: Real> Linearization<T> {
    pub fn q(&self) -> usize {
        self.alphas.len()
    }

    /// `f_i(x)`.
    pub fn eval(&self, lag: usize, x: T) -> T {
        self.alphas[lag] * x + self.constants[lag]
    }
}

/// Coefficients of the affine minorants. `pd_hi` is `PD_max`, or `PD-bar`
/// in [`LinearizationMode::PdBar`].
pub fn linearization<T: Real>(mode: LinearizationMode, pd_min: T, pd_hi: T, q: usize) -> Result<Linearization<T>> {
    if q == 0 {
        return Err(Error::Validation("windows per year must be at least 1".into()));
    }
    if !is_probability(pd_min) || !is_probability(pd_hi) || pd_min >= pd_hi {
        return Err(Error::Validation(format!(
            "linearization needs 0 < pd_min < pd_max < 1 (got {pd_min}, {pd_hi})"
        )));
    }
    let scale = |i: usize| T::count(q - i) / T::count(q);
    let (alphas, constants) = match mode {
        LinearizationMode::Identity | LinearizationMode::PdBar => (0..q)
            .map(|i| (scale(i) * (T::one() - pd_hi - pd_min), scale(i) * pd_min * pd_hi))
            .unzip(),
        LinearizationMode::PdMax => (0..q).map(|i| (scale(i) * (T::one() - pd_hi), T::zero())).unzip(),
    };
    Ok(Linearization {
        mode,
        alphas,
        constants,
        pd_lo: pd_min,
        pd_hi,
    })
}

/// Mean PD of the `n_worst` worst grades of the master scale.
pub fn pd_bar<T: Real>(scale: &MasterScale<T>, n_worst: usize) -> Result<T> {
    let m = scale.len();
    if n_worst == 0 || n_worst > m {
        return Err(Error::Validation(format!("n_worst must lie in 1..={m}, got {n_worst}")));
    }
    let sum: KahanSum<T> = scale.grades()[m - n_worst..].iter().copied().collect();
    Ok(sum.value() / T::count(n_worst))
}

/// `minimize Σ α_i x_i` subject to `Σ β_i x_i = m`, `lower <= x_i <= upper`.
#[derive(Debug, Clone, PartialEq)]
pub struct LpProblem<T> {
    pub alphas: Vec<T>,
    pub betas: Vec<T>,
    pub target_mean: T,
    pub lower: T,
    pub upper: T,
    /// Constant added to the objective by the caller (`C` for panel problems).
    pub constant: T,
    /// `(date, position in Λ_date)` of each variable, for problems built from a panel.
    pub keys: Vec<(usize, u32)>,
}

impl<T: Real> LpProblem<T> {
    pub fn new(alphas: Vec<T>, betas: Vec<T>, target_mean: T, lower: T, upper: T) -> Result<Self> {
        let p = Self {
            alphas,
            betas,
            target_mean,
            lower,
            upper,
            constant: T::zero(),
            keys: Vec::new(),
        };
        p.validate()?;
        Ok(p)
    }

    fn validate(&self) -> Result<()> {
        if self.alphas.len() != self.betas.len() || self.alphas.is_empty() {
            return Err(Error::Validation(
                "LP needs matching, non-empty alpha and beta vectors".into(),
            ));
        }
        if self.betas.iter().any(|&b| !(b > T::zero()) || !b.is_finite()) {
            return Err(Error::Validation("LP weights beta must be positive".into()));
        }
        if self.alphas.iter().any(|&a| !(a >= T::zero()) || !a.is_finite()) {
            return Err(Error::Validation("LP coefficients alpha must be non-negative".into()));
        }
        if !(self.lower < self.upper) {
            return Err(Error::Validation("LP box needs lower < upper".into()));
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.alphas.len()
    }

    pub fn is_empty(&self) -> bool {
        self.alphas.is_empty()
    }

    /// `[lower Σβ, upper Σβ]`.
    pub fn feasible_interval(&self) -> (T, T) {
        let total: T = self.betas.iter().copied().collect::<KahanSum<T>>().value();
        (self.lower * total, self.upper * total)
    }
}

/// Minimizer of an [`LpProblem`]: every variable at a bound except at most one.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LpSolution<T> {
    /// Values in the problem's variable order.
    pub assignment: Vec<T>,
    /// `Σ α_i x_i` at the minimizer, without the problem constant.
    pub minimal_value: T,
    /// 0-based position `k_0` of the boundary variable in descending-ratio order.
    pub boundary_position: Option<usize>,
    /// Original index of the boundary variable.
    pub boundary_index: Option<usize>,
    pub boundary_value: Option<T>,
}

impl<T: Real> LpSolution<T> {
    /// Counts of variables at the lower bound, at the upper bound, and strictly between.
    pub fn histogram(&self, lower: T, upper: T) -> (usize, usize, usize) {
        self.assignment.iter().fold((0, 0, 0), |(lo, hi, mid), &x| {
            if x <= lower {
                (lo + 1, hi, mid)
            } else if x >= upper {
                (lo, hi + 1, mid)
            } else {
                (lo, hi, mid + 1)
            }
        })
    }
}

fn ratio_order<T: Real>(alphas: &[T], betas: &[T], a: usize, b: usize) -> Ordering {
    // α_a/β_a vs α_b/β_b by cross-multiplication; descending, then by index.
    let lhs = alphas[a] * betas[b];
    let rhs = alphas[b] * betas[a];
    match rhs.partial_cmp(&lhs) {
        Some(Ordering::Equal) | None => a.cmp(&b),
        Some(o) => o,
    }
}

/// Exact minimizer of the box-constrained LP with one equality constraint.
///
/// Variables with the largest `α/β` are pushed to the lower bound first;
/// the rest sit at the upper bound, with a single variable absorbing the
/// remainder of the equality constraint.
pub fn greedy_minimize<T: Real>(problem: &LpProblem<T>) -> Result<LpSolution<T>> {
    problem.validate()?;
    let n = problem.len();
    let (lower, upper) = (problem.lower, problem.upper);
    let m = problem.target_mean;

    let (lo_total, hi_total) = problem.feasible_interval();
    let slack = T::lit(1e-12) * hi_total.abs().max(T::min_positive_value());
    if m < lo_total - slack || m > hi_total + slack {
        return Err(Error::Infeasible {
            target: m.as_f64(),
            lower: lo_total.as_f64(),
            upper: hi_total.as_f64(),
        });
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| ratio_order(&problem.alphas, &problem.betas, a, b));

    // prefix[k] = Σ_{j<k} β_(j); S(k) = lower·prefix[k] + upper·(total - prefix[k]) is non-increasing.
    let mut prefix = Vec::with_capacity(n + 1);
    let mut acc = KahanSum::new();
    prefix.push(T::zero());
    for &i in &order {
        acc += problem.betas[i];
        prefix.push(acc.value());
    }
    let total = prefix[n];
    let s = |k: usize| lower * prefix[k] + upper * (total - prefix[k]);

    // k_0 = max{k : S(k) >= m}; binary search on the monotone S.
    let (mut lo, mut hi) = (0usize, n);
    if s(0) < m {
        hi = 0;
    }
    while lo < hi {
        let mid = (lo + hi).div_ceil(2);
        if s(mid) >= m {
            lo = mid;
        } else {
            hi = mid - 1;
        }
    }
    let k0 = lo;

    let mut assignment = vec![upper; n];
    for &i in &order[..k0] {
        assignment[i] = lower;
    }
    let (boundary_position, boundary_index, boundary_value) = if k0 < n {
        let b = order[k0];
        let rest = m - lower * prefix[k0] - upper * (total - prefix[k0 + 1]);
        let value = (rest / problem.betas[b]).max(lower).min(upper);
        assignment[b] = value;
        (Some(k0), Some(b), Some(value))
    } else {
        (None, None, None)
    };

    let minimal_value = problem
        .alphas
        .iter()
        .zip(&assignment)
        .map(|(&a, &x)| a * x)
        .collect::<KahanSum<T>>()
        .value();
    Ok(LpSolution {
        assignment,
        minimal_value,
        boundary_position,
        boundary_index,
        boundary_value,
    })
}

fn require_full_panel<T: Real>(panel: &Panel<T>) -> Result<()> {
    match (1..=panel.n_dates()).find(|&t| panel.n(t) == 0) {
        Some(t) => Err(Error::EmptyDate(t)),
        None => Ok(()),
    }
}

/// The linearized variance functional of a panel as an LP in the PDs `p_{t,j}`.
///
/// Variables are ordered by obligor, then by date.
pub fn build_lp<T: Real>(panel: &Panel<T>, lin: &Linearization<T>, mu: T) -> Result<LpProblem<T>> {
    require_full_panel(panel)?;
    let q = panel.windows_per_year();
    if lin.q() != q {
        return Err(Error::Validation(format!(
            "linearization built for q={}, panel has q={q}",
            lin.q()
        )));
    }
    let n_dates = panel.n_dates();
    let nf = |t: usize| T::count(panel.n(t));
    let two = T::lit(2.0);

    // α_{t,j} laid out like the panel's member lists.
    let mut coeff: Vec<Vec<T>> = (1..=n_dates)
        .map(|t| vec![lin.alphas[0] / (nf(t) * nf(t)); panel.n(t)])
        .collect();
    let mut constant = KahanSum::new();
    for t in 1..=n_dates {
        constant += lin.constants[0] / nf(t);
    }
    for lag in 1..q {
        for t in 1..=n_dates.saturating_sub(lag) {
            let s = t + lag;
            let pairs = panel.overlap_pairs(t, lag);
            if pairs.is_empty() {
                continue;
            }
            let bump = two / nf(s) * (lin.alphas[lag] / nf(t));
            for &(_, b) in pairs {
                coeff[s - 1][b as usize] += bump;
            }
            constant += two * lin.constants[lag] * T::count(pairs.len()) / (nf(t) * nf(s));
        }
    }

    let mut keys: Vec<(u32, usize, u32)> = Vec::with_capacity(panel.record_count());
    for t in 1..=n_dates {
        for (pos, &obligor) in panel.members(t).iter().enumerate() {
            keys.push((obligor, t, pos as u32));
        }
    }
    keys.sort_unstable();

    let big_n = T::count(n_dates);
    let mut alphas = Vec::with_capacity(keys.len());
    let mut betas = Vec::with_capacity(keys.len());
    for &(_, t, pos) in &keys {
        alphas.push(coeff[t - 1][pos as usize]);
        betas.push(T::one() / (big_n * nf(t)));
    }
    let problem = LpProblem {
        alphas,
        betas,
        target_mean: mu,
        lower: lin.pd_lo,
        upper: lin.pd_hi,
        constant: constant.value(),
        keys: keys.into_iter().map(|(_, t, pos)| (t, pos)).collect(),
    };
    problem.validate()?;
    Ok(problem)
}

/// `σ_min²(μ)` and the minimizing PD assignment.
#[derive(Debug, Clone)]
pub struct SigmaMin<T> {
    pub variance: T,
    /// `m(μ)`.
    pub minimal_value: T,
    /// `C`.
    pub constant: T,
    pub linearization: Linearization<T>,
    pub solution: LpSolution<T>,
    /// The minimizer `p(μ)` in panel layout.
    pub assignment: PdTable<T>,
}

/// `σ_min²(μ) = (m(μ) + C) / N²`.
pub fn sigma_min<T: Real>(panel: &Panel<T>, lin: &Linearization<T>, mu: T) -> Result<SigmaMin<T>> {
    if mu < lin.pd_lo || mu > lin.pd_hi {
        return Err(Error::Infeasible {
            target: mu.as_f64(),
            lower: lin.pd_lo.as_f64(),
            upper: lin.pd_hi.as_f64(),
        });
    }
    let problem = build_lp(panel, lin, mu)?;
    let solution = greedy_minimize(&problem)?;

    let mut rows: Vec<Vec<T>> = (1..=panel.n_dates()).map(|t| vec![T::zero(); panel.n(t)]).collect();
    for (&(t, pos), &x) in problem.keys.iter().zip(&solution.assignment) {
        rows[t - 1][pos as usize] = x;
    }
    let big_n = T::count(panel.n_dates());
    Ok(SigmaMin {
        variance: (solution.minimal_value + problem.constant) / (big_n * big_n),
        minimal_value: solution.minimal_value,
        constant: problem.constant,
        linearization: lin.clone(),
        solution,
        assignment: PdTable::from_rows(rows),
    })
}

/// Closed-form conservative variance and the quantities it is built from.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AltBound<T> {
    pub variance: T,
    /// Per-obligor variance floor `(1 - PD_max) / n_max`.
    pub c: T,
    pub k1: T,
    pub k2: T,
    pub mu_old: T,
    pub mu_old_bound: T,
}

/// `Σ_i 2 min_t(k_{t,t+i}/(n_t n_{t+i})) ((q-i)/q) (1-PD_max) γ · weight(i)`.
fn min_overlap_sum<T: Real>(panel: &Panel<T>, pd_max: T, gamma: T, weight: impl Fn(usize) -> T) -> T {
    let q = panel.windows_per_year();
    let mut acc = KahanSum::new();
    for lag in 1..q {
        let min_ratio = (1..=panel.n_dates().saturating_sub(lag))
            .map(|t| T::count(panel.overlap_pairs(t, lag).len()) / (T::count(panel.n(t)) * T::count(panel.n(t + lag))))
            .fold(None, |m: Option<T>, r| Some(m.map_or(r, |m| m.min(r))));
        if let Some(r) = min_ratio {
            acc += T::lit(2.0) * r * T::count(q - lag) / T::count(q) * (T::one() - pd_max) * gamma * weight(lag);
        }
    }
    acc.value()
}

fn alt_parts<T: Real>(panel: &Panel<T>, pd_max: T, gamma: T) -> Result<(T, T)> {
    require_full_panel(panel)?;
    if !is_probability(pd_max) {
        return Err(Error::NotAProbability(pd_max.as_f64()));
    }
    if !(gamma > T::zero()) {
        return Err(Error::Validation(format!("gamma must be positive, got {gamma}")));
    }
    let c = (T::one() - pd_max) / T::count(panel.n_max());
    let k1 = min_overlap_sum(panel, pd_max, gamma, |_| T::one());
    Ok((c, k1))
}

/// Largest admissible `μ_old`, `N (c + K_1) μ / ((q-1) K_1)`, capped at 1.
pub fn mu_old_bound<T: Real>(panel: &Panel<T>, mu: T, pd_max: T, gamma: T) -> Result<T> {
    let (c, k1) = alt_parts(panel, pd_max, gamma)?;
    Ok(mu_old_bound_from(panel, mu, c, k1))
}

fn mu_old_bound_from<T: Real>(panel: &Panel<T>, mu: T, c: T, k1: T) -> T {
    let q = panel.windows_per_year();
    if q <= 1 || !(k1 > T::zero()) {
        return T::one();
    }
    let bound = T::count(panel.n_dates()) * (c + k1) * mu / (T::count(q - 1) * k1);
    bound.min(T::one())
}

/// `σ_alt²(μ) = (c + K_1) μ / N - K_2 / N²`.
pub fn sigma_alt<T: Real>(panel: &Panel<T>, mu: T, pd_max: T, gamma: T, mu_old: T) -> Result<AltBound<T>> {
    let (c, k1) = alt_parts(panel, pd_max, gamma)?;
    if !(mu_old >= T::zero()) {
        return Err(Error::Validation(format!("mu_old must be non-negative, got {mu_old}")));
    }
    let bound = mu_old_bound_from(panel, mu, c, k1);
    if mu_old > bound {
        return Err(Error::MuOldTooLarge {
            mu_old: mu_old.as_f64(),
            bound: bound.as_f64(),
        });
    }
    let k2 = min_overlap_sum(panel, pd_max, gamma, |lag| T::count(lag) * mu_old);
    let big_n = T::count(panel.n_dates());
    let variance = (c + k1) * mu / big_n - k2 / (big_n * big_n);
    if !(variance > T::zero()) {
        return Err(Error::VacuousBound(variance.as_f64()));
    }
    Ok(AltBound {
        variance,
        c,
        k1,
        k2,
        mu_old,
        mu_old_bound: bound,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::moments::long_run_variance_exact;
    use crate::portfolio::{build_panel, ObligorRecord};

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol * b.abs().max(1e-300)
    }

    fn full_panel(n_dates: usize, n: usize, q: usize, p: f64) -> Panel<f64> {
        let recs = (1..=n_dates).flat_map(|t| (0..n).map(move |j| ObligorRecord::new(t, format!("o{j:04}"), p, None)));
        build_panel(recs, n_dates, q).unwrap()
    }

    #[test]
    fn identity_coefficients() {
        let lin = linearization(LinearizationMode::Identity, 0.0003, 0.2, 4).unwrap();
        assert!(close(lin.alphas[0], 0.7997, 1e-14));
        assert!(close(lin.constants[0], 6e-5, 1e-12));
        assert!(close(lin.alphas[3], lin.alphas[0] / 4.0, 1e-15));
        assert!(close(lin.constants[3], lin.constants[0] / 4.0, 1e-15));
    }

    #[test]
    fn pd_max_coefficients() {
        let lin = linearization(LinearizationMode::PdMax, 0.0003, 0.2, 4).unwrap();
        assert!(close(lin.alphas[0], 0.8, 1e-15));
        assert_eq!(lin.constants, vec![0.0; 4]);
        assert!(close(lin.alphas[3], 0.2, 1e-15));
    }

    #[test]
    fn linearization_rejects_bad_order() {
        assert!(linearization(LinearizationMode::Identity, 0.2, 0.1, 4).is_err());
        assert!(linearization(LinearizationMode::Identity, 0.0, 0.1, 4).is_err());
        assert!(linearization(LinearizationMode::Identity, 0.1, 0.1, 4).is_err());
        assert!(linearization(LinearizationMode::Identity, 0.01, 0.1, 0).is_err());
    }

    #[test]
    fn identity_minorant_touches_at_endpoints() {
        let (lo, hi) = (0.001, 0.3);
        let lin = linearization(LinearizationMode::Identity, lo, hi, 4).unwrap();
        for i in 0..4 {
            let g = |x: f64| (4 - i) as f64 / 4.0 * x * (1.0 - x);
            assert!(close(lin.eval(i, lo), g(lo), 1e-12));
            assert!(close(lin.eval(i, hi), g(hi), 1e-12));
            for k in 0..=100 {
                let x = lo + (hi - lo) * k as f64 / 100.0;
                assert!(lin.eval(i, x) <= g(x) + 1e-15);
            }
        }
    }

    #[test]
    fn pd_bar_values() {
        let m = MasterScale::new(vec![0.1, 0.2, 0.4]).unwrap();
        assert!(close(pd_bar(&m, 2).unwrap(), 0.3, 1e-15));
        assert_eq!(pd_bar(&m, 1).unwrap(), 0.4);
        assert!(close(pd_bar(&m, 3).unwrap(), 0.7 / 3.0, 1e-15));
        assert!(pd_bar(&m, 0).is_err());
        assert!(pd_bar(&m, 4).is_err());
    }

    #[test]
    fn greedy_three_variable_example() {
        let third = 1.0 / 3.0;
        let p = LpProblem::new(vec![3.0, 2.0, 1.0], vec![third; 3], 0.5, 0.1, 0.9).unwrap();
        let s = greedy_minimize(&p).unwrap();
        assert!(close(s.assignment[0], 0.1, 1e-14));
        assert!(close(s.assignment[1], 0.5, 1e-14));
        assert!(close(s.assignment[2], 0.9, 1e-14));
        assert!(close(s.minimal_value, 2.2, 1e-14));
        assert_eq!(s.boundary_index, Some(1));
        assert_eq!(s.boundary_position, Some(1));
    }

    #[test]
    fn greedy_corners() {
        let betas = vec![0.25; 4];
        let alphas = vec![1.0, 4.0, 2.0, 3.0];
        let lo = LpProblem::new(alphas.clone(), betas.clone(), 0.1, 0.1, 0.9).unwrap();
        let s = greedy_minimize(&lo).unwrap();
        assert!(s.assignment.iter().all(|&x| close(x, 0.1, 1e-12)));
        assert!(close(s.minimal_value, 0.1 * 10.0, 1e-12));

        let hi = LpProblem::new(alphas, betas, 0.9, 0.1, 0.9).unwrap();
        let s = greedy_minimize(&hi).unwrap();
        assert!(s.assignment.iter().all(|&x| close(x, 0.9, 1e-12)));
    }

    #[test]
    fn greedy_reports_infeasible_interval() {
        let p = LpProblem::new(vec![1.0, 1.0], vec![0.5, 0.5], 0.95, 0.1, 0.9).unwrap();
        match greedy_minimize(&p) {
            Err(Error::Infeasible { lower, upper, .. }) => {
                assert!(close(lower, 0.1, 1e-15));
                assert!(close(upper, 0.9, 1e-15));
            }
            other => panic!("expected infeasible, got {other:?}"),
        }
    }

    #[test]
    fn greedy_ties_prefer_smaller_index() {
        let p = LpProblem::new(vec![1.0; 4], vec![0.25; 4], 0.5, 0.1, 0.9).unwrap();
        let s = greedy_minimize(&p).unwrap();
        assert_eq!(s.boundary_index, Some(2));
        assert_eq!(&s.assignment[..2], &[0.1, 0.1]);
        assert_eq!(s.assignment[3], 0.9);
    }

    #[test]
    fn lp_problem_validation() {
        assert!(LpProblem::new(vec![1.0], vec![0.0], 0.5, 0.1, 0.9).is_err());
        assert!(LpProblem::new(vec![-1.0], vec![1.0], 0.5, 0.1, 0.9).is_err());
        assert!(LpProblem::new(vec![1.0], vec![1.0], 0.5, 0.9, 0.1).is_err());
        assert!(LpProblem::<f64>::new(vec![], vec![], 0.5, 0.1, 0.9).is_err());
    }

    #[test]
    fn single_date_lp() {
        let panel = full_panel(1, 5, 1, 0.02);
        let lin = linearization(LinearizationMode::Identity, 0.001, 0.2, 1).unwrap();
        let lp = build_lp(&panel, &lin, 0.02).unwrap();
        for (&a, &b) in lp.alphas.iter().zip(&lp.betas) {
            assert!(close(a, lin.alphas[0] / 25.0, 1e-15));
            assert!(close(b, 0.2, 1e-15));
        }
        assert!(close(lp.constant, lin.constants[0] / 5.0, 1e-15));
    }

    #[test]
    fn persisting_obligor_gains_lag_term() {
        let recs = vec![
            ObligorRecord::new(1, "a", 0.02, None),
            ObligorRecord::new(1, "b", 0.02, None),
            ObligorRecord::new(2, "a", 0.02, None),
            ObligorRecord::new(2, "c", 0.02, None),
            ObligorRecord::new(2, "d", 0.02, None),
        ];
        let panel = build_panel(recs, 2, 4).unwrap();
        let lin = linearization(LinearizationMode::Identity, 0.001, 0.2, 4).unwrap();
        let lp = build_lp(&panel, &lin, 0.02).unwrap();
        let alpha_of = |t: usize, id: &str| {
            let pos = panel
                .members(t)
                .iter()
                .position(|&m| panel.obligor_id(m) == id)
                .unwrap() as u32;
            let v = lp.keys.iter().position(|&k| k == (t, pos)).unwrap();
            lp.alphas[v]
        };
        let base = lin.alphas[0] / 9.0;
        assert!(close(alpha_of(2, "c"), base, 1e-15));
        assert!(close(
            alpha_of(2, "a"),
            base + (2.0 / 3.0) * (lin.alphas[1] / 2.0),
            1e-15
        ));
        assert!(close(alpha_of(1, "a"), lin.alphas[0] / 4.0, 1e-15));
        let expected_c = lin.constants[0] * (0.5 + 1.0 / 3.0) + 2.0 * lin.constants[1] / 6.0;
        assert!(close(lp.constant, expected_c, 1e-14));
    }

    #[test]
    fn no_persistence_constant_has_only_base_term() {
        let recs = (1..=3).flat_map(|t| (0..4).map(move |j| ObligorRecord::new(t, format!("{t}:{j}"), 0.02, None)));
        let panel = build_panel(recs, 3, 4).unwrap();
        let lin = linearization(LinearizationMode::Identity, 0.001, 0.2, 4).unwrap();
        let lp = build_lp(&panel, &lin, 0.02).unwrap();
        assert!(close(lp.constant, lin.constants[0] * 3.0 / 4.0, 1e-15));
    }

    #[test]
    fn build_lp_rejects_empty_date() {
        let recs = vec![
            ObligorRecord::new(1, "a", 0.02, None),
            ObligorRecord::new(3, "a", 0.02, None),
        ];
        let panel = build_panel(recs, 3, 4).unwrap();
        let lin = linearization(LinearizationMode::Identity, 0.001, 0.2, 4).unwrap();
        assert!(matches!(build_lp(&panel, &lin, 0.02), Err(Error::EmptyDate(2))));
    }

    #[test]
    fn annual_sigma_min_is_single_date_sum() {
        let panel = full_panel(3, 4, 1, 0.05);
        let lin = linearization(LinearizationMode::Identity, 0.01, 0.2, 1).unwrap();
        let s = sigma_min(&panel, &lin, 0.05).unwrap();
        // All betas and alphas equal: the objective is α_0/n² · Σp = α_0/n² · N n μ.
        let expected = (lin.alphas[0] / 16.0 * 12.0 * 0.05 + lin.constants[0] * 3.0 / 4.0) / 9.0;
        assert!(close(s.variance, expected, 1e-12));
        let exact = long_run_variance_exact(&panel, &panel.estimates())
            .unwrap()
            .total_variance;
        assert!(s.variance <= exact);
    }

    #[test]
    fn sigma_min_rejects_mean_outside_box() {
        let panel = full_panel(3, 4, 4, 0.05);
        let lin = linearization(LinearizationMode::Identity, 0.01, 0.2, 4).unwrap();
        assert!(matches!(sigma_min(&panel, &lin, 0.3), Err(Error::Infeasible { .. })));
    }

    #[test]
    fn alt_bound_homogeneous_identity() {
        let p = 0.03;
        let panel = full_panel(12, 9, 4, p);
        let exact = long_run_variance_exact(&panel, &panel.estimates())
            .unwrap()
            .total_variance;
        let alt = sigma_alt(&panel, p, p, 1.0, p).unwrap();
        assert!(close(alt.variance, exact, 1e-12), "{} vs {exact}", alt.variance);
    }

    #[test]
    fn alt_bound_annual() {
        let panel = full_panel(5, 10, 1, 0.02);
        let alt = sigma_alt(&panel, 0.02, 0.2, 1.0, 0.2).unwrap();
        assert_eq!(alt.k1, 0.0);
        assert_eq!(alt.k2, 0.0);
        assert!(close(alt.variance, 0.8 / 10.0 * 0.02 / 5.0, 1e-14));
        assert_eq!(mu_old_bound(&panel, 0.02, 0.2, 1.0).unwrap(), 1.0);
    }

    #[test]
    fn alt_bound_zero_persistence_lag_contributes_nothing() {
        let recs = (1..=6).flat_map(|t| (0..5).map(move |j| ObligorRecord::new(t, format!("{t}:{j}"), 0.02, None)));
        let panel = build_panel(recs, 6, 4).unwrap();
        let alt = sigma_alt(&panel, 0.02, 0.2, 1.0, 0.2).unwrap();
        assert_eq!(alt.k1, 0.0);
        assert_eq!(mu_old_bound(&panel, 0.02, 0.2, 1.0).unwrap(), 1.0);
    }

    #[test]
    fn mu_old_bound_hand_value() {
        // N=32, n=50, q=4, all 50 obligors persisting at every lag.
        let panel = full_panel(32, 50, 4, 0.02);
        let (pd_max, gamma, mu): (f64, f64, f64) = (0.2, 1.0, 0.02);
        let c = 0.8 / 50.0;
        let k1 = 2.0 * (0.75 + 0.5 + 0.25) * (50.0 / 2500.0) * 0.8;
        let expected: f64 = (32.0 * (c + k1) * mu / (3.0 * k1)).min(1.0);
        let got = mu_old_bound(&panel, mu, pd_max, gamma).unwrap();
        assert!(close(got, expected, 1e-13));
        assert!(matches!(
            sigma_alt(&panel, mu, pd_max, gamma, expected * 1.01),
            Err(Error::MuOldTooLarge { .. })
        ));
    }

    #[test]
    fn alt_bound_at_admissible_limit_is_degenerate() {
        // With q = 2 every lag term carries the factor q-1, so μ_old at its
        // bound cancels the positive part exactly.
        let panel = full_panel(2, 50, 2, 0.001);
        let bound = mu_old_bound(&panel, 0.001, 0.2, 1.0).unwrap();
        assert!(bound < 1.0);
        match sigma_alt(&panel, 0.001, 0.2, 1.0, bound) {
            Err(Error::VacuousBound(v)) => assert!(v.abs() < 1e-18),
            Ok(a) => assert!(a.variance < 1e-18),
            Err(e) => panic!("{e}"),
        }
        assert!(sigma_alt(&panel, 0.001, 0.2, 1.0, 0.0).is_ok());
        assert!(sigma_alt(&panel, 0.001, 0.2, 0.0, 0.0).is_err());
    }
}
