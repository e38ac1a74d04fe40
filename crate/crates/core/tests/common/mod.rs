#![allow(clippy::needless_range_loop)]
#![allow(dead_code)]

use lrdr_core::simulator::{build_membership, Membership, Persistence};
use lrdr_core::{build_panel, LpProblem, ObligorRecord, Panel64, PdTable64};
use rand::rngs::StdRng;
use rand::Rng;

pub fn panel_from_membership(m: &Membership, q: usize, pd: impl Fn(usize, u32) -> f64) -> Panel64 {
    let records = m.members.iter().enumerate().flat_map(|(i, ms)| {
        let pd = &pd;
        ms.iter()
            .map(move |&j| ObligorRecord::new(i + 1, format!("o{j:08}"), pd(i + 1, j), None))
    });
    build_panel(records, m.members.len(), q).unwrap()
}

/// Constant size `n` and `k_{t,t+i} = lags[i-1]` for every `t`.
pub fn stationary_panel(n_dates: usize, n: usize, q: usize, lags: &[usize], p: f64) -> Panel64 {
    let m = build_membership(&vec![n; n_dates], q, Some(&Persistence::LagCounts(lags.to_vec()))).unwrap();
    panel_from_membership(&m, q, |_, _| p)
}

pub fn full_panel(n_dates: usize, n: usize, q: usize, p: f64) -> Panel64 {
    stationary_panel(n_dates, n, q, &vec![n; q - 1], p)
}

/// Up to `max_obligors` obligors, each present at a date with probability 0.6;
/// every date gets at least one.
pub fn random_panel(rng: &mut StdRng, max_dates: usize, max_obligors: usize, max_q: usize) -> Panel64 {
    let n_dates = rng.random_range(1..=max_dates);
    let q = rng.random_range(1..=max_q);
    let pool = rng.random_range(1..=max_obligors);
    let mut records = Vec::new();
    for t in 1..=n_dates {
        let mut any = false;
        for j in 0..pool {
            if rng.random_bool(0.6) {
                records.push(ObligorRecord::new(t, format!("o{j}"), 0.5, None));
                any = true;
            }
        }
        if !any {
            let j = rng.random_range(0..pool);
            records.push(ObligorRecord::new(t, format!("o{j}"), 0.5, None));
        }
    }
    build_panel(records, n_dates, q).unwrap()
}

/// Every obligor has one PD for its whole history.
pub fn per_obligor_pds(panel: &Panel64, pd: impl Fn(&str) -> f64) -> PdTable64 {
    PdTable64::from_fn(panel, |_, id| Some(pd(id))).unwrap()
}

/// Variance of the long-run default rate as a plain double sum over all date pairs.
pub fn brute_force_variance(panel: &Panel64, pds: &PdTable64) -> f64 {
    let q = panel.windows_per_year() as f64;
    let active = panel.active_count() as f64;
    let mut total = 0.0;
    for t in 1..=panel.n_dates() {
        for s in 1..=panel.n_dates() {
            let (a, b) = if t <= s { (t, s) } else { (s, t) };
            let w = (1.0 - (b - a) as f64 / q).max(0.0);
            if w == 0.0 || panel.n(a) == 0 || panel.n(b) == 0 {
                continue;
            }
            let mut cov = 0.0;
            for (pa, &ja) in panel.members(a).iter().enumerate() {
                if let Some(pb) = panel.members(b).iter().position(|&jb| jb == ja) {
                    let p_early = pds.date(a)[pa];
                    let p_late = pds.date(b)[pb];
                    cov += w * p_late * (1.0 - p_early);
                }
            }
            total += cov / (panel.n(a) * panel.n(b)) as f64;
        }
    }
    total / (active * active)
}

/// LP minimum by enumerating vertices: all variables at a bound except at most one.
pub fn vertex_minimum(p: &LpProblem<f64>) -> Option<f64> {
    let n = p.alphas.len();
    let scale: f64 = p.betas.iter().sum::<f64>() * p.upper.abs().max(p.lower.abs()).max(1e-300);
    let mut best: Option<f64> = None;
    for free in (0..n).map(Some).chain(std::iter::once(None)) {
        for mask in 0u32..(1 << n) {
            let mut x = vec![0.0; n];
            let mut used = 0.0;
            for i in 0..n {
                if Some(i) == free {
                    continue;
                }
                x[i] = if mask & (1 << i) != 0 { p.upper } else { p.lower };
                used += p.betas[i] * x[i];
            }
            match free {
                Some(f) => {
                    let v = (p.target_mean - used) / p.betas[f];
                    if v < p.lower - 1e-13 || v > p.upper + 1e-13 {
                        continue;
                    }
                    x[f] = v.clamp(p.lower, p.upper);
                }
                None => {
                    if (used - p.target_mean).abs() > 1e-13 * scale.max(1.0) {
                        continue;
                    }
                }
            }
            let obj: f64 = p.alphas.iter().zip(&x).map(|(a, v)| a * v).sum();
            best = Some(best.map_or(obj, |b: f64| b.min(obj)));
        }
    }
    best
}
