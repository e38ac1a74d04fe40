#![allow(clippy::needless_range_loop, clippy::type_complexity)]

use lrdr_core::simulator::{
    cdf_curve, quarterly_hazard, write_samples_csv, GradeMixture, PdSpec, Persistence, Simulation,
};
use lrdr_core::{realized_lrdr, Scenario};

fn quarterly(reps: usize, seed: u64) -> Scenario {
    Scenario {
        persistence: Some(Persistence::LagCounts(vec![45, 40, 35])),
        ..Scenario::independent(vec![50; 32], 4, 0.02, reps, seed)
    }
}

#[test]
fn quarterly_moments_at_1e5_replications() {
    let sum = Simulation::new(&quarterly(100_000, 5)).unwrap().run().unwrap();
    assert!((sum.analytic_variance - 4.13e-5).abs() / 4.13e-5 < 0.005);
    assert!(
        sum.variance_relative_error() < 0.05,
        "{} vs {}",
        sum.empirical_variance,
        sum.analytic_variance
    );
    let sd = sum.analytic_variance.sqrt();
    assert!((sum.empirical_mean - sum.analytic_mean).abs() <= 4.0 * sd / (100_000f64).sqrt());
    assert!((0.0..=1.0).contains(&sum.ks_distance));
}

#[test]
fn lagged_window_covariance_close_to_overlap_formula() {
    // 10^4 persisting obligors x 100 replications = 10^6 obligor histories
    let (p, q, n, reps) = (0.02f64, 4usize, 10_000usize, 100usize);
    let s = Scenario {
        persistence: Some(Persistence::LagCounts(vec![n; q - 1])),
        ..Scenario::independent(vec![n; q], q, p, reps, 17)
    };
    let sim = Simulation::new(&s).unwrap();
    let mut both = vec![0u64; q];
    let mut first = 0u64;
    let mut total = 0u64;
    for rep in 0..reps as u64 {
        let panel = sim.panel(rep).unwrap();
        let base: Vec<bool> = panel.default_flags(1).iter().map(|f| f.unwrap()).collect();
        for lag in 1..q {
            let later = panel.default_flags(1 + lag);
            for (a, b) in base.iter().zip(later) {
                if *a && b.unwrap() {
                    both[lag] += 1;
                }
            }
        }
        first += base.iter().filter(|&&d| d).count() as u64;
        total += n as u64;
    }
    let theta = quarterly_hazard(p, q).unwrap();
    let marginal = first as f64 / total as f64;
    assert!((marginal - p).abs() < 4.0 * (p * (1.0 - p) / total as f64).sqrt());
    for lag in 1..q {
        let emp = both[lag] as f64 / total as f64 - p * p;
        let overlap = (q - lag) as f64 / q as f64 * p * (1.0 - p);
        // the subperiod scheme's own covariance: 1 - 2(1-θ)^q + (1-θ)^(q+lag) - p²
        let scheme = 1.0 - 2.0 * (1.0 - theta).powi(q as i32) + (1.0 - theta).powi((q + lag) as i32) - p * p;
        assert!(
            (scheme - overlap).abs() <= p * p,
            "lag {lag}: scheme {scheme} vs {overlap}"
        );
        let se = (scheme.max(p * p) / total as f64).sqrt();
        assert!((emp - scheme).abs() <= 5.0 * se + 1e-5, "lag {lag}: {emp} vs {scheme}");
        assert!((emp - overlap).abs() <= 2.0 * p * p, "lag {lag}: {emp} vs {overlap}");
    }
}

#[test]
fn annual_windows_are_independent_bernoulli() {
    let s = Scenario {
        persistence: Some(Persistence::Ratios(vec![])),
        ..Scenario::independent(vec![20_000, 20_000], 1, 0.05, 20, 3)
    };
    let sim = Simulation::new(&s).unwrap();
    let mut d = [0u64; 2];
    for rep in 0..20 {
        let c = sim.default_counts(rep);
        d[0] += c[0] as u64;
        d[1] += c[1] as u64;
    }
    let n = 400_000f64;
    for x in d {
        assert!((x as f64 / n - 0.05).abs() < 4.0 * (0.05 * 0.95 / n).sqrt());
    }
}

#[test]
fn samples_do_not_depend_on_thread_count() {
    let s = quarterly(3000, 21);
    let sim = Simulation::new(&s).unwrap();
    let one = rayon::ThreadPoolBuilder::new()
        .num_threads(1)
        .build()
        .unwrap()
        .install(|| sim.samples());
    let three = rayon::ThreadPoolBuilder::new()
        .num_threads(3)
        .build()
        .unwrap()
        .install(|| sim.samples());
    assert_eq!(
        one.iter().map(|x| x.to_bits()).collect::<Vec<_>>(),
        three.iter().map(|x| x.to_bits()).collect::<Vec<_>>()
    );
}

#[test]
fn realized_panels_reproduce_samples() {
    let s = Scenario {
        pd: PdSpec::Mixture(GradeMixture {
            master_scale: vec![0.001, 0.01, 0.1],
            weights: vec![0.5, 0.3, 0.2],
        }),
        persistence: Some(Persistence::Ratios(vec![0.9, 0.8])),
        ..Scenario::independent((0..12).map(|t| 20 + 3 * t).collect(), 3, 0.5, 50, 8)
    };
    let sim = Simulation::new(&s).unwrap();
    let samples = sim.samples();
    for (rep, z) in samples.iter().enumerate() {
        let panel = sim.panel(rep as u64).unwrap();
        assert!((realized_lrdr(&panel).unwrap() - z).abs() < 1e-15);
    }
    let grades: std::collections::BTreeSet<u64> = sim.template().estimates().iter().map(f64::to_bits).collect();
    assert!(grades.len() > 1);
}

#[test]
fn samples_csv_and_curves() {
    let sum = Simulation::new(&quarterly(500, 1)).unwrap().run().unwrap();
    let mut buf = Vec::new();
    write_samples_csv(&sum.samples, &mut buf).unwrap();
    let text = String::from_utf8(buf).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("lrdr"));
    let back: Vec<f64> = lines.map(|l| l.parse().unwrap()).collect();
    assert_eq!(back, sum.samples);

    let curve = cdf_curve(&sum, 50).unwrap();
    assert_eq!(curve.len(), 50);
    assert!(curve
        .windows(2)
        .all(|w| w[0].0 < w[1].0 && w[0].1 <= w[1].1 && w[0].2 <= w[1].2));
    assert_eq!(curve.last().unwrap().1, 1.0);
}
