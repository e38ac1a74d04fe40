mod common;

use common::panel_from_membership;
use lrdr_core::simulator::{build_membership, Persistence};
use lrdr_core::{
    grade_test, portfolio_test, read_panel_csv, write_panel_csv, Diagnostics, MasterScale, Method, Panel, Panel64,
    TestConfig,
};

/// 32 quarterly dates of 50 obligors, lags 45/40/35, `total_defaults` spread over the dates.
fn quarterly_panel(total_defaults: usize) -> Panel64 {
    let m = build_membership(&[50; 32], 4, Some(&Persistence::LagCounts(vec![45, 40, 35]))).unwrap();
    let template = panel_from_membership(&m, 4, |_, _| 0.02);
    let flags = (0..32)
        .map(|t| {
            (0..50)
                .map(|pos| pos < total_defaults / 32 + usize::from(t < total_defaults % 32))
                .collect()
        })
        .collect();
    template.with_default_flags(flags).unwrap()
}

#[test]
fn grade_test_at_the_upper_bound() {
    let cfg = TestConfig::new(0.05, Method::Grade);
    // 53 defaults: LRDR = 53/1600 = 0.033125 > K ≈ 0.03260
    let r = grade_test(&quarterly_panel(53), 0.02, &cfg).unwrap();
    assert!((r.variance() - 4.13e-5).abs() / 4.13e-5 < 0.005);
    assert!((r.range.upper - 0.03260).abs() < 5e-5);
    assert!(!r.passed);
    // 52 defaults: 0.0325 < K
    let r = grade_test(&quarterly_panel(52), 0.02, &cfg).unwrap();
    assert!(r.passed);
    assert!(r.range.lower <= r.center && r.center <= r.range.upper);
}

#[test]
fn width_ratio_through_portfolio_test() {
    let m = build_membership(&[1000; 60], 4, Some(&Persistence::LagCounts(vec![1000; 3]))).unwrap();
    let template = panel_from_membership(&m, 4, |_, _| 0.01);
    let panel = template.with_default_flags(vec![vec![false; 1000]; 60]).unwrap();
    let run = |method| {
        let cfg = TestConfig::new(0.05, method).with_pd_range(0.0003, 0.2);
        portfolio_test(&panel, &cfg).unwrap()
    };
    let id = run(Method::LpIdentity);
    let pm = run(Method::LpPdMax);
    let ratio = pm.range.width() / id.range.width();
    assert!((ratio - 0.994).abs() <= 0.003, "{ratio}");
    // everything at PD_min except enough mass at PD_max to hit the mean
    if let Diagnostics::Lp {
        at_lower,
        at_upper,
        interior,
        ..
    } = id.diagnostics
    {
        assert!(at_lower > at_upper && interior <= 1);
    } else {
        panic!("expected LP diagnostics");
    }
}

#[test]
fn f32_and_f64_agree() {
    let panel = quarterly_panel(40);
    let mut text = Vec::new();
    write_panel_csv(&panel, &mut text).unwrap();
    let p32: Panel<f32> = read_panel_csv(text.as_slice(), Some(32), 4).unwrap();
    let p64: Panel<f64> = read_panel_csv(text.as_slice(), Some(32), 4).unwrap();
    let scale = MasterScale::new(vec![0.0003, 0.005, 0.02, 0.08, 0.2]).unwrap();
    let scale32 = MasterScale::new(scale.grades().iter().map(|&x| x as f32).collect()).unwrap();
    for method in [Method::Grade, Method::LpIdentity, Method::LpPdMax, Method::LpPdBar] {
        let a = portfolio_test(
            &p64,
            &TestConfig::new(0.05, method)
                .with_master_scale(scale.clone())
                .with_n_worst(2),
        )
        .unwrap();
        let b = portfolio_test(
            &p32,
            &TestConfig::new(0.05f32, method)
                .with_master_scale(scale32.clone())
                .with_n_worst(2),
        )
        .unwrap();
        assert!(((b.sigma as f64) - a.sigma).abs() / a.sigma < 1e-4, "{method:?}");
        assert_eq!(a.passed, b.passed);
    }
}

#[test]
fn csv_round_trip_preserves_results() {
    let panel = quarterly_panel(45);
    let mut text = Vec::new();
    write_panel_csv(&panel, &mut text).unwrap();
    let back: Panel64 = read_panel_csv(text.as_slice(), Some(32), 4).unwrap();
    assert_eq!(back.counts(), panel.counts());
    let cfg = TestConfig::new(0.05, Method::Grade);
    let a = grade_test(&panel, 0.02, &cfg).unwrap();
    let b = grade_test(&back, 0.02, &cfg).unwrap();
    assert_eq!(a.sigma, b.sigma);
    assert_eq!(a.lrdr, b.lrdr);
}
