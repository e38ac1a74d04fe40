//! JSON report schema and rendering.

use std::io::{self, Write};

use lrdr_core::simulator::{ConvergenceReport, SimulationSummary, TailProbability};
use lrdr_core::{Diagnostics, LinearizationMode, Panel64, Scenario, TestResult64};
use serde::{Deserialize, Serialize};
use serde_json::ser::{Formatter, PrettyFormatter};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub command: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub input: Option<InputDigest>,
    pub config: ConfigEcho,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub test: Option<TestReport>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub comparison: Option<Comparison>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub simulation: Option<SimulationReport>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub convergence: Option<ConvergenceReport>,
    pub warnings: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InputDigest {
    pub path: String,
    pub records: usize,
    pub distinct_obligors: usize,
    pub n_dates: usize,
    pub q: usize,
    pub active_dates: usize,
    pub n_min: usize,
    pub n_max: usize,
}

impl InputDigest {
    pub fn new(path: &str, panel: &Panel64) -> Self {
        Self {
            path: path.to_string(),
            records: panel.record_count(),
            distinct_obligors: panel.distinct_obligors(),
            n_dates: panel.n_dates(),
            q: panel.windows_per_year(),
            active_dates: panel.active_count(),
            n_min: panel.n_min(),
            n_max: panel.n_max(),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ConfigEcho {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alpha: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub q: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub method: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pd_grade: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pd_min: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pd_max: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_worst: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gamma: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mu_old: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scenario: Option<Scenario>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestReport {
    pub method: String,
    pub center: f64,
    pub sigma: f64,
    pub variance: f64,
    /// Acceptance bounds clamped to `[0, 1]`.
    pub lower_k: f64,
    pub upper_k: f64,
    pub lower_raw: f64,
    pub upper_raw: f64,
    pub lrdr: f64,
    pub passed: bool,
    pub diagnostics: DiagnosticsReport,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DiagnosticsReport {
    Grade {
        inverse_count_sum: f64,
        lambdas: Vec<f64>,
        active_dates: usize,
    },
    Lp {
        linearization: LinearizationMode,
        pd_lo: f64,
        pd_hi: f64,
        alphas: Vec<f64>,
        constants: Vec<f64>,
        constant: f64,
        minimal_value: f64,
        boundary_value: Option<f64>,
        /// Minimizing PD assignment: variables at `pd_lo`, at `pd_hi`, strictly between.
        at_lower: usize,
        at_upper: usize,
        interior: usize,
    },
    Alt {
        c: f64,
        k1: f64,
        k2: f64,
        mu_old: f64,
        mu_old_bound: f64,
    },
}

impl From<&TestResult64> for TestReport {
    fn from(r: &TestResult64) -> Self {
        let diagnostics = match &r.diagnostics {
            Diagnostics::Grade {
                inverse_count_sum,
                lambdas,
                active_count,
            } => DiagnosticsReport::Grade {
                inverse_count_sum: *inverse_count_sum,
                lambdas: lambdas.clone(),
                active_dates: *active_count,
            },
            Diagnostics::Lp {
                linearization,
                constant,
                minimal_value,
                boundary_value,
                at_lower,
                at_upper,
                interior,
                ..
            } => DiagnosticsReport::Lp {
                linearization: linearization.mode,
                pd_lo: linearization.pd_lo,
                pd_hi: linearization.pd_hi,
                alphas: linearization.alphas.clone(),
                constants: linearization.constants.clone(),
                constant: *constant,
                minimal_value: *minimal_value,
                boundary_value: *boundary_value,
                at_lower: *at_lower,
                at_upper: *at_upper,
                interior: *interior,
            },
            Diagnostics::Alt(a) => DiagnosticsReport::Alt {
                c: a.c,
                k1: a.k1,
                k2: a.k2,
                mu_old: a.mu_old,
                mu_old_bound: a.mu_old_bound,
            },
        };
        Self {
            method: r.method.name().to_string(),
            center: r.center,
            sigma: r.sigma,
            variance: r.variance(),
            lower_k: r.range.lower,
            upper_k: r.range.upper,
            lower_raw: r.range.lower_raw,
            upper_raw: r.range.upper_raw,
            lrdr: r.lrdr,
            passed: r.passed,
            diagnostics,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Comparison {
    pub method: String,
    pub sigma: f64,
    pub lower_k: f64,
    pub upper_k: f64,
    pub passed: bool,
    /// Raw width of the primary range over the compared one.
    pub width_ratio: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulationReport {
    pub replications: usize,
    pub analytic_mean: f64,
    pub analytic_variance: f64,
    pub empirical_mean: f64,
    pub empirical_variance: f64,
    pub variance_relative_error: f64,
    pub ks_distance: f64,
    /// Threshold used for `ks_within_threshold`; a calibration choice, not a derived bound.
    pub ks_threshold: f64,
    pub ks_within_threshold: bool,
    pub tail_probs: Vec<TailProbability>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub samples_path: Option<String>,
}

pub const KS_THRESHOLD: f64 = 0.05;

impl SimulationReport {
    pub fn new(s: &SimulationSummary, samples_path: Option<String>) -> Self {
        Self {
            replications: s.replications,
            analytic_mean: s.analytic_mean,
            analytic_variance: s.analytic_variance,
            empirical_mean: s.empirical_mean,
            empirical_variance: s.empirical_variance,
            variance_relative_error: s.variance_relative_error(),
            ks_distance: s.ks_distance,
            ks_threshold: KS_THRESHOLD,
            ks_within_threshold: s.ks_distance <= KS_THRESHOLD,
            tail_probs: s.tail_probs.clone(),
            samples_path,
        }
    }
}

/// Pretty JSON with every float written to 17 significant digits.
struct Precise(PrettyFormatter<'static>);

impl Formatter for Precise {
    fn write_f64<W: ?Sized + Write>(&mut self, writer: &mut W, value: f64) -> io::Result<()> {
        write!(writer, "{value:.16e}")
    }

    fn write_f32<W: ?Sized + Write>(&mut self, writer: &mut W, value: f32) -> io::Result<()> {
        self.write_f64(writer, f64::from(value))
    }

    fn begin_array<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.begin_array(w)
    }
    fn end_array<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.end_array(w)
    }
    fn begin_array_value<W: ?Sized + Write>(&mut self, w: &mut W, first: bool) -> io::Result<()> {
        self.0.begin_array_value(w, first)
    }
    fn end_array_value<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.end_array_value(w)
    }
    fn begin_object<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.begin_object(w)
    }
    fn end_object<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.end_object(w)
    }
    fn begin_object_key<W: ?Sized + Write>(&mut self, w: &mut W, first: bool) -> io::Result<()> {
        self.0.begin_object_key(w, first)
    }
    fn begin_object_value<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.begin_object_value(w)
    }
    fn end_object_value<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.end_object_value(w)
    }
}

pub fn to_json(report: &Report) -> serde_json::Result<String> {
    let mut out = Vec::new();
    let mut ser = serde_json::Serializer::with_formatter(&mut out, Precise(PrettyFormatter::new()));
    report.serialize(&mut ser)?;
    out.push(b'\n');
    Ok(String::from_utf8(out).expect("serde_json writes UTF-8"))
}

fn row(out: &mut String, key: &str, value: impl std::fmt::Display) {
    out.push_str(&format!("  {key:<24} {value}\n"));
}

/// Aligned plain-text summary.
pub fn to_human(report: &Report) -> String {
    let mut out = format!("caltest {}\n", report.command);
    if let Some(i) = &report.input {
        row(&mut out, "input", &i.path);
        row(&mut out, "records", i.records);
        row(
            &mut out,
            "dates (active/total)",
            format!("{}/{}", i.active_dates, i.n_dates),
        );
        row(&mut out, "windows per year", i.q);
        row(&mut out, "n_min / n_max", format!("{} / {}", i.n_min, i.n_max));
    }
    if let Some(t) = &report.test {
        row(&mut out, "method", &t.method);
        row(&mut out, "center", format!("{:.6e}", t.center));
        row(&mut out, "sigma^2", format!("{:.6e}", t.variance));
        row(
            &mut out,
            "acceptance range",
            format!("[{:.6e}, {:.6e}]", t.lower_k, t.upper_k),
        );
        row(&mut out, "LRDR", format!("{:.6e}", t.lrdr));
        row(&mut out, "result", if t.passed { "PASSED" } else { "FAILED" });
    }
    if let Some(c) = &report.comparison {
        row(&mut out, "compared with", &c.method);
        row(
            &mut out,
            "compared range",
            format!("[{:.6e}, {:.6e}]", c.lower_k, c.upper_k),
        );
        row(&mut out, "width ratio", format!("{:.6}", c.width_ratio));
    }
    if let Some(s) = &report.simulation {
        row(&mut out, "replications", s.replications);
        row(
            &mut out,
            "mean (analytic/emp.)",
            format!("{:.6e} / {:.6e}", s.analytic_mean, s.empirical_mean),
        );
        row(
            &mut out,
            "variance (analytic/emp.)",
            format!("{:.6e} / {:.6e}", s.analytic_variance, s.empirical_variance),
        );
        row(&mut out, "KS distance", format!("{:.6}", s.ks_distance));
        for t in &s.tail_probs {
            row(
                &mut out,
                &format!("P(Z >= {})", t.threshold),
                format!("{:.6e}", t.probability),
            );
        }
    }
    if let Some(c) = &report.convergence {
        for check in &c.checks {
            row(&mut out, &check.condition, if check.passed { "ok" } else { "violated" });
        }
    }
    for w in &report.warnings {
        row(&mut out, "warning", w);
    }
    out
}
