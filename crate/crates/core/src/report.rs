//! JSON run reports and CSV artifacts.
//!
//! Every numeric result is written together with the tolerance it was judged
//! against. Non-finite numbers are written as the strings `"inf"`, `"-inf"` and `"nan"`.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use faer::c64;
use serde_json::{json, Value};

use crate::model::ValidationReport;
use crate::simulate::{DecayFit, EnergyTrace};
use crate::spectral::{ResolventSweep, SpectrumReport};
use crate::wellposed::{Classification, GenerationCertificate, StabilityCertificate, Verdict, DISSIPATIVITY_TOL};

/// Header of the eigenvalue CSV.
pub const EIGENVALUES_HEADER: &str = "re,im";
/// Header of the resolvent CSV.
pub const RESOLVENT_HEADER: &str = "omega,norm,trusted";
/// Header of the energy CSV.
pub const ENERGY_HEADER: &str = "t,E";

/// Warning attached to discrete spectra.
pub const SURROGATE_SPECTRUM: &str = "surrogate: eigenvalues of the collocation matrix, not of the infinite-dimensional generator";
/// Warning attached to resolvent scans.
pub const SURROGATE_RESOLVENT: &str = "surrogate: resolvent norms of the discretized generator; boundedness on the imaginary axis is heuristic";
/// Warning attached to axis-emptiness evidence.
pub const SURROGATE_AXIS: &str = "surrogate: empty discrete imaginary-axis spectrum used as asymptotic stability evidence";
/// Warning attached to decay fits.
pub const SURROGATE_DECAY: &str = "surrogate: decay rate fitted to a finite-horizon discrete simulation";

/// JSON number, or a string for non-finite values.
pub fn num(x: f64) -> Value {
    if x.is_finite() {
        json!(x)
    } else if x.is_nan() {
        json!("nan")
    } else if x > 0.0 {
        json!("inf")
    } else {
        json!("-inf")
    }
}

/// `{"value": x, "tolerance": tol}`.
pub fn measured(x: f64, tol: f64) -> Value {
    json!({"value": num(x), "tolerance": num(tol)})
}

/// Report assembled section by section; keys are written in sorted order.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct RunReport {
    sections: BTreeMap<String, Value>,
    warnings: Vec<String>,
}

impl RunReport {
    /// Empty report for a command.
    pub fn new(command: &str) -> Self {
        let mut r = RunReport::default();
        r.set("command", json!(command));
        r
    }

    /// Sets a section.
    pub fn set(&mut self, key: &str, v: Value) {
        self.sections.insert(key.to_string(), v);
    }

    /// Section by key.
    pub fn get(&self, key: &str) -> Option<&Value> {
        self.sections.get(key)
    }

    /// Appends a warning once.
    pub fn warn(&mut self, w: &str) {
        if !self.warnings.iter().any(|x| x == w) {
            self.warnings.push(w.to_string());
        }
    }

    /// Warnings so far.
    pub fn warnings(&self) -> &[String] {
        &self.warnings
    }

    /// Report as a JSON value.
    pub fn to_value(&self) -> Value {
        let mut m: serde_json::Map<String, Value> = self.sections.iter().map(|(k, v)| (k.clone(), v.clone())).collect();
        m.insert("warnings".into(), json!(self.warnings));
        Value::Object(m)
    }

    /// Pretty-printed JSON followed by a newline.
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(&self.to_value()).unwrap_or_default();
        s.push('\n');
        s
    }
}

/// Validation section.
pub fn validation_section(v: &ValidationReport) -> Value {
    json!({
        "passed": v.passed,
        "checks": v.checks.iter().map(|c| json!({"name": c.name, "passed": c.passed, "value": num(c.value), "tolerance": num(c.tolerance)})).collect::<Vec<_>>(),
        "h_lower_bound": num(v.m),
        "h_upper_bound": num(v.big_m),
        "sigma_min_pn": num(v.sigma_min_pn),
    })
}

/// Name of a verdict.
pub fn verdict_name(v: Verdict) -> &'static str {
    match v {
        Verdict::Contraction => "contraction",
        Verdict::NotContraction => "not-contraction",
    }
}

/// Name of a classification.
pub fn classification_name(c: Classification) -> &'static str {
    match c {
        Classification::Inconclusive => "inconclusive",
        Classification::CertifiedAsymptotic => "certified-asymptotic",
        Classification::CertifiedExponential => "certified-exponential",
    }
}

/// Generation-certificate section.
pub fn generation_section(c: &GenerationCertificate) -> Value {
    json!({
        "verdict": verdict_name(c.verdict),
        "rank_ok": c.rank_ok,
        "w_sigma_w_min_eig": {"value": num(c.wsigma_psd.eigenvalue), "tolerance": num(c.wsigma_psd.tolerance), "passed": c.wsigma_psd.passed},
        "re_p0_max_eig": {"value": num(c.rep0_nsd.eigenvalue), "tolerance": num(c.rep0_nsd.tolerance), "passed": c.rep0_nsd.passed},
    })
}

/// Coefficient table of a stability certificate.
pub fn kappa_table(c: &StabilityCertificate) -> Value {
    Value::Array(
        c.kappa
            .iter()
            .map(|e| json!({"selector": e.selector, "rule": e.rule, "kappa": measured(e.kappa, DISSIPATIVITY_TOL)}))
            .collect(),
    )
}

/// Classification section.
pub fn classification_section(c: &StabilityCertificate) -> Value {
    json!({
        "class": classification_name(c.classification),
        "certifying_rule": c.certifying_rule,
        "asymptotic_rule": c.asymptotic_rule,
        "requires_external_asymptotic_evidence": c.requires_external_asymptotic_evidence,
        "positivity_tolerance": num(DISSIPATIVITY_TOL),
        "notes": c.notes,
    })
}

/// Spectrum summary section.
pub fn spectrum_section(s: &SpectrumReport, csv: Option<&str>) -> Value {
    json!({
        "csv": csv,
        "count": s.eigenvalues.len(),
        "grid_n": s.grid_n,
        "spectral_abscissa": measured(s.spectral_abscissa, 0.0),
        "imaginary_axis_candidates": s.imaginary_axis_candidates.iter().map(|z| json!({"re": num(z.re), "im": num(z.im)})).collect::<Vec<_>>(),
        "tol_axis": num(s.tol_axis),
    })
}

/// Resolvent scan section.
pub fn resolvent_section(r: &ResolventSweep, growth_factor: f64, csv: Option<&str>) -> Value {
    json!({
        "csv": csv,
        "samples": r.omegas.len(),
        "sup_estimate": num(r.sup_estimate),
        "trust_limit": num(r.trust_limit),
        "bottom_decade_sup": num(r.bottom_decade_sup),
        "top_decade_sup": num(r.top_decade_sup),
        "growth_flag": r.growth_flag,
        "growth_factor": num(growth_factor),
        "diagnostic_only": r.diagnostic_only,
    })
}

/// Decay fit section.
pub fn decay_section(fit: &DecayFit, trace: &EnergyTrace, monotone_tol: f64, csv: Option<&str>) -> Value {
    let max_increase = max_energy_increase(trace);
    json!({
        "csv": csv,
        "omega_hat": num(fit.omega_hat),
        "fit_residual": num(fit.residual),
        "window": [num(fit.window.0), num(fit.window.1)],
        "samples": fit.samples,
        "dt": num(trace.dt),
        "max_relative_increase": measured(max_increase, monotone_tol),
        "nonincreasing": max_increase <= monotone_tol,
    })
}

/// Largest per-step relative energy increase `(E_{n+1} − E_n)/E_0`.
pub fn max_energy_increase(trace: &EnergyTrace) -> f64 {
    let e0 = trace.energies.first().copied().unwrap_or(0.0).max(f64::MIN_POSITIVE);
    trace.energies.windows(2).map(|w| (w[1] - w[0]) / e0).fold(f64::NEG_INFINITY, f64::max)
}

/// Eigenvalue CSV.
pub fn eigenvalues_csv(vals: &[c64]) -> String {
    let mut s = format!("{EIGENVALUES_HEADER}\n");
    for z in vals {
        let _ = writeln!(s, "{},{}", z.re, z.im);
    }
    s
}

/// Resolvent CSV.
pub fn resolvent_csv(r: &ResolventSweep) -> String {
    let mut s = format!("{RESOLVENT_HEADER}\n");
    for ((w, n), t) in r.omegas.iter().zip(&r.norms).zip(&r.trusted) {
        let _ = writeln!(s, "{w},{n},{t}");
    }
    s
}

/// Energy CSV.
pub fn energy_csv(trace: &EnergyTrace) -> String {
    let mut s = format!("{ENERGY_HEADER}\n");
    for (t, e) in trace.times.iter().zip(&trace.energies) {
        let _ = writeln!(s, "{t},{e}");
    }
    s
}
