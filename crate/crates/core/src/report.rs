//! JSON reports and plot-ready CSV curves.

use crate::calculus::{fit_samples, DecayFit};
use crate::error::Result;
use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};

/// How a value is judged.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "kind")]
pub enum Criterion {
    /// |value − target| ≤ tolerance.
    Within { target: f64, tolerance: f64 },
    /// value ≤ bound (decay exponents, error norms).
    AtMost { bound: f64 },
    /// value > bound (margins).
    Above { bound: f64 },
    InRange { lo: f64, hi: f64 },
    /// A recorded outcome with no numeric test; passes when `value` is 1.
    Verdict,
}

impl Criterion {
    pub fn holds(&self, value: f64) -> bool {
        if !value.is_finite() {
            return false;
        }
        match *self {
            Criterion::Within { target, tolerance } => (value - target).abs() <= tolerance,
            Criterion::AtMost { bound } => value <= bound,
            Criterion::Above { bound } => value > bound,
            Criterion::InRange { lo, hi } => lo <= value && value <= hi,
            Criterion::Verdict => value == 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckRecord {
    pub name: String,
    /// Which statement the check exercises.
    pub anchor: String,
    #[serde(deserialize_with = "nullable::f64")]
    pub value: f64,
    pub criterion: Criterion,
    pub pass: bool,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub error_bar: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub note: Option<String>,
}

impl CheckRecord {
    pub fn new(name: impl Into<String>, anchor: impl Into<String>, value: f64, criterion: Criterion) -> CheckRecord {
        CheckRecord {
            name: name.into(),
            anchor: anchor.into(),
            value,
            pass: criterion.holds(value),
            criterion,
            error_bar: None,
            note: None,
        }
    }

    pub fn with_error(mut self, e: f64) -> CheckRecord {
        self.error_bar = Some(e);
        self
    }

    pub fn with_note(mut self, n: impl Into<String>) -> CheckRecord {
        self.note = Some(n.into());
        self
    }

    /// A check whose computation itself failed.
    pub fn errored(name: impl Into<String>, anchor: impl Into<String>, criterion: Criterion, err: impl std::fmt::Display) -> CheckRecord {
        CheckRecord::new(name, anchor, f64::NAN, criterion).with_note(format!("error: {err}"))
    }
}

/// (radius, norm) samples with the fitted power law when one exists.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Curve {
    pub name: String,
    #[serde(deserialize_with = "nullable::pairs")]
    pub samples: Vec<(f64, f64)>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub exponent: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub intercept: Option<f64>,
}

impl Curve {
    pub fn from_fit(name: impl Into<String>, fit: &DecayFit) -> Curve {
        Curve {
            name: name.into(),
            samples: fit.samples.clone(),
            exponent: Some(fit.exponent),
            intercept: Some(fit.intercept),
        }
    }

    /// Fit over the finite positive rows only; rows that are not are kept as they are.
    pub fn from_samples(name: impl Into<String>, samples: Vec<(f64, f64)>) -> Curve {
        let good: Vec<_> = samples.iter().copied().filter(|&(r, v)| r.is_finite() && v.is_finite() && v > 0.0).collect();
        let fit = fit_samples(good).ok();
        Curve {
            name: name.into(),
            samples,
            exponent: fit.as_ref().map(|f| f.exponent),
            intercept: fit.as_ref().map(|f| f.intercept),
        }
    }

    pub fn model(&self, radius: f64) -> Option<f64> {
        Some((self.intercept? + self.exponent? * radius.ln()).exp())
    }

    pub fn nan_rows(&self) -> Vec<usize> {
        self.samples.iter().enumerate().filter(|(_, (r, v))| !(r.is_finite() && v.is_finite())).map(|(i, _)| i).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportDocument {
    pub suite: String,
    pub config_hash: String,
    pub seed: u64,
    pub records: Vec<CheckRecord>,
    pub curves: Vec<Curve>,
    /// Free-form structured output (certificates, verdicts).
    #[serde(skip_serializing_if = "serde_json::Map::is_empty", default)]
    pub extras: serde_json::Map<String, serde_json::Value>,
}

impl ReportDocument {
    pub fn new(suite: &str, config_hash: &str, seed: u64) -> ReportDocument {
        ReportDocument {
            suite: suite.into(),
            config_hash: config_hash.into(),
            seed,
            records: Vec::new(),
            curves: Vec::new(),
            extras: serde_json::Map::new(),
        }
    }

    pub fn all_pass(&self) -> bool {
        self.records.iter().all(|r| r.pass)
    }

    pub fn failures(&self) -> impl Iterator<Item = &CheckRecord> {
        self.records.iter().filter(|r| !r.pass)
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }

    pub fn from_json(text: &str) -> Result<ReportDocument> {
        serde_json::from_str(text).map_err(|e| crate::LabError::Config {
            key: format!("line {}", e.line()),
            message: e.to_string(),
        })
    }

    pub fn merge(&mut self, other: ReportDocument) {
        self.records.extend(other.records);
        self.curves.extend(other.curves);
        self.extras.extend(other.extras);
    }
}

/// JSON has no NaN; serde_json writes it as null, and these read it back.
mod nullable {
    use serde::{Deserialize, Deserializer};

    pub fn f64<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        Ok(Option::<f64>::deserialize(d)?.unwrap_or(f64::NAN))
    }

    pub fn pairs<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<(f64, f64)>, D::Error> {
        let v = Vec::<(Option<f64>, Option<f64>)>::deserialize(d)?;
        Ok(v.into_iter().map(|(a, b)| (a.unwrap_or(f64::NAN), b.unwrap_or(f64::NAN))).collect())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurveEntry {
    pub name: String,
    pub file: String,
    pub rows: usize,
    pub nan_rows: Vec<usize>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub exponent: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub suite: String,
    pub config_hash: String,
    pub curves: Vec<CurveEntry>,
    pub warnings: Vec<String>,
}

fn file_stem(name: &str) -> String {
    name.chars().map(|c| if c.is_ascii_alphanumeric() || c == '-' || c == '_' { c } else { '_' }).collect()
}

fn fmt(v: f64) -> String {
    if v.is_finite() {
        v.to_string()
    } else {
        "NaN".into()
    }
}

/// One CSV per curve (radius, value, fitted_model) plus manifest.json.
pub fn emit_plots(report: &ReportDocument, dir: &Path) -> Result<Manifest> {
    std::fs::create_dir_all(dir)?;
    let mut manifest = Manifest {
        suite: report.suite.clone(),
        config_hash: report.config_hash.clone(),
        curves: Vec::new(),
        warnings: Vec::new(),
    };
    if report.curves.is_empty() {
        manifest.warnings.push("report has no curves".into());
    }
    for c in &report.curves {
        let file = format!("{}.csv", file_stem(&c.name));
        let path: PathBuf = dir.join(&file);
        let mut w = csv::Writer::from_path(&path).map_err(|e| crate::LabError::Io(e.to_string()))?;
        w.write_record(["radius", "value", "fitted_model"]).map_err(|e| crate::LabError::Io(e.to_string()))?;
        for &(r, v) in &c.samples {
            let m = c.model(r).map(fmt).unwrap_or_default();
            w.write_record([fmt(r), fmt(v), m]).map_err(|e| crate::LabError::Io(e.to_string()))?;
        }
        w.flush()?;
        let nan_rows = c.nan_rows();
        if !nan_rows.is_empty() {
            manifest.warnings.push(format!("{}: {} non-finite rows", c.name, nan_rows.len()));
        }
        manifest.curves.push(CurveEntry { name: c.name.clone(), file, rows: c.samples.len(), nan_rows, exponent: c.exponent });
    }
    let mut text = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
    text.push('\n');
    std::fs::write(dir.join("manifest.json"), text)?;
    Ok(manifest)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn curve(name: &str, vals: &[(f64, f64)]) -> Curve {
        Curve::from_samples(name, vals.to_vec())
    }

    #[test]
    fn criteria() {
        assert!(Criterion::Within { target: 1.0, tolerance: 0.1 }.holds(1.05));
        assert!(!Criterion::Within { target: 1.0, tolerance: 0.01 }.holds(1.05));
        assert!(Criterion::AtMost { bound: -2.0 }.holds(-3.0));
        assert!(!Criterion::Above { bound: 0.0 }.holds(0.0));
        assert!(!Criterion::AtMost { bound: 1.0 }.holds(f64::NAN));
    }

    #[test]
    fn single_curve_gives_csv_and_manifest() {
        let dir = tempfile::tempdir().unwrap();
        let mut r = ReportDocument::new("s", "abc", 1);
        let s: Vec<_> = (0..8).map(|i| 10f64 * 2f64.powi(i)).map(|x| (x, x.powi(-3))).collect();
        r.curves.push(curve("rm", &s));
        let m = emit_plots(&r, dir.path()).unwrap();
        assert_eq!(m.curves.len(), 1);
        assert!((m.curves[0].exponent.unwrap() + 3.0).abs() < 1e-12);
        let text = std::fs::read_to_string(dir.path().join("rm.csv")).unwrap();
        assert!(text.starts_with("radius,value,fitted_model\n"));
        assert_eq!(text.lines().count(), 9);
        assert!(dir.path().join("manifest.json").exists());
    }

    #[test]
    fn empty_report_writes_manifest_only() {
        let dir = tempfile::tempdir().unwrap();
        let m = emit_plots(&ReportDocument::new("s", "abc", 1), dir.path()).unwrap();
        assert!(m.curves.is_empty() && !m.warnings.is_empty());
        assert_eq!(std::fs::read_dir(dir.path()).unwrap().count(), 1);
    }

    #[test]
    fn nan_rows_are_flagged() {
        let dir = tempfile::tempdir().unwrap();
        let mut r = ReportDocument::new("s", "abc", 1);
        let mut s: Vec<_> = (0..8).map(|i| 10f64 * 2f64.powi(i)).map(|x| (x, x.powi(-2))).collect();
        s[3].1 = f64::NAN;
        r.curves.push(curve("g", &s));
        let m = emit_plots(&r, dir.path()).unwrap();
        assert_eq!(m.curves[0].nan_rows, vec![3]);
        assert!((m.curves[0].exponent.unwrap() + 2.0).abs() < 1e-12);
        let text = std::fs::read_to_string(dir.path().join("g.csv")).unwrap();
        assert!(text.lines().nth(4).unwrap().contains("NaN"));
    }

    #[test]
    fn json_roundtrip() {
        let mut r = ReportDocument::new("s", "abc", 9);
        r.records.push(CheckRecord::new("x", "a", 0.5, Criterion::AtMost { bound: 1.0 }).with_error(1e-3));
        let back = ReportDocument::from_json(&r.to_json()).unwrap();
        assert_eq!(back, r);
        r.records.push(CheckRecord::errored("y", "a", Criterion::Verdict, "boom"));
        r.curves.push(Curve::from_samples("c", vec![(1.0, f64::NAN)]));
        let back = ReportDocument::from_json(&r.to_json()).unwrap();
        assert!(back.records[1].value.is_nan() && back.curves[0].samples[0].1.is_nan());
    }
}
