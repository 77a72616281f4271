//! Fit files, CSV tables and the plain-text summary.

use std::io::Write;
use std::path::Path;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::inference::{display_p, EffectRow, ImportanceRow, MnlFit, WaldRow};
use crate::schema::AttributeSchema;

/// Hex SHA-256 of a file's bytes, as recorded in manifests.
pub fn file_sha256(path: impl AsRef<Path>) -> Result<String> {
    let path = path.as_ref();
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    Ok(hex::encode(Sha256::digest(&bytes)))
}

/// Shortest round-trip text for a table cell, switching to exponent form
/// for magnitudes where plain decimals get unwieldy.
pub fn num(x: f64) -> String {
    let a = x.abs();
    if x.is_finite() && a != 0.0 && !(1e-4..1e15).contains(&a) {
        format!("{x:e}")
    } else {
        x.to_string()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitEntry {
    pub attribute: String,
    pub level: String,
    pub est: f64,
    pub se: f64,
    pub p: f64,
}

/// On-disk fit: full precision, plus the schema version it was fitted on.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitFile {
    pub schema_version: String,
    pub beta: Vec<FitEntry>,
    pub loglik: f64,
    pub iterations: usize,
    pub gradient_norm: f64,
    pub converged: bool,
    pub ridge: f64,
    pub n_sets: usize,
    pub j_profiles: Option<usize>,
    pub warnings: Vec<String>,
    pub covariance: Vec<Vec<f64>>,
}

impl FitFile {
    pub fn new(schema_version: &str, fit: &MnlFit, wald: &[WaldRow]) -> Self {
        let k = fit.beta.len();
        FitFile {
            schema_version: schema_version.to_string(),
            beta: wald
                .iter()
                .map(|w| FitEntry {
                    attribute: w.attribute.clone(),
                    level: w.level.clone(),
                    est: w.est,
                    se: w.se,
                    p: w.p,
                })
                .collect(),
            loglik: fit.log_likelihood,
            iterations: fit.iterations,
            gradient_norm: fit.gradient_norm,
            converged: fit.converged,
            ridge: fit.ridge,
            n_sets: fit.n_sets,
            j_profiles: fit.j_profiles,
            warnings: fit.warnings.clone(),
            covariance: (0..k)
                .map(|i| (0..k).map(|j| fit.covariance[(i, j)]).collect())
                .collect(),
        }
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        serde_json::from_str(&text).map_err(|e| Error::json("fit file", e))
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let text = serde_json::to_string_pretty(self).expect("fit serializes");
        std::fs::write(path, text + "\n").map_err(|e| Error::io(path, e))
    }

    /// Rebuilds the in-memory fit. The covariance falls back to a diagonal of
    /// squared standard errors when the file carries none.
    pub fn to_fit(&self) -> MnlFit {
        let k = self.beta.len();
        let covariance = if self.covariance.len() == k && self.covariance.iter().all(|r| r.len() == k) {
            DMatrix::from_fn(k, k, |i, j| self.covariance[i][j])
        } else {
            DMatrix::from_fn(k, k, |i, j| if i == j { self.beta[i].se.powi(2) } else { 0.0 })
        };
        MnlFit {
            labels: self
                .beta
                .iter()
                .map(|b| (b.attribute.clone(), b.level.clone()))
                .collect(),
            beta: self.beta.iter().map(|b| b.est).collect(),
            covariance,
            log_likelihood: self.loglik,
            iterations: self.iterations,
            gradient_norm: self.gradient_norm,
            converged: self.converged,
            ridge: self.ridge,
            warnings: self.warnings.clone(),
            n_sets: self.n_sets,
            j_profiles: self.j_profiles,
        }
    }
}

pub fn write_coefficients_csv<W: Write>(out: W, rows: &[WaldRow]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["attribute", "level", "est", "se", "z", "p"])?;
    for r in rows {
        w.write_record([
            r.attribute.clone(),
            r.level.clone(),
            num(r.est),
            num(r.se),
            num(r.z),
            num(r.p),
        ])?;
    }
    w.flush().map_err(|e| Error::io("coefficients.csv", e))?;
    Ok(())
}

pub fn write_effects_csv<W: Write>(out: W, rows: &[EffectRow]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["attribute", "level", "effect", "ci_low", "ci_high"])?;
    for r in rows {
        w.write_record([
            r.attribute.clone(),
            r.level.clone(),
            num(r.effect),
            num(r.ci_low),
            num(r.ci_high),
        ])?;
    }
    w.flush().map_err(|e| Error::io("effects.csv", e))?;
    Ok(())
}

pub fn write_importance_csv<W: Write>(out: W, rows: &[ImportanceRow]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["attribute", "lr", "df", "p", "importance"])?;
    for r in rows {
        w.write_record([
            r.attribute.clone(),
            num(r.lr_statistic),
            r.df.to_string(),
            num(r.p_value),
            num(r.normalized_importance),
        ])?;
    }
    w.flush().map_err(|e| Error::io("importance.csv", e))?;
    Ok(())
}

/// Long-format plot data for the effects and importance charts. Reference
/// levels are included in the effects panel at 0 with `reference = true`.
pub fn write_plot_data_csv<W: Write>(
    out: W,
    schema: &AttributeSchema,
    effects: &[EffectRow],
    importance: &[ImportanceRow],
) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["panel", "attribute", "level", "value", "ci_low", "ci_high", "reference"])?;
    for attr in &schema.attributes {
        for (i, level) in attr.levels.iter().enumerate() {
            if i == attr.reference_level() {
                w.write_record(["effects", &attr.name, level, "0", "0", "0", "true"])?;
            } else if let Some(e) = effects.iter().find(|e| e.attribute == attr.name && &e.level == level) {
                w.write_record([
                    "effects",
                    &attr.name,
                    level,
                    &num(e.effect),
                    &num(e.ci_low),
                    &num(e.ci_high),
                    "false",
                ])?;
            }
        }
    }
    for r in importance {
        w.write_record([
            "importance",
            &r.attribute,
            "",
            &num(r.normalized_importance),
            "",
            "",
            "false",
        ])?;
    }
    w.flush().map_err(|e| Error::io("plot_data.csv", e))?;
    Ok(())
}

pub struct SummaryInput<'a> {
    pub records: usize,
    pub effective: usize,
    pub fit: &'a MnlFit,
    pub wald: &'a [WaldRow],
    pub effects: &'a [EffectRow],
    pub importance: &'a [ImportanceRow],
    pub warnings: &'a [String],
}

/// Human-readable report with two-decimal rounding.
pub fn summary_text(s: &SummaryInput<'_>) -> String {
    let mut t = String::new();
    let rate = if s.records > 0 {
        s.effective as f64 / s.records as f64
    } else {
        0.0
    };
    t.push_str(&format!(
        "records: {}\neffective: {} ({:.1}%)\nsets in fit: {}\nlog-likelihood: {:.4}\niterations: {}\nconverged: {}\nwarnings: {}\n",
        s.records,
        s.effective,
        100.0 * rate,
        s.fit.n_sets,
        s.fit.log_likelihood,
        s.fit.iterations,
        s.fit.converged,
        s.warnings.len()
    ));
    for w in s.warnings {
        t.push_str(&format!("  warning: {w}\n"));
    }
    t.push_str("\nCoefficients (Wald tests)\n");
    let mut current = "";
    for (i, r) in s.wald.iter().enumerate() {
        if r.attribute != current {
            current = &r.attribute;
            t.push_str(&format!("{}:\n", r.attribute));
        }
        let effect = s
            .effects
            .get(i)
            .map(|e| format!("{:+.3}", e.effect))
            .unwrap_or_default();
        t.push_str(&format!(
            "  {:<60} {:>6.2} {:>5.2} {:>5}  {}\n",
            truncate(&r.level, 60),
            r.est,
            r.se,
            display_p(r.p),
            effect
        ));
    }
    if !s.importance.is_empty() {
        t.push_str("\nAttribute importance (LR tests, max = 100)\n");
        let mut sorted: Vec<&ImportanceRow> = s.importance.iter().collect();
        sorted.sort_by(|a, b| b.lr_statistic.total_cmp(&a.lr_statistic));
        for r in sorted {
            t.push_str(&format!(
                "  {:<28} {:>6.1}  LR={:.2} df={} p={}\n",
                r.attribute,
                r.normalized_importance,
                r.lr_statistic,
                r.df,
                display_p(r.p_value)
            ));
        }
    }
    t
}

fn truncate(s: &str, n: usize) -> String {
    if s.chars().count() <= n {
        s.to_string()
    } else {
        s.chars().take(n - 1).chain(std::iter::once('…')).collect()
    }
}
