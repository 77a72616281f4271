//! Head-to-head margins: `2σ(β) − 1 = tanh(β/2)` is how much more likely a
//! profile carrying a level is to be picked over an otherwise identical
//! reference-level profile in a pair.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::inference::MnlFit;

pub const Z_95: f64 = 1.959_963_984_540_054;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CiMethod {
    /// Map the coefficient's Wald interval through the margin function.
    #[default]
    Transform,
    /// `effect ± z·SE·m'(β)`, clamped to [−1, 1].
    Delta,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EffectRow {
    pub attribute: String,
    pub level: String,
    pub effect: f64,
    pub ci_low: f64,
    pub ci_high: f64,
}

pub fn margin(beta: f64) -> f64 {
    (0.5 * beta).tanh()
}

/// Derivative of [`margin`]: `2σ(β)(1 − σ(β))`.
pub fn margin_slope(beta: f64) -> f64 {
    let t = (0.5 * beta).tanh();
    0.5 * (1.0 - t * t)
}

pub fn margin_interval(beta: f64, se: f64, method: CiMethod) -> (f64, f64) {
    match method {
        CiMethod::Transform => (margin(beta - Z_95 * se), margin(beta + Z_95 * se)),
        CiMethod::Delta => {
            let m = margin(beta);
            let half = Z_95 * se * margin_slope(beta);
            ((m - half).max(-1.0), (m + half).min(1.0))
        }
    }
}

pub fn marginal_effects(fit: &MnlFit, method: CiMethod, force: bool) -> Result<Vec<EffectRow>> {
    fit.require_converged(force)?;
    match fit.j_profiles {
        Some(2) => {}
        Some(j) => return Err(Error::NotPaired(j)),
        None => return Err(Error::NotPaired(0)),
    }
    Ok(fit
        .labels
        .iter()
        .zip(&fit.beta)
        .zip(fit.standard_errors())
        .map(|(((attribute, level), &b), se)| {
            let (ci_low, ci_high) = margin_interval(b, se, method);
            EffectRow {
                attribute: attribute.clone(),
                level: level.clone(),
                effect: margin(b),
                ci_low,
                ci_high,
            }
        })
        .collect())
}
