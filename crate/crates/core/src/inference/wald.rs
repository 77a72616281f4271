use serde::{Deserialize, Serialize};
use statrs::function::erf::erfc;

use crate::error::Result;
use crate::inference::MnlFit;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WaldRow {
    pub attribute: String,
    pub level: String,
    pub est: f64,
    pub se: f64,
    pub z: f64,
    pub p: f64,
}

/// Two-sided normal p-value `2(1 − Φ(|z|))`, computed as `erfc(|z|/√2)`.
pub fn wald_p(est: f64, se: f64) -> f64 {
    if est == 0.0 {
        return 1.0;
    }
    if se <= 0.0 || !se.is_finite() {
        return 0.0;
    }
    erfc((est / se).abs() / std::f64::consts::SQRT_2)
}

/// Per-coefficient Wald tests. A zero standard error yields `p = 0` and a
/// warning in the returned list.
pub fn wald_table(fit: &MnlFit, force: bool) -> Result<(Vec<WaldRow>, Vec<String>)> {
    fit.require_converged(force)?;
    let mut warnings = Vec::new();
    let rows = fit
        .labels
        .iter()
        .zip(&fit.beta)
        .zip(fit.standard_errors())
        .map(|(((attribute, level), &est), se)| {
            if se == 0.0 && est != 0.0 {
                warnings.push(format!("zero standard error for {attribute}: {level}; p reported as 0"));
            }
            WaldRow {
                attribute: attribute.clone(),
                level: level.clone(),
                est,
                se,
                z: if se > 0.0 { est / se } else { f64::NAN },
                p: wald_p(est, se),
            }
        })
        .collect();
    Ok((rows, warnings))
}

/// Two-decimal display rounded to nearest; anything below 0.005 shows as `0.00`.
pub fn display_p(p: f64) -> String {
    format!("{:.2}", p.max(0.0))
}
