use serde::{Deserialize, Serialize};
use statrs::distribution::{ChiSquared, ContinuousCDF};

use crate::error::{Error, Result};
use crate::inference::{fit_mnl, DesignMatrix, FitOptions, MnlFit};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImportanceRow {
    pub attribute: String,
    pub lr_statistic: f64,
    pub df: usize,
    pub p_value: f64,
    /// `100 · LR / max LR`.
    pub normalized_importance: f64,
}

pub fn chi_square_sf(x: f64, df: usize) -> f64 {
    if x <= 0.0 {
        return 1.0;
    }
    ChiSquared::new(df as f64).map(|d| d.sf(x)).unwrap_or(f64::NAN)
}

/// Likelihood-ratio test per attribute: refit without its dummy block and
/// compare maximized log-likelihoods. Restricted fits reuse the full fit's
/// penalty so the two likelihoods are comparable.
pub fn attribute_importance(
    dm: &DesignMatrix,
    fit: &MnlFit,
    opts: &FitOptions,
    force: bool,
) -> Result<Vec<ImportanceRow>> {
    fit.require_converged(force)?;
    let restricted_opts = FitOptions {
        ridge: fit.ridge,
        always_ridge: fit.ridge > 0.0,
        ..opts.clone()
    };
    let mut rows = Vec::with_capacity(dm.blocks().len());
    for block in dm.blocks() {
        let df = block.columns.len();
        let ll_restricted = if df == dm.n_params() {
            // Nothing left: every profile has utility 0.
            crate::inference::log_likelihood_value(dm, &vec![0.0; dm.n_params()])?
        } else {
            let restricted = dm.without_columns(block.columns.clone());
            let rfit = fit_mnl(&restricted, &restricted_opts)?;
            if !rfit.converged && !force {
                return Err(Error::RestrictedFit(block.name.clone()));
            }
            rfit.log_likelihood
        };
        let lr = (2.0 * (fit.log_likelihood - ll_restricted)).max(0.0);
        rows.push(ImportanceRow {
            attribute: block.name.clone(),
            lr_statistic: lr,
            df,
            p_value: chi_square_sf(lr, df),
            normalized_importance: 0.0,
        });
    }
    let max = rows.iter().map(|r| r.lr_statistic).fold(0.0, f64::max);
    for r in &mut rows {
        r.normalized_importance = if max > 0.0 { 100.0 * r.lr_statistic / max } else { 100.0 };
    }
    Ok(rows)
}
