use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::inference::likelihood::{log_likelihood, log_likelihood_value};
use crate::inference::DesignMatrix;

/// Coefficients beyond this magnitude are treated as a sign of separation.
pub const SEPARATION_THRESHOLD: f64 = 15.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitOptions {
    /// Stop when the gradient max-norm falls below this.
    pub tol: f64,
    pub max_iter: usize,
    /// L2 penalty used when separation or a singular Hessian is detected.
    pub ridge: f64,
    /// Apply `ridge` from the start instead of only as a fallback.
    pub always_ridge: bool,
}

impl Default for FitOptions {
    fn default() -> Self {
        FitOptions {
            tol: 1e-8,
            max_iter: 100,
            ridge: 1e-6,
            always_ridge: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MnlFit {
    pub labels: Vec<(String, String)>,
    pub beta: Vec<f64>,
    /// Inverse of the negative (penalized) Hessian at `beta`.
    pub covariance: DMatrix<f64>,
    pub log_likelihood: f64,
    pub iterations: usize,
    pub gradient_norm: f64,
    pub converged: bool,
    /// Penalty in effect for the returned estimate (0 if none).
    pub ridge: f64,
    pub warnings: Vec<String>,
    pub n_sets: usize,
    pub j_profiles: Option<usize>,
}

impl MnlFit {
    pub fn standard_errors(&self) -> Vec<f64> {
        (0..self.beta.len())
            .map(|i| self.covariance[(i, i)].max(0.0).sqrt())
            .collect()
    }

    pub fn separation_warned(&self) -> bool {
        self.warnings.iter().any(|w| w.contains("separation"))
    }

    pub(crate) fn require_converged(&self, force: bool) -> Result<()> {
        if self.converged || force {
            Ok(())
        } else {
            Err(Error::NotConverged)
        }
    }
}

struct NewtonResult {
    beta: Vec<f64>,
    hessian_neg: DMatrix<f64>,
    log_likelihood: f64,
    iterations: usize,
    gradient_norm: f64,
    converged: bool,
    singular: bool,
}

fn penalized(ll: f64, beta: &[f64], ridge: f64) -> f64 {
    ll - 0.5 * ridge * beta.iter().map(|b| b * b).sum::<f64>()
}

/// Newton–Raphson on the (optionally ridge-penalized) log-likelihood with
/// step halving, so accepted iterates never decrease the objective.
fn newton(dm: &DesignMatrix, opts: &FitOptions, ridge: f64) -> Result<NewtonResult> {
    let k = dm.n_params();
    let mut beta = vec![0.0; k];
    let mut iterations = 0;
    let mut singular = false;
    loop {
        let ll = log_likelihood(dm, &beta)?;
        let grad = &ll.gradient - DVector::from_column_slice(&beta) * ridge;
        let neg_h = -&ll.hessian + DMatrix::identity(k, k) * ridge;
        let gnorm = grad.amax();
        let done = gnorm < opts.tol;
        if done || iterations >= opts.max_iter {
            return Ok(NewtonResult {
                beta,
                hessian_neg: neg_h,
                log_likelihood: ll.value,
                iterations,
                gradient_norm: gnorm,
                converged: done,
                singular,
            });
        }
        let step = match neg_h.clone().cholesky() {
            Some(ch) => ch.solve(&grad),
            None => {
                singular = true;
                // Fall back to a small Levenberg shift so the step stays an ascent direction.
                let shift = neg_h.diagonal().amax().max(1.0) * 1e-8;
                match (neg_h.clone() + DMatrix::identity(k, k) * shift).cholesky() {
                    Some(ch) => ch.solve(&grad),
                    None => grad.clone(),
                }
            }
        };
        let current = penalized(ll.value, &beta, ridge);
        // Below this predicted gain the objective cannot resolve the step, so
        // the line search would only see rounding noise.
        let predicted = grad.dot(&step);
        let noise_floor = 64.0 * f64::EPSILON * (1.0 + current.abs());
        if predicted.is_finite() && predicted >= 0.0 && predicted < noise_floor {
            for (b, d) in beta.iter_mut().zip(step.iter()) {
                *b += d;
            }
            iterations += 1;
            continue;
        }
        let mut t = 1.0;
        let mut accepted = false;
        for _ in 0..60 {
            let trial: Vec<f64> = beta.iter().zip(step.iter()).map(|(b, d)| b + t * d).collect();
            let v = penalized(log_likelihood_value(dm, &trial)?, &trial, ridge);
            if v.is_finite() && v >= current {
                beta = trial;
                accepted = true;
                break;
            }
            t *= 0.5;
        }
        iterations += 1;
        if !accepted {
            // No ascent possible at machine precision: treat as converged here.
            let ll = log_likelihood(dm, &beta)?;
            let grad = &ll.gradient - DVector::from_column_slice(&beta) * ridge;
            return Ok(NewtonResult {
                hessian_neg: -&ll.hessian + DMatrix::identity(k, k) * ridge,
                log_likelihood: ll.value,
                gradient_norm: grad.amax(),
                converged: grad.amax() < opts.tol.sqrt(),
                beta,
                iterations,
                singular,
            });
        }
    }
}

fn to_fit(dm: &DesignMatrix, r: NewtonResult, ridge: f64, mut warnings: Vec<String>) -> MnlFit {
    let k = dm.n_params();
    let covariance = match r.hessian_neg.clone().cholesky() {
        Some(ch) => ch.inverse(),
        None => {
            warnings.push("negative Hessian is singular; covariance from pseudo-inverse".into());
            r.hessian_neg
                .clone()
                .pseudo_inverse(1e-12)
                .unwrap_or_else(|_| DMatrix::from_element(k, k, f64::NAN))
        }
    };
    let covariance = (&covariance + covariance.transpose()) * 0.5;
    if !r.converged {
        warnings.push(format!(
            "did not converge in {} iterations (gradient max-norm {:.3e})",
            r.iterations, r.gradient_norm
        ));
    }
    MnlFit {
        labels: dm.labels().to_vec(),
        beta: r.beta,
        covariance,
        log_likelihood: r.log_likelihood,
        iterations: r.iterations,
        gradient_norm: r.gradient_norm,
        converged: r.converged,
        ridge,
        warnings,
        n_sets: dm.n_sets(),
        j_profiles: dm.uniform_j(),
    }
}

/// Maximum-likelihood conditional logit fit.
///
/// If the unpenalized fit produces a coefficient beyond
/// [`SEPARATION_THRESHOLD`] or meets a singular Hessian, it is redone with an
/// L2 penalty of `opts.ridge` and a separation warning is attached.
/// Non-convergence is reported through `converged`, not as an error.
pub fn fit_mnl(dm: &DesignMatrix, opts: &FitOptions) -> Result<MnlFit> {
    if dm.n_sets() == 0 {
        return Err(Error::NoEffectiveResponses);
    }
    if dm.n_params() == 0 {
        return Err(Error::Empty("parameters"));
    }
    if opts.always_ridge {
        let r = newton(dm, opts, opts.ridge)?;
        let mut warnings = Vec::new();
        if r.beta.iter().any(|b| b.abs() > SEPARATION_THRESHOLD) {
            warnings.push(separation_warning(dm, &r.beta));
        }
        return Ok(to_fit(dm, r, opts.ridge, warnings));
    }
    let r = newton(dm, opts, 0.0)?;
    let diverging = r.beta.iter().any(|b| b.abs() > SEPARATION_THRESHOLD);
    if !(diverging || r.singular) {
        return Ok(to_fit(dm, r, 0.0, Vec::new()));
    }
    let mut warnings = vec![separation_warning(dm, &r.beta)];
    if r.singular && !diverging {
        warnings[0] = "singular Hessian encountered (possible separation); refit with ridge".into();
    }
    let ridge = opts.ridge.max(f64::MIN_POSITIVE);
    let r = newton(dm, opts, ridge)?;
    warnings.push(format!("estimates use L2 ridge penalty {ridge:e}"));
    Ok(to_fit(dm, r, ridge, warnings))
}

fn separation_warning(dm: &DesignMatrix, beta: &[f64]) -> String {
    let cols: Vec<String> = beta
        .iter()
        .enumerate()
        .filter(|(_, b)| b.abs() > SEPARATION_THRESHOLD)
        .map(|(i, _)| {
            let (a, l) = &dm.labels()[i];
            format!("{a}: {l}")
        })
        .collect();
    format!("possible separation; diverging coefficients: [{}]", cols.join("; "))
}
