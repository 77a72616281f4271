use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::inference::DesignMatrix;

/// Log-likelihood with its gradient and Hessian at one coefficient vector.
#[derive(Debug, Clone)]
pub struct LogLik {
    pub value: f64,
    pub gradient: DVector<f64>,
    pub hessian: DMatrix<f64>,
}

/// Logit choice probabilities for set `s`. Utilities are shifted by their
/// maximum before exponentiating.
pub fn choice_probabilities(dm: &DesignMatrix, s: usize, beta: &[f64]) -> Vec<f64> {
    let u: Vec<f64> = dm.set_rows(s).map(|row| dot(row, beta)).collect();
    let (p, _) = softmax_with_log_norm(&u);
    p
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Returns probabilities and `max + ln Σ exp(u - max)`.
fn softmax_with_log_norm(u: &[f64]) -> (Vec<f64>, f64) {
    let m = u.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let e: Vec<f64> = u.iter().map(|v| (v - m).exp()).collect();
    let total: f64 = e.iter().sum();
    (e.into_iter().map(|v| v / total).collect(), m + total.ln())
}

fn check_len(dm: &DesignMatrix, beta: &[f64]) -> Result<()> {
    if beta.len() != dm.n_params() {
        return Err(Error::Dimension {
            expected: dm.n_params(),
            got: beta.len(),
        });
    }
    Ok(())
}

pub fn log_likelihood_value(dm: &DesignMatrix, beta: &[f64]) -> Result<f64> {
    check_len(dm, beta)?;
    let mut ll = 0.0;
    for s in 0..dm.n_sets() {
        let u: Vec<f64> = dm.set_rows(s).map(|row| dot(row, beta)).collect();
        let (_, log_norm) = softmax_with_log_norm(&u);
        ll += u[dm.chosen(s)] - log_norm;
    }
    Ok(ll)
}

/// `LL = Σ_s ln p_{s,chosen}` with
/// gradient `Σ_s (x_chosen − x̄_s)` and
/// Hessian `−Σ_s Σ_j p_sj (x_sj − x̄_s)(x_sj − x̄_s)'`, where `x̄_s = Σ_j p_sj x_sj`.
pub fn log_likelihood(dm: &DesignMatrix, beta: &[f64]) -> Result<LogLik> {
    evaluate(dm, beta, true)
}

/// Value and gradient only; skips the O(k²) Hessian accumulation.
pub fn log_likelihood_gradient(dm: &DesignMatrix, beta: &[f64]) -> Result<(f64, DVector<f64>)> {
    let ll = evaluate(dm, beta, false)?;
    Ok((ll.value, ll.gradient))
}

fn evaluate(dm: &DesignMatrix, beta: &[f64], with_hessian: bool) -> Result<LogLik> {
    check_len(dm, beta)?;
    let k = dm.n_params();
    let mut value = 0.0;
    let mut grad = vec![0.0; k];
    // Upper triangle accumulated row-major, mirrored at the end.
    let mut hess = vec![0.0; if with_hessian { k * k } else { 0 }];
    let mut xbar = vec![0.0; k];
    let mut centered = vec![0.0; k];
    for s in 0..dm.n_sets() {
        let rows: Vec<&[f64]> = dm.set_rows(s).collect();
        let u: Vec<f64> = rows.iter().map(|row| dot(row, beta)).collect();
        let (p, log_norm) = softmax_with_log_norm(&u);
        let c = dm.chosen(s);
        value += u[c] - log_norm;
        xbar.iter_mut().for_each(|v| *v = 0.0);
        for (row, &pj) in rows.iter().zip(&p) {
            for (xb, &x) in xbar.iter_mut().zip(row.iter()) {
                *xb += pj * x;
            }
        }
        for ((g, &x), &xb) in grad.iter_mut().zip(rows[c].iter()).zip(&xbar) {
            *g += x - xb;
        }
        if !with_hessian {
            continue;
        }
        for (row, &pj) in rows.iter().zip(&p) {
            for ((d, &x), &xb) in centered.iter_mut().zip(row.iter()).zip(&xbar) {
                *d = x - xb;
            }
            for a in 0..k {
                let da = pj * centered[a];
                if da == 0.0 {
                    continue;
                }
                let hrow = &mut hess[a * k..(a + 1) * k];
                for b in a..k {
                    hrow[b] -= da * centered[b];
                }
            }
        }
    }
    let hessian = if with_hessian {
        for a in 0..k {
            for b in 0..a {
                hess[a * k + b] = hess[b * k + a];
            }
        }
        DMatrix::from_row_slice(k, k, &hess)
    } else {
        DMatrix::zeros(0, 0)
    };
    Ok(LogLik {
        value,
        gradient: DVector::from_vec(grad),
        hessian,
    })
}
