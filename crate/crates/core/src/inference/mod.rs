//! Multinomial (conditional) logit estimation and the statistics derived
//! from a fit.
//!
//! Each profile's utility is `x'β` with `x` the dummy coding of its levels
//! against the last level of every attribute; choice probabilities within a
//! set are the softmax of utilities and `β` is fitted by Newton–Raphson on
//! the pooled log-likelihood.

pub mod effects;
pub mod fit;
pub mod importance;
pub mod likelihood;
pub mod matrix;
pub mod wald;

pub use effects::{margin, margin_interval, marginal_effects, CiMethod, EffectRow};
pub use fit::{fit_mnl, FitOptions, MnlFit, SEPARATION_THRESHOLD};
pub use importance::{attribute_importance, chi_square_sf, ImportanceRow};
pub use likelihood::{choice_probabilities, log_likelihood, log_likelihood_gradient, log_likelihood_value, LogLik};
pub use matrix::{build_design_matrix, dummy_row, ColumnBlock, DesignMatrix};
pub use wald::{display_p, wald_p, wald_table, WaldRow};
