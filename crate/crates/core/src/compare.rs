//! Side-by-side comparison of two fits on the same schema.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::inference::margin;
use crate::report::{num, FitFile};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompareRow {
    pub attribute: String,
    pub level: String,
    pub est_a: f64,
    pub est_b: f64,
    /// `est_b − est_a`.
    pub delta: f64,
    pub effect_a: f64,
    pub effect_b: f64,
    pub effect_delta: f64,
    pub same_sign: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Comparison {
    pub rows: Vec<CompareRow>,
    /// Fraction of levels whose estimates share a sign (zero matches only zero).
    pub sign_agreement: f64,
}

fn sign(x: f64) -> i8 {
    if x > 0.0 {
        1
    } else if x < 0.0 {
        -1
    } else {
        0
    }
}

pub fn compare_fits(a: &FitFile, b: &FitFile) -> Result<Comparison> {
    if a.schema_version != b.schema_version {
        return Err(Error::SchemaMismatch(format!(
            "schema versions differ: `{}` vs `{}`",
            a.schema_version, b.schema_version
        )));
    }
    if a.beta.len() != b.beta.len()
        || a.beta
            .iter()
            .zip(&b.beta)
            .any(|(x, y)| x.attribute != y.attribute || x.level != y.level)
    {
        return Err(Error::SchemaMismatch("coefficient labels differ".into()));
    }
    if a.beta.is_empty() {
        return Err(Error::Empty("fit coefficients"));
    }
    let rows: Vec<CompareRow> = a
        .beta
        .iter()
        .zip(&b.beta)
        .map(|(x, y)| {
            let (ea, eb) = (margin(x.est), margin(y.est));
            CompareRow {
                attribute: x.attribute.clone(),
                level: x.level.clone(),
                est_a: x.est,
                est_b: y.est,
                delta: y.est - x.est,
                effect_a: ea,
                effect_b: eb,
                effect_delta: eb - ea,
                same_sign: sign(x.est) == sign(y.est),
            }
        })
        .collect();
    let agree = rows.iter().filter(|r| r.same_sign).count();
    Ok(Comparison {
        sign_agreement: agree as f64 / rows.len() as f64,
        rows,
    })
}

pub fn write_comparison_csv<W: std::io::Write>(out: W, cmp: &Comparison) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record([
        "attribute",
        "level",
        "est_a",
        "est_b",
        "delta",
        "effect_a",
        "effect_b",
        "effect_delta",
        "same_sign",
    ])?;
    for r in &cmp.rows {
        w.write_record([
            r.attribute.clone(),
            r.level.clone(),
            num(r.est_a),
            num(r.est_b),
            num(r.delta),
            num(r.effect_a),
            num(r.effect_b),
            num(r.effect_delta),
            r.same_sign.to_string(),
        ])?;
    }
    w.flush().map_err(|e| Error::io("comparison.csv", e))?;
    Ok(())
}
