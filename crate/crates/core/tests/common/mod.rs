#![allow(dead_code)]

use dce_core::agents::{run_experiment, Noise, RecordSink};
use dce_core::beta::{reference, Coefficients};
use dce_core::design::generate_design;
use dce_core::inference::{build_design_matrix, DesignMatrix};
use dce_core::{AgentConfig, AttributeSchema, ChoiceSet, DesignSpec, PromptTemplate};

pub fn gpt4_beta(schema: &AttributeSchema) -> Coefficients {
    Coefficients::from_json_str(schema, reference::GPT4_TURBO).unwrap()
}

/// Generates a design, runs a simulated Gumbel chooser through the real
/// runner and returns the design matrix.
pub fn simulate(
    schema: &AttributeSchema,
    beta: &Coefficients,
    n_sets: usize,
    design_seed: u64,
    agent_seed: u64,
) -> (Vec<ChoiceSet>, DesignMatrix) {
    let spec = DesignSpec::new(n_sets, 2, design_seed, schema).unwrap();
    let design = generate_design(schema, &spec).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let mut sink = RecordSink::open(dir.path().join("records.jsonl")).unwrap();
    let agent = AgentConfig::simulated(schema, beta, Noise::Gumbel, agent_seed);
    run_experiment(&design, schema, &agent, &PromptTemplate::immigration(), &mut sink).unwrap();
    let dm = build_design_matrix(sink.records(), &design, schema).unwrap();
    (design, dm)
}

/// Plain Gaussian elimination with partial pivoting; independent of nalgebra.
pub fn solve(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Vec<f64> {
    let n = b.len();
    for col in 0..n {
        let piv = (col..n)
            .max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))
            .unwrap();
        a.swap(col, piv);
        b.swap(col, piv);
        let (top, rest) = a.split_at_mut(col + 1);
        let pivot = &top[col];
        for (offset, row) in rest.iter_mut().enumerate() {
            let f = row[col] / pivot[col];
            for (x, p) in row[col..].iter_mut().zip(&pivot[col..]) {
                *x -= f * p;
            }
            b[col + 1 + offset] -= f * b[col];
        }
    }
    let mut x = vec![0.0; n];
    for i in (0..n).rev() {
        let s: f64 = (i + 1..n).map(|k| a[i][k] * x[k]).sum();
        x[i] = (b[i] - s) / a[i][i];
    }
    x
}

/// Binary logit without intercept on covariate differences `x_1 − x_2`
/// with outcome 1{first profile chosen}, fitted by IRLS.
pub fn binary_logit_on_differences(dm: &DesignMatrix) -> Vec<f64> {
    let k = dm.n_params();
    let data: Vec<(Vec<f64>, f64)> = (0..dm.n_sets())
        .map(|s| {
            let rows: Vec<&[f64]> = dm.set_rows(s).collect();
            assert_eq!(rows.len(), 2);
            let d: Vec<f64> = rows[0].iter().zip(rows[1]).map(|(a, b)| a - b).collect();
            (d, if dm.chosen(s) == 0 { 1.0 } else { 0.0 })
        })
        .collect();
    let mut beta = vec![0.0; k];
    for _ in 0..100 {
        let mut xtwx = vec![vec![0.0; k]; k];
        let mut score = vec![0.0; k];
        for (d, y) in &data {
            let eta: f64 = d.iter().zip(&beta).map(|(a, b)| a * b).sum();
            let p = 1.0 / (1.0 + (-eta).exp());
            let w = p * (1.0 - p);
            for i in 0..k {
                score[i] += d[i] * (y - p);
                for j in 0..k {
                    xtwx[i][j] += w * d[i] * d[j];
                }
            }
        }
        let step = solve(xtwx, score.clone());
        for (b, s) in beta.iter_mut().zip(&step) {
            *b += s;
        }
        if score.iter().fold(0.0f64, |m, v| m.max(v.abs())) < 1e-10 {
            break;
        }
    }
    beta
}

/// Central finite differences of `f` at `x`.
pub fn fd_gradient(f: impl Fn(&[f64]) -> f64, x: &[f64], h: f64) -> Vec<f64> {
    (0..x.len())
        .map(|i| {
            let mut up = x.to_vec();
            let mut dn = x.to_vec();
            up[i] += h;
            dn[i] -= h;
            (f(&up) - f(&dn)) / (2.0 * h)
        })
        .collect()
}

pub fn rel_err(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1.0)
}
