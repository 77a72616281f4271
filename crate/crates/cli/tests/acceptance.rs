//! End-to-end acceptance checks. Prints one PASS/FAIL line per criterion and
//! exits nonzero if any fails. Run with `cargo test -p dce-cli --test acceptance`.

use std::process::{Command, ExitCode};
use std::sync::OnceLock;
use std::time::Instant;

use dce_core::agents::{run_experiment, Noise, RecordSink, SimulatedAgent};
use dce_core::beta::{reference, Coefficients};
use dce_core::design::generate_design;
use dce_core::inference::{
    attribute_importance, build_design_matrix, display_p, dummy_row, fit_mnl, log_likelihood, log_likelihood_gradient,
    log_likelihood_value, marginal_effects, wald_p, CiMethod, DesignMatrix, FitOptions, MnlFit,
};
use dce_core::prompt::{effective_response_rate, parse_choice, render_prompt};
use dce_core::report::FitFile;
use dce_core::{AgentConfig, AttributeSchema, ChoiceSet, DesignSpec, Profile, PromptTemplate};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Check = Result<String, String>;
type Criterion = (&'static str, fn() -> Check);

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn simulate(
    schema: &AttributeSchema,
    beta: &Coefficients,
    n: usize,
    design_seed: u64,
    agent_seed: u64,
) -> (Vec<ChoiceSet>, DesignMatrix) {
    let spec = DesignSpec::new(n, 2, design_seed, schema).unwrap();
    let design = generate_design(schema, &spec).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let mut sink = RecordSink::open(dir.path().join("records.jsonl")).unwrap();
    let agent = AgentConfig::simulated(schema, beta, Noise::Gumbel, agent_seed);
    run_experiment(&design, schema, &agent, &PromptTemplate::immigration(), &mut sink).unwrap();
    let dm = build_design_matrix(sink.records(), &design, schema).unwrap();
    (design, dm)
}

fn reference_fit(text: &str) -> MnlFit {
    let mut v: serde_json::Value = serde_json::from_str(text).unwrap();
    for e in v["beta"].as_array_mut().unwrap() {
        e["p"] = 0.0.into();
    }
    let file = serde_json::json!({
        "schema_version": v["schema_version"],
        "beta": v["beta"],
        "loglik": 0.0, "iterations": 0, "gradient_norm": 0.0, "converged": true, "ridge": 0.0,
        "n_sets": 10000, "j_profiles": 2, "warnings": [], "covariance": [],
    });
    serde_json::from_value::<FitFile>(file).unwrap().to_fit()
}

fn effect_formula() -> Check {
    let cases = [
        (reference::GPT4_TURBO, "Escape political/religious persecution", 0.156),
        (reference::GPT4_TURBO, "Male", -0.255),
        (reference::GPT35_TURBO, "Male", -0.168),
        (reference::GPT4_TURBO, "Has a contract with a U.S. employer", 0.975),
        (reference::GPT35_TURBO, "Has a contract with a U.S. employer", 0.828),
        (reference::HUMAN, "Doctor", 0.349),
        (reference::GPT35_TURBO, "Doctor", 0.747),
        (reference::GPT4_TURBO, "Doctor", 0.868),
    ];
    let mut worst: f64 = 0.0;
    for (text, level, expected) in cases {
        let fit = reference_fit(text);
        let effects = marginal_effects(&fit, CiMethod::Transform, false).map_err(|e| e.to_string())?;
        let row = effects
            .iter()
            .find(|r| r.level == level)
            .ok_or(format!("no level {level}"))?;
        let err = (row.effect - expected).abs();
        worst = worst.max(err);
        ensure(err <= 0.005, || format!("{level}: {:.4} vs {expected}", row.effect))?;
    }
    let fit = reference_fit(reference::GPT4_TURBO);
    let effects = marginal_effects(&fit, CiMethod::Transform, false).map_err(|e| e.to_string())?;
    let row = effects
        .iter()
        .find(|r| r.level == "Escape political/religious persecution")
        .unwrap();
    let ci_err = (row.ci_low - 0.095).abs().max((row.ci_high - 0.216).abs());
    ensure(ci_err <= 0.006, || {
        format!("CI ({:.4}, {:.4}) vs (0.095, 0.216)", row.ci_low, row.ci_high)
    })?;
    Ok(format!(
        "8 effects, max error {worst:.4}; CI ({:.4}, {:.4}), max endpoint error {ci_err:.4}",
        row.ci_low, row.ci_high
    ))
}

struct Gpt4Sim {
    dm: DesignMatrix,
    fit: MnlFit,
    truth: Vec<f64>,
    seconds: f64,
}

fn gpt4_sim() -> &'static Gpt4Sim {
    static SIM: OnceLock<Gpt4Sim> = OnceLock::new();
    SIM.get_or_init(|| {
        let schema = AttributeSchema::immigrant_dce();
        let beta = Coefficients::from_json_str(&schema, reference::GPT4_TURBO).unwrap();
        let start = Instant::now();
        let (_, dm) = simulate(&schema, &beta, 10_000, 2024, 4);
        let fit = fit_mnl(&dm, &FitOptions::default()).unwrap();
        Gpt4Sim {
            dm,
            fit,
            truth: beta.as_slice().to_vec(),
            seconds: start.elapsed().as_secs_f64(),
        }
    })
}

fn coefficient_recovery() -> Check {
    let sim = gpt4_sim();
    let fit = &sim.fit;
    ensure(fit.converged, || "fit did not converge".into())?;
    ensure(fit.iterations <= 30, || format!("{} Newton iterations", fit.iterations))?;
    let se = fit.standard_errors();
    let within = fit
        .beta
        .iter()
        .zip(&se)
        .zip(&sim.truth)
        .filter(|((b, s), t)| (*b - *t).abs() <= 3.0 * *s)
        .count();
    ensure(within >= 39, || format!("only {within}/41 within 3 SE"))?;
    Ok(format!(
        "{} iterations, {within}/41 within 3 SE, simulate+fit {:.1}s",
        fit.iterations, sim.seconds
    ))
}

fn fd_gradient(f: impl Fn(&[f64]) -> f64, x: &[f64], h: f64) -> Vec<f64> {
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

/// Relative error with the denominator floored at 1, so entries near zero
/// are compared absolutely.
fn rel_err(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1.0)
}

fn derivatives() -> Check {
    let schema = AttributeSchema::immigrant_dce();
    let beta = Coefficients::from_json_str(&schema, reference::GPT4_TURBO).unwrap();
    let (_, dm) = simulate(&schema, &beta, 200, 77, 78);
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let (mut g_worst, mut h_worst): (f64, f64) = (0.0, 0.0);
    for _ in 0..20 {
        let b: Vec<f64> = (0..dm.n_params()).map(|_| rng.random_range(-2.0..2.0)).collect();
        let ll = log_likelihood(&dm, &b).map_err(|e| e.to_string())?;
        let fd = fd_gradient(|x| log_likelihood_value(&dm, x).unwrap(), &b, 1e-5);
        for (a, n) in ll.gradient.iter().zip(&fd) {
            g_worst = g_worst.max(rel_err(*a, *n));
        }
        for i in 0..dm.n_params() {
            let col = fd_gradient(|x| log_likelihood_gradient(&dm, x).unwrap().1[i], &b, 1e-5);
            for (j, n) in col.iter().enumerate() {
                h_worst = h_worst.max(rel_err(ll.hessian[(i, j)], *n));
            }
        }
    }
    ensure(g_worst <= 1e-6, || format!("gradient rel error {g_worst:.2e}"))?;
    ensure(h_worst <= 1e-5, || format!("Hessian rel error {h_worst:.2e}"))?;
    Ok(format!(
        "20 points; max rel error gradient {g_worst:.2e}, Hessian {h_worst:.2e}"
    ))
}

fn solve(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Vec<f64> {
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

/// Intercept-free binary logit of 1{first chosen} on `x_1 − x_2`, by IRLS.
fn binary_logit(dm: &DesignMatrix) -> Vec<f64> {
    let k = dm.n_params();
    let data: Vec<(Vec<f64>, f64)> = (0..dm.n_sets())
        .map(|s| {
            let rows: Vec<&[f64]> = dm.set_rows(s).collect();
            let d = rows[0].iter().zip(rows[1]).map(|(a, b)| a - b).collect();
            (d, if dm.chosen(s) == 0 { 1.0 } else { 0.0 })
        })
        .collect();
    let mut beta = vec![0.0; k];
    for _ in 0..100 {
        let mut info = vec![vec![0.0; k]; k];
        let mut score = vec![0.0; k];
        for (d, y) in &data {
            let eta: f64 = d.iter().zip(&beta).map(|(a, b)| a * b).sum();
            let p = 1.0 / (1.0 + (-eta).exp());
            for i in 0..k {
                score[i] += d[i] * (y - p);
                for j in 0..k {
                    info[i][j] += p * (1.0 - p) * d[i] * d[j];
                }
            }
        }
        let step = solve(info, score.clone());
        for (b, s) in beta.iter_mut().zip(&step) {
            *b += s;
        }
        if score.iter().fold(0.0f64, |m, v| m.max(v.abs())) < 1e-10 {
            break;
        }
    }
    beta
}

fn binary_equivalence() -> Check {
    let schema = AttributeSchema::immigrant_dce();
    let beta = Coefficients::from_json_str(&schema, reference::GPT4_TURBO).unwrap();
    let (_, dm) = simulate(&schema, &beta, 1_000, 5, 6);
    let fit = fit_mnl(&dm, &FitOptions::default()).map_err(|e| e.to_string())?;
    ensure(fit.converged && fit.ridge == 0.0, || {
        format!("fit not clean: {:?}", fit.warnings)
    })?;
    let oracle = binary_logit(&dm);
    let worst = fit
        .beta
        .iter()
        .zip(&oracle)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0f64, f64::max);
    ensure(worst <= 1e-6, || format!("max |difference| {worst:.2e}"))?;
    Ok(format!("41 coefficients, max |difference| {worst:.2e}"))
}

fn wald_rounding() -> Check {
    let france = display_p(wald_p(0.10, 0.09));
    let male = display_p(wald_p(-0.13, 0.04));
    ensure(france == "0.27", || format!("(0.10, 0.09) -> {france}"))?;
    ensure(male == "0.00", || format!("(-0.13, 0.04) -> {male}"))?;
    Ok(format!("(0.10, 0.09) -> {france}; (-0.13, 0.04) -> {male}"))
}

fn importance() -> Check {
    let sim = gpt4_sim();
    let rows = attribute_importance(&sim.dm, &sim.fit, &FitOptions::default(), false).map_err(|e| e.to_string())?;
    ensure(rows.iter().all(|r| r.lr_statistic >= 0.0), || {
        "negative LR statistic".into()
    })?;
    let top = rows
        .iter()
        .find(|r| r.normalized_importance == 100.0)
        .ok_or("no attribute at 100")?;
    ensure(top.attribute == "Employment Plans", || {
        format!("{} has importance 100", top.attribute)
    })?;
    let min = rows.iter().map(|r| r.lr_statistic).fold(f64::INFINITY, f64::min);
    Ok(format!(
        "Employment Plans = 100 (LR {:.1}); min LR {min:.1}",
        top.lr_statistic
    ))
}

fn coverage() -> Check {
    let schema = AttributeSchema::from_json_str(
        r#"{"version":"toy-coverage","attributes":[
            {"name":"A","levels":["a1","a2"]},
            {"name":"B","levels":["b1","b2","b3"]},
            {"name":"C","levels":["c1","c2","c3","c4"]}]}"#,
    )
    .unwrap();
    let truth = vec![0.5, -0.4, 0.8, 0.3, -0.6, 1.0];
    let beta = Coefficients::from_vec(&schema, truth.clone()).unwrap();
    let reps = 200;
    let mut hits = vec![0usize; truth.len()];
    for r in 0..reps {
        let design = generate_design(&schema, &DesignSpec::new(2_000, 2, 10_000 + r, &schema).unwrap()).unwrap();
        let agent = SimulatedAgent::new(beta.clone(), Noise::Gumbel, 20_000 + r);
        let mut dm = DesignMatrix::new(
            schema.parameter_labels(),
            dce_core::inference::matrix::schema_blocks(&schema),
        );
        for set in &design {
            let rows: Vec<Vec<f64>> = set.profiles.iter().map(|p| dummy_row(&schema, &p.levels)).collect();
            let c = agent.choose(set, &schema).map_err(|e| e.to_string())?;
            dm.push_set(set.id, &rows, c).unwrap();
        }
        let fit = fit_mnl(&dm, &FitOptions::default()).map_err(|e| e.to_string())?;
        ensure(fit.converged, || format!("replication {r} did not converge"))?;
        for (i, (b, s)) in fit.beta.iter().zip(fit.standard_errors()).enumerate() {
            if (b - truth[i]).abs() <= 1.959_963_984_540_054 * s {
                hits[i] += 1;
            }
        }
    }
    let cov: Vec<f64> = hits.iter().map(|&h| h as f64 / reps as f64).collect();
    let pooled = hits.iter().sum::<usize>() as f64 / (reps as usize * truth.len()) as f64;
    let shown: Vec<String> = cov.iter().map(|c| format!("{c:.3}")).collect();
    ensure(cov.iter().all(|c| (0.92..=0.98).contains(c)), || {
        format!("per-coefficient coverage [{}]", shown.join(", "))
    })?;
    Ok(format!(
        "per-coefficient coverage [{}], pooled {pooled:.3}",
        shown.join(", ")
    ))
}

const EXAMPLE_ONE: &str = "Case 1:
- Gender: Male
- Education Level: Equivalent to completing high school in the U.S.
- Language: During admission interview, this applicant spoke broken English
- Country of Origin: Germany
- Profession: Construction worker
- Job Experience: More than five years
- Employment Plans: Will look for work after arriving in the U.S.
- Reason for Application: Escape political/religious persecution
- Prior Trips to the U.S.: Has visited the U.S. many times before on tourist visas

Case 2:
- Gender: Male
- Education Level: Equivalent to completing two years at college in the U.S.
- Language: During admission interview, this applicant spoke through an interpreter
- Country of Origin: Mexico
- Profession: Waiter
- Job Experience: Three to five years
- Employment Plans: Has a contract with a U.S. employer
- Reason for Application: Escape political/religious persecution
- Prior Trips to the U.S.: Spent six months with family members in the U.S.

Imagine you are an officer from U.S. immigration office, and you are evaluating two
virtual immigration cases.Based on the provided profiles, please indicate which case
is better for admission by choosing either 'Case 1' or 'Case 2'. Respond with one word
only.";

fn profile(schema: &AttributeSchema, texts: &[&str]) -> Profile {
    let levels = schema
        .attributes
        .iter()
        .zip(texts)
        .map(|(a, t)| a.level_index(t).unwrap_or_else(|| panic!("unknown level {t}")))
        .collect();
    Profile::new(schema, levels).unwrap()
}

fn generate_bytes(dir: &std::path::Path, seed: &str) -> Result<Vec<u8>, String> {
    let out = Command::new(env!("CARGO_BIN_EXE_dce"))
        .args(["generate", "--n", "10000", "--seed", seed, "--out"])
        .arg(dir)
        .output()
        .map_err(|e| e.to_string())?;
    ensure(out.status.success(), || {
        String::from_utf8_lossy(&out.stderr).into_owned()
    })?;
    std::fs::read(dir.join("design.jsonl")).map_err(|e| e.to_string())
}

fn pipeline() -> Check {
    let tmp = tempfile::tempdir().map_err(|e| e.to_string())?;
    let a = generate_bytes(&tmp.path().join("a"), "42")?;
    let b = generate_bytes(&tmp.path().join("b"), "42")?;
    let c = generate_bytes(&tmp.path().join("c"), "43")?;
    ensure(a == b, || "same seed gave different design files".into())?;
    ensure(a != c, || "different seeds gave the same design file".into())?;
    let lines = a.iter().filter(|&&x| x == b'\n').count();
    ensure(lines == 10_000, || format!("{lines} design lines"))?;

    let observed = ["Case 1", "Case 1.", "Case 2", "Case 2."];
    let parsed: Vec<_> = observed
        .iter()
        .enumerate()
        .map(|(i, r)| parse_choice(i as u64, r, 2))
        .collect();
    let rate = effective_response_rate(&parsed).map_err(|e| e.to_string())?;
    ensure(rate == 1.0, || format!("observed replies rate {rate}"))?;
    ensure(
        parsed.iter().map(|p| p.chosen_index).collect::<Vec<_>>() == [Some(0), Some(0), Some(1), Some(1)],
        || "observed replies mapped to wrong cases".into(),
    )?;
    let multi = [
        "Case 1. The applicant has a job offer.",
        "Case 2. Case 1 lacks a contract.",
        "I would admit Case 2. It is stronger.",
    ];
    for m in multi {
        ensure(!parse_choice(0, m, 2).is_effective(), || format!("accepted `{m}`"))?;
    }

    let s = AttributeSchema::immigrant_dce();
    let case1 = profile(
        &s,
        &[
            "Male",
            "Equivalent to completing high school in the U.S.",
            "During admission interview, this applicant spoke broken English",
            "Germany",
            "Construction worker",
            "More than five years",
            "Will look for work after arriving in the U.S.",
            "Escape political/religious persecution",
            "Has visited the U.S. many times before on tourist visas",
        ],
    );
    let case2 = profile(
        &s,
        &[
            "Male",
            "Equivalent to completing two years at college in the U.S.",
            "During admission interview, this applicant spoke through an interpreter",
            "Mexico",
            "Waiter",
            "Three to five years",
            "Has a contract with a U.S. employer",
            "Escape political/religious persecution",
            "Spent six months with family members in the U.S.",
        ],
    );
    let set = ChoiceSet::new(0, vec![case1, case2], &s).map_err(|e| e.to_string())?;
    let text = render_prompt(&set, &s, &PromptTemplate::immigration()).map_err(|e| e.to_string())?;
    ensure(text == EXAMPLE_ONE, || {
        "worked example differs from reference text".into()
    })?;
    Ok(format!(
        "design sha-identical across runs; 4/4 observed replies effective, {}/{} multi-sentence rejected; example prompt byte-identical ({} bytes)",
        multi.len(),
        multi.len(),
        text.len()
    ))
}

fn main() -> ExitCode {
    let criteria: [Criterion; 8] = [
        ("effect formula reproduces reported percentages", effect_formula),
        ("coefficient recovery on 10,000 simulated pairs", coefficient_recovery),
        ("analytic gradient and Hessian vs finite differences", derivatives),
        ("paired logit equals binary logit on differences", binary_equivalence),
        ("Wald p-value rounding", wald_rounding),
        ("attribute importance normalization and ordering", importance),
        ("95% Wald interval coverage", coverage),
        ("pipeline determinism, reply parsing and prompt rendering", pipeline),
    ];
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let outcome = std::panic::catch_unwind(check).unwrap_or_else(|p| {
            Err(p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_else(|| "panicked".into()))
        });
        let secs = start.elapsed().as_secs_f64();
        match outcome {
            Ok(detail) => println!("PASS {}. {name}: {detail} [{secs:.1}s]", i + 1),
            Err(detail) => {
                failed += 1;
                println!("FAIL {}. {name}: {detail} [{secs:.1}s]", i + 1);
            }
        }
    }
    println!("acceptance: {} passed, {failed} failed", criteria.len() - failed);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
