use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use dce_core::agents::{
    run_experiment, unix_now, Noise, RecordSink, RemoteConfig, RetryPolicy, RunManifest, ScriptedConfig,
    DEFAULT_ENDPOINT,
};
use dce_core::beta::{reference, Coefficients};
use dce_core::compare::{compare_fits, write_comparison_csv};
use dce_core::design::{design_diagnostics, generate_design, load_design, save_design, DesignManifest, GENERATOR_NAME};
use dce_core::inference::{
    attribute_importance, build_design_matrix, fit_mnl, marginal_effects, wald_table, CiMethod, FitOptions,
};
use dce_core::report::{
    file_sha256, summary_text, write_coefficients_csv, write_effects_csv, write_importance_csv, write_plot_data_csv,
    FitFile, SummaryInput,
};
use dce_core::schema::load_schema;
use dce_core::{AgentConfig, AttributeSchema, ChoiceSet, DesignSpec, PromptTemplate};
use serde_json::json;

use crate::{AgentKind, AnalyzeArgs, CiArg, CompareArgs, DiagnosticsArgs, GenerateArgs, NoiseArg, RunArgs, SchemaArg};

const DESIGN_FILE: &str = "design.jsonl";
const RECORDS_FILE: &str = "records.jsonl";

fn schema(arg: &SchemaArg) -> Result<AttributeSchema> {
    match &arg.schema {
        Some(p) => load_schema(p).with_context(|| format!("loading schema {}", p.display())),
        None => Ok(AttributeSchema::immigrant_dce()),
    }
}

fn out_dir(out: &Path) -> Result<()> {
    fs::create_dir_all(out).with_context(|| format!("creating output directory {}", out.display()))
}

fn write_json(path: &Path, value: &impl serde::Serialize) -> Result<()> {
    let text = serde_json::to_string_pretty(value)?;
    fs::write(path, text + "\n").with_context(|| format!("writing {}", path.display()))
}

fn manifest_path(design: &Path) -> PathBuf {
    design.with_extension("manifest.json")
}

pub fn generate(a: GenerateArgs) -> Result<()> {
    let schema = schema(&a.schema)?;
    let spec = DesignSpec::new(a.n, a.j, a.seed, &schema)?;
    let design = generate_design(&schema, &spec)?;
    out_dir(&a.out)?;
    let path = a.out.join(DESIGN_FILE);
    save_design(&path, &design, &schema)?;
    let manifest = DesignManifest {
        seed: a.seed,
        n_sets: a.n,
        j_profiles: a.j,
        schema_version: schema.version.clone(),
        generator: GENERATOR_NAME.into(),
        design_sha256: file_sha256(&path)?,
    };
    write_json(&manifest_path(&path), &manifest)?;
    println!("wrote {} sets to {}", design.len(), path.display());
    Ok(())
}

/// Loads a design and, when present, checks it against the manifest written
/// next to it by `generate`.
fn design_with_spec(path: &Path, schema: &AttributeSchema) -> Result<(Vec<ChoiceSet>, DesignSpec, String)> {
    let design = load_design(path, schema).with_context(|| format!("loading design {}", path.display()))?;
    if design.is_empty() {
        bail!("design {} is empty", path.display());
    }
    let mpath = manifest_path(path);
    if mpath.exists() {
        let text = fs::read_to_string(&mpath)?;
        let m: DesignManifest = serde_json::from_str(&text).with_context(|| format!("reading {}", mpath.display()))?;
        if m.design_sha256 != file_sha256(path)? {
            bail!("{} does not match the hash in {}", path.display(), mpath.display());
        }
        if m.schema_version != schema.version {
            bail!(
                "design was generated for schema `{}`, not `{}`",
                m.schema_version,
                schema.version
            );
        }
        let spec = DesignSpec {
            n_sets: m.n_sets,
            j_profiles: m.j_profiles,
            seed: m.seed,
            schema_ref: m.schema_version,
        };
        return Ok((design, spec, m.generator));
    }
    log::warn!("no manifest next to {}; seed recorded as 0", path.display());
    let spec = DesignSpec {
        n_sets: design.len(),
        j_profiles: design[0].j(),
        seed: 0,
        schema_ref: schema.version.clone(),
    };
    Ok((design, spec, "external".into()))
}

fn load_beta(schema: &AttributeSchema, arg: Option<&str>) -> Result<Coefficients> {
    let Some(arg) = arg else {
        bail!("the simulated agent needs --beta (a coefficient file or one of human, gpt35, gpt4)");
    };
    let builtin = match arg {
        "human" => Some(reference::HUMAN),
        "gpt35" => Some(reference::GPT35_TURBO),
        "gpt4" => Some(reference::GPT4_TURBO),
        _ => None,
    };
    let beta = match builtin {
        Some(text) => Coefficients::from_json_str(schema, text)?,
        None => Coefficients::load(schema, arg).with_context(|| format!("loading coefficients {arg}"))?,
    };
    Ok(beta)
}

fn agent_config(a: &RunArgs, schema: &AttributeSchema) -> Result<AgentConfig> {
    if let Some(p) = &a.agent_config {
        let text = fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
        return Ok(AgentConfig::from_json_str(&text)?);
    }
    let cfg = match a.agent {
        AgentKind::Simulated => {
            let noise = match a.noise {
                NoiseArg::Gumbel => Noise::Gumbel,
                NoiseArg::None => Noise::None,
            };
            AgentConfig::simulated(schema, &load_beta(schema, a.beta.as_deref())?, noise, a.agent_seed)
        }
        AgentKind::Scripted => {
            let Some(replies) = &a.replies else {
                bail!("the scripted agent needs --replies");
            };
            AgentConfig::Scripted(ScriptedConfig {
                replies_path: replies.clone(),
            })
        }
        AgentKind::Remote => {
            let Some(model) = &a.model else {
                bail!("the remote agent needs --model");
            };
            let mut retry = RetryPolicy::default();
            if let Some(n) = a.max_attempts {
                retry.max_attempts = n;
            }
            AgentConfig::Remote(RemoteConfig {
                endpoint: a.endpoint.clone().unwrap_or_else(|| DEFAULT_ENDPOINT.into()),
                model: model.clone(),
                params: Default::default(),
                credential_env: a.api_key_env.clone(),
                max_in_flight: a.max_in_flight.unwrap_or(4),
                retry,
                timeout_secs: 120,
            })
        }
    };
    cfg.validate()?;
    Ok(cfg)
}

pub fn run(a: RunArgs) -> Result<()> {
    let schema = schema(&a.schema)?;
    let template = match &a.template {
        Some(p) => PromptTemplate::load(p).with_context(|| format!("loading template {}", p.display()))?,
        None => PromptTemplate::immigration(),
    };
    let mut agent = agent_config(&a, &schema)?;
    if let AgentConfig::Remote(r) = &mut agent {
        if let Some(n) = a.max_in_flight {
            r.max_in_flight = n;
        }
    }
    let design_path = a.design.clone().unwrap_or_else(|| a.out.join(DESIGN_FILE));
    let (design, spec, generator) = design_with_spec(&design_path, &schema)?;
    out_dir(&a.out)?;
    let records_path = a.out.join(RECORDS_FILE);
    if records_path.exists() && !a.resume {
        bail!(
            "{} already exists; pass --resume to continue it",
            records_path.display()
        );
    }
    let started = unix_now();
    let mut sink = RecordSink::open(&records_path)?;
    let summary = run_experiment(&design, &schema, &agent, &template, &mut sink)?;
    sink.compact()?;
    let manifest = RunManifest {
        design: spec,
        generator,
        schema_version: schema.version.clone(),
        agent,
        template_sha256: template.sha256(),
        started_unix: started,
        finished_unix: unix_now(),
        summary: summary.clone(),
    };
    let manifest = json!({
        "run": manifest,
        "design_file": design_path.display().to_string(),
        "design_sha256": file_sha256(&design_path)?,
        "records_sha256": file_sha256(&records_path)?,
    });
    write_json(&a.out.join("run.manifest.json"), &manifest)?;
    println!(
        "{} sets: {} resumed, {} recorded, {} effective, {} failed; response rate {:.4}",
        summary.n_sets, summary.resumed, summary.recorded, summary.effective, summary.failed, summary.response_rate
    );
    Ok(())
}

fn csv_file(path: &Path) -> Result<fs::File> {
    fs::File::create(path).with_context(|| format!("creating {}", path.display()))
}

pub fn analyze(a: AnalyzeArgs) -> Result<()> {
    let schema = schema(&a.schema)?;
    let design_path = a.design.clone().unwrap_or_else(|| a.out.join(DESIGN_FILE));
    let records_path = a.records.clone().unwrap_or_else(|| a.out.join(RECORDS_FILE));
    let (design, _, _) = design_with_spec(&design_path, &schema)?;
    let records = dce_core::agents::load_records(&records_path)
        .with_context(|| format!("loading records {}", records_path.display()))?;
    let dm = build_design_matrix(&records, &design, &schema)?;
    let mut opts = FitOptions {
        max_iter: a.max_iter,
        ..FitOptions::default()
    };
    if let Some(r) = a.ridge {
        if !(r >= 0.0 && r.is_finite()) {
            bail!("--ridge must be a non-negative number");
        }
        opts.ridge = r;
        opts.always_ridge = true;
    }
    let fit = fit_mnl(&dm, &opts)?;
    let (wald, mut warnings) = wald_table(&fit, a.force)?;
    warnings.splice(0..0, fit.warnings.iter().cloned());
    let method = match a.ci {
        CiArg::Transform => CiMethod::Transform,
        CiArg::Delta => CiMethod::Delta,
    };
    let effects = if fit.j_profiles == Some(2) {
        marginal_effects(&fit, method, a.force)?
    } else {
        warnings.push("marginal effects need exactly two profiles per set; skipped".into());
        Vec::new()
    };
    let importance = attribute_importance(&dm, &fit, &opts, a.force)?;
    if dm.dropped_sets > 0 {
        warnings.push(format!("{} ineffective responses excluded", dm.dropped_sets));
    }

    out_dir(&a.out)?;
    let fit_path = a.out.join("fit.json");
    FitFile::new(&schema.version, &fit, &wald).save(&fit_path)?;
    let tables = ["coefficients.csv", "effects.csv", "importance.csv", "plot_data.csv"];
    write_coefficients_csv(csv_file(&a.out.join(tables[0]))?, &wald)?;
    write_effects_csv(csv_file(&a.out.join(tables[1]))?, &effects)?;
    write_importance_csv(csv_file(&a.out.join(tables[2]))?, &importance)?;
    write_plot_data_csv(csv_file(&a.out.join(tables[3]))?, &schema, &effects, &importance)?;
    let summary = summary_text(&SummaryInput {
        records: records.len(),
        effective: dm.n_sets(),
        fit: &fit,
        wald: &wald,
        effects: &effects,
        importance: &importance,
        warnings: &warnings,
    });
    fs::write(a.out.join("summary.txt"), &summary)?;

    let mut outputs = serde_json::Map::new();
    for name in std::iter::once("fit.json").chain(tables).chain(["summary.txt"]) {
        outputs.insert(name.into(), file_sha256(a.out.join(name))?.into());
    }
    let manifest = json!({
        "schema_version": schema.version,
        "design_sha256": file_sha256(&design_path)?,
        "records_sha256": file_sha256(&records_path)?,
        "options": opts,
        "ci": match a.ci { CiArg::Transform => "transform", CiArg::Delta => "delta" },
        "force": a.force,
        "warnings": warnings,
        "outputs": outputs,
        "created_unix": unix_now(),
    });
    write_json(&a.out.join("analysis.manifest.json"), &manifest)?;
    print!("{summary}");
    Ok(())
}

pub fn compare(a: CompareArgs) -> Result<()> {
    let fa = FitFile::load(&a.fit_a)?;
    let fb = FitFile::load(&a.fit_b)?;
    let cmp = compare_fits(&fa, &fb)?;
    let agree = cmp.rows.iter().filter(|r| r.same_sign).count();
    match &a.out {
        Some(p) => {
            write_comparison_csv(csv_file(p)?, &cmp)?;
            println!("wrote {}", p.display());
        }
        None => write_comparison_csv(std::io::stdout().lock(), &cmp)?,
    }
    eprintln!(
        "sign agreement: {:.1}% ({agree}/{})",
        100.0 * cmp.sign_agreement,
        cmp.rows.len()
    );
    Ok(())
}

pub fn diagnostics(a: DiagnosticsArgs) -> Result<()> {
    let schema = schema(&a.schema)?;
    let design = load_design(&a.design, &schema).with_context(|| format!("loading design {}", a.design.display()))?;
    let d = design_diagnostics(&design, &schema)?;
    match &a.out {
        Some(p) => write_json(p, &d)?,
        None => println!("{}", serde_json::to_string_pretty(&d)?),
    }
    Ok(())
}
