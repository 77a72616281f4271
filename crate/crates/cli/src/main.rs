use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

mod cmd;

#[derive(Parser)]
#[command(name = "dce", version, about = "Discrete choice audits of decision-making agents")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Draw a randomized design of paired profiles.
    Generate(GenerateArgs),
    /// Collect one forced choice per set from an agent.
    Run(RunArgs),
    /// Fit the logit model and write coefficient, effect and importance tables.
    Analyze(AnalyzeArgs),
    /// Compare two fit files level by level.
    Compare(CompareArgs),
    /// Level balance and overlap statistics for a design.
    Diagnostics(DiagnosticsArgs),
}

#[derive(Args)]
struct SchemaArg {
    /// Attribute schema JSON; the bundled immigrant-profile schema if omitted.
    #[arg(long)]
    schema: Option<PathBuf>,
}

#[derive(Args)]
struct GenerateArgs {
    #[command(flatten)]
    schema: SchemaArg,
    /// Number of choice sets.
    #[arg(long, default_value_t = dce_core::design::DEFAULT_N_SETS)]
    n: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Profiles per set.
    #[arg(long, default_value_t = 2)]
    j: usize,
    /// Output directory; receives design.jsonl and design.manifest.json.
    #[arg(long, default_value = ".")]
    out: PathBuf,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum AgentKind {
    Simulated,
    Scripted,
    Remote,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum NoiseArg {
    Gumbel,
    None,
}

#[derive(Args)]
struct RunArgs {
    #[command(flatten)]
    schema: SchemaArg,
    /// Prompt template; the bundled immigration-officer prompt if omitted.
    #[arg(long)]
    template: Option<PathBuf>,
    /// Design file [default: <out>/design.jsonl].
    #[arg(long)]
    design: Option<PathBuf>,
    /// Agent kind, ignored when --agent-config is given.
    #[arg(long, value_enum, default_value = "simulated")]
    agent: AgentKind,
    /// Full agent configuration as JSON (`{"kind": "remote", ...}`).
    #[arg(long)]
    agent_config: Option<PathBuf>,
    /// Coefficients for the simulated agent: a fit file, a keyed vector, a bare
    /// array, or one of the bundled names `human`, `gpt35`, `gpt4`.
    #[arg(long)]
    beta: Option<String>,
    #[arg(long, value_enum, default_value = "gumbel")]
    noise: NoiseArg,
    /// Seed for the simulated agent's utility noise.
    #[arg(long, default_value_t = 0)]
    agent_seed: u64,
    /// Reply script for the scripted agent (plain lines or JSONL with set_id/reply).
    #[arg(long)]
    replies: Option<PathBuf>,
    /// Chat-completions endpoint for the remote agent.
    #[arg(long)]
    endpoint: Option<String>,
    #[arg(long)]
    model: Option<String>,
    /// Environment variable holding the bearer token.
    #[arg(long, default_value = dce_core::agents::DEFAULT_CREDENTIAL_ENV)]
    api_key_env: String,
    #[arg(long)]
    max_in_flight: Option<usize>,
    #[arg(long)]
    max_attempts: Option<u32>,
    /// Continue an existing records file instead of refusing to touch it.
    #[arg(long)]
    resume: bool,
    /// Output directory; receives records.jsonl and run.manifest.json.
    #[arg(long, default_value = ".")]
    out: PathBuf,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum CiArg {
    Transform,
    Delta,
}

#[derive(Args)]
struct AnalyzeArgs {
    #[command(flatten)]
    schema: SchemaArg,
    /// Design file [default: <out>/design.jsonl].
    #[arg(long)]
    design: Option<PathBuf>,
    /// Records file [default: <out>/records.jsonl].
    #[arg(long)]
    records: Option<PathBuf>,
    /// Fit with this L2 penalty from the start.
    #[arg(long)]
    ridge: Option<f64>,
    /// Confidence interval construction for marginal effects.
    #[arg(long, value_enum, default_value = "transform")]
    ci: CiArg,
    #[arg(long, default_value_t = 100)]
    max_iter: usize,
    /// Report a fit that did not converge instead of failing.
    #[arg(long)]
    force: bool,
    /// Output directory for the tables, fit.json, summary.txt and the manifest.
    #[arg(long, default_value = ".")]
    out: PathBuf,
}

#[derive(Args)]
struct CompareArgs {
    fit_a: PathBuf,
    fit_b: PathBuf,
    /// CSV destination; printed to stdout if omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct DiagnosticsArgs {
    #[command(flatten)]
    schema: SchemaArg,
    #[arg(long)]
    design: PathBuf,
    /// JSON destination; printed to stdout if omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Generate(a) => cmd::generate(a),
        Command::Run(a) => cmd::run(a),
        Command::Analyze(a) => cmd::analyze(a),
        Command::Compare(a) => cmd::compare(a),
        Command::Diagnostics(a) => cmd::diagnostics(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
