use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use epigate::harness::{
    assay_know_how, compare_policies, emit_profile, emit_report, emit_review, load_scenario,
    parse_document, run_trials, Document, HarnessError, OperatingEnvelope, Parallelism,
    ReportFormat, RunReport, ScenarioSpec,
};
use epigate::policy::{PolicyConfig, PolicyKind};

/// Epistemic gating simulator: runs scenario documents and emits review reports.
#[derive(Parser)]
#[command(name = "epigate", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run every trial of a scenario and emit the run report.
    Run {
        #[command(flatten)]
        common: Common,
        /// Policy override: AS1v, AS2b, AS3bv or a path to a policy document.
        #[arg(long)]
        policy: Option<String>,
        /// Drop gate records, verdict diagnostics and doxastic reports.
        #[arg(long)]
        redact: bool,
    },
    /// Run one scenario under several policies and emit a side-by-side review.
    Compare {
        #[command(flatten)]
        common: Common,
        /// Policies to compare; repeat the flag. Defaults to AS2b and AS3bv.
        #[arg(long = "policy")]
        policies: Vec<String>,
        /// Saved run reports to compare instead of running the scenario.
        #[arg(long = "report", conflicts_with = "policies")]
        reports: Vec<PathBuf>,
    },
    /// Print the epistemic verdict of every scenario query.
    Classify {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        policy: Option<String>,
    },
    /// Measure behavioral competence across envelopes of rising difficulty.
    Assay {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        policy: Option<String>,
        /// JSON list of envelopes: name, difficulty, confusion_noise, availability_scale.
        #[arg(long)]
        envelopes: PathBuf,
        /// Score redacted reports only.
        #[arg(long)]
        black_box: bool,
    },
    /// Re-emit a saved JSON run report in another format.
    Report {
        /// Saved run report.
        input: PathBuf,
        #[arg(long, value_enum, default_value_t = Format::Summary)]
        format: Format,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Args)]
struct Common {
    /// Scenario document.
    #[arg(long)]
    scenario: Option<PathBuf>,
    /// Override the master seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Override the trial count.
    #[arg(long)]
    trials: Option<usize>,
    /// Output file, or directory for multi-file formats. Defaults to stdout.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Format::Json)]
    format: Format,
    /// Run trials on all cores; output is identical to a serial run.
    #[arg(long)]
    parallel: bool,
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Json,
    Csv,
    Summary,
}

impl From<Format> for ReportFormat {
    fn from(f: Format) -> Self {
        match f {
            Format::Json => ReportFormat::Json,
            Format::Csv => ReportFormat::Csv,
            Format::Summary => ReportFormat::Summary,
        }
    }
}

enum Failure {
    Usage(String),
    Harness(HarnessError),
}

impl From<HarnessError> for Failure {
    fn from(e: HarnessError) -> Self {
        Failure::Harness(e)
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::Harness(HarnessError::Io(e))
    }
}

fn exit_code(e: &HarnessError) -> u8 {
    match e {
        HarnessError::Io(_) => 1,
        HarnessError::Schema { .. } => 3,
        HarnessError::DanglingReference(_) => 4,
        HarnessError::Trial { .. } | HarnessError::Engine(_) | HarnessError::InvalidAssay(_) => 5,
        HarnessError::CorpusMismatch(_) => 6,
    }
}

fn load(common: &Common) -> Result<ScenarioSpec, Failure> {
    let path = common
        .scenario
        .as_ref()
        .ok_or_else(|| Failure::Usage("--scenario is required".into()))?;
    let mut spec = load_scenario(&fs::read_to_string(path)?)?;
    if let Some(s) = common.seed {
        spec.master_seed = s;
    }
    if let Some(t) = common.trials {
        spec.trials = t;
    }
    Ok(spec)
}

/// A kind name keeps the scenario's thresholds; anything else is read as a policy document.
fn resolve_policy(spec: &ScenarioSpec, arg: &str) -> Result<PolicyConfig, Failure> {
    let kind = match arg {
        "AS1v" => Some(PolicyKind::AS1v),
        "AS2b" => Some(PolicyKind::AS2b),
        "AS3bv" => Some(PolicyKind::AS3bv),
        _ => None,
    };
    match kind {
        Some(k) => Ok(spec.policy.as_kind(k)),
        None => Ok(parse_document(&fs::read_to_string(arg)?)?),
    }
}

fn write(docs: Vec<Document>, out: Option<&Path>) -> Result<(), Failure> {
    match (out, docs.len()) {
        (None, 1) => print!("{}", with_newline(&docs[0].body)),
        (None, _) => {
            for d in &docs {
                println!("==> {} <==", d.name);
                print!("{}", with_newline(&d.body));
            }
        }
        (Some(path), 1) => fs::write(path, with_newline(&docs[0].body))?,
        (Some(dir), _) => {
            fs::create_dir_all(dir)?;
            for d in &docs {
                fs::write(dir.join(&d.name), with_newline(&d.body))?;
            }
        }
    }
    Ok(())
}

fn with_newline(s: &str) -> String {
    if s.ends_with('\n') {
        s.to_string()
    } else {
        format!("{s}\n")
    }
}

fn parallelism(common: &Common) -> Parallelism {
    if common.parallel {
        Parallelism::Parallel
    } else {
        Parallelism::Serial
    }
}

fn execute(cli: Cli) -> Result<(), Failure> {
    match cli.command {
        Command::Run {
            common,
            policy,
            redact,
        } => {
            let spec = load(&common)?;
            let policy = policy.map(|p| resolve_policy(&spec, &p)).transpose()?;
            let mut report = run_trials(&spec, policy.as_ref(), parallelism(&common))?;
            if redact {
                report = report.redacted();
            }
            write(
                emit_report(&report, common.format.into()),
                common.out.as_deref(),
            )
        }
        Command::Compare {
            common,
            policies,
            reports,
        } => {
            let (runs, criteria) = if reports.is_empty() {
                let spec = load(&common)?;
                let names = if policies.is_empty() {
                    vec!["AS2b".into(), "AS3bv".into()]
                } else {
                    policies
                };
                let mut runs = Vec::new();
                for n in &names {
                    let p = resolve_policy(&spec, n)?;
                    runs.push(run_trials(&spec, Some(&p), parallelism(&common))?);
                }
                (runs, spec.review.clone())
            } else {
                let mut runs = Vec::new();
                for r in &reports {
                    runs.push(parse_document::<RunReport>(&fs::read_to_string(r)?)?);
                }
                let criteria = match &common.scenario {
                    Some(_) => load(&common)?.review,
                    None => Default::default(),
                };
                (runs, criteria)
            };
            let review = compare_policies(&runs, &criteria)?;
            write(
                emit_review(&review, common.format.into()),
                common.out.as_deref(),
            )
        }
        Command::Classify { common, policy } => {
            let spec = load(&common)?;
            let policy = policy.map(|p| resolve_policy(&spec, &p)).transpose()?;
            let spec = ScenarioSpec {
                requests: Vec::new(),
                ..spec
            };
            let report = run_trials(&spec, policy.as_ref(), parallelism(&common))?;
            let docs = emit_report(&report, common.format.into())
                .into_iter()
                .filter(|d| d.name != "decisions.csv")
                .collect();
            write(docs, common.out.as_deref())
        }
        Command::Assay {
            common,
            policy,
            envelopes,
            black_box,
        } => {
            let spec = load(&common)?;
            let policy = match policy {
                Some(p) => resolve_policy(&spec, &p)?,
                None => spec.policy.clone(),
            };
            let envelopes: Vec<OperatingEnvelope> =
                parse_document(&fs::read_to_string(envelopes)?)?;
            let profile = assay_know_how(&spec, &policy, &envelopes, black_box)?;
            write(
                emit_profile(&profile, common.format.into()),
                common.out.as_deref(),
            )
        }
        Command::Report { input, format, out } => {
            let report: RunReport = parse_document(&fs::read_to_string(input)?)?;
            write(emit_report(&report, format.into()), out.as_deref())
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    match execute(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(2)
        }
        Err(Failure::Harness(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
