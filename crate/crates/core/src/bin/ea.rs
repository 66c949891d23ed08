//! `ea`: command-line front-end.
//!
//! stdout carries machine-readable results only; progress and errors go to
//! stderr. Exit codes: 0 success, 1 Error-severity findings, 2 bad usage or
//! input, 3 provider failure.

use std::fs;
use std::io::{IsTerminal, Read};
use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;
use std::time::Duration;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Deserialize;

use ea_core::llm::defeaters::{build_defeater_prompt, check_target};
use ea_core::llm::provider::DEFAULT_ENDPOINT;
use ea_core::llm::{
    default_bank, generate_mitigation, load_question_bank, parse_defeater_response,
    run_proficiency_session, CannedProvider, ChatProvider, GenerationError, GenerationOptions,
    LiveProvider, MitigationError, QuestionItem, ReplayProvider, SessionError, Settings,
    Transcript,
};
use ea_core::rules::CoverageError;
use ea_core::service::ReviewStore;
use ea_core::stats::{evaluate, GradeBands, RatingMatrix};
use ea_core::{
    coverage, parse, serialize, validate, DefeaterKind, Diagnostic, EaArgument, Severity,
};

#[derive(Parser)]
#[command(
    name = "ea",
    version,
    about = "Eliminative Argumentation assurance-case toolkit"
)]
struct Cli {
    /// Output format for results on stdout.
    #[arg(long, global = true, value_enum, default_value = "json")]
    format: Format,
    /// TOML file with defaults for provider and service settings.
    #[arg(long, global = true, env = "EA_CONFIG")]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Json,
    Text,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum, Deserialize)]
#[serde(rename_all = "lowercase")]
enum ProviderKind {
    Live,
    Replay,
    Canned,
}

#[derive(Subcommand)]
enum Command {
    /// Check an ea-text file and list diagnostics.
    Validate { file: PathBuf },
    /// Report uncovered elements and unresolved defeaters.
    Coverage { file: PathBuf },
    /// Print the canonical text form of an ea-text file.
    Fmt { file: PathBuf },
    /// Run the proficiency question bank and print the transcript.
    Ask {
        /// Question bank JSON (defaults to the built-in bank).
        #[arg(long)]
        bank: Option<PathBuf>,
        #[command(flatten)]
        llm: LlmArgs,
    },
    /// Propose defeater candidates for one element.
    Generate {
        file: PathBuf,
        #[arg(long)]
        target: String,
        /// rebutting, undermining or undercutting.
        #[arg(long)]
        kind: DefeaterKind,
        #[arg(long, default_value_t = 3)]
        n: usize,
        /// Ask for direct answers without step-by-step reasoning.
        #[arg(long)]
        no_cot: bool,
        /// Leave the rule library out of the prompt.
        #[arg(long)]
        no_rules: bool,
        #[command(flatten)]
        llm: LlmArgs,
    },
    /// Propose a sub-argument that eliminates a defeater.
    Mitigate {
        file: PathBuf,
        #[arg(long)]
        defeater: String,
        #[command(flatten)]
        llm: LlmArgs,
    },
    /// Agreement and graded aggregation for a two-rater ratings CSV.
    Eval {
        /// CSV with header `question_id,rater_id,score`.
        ratings: PathBuf,
        #[arg(long)]
        bank: Option<PathBuf>,
        #[arg(long, env = "EA_CI_LEVEL")]
        level: Option<f64>,
    },
    /// Run the review service.
    Serve {
        #[arg(long, env = "EA_ADDR")]
        addr: Option<SocketAddr>,
        #[arg(long, env = "EA_DATA_DIR")]
        data_dir: Option<PathBuf>,
        #[command(flatten)]
        llm: LlmArgs,
    },
}

#[derive(Args, Clone)]
struct LlmArgs {
    #[arg(long, value_enum, env = "EA_PROVIDER")]
    provider: Option<ProviderKind>,
    /// Canned-response fixture (JSON) for `--provider canned`.
    #[arg(long, env = "EA_CANNED")]
    canned: Option<PathBuf>,
    /// Recorded transcript for `--provider replay`.
    #[arg(long, env = "EA_TRANSCRIPT")]
    transcript: Option<PathBuf>,
    #[arg(long, env = "EA_SEED")]
    seed: Option<u64>,
    #[arg(long, env = "EA_TEMPERATURE")]
    temperature: Option<f64>,
    #[arg(long, env = "EA_MODEL")]
    model: Option<String>,
    #[arg(long, env = "EA_LLM_ENDPOINT")]
    endpoint: Option<String>,
    #[arg(long, env = "EA_TIMEOUT_SECS")]
    timeout_secs: Option<u64>,
}

/// Lowest-precedence defaults, read from `--config`.
#[derive(Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct FileConfig {
    provider: Option<ProviderKind>,
    canned: Option<PathBuf>,
    transcript: Option<PathBuf>,
    seed: Option<u64>,
    temperature: Option<f64>,
    model: Option<String>,
    endpoint: Option<String>,
    timeout_secs: Option<u64>,
    addr: Option<SocketAddr>,
    data_dir: Option<PathBuf>,
    ci_level: Option<f64>,
}

enum Failure {
    Findings,
    Input(String),
    Provider(String),
}

impl Failure {
    fn exit_code(&self) -> u8 {
        match self {
            Failure::Findings => 1,
            Failure::Input(_) => 2,
            Failure::Provider(_) => 3,
        }
    }
}

type CliResult = Result<(), Failure>;

fn input(e: impl std::fmt::Display) -> Failure {
    Failure::Input(e.to_string())
}

fn read_source(path: &Path) -> Result<String, Failure> {
    if path.as_os_str() == "-" {
        let mut s = String::new();
        std::io::stdin()
            .read_to_string(&mut s)
            .map_err(|e| input(format!("stdin: {e}")))?;
        Ok(s)
    } else {
        fs::read_to_string(path).map_err(|e| input(format!("{}: {e}", path.display())))
    }
}

fn load_argument(path: &Path) -> Result<EaArgument, Failure> {
    let source = read_source(path)?;
    parse(&source).map_err(|errors| {
        for e in &errors {
            eprintln!("{}:{e}", path.display());
        }
        input(format!("{} parse error(s)", errors.len()))
    })
}

fn load_bank(path: Option<&Path>) -> Result<Vec<QuestionItem>, Failure> {
    match path {
        None => Ok(default_bank()),
        Some(p) => load_question_bank(&read_source(p)?).map_err(input),
    }
}

fn print_json(value: &impl serde::Serialize) {
    println!(
        "{}",
        serde_json::to_string_pretty(value).expect("serializable output")
    );
}

fn diagnostic_line(d: &Diagnostic) -> String {
    let severity = match d.severity {
        Severity::Error => "error",
        Severity::Warning => "warning",
    };
    format!("{} {severity} {}: {}", d.code, d.subject, d.message)
}

struct Resolved {
    provider: Arc<dyn ChatProvider>,
    settings: Settings,
}

fn resolve_llm(args: &LlmArgs, cfg: &FileConfig) -> Result<Resolved, Failure> {
    let defaults = Settings::default();
    let settings = Settings {
        seed: args.seed.or(cfg.seed).unwrap_or(defaults.seed),
        temperature: args
            .temperature
            .or(cfg.temperature)
            .unwrap_or(defaults.temperature),
        model: args
            .model
            .clone()
            .or(cfg.model.clone())
            .unwrap_or(defaults.model),
    };
    let kind = args.provider.or(cfg.provider).unwrap_or(ProviderKind::Live);
    let provider: Arc<dyn ChatProvider> = match kind {
        ProviderKind::Canned => {
            let path = args
                .canned
                .as_ref()
                .or(cfg.canned.as_ref())
                .ok_or_else(|| input("--provider canned needs --canned FILE"))?;
            Arc::new(CannedProvider::from_json(&read_source(path)?).map_err(input)?)
        }
        ProviderKind::Replay => {
            let path = args
                .transcript
                .as_ref()
                .or(cfg.transcript.as_ref())
                .ok_or_else(|| input("--provider replay needs --transcript FILE"))?;
            let transcript = Transcript::from_json(&read_source(path)?)
                .map_err(|e| input(format!("{}: {e}", path.display())))?;
            Arc::new(ReplayProvider::new(&transcript))
        }
        ProviderKind::Live => {
            let endpoint = args
                .endpoint
                .clone()
                .or(cfg.endpoint.clone())
                .unwrap_or_else(|| DEFAULT_ENDPOINT.to_string());
            let api_key = std::env::var("EA_LLM_API_KEY")
                .or_else(|_| std::env::var("OPENAI_API_KEY"))
                .ok();
            let timeout =
                Duration::from_secs(args.timeout_secs.or(cfg.timeout_secs).unwrap_or(120));
            Arc::new(LiveProvider::new(endpoint, api_key, timeout))
        }
    };
    Ok(Resolved { provider, settings })
}

fn run(cli: Cli) -> CliResult {
    let cfg = match &cli.config {
        None => FileConfig::default(),
        Some(path) => toml::from_str(&read_source(path)?)
            .map_err(|e| input(format!("{}: {e}", path.display())))?,
    };
    let format = cli.format;

    match cli.command {
        Command::Validate { file } => {
            let arg = load_argument(&file)?;
            let diagnostics = validate(&arg);
            for d in &diagnostics {
                match format {
                    Format::Json => println!("{}", d.to_json_line()),
                    Format::Text => println!("{}", diagnostic_line(d)),
                }
            }
            if diagnostics.iter().any(Diagnostic::is_error) {
                return Err(Failure::Findings);
            }
        }
        Command::Fmt { file } => print!("{}", serialize(&load_argument(&file)?)),
        Command::Coverage { file } => {
            let arg = load_argument(&file)?;
            match coverage(&arg) {
                Ok(report) => match format {
                    Format::Json => print_json(&report),
                    Format::Text => {
                        println!("uncovered claims: {}", report.uncovered_claims.join(" "));
                        println!(
                            "uncovered evidence: {}",
                            report.uncovered_evidence.join(" ")
                        );
                        println!("uncovered rules: {}", report.uncovered_rules.join(" "));
                        println!(
                            "unresolved defeaters: {}",
                            report.unresolved_defeaters.join(" ")
                        );
                        println!("resolution ratio: {:.3}", report.resolution_ratio);
                    }
                },
                Err(CoverageError::PreconditionViolated(errors)) => {
                    eprintln!("coverage is undefined while structural errors remain:");
                    for d in &errors {
                        eprintln!("  {}", diagnostic_line(d));
                    }
                    return Err(Failure::Findings);
                }
            }
        }
        Command::Ask { bank, llm } => {
            let bank = load_bank(bank.as_deref())?;
            let r = resolve_llm(&llm, &cfg)?;
            eprintln!(
                "asking {} question(s) with model {}",
                bank.len(),
                r.settings.model
            );
            let transcript = run_proficiency_session(&bank, r.provider.as_ref(), &r.settings)
                .map_err(|e| match e {
                    SessionError::EmptyBank => input(e),
                    SessionError::Provider { .. } => Failure::Provider(e.to_string()),
                })?;
            match format {
                Format::Json => println!("{}", transcript.to_json()),
                Format::Text => {
                    for entry in &transcript.entries {
                        println!("## {}\n{}\n", entry.question_id, entry.response_text);
                    }
                }
            }
        }
        Command::Generate {
            file,
            target,
            kind,
            n,
            no_cot,
            no_rules,
            llm,
        } => {
            let arg = load_argument(&file)?;
            let r = resolve_llm(&llm, &cfg)?;
            let options = GenerationOptions {
                chain_of_thought: !no_cot,
                rule_library: !no_rules,
                n_candidates: n,
            };
            check_target(&arg, &target, kind).map_err(input)?;
            let request =
                build_defeater_prompt(&arg, &target, kind, &options, &r.settings).map_err(input)?;
            let response = r
                .provider
                .complete(&request)
                .map_err(|e| Failure::Provider(e.to_string()))?;
            let candidates =
                parse_defeater_response(&response, kind, &target).map_err(|e| match e {
                    GenerationError::EmptyResponse => Failure::Provider(e.to_string()),
                    other => input(other),
                })?;
            match format {
                Format::Json => print_json(&candidates),
                Format::Text => {
                    for c in &candidates {
                        println!("{} [{}] {}", c.id, c.kind.name(), c.text);
                    }
                }
            }
        }
        Command::Mitigate {
            file,
            defeater,
            llm,
        } => {
            let arg = load_argument(&file)?;
            let r = resolve_llm(&llm, &cfg)?;
            let outcome = generate_mitigation(&arg, &defeater, r.provider.as_ref(), &r.settings)
                .map_err(|e| match e {
                    MitigationError::Provider(p) => Failure::Provider(p.to_string()),
                    other => input(other),
                })?;
            match format {
                Format::Json => print_json(&outcome),
                Format::Text => {
                    println!("{}", outcome.narrative);
                    match &outcome.rejection {
                        Some(why) => eprintln!("{why}"),
                        None => print!("{}", outcome.patch),
                    }
                }
            }
        }
        Command::Eval {
            ratings,
            bank,
            level,
        } => {
            let bank = load_bank(bank.as_deref())?;
            let matrix =
                RatingMatrix::from_csv(read_source(&ratings)?.as_bytes()).map_err(input)?;
            let level = level.or(cfg.ci_level).unwrap_or(0.95);
            let report = evaluate(&matrix, &bank, level, &GradeBands::default()).map_err(input)?;
            match format {
                Format::Json => print_json(&report),
                Format::Text => {
                    println!(
                        "tau-b {:.4} ({:.0}% CI [{:.4}, {:.4}], n={})",
                        report.tau_b,
                        report.ci_level * 100.0,
                        report.ci[0],
                        report.ci[1],
                        report.n
                    );
                    for (category, stat) in &report.categories {
                        println!("{category:?}: mean {:.3} over {}", stat.mean, stat.count);
                    }
                    println!("overall {:.3} grade {}", report.overall, report.grade);
                }
            }
        }
        Command::Serve {
            addr,
            data_dir,
            llm,
        } => {
            let r = resolve_llm(&llm, &cfg)?;
            let addr = addr
                .or(cfg.addr)
                .unwrap_or_else(|| SocketAddr::from(([127, 0, 0, 1], 8080)));
            let data_dir = data_dir
                .or(cfg.data_dir.clone())
                .unwrap_or_else(|| PathBuf::from("ea-data"));
            let store = ReviewStore::open(&data_dir, r.provider, r.settings).map_err(input)?;
            let runtime = tokio::runtime::Runtime::new().map_err(input)?;
            runtime
                .block_on(ea_core::service::serve(Arc::new(store), addr))
                .map_err(|e| input(format!("serve on {addr}: {e}")))?;
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    tracing_subscriber::fmt()
        .with_writer(std::io::stderr)
        .with_ansi(std::io::stderr().is_terminal())
        .with_env_filter(
            tracing_subscriber::EnvFilter::try_from_env("EA_LOG")
                .unwrap_or_else(|_| tracing_subscriber::EnvFilter::new("info")),
        )
        .init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(failure) => {
            match &failure {
                Failure::Findings => {}
                Failure::Input(msg) => eprintln!("error: {msg}"),
                Failure::Provider(msg) => eprintln!("provider error: {msg}"),
            }
            ExitCode::from(failure.exit_code())
        }
    }
}
