//! `maieutic`: answer true/false questions with explanation trees and
//! weighted MAX-SAT, evaluate datasets, and convert artifacts.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};

use maieutic_core::compile::CompileMode;
use maieutic_core::harness::config::{BackendConfig, Backends, VerifierConfig};
use maieutic_core::harness::explain::{explain_dot, explain_json, explain_text};
use maieutic_core::harness::run::RunInfo;
use maieutic_core::harness::{evaluate, load_dataset, Engine, InferenceResult, Method, RunConfig};
use maieutic_core::lm::HttpBackendConfig;
use maieutic_core::maxsat::wcnf::{export_wcnf, sidecar_path};
use maieutic_core::MaieuticTree;

#[derive(Parser)]
#[command(name = "maieutic", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum MethodArg {
    Standard,
    ExplanationBased,
    Maieutic,
}

impl From<MethodArg> for Method {
    fn from(m: MethodArg) -> Self {
        match m {
            MethodArg::Standard => Method::Standard,
            MethodArg::ExplanationBased => Method::ExplanationBased,
            MethodArg::Maieutic => Method::Maieutic,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum BackendKind {
    Scripted,
    Http,
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    Likelihood,
    Verifier,
}

#[derive(Clone, Copy, ValueEnum)]
enum ExplainFormat {
    Text,
    Dot,
    Json,
}

/// Options shared by commands that talk to a model.
#[derive(clap::Args)]
struct EngineArgs {
    /// Run configuration (TOML or JSON).
    #[arg(long)]
    config: Option<PathBuf>,
    /// Backend kind; overrides the config file.
    #[arg(long, value_enum)]
    backend: Option<BackendKind>,
    /// Fixture file for the scripted backend.
    #[arg(long)]
    fixtures: Option<PathBuf>,
    /// NLI fixture table for a scripted verifier.
    #[arg(long)]
    nli_fixtures: Option<PathBuf>,
    /// How tree edges become clauses.
    #[arg(long, value_enum)]
    mode: Option<ModeArg>,
    /// Response cache directory.
    #[arg(long)]
    cache_dir: Option<PathBuf>,
    /// Seed folded into cache keys of sampled requests.
    #[arg(long)]
    seed: Option<u64>,
}

impl EngineArgs {
    fn run_config(&self) -> Result<RunConfig> {
        let mut config = match &self.config {
            Some(path) => RunConfig::load(path)?,
            None => RunConfig::default(),
        };
        match (self.backend, &self.fixtures) {
            (Some(BackendKind::Http), _) => {
                config.backend = Some(BackendConfig::Http(HttpBackendConfig {
                    endpoint: String::new(),
                    model: String::new(),
                    api_key: None,
                    retry: Default::default(),
                }))
            }
            (_, Some(fixtures)) => {
                config.backend = Some(BackendConfig::Scripted {
                    fixtures: fixtures.clone(),
                })
            }
            (Some(BackendKind::Scripted), None) => {
                if !matches!(config.backend, Some(BackendConfig::Scripted { .. })) {
                    bail!("--backend scripted needs --fixtures");
                }
            }
            (None, None) => {}
        }
        if let Some(path) = &self.nli_fixtures {
            config.verifier = Some(VerifierConfig::Scripted {
                fixtures: path.clone(),
            });
        }
        if let Some(mode) = self.mode {
            config.mode = match mode {
                ModeArg::Likelihood => CompileMode::Likelihood,
                ModeArg::Verifier => CompileMode::Verifier,
            };
        }
        if let Some(dir) = &self.cache_dir {
            config.cache_dir = Some(dir.clone());
        }
        if self.seed.is_some() {
            config.seed = self.seed;
        }
        if config.backend.is_none() {
            bail!("no backend configured: pass --fixtures, --backend http, or --config");
        }
        Ok(config)
    }
}

#[derive(Subcommand)]
enum Command {
    /// Answer one question.
    Infer {
        #[arg(long, short)]
        question: String,
        #[arg(long, value_enum)]
        method: Option<MethodArg>,
        #[command(flatten)]
        engine: EngineArgs,
        /// Print a rationale instead of the bare result JSON.
        #[arg(long, value_enum, num_args = 0..=1, default_missing_value = "text")]
        explain: Option<ExplainFormat>,
    },
    /// Evaluate a JSONL dataset and write results, metrics, manifest and trace.
    Eval {
        #[arg(long)]
        dataset: PathBuf,
        #[arg(long)]
        split: Option<String>,
        #[arg(long, value_enum)]
        method: Option<MethodArg>,
        #[command(flatten)]
        engine: EngineArgs,
        /// Output directory.
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        parallelism: Option<usize>,
    },
    /// Render a tree (or an inference result holding one) as Graphviz DOT.
    Tree {
        /// Tree JSON or inference-result JSON.
        input: PathBuf,
        #[arg(long, short)]
        output: Option<PathBuf>,
    },
    /// Compile a question's tree and export it as DIMACS WCNF.
    Wcnf {
        #[arg(long, short)]
        question: String,
        #[command(flatten)]
        engine: EngineArgs,
        #[arg(long, short)]
        output: PathBuf,
    },
}

fn open(config: &RunConfig) -> Result<(Backends, maieutic_core::harness::EngineSettings)> {
    let backends = config.open_backends().context("opening backends")?;
    let settings = config.settings()?;
    Ok((backends, settings))
}

fn engine<'a>(
    backends: &'a Backends,
    settings: maieutic_core::harness::EngineSettings,
) -> Engine<'a> {
    let e = Engine::new(backends.lm.as_ref(), settings);
    match &backends.verifier {
        Some(v) => e.with_verifier(v.as_ref()),
        None => e,
    }
}

fn write_or_print(text: &str, output: Option<&Path>) -> Result<()> {
    match output {
        Some(p) => std::fs::write(p, text).with_context(|| format!("writing {}", p.display())),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Infer {
            question,
            method,
            engine: args,
            explain,
        } => {
            let config = args.run_config()?;
            let method = method.map(Method::from).unwrap_or(config.method);
            let (backends, settings) = open(&config)?;
            let result = engine(&backends, settings).infer(&question, method)?;
            let text = match explain {
                None => result.to_json() + "\n",
                Some(ExplainFormat::Text) => explain_text(&result),
                Some(ExplainFormat::Json) => explain_json(&result) + "\n",
                Some(ExplainFormat::Dot) => match explain_dot(&result) {
                    Some(dot) => dot,
                    None => bail!("{method:?} results have no tree to draw"),
                },
            };
            write_or_print(&text, None)
        }
        Command::Eval {
            dataset,
            split,
            method,
            engine: args,
            out,
            parallelism,
        } => {
            let config = args.run_config()?;
            let method = method.map(Method::from).unwrap_or(config.method);
            let records = load_dataset(&dataset, split.as_deref())?;
            let (backends, settings) = open(&config)?;
            let info = RunInfo {
                config_hash: Some(config.digest()),
                seed: config.seed,
            };
            let workers = parallelism.unwrap_or(config.parallelism);
            let report = evaluate(
                &engine(&backends, settings),
                &records,
                method,
                workers,
                &info,
            )?;
            report.write(&out)?;
            let m = &report.metrics;
            println!(
                "{} records: accuracy {:.4}, pairwise {}, errors {}, fallbacks {}",
                m.total,
                m.accuracy,
                m.pairwise_accuracy
                    .map_or("n/a".to_string(), |p| format!("{p:.4}")),
                m.errors,
                m.fallbacks
            );
            println!("wrote {}", out.display());
            Ok(())
        }
        Command::Tree { input, output } => {
            let raw = std::fs::read_to_string(&input)
                .with_context(|| format!("reading {}", input.display()))?;
            let dot = match MaieuticTree::from_json(&raw) {
                Ok(tree) => tree.to_dot(&Default::default()),
                Err(tree_err) => {
                    let result: InferenceResult =
                        serde_json::from_str(&raw).with_context(|| {
                            format!(
                                "{} is neither a tree ({tree_err}) nor an inference result",
                                input.display()
                            )
                        })?;
                    match explain_dot(&result) {
                        Some(dot) => dot,
                        None => bail!("inference result carries no tree"),
                    }
                }
            };
            write_or_print(&dot, output.as_deref())
        }
        Command::Wcnf {
            question,
            engine: args,
            output,
        } => {
            let config = args.run_config()?;
            let (backends, settings) = open(&config)?;
            let result = engine(&backends, settings).infer(&question, Method::Maieutic)?;
            let Some(cnf) = result.cnf else {
                bail!(
                    "nothing to export: {}",
                    result
                        .fallback_reason
                        .unwrap_or_else(|| "no clauses".into())
                );
            };
            export_wcnf(&cnf, &output)?;
            println!(
                "wrote {} ({} variables, {} clauses) and {}",
                output.display(),
                cnf.num_vars(),
                cnf.clauses.len(),
                sidecar_path(&output).display()
            );
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
