//! `apsctl`: serve the assistant API, validate and solve datasets, and run
//! the retrieval evaluation.

use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::Context;
use aps_core::contracts::{bundled_catalog, format_number, load_catalog};
use aps_core::data::{parse_instance, DataError};
use aps_core::llm::LlmConfig;
use aps_core::planning::{extract_plan, relax_infeasible, solve_instance, Provenance, ScenarioSpec};
use aps_core::retriever::{bundled_corpus_path, evaluate_retrieval, index_catalog, load_annotated_set};
use aps_core::LpStatus;
use aps_service::{build_embedder, ServiceConfig, DEFAULT_PORT};
use clap::{Parser, Subcommand};

const EXIT_FAILURE: u8 = 1;
const EXIT_USAGE: u8 = 2;

#[derive(Debug, Parser)]
#[command(name = "apsctl", version, about = "Conversational planning assistant tooling")]
struct Cli {
    /// Log progress (with timestamps) to stderr.
    #[arg(long, global = true)]
    verbose: bool,
    /// Tool contract directory; defaults to the bundled catalog.
    #[arg(long, global = true, value_name = "DIR")]
    catalog_dir: Option<PathBuf>,
    /// Completion endpoint; stub mode when unset.
    #[arg(long, global = true, env = "LLM_ENDPOINT", value_name = "URL")]
    llm_endpoint: Option<String>,
    /// Embedding endpoint; the hashing embedder when unset.
    #[arg(long, global = true, env = "EMBED_ENDPOINT", value_name = "URL")]
    embed_endpoint: Option<String>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run the HTTP API.
    Serve {
        #[arg(long, env = "PORT", default_value_t = DEFAULT_PORT)]
        port: u16,
        /// Session snapshot directory; sessions are kept in memory when unset.
        #[arg(long, env = "DATA_DIR", value_name = "DIR")]
        data_dir: Option<PathBuf>,
    },
    /// Check a dataset directory and print its diagnostics.
    Validate { dataset: PathBuf },
    /// Solve a dataset, optionally under scenarios, and print the plan CSV.
    Solve {
        dataset: PathBuf,
        /// JSON list of scenario specs applied in order.
        #[arg(long, value_name = "FILE")]
        scenario: Option<PathBuf>,
    },
    /// Top-1 accuracy of tool retrieval on an annotated query set.
    EvalRetriever {
        /// CSV with header `query,gold_tool_id`; defaults to the bundled corpus.
        #[arg(long, value_name = "FILE")]
        corpus: Option<PathBuf>,
        /// Exit with status 1 when overall accuracy falls below this.
        #[arg(long, default_value_t = 0.80)]
        min_accuracy: f64,
    },
}

/// Error carrying the exit status to report.
struct Failure {
    code: u8,
    error: anyhow::Error,
}

fn usage(error: anyhow::Error) -> Failure {
    Failure { code: EXIT_USAGE, error }
}

impl From<anyhow::Error> for Failure {
    fn from(error: anyhow::Error) -> Self {
        Failure {
            code: EXIT_FAILURE,
            error,
        }
    }
}

fn llm_config(cli: &Cli) -> LlmConfig {
    let mut config = LlmConfig::from_env();
    config.endpoint = cli.llm_endpoint.clone().filter(|s| !s.trim().is_empty());
    config.embed_endpoint = cli.embed_endpoint.clone().filter(|s| !s.trim().is_empty());
    config
}

fn init_logging(verbose: bool) {
    let builder = tracing_subscriber::fmt().with_writer(std::io::stderr);
    if verbose {
        builder.with_env_filter("info").init();
    } else {
        builder.with_env_filter("warn").without_time().init();
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    init_logging(cli.verbose);
    let result = match &cli.command {
        Command::Serve { port, data_dir } => serve(&cli, *port, data_dir.clone()),
        Command::Validate { dataset } => validate(dataset),
        Command::Solve { dataset, scenario } => solve(dataset, scenario.as_deref()),
        Command::EvalRetriever { corpus, min_accuracy } => eval_retriever(&cli, corpus.as_deref(), *min_accuracy),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("apsctl: {:#}", f.error);
            ExitCode::from(f.code)
        }
    }
}

fn serve(cli: &Cli, port: u16, data_dir: Option<PathBuf>) -> Result<(), Failure> {
    let config = ServiceConfig {
        data_dir,
        catalog_dir: cli.catalog_dir.clone(),
        llm: llm_config(cli),
    };
    let addr = SocketAddr::from(([0, 0, 0, 0], port));
    let runtime = tokio::runtime::Runtime::new().context("starting the async runtime")?;
    runtime
        .block_on(aps_service::serve(config, addr))
        .map_err(|e| anyhow::anyhow!("{e}"))?;
    Ok(())
}

fn validate(dataset: &Path) -> Result<(), Failure> {
    match parse_instance(dataset) {
        Ok(inst) => {
            println!(
                "ok: {} plants, {} products, {} materials, {} orders over {} days",
                inst.plants.len(),
                inst.products.len(),
                inst.materials.len(),
                inst.orders.len(),
                inst.horizon.len()
            );
            Ok(())
        }
        Err(DataError::Invalid(diagnostics)) => {
            for d in &diagnostics {
                println!("{d}");
            }
            Err(anyhow::anyhow!("{} invariant violation(s)", diagnostics.len()).into())
        }
        Err(e) => Err(anyhow::Error::new(e).into()),
    }
}

fn solve(dataset: &Path, scenario: Option<&Path>) -> Result<(), Failure> {
    let specs: Vec<ScenarioSpec> = match scenario {
        None => Vec::new(),
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .with_context(|| format!("reading {}", path.display()))
                .map_err(usage)?;
            serde_json::from_str(&text)
                .with_context(|| format!("{} is not a JSON list of scenario specs", path.display()))
                .map_err(usage)?
        }
    };
    let instance = parse_instance(dataset).with_context(|| format!("loading {}", dataset.display()))?;
    let (model, solution) = solve_instance(&instance, &specs).context("building the model")?;
    match solution.status {
        LpStatus::Optimal => {
            let plan = extract_plan(&model, &solution, Provenance::from_specs(&specs), "plan-1")
                .context("reading the plan")?;
            print!("{}", plan.to_csv());
            let b = plan.objective_breakdown;
            println!();
            println!("objective: {}", format_number(plan.objective));
            println!("production_cost: {}", format_number(b.production_cost));
            println!("tardiness_cost: {}", format_number(b.tardiness_cost));
            println!("shortage_cost: {}", format_number(b.shortage_cost));
            println!("total_tardiness: {}", format_number(plan.total_tardiness()));
            Ok(())
        }
        LpStatus::Infeasible => {
            let report = relax_infeasible(&model.problem).context("relaxing the model")?;
            println!("status: infeasible");
            println!("total_violation: {}", format_number(report.total_violation));
            for v in &report.violated {
                println!("violated: {} by {}", v.tag, format_number(v.amount));
            }
            Err(anyhow::anyhow!("the scenario is infeasible").into())
        }
        other => Err(anyhow::anyhow!("solver returned {other:?}").into()),
    }
}

fn eval_retriever(cli: &Cli, corpus: Option<&Path>, min_accuracy: f64) -> Result<(), Failure> {
    let catalog = match &cli.catalog_dir {
        Some(dir) => load_catalog(dir).with_context(|| format!("loading catalog {}", dir.display()))?,
        None => bundled_catalog(),
    };
    let corpus = corpus.map_or_else(bundled_corpus_path, Path::to_path_buf);
    let set = load_annotated_set(&corpus).with_context(|| format!("loading {}", corpus.display()))?;
    let embedder = build_embedder(&llm_config(cli)).context("connecting to the embedder")?;
    let index = index_catalog(&catalog.contracts, embedder.as_ref()).context("indexing the catalog")?;
    let report = evaluate_retrieval(&set, &index, embedder.as_ref()).context("evaluating")?;

    println!("{:<14} {:>7} {:>5} {:>8}", "category", "correct", "total", "accuracy");
    for (category, acc) in &report.per_category {
        println!(
            "{:<14} {:>7} {:>5} {:>8.4}",
            category.as_str(),
            acc.correct,
            acc.total,
            acc.value()
        );
    }
    let o = report.overall;
    println!("{:<14} {:>7} {:>5} {:>8.4}", "overall", o.correct, o.total, o.value());
    for m in &report.misses {
        println!("miss: {:?} expected {} got {}", m.query, m.gold, m.predicted);
    }
    if o.value() + 1e-12 < min_accuracy {
        return Err(anyhow::anyhow!(
            "overall accuracy {:.4} is below {:.4}",
            o.value(),
            min_accuracy
        )
        .into());
    }
    Ok(())
}
