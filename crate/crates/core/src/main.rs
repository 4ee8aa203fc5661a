use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use ctxsvc::checker::{machine_report, text_report};
use ctxsvc::model::write_service;
use ctxsvc::pipeline::{
    flows_text, load_catalog, load_expr, run_pipeline, transform, validation_report, verdict_exit_code, verify,
    write_artifacts, PipelineError, RunOptions,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Text,
    Machine,
}

#[derive(Debug, Parser)]
#[command(name = "ctxsvc", version, about = "Compose and verify services with context-dependent contracts")]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// Service catalog file; repeat to merge several.
    #[arg(long, global = true, num_args = 1..)]
    catalog: Vec<PathBuf>,

    /// Composition expression, or `@file` to read it from a file.
    #[arg(long, global = true)]
    expr: Option<String>,

    /// TOML options document.
    #[arg(long, global = true)]
    options: Option<PathBuf>,

    /// Directory for artifacts. Without it results go to stdout.
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    /// Maximum number of states explored per query.
    #[arg(long, global = true, value_parser = clap::value_parser!(u64).range(1..))]
    bound: Option<u64>,

    /// Loop unrolling bound.
    #[arg(long, global = true)]
    unroll: Option<u32>,

    #[arg(long, global = true, value_enum, default_value_t = Format::Text)]
    format: Format,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Subcommand)]
enum Command {
    /// Check every catalog service for specification problems.
    Validate,
    /// Print the composite service.
    Compose,
    /// Print one flow signature per line.
    Flatten,
    /// Generate the model and query files.
    Transform,
    /// Check every generated query.
    Verify,
    /// Run all stages and write every artifact.
    Pipeline,
}

fn options(cli: &Cli) -> Result<RunOptions, PipelineError> {
    let mut o = match &cli.options {
        Some(p) => RunOptions::load(p)?,
        None => RunOptions::default(),
    };
    if let Some(b) = cli.bound {
        o.state_bound = b as usize;
    }
    if let Some(k) = cli.unroll {
        o.compose.unroll = k;
    }
    Ok(o)
}

fn emit(cli: &Cli, files: &[(&str, String)], stdout: &str) -> Result<(), PipelineError> {
    match &cli.out {
        Some(dir) => write_artifacts(dir, files),
        None => {
            let mut out = std::io::stdout().lock();
            out.write_all(stdout.as_bytes())
                .and_then(|_| out.flush())
                .map_err(|source| PipelineError::Io {
                    path: "stdout".into(),
                    source,
                })
        }
    }
}

fn run(cli: &Cli) -> Result<i32, PipelineError> {
    if cli.catalog.is_empty() {
        return Err(PipelineError::Options("at least one --catalog is required".into()));
    }
    let catalog = load_catalog(&cli.catalog)?;
    if cli.command == Command::Validate {
        let problems = validation_report(&catalog);
        for p in &problems {
            println!("{p}");
        }
        if problems.is_empty() {
            println!("{} service(s) valid", catalog.services.len());
            return Ok(0);
        }
        return Ok(3);
    }

    let expr_arg = cli
        .expr
        .as_deref()
        .ok_or_else(|| PipelineError::Options("--expr is required".into()))?;
    let expr = load_expr(expr_arg, &catalog)?;
    let opts = options(cli)?.typed_for(&catalog)?;

    match cli.command {
        Command::Validate => unreachable!("handled above"),
        Command::Compose => {
            let res = ctxsvc::composition::compose(&expr, &catalog, &opts.compose)?;
            for w in &res.warnings {
                log::warn!("{w}");
            }
            let text = write_service(&res.composite);
            emit(cli, &[("composite.svc", text.clone())], &text)?;
            Ok(0)
        }
        Command::Flatten => {
            let text = flows_text(&expr, opts.compose.unroll, &catalog)?;
            emit(cli, &[("flows.txt", text.clone())], &text)?;
            Ok(0)
        }
        Command::Transform => {
            let t = transform(&expr, &catalog, &opts)?;
            let stdout = format!("{}\n{}", t.model_xml, t.model_q);
            emit(cli, &[("model.xml", t.model_xml), ("model.q", t.model_q)], &stdout)?;
            Ok(0)
        }
        Command::Verify => {
            let t = transform(&expr, &catalog, &opts)?;
            let results = verify(&t, &opts)?;
            let (text, machine) = (text_report(&results), machine_report(&results));
            let stdout = match cli.format {
                Format::Text => text.clone(),
                Format::Machine => machine.clone(),
            };
            emit(cli, &[("report.txt", text), ("report.jsonl", machine)], &stdout)?;
            Ok(verdict_exit_code(&results))
        }
        Command::Pipeline => {
            let a = run_pipeline(&expr, &catalog, &opts)?;
            let report = a
                .files
                .iter()
                .find(|(n, _)| *n == if cli.format == Format::Text { "report.txt" } else { "report.jsonl" })
                .map(|(_, t)| t.clone())
                .unwrap_or_default();
            emit(cli, &a.files, &report)?;
            Ok(verdict_exit_code(&a.results))
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
