mod commands;
mod config;
mod error;
mod manifest;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use crate::commands::ReduceMethod;
use crate::config::LoadedConfig;
use crate::error::{CliError, CliResult};

/// Description-embedding encoders for categorical features, evaluated with
/// boosted trees. All outputs are CSV/JSON plus a `manifest.json`.
#[derive(Debug, Parser)]
#[command(name = "catembed", version)]
struct Cli {
    /// JSON run configuration.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Master seed, overriding the config.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Restrict to one configured variant.
    #[arg(long, global = true)]
    variant: Option<String>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Generate a synthetic dataset bundle with a ready-to-run config.
    Synth {
        /// Generator parameters (JSON); defaults otherwise.
        #[arg(long)]
        params: Option<PathBuf>,
    },
    /// Decode insert designation codes.
    ParseIso {
        codes: Vec<String>,
        /// File with one code per line.
        #[arg(long)]
        input: Option<PathBuf>,
        /// Code table (JSON); the built-in table otherwise.
        #[arg(long)]
        table: Option<PathBuf>,
    },
    /// Write the embedding tables each variant would use.
    Embed,
    /// Cosine similarity matrix of an embedding table.
    Similarity {
        #[arg(long)]
        table: PathBuf,
        /// JSON map from description to display label.
        #[arg(long)]
        labels: Option<PathBuf>,
    },
    /// Reduce an embedding table with PCA or UMAP.
    Reduce {
        #[arg(long)]
        table: PathBuf,
        #[arg(long, value_enum)]
        method: ReduceMethod,
        #[arg(long, default_value_t = 3)]
        k: usize,
    },
    /// Fit on the full dataset; write models and total_gain importance.
    Train,
    /// k-fold learning curves.
    Evaluate,
    /// Grouped SHAP importance of a full-data fit.
    Explain,
    /// Evaluate, train and explain every variant.
    Pipeline,
}

fn need_out(cli: &Cli) -> CliResult<PathBuf> {
    cli.out
        .clone()
        .ok_or_else(|| CliError::Config("--out is required".into()))
}

fn need_config(cli: &Cli) -> CliResult<LoadedConfig> {
    let path = cli
        .config
        .as_ref()
        .ok_or_else(|| CliError::Config("--config is required".into()))?;
    LoadedConfig::load(path, cli.seed)
}

fn run(cli: &Cli) -> CliResult<()> {
    let variant = cli.variant.as_deref();
    match &cli.command {
        Command::Synth { params } => commands::synth(&need_out(cli)?, cli.seed, params.as_deref()),
        Command::ParseIso {
            codes,
            input,
            table,
        } => commands::parse_iso_cmd(codes, input.as_deref(), table.as_deref(), &need_out(cli)?),
        Command::Similarity { table, labels } => {
            commands::similarity(table, labels.as_deref(), &need_out(cli)?)
        }
        Command::Reduce { table, method, k } => {
            commands::reduce(table, *method, *k, cli.seed, &need_out(cli)?)
        }
        Command::Embed
        | Command::Train
        | Command::Evaluate
        | Command::Explain
        | Command::Pipeline => {
            let cfg = need_config(cli)?;
            let out = cfg.output_dir(cli.out.as_deref())?;
            match cli.command {
                Command::Embed => commands::embed(&cfg, variant, &out),
                Command::Train => commands::train(&cfg, variant, &out),
                Command::Evaluate => commands::evaluate(&cfg, variant, &out),
                Command::Explain => commands::explain(&cfg, variant, &out),
                _ => commands::pipeline(&cfg, variant, &out),
            }
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("CATEMBED_LOG", "error")).init();
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{}", e.to_json_line());
            ExitCode::FAILURE
        }
    }
}
