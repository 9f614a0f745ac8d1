use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use stormcast_cli::stages::{DirLock, ResolvedConfigFile, StagePaths};
use stormcast_cli::{
    parse_model, parse_offset, parse_schema, render_counts, render_report, resolve,
    ExperimentConfig, Overrides, PipelineError,
};

#[derive(Parser)]
#[command(
    name = "stormcast",
    version,
    about = "Lightning nowcasting pipeline: predict frames by optical flow, \
             learn from what the prediction got wrong"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Experiment config JSON; defaults apply when omitted.
    #[arg(long, value_name = "PATH")]
    config: Option<PathBuf>,
    /// Output directory (one experiment at a time per directory).
    #[arg(long, value_name = "DIR")]
    out: Option<PathBuf>,
    /// Seed for both the dataset sampling and the model.
    #[arg(long)]
    seed: Option<u64>,
    /// Feature schema: error153 or ext129.
    #[arg(long, value_name = "SCHEMA", value_parser = parse_schema)]
    schema: Option<stormcast::features::SchemaVariant>,
    /// Forecast offset as h:mm, in 15-minute steps.
    #[arg(long, value_name = "H:MM", value_parser = parse_offset)]
    offset: Option<i64>,
    /// Model family: dt, rf, ab, gb, or mlp.
    #[arg(long, value_name = "KIND", value_parser = parse_model)]
    model: Option<stormcast::models::ModelKind>,
    /// Reset folds and model hyperparameters to the published operating
    /// point for the chosen family.
    #[arg(long)]
    paper_mode: bool,
    /// Override any config field by dotted path, e.g. --set model.max_depth=18.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
}

#[derive(Subcommand)]
enum Command {
    /// Run the whole pipeline: ingest, flow, featurize, split, train, evaluate.
    Run(Common),
    /// Materialize the frame cache and lightning CSV.
    Ingest(Common),
    /// Compute per-channel prediction-error fields.
    Flow(Common),
    /// Label, balance, and assemble the feature matrix.
    Featurize(Common),
    /// Build time folds and assign rows.
    Split(Common),
    /// Train the deployable model on all non-discarded rows.
    Train(Common),
    /// Cross-validate and write report, ROC, and importances.
    Evaluate(Common),
    /// Render a stored report, or metrics from explicit counts.
    Report {
        #[command(flatten)]
        common: Common,
        /// Confusion counts as TP,FN,FP,TN; skips reading artifacts.
        #[arg(long, value_name = "TP,FN,FP,TN")]
        counts: Option<String>,
    },
}

fn resolve_from(common: &Common) -> Result<ExperimentConfig, PipelineError> {
    let base = match &common.config {
        Some(path) => ExperimentConfig::load(path)?,
        None => ExperimentConfig::default(),
    };
    let overrides = Overrides {
        model: common.model,
        paper_mode: common.paper_mode,
        schema: common.schema,
        offset_minutes: common.offset,
        seed: common.seed,
        out: common.out.clone(),
        set: common.set.clone(),
    };
    resolve(base, &overrides)
}

/// Locks the output directory, records the resolved config, runs the stage.
fn staged<T>(
    common: &Common,
    stage: impl FnOnce(&ExperimentConfig, &StagePaths) -> Result<T, PipelineError>,
) -> Result<T, PipelineError> {
    let config = resolve_from(common)?;
    let paths = StagePaths::new(&config.out);
    let _lock = DirLock::acquire(&paths)?;
    let resolved = ResolvedConfigFile { config_hash: config.hash(), config: config.clone() };
    let json = serde_json::to_string_pretty(&resolved).expect("config serializes");
    std::fs::write(paths.resolved_config(), json)
        .map_err(|source| PipelineError::Io { path: paths.resolved_config(), source })?;
    stage(&config, &paths)
}

fn parse_counts(text: &str) -> Result<[u64; 4], PipelineError> {
    let parts: Vec<&str> = text.split(',').collect();
    let bad = || PipelineError::Config(format!("--counts needs TP,FN,FP,TN, got `{text}`"));
    if parts.len() != 4 {
        return Err(bad());
    }
    let mut counts = [0u64; 4];
    for (slot, part) in counts.iter_mut().zip(parts) {
        *slot = part.trim().parse().map_err(|_| bad())?;
    }
    Ok(counts)
}

fn cmd_report(common: &Common, counts: Option<&str>) -> Result<(), PipelineError> {
    if let Some(text) = counts {
        let [tp, fn_, fp, tn] = parse_counts(text)?;
        print!("{}", render_counts(tp, fn_, fp, tn));
        return Ok(());
    }
    // Reading back a finished run: trust the directory's own resolved
    // config, so no flags are needed beyond --out.
    let out = common
        .out
        .clone()
        .ok_or_else(|| PipelineError::Config("report needs --out or --counts".into()))?;
    let paths = StagePaths::new(&out);
    let resolved: ResolvedConfigFile = read_artifact(&paths.resolved_config())?;
    if resolved.config.hash() != resolved.config_hash {
        return Err(PipelineError::HashMismatch {
            path: paths.resolved_config(),
            found: resolved.config_hash,
            expected: resolved.config.hash(),
        });
    }
    let artifact: stormcast_cli::stages::ReportArtifact = read_artifact(&paths.report_json())?;
    if artifact.config_hash != resolved.config_hash {
        return Err(PipelineError::HashMismatch {
            path: paths.report_json(),
            found: artifact.config_hash,
            expected: resolved.config_hash,
        });
    }
    print!("{}", render_report(&artifact.report));
    Ok(())
}

fn read_artifact<T: serde::de::DeserializeOwned>(path: &std::path::Path) -> Result<T, PipelineError> {
    let text = match std::fs::read_to_string(path) {
        Ok(t) => t,
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => {
            return Err(PipelineError::MissingArtifact { path: path.to_path_buf() })
        }
        Err(source) => return Err(PipelineError::Io { path: path.to_path_buf(), source }),
    };
    serde_json::from_str(&text).map_err(|e| PipelineError::Stage {
        stage: "report",
        message: format!("{}: {e}", path.display()),
    })
}

fn run(cli: Cli) -> Result<(), PipelineError> {
    match &cli.command {
        Command::Run(common) => {
            let config = resolve_from(common)?;
            let report = stormcast_cli::run_experiment(&config)?;
            print!("{}", render_report(&report));
            Ok(())
        }
        Command::Ingest(c) => staged(c, stormcast_cli::stage_ingest),
        Command::Flow(c) => staged(c, stormcast_cli::stage_flow),
        Command::Featurize(c) => staged(c, stormcast_cli::stage_featurize),
        Command::Split(c) => staged(c, stormcast_cli::stage_split),
        Command::Train(c) => staged(c, stormcast_cli::stage_train),
        Command::Evaluate(c) => {
            let report = staged(c, stormcast_cli::stage_evaluate)?;
            print!("{}", render_report(&report));
            Ok(())
        }
        Command::Report { common, counts } => cmd_report(common, counts.as_deref()),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
