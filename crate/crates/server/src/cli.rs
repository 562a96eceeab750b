//! `labelcommons` command line.

use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use anyhow::{anyhow, bail, Context};
use clap::{Args, Parser, Subcommand};
use labelcommons_core::adapter::{SourceAdapter, StaticAdapter};
use labelcommons_core::eval::{render_text, roc_csv, PredictionSet, Weighting};
use labelcommons_core::model::{CampaignId, UserId};
use labelcommons_core::{
    credential_digest, Curation, ExportFormat, ExportOptions, ExternalMapping, SystemClock,
};
use tracing_subscriber::EnvFilter;

use crate::api::{router, AppState, NoAdapter};
use crate::config::{AdapterKind, Config};

#[derive(Debug, Parser)]
#[command(
    name = "labelcommons",
    version,
    about = "Community curation of evaluation datasets"
)]
pub struct Cli {
    /// TOML configuration file; `LABELCOMMONS_*` variables override it.
    #[arg(long, global = true, env = "LABELCOMMONS_CONFIG")]
    pub config: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run the HTTP API.
    Serve,
    /// Manage members.
    #[command(subcommand)]
    User(UserCommand),
    /// Compare model predictions against primary labels.
    Evaluate(EvaluateArgs),
    /// Write a campaign dataset to a file.
    Export(ExportArgs),
    /// Create a campaign from a dataset file.
    Import(ImportArgs),
}

#[derive(Debug, Subcommand)]
pub enum UserCommand {
    /// Register a member and print a fresh bearer token.
    Add {
        id: String,
        #[arg(long)]
        name: Option<String>,
    },
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    /// Campaign id or name in the store, or a path to an exported dataset.
    #[arg(long)]
    pub campaign: String,
    #[arg(long)]
    pub dimension: String,
    /// Prediction files: `.jsonl` with a header line, or `ref,score` CSV
    /// named after the model.
    #[arg(long, num_args = 1.., required = true)]
    pub predictions: Vec<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value = "uniform", value_parser = parse_weighting)]
    pub weighting: Weighting,
}

#[derive(Debug, Args)]
pub struct ExportArgs {
    /// Campaign id or name.
    #[arg(long)]
    pub campaign: String,
    #[arg(long, default_value = "jsonl")]
    pub format: ExportFormat,
    #[arg(long)]
    pub out: PathBuf,
    /// Keep real author ids even when the config pseudonymizes.
    #[arg(long)]
    pub no_pseudonymize: bool,
}

#[derive(Debug, Args)]
pub struct ImportArgs {
    #[arg(long)]
    pub file: PathBuf,
    /// Defaults to the file extension.
    #[arg(long)]
    pub format: Option<ExportFormat>,
    /// Mapping file for third-party CSV.
    #[arg(long)]
    pub mapping: Option<PathBuf>,
    /// Member recorded as the importer.
    #[arg(long = "as")]
    pub as_user: String,
    /// Campaign name; defaults to the name in the file.
    #[arg(long)]
    pub name: Option<String>,
}

fn parse_weighting(s: &str) -> Result<Weighting, String> {
    match s {
        "uniform" => Ok(Weighting::Uniform),
        "agreement_weighted" => Ok(Weighting::AgreementWeighted),
        other => Err(format!("unknown weighting '{other}'")),
    }
}

pub fn main() -> ExitCode {
    let cli = Cli::parse();
    tracing_subscriber::fmt()
        .with_env_filter(
            EnvFilter::try_from_default_env().unwrap_or_else(|_| EnvFilter::new("info")),
        )
        .with_writer(std::io::stderr)
        .init();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

pub fn run(cli: Cli) -> anyhow::Result<()> {
    let config = Config::load(cli.config.as_deref(), |k| std::env::var(k).ok())?;
    match cli.command {
        Command::Serve => serve(config),
        Command::User(UserCommand::Add { id, name }) => {
            let core = open(&config)?;
            let token = add_user(&core, &id, name)?;
            println!("{token}");
            Ok(())
        }
        Command::Evaluate(args) => evaluate(&config, args),
        Command::Export(args) => export(&config, args),
        Command::Import(args) => import(&config, args),
    }
}

fn open(config: &Config) -> anyhow::Result<Curation> {
    match &config.storage {
        Some(path) => Curation::open(path, config.sync, Arc::new(SystemClock))
            .with_context(|| format!("opening store {}", path.display())),
        None => Ok(Curation::in_memory()),
    }
}

/// Registers `id` and returns its bearer token.
pub fn add_user(core: &Curation, id: &str, name: Option<String>) -> anyhow::Result<String> {
    let token = uuid::Uuid::new_v4().simple().to_string();
    core.register_member(
        UserId::new(id),
        name.unwrap_or_else(|| id.to_string()),
        Some(credential_digest(&token)),
    )?;
    Ok(token)
}

fn adapter(config: &Config) -> anyhow::Result<Arc<dyn SourceAdapter>> {
    Ok(match config.adapter.kind {
        AdapterKind::None => Arc::new(NoAdapter),
        AdapterKind::Static => {
            let path = config
                .adapter
                .content
                .as_ref()
                .ok_or_else(|| anyhow!("adapter.content is unset"))?;
            let text = std::fs::read_to_string(path)
                .with_context(|| format!("reading {}", path.display()))?;
            Arc::new(StaticAdapter::from_json(&text)?)
        }
    })
}

pub fn app_state(config: &Config, core: Curation) -> anyhow::Result<AppState> {
    Ok(AppState {
        core: Arc::new(core),
        adapter: adapter(config)?,
        thresholds: config.thresholds,
        export: config.export.clone(),
    })
}

fn serve(config: Config) -> anyhow::Result<()> {
    if config.storage.is_none() {
        tracing::warn!("no storage configured; state is lost on exit");
    }
    let state = app_state(&config, open(&config)?)?;
    let rt = tokio::runtime::Runtime::new()?;
    rt.block_on(async move {
        let listener = tokio::net::TcpListener::bind(&config.listen)
            .await
            .with_context(|| format!("binding {}", config.listen))?;
        tracing::info!(addr = %listener.local_addr()?, "listening");
        axum::serve(listener, router(state))
            .with_graceful_shutdown(async {
                let _ = tokio::signal::ctrl_c().await;
            })
            .await?;
        Ok(())
    })
}

fn resolve_campaign(core: &Curation, key: &str) -> anyhow::Result<CampaignId> {
    if let Some(id) = core.campaign_by_name(key) {
        return Ok(id);
    }
    let id = key
        .parse()
        .map(CampaignId)
        .map_err(|_| anyhow!("no campaign named '{key}'"))?;
    core.campaign(id)?;
    Ok(id)
}

fn format_of(path: &Path) -> anyhow::Result<ExportFormat> {
    let ext = path
        .extension()
        .and_then(|e| e.to_str())
        .unwrap_or_default();
    ext.parse().map_err(|_| {
        anyhow!(
            "cannot tell the format of {}; pass --format",
            path.display()
        )
    })
}

fn read_predictions(path: &Path) -> anyhow::Result<PredictionSet> {
    let text =
        std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let set = match path.extension().and_then(|e| e.to_str()) {
        Some("csv") => {
            let model = path.file_stem().and_then(|s| s.to_str()).unwrap_or("model");
            PredictionSet::from_csv(&text, model)
        }
        _ => PredictionSet::from_jsonl(&text),
    };
    set.with_context(|| format!("parsing {}", path.display()))
}

fn evaluate(config: &Config, args: EvaluateArgs) -> anyhow::Result<()> {
    let path = Path::new(&args.campaign);
    let (core, campaign) = if path.is_file() {
        let core = Curation::in_memory();
        let importer = UserId::new("evaluator");
        core.register_member(importer.clone(), "evaluator", None)?;
        let bytes = std::fs::read(path)?;
        let id = core.import_campaign(&bytes, format_of(path)?, &importer, None)?;
        (core, id)
    } else {
        let core = open(config)?;
        let id = resolve_campaign(&core, &args.campaign)?;
        (core, id)
    };
    let sets = args
        .predictions
        .iter()
        .map(|p| read_predictions(p))
        .collect::<anyhow::Result<Vec<_>>>()?;
    let cmp = core.compare_models(campaign, &args.dimension, &sets, args.weighting)?;

    std::fs::create_dir_all(&args.out)?;
    std::fs::write(
        args.out.join("report.json"),
        serde_json::to_vec_pretty(&cmp)?,
    )?;
    let text = render_text(&cmp);
    std::fs::write(args.out.join("report.txt"), &text)?;
    for report in &cmp.reports {
        let file: String = report
            .model
            .chars()
            .map(|c| {
                if c.is_ascii_alphanumeric() || c == '-' || c == '_' {
                    c
                } else {
                    '_'
                }
            })
            .collect();
        std::fs::write(args.out.join(format!("roc_{file}.csv")), roc_csv(report))?;
    }
    print!("{text}");
    Ok(())
}

fn export(config: &Config, args: ExportArgs) -> anyhow::Result<()> {
    let core = open(config)?;
    let campaign = resolve_campaign(&core, &args.campaign)?;
    let options = if config.export.pseudonymize && !args.no_pseudonymize {
        ExportOptions::pseudonymized(config.export.salt.clone())
    } else {
        ExportOptions::default()
    };
    let bytes = core.export_campaign(campaign, args.format, &options)?;
    std::fs::write(&args.out, bytes).with_context(|| format!("writing {}", args.out.display()))?;
    Ok(())
}

fn import(config: &Config, args: ImportArgs) -> anyhow::Result<()> {
    if config.storage.is_none() {
        bail!("import needs a configured storage path");
    }
    let core = open(config)?;
    let user = UserId::new(args.as_user);
    let bytes =
        std::fs::read(&args.file).with_context(|| format!("reading {}", args.file.display()))?;
    let id = match &args.mapping {
        Some(m) => {
            let mut mapping = ExternalMapping::from_json(&std::fs::read_to_string(m)?)?;
            if let Some(name) = args.name {
                mapping.campaign_name = name;
            }
            core.import_mapped(&bytes, &mapping, &user)?
        }
        None => {
            let format = match args.format {
                Some(f) => f,
                None => format_of(&args.file)?,
            };
            core.import_campaign(&bytes, format, &user, args.name.as_deref())?
        }
    };
    println!("{id}");
    Ok(())
}
