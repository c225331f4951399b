//! The `playcall` command line: `ingest`, `fit`, `evaluate` and `serve`.
//!
//! Settings resolve as flag, then `--config` file (`key = value` lines),
//! then built-in default. Exit codes: 0 success, 1 runtime failure,
//! 2 usage error.

mod manifest;

use std::collections::BTreeMap;
use std::fs;
use std::net::{IpAddr, SocketAddr};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::str::FromStr;
use std::sync::Arc;

use clap::{Args, Parser, Subcommand};
use log::{info, warn};
use rayon::prelude::*;
use serde_json::{json, Value};

use crate::covariates::{full_main_effects, selection_candidates};
use crate::error::{Error, Result};
use crate::estimation::{fit_dataset, forward_select, FitConfig, FittedModel, TrainingFingerprint};
use crate::evaluate::{aggregate, evaluate_team, EvalOptions};
use crate::hmm::ModelSpec;
use crate::ingest::store::SequenceStore;
use crate::ingest::{build_sequences, parse_plays, split_by_season, ColumnMapping, SeasonSplit};
use crate::serve::{load_models, ServeConfig, SessionService};

pub use manifest::{Failure, InputFingerprint, RunManifest, MANIFEST_FILE};

/// Model files are named `TEAM.json` in the model directory.
pub const MODEL_FILE_SUFFIX: &str = ".json";

#[derive(Debug, Parser)]
#[command(
    name = "playcall",
    version,
    about = "Run/pass play-call forecasting with covariate HMMs"
)]
pub struct Cli {
    /// Settings file of `key = value` lines; flags take precedence.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Parse a play-by-play CSV into a sequence store.
    Ingest(IngestArgs),
    /// Fit one model per team.
    Fit(FitArgs),
    /// Score out-of-sample forecasts on the test season.
    Evaluate(EvaluateArgs),
    /// Run the live session service.
    Serve(ServeArgs),
}

#[derive(Debug, Args)]
pub struct IngestArgs {
    #[arg(long)]
    pub input: PathBuf,
    /// Column and team-alias overrides (`field = column`, `alias.OLD = NEW`).
    #[arg(long)]
    pub mapping: Option<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct FitArgs {
    #[arg(long)]
    pub data: PathBuf,
    /// Team code, or `all` for every team in the store.
    #[arg(long)]
    pub team: Option<String>,
    /// Forward AIC selection instead of the full covariate set.
    #[arg(long)]
    pub select: bool,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub starts: Option<usize>,
    /// Teams fitted concurrently.
    #[arg(long)]
    pub jobs: Option<usize>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    #[arg(long)]
    pub models: PathBuf,
    #[arg(long)]
    pub data: PathBuf,
    /// Only score plays whose more likely call reaches this probability.
    #[arg(long)]
    pub threshold: Option<f64>,
    /// Leave each match's first play out of the scores.
    #[arg(long)]
    pub skip_first_play: bool,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct ServeArgs {
    #[arg(long)]
    pub models: PathBuf,
    #[arg(long)]
    pub port: Option<u16>,
}

/// Failure class of a command, mapped to the exit code.
#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Runtime(Error),
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        CliError::Runtime(e)
    }
}

type CliResult<T> = std::result::Result<T, CliError>;

const CONFIG_KEYS: [&str; 15] = [
    "team",
    "select",
    "seed",
    "starts",
    "jobs",
    "states",
    "max_iterations",
    "convergence_tol",
    "threshold",
    "include_first_play",
    "first_train_season",
    "last_train_season",
    "test_season",
    "port",
    "journal",
];

/// Parsed `--config` file.
#[derive(Debug, Default)]
pub struct ConfigFile {
    values: BTreeMap<String, String>,
}

impl ConfigFile {
    pub fn parse(text: &str) -> std::result::Result<Self, String> {
        let mut values = BTreeMap::new();
        for (i, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| format!("config line {}: expected key = value", i + 1))?;
            let k = k.trim();
            if !CONFIG_KEYS.contains(&k) {
                return Err(format!("config line {}: unknown key {k:?}", i + 1));
            }
            values.insert(k.to_string(), v.trim().to_string());
        }
        Ok(Self { values })
    }

    fn get<T: FromStr>(&self, key: &str) -> CliResult<Option<T>> {
        self.values
            .get(key)
            .map(|v| {
                v.parse()
                    .map_err(|_| CliError::Usage(format!("config key {key}: invalid value {v:?}")))
            })
            .transpose()
    }
}

/// Flag, else config file, else default; the result is recorded for the manifest.
fn resolve<T>(
    effective: &mut BTreeMap<String, Value>,
    file: &ConfigFile,
    key: &str,
    flag: Option<T>,
    default: T,
) -> CliResult<T>
where
    T: FromStr + serde::Serialize,
{
    let value = match flag {
        Some(v) => v,
        None => file.get(key)?.unwrap_or(default),
    };
    effective.insert(key.to_string(), json!(value));
    Ok(value)
}

fn init_logging() {
    let env = env_logger::Env::new().filter_or("PLAYCALL_LOG", "warn");
    let _ = env_logger::Builder::from_env(env).format_timestamp(None).try_init();
}

/// Parses `std::env::args` and runs the command.
pub fn main() -> ExitCode {
    init_logging();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(CliError::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
        Err(CliError::Runtime(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}

pub fn run(cli: Cli) -> CliResult<()> {
    let file = match &cli.config {
        Some(path) => {
            let text = fs::read_to_string(path).map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))?;
            ConfigFile::parse(&text).map_err(CliError::Usage)?
        }
        None => ConfigFile::default(),
    };
    match cli.command {
        Command::Ingest(a) => cmd_ingest(&a, &file),
        Command::Fit(a) => cmd_fit(&a, &file),
        Command::Evaluate(a) => cmd_evaluate(&a, &file),
        Command::Serve(a) => cmd_serve(&a, &file),
    }
}

fn create_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

fn cmd_ingest(args: &IngestArgs, file: &ConfigFile) -> CliResult<()> {
    let mut config = BTreeMap::new();
    let defaults = SeasonSplit::default();
    let seasons = SeasonSplit {
        first_train: resolve(&mut config, file, "first_train_season", None, defaults.first_train)?,
        last_train: resolve(&mut config, file, "last_train_season", None, defaults.last_train)?,
        test: resolve(&mut config, file, "test_season", None, defaults.test)?,
    };
    config.insert("input".into(), json!(args.input));
    config.insert("mapping".into(), json!(args.mapping));

    let mapping = match &args.mapping {
        Some(p) => ColumnMapping::from_file(p)?,
        None => ColumnMapping::default(),
    };
    let mut manifest = RunManifest::new("ingest", config, None);
    manifest.add_input(&args.input)?;
    if let Some(p) = &args.mapping {
        manifest.add_input(p)?;
    }

    let source = fs::File::open(&args.input).map_err(|e| Error::io(&args.input, e))?;
    let parsed = parse_plays(std::io::BufReader::new(source), &mapping)?;
    let series = build_sequences(&parsed.rows);
    let split = split_by_season(series.clone(), &seasons);
    split.require_training()?;
    let store = SequenceStore::write(&args.out, &split, seasons, &parsed.report, &parsed.rows, &series)?;

    let c = &store.counts;
    info!(
        "{} rows read, {} kept, {} rejected; {} matches, {} sequences",
        c.input_rows, c.accepted_rows, c.rejected_rows, c.matches, c.sequences
    );
    manifest.warnings = store.warnings.clone();
    manifest.outputs = std::iter::once("store.json".to_string())
        .chain(std::iter::once("rejects.tsv".to_string()))
        .chain(store.train_teams.iter().map(|t| format!("train/{t}.jsonl")))
        .chain(store.test_teams.iter().map(|t| format!("test/{t}.jsonl")))
        .collect();
    manifest.finish(&args.out)?;
    println!(
        "{} sequences ({} train / {} test plays) written to {}",
        c.sequences,
        c.train_plays,
        c.test_plays,
        args.out.display()
    );
    Ok(())
}

/// Teams requested by `--team`; "all" means every team with training data.
fn requested_teams(store: &SequenceStore, team: &str) -> Result<Vec<String>> {
    let all = store.train_teams();
    if team.eq_ignore_ascii_case("all") {
        return Ok(all);
    }
    let code = team.to_ascii_uppercase();
    if all.contains(&code) {
        Ok(vec![code])
    } else {
        Err(Error::Precondition(format!(
            "no training data for team {code}; store has {}",
            all.join(", ")
        )))
    }
}

fn store_inputs(manifest: &mut RunManifest, dir: &Path, split: &str, teams: &[String]) -> Result<()> {
    manifest.add_input(&dir.join("store.json"))?;
    for t in teams {
        manifest.add_input(&dir.join(split).join(format!("{t}.jsonl")))?;
    }
    Ok(())
}

fn fit_team(store: &SequenceStore, team: &str, states: usize, select: bool, cfg: &FitConfig) -> Result<FittedModel> {
    let data = store.train_dataset(team)?;
    let mut model = if select {
        forward_select(
            &ModelSpec::new(states, Vec::<String>::new())?,
            &selection_candidates(),
            &data,
            cfg,
        )?
        .0
    } else {
        fit_dataset(&ModelSpec::new(states, full_main_effects())?, &data, cfg)?
    };
    let seasons = &store.train[team];
    model.team = Some(team.to_string());
    model.training = Some(TrainingFingerprint {
        first_season: seasons.iter().map(|s| s.season).min(),
        last_season: seasons.iter().map(|s| s.season).max(),
        n_sequences: data.sequences.len(),
        n_plays: data.n_plays(),
    });
    Ok(model)
}

fn cmd_fit(args: &FitArgs, file: &ConfigFile) -> CliResult<()> {
    let mut config = BTreeMap::new();
    let defaults = FitConfig::default();
    let team: String = resolve(&mut config, file, "team", args.team.clone(), "all".into())?;
    let select = resolve(&mut config, file, "select", args.select.then_some(true), false)?;
    let seed = resolve(&mut config, file, "seed", args.seed, defaults.rng_seed)?;
    let starts = resolve(&mut config, file, "starts", args.starts, defaults.n_starts)?;
    let jobs = resolve(&mut config, file, "jobs", args.jobs, rayon::current_num_threads())?;
    let states = resolve(&mut config, file, "states", None, 2usize)?;
    let max_iterations = resolve(&mut config, file, "max_iterations", None, defaults.max_iterations)?;
    let convergence_tol = resolve(&mut config, file, "convergence_tol", None, defaults.convergence_tol)?;
    if jobs == 0 {
        return Err(CliError::Usage("--jobs must be at least 1".into()));
    }
    config.insert("data".into(), json!(args.data));
    let base = FitConfig {
        n_starts: starts,
        max_iterations,
        convergence_tol,
        ..defaults
    };
    base.validate().map_err(|e| CliError::Usage(e.to_string()))?;
    ModelSpec::new(states, Vec::<String>::new()).map_err(|e| CliError::Usage(e.to_string()))?;

    let store = SequenceStore::open(&args.data)?;
    let all_teams = store.train_teams();
    let teams = requested_teams(&store, &team)?;
    let mut manifest = RunManifest::new("fit", config, Some(seed));
    store_inputs(&mut manifest, &args.data, "train", &teams)?;
    create_dir(&args.out)?;

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .map_err(|e| Error::Precondition(e.to_string()))?;
    let results: Vec<(String, Result<FittedModel>)> = pool.install(|| {
        teams
            .par_iter()
            .map(|t| {
                // Seeded by position among all store teams, so a single-team
                // run reproduces the corresponding model of an `all` run.
                let index = all_teams.iter().position(|a| a == t).unwrap_or(0) as u64;
                let cfg = FitConfig {
                    rng_seed: seed.wrapping_add(index),
                    ..base.clone()
                };
                info!("fitting {t}");
                (t.clone(), fit_team(&store, t, states, select, &cfg))
            })
            .collect()
    });

    for (team, result) in results {
        match result.and_then(|m| {
            let name = format!("{team}{MODEL_FILE_SUFFIX}");
            m.save(&args.out.join(&name))?;
            Ok((name, m))
        }) {
            Ok((name, m)) => {
                info!("{team}: AIC {:.1}, covariates {:?}", m.aic, m.spec.covariate_names);
                if !m.diagnostics.converged {
                    manifest.warnings.push(format!("{team}: optimizer did not converge"));
                }
                manifest.outputs.push(name);
            }
            Err(e) => {
                warn!("{team}: {e}");
                manifest.failures.push(Failure {
                    item: team,
                    error: e.to_string(),
                });
            }
        }
    }
    let manifest = manifest.finish(&args.out)?;
    println!(
        "{} models written to {}, {} failed",
        manifest.outputs.len(),
        args.out.display(),
        manifest.failures.len()
    );
    if manifest.failures.is_empty() {
        Ok(())
    } else {
        Err(Error::Fit {
            message: format!(
                "{} of {} teams failed: {}",
                manifest.failures.len(),
                teams.len(),
                manifest
                    .failures
                    .iter()
                    .map(|f| f.item.as_str())
                    .collect::<Vec<_>>()
                    .join(", ")
            ),
            diagnostics: Box::default(),
        }
        .into())
    }
}

fn cmd_evaluate(args: &EvaluateArgs, file: &ConfigFile) -> CliResult<()> {
    let mut config = BTreeMap::new();
    let threshold = match args.threshold {
        Some(t) => Some(t),
        None => file.get("threshold")?,
    };
    config.insert("threshold".into(), json!(threshold));
    if let Some(t) = threshold {
        if !(0.5..=1.0).contains(&t) {
            return Err(CliError::Usage(format!("--threshold {t} outside [0.5, 1]")));
        }
    }
    let include_first_play = resolve(
        &mut config,
        file,
        "include_first_play",
        args.skip_first_play.then_some(false),
        true,
    )?;
    config.insert("models".into(), json!(args.models));
    config.insert("data".into(), json!(args.data));
    let options = EvalOptions {
        threshold,
        include_first_play,
    };

    let store = SequenceStore::open(&args.data)?;
    if !args.models.is_dir() {
        return Err(Error::Precondition(format!("model directory {} not found", args.models.display())).into());
    }
    let mut manifest = RunManifest::new("evaluate", config, None);
    let teams: Vec<String> = store.test.keys().cloned().collect();
    store_inputs(&mut manifest, &args.data, "test", &teams)?;

    let mut reports = Vec::new();
    for team in &teams {
        let path = args.models.join(format!("{team}{MODEL_FILE_SUFFIX}"));
        if !path.exists() {
            let msg = format!("no model for {team}; skipped");
            warn!("{msg}");
            manifest.warnings.push(msg);
            continue;
        }
        manifest.add_input(&path)?;
        let model = FittedModel::load(&path)?;
        let sequences: Vec<_> = store.test[team].iter().map(|s| s.sequence.clone()).collect();
        reports.push(evaluate_team(&model, team, &sequences, &options)?);
    }
    let report = aggregate(reports)?;

    create_dir(&args.out)?;
    for (name, text) in [
        ("report.csv", report.to_csv()),
        ("report.txt", report.to_table()),
        (
            "report.json",
            serde_json::to_string_pretty(&report).map_err(Error::from)? + "\n",
        ),
    ] {
        let path = args.out.join(name);
        fs::write(&path, text).map_err(|e| Error::io(&path, e))?;
        manifest.outputs.push(name.into());
    }
    manifest.finish(&args.out)?;
    print!("{}", report.to_table());
    Ok(())
}

fn cmd_serve(args: &ServeArgs, file: &ConfigFile) -> CliResult<()> {
    let mut config = BTreeMap::new();
    let port = resolve(&mut config, file, "port", args.port, 8080u16)?;
    let threshold = resolve(&mut config, file, "threshold", None, crate::serve::DEFAULT_THRESHOLD)?;
    let journal: Option<PathBuf> = file.get("journal")?;
    if !(0.5..=1.0).contains(&threshold) {
        return Err(CliError::Usage(format!("threshold {threshold} outside [0.5, 1]")));
    }
    if !args.models.is_dir() {
        return Err(Error::Precondition(format!("model directory {} not found", args.models.display())).into());
    }
    let models = load_models(&args.models)?;
    let service = Arc::new(SessionService::new(models, &ServeConfig { threshold, journal })?);
    let runtime = tokio::runtime::Builder::new_multi_thread()
        .enable_all()
        .build()
        .map_err(|e| Error::Service(e.to_string()))?;
    runtime.block_on(async {
        let addr = SocketAddr::new(IpAddr::from([0, 0, 0, 0]), port);
        let listener = crate::serve::bind(addr).await?;
        let health = service.health();
        eprintln!(
            "serving {} team models on http://{} (threshold {})",
            health.models.len(),
            listener.local_addr().map_err(|e| Error::Service(e.to_string()))?,
            health.threshold
        );
        crate::serve::serve(listener, service).await
    })?;
    Ok(())
}
