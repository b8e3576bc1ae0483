//! Batch front-end for the Gaussian beam QoI engines.
//!
//! ```text
//! gbeam --config run.cfg [--out DIR] [--workers K] [--override key=value]...
//! ```
//!
//! On success every artifact lands in the output directory together with a
//! `manifest.json`. On failure nothing is written and a JSON error report
//! goes to stderr.

mod commands;
mod config;
mod figures;
mod output;
mod settings;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::Parser;
use serde_json::{json, Map, Value};
use thiserror::Error;

use commands::{with_preset, AnyScenario};
use config::{ConfigError, RawConfig};
use output::{config_hash, Manifest, Staging};
use settings::{Command, RunConfig};

#[derive(Debug, Error)]
pub enum CliError {
    #[error(transparent)]
    Config(#[from] ConfigError),

    #[error(transparent)]
    Engine(#[from] gbeam::GbError),

    #[error("{path}: {msg}")]
    Io { path: String, msg: String },

    #[error("{0}")]
    Internal(String),
}

impl CliError {
    pub fn io(path: &Path, e: std::io::Error) -> Self {
        CliError::Io { path: path.display().to_string(), msg: e.to_string() }
    }

    fn kind(&self) -> &'static str {
        use gbeam::GbError as G;
        match self {
            CliError::Config(_) => "ConfigParseError",
            CliError::Engine(G::ValidationFailure { .. }) => "ValidationFailure",
            CliError::Engine(G::InvalidPlan(_)) => "InvalidPlan",
            CliError::Engine(G::SweepAborted { .. }) => "SweepAborted",
            CliError::Engine(G::GridTooCoarse { .. }) => "GridTooCoarse",
            CliError::Engine(G::UnsupportedScenario(_)) => "UnsupportedScenario",
            CliError::Engine(_) => "EngineError",
            CliError::Io { .. } => "IoError",
            CliError::Internal(_) => "InternalError",
        }
    }

    fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) => 2,
            _ => 1,
        }
    }

    /// Machine-readable error report.
    fn report(&self) -> Value {
        let mut m = Map::new();
        m.insert("error".into(), json!(self.kind()));
        m.insert("message".into(), json!(self.to_string()));
        match self {
            CliError::Config(ConfigError::Parse { line, .. }) => {
                m.insert("line".into(), json!(line));
            }
            CliError::Config(ConfigError::Field { key, line, .. }) => {
                m.insert("field".into(), json!(key));
                if *line > 0 {
                    m.insert("line".into(), json!(line));
                }
            }
            CliError::Config(ConfigError::Missing(key)) => {
                m.insert("field".into(), json!(key));
            }
            CliError::Engine(gbeam::GbError::ValidationFailure { assumption, witness, .. }) => {
                m.insert("assumption".into(), json!(assumption));
                m.insert("witness".into(), json!(witness));
            }
            _ => {}
        }
        Value::Object(m)
    }
}

#[derive(Parser, Debug)]
#[command(name = "gbeam", version, about = "Gaussian beam wave propagation and QoI batch runner")]
struct Args {
    /// Config file with dotted `key = value` lines.
    #[arg(long)]
    config: PathBuf,

    /// Output directory (overrides run.out; default ./out).
    #[arg(long)]
    out: Option<PathBuf>,

    /// Worker threads (overrides run.workers; default all cores).
    #[arg(long)]
    workers: Option<usize>,

    /// Extra `key=value` assignment applied after the file; repeatable.
    #[arg(long = "override", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
}

fn load(args: &Args) -> Result<(RawConfig, RunConfig), CliError> {
    let text = std::fs::read_to_string(&args.config).map_err(|e| CliError::io(&args.config, e))?;
    let mut raw = RawConfig::parse(&text)?;
    for o in &args.overrides {
        raw.assign(o, 0)?;
    }
    let cfg = RunConfig::from_raw(&raw)?;
    Ok((raw, cfg))
}

fn run(args: &Args) -> Result<PathBuf, CliError> {
    let (raw, cfg) = load(args)?;
    let workers = args.workers.or(cfg.workers);
    if workers == Some(0) {
        return Err(CliError::Config(ConfigError::Field {
            key: "--workers".into(),
            line: 0,
            msg: "must be at least 1".into(),
        }));
    }
    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(k) = workers {
        pool = pool.num_threads(k);
    }
    let pool = pool.build().map_err(|e| CliError::Internal(e.to_string()))?;

    let out = args.out.clone().or_else(|| cfg.out.clone()).unwrap_or_else(|| PathBuf::from("out"));
    let hash = config_hash(&raw.canonical());
    let mut stage = Staging::create(&out, &hash)?;

    let (scenario_name, details, layout) = pool.install(|| -> Result<_, CliError> {
        if cfg.command == Command::ReproduceFigure {
            let fig = cfg.figure.expect("checked when parsing");
            let (layout, details, name) = figures::reproduce(fig, &cfg, &mut stage)?;
            return Ok((name, details, Some(layout)));
        }
        let any = AnyScenario::build(cfg.scenario)?;
        let details = with_preset!(&any, s => match cfg.command {
            Command::Validate => commands::validate(&cfg, s, &mut stage)?,
            Command::Snapshot => {
                let ys = commands::parameter_points(&cfg, s);
                commands::snapshots(&cfg, s, &ys, &mut stage)?;
                Map::new()
            }
            Command::Qoi => commands::qoi(&cfg, s, &mut stage)?,
            Command::Sweep => commands::sweep(&cfg, s, &mut stage)?.0,
            Command::Fit => commands::fit(&cfg, s, &mut stage)?,
            Command::ReproduceFigure => unreachable!(),
        });
        Ok((any.name().to_string(), details, None))
    })?;

    let command = raw.keys().find(|(k, _)| *k == "command").map(|(_, e)| e.value.clone());
    let manifest = Manifest {
        command: match command {
            Some(config::Value::Str(s)) => s,
            _ => String::new(),
        },
        scenario: scenario_name,
        config_hash: hash,
        epsilons: match (&layout, cfg.command) {
            (Some(_), _) | (None, Command::Validate) => Vec::new(),
            _ => cfg.eps.clone(),
        },
        files: Vec::new(),
        layout,
        details,
    };
    stage.commit(manifest)
}

fn main() -> ExitCode {
    let args = Args::parse();
    match run(&args) {
        Ok(dir) => {
            println!("{}", dir.display());
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("{}", e.report());
            ExitCode::from(e.exit_code())
        }
    }
}
