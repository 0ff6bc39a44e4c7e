use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use serde::de::DeserializeOwned;
use serde::Serialize;

use phyid::bench::{self, CaseId, CaseSpec, GridOptions, GridSpace, RunOptions};
use phyid::bundle::{train_bundle, Bundle};
use phyid::pinn::{LossWeights, TrainConfig};
use phyid::signal::{load_events, write_dataset};
use phyid::synth::{self, SynthConfig};
use phyid::{Error, Result};

#[derive(Parser)]
#[command(name = "phyid", version, about = "Physics-informed impact identification")]
struct Cli {
    /// Overrides the seed of every configuration.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads for sweeps and grid search.
    #[arg(long, global = true, default_value_t = 1)]
    jobs: usize,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic data set.
    Generate {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Train on every event of a data set and write a model bundle.
    Train {
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// JSON with optional `train` (TrainConfig) and `weights` (LossWeights) objects.
        #[arg(long)]
        config: Option<PathBuf>,
    },
    /// Predict mass, velocity and energy for every event of a data set.
    Predict {
        #[arg(long)]
        bundle: PathBuf,
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run one evaluation case.
    Sweep {
        #[arg(long)]
        case: CaseId,
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        config: Option<PathBuf>,
    },
    /// Exhaustive k-fold search over network architectures.
    Gridsearch {
        #[arg(long)]
        data: PathBuf,
        /// Search space; the full default grids when omitted.
        #[arg(long)]
        grid: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, default_value_t = 2000)]
        epoch_cap: usize,
        #[arg(long, default_value_t = 5)]
        k_folds: usize,
    },
    /// Physics-informed versus physics-ablated training on one split.
    Ablation {
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        config: Option<PathBuf>,
    },
}

#[derive(Default, serde::Deserialize)]
#[serde(default, deny_unknown_fields)]
struct RunConfig {
    train: TrainConfig,
    weights: LossWeights,
    options: RunOptions,
}

fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    serde_json::from_str(&text).map_err(|source| Error::Json {
        context: path.display().to_string(),
        source,
    })
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(parent).map_err(|source| Error::Io {
            path: parent.to_path_buf(),
            source,
        })?;
    }
    let text = serde_json::to_string_pretty(value).map_err(|source| Error::Json {
        context: path.display().to_string(),
        source,
    })?;
    std::fs::write(path, text + "\n").map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn run_config(path: Option<&Path>, cli: &Cli) -> Result<RunConfig> {
    let mut cfg: RunConfig = match path {
        Some(p) => read_json(p)?,
        None => RunConfig::default(),
    };
    if let Some(seed) = cli.seed {
        cfg.train.seed = seed;
    }
    cfg.options.jobs = cli.jobs;
    Ok(cfg)
}

#[derive(Serialize)]
struct EventPrediction<'a> {
    event_id: &'a str,
    mass_kg: f64,
    v0_mps: f64,
    energy_j: f64,
}

#[derive(Serialize)]
struct PredictReport<'a> {
    provenance: String,
    predictions: Vec<EventPrediction<'a>>,
    metrics: bench::EvalReport,
}

fn run(cli: &Cli) -> Result<()> {
    match &cli.command {
        Command::Generate { config, out } => {
            let mut cfg: SynthConfig = match config {
                Some(p) => read_json(p)?,
                None => SynthConfig::default(),
            };
            if let Some(seed) = cli.seed {
                cfg.seed = seed;
            }
            let events = synth::generate(&cfg)?;
            write_dataset(out, &events)?;
            write_json(&out.join("synth_config.json"), &cfg)
        }
        Command::Train { data, out, config } => {
            let cfg = run_config(config.as_deref(), cli)?;
            let events = load_events(data)?;
            let (bundle, _) = train_bundle(&events, &cfg.train, &cfg.weights)?;
            bundle.save(out)
        }
        Command::Predict { bundle, data, out } => {
            let bundle = Bundle::load(bundle)?;
            let events = load_events(data)?;
            let predictions = bundle.predict_events(&events)?;
            let metrics = bench::evaluate(
                &predictions,
                &events,
                &bundle.config.train,
                &bundle.config.weights,
                &RunOptions::default(),
            )?;
            let report = PredictReport {
                provenance: metrics.provenance.clone(),
                predictions: events
                    .iter()
                    .zip(&predictions)
                    .map(|(e, p)| EventPrediction {
                        event_id: &e.event_id,
                        mass_kg: p.mass_kg,
                        v0_mps: p.v0_mps,
                        energy_j: p.energy_j,
                    })
                    .collect(),
                metrics,
            };
            write_json(out, &report)
        }
        Command::Sweep { case, data, out, config } => {
            let cfg = run_config(config.as_deref(), cli)?;
            let events = load_events(data)?;
            let reports = bench::run_case(&CaseSpec::preset(*case), &events, &cfg.train, &cfg.weights, &cfg.options)?;
            bench::write_reports(out, &reports)
        }
        Command::Gridsearch {
            data,
            grid,
            out,
            config,
            epoch_cap,
            k_folds,
        } => {
            let cfg = run_config(config.as_deref(), cli)?;
            let space: GridSpace = match grid {
                Some(p) => read_json(p)?,
                None => GridSpace::default(),
            };
            let events = load_events(data)?;
            let options = GridOptions {
                k_folds: *k_folds,
                epoch_cap: *epoch_cap,
                jobs: cli.jobs,
            };
            let rows = bench::grid_search(&space, &events, &cfg.train, &cfg.weights, &options)?;
            bench::write_grid(out, &rows)
        }
        Command::Ablation { data, out, config } => {
            let cfg = run_config(config.as_deref(), cli)?;
            let events = load_events(data)?;
            let report = bench::run_ablation(&events, &cfg.train, &cfg.weights, &cfg.options)?;
            write_json(&out.join("ablation.json"), &report)?;
            bench::write_reports(out, &[report.physics, report.ablated])
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let record = serde_json::json!({ "error": { "code": e.code(), "message": e.to_string() } });
            eprintln!("{record}");
            ExitCode::FAILURE
        }
    }
}
