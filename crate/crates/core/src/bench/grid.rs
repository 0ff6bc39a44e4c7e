use std::fmt;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{cv_folds, r_squared, FeatureTable};
use crate::error::{Error, Result};
use crate::nn::Activation;
use crate::pinn::{self, LossWeights, NetSpec, TrainConfig};
use crate::signal::ImpactEvent;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Surrogate {
    Displacement,
    Mass,
}

impl fmt::Display for Surrogate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Surrogate::Displacement => "displacement",
            Surrogate::Mass => "mass",
        })
    }
}

/// Candidate values for one network.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NetGrid {
    pub widths: Vec<usize>,
    pub depths: Vec<usize>,
    pub learning_rates: Vec<f64>,
    pub activations: Vec<Activation>,
}

impl NetGrid {
    pub fn len(&self) -> usize {
        self.widths.len() * self.depths.len() * self.learning_rates.len() * self.activations.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn validate(&self, which: Surrogate) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidArgument(format!("{which} grid: {m}")));
        if self.widths.iter().any(|&w| w == 0) {
            return bad("widths must be positive".into());
        }
        if self.depths.iter().any(|&d| d == 0) {
            return bad("depths must be positive".into());
        }
        if let Some(lr) = self.learning_rates.iter().find(|lr| !(lr.is_finite() && **lr > 0.0)) {
            return bad(format!("learning rate {lr} must be finite and positive"));
        }
        Ok(())
    }
}

/// Search space; an empty network grid is skipped.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridSpace {
    #[serde(default = "NetGrid::empty")]
    pub displacement: NetGrid,
    #[serde(default = "NetGrid::empty")]
    pub mass: NetGrid,
}

impl NetGrid {
    fn empty() -> Self {
        NetGrid {
            widths: Vec::new(),
            depths: Vec::new(),
            learning_rates: Vec::new(),
            activations: Vec::new(),
        }
    }

    pub fn default_displacement() -> Self {
        NetGrid {
            widths: vec![32, 64, 128, 256],
            depths: vec![2, 3, 4],
            learning_rates: vec![1e-2, 1e-3],
            activations: Activation::ALL.to_vec(),
        }
    }

    pub fn default_mass() -> Self {
        NetGrid {
            widths: vec![16, 32, 64],
            depths: vec![2, 3],
            learning_rates: vec![1e-2, 1e-3],
            activations: Activation::ALL.to_vec(),
        }
    }
}

impl Default for GridSpace {
    fn default() -> Self {
        GridSpace {
            displacement: NetGrid::default_displacement(),
            mass: NetGrid::default_mass(),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridCandidate {
    pub surrogate: Surrogate,
    pub net: NetSpec,
    pub lr: f64,
}

impl GridCandidate {
    /// `base` with this candidate's network and learning rate swapped in.
    pub fn apply(&self, base: &TrainConfig) -> TrainConfig {
        let mut c = base.clone();
        match self.surrogate {
            Surrogate::Displacement => {
                c.disp_net = self.net;
                c.lr_disp = self.lr;
            }
            Surrogate::Mass => {
                c.mass_net = self.net;
                c.lr_mass = self.lr;
            }
        }
        c
    }
}

impl GridSpace {
    pub fn validate(&self) -> Result<()> {
        self.displacement.validate(Surrogate::Displacement)?;
        self.mass.validate(Surrogate::Mass)?;
        if self.displacement.is_empty() && self.mass.is_empty() {
            return Err(Error::Empty("grid"));
        }
        Ok(())
    }

    /// Every combination, displacement first, in width/depth/lr/activation order.
    pub fn candidates(&self) -> Vec<GridCandidate> {
        let mut out = Vec::new();
        for (surrogate, g) in [(Surrogate::Displacement, &self.displacement), (Surrogate::Mass, &self.mass)] {
            for &hidden_width in &g.widths {
                for &hidden_layers in &g.depths {
                    for &lr in &g.learning_rates {
                        for &activation in &g.activations {
                            out.push(GridCandidate {
                                surrogate,
                                net: NetSpec {
                                    hidden_width,
                                    hidden_layers,
                                    activation,
                                },
                                lr,
                            });
                        }
                    }
                }
            }
        }
        out
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GridOptions {
    pub k_folds: usize,
    /// Per-phase epoch cap applied on top of the base configuration.
    pub epoch_cap: usize,
    pub jobs: usize,
}

impl Default for GridOptions {
    fn default() -> Self {
        GridOptions {
            k_folds: 5,
            epoch_cap: 2000,
            jobs: 1,
        }
    }
}

/// One ranked configuration. Ranks restart at 1 for each surrogate.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridRow {
    pub rank: usize,
    pub candidate: GridCandidate,
    /// Mean validation R² of the searched surrogate's target.
    pub mean_r2: f64,
    pub fold_r2: Vec<f64>,
    pub error: Option<String>,
}

fn score(
    table: &FeatureTable,
    folds: &[super::Fold],
    candidate: &GridCandidate,
    config: &TrainConfig,
    weights: &LossWeights,
) -> Result<Vec<f64>> {
    folds
        .iter()
        .map(|fold| {
            let split = table.split(&fold.train, &fold.validation)?;
            let state = pinn::train(&split.train, config, weights)?;
            let pred = state.predictor().predict_batch(split.test.view())?;
            let rows = split.test_rows.iter().map(|&r| table.event(r));
            let (truth, fitted): (Vec<f64>, Vec<f64>) = match candidate.surrogate {
                Surrogate::Displacement => rows.map(|e| e.v0_obs_mps).zip(pred.iter().map(|p| p.v0_mps)).unzip(),
                Surrogate::Mass => rows.map(|e| e.mass_obs_kg).zip(pred.iter().map(|p| p.mass_kg)).unzip(),
            };
            r_squared(&truth, &fitted)
        })
        .collect()
}

/// k-fold search over every candidate. Candidates that fail to train score
/// `-inf`, keep their error message and rank last.
pub fn grid_search(
    space: &GridSpace,
    events: &[ImpactEvent],
    base: &TrainConfig,
    weights: &LossWeights,
    options: &GridOptions,
) -> Result<Vec<GridRow>> {
    space.validate()?;
    base.validate()?;
    weights.validate()?;
    if options.epoch_cap == 0 {
        return Err(Error::InvalidArgument("epoch cap must be positive".into()));
    }
    let folds = cv_folds(events, options.k_folds, base.seed)?;
    let table = FeatureTable::new(events)?;
    let mut capped = base.clone();
    capped.max_epochs_per_phase = capped.max_epochs_per_phase.min(options.epoch_cap);

    let candidates = space.candidates();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(options.jobs.max(1))
        .build()
        .map_err(|e| Error::InvalidArgument(format!("thread pool: {e}")))?;
    let mut rows: Vec<GridRow> = pool.install(|| {
        candidates
            .par_iter()
            .map(|c| {
                let (fold_r2, error) = match score(&table, &folds, c, &c.apply(&capped), weights) {
                    Ok(r) => (r, None),
                    Err(e) => (Vec::new(), Some(e.to_string())),
                };
                let mean_r2 = if fold_r2.is_empty() || fold_r2.iter().any(|r| !r.is_finite()) {
                    f64::NEG_INFINITY
                } else {
                    fold_r2.iter().sum::<f64>() / fold_r2.len() as f64
                };
                GridRow {
                    rank: 0,
                    candidate: *c,
                    mean_r2,
                    fold_r2,
                    error,
                }
            })
            .collect()
    });

    // Stable: ties keep enumeration order.
    rows.sort_by(|a, b| {
        a.candidate
            .surrogate
            .cmp(&b.candidate.surrogate)
            .then(b.mean_r2.total_cmp(&a.mean_r2))
    });
    let mut rank = 0;
    let mut current = None;
    for row in &mut rows {
        if current != Some(row.candidate.surrogate) {
            current = Some(row.candidate.surrogate);
            rank = 0;
        }
        rank += 1;
        row.rank = rank;
    }
    Ok(rows)
}

#[derive(Serialize)]
struct RankedRecord<'a> {
    surrogate: Surrogate,
    rank: usize,
    hidden_width: usize,
    hidden_layers: usize,
    learning_rate: f64,
    activation: &'static str,
    mean_r2: f64,
    fold_r2: String,
    error: &'a str,
}

/// Numeric encoding for parallel-coordinates plots.
#[derive(Serialize)]
struct ParallelRecord {
    surrogate: Surrogate,
    hidden_width: usize,
    hidden_layers: usize,
    log10_lr: f64,
    activation_code: usize,
    mean_r2: f64,
}

/// Writes `grid_ranked.csv` and `grid_parallel.csv` into `dir`.
pub fn write_grid(dir: impl AsRef<Path>, rows: &[GridRow]) -> Result<()> {
    let dir = dir.as_ref();
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let fail = |p: &Path, e: csv::Error| Error::Malformed {
        context: p.display().to_string(),
        message: e.to_string(),
    };

    let ranked = dir.join("grid_ranked.csv");
    let mut w = csv::Writer::from_path(&ranked).map_err(|e| fail(&ranked, e))?;
    for r in rows {
        let c = &r.candidate;
        w.serialize(RankedRecord {
            surrogate: c.surrogate,
            rank: r.rank,
            hidden_width: c.net.hidden_width,
            hidden_layers: c.net.hidden_layers,
            learning_rate: c.lr,
            activation: c.net.activation.name(),
            mean_r2: r.mean_r2,
            fold_r2: r.fold_r2.iter().map(|v| v.to_string()).collect::<Vec<_>>().join(";"),
            error: r.error.as_deref().unwrap_or(""),
        })
        .map_err(|e| fail(&ranked, e))?;
    }
    w.flush().map_err(|e| Error::io(&ranked, e))?;

    let parallel = dir.join("grid_parallel.csv");
    let mut w = csv::Writer::from_path(&parallel).map_err(|e| fail(&parallel, e))?;
    for r in rows {
        let c = &r.candidate;
        w.serialize(ParallelRecord {
            surrogate: c.surrogate,
            hidden_width: c.net.hidden_width,
            hidden_layers: c.net.hidden_layers,
            log10_lr: c.lr.log10(),
            activation_code: Activation::ALL.iter().position(|&a| a == c.net.activation).unwrap_or(0),
            mean_r2: r.mean_r2,
        })
        .map_err(|e| fail(&parallel, e))?;
    }
    w.flush().map_err(|e| Error::io(&parallel, e))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_grids_enumerate_72_and_36() {
        let space = GridSpace::default();
        let c = space.candidates();
        assert_eq!(c.iter().filter(|c| c.surrogate == Surrogate::Displacement).count(), 72);
        assert_eq!(c.iter().filter(|c| c.surrogate == Surrogate::Mass).count(), 36);
    }

    #[test]
    fn invalid_entries_rejected() {
        let mut space = GridSpace::default();
        space.mass.learning_rates.push(-1.0);
        assert!(space.validate().is_err());
        let empty = GridSpace {
            displacement: NetGrid::empty(),
            mass: NetGrid::empty(),
        };
        assert!(empty.validate().is_err());
    }

    #[test]
    fn apply_swaps_only_the_searched_net() {
        let base = TrainConfig::default();
        let c = GridCandidate {
            surrogate: Surrogate::Mass,
            net: NetSpec {
                hidden_width: 16,
                hidden_layers: 2,
                activation: Activation::Tanh,
            },
            lr: 1e-2,
        };
        let cfg = c.apply(&base);
        assert_eq!(cfg.mass_net, c.net);
        assert_eq!(cfg.lr_mass, 1e-2);
        assert_eq!(cfg.disp_net, base.disp_net);
        assert_eq!(cfg.lr_disp, base.lr_disp);
    }
}
