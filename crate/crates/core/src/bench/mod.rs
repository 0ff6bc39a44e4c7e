//! Evaluation protocols: hold-out and cross-validated cases, availability and
//! noise sweeps, out-of-range generalisation, the physics ablation, and the
//! architecture grid search.

mod grid;
mod metrics;
mod split;

use std::collections::HashMap;
use std::fmt;
use std::path::Path;
use std::str::FromStr;
use std::time::Instant;

use ndarray::Array2;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use grid::{grid_search, write_grid, GridCandidate, GridOptions, GridRow, GridSpace, NetGrid, Surrogate};
pub use metrics::{mape, median, r_squared, tolerance_band_fraction, DEFAULT_BAND};
pub use split::{cv_folds, make_splits, subsample, Fold, SplitPlan, MIN_TRAIN_GROUPS};

use crate::error::{Error, Result};
use crate::features::{self, FeatureMatrix, Normalization};
use crate::pinn::{self, LossWeights, Prediction, TrainConfig, TrainingSet};
use crate::rng;
use crate::signal::{self, ImpactEvent};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum CaseId {
    P1,
    R1,
    R2,
    R3,
    G1,
}

impl CaseId {
    pub const ALL: [CaseId; 5] = [CaseId::P1, CaseId::R1, CaseId::R2, CaseId::R3, CaseId::G1];

    pub fn name(self) -> &'static str {
        match self {
            CaseId::P1 => "P1",
            CaseId::R1 => "R1",
            CaseId::R2 => "R2",
            CaseId::R3 => "R3",
            CaseId::G1 => "G1",
        }
    }
}

impl fmt::Display for CaseId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for CaseId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        CaseId::ALL
            .into_iter()
            .find(|c| c.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::InvalidArgument(format!("unknown case '{s}' (expected P1, R1, R2, R3 or G1)")))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CaseSpec {
    pub case_id: CaseId,
    pub availability_fractions: Vec<f64>,
    pub noise_levels: Vec<f64>,
    pub train_energy_range_j: Option<(f64, f64)>,
    pub augment: bool,
}

pub const AVAILABILITY_SWEEP: [f64; 4] = [0.25, 0.5, 0.75, 1.0];
pub const NOISE_SWEEP: [f64; 6] = [0.0, 0.01, 0.02, 0.03, 0.04, 0.05];

impl CaseSpec {
    pub fn preset(case_id: CaseId) -> Self {
        let (availability, noise, range, augment) = match case_id {
            CaseId::P1 => (vec![1.0], vec![0.0], None, true),
            CaseId::R1 => (AVAILABILITY_SWEEP.to_vec(), vec![0.0], None, false),
            CaseId::R2 => (vec![1.0], NOISE_SWEEP.to_vec(), None, false),
            CaseId::R3 => (AVAILABILITY_SWEEP.to_vec(), NOISE_SWEEP.to_vec(), None, false),
            CaseId::G1 => (vec![1.0], vec![0.0], Some((20.0, 80.0)), true),
        };
        CaseSpec {
            case_id,
            availability_fractions: availability,
            noise_levels: noise,
            train_energy_range_j: range,
            augment,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let mismatch = |m: &str| Err(Error::InvalidArgument(format!("case {}: {m}", self.case_id)));
        if self.availability_fractions.is_empty() || self.noise_levels.is_empty() {
            return mismatch("availability and noise lists must be non-empty");
        }
        if self.availability_fractions.iter().any(|f| !(0.25..=1.0).contains(f)) {
            return mismatch("availability fractions must lie in [0.25, 1.0]");
        }
        if self.noise_levels.iter().any(|n| !(0.0..=0.05).contains(n)) {
            return mismatch("noise levels must lie in [0, 0.05]");
        }
        let full_only = self.availability_fractions == [1.0];
        let clean_only = self.noise_levels == [0.0];
        match self.case_id {
            CaseId::P1 if !(full_only && clean_only) => mismatch("uses full availability without sweep noise"),
            CaseId::R1 if !clean_only => mismatch("sweeps availability only"),
            CaseId::R2 if !full_only => mismatch("sweeps noise only"),
            CaseId::R1 | CaseId::R2 | CaseId::R3 if self.augment => mismatch("sweeps use original signals only"),
            CaseId::G1 if !(full_only && clean_only) => mismatch("uses full availability without sweep noise"),
            CaseId::G1 => match self.train_energy_range_j {
                Some((lo, hi)) if lo.is_finite() && hi.is_finite() && lo < hi => Ok(()),
                _ => mismatch("needs an ordered training energy range"),
            },
            _ if self.train_energy_range_j.is_some() => mismatch("only G1 restricts the training energy range"),
            _ => Ok(()),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EnergyBins {
    pub lo_j: f64,
    pub hi_j: f64,
    pub count: usize,
}

impl Default for EnergyBins {
    fn default() -> Self {
        EnergyBins {
            lo_j: 4.0,
            hi_j: 80.0,
            count: 8,
        }
    }
}

impl EnergyBins {
    /// Bin of `energy`; values outside the range fall into the edge bins.
    pub fn index(&self, energy: f64) -> usize {
        let width = (self.hi_j - self.lo_j) / self.count as f64;
        let k = ((energy - self.lo_j) / width).floor();
        (k.max(0.0) as usize).min(self.count - 1)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RunOptions {
    pub ratio: f64,
    pub k_folds: usize,
    /// Noise level of the augmented copies (fraction of peak amplitude).
    pub augment_noise: f64,
    pub band: f64,
    pub bins: EnergyBins,
    pub jobs: usize,
}

impl Default for RunOptions {
    fn default() -> Self {
        RunOptions {
            ratio: 0.8,
            k_folds: 5,
            augment_noise: 0.01,
            band: DEFAULT_BAND,
            bins: EnergyBins::default(),
            jobs: 1,
        }
    }
}

impl RunOptions {
    fn validate(&self) -> Result<()> {
        if !(self.bins.count > 0 && self.bins.lo_j < self.bins.hi_j) {
            return Err(Error::InvalidArgument(format!("invalid energy bins {:?}", self.bins)));
        }
        if !(self.augment_noise > 0.0 && self.band >= 0.0) {
            return Err(Error::InvalidArgument("augment noise must be > 0 and band >= 0".into()));
        }
        Ok(())
    }

    fn pool(&self) -> Result<rayon::ThreadPool> {
        rayon::ThreadPoolBuilder::new()
            .num_threads(self.jobs.max(1))
            .build()
            .map_err(|e| Error::InvalidArgument(format!("thread pool: {e}")))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Model {
    Phyid,
    Baseline,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TargetMetrics {
    /// Mean over folds, percent.
    pub mape: f64,
    /// Mean over folds.
    pub r_squared: f64,
    /// Pooled over every test prediction.
    pub tolerance_band_fraction: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ParityPair {
    pub event_id: String,
    pub fold: usize,
    pub truth: f64,
    pub prediction: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EnergyBin {
    pub lo_j: f64,
    pub hi_j: f64,
    pub count: usize,
    pub mape: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OodSummary {
    pub train_range_j: (f64, f64),
    pub n_low: usize,
    pub n_high: usize,
    pub low_energy_mape: Option<f64>,
    pub high_energy_mape: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub case_id: CaseId,
    pub model: Model,
    pub availability: f64,
    pub noise_level: f64,
    pub seed: u64,
    pub provenance: String,
    pub config: TrainConfig,
    pub weights: LossWeights,
    pub train_sizes: Vec<usize>,
    pub n_test: usize,
    pub velocity: Option<TargetMetrics>,
    pub mass: Option<TargetMetrics>,
    pub energy: TargetMetrics,
    /// Energy band fraction, repeated for convenience.
    pub tolerance_band_fraction: f64,
    /// Energy R², repeated for convenience.
    pub r_squared: f64,
    pub fold_energy_mape: Vec<f64>,
    pub parity_velocity: Vec<ParityPair>,
    pub parity_mass: Vec<ParityPair>,
    pub parity_energy: Vec<ParityPair>,
    pub energy_bins: Vec<EnergyBin>,
    pub ood: Option<OodSummary>,
    pub runtime_s: f64,
}

/// Raw features of one event list, computed once and normalized per split.
pub(crate) struct FeatureTable<'a> {
    events: &'a [ImpactEvent],
    raw: FeatureMatrix,
    index: HashMap<&'a str, usize>,
}

pub(crate) struct PreparedSplit {
    pub train: TrainingSet,
    pub test: Array2<f64>,
    pub test_rows: Vec<usize>,
    pub normalization: Normalization,
}

impl<'a> FeatureTable<'a> {
    pub fn new(events: &'a [ImpactEvent]) -> Result<Self> {
        let raw = features::build_matrix(events)?;
        let index = events.iter().enumerate().map(|(i, e)| (e.event_id.as_str(), i)).collect();
        Ok(FeatureTable { events, raw, index })
    }

    pub fn rows(&self, ids: &[String]) -> Result<Vec<usize>> {
        ids.iter()
            .map(|id| {
                self.index
                    .get(id.as_str())
                    .copied()
                    .ok_or_else(|| Error::InvalidArgument(format!("unknown event id '{id}'")))
            })
            .collect()
    }

    fn dense(m: &FeatureMatrix, rows: &[usize]) -> Array2<f64> {
        Array2::from_shape_fn((rows.len(), m.n_features()), |(i, j)| m.rows[rows[i]][j])
    }

    pub fn split(&self, train_ids: &[String], test_ids: &[String]) -> Result<PreparedSplit> {
        let train_rows = self.rows(train_ids)?;
        let test_rows = self.rows(test_ids)?;
        if train_rows.is_empty() {
            return Err(Error::Empty("training subset"));
        }
        let m = features::normalize(&self.raw, &train_rows)?;
        let label = |f: fn(&ImpactEvent) -> f64| train_rows.iter().map(|&r| f(&self.events[r])).collect();
        let train = TrainingSet::new(
            Self::dense(&m, &train_rows),
            label(|e| e.mass_obs_kg),
            label(|e| e.v0_obs_mps),
            label(|e| e.energy_meas_j),
        )?;
        Ok(PreparedSplit {
            train,
            test: Self::dense(&m, &test_rows),
            test_rows,
            normalization: m.normalization.expect("normalized"),
        })
    }

    pub fn event(&self, row: usize) -> &ImpactEvent {
        &self.events[row]
    }
}

/// Test-set outcome of one trained model.
struct FoldOutcome {
    fold: usize,
    n_train: usize,
    ids: Vec<String>,
    truth: [Vec<f64>; 3],
    /// velocity, mass, energy; velocity and mass absent for the baseline.
    pred: [Option<Vec<f64>>; 3],
}

fn outcome_from_predictions(
    table: &FeatureTable,
    split: &PreparedSplit,
    fold: usize,
    predictions: &[Prediction],
) -> FoldOutcome {
    let events: Vec<&ImpactEvent> = split.test_rows.iter().map(|&r| table.event(r)).collect();
    FoldOutcome {
        fold,
        n_train: split.train.len(),
        ids: events.iter().map(|e| e.event_id.clone()).collect(),
        truth: [
            events.iter().map(|e| e.v0_obs_mps).collect(),
            events.iter().map(|e| e.mass_obs_kg).collect(),
            events.iter().map(|e| e.energy_meas_j).collect(),
        ],
        pred: [
            Some(predictions.iter().map(|p| p.v0_mps).collect()),
            Some(predictions.iter().map(|p| p.mass_kg).collect()),
            Some(predictions.iter().map(|p| p.energy_j).collect()),
        ],
    }
}

fn run_phyid(table: &FeatureTable, fold: usize, train_ids: &[String], test_ids: &[String], config: &TrainConfig, weights: &LossWeights) -> Result<FoldOutcome> {
    let split = table.split(train_ids, test_ids)?;
    let state = pinn::train(&split.train, config, weights)?;
    let predictions = state.predictor().predict_batch(split.test.view())?;
    Ok(outcome_from_predictions(table, &split, fold, &predictions))
}

fn run_baseline(table: &FeatureTable, fold: usize, train_ids: &[String], test_ids: &[String], config: &TrainConfig) -> Result<FoldOutcome> {
    let split = table.split(train_ids, test_ids)?;
    let model = pinn::train_baseline(split.train.features.view(), &split.train.energy, config)?;
    let energy = model.predict_batch(split.test.view())?;
    let mut outcome = outcome_from_predictions(table, &split, fold, &[]);
    outcome.pred = [None, None, Some(energy)];
    Ok(outcome)
}

struct ReportContext<'a> {
    case_id: CaseId,
    model: Model,
    availability: f64,
    noise_level: f64,
    config: &'a TrainConfig,
    weights: &'a LossWeights,
    options: &'a RunOptions,
    provenance: String,
}

fn target_metrics(outcomes: &[FoldOutcome], target: usize, band: f64) -> Result<Option<TargetMetrics>> {
    if outcomes.iter().any(|o| o.pred[target].is_none()) {
        return Ok(None);
    }
    let (mut mapes, mut r2s) = (Vec::new(), Vec::new());
    let (mut truth_all, mut pred_all) = (Vec::new(), Vec::new());
    for o in outcomes.iter().filter(|o| !o.ids.is_empty()) {
        let pred = o.pred[target].as_ref().expect("checked");
        mapes.push(mape(&o.truth[target], pred)?);
        r2s.push(r_squared(&o.truth[target], pred)?);
        truth_all.extend_from_slice(&o.truth[target]);
        pred_all.extend_from_slice(pred);
    }
    if mapes.is_empty() {
        return Err(Error::Empty("test set"));
    }
    let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
    Ok(Some(TargetMetrics {
        mape: mean(&mapes),
        r_squared: mean(&r2s),
        tolerance_band_fraction: tolerance_band_fraction(&truth_all, &pred_all, band)?,
    }))
}

fn parity(outcomes: &[FoldOutcome], target: usize) -> Vec<ParityPair> {
    outcomes
        .iter()
        .filter_map(|o| {
            o.pred[target].as_ref().map(|pred| {
                o.ids.iter().zip(&o.truth[target]).zip(pred).map(|((id, &truth), &prediction)| ParityPair {
                    event_id: id.clone(),
                    fold: o.fold,
                    truth,
                    prediction,
                })
            })
        })
        .flatten()
        .collect()
}

fn energy_bins(pairs: &[ParityPair], bins: &EnergyBins) -> Result<Vec<EnergyBin>> {
    let width = (bins.hi_j - bins.lo_j) / bins.count as f64;
    (0..bins.count)
        .map(|k| {
            let members: Vec<&ParityPair> = pairs.iter().filter(|p| bins.index(p.truth) == k).collect();
            let truth: Vec<f64> = members.iter().map(|p| p.truth).collect();
            let pred: Vec<f64> = members.iter().map(|p| p.prediction).collect();
            Ok(EnergyBin {
                lo_j: bins.lo_j + width * k as f64,
                hi_j: bins.lo_j + width * (k + 1) as f64,
                count: members.len(),
                mape: if members.is_empty() { None } else { Some(mape(&truth, &pred)?) },
            })
        })
        .collect()
}

fn subset_mape(pairs: &[ParityPair], keep: impl Fn(f64) -> bool) -> Result<(usize, Option<f64>)> {
    let (truth, pred): (Vec<f64>, Vec<f64>) = pairs.iter().filter(|p| keep(p.truth)).map(|p| (p.truth, p.prediction)).unzip();
    Ok((truth.len(), if truth.is_empty() { None } else { Some(mape(&truth, &pred)?) }))
}

fn build_report(ctx: &ReportContext, outcomes: Vec<FoldOutcome>, ood_range: Option<(f64, f64)>, runtime_s: f64) -> Result<EvalReport> {
    let band = ctx.options.band;
    let energy = target_metrics(&outcomes, 2, band)?.ok_or(Error::Empty("energy predictions"))?;
    let parity_energy = parity(&outcomes, 2);
    if parity_energy.iter().any(|p| !p.prediction.is_finite()) {
        return Err(Error::InvalidArgument("non-finite energy prediction".into()));
    }
    let ood = match ood_range {
        Some((lo, hi)) => {
            let (n_low, low_energy_mape) = subset_mape(&parity_energy, |e| e < lo)?;
            let (n_high, high_energy_mape) = subset_mape(&parity_energy, |e| e > hi)?;
            Some(OodSummary {
                train_range_j: (lo, hi),
                n_low,
                n_high,
                low_energy_mape,
                high_energy_mape,
            })
        }
        None => None,
    };
    let mut fold_energy_mape = Vec::new();
    for o in outcomes.iter().filter(|o| !o.ids.is_empty()) {
        fold_energy_mape.push(mape(&o.truth[2], o.pred[2].as_ref().expect("energy"))?);
    }
    Ok(EvalReport {
        case_id: ctx.case_id,
        model: ctx.model,
        availability: ctx.availability,
        noise_level: ctx.noise_level,
        seed: ctx.config.seed,
        provenance: ctx.provenance.clone(),
        config: ctx.config.clone(),
        weights: *ctx.weights,
        train_sizes: outcomes.iter().map(|o| o.n_train).collect(),
        n_test: parity_energy.len(),
        velocity: target_metrics(&outcomes, 0, band)?,
        mass: target_metrics(&outcomes, 1, band)?,
        tolerance_band_fraction: energy.tolerance_band_fraction,
        r_squared: energy.r_squared,
        energy,
        fold_energy_mape,
        parity_velocity: parity(&outcomes, 0),
        parity_mass: parity(&outcomes, 1),
        energy_bins: energy_bins(&parity_energy, &ctx.options.bins)?,
        parity_energy,
        ood,
        runtime_s,
    })
}

/// `phyid <version> cfg:<hash of the full configuration>`.
pub fn provenance<T: Serialize>(config: &T) -> String {
    let bytes = serde_json::to_vec(config).unwrap_or_default();
    format!("phyid {} cfg:{:016x}", env!("CARGO_PKG_VERSION"), rng::fnv1a(&bytes))
}

fn context<'a>(
    case: &CaseSpec,
    model: Model,
    availability: f64,
    noise_level: f64,
    config: &'a TrainConfig,
    weights: &'a LossWeights,
    options: &'a RunOptions,
) -> ReportContext<'a> {
    ReportContext {
        case_id: case.case_id,
        model,
        availability,
        noise_level,
        config,
        weights,
        options,
        provenance: provenance(&(case, model, availability, noise_level, config, weights, options)),
    }
}

fn maybe_augment(case: &CaseSpec, events: &[ImpactEvent], options: &RunOptions, seed: u64) -> Result<Vec<ImpactEvent>> {
    if case.augment {
        signal::augment_dataset(events, options.augment_noise, rng::derive_seed(seed, "augment"))
    } else {
        Ok(events.to_vec())
    }
}

/// Runs one protocol and returns one report per cell, ordered by
/// (availability, noise).
pub fn run_case(
    case: &CaseSpec,
    events: &[ImpactEvent],
    config: &TrainConfig,
    weights: &LossWeights,
    options: &RunOptions,
) -> Result<Vec<EvalReport>> {
    case.validate()?;
    config.validate()?;
    weights.validate()?;
    options.validate()?;
    if events.is_empty() {
        return Err(Error::Empty("event list"));
    }
    match case.case_id {
        CaseId::P1 => Ok(vec![run_holdout(case, events, config, weights, options)?]),
        CaseId::G1 => Ok(vec![run_generalisation(case, events, config, weights, options)?]),
        CaseId::R1 | CaseId::R2 | CaseId::R3 => run_sweep(case, events, config, weights, options),
    }
}

fn run_holdout(case: &CaseSpec, events: &[ImpactEvent], config: &TrainConfig, weights: &LossWeights, options: &RunOptions) -> Result<EvalReport> {
    let start = Instant::now();
    let events = maybe_augment(case, events, options, config.seed)?;
    let plan = make_splits(&events, options.ratio, 0, config.seed)?;
    let table = FeatureTable::new(&events)?;
    let outcome = run_phyid(&table, 0, &plan.train_ids, &plan.test_ids, config, weights)?;
    let ctx = context(case, Model::Phyid, 1.0, 0.0, config, weights, options);
    build_report(&ctx, vec![outcome], None, start.elapsed().as_secs_f64())
}

fn run_generalisation(case: &CaseSpec, events: &[ImpactEvent], config: &TrainConfig, weights: &LossWeights, options: &RunOptions) -> Result<EvalReport> {
    let start = Instant::now();
    let (lo, hi) = case.train_energy_range_j.expect("validated");
    let events = maybe_augment(case, events, options, config.seed)?;
    let (inside, outside): (Vec<&ImpactEvent>, Vec<&ImpactEvent>) =
        events.iter().partition(|e| (lo..=hi).contains(&e.energy_meas_j));
    if outside.is_empty() {
        return Err(Error::Empty("out-of-range test set"));
    }
    let ids = |v: &[&ImpactEvent]| v.iter().map(|e| e.event_id.clone()).collect::<Vec<_>>();
    let table = FeatureTable::new(&events)?;
    let outcome = run_phyid(&table, 0, &ids(&inside), &ids(&outside), config, weights)?;
    let ctx = context(case, Model::Phyid, 1.0, 0.0, config, weights, options);
    build_report(&ctx, vec![outcome], Some((lo, hi)), start.elapsed().as_secs_f64())
}

fn run_sweep(case: &CaseSpec, events: &[ImpactEvent], config: &TrainConfig, weights: &LossWeights, options: &RunOptions) -> Result<Vec<EvalReport>> {
    let folds = cv_folds(events, options.k_folds, config.seed)?;
    let mut noise_levels = case.noise_levels.clone();
    noise_levels.sort_by(f64::total_cmp);
    noise_levels.dedup();
    let mut availability = case.availability_fractions.clone();
    availability.sort_by(f64::total_cmp);
    availability.dedup();

    let variants = noise_levels
        .iter()
        .map(|&level| {
            if level == 0.0 {
                return Ok(events.to_vec());
            }
            let seed = rng::derive_seed(config.seed, &format!("sweep_noise:{level}"));
            events.iter().map(|e| signal::add_noise_event(e, level, seed)).collect()
        })
        .collect::<Result<Vec<Vec<ImpactEvent>>>>()?;
    let tables = variants.iter().map(|v| FeatureTable::new(v)).collect::<Result<Vec<_>>>()?;

    let subsets = availability
        .iter()
        .map(|&f| {
            folds
                .iter()
                .enumerate()
                .map(|(k, fold)| subsample(&fold.train, f, rng::derive_seed(config.seed, &format!("fold:{k}"))))
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<Vec<_>>>()?;

    let mut tasks = Vec::new();
    for a in 0..availability.len() {
        for n in 0..noise_levels.len() {
            for k in 0..folds.len() {
                tasks.push((a, n, k));
            }
        }
    }
    let start = Instant::now();
    let outcomes = options.pool()?.install(|| {
        tasks
            .par_iter()
            .map(|&(a, n, k)| {
                let t = Instant::now();
                let o = run_phyid(&tables[n], k, &subsets[a][k], &folds[k].validation, config, weights)?;
                Ok((o, t.elapsed().as_secs_f64()))
            })
            .collect::<Result<Vec<_>>>()
    })?;
    let wall = start.elapsed().as_secs_f64();

    let mut outcomes = outcomes.into_iter();
    let mut reports = Vec::new();
    for &a in &availability {
        for &n in &noise_levels {
            let mut cell = Vec::new();
            let mut busy = 0.0;
            for _ in 0..folds.len() {
                let (o, t) = outcomes.next().expect("one outcome per task");
                busy += t;
                cell.push(o);
            }
            let ctx = context(case, Model::Phyid, a, n, config, weights, options);
            let runtime = if tasks.len() == folds.len() { wall } else { busy };
            reports.push(build_report(&ctx, cell, None, runtime)?);
        }
    }
    Ok(reports)
}

/// Physics-informed and physics-ablated models side by side.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AblationReport {
    pub test_ids: Vec<String>,
    pub physics: EvalReport,
    pub ablated: EvalReport,
}

/// Trains both arms on the same hold-out split of the augmented data set.
pub fn run_ablation(events: &[ImpactEvent], config: &TrainConfig, weights: &LossWeights, options: &RunOptions) -> Result<AblationReport> {
    config.validate()?;
    weights.validate()?;
    options.validate()?;
    let case = CaseSpec::preset(CaseId::P1);
    let events = maybe_augment(&case, events, options, config.seed)?;
    let plan = make_splits(&events, options.ratio, 0, config.seed)?;
    let table = FeatureTable::new(&events)?;

    let start = Instant::now();
    let physics = run_phyid(&table, 0, &plan.train_ids, &plan.test_ids, config, weights)?;
    let physics_time = start.elapsed().as_secs_f64();
    let start = Instant::now();
    let ablated = run_baseline(&table, 0, &plan.train_ids, &plan.test_ids, config)?;
    let ablated_time = start.elapsed().as_secs_f64();

    let ctx = context(&case, Model::Phyid, 1.0, 0.0, config, weights, options);
    let physics = build_report(&ctx, vec![physics], None, physics_time)?;
    let ctx = context(&case, Model::Baseline, 1.0, 0.0, config, weights, options);
    let ablated = build_report(&ctx, vec![ablated], None, ablated_time)?;
    Ok(AblationReport {
        test_ids: plan.test_ids,
        physics,
        ablated,
    })
}

/// Scores an already trained predictor on labelled events.
pub fn evaluate(
    predictions: &[Prediction],
    events: &[ImpactEvent],
    config: &TrainConfig,
    weights: &LossWeights,
    options: &RunOptions,
) -> Result<EvalReport> {
    if predictions.len() != events.len() {
        return Err(Error::DimensionMismatch {
            what: "predictions",
            expected: events.len(),
            actual: predictions.len(),
        });
    }
    let outcome = FoldOutcome {
        fold: 0,
        n_train: 0,
        ids: events.iter().map(|e| e.event_id.clone()).collect(),
        truth: [
            events.iter().map(|e| e.v0_obs_mps).collect(),
            events.iter().map(|e| e.mass_obs_kg).collect(),
            events.iter().map(|e| e.energy_meas_j).collect(),
        ],
        pred: [
            Some(predictions.iter().map(|p| p.v0_mps).collect()),
            Some(predictions.iter().map(|p| p.mass_kg).collect()),
            Some(predictions.iter().map(|p| p.energy_j).collect()),
        ],
    };
    let case = CaseSpec::preset(CaseId::P1);
    let ctx = context(&case, Model::Phyid, 1.0, 0.0, config, weights, options);
    let mut report = build_report(&ctx, vec![outcome], None, 0.0)?;
    report.train_sizes.clear();
    Ok(report)
}

#[derive(Serialize)]
struct ParityRow<'a> {
    case_id: CaseId,
    model: Model,
    availability: f64,
    noise_level: f64,
    target: &'static str,
    fold: usize,
    event_id: &'a str,
    truth: f64,
    prediction: f64,
}

#[derive(Serialize)]
struct BinRow {
    case_id: CaseId,
    model: Model,
    availability: f64,
    noise_level: f64,
    bin_lo_j: f64,
    bin_hi_j: f64,
    count: usize,
    mape: Option<f64>,
}

fn csv_error(path: &Path, e: csv::Error) -> Error {
    Error::Malformed {
        context: path.display().to_string(),
        message: e.to_string(),
    }
}

/// Writes `reports.json`, `parity.csv` and `energy_bins.csv` into `dir`.
pub fn write_reports(dir: impl AsRef<Path>, reports: &[EvalReport]) -> Result<()> {
    let dir = dir.as_ref();
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let json_path = dir.join("reports.json");
    let json = serde_json::to_string_pretty(reports).map_err(|e| Error::json("reports", e))?;
    std::fs::write(&json_path, json + "\n").map_err(|e| Error::io(&json_path, e))?;

    let parity_path = dir.join("parity.csv");
    let mut w = csv::Writer::from_path(&parity_path).map_err(|e| csv_error(&parity_path, e))?;
    for r in reports {
        for (target, pairs) in [("velocity", &r.parity_velocity), ("mass", &r.parity_mass), ("energy", &r.parity_energy)] {
            for p in pairs {
                w.serialize(ParityRow {
                    case_id: r.case_id,
                    model: r.model,
                    availability: r.availability,
                    noise_level: r.noise_level,
                    target,
                    fold: p.fold,
                    event_id: &p.event_id,
                    truth: p.truth,
                    prediction: p.prediction,
                })
                .map_err(|e| csv_error(&parity_path, e))?;
            }
        }
    }
    w.flush().map_err(|e| Error::io(&parity_path, e))?;

    let bins_path = dir.join("energy_bins.csv");
    let mut w = csv::Writer::from_path(&bins_path).map_err(|e| csv_error(&bins_path, e))?;
    for r in reports {
        for b in &r.energy_bins {
            w.serialize(BinRow {
                case_id: r.case_id,
                model: r.model,
                availability: r.availability,
                noise_level: r.noise_level,
                bin_lo_j: b.lo_j,
                bin_hi_j: b.hi_j,
                count: b.count,
                mape: b.mape,
            })
            .map_err(|e| csv_error(&bins_path, e))?;
        }
    }
    w.flush().map_err(|e| Error::io(&bins_path, e))?;
    Ok(())
}
