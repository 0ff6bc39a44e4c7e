//! Trained-model bundle: a directory holding both networks, the training
//! configuration, the normalization parameters and the loss history.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::bench::FeatureTable;
use crate::error::{Error, Result};
use crate::features::{self, Normalization, SENSOR_LAYOUT};
use crate::nn::Network;
use crate::pinn::{self, history_csv, LossWeights, Prediction, Predictor, TrainConfig, TrainState};
use crate::signal::ImpactEvent;

pub const DISP_MODEL_FILE: &str = "disp_model.json";
pub const MASS_MODEL_FILE: &str = "mass_model.json";
pub const CONFIG_FILE: &str = "config.json";
pub const NORMALIZATION_FILE: &str = "normalization.json";
pub const HISTORY_FILE: &str = "loss_history.csv";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BundleConfig {
    pub weights: LossWeights,
    pub train: TrainConfig,
    pub sensor_layout: String,
    pub feature_names: Vec<String>,
    pub n_train_events: usize,
}

#[derive(Clone, Debug)]
pub struct Bundle {
    pub predictor: Predictor,
    pub normalization: Normalization,
    pub config: BundleConfig,
    /// Loss history CSV; empty for a bundle that was never trained here.
    pub history_csv: String,
}

/// Trains on every event and packages the result.
pub fn train_bundle(events: &[ImpactEvent], config: &TrainConfig, weights: &LossWeights) -> Result<(Bundle, TrainState)> {
    let table = FeatureTable::new(events)?;
    let ids: Vec<String> = events.iter().map(|e| e.event_id.clone()).collect();
    let split = table.split(&ids, &[])?;
    let state = pinn::train(&split.train, config, weights)?;
    let bundle = Bundle {
        predictor: state.predictor(),
        config: BundleConfig {
            weights: *weights,
            train: config.clone(),
            sensor_layout: SENSOR_LAYOUT.to_string(),
            feature_names: split.normalization.names().map(String::from).collect(),
            n_train_events: events.len(),
        },
        normalization: split.normalization,
        history_csv: history_csv(&state.history),
    };
    Ok((bundle, state))
}

fn write(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

impl Bundle {
    pub fn save(&self, dir: impl AsRef<Path>) -> Result<()> {
        let dir = dir.as_ref();
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        write(&dir.join(DISP_MODEL_FILE), &(self.predictor.disp_net.to_json()? + "\n"))?;
        write(&dir.join(MASS_MODEL_FILE), &(self.predictor.mass_net.to_json()? + "\n"))?;
        let config = serde_json::to_string_pretty(&self.config).map_err(|e| Error::json("bundle config", e))?;
        write(&dir.join(CONFIG_FILE), &(config + "\n"))?;
        let norm = serde_json::to_string_pretty(&self.normalization).map_err(|e| Error::json("normalization", e))?;
        write(&dir.join(NORMALIZATION_FILE), &(norm + "\n"))?;
        write(&dir.join(HISTORY_FILE), &self.history_csv)
    }

    pub fn load(dir: impl AsRef<Path>) -> Result<Self> {
        let dir = dir.as_ref();
        let disp = Network::from_json(&read(&dir.join(DISP_MODEL_FILE))?)?;
        let mass = Network::from_json(&read(&dir.join(MASS_MODEL_FILE))?)?;
        let config: BundleConfig =
            serde_json::from_str(&read(&dir.join(CONFIG_FILE))?).map_err(|e| Error::json("bundle config", e))?;
        let normalization: Normalization = serde_json::from_str(&read(&dir.join(NORMALIZATION_FILE))?)
            .map_err(|e| Error::json("normalization", e))?;
        let history_csv = match fs::read_to_string(dir.join(HISTORY_FILE)) {
            Ok(s) => s,
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => String::new(),
            Err(e) => return Err(Error::io(dir.join(HISTORY_FILE), e)),
        };
        let predictor = Predictor::new(disp, mass)?;
        let names: Vec<&str> = normalization.names().collect();
        if predictor.n_features() != names.len() || names != config.feature_names {
            return Err(Error::Malformed {
                context: dir.display().to_string(),
                message: format!(
                    "networks expect {} features, normalization has {} and config lists {}",
                    predictor.n_features(),
                    names.len(),
                    config.feature_names.len()
                ),
            });
        }
        Ok(Bundle {
            predictor,
            normalization,
            config,
            history_csv,
        })
    }

    pub fn n_features(&self) -> usize {
        self.predictor.n_features()
    }

    /// Predicts from raw (unnormalized) feature values.
    pub fn predict_raw(&self, raw: &[f64]) -> Result<Prediction> {
        self.predictor.predict(&self.normalization.apply(raw)?)
    }

    pub fn predict_event(&self, event: &ImpactEvent) -> Result<Prediction> {
        let fv = features::extract(event)?;
        if fv.feature_names != self.config.feature_names {
            return Err(Error::InvalidEvent {
                event_id: event.event_id.clone(),
                field: "waveforms",
                message: format!(
                    "event yields {} features, bundle expects {}",
                    fv.feature_names.len(),
                    self.config.feature_names.len()
                ),
            });
        }
        self.predict_raw(&fv.values)
    }

    pub fn predict_events(&self, events: &[ImpactEvent]) -> Result<Vec<Prediction>> {
        events.iter().map(|e| self.predict_event(e)).collect()
    }
}
