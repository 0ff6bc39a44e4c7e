//! Multi-sensor impact waveforms, label validation, and noise augmentation.

mod dataset;

pub use dataset::{load_events, write_dataset, ManifestRecord, SensorEntry, MANIFEST_FILE};

use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng;

/// Relative tolerance for `|E - m v0^2 / 2| / E` on stored labels.
pub const LABEL_CONSISTENCY_TOL: f64 = 0.05;

/// Suffix appended to the ids of noise-perturbed copies.
pub const AUGMENT_SUFFIX: &str = "~noisy";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Waveform {
    pub samples: Vec<f64>,
    pub sample_rate_hz: f64,
    pub sensor_id: String,
}

impl Waveform {
    pub fn new(samples: Vec<f64>, sample_rate_hz: f64, sensor_id: impl Into<String>) -> Result<Self> {
        let w = Waveform {
            samples,
            sample_rate_hz,
            sensor_id: sensor_id.into(),
        };
        w.validate()?;
        Ok(w)
    }

    pub fn validate(&self) -> Result<()> {
        if self.samples.is_empty() {
            return Err(Error::InvalidArgument(format!(
                "waveform {} has no samples",
                self.sensor_id
            )));
        }
        if !(self.sample_rate_hz.is_finite() && self.sample_rate_hz > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "waveform {} has sample rate {}",
                self.sensor_id, self.sample_rate_hz
            )));
        }
        if let Some(i) = self.samples.iter().position(|x| !x.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "waveform {} has non-finite sample at index {i}",
                self.sensor_id
            )));
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn sample_interval(&self) -> f64 {
        1.0 / self.sample_rate_hz
    }

    pub fn peak_abs(&self) -> f64 {
        self.samples.iter().fold(0.0_f64, |acc, x| acc.max(x.abs()))
    }
}

/// One impact: per-sensor responses plus ground-truth labels.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ImpactEvent {
    pub event_id: String,
    pub waveforms: Vec<Waveform>,
    pub mass_obs_kg: f64,
    pub v0_obs_mps: f64,
    pub energy_meas_j: f64,
    pub damaged: bool,
}

impl ImpactEvent {
    pub fn validate(&self) -> Result<()> {
        let bad = |field: &'static str, message: String| Error::InvalidEvent {
            event_id: self.event_id.clone(),
            field,
            message,
        };
        if self.waveforms.is_empty() {
            return Err(bad("waveforms", "event has no sensor waveforms".into()));
        }
        for w in &self.waveforms {
            w.validate().map_err(|e| bad("waveforms", e.to_string()))?;
        }
        if !(self.mass_obs_kg.is_finite() && self.mass_obs_kg > 0.0) {
            return Err(bad("mass_kg", format!("must be > 0, got {}", self.mass_obs_kg)));
        }
        if !self.v0_obs_mps.is_finite() {
            return Err(bad("v0_mps", format!("must be finite, got {}", self.v0_obs_mps)));
        }
        if !(self.energy_meas_j.is_finite() && self.energy_meas_j > 0.0) {
            return Err(bad("energy_j", format!("must be > 0, got {}", self.energy_meas_j)));
        }
        let kinetic = 0.5 * self.mass_obs_kg * self.v0_obs_mps * self.v0_obs_mps;
        let rel = (self.energy_meas_j - kinetic).abs() / self.energy_meas_j;
        if rel > LABEL_CONSISTENCY_TOL {
            return Err(bad(
                "energy_j",
                format!(
                    "label inconsistency: E = {} but m v0^2 / 2 = {kinetic} (relative gap {rel:.4})",
                    self.energy_meas_j
                ),
            ));
        }
        Ok(())
    }

    /// Id of the clean event this one was derived from.
    pub fn base_id(&self) -> &str {
        base_id(&self.event_id)
    }
}

pub fn base_id(event_id: &str) -> &str {
    match event_id.find(AUGMENT_SUFFIX) {
        Some(i) => &event_id[..i],
        None => event_id,
    }
}

/// Adds zero-mean Gaussian noise with std `level_fraction * max|samples|`.
pub fn add_noise(w: &Waveform, level_fraction: f64, seed: u64) -> Result<Waveform> {
    add_noise_stream(w, level_fraction, seed, 0)
}

fn add_noise_stream(w: &Waveform, level_fraction: f64, seed: u64, stream: u64) -> Result<Waveform> {
    if !(level_fraction.is_finite() && level_fraction >= 0.0) {
        return Err(Error::InvalidArgument(format!(
            "noise level must be >= 0, got {level_fraction}"
        )));
    }
    let sigma = level_fraction * w.peak_abs();
    if sigma == 0.0 {
        return Ok(w.clone());
    }
    let normal = Normal::new(0.0, sigma)
        .map_err(|e| Error::InvalidArgument(format!("noise distribution: {e}")))?;
    let mut rng = rng::stream_rng(seed, stream);
    let samples = w.samples.iter().map(|x| x + normal.sample(&mut rng)).collect();
    Ok(Waveform {
        samples,
        sample_rate_hz: w.sample_rate_hz,
        sensor_id: w.sensor_id.clone(),
    })
}

/// Perturbs every sensor of an event. Sensor `k` uses stream `k`, and the seed
/// is mixed with the event id so no two events share a noise realisation.
pub fn add_noise_event(event: &ImpactEvent, level_fraction: f64, seed: u64) -> Result<ImpactEvent> {
    let event_seed = rng::derive_seed(seed, &event.event_id);
    let waveforms = event
        .waveforms
        .iter()
        .enumerate()
        .map(|(k, w)| add_noise_stream(w, level_fraction, event_seed, k as u64))
        .collect::<Result<Vec<_>>>()?;
    Ok(ImpactEvent {
        waveforms,
        ..event.clone()
    })
}

/// Originals followed by one noisy copy of each; labels are carried over untouched.
pub fn augment_dataset(events: &[ImpactEvent], level_fraction: f64, seed: u64) -> Result<Vec<ImpactEvent>> {
    if !(level_fraction > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "augmentation noise level must be > 0, got {level_fraction}"
        )));
    }
    let mut out = events.to_vec();
    for event in events {
        let mut noisy = add_noise_event(event, level_fraction, seed)?;
        noisy.event_id = format!("{}{AUGMENT_SUFFIX}", event.event_id);
        out.push(noisy);
    }
    Ok(out)
}
