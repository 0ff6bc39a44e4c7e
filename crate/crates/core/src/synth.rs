//! Synthetic impact oracle with exact (mass, velocity, energy) labels.
//!
//! Each sensor sees a sum of damped modes driven by a half-sine contact force.
//! Force amplitude scales with `v0 * sqrt(m)` and contact duration with
//! `sqrt(m)`, so the transferred impulse is proportional to momentum and the
//! spectral envelope narrows for heavier impactors. Above the damage threshold
//! the response saturates softly and every mode shifts upward in frequency.

use std::f64::consts::PI;

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features;
use crate::rng;
use crate::signal::{ImpactEvent, Waveform};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SynthConfig {
    pub n_events: usize,
    pub masses_kg: Vec<f64>,
    pub energy_range_j: (f64, f64),
    pub sample_rate_hz: f64,
    pub duration_s: f64,
    pub n_sensors: usize,
    pub damage_threshold_j: f64,
    pub seed: u64,
    /// Hard bound on |sample|.
    pub amplitude_cap: f64,
    /// Contact duration of the reference mass.
    pub contact_duration_s: f64,
    pub reference_mass_kg: f64,
    /// Response level at which damaged events saturate.
    pub saturation_level: f64,
    /// Relative upward mode shift of damaged events.
    pub damage_frequency_shift: f64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            n_events: 73,
            masses_kg: vec![2.238, 2.356, 5.510],
            energy_range_j: (3.74, 80.95),
            sample_rate_hz: 200_000.0,
            duration_s: 0.01,
            n_sensors: 6,
            damage_threshold_j: 55.0,
            seed: 0,
            amplitude_cap: 10.0,
            contact_duration_s: 2.5e-4,
            reference_mass_kg: 2.238,
            saturation_level: 1.5,
            damage_frequency_shift: 0.10,
        }
    }
}

impl SynthConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidArgument(m));
        let (lo, hi) = self.energy_range_j;
        if !(lo > 0.0 && hi > lo && hi.is_finite()) {
            return bad(format!("energy range must be positive and ordered, got ({lo}, {hi})"));
        }
        if self.masses_kg.is_empty() || self.masses_kg.iter().any(|m| !(m.is_finite() && *m > 0.0)) {
            return bad(format!("masses must be non-empty and positive: {:?}", self.masses_kg));
        }
        if self.n_events == 0 || self.n_sensors == 0 {
            return bad("n_events and n_sensors must be >= 1".into());
        }
        let positive = [
            ("sample_rate_hz", self.sample_rate_hz),
            ("duration_s", self.duration_s),
            ("amplitude_cap", self.amplitude_cap),
            ("contact_duration_s", self.contact_duration_s),
            ("reference_mass_kg", self.reference_mass_kg),
            ("saturation_level", self.saturation_level),
        ];
        for (name, v) in positive {
            if !(v.is_finite() && v > 0.0) {
                return bad(format!("{name} must be > 0, got {v}"));
            }
        }
        if !(self.damage_threshold_j.is_finite() && self.damage_frequency_shift.is_finite()) {
            return bad("damage parameters must be finite".into());
        }
        if self.n_samples() < 64 {
            return bad(format!("need at least 64 samples per waveform, got {}", self.n_samples()));
        }
        Ok(())
    }

    pub fn n_samples(&self) -> usize {
        (self.sample_rate_hz * self.duration_s).round() as usize
    }
}

#[derive(Clone, Debug)]
struct Mode {
    frequency_hz: f64,
    damping_ratio: f64,
    gain: f64,
}

#[derive(Clone, Debug)]
struct SensorModel {
    id: String,
    modes: Vec<Mode>,
    attenuation: f64,
    delay_s: f64,
}

const WAVE_SPEED_MPS: f64 = 2000.0;
/// Brings the peak response of the reference mass at ~80 J to order one.
const FORCE_GAIN: f64 = 800.0;

fn sensor_models(config: &SynthConfig) -> Vec<SensorModel> {
    let mut rng = rng::stream_rng(rng::derive_seed(config.seed, "sensors"), 0);
    (0..config.n_sensors)
        .map(|s| {
            let n_modes = rng.gen_range(3..=5);
            let mut modes: Vec<Mode> = (0..n_modes)
                .map(|_| Mode {
                    frequency_hz: rng.gen_range(1_000.0..12_000.0),
                    damping_ratio: rng.gen_range(0.01..0.05),
                    gain: rng.gen_range(0.5..1.5),
                })
                .collect();
            modes.sort_by(|a, b| a.frequency_hz.total_cmp(&b.frequency_hz));
            let distance_m: f64 = rng.gen_range(0.1..0.5);
            SensorModel {
                id: format!("S{}", s + 1),
                modes,
                attenuation: 1.0 / (1.0 + distance_m / 0.1),
                delay_s: distance_m / WAVE_SPEED_MPS,
            }
        })
        .collect()
}

/// Energies stratified over the range with both endpoints included, in random order.
fn draw_energies(config: &SynthConfig, rng: &mut impl Rng) -> Vec<f64> {
    let (lo, hi) = config.energy_range_j;
    let n = config.n_events;
    let mut energies: Vec<f64> = (0..n)
        .map(|i| {
            if n == 1 {
                return rng.gen_range(lo..=hi);
            }
            if i == 0 {
                return lo;
            }
            if i == n - 1 {
                return hi;
            }
            let width = (hi - lo) / (n - 2) as f64;
            lo + width * (i as f64 - 1.0 + rng.gen::<f64>())
        })
        .collect();
    energies.shuffle(rng);
    energies
}

/// Equal share of each mass, in random order.
fn draw_masses(config: &SynthConfig, rng: &mut impl Rng) -> Vec<f64> {
    let k = config.masses_kg.len();
    let mut masses: Vec<f64> = (0..config.n_events).map(|i| config.masses_kg[i % k]).collect();
    masses.shuffle(rng);
    masses
}

/// Velocity whose kinetic energy stays inside `[lo, hi]` despite rounding.
fn velocity_for(energy: f64, mass: f64, lo: f64, hi: f64) -> (f64, f64) {
    let mut v = (2.0 * energy / mass).sqrt();
    let ke = |v: f64| 0.5 * mass * v * v;
    while ke(v) > hi {
        v = f64::from_bits(v.to_bits() - 1);
    }
    while ke(v) < lo {
        v = f64::from_bits(v.to_bits() + 1);
    }
    (v, ke(v))
}

fn half_sine(duration_s: f64, amplitude: f64, dt: f64) -> Vec<f64> {
    let n = (duration_s / dt).ceil() as usize;
    (0..n)
        .map(|i| amplitude * (PI * i as f64 * dt / duration_s).sin())
        .collect()
}

fn impulse_response(sensor: &SensorModel, frequency_scale: f64, n: usize, dt: f64) -> Vec<f64> {
    let mut h = vec![0.0; n];
    for mode in &sensor.modes {
        let wn = 2.0 * PI * mode.frequency_hz * frequency_scale;
        let wd = wn * (1.0 - mode.damping_ratio * mode.damping_ratio).sqrt();
        let decay = mode.damping_ratio * wn;
        for (i, hi) in h.iter_mut().enumerate() {
            let t = i as f64 * dt;
            *hi += mode.gain * (-decay * t).exp() * (wd * t).sin();
        }
    }
    h
}

fn sensor_response(
    sensor: &SensorModel,
    force: &[f64],
    damaged: bool,
    config: &SynthConfig,
) -> Vec<f64> {
    let n = config.n_samples();
    let dt = 1.0 / config.sample_rate_hz;
    let shift = if damaged { 1.0 + config.damage_frequency_shift } else { 1.0 };
    let h = impulse_response(sensor, shift, n, dt);
    let delay = (sensor.delay_s / dt).round() as usize;
    let mut y = vec![0.0; n];
    for (j, f) in force.iter().enumerate() {
        let start = delay + j;
        if start >= n {
            break;
        }
        for (yi, hi) in y[start..].iter_mut().zip(&h) {
            *yi += f * hi * dt * sensor.attenuation;
        }
    }
    let sat = config.saturation_level;
    let cap = config.amplitude_cap;
    for yi in &mut y {
        if damaged {
            *yi = sat * (*yi / sat).tanh();
        }
        *yi = yi.clamp(-cap, cap);
    }
    y
}

fn synthesize(
    event_id: String,
    mass: f64,
    v0: f64,
    energy: f64,
    sensors: &[SensorModel],
    config: &SynthConfig,
) -> Result<ImpactEvent> {
    let damaged = energy > config.damage_threshold_j;
    let dt = 1.0 / config.sample_rate_hz;
    let ratio = (mass / config.reference_mass_kg).sqrt();
    let contact = config.contact_duration_s * ratio;
    let force = half_sine(contact, FORCE_GAIN * v0 * mass.sqrt(), dt);
    let waveforms = sensors
        .iter()
        .map(|s| Waveform::new(sensor_response(s, &force, damaged, config), config.sample_rate_hz, s.id.clone()))
        .collect::<Result<Vec<_>>>()?;
    let event = ImpactEvent {
        event_id,
        waveforms,
        mass_obs_kg: mass,
        v0_obs_mps: v0,
        energy_meas_j: energy,
        damaged,
    };
    event.validate()?;
    Ok(event)
}

/// Generates `config.n_events` labelled events. Deterministic per seed.
pub fn generate(config: &SynthConfig) -> Result<Vec<ImpactEvent>> {
    config.validate()?;
    let sensors = sensor_models(config);
    let mut rng = rng::stream_rng(rng::derive_seed(config.seed, "labels"), 0);
    let energies = draw_energies(config, &mut rng);
    let masses = draw_masses(config, &mut rng);
    let (lo, hi) = config.energy_range_j;
    let width = config.n_events.saturating_sub(1).to_string().len().max(3);
    energies
        .iter()
        .zip(&masses)
        .enumerate()
        .map(|(i, (&e, &m))| {
            let (v0, energy) = velocity_for(e, m, lo, hi);
            synthesize(format!("impact_{i:0width$}"), m, v0, energy, &sensors, config)
        })
        .collect()
}

/// Events needed per mass group for a rank correlation to mean anything.
pub const MIN_GROUP_SIZE: usize = 5;
pub const MONOTONICITY_THRESHOLD: f64 = 0.95;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GroupCheck {
    pub mass_kg: f64,
    pub n_events: usize,
    pub spearman_pa: f64,
    pub spearman_te: f64,
    pub passed: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MonotonicityReport {
    pub groups: Vec<GroupCheck>,
    pub passed: bool,
}

fn ranks(x: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..x.len()).collect();
    order.sort_by(|&a, &b| x[a].total_cmp(&x[b]));
    let mut r = vec![0.0; x.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && x[order[j + 1]] == x[order[i]] {
            j += 1;
        }
        let avg = (i + j) as f64 / 2.0 + 1.0;
        for &k in &order[i..=j] {
            r[k] = avg;
        }
        i = j + 1;
    }
    r
}

/// Spearman rank correlation with average ranks for ties.
pub fn spearman(x: &[f64], y: &[f64]) -> Result<f64> {
    if x.len() != y.len() {
        return Err(Error::DimensionMismatch {
            what: "spearman inputs",
            expected: x.len(),
            actual: y.len(),
        });
    }
    if x.len() < 2 {
        return Err(Error::InvalidArgument("spearman needs at least 2 points".into()));
    }
    let (rx, ry) = (ranks(x), ranks(y));
    let n = x.len() as f64;
    let mean = (n + 1.0) / 2.0;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in rx.iter().zip(&ry) {
        sxy += (a - mean) * (b - mean);
        sxx += (a - mean) * (a - mean);
        syy += (b - mean) * (b - mean);
    }
    if sxx == 0.0 || syy == 0.0 {
        return Ok(0.0);
    }
    Ok(sxy / (sxx * syy).sqrt())
}

/// Checks that peak amplitude and transmitted energy (summed over sensors)
/// rise with impact energy inside every mass group of pristine events.
/// Returns `Error::Monotonicity` when a group fails.
pub fn verify_monotonicity(events: &[ImpactEvent]) -> Result<MonotonicityReport> {
    let mut groups: Vec<(f64, Vec<&ImpactEvent>)> = Vec::new();
    for e in events.iter().filter(|e| !e.damaged) {
        match groups.iter_mut().find(|(m, _)| *m == e.mass_obs_kg) {
            Some((_, g)) => g.push(e),
            None => groups.push((e.mass_obs_kg, vec![e])),
        }
    }
    if groups.is_empty() {
        return Err(Error::Empty("pristine events"));
    }
    groups.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut checks = Vec::new();
    for (mass, group) in &groups {
        if group.len() < MIN_GROUP_SIZE {
            return Err(Error::Monotonicity(format!(
                "mass group {mass} kg has {} pristine events, need at least {MIN_GROUP_SIZE}",
                group.len()
            )));
        }
        let energy: Vec<f64> = group.iter().map(|e| e.energy_meas_j).collect();
        let pa: Vec<f64> = group
            .iter()
            .map(|e| e.waveforms.iter().map(features::peak_amplitude).sum())
            .collect();
        let te: Vec<f64> = group
            .iter()
            .map(|e| e.waveforms.iter().map(features::transmitted_energy).sum())
            .collect();
        let spearman_pa = spearman(&energy, &pa)?;
        let spearman_te = spearman(&energy, &te)?;
        checks.push(GroupCheck {
            mass_kg: *mass,
            n_events: group.len(),
            spearman_pa,
            spearman_te,
            passed: spearman_pa > MONOTONICITY_THRESHOLD && spearman_te > MONOTONICITY_THRESHOLD,
        });
    }
    let report = MonotonicityReport {
        passed: checks.iter().all(|c| c.passed),
        groups: checks,
    };
    if !report.passed {
        let failed: Vec<String> = report
            .groups
            .iter()
            .filter(|c| !c.passed)
            .map(|c| format!("{} kg (PA {:.3}, TE {:.3})", c.mass_kg, c.spearman_pa, c.spearman_te))
            .collect();
        return Err(Error::Monotonicity(format!(
            "features do not increase with energy in: {}",
            failed.join(", ")
        )));
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> SynthConfig {
        SynthConfig {
            n_events: 24,
            duration_s: 0.004,
            ..SynthConfig::default()
        }
    }

    #[test]
    fn defaults_give_73_events_in_range() {
        let events = generate(&SynthConfig::default()).unwrap();
        assert_eq!(events.len(), 73);
        for e in &events {
            assert!(e.energy_meas_j >= 3.74 && e.energy_meas_j <= 80.95, "{}", e.energy_meas_j);
            assert_eq!(e.energy_meas_j, 0.5 * e.mass_obs_kg * e.v0_obs_mps * e.v0_obs_mps);
            assert_eq!(e.damaged, e.energy_meas_j > 55.0);
            assert_eq!(e.waveforms.len(), 6);
            assert!(e.waveforms.iter().all(|w| w.samples.iter().all(|x| x.is_finite() && x.abs() <= 10.0)));
        }
        assert!(events.iter().any(|e| e.energy_meas_j > 80.0));
        assert!(events.iter().any(|e| e.damaged));
    }

    #[test]
    fn deterministic_per_seed() {
        assert_eq!(generate(&small()).unwrap(), generate(&small()).unwrap());
        let other = SynthConfig { seed: 9, ..small() };
        assert_ne!(generate(&small()).unwrap(), generate(&other).unwrap());
    }

    #[test]
    fn equal_labels_give_equal_waveforms() {
        let c = small();
        let sensors = sensor_models(&c);
        let a = synthesize("a".into(), 2.356, 3.0, 0.5 * 2.356 * 9.0, &sensors, &c).unwrap();
        let b = synthesize("b".into(), 2.356, 3.0, 0.5 * 2.356 * 9.0, &sensors, &c).unwrap();
        assert_eq!(a.waveforms, b.waveforms);
    }

    #[test]
    fn invalid_configs_rejected() {
        for c in [
            SynthConfig { energy_range_j: (5.0, 1.0), ..small() },
            SynthConfig { energy_range_j: (0.0, 1.0), ..small() },
            SynthConfig { masses_kg: vec![1.0, -2.0], ..small() },
            SynthConfig { masses_kg: vec![], ..small() },
            SynthConfig { n_sensors: 0, ..small() },
        ] {
            assert!(generate(&c).is_err());
        }
    }

    #[test]
    fn cap_bounds_samples() {
        let c = SynthConfig { amplitude_cap: 0.05, ..small() };
        for e in generate(&c).unwrap() {
            assert!(e.waveforms.iter().all(|w| w.peak_abs() <= 0.05));
        }
    }

    #[test]
    fn monotonicity_passes_on_defaults_and_fails_on_shuffled_labels() {
        let events = generate(&SynthConfig::default()).unwrap();
        let report = verify_monotonicity(&events).unwrap();
        assert_eq!(report.groups.len(), 3);

        let mut shuffled = events.clone();
        let mut energies: Vec<f64> = shuffled.iter().map(|e| e.energy_meas_j).collect();
        energies.shuffle(&mut rng::stream_rng(3, 0));
        for (e, en) in shuffled.iter_mut().zip(energies) {
            e.energy_meas_j = en;
        }
        assert!(matches!(verify_monotonicity(&shuffled), Err(Error::Monotonicity(_))));
    }

    #[test]
    fn single_mass_has_one_group() {
        let c = SynthConfig {
            masses_kg: vec![3.0],
            n_events: 12,
            duration_s: 0.004,
            ..SynthConfig::default()
        };
        let report = verify_monotonicity(&generate(&c).unwrap()).unwrap();
        assert_eq!(report.groups.len(), 1);
    }

    #[test]
    fn spearman_known_values() {
        assert!((spearman(&[1.0, 2.0, 3.0], &[10.0, 20.0, 30.0]).unwrap() - 1.0).abs() < 1e-15);
        assert!((spearman(&[1.0, 2.0, 3.0], &[3.0, 2.0, 1.0]).unwrap() + 1.0).abs() < 1e-15);
        // ranks y = [1, 2.5, 2.5]: rho = 1.5 / sqrt(2 * 1.5)
        let r = spearman(&[1.0, 2.0, 3.0], &[0.0, 5.0, 5.0]).unwrap();
        assert!((r - 1.5 / 3.0f64.sqrt()).abs() < 1e-12);
    }
}
