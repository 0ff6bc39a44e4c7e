//! On-disk dataset: a JSON manifest plus one `time_s,value` CSV per sensor.

use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{ImpactEvent, Waveform};
use crate::error::{Error, Result};

pub const MANIFEST_FILE: &str = "manifest.json";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SensorEntry {
    pub sensor_id: String,
    pub file: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ManifestRecord {
    pub event_id: String,
    pub mass_kg: f64,
    pub v0_mps: f64,
    pub energy_j: f64,
    pub damaged: bool,
    pub sensors: Vec<SensorEntry>,
}

/// Loads every event listed in the manifest at `path` (a dataset directory or
/// the manifest file itself), validated and sorted by event id.
pub fn load_events(path: impl AsRef<Path>) -> Result<Vec<ImpactEvent>> {
    let path = path.as_ref();
    let (root, manifest_path) = if path.is_dir() {
        (path.to_path_buf(), path.join(MANIFEST_FILE))
    } else {
        let root = path.parent().map(Path::to_path_buf).unwrap_or_else(|| PathBuf::from("."));
        (root, path.to_path_buf())
    };
    let text = fs::read_to_string(&manifest_path).map_err(|e| Error::io(&manifest_path, e))?;
    let records: Vec<ManifestRecord> = serde_json::from_str(&text)
        .map_err(|e| Error::json(manifest_path.display().to_string(), e))?;

    let mut events = Vec::with_capacity(records.len());
    for rec in records {
        let mut waveforms = Vec::with_capacity(rec.sensors.len());
        for sensor in &rec.sensors {
            let file = root.join(&sensor.file);
            let w = read_waveform_csv(&file, &sensor.sensor_id).map_err(|e| match e {
                Error::Io { .. } => e,
                other => Error::InvalidEvent {
                    event_id: rec.event_id.clone(),
                    field: "sensors",
                    message: other.to_string(),
                },
            })?;
            waveforms.push(w);
        }
        let event = ImpactEvent {
            event_id: rec.event_id,
            waveforms,
            mass_obs_kg: rec.mass_kg,
            v0_obs_mps: rec.v0_mps,
            energy_meas_j: rec.energy_j,
            damaged: rec.damaged,
        };
        event.validate()?;
        events.push(event);
    }
    events.sort_by(|a, b| a.event_id.cmp(&b.event_id));
    for pair in events.windows(2) {
        if pair[0].event_id == pair[1].event_id {
            return Err(Error::InvalidEvent {
                event_id: pair[0].event_id.clone(),
                field: "event_id",
                message: "duplicate event id".into(),
            });
        }
    }
    Ok(events)
}

/// Writes events in the manifest + CSV layout under `dir`.
pub fn write_dataset(dir: impl AsRef<Path>, events: &[ImpactEvent]) -> Result<()> {
    let dir = dir.as_ref();
    let wave_dir = dir.join("waveforms");
    fs::create_dir_all(&wave_dir).map_err(|e| Error::io(&wave_dir, e))?;
    let mut records = Vec::with_capacity(events.len());
    for event in events {
        let mut sensors = Vec::with_capacity(event.waveforms.len());
        for w in &event.waveforms {
            let file = format!("waveforms/{}_{}.csv", sanitize(&event.event_id), sanitize(&w.sensor_id));
            write_waveform_csv(&dir.join(&file), w)?;
            sensors.push(SensorEntry {
                sensor_id: w.sensor_id.clone(),
                file,
            });
        }
        records.push(ManifestRecord {
            event_id: event.event_id.clone(),
            mass_kg: event.mass_obs_kg,
            v0_mps: event.v0_obs_mps,
            energy_j: event.energy_meas_j,
            damaged: event.damaged,
            sensors,
        });
    }
    let manifest = dir.join(MANIFEST_FILE);
    let text = serde_json::to_string_pretty(&records).map_err(|e| Error::json("manifest", e))?;
    fs::write(&manifest, text).map_err(|e| Error::io(&manifest, e))
}

fn sanitize(id: &str) -> String {
    id.chars()
        .map(|c| if c.is_ascii_alphanumeric() || c == '-' || c == '_' { c } else { '_' })
        .collect()
}

fn write_waveform_csv(path: &Path, w: &Waveform) -> Result<()> {
    let file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut out = BufWriter::new(file);
    let dt = w.sample_interval();
    let mut write = || -> std::io::Result<()> {
        writeln!(out, "time_s,value")?;
        for (i, x) in w.samples.iter().enumerate() {
            // 17 significant digits: lossless for f64.
            writeln!(out, "{:.16e},{:.16e}", i as f64 * dt, x)?;
        }
        out.flush()
    };
    write().map_err(|e| Error::io(path, e))
}

fn read_waveform_csv(path: &Path, sensor_id: &str) -> Result<Waveform> {
    let malformed = |message: String| Error::Malformed {
        context: path.display().to_string(),
        message,
    };
    let file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut reader = csv::ReaderBuilder::new().has_headers(true).from_reader(file);
    let headers = reader.headers().map_err(|e| malformed(e.to_string()))?.clone();
    if headers.len() != 2 || &headers[0] != "time_s" || &headers[1] != "value" {
        return Err(malformed(format!("expected header time_s,value, got {:?}", headers)));
    }
    let mut times = Vec::new();
    let mut samples = Vec::new();
    for (row, record) in reader.records().enumerate() {
        let record = record.map_err(|e| malformed(e.to_string()))?;
        let parse = |col: usize| -> Result<f64> {
            record
                .get(col)
                .ok_or_else(|| malformed(format!("row {row}: missing column {col}")))?
                .trim()
                .parse::<f64>()
                .map_err(|e| malformed(format!("row {row}: {e}")))
        };
        times.push(parse(0)?);
        samples.push(parse(1)?);
    }
    let rate = infer_sample_rate(&times).map_err(malformed)?;
    Waveform::new(samples, rate, sensor_id)
}

fn infer_sample_rate(times: &[f64]) -> std::result::Result<f64, String> {
    if times.len() < 2 {
        return Err("need at least two samples to infer the sample rate".into());
    }
    let n = times.len();
    let span = times[n - 1] - times[0];
    if !(span > 0.0) {
        return Err("time column must be strictly increasing".into());
    }
    let dt = span / (n - 1) as f64;
    for (i, t) in times.iter().enumerate() {
        let expected = times[0] + i as f64 * dt;
        if (t - expected).abs() > 1e-6 * dt {
            return Err(format!("non-uniform time step at row {i}"));
        }
    }
    let rate = 1.0 / dt;
    let rounded = rate.round();
    Ok(if (rate - rounded).abs() <= 1e-9 * rate { rounded } else { rate })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ev(id: &str, m: f64, v: f64) -> ImpactEvent {
        let w = |k: usize| {
            Waveform::new(
                (0..50).map(|i| ((i * (k + 1)) as f64 * 0.1).sin() * 1e-3).collect(),
                200_000.0,
                format!("PZT{}", k + 1),
            )
            .unwrap()
        };
        ImpactEvent {
            event_id: id.into(),
            waveforms: vec![w(0), w(1)],
            mass_obs_kg: m,
            v0_obs_mps: v,
            energy_meas_j: 0.5 * m * v * v,
            damaged: false,
        }
    }

    #[test]
    fn round_trip_two_events() {
        let dir = tempfile::tempdir().unwrap();
        let events = vec![ev("E002", 5.51, 2.0), ev("E001", 2.238, 3.3)];
        write_dataset(dir.path(), &events).unwrap();
        let loaded = load_events(dir.path()).unwrap();
        assert_eq!(loaded.len(), 2);
        assert_eq!(loaded[0], events[1]);
        assert_eq!(loaded[1], events[0]);
        let via_manifest = load_events(dir.path().join(MANIFEST_FILE)).unwrap();
        assert_eq!(via_manifest, loaded);
    }

    #[test]
    fn zero_mass_is_rejected_with_event_id() {
        let dir = tempfile::tempdir().unwrap();
        let mut bad = ev("E007", 2.0, 2.0);
        bad.mass_obs_kg = 0.0;
        write_dataset(dir.path(), &[ev("E001", 2.0, 2.0), bad]).unwrap();
        let err = load_events(dir.path()).unwrap_err();
        assert!(matches!(err, Error::InvalidEvent { ref event_id, field: "mass_kg", .. } if event_id == "E007"));
    }

    #[test]
    fn missing_manifest_and_malformed_csv() {
        let dir = tempfile::tempdir().unwrap();
        assert!(matches!(load_events(dir.path()), Err(Error::Io { .. })));
        write_dataset(dir.path(), &[ev("E001", 2.0, 2.0)]).unwrap();
        let csv_path = dir.path().join("waveforms/E001_PZT1.csv");
        fs::write(&csv_path, "time_s,value\n0.0,1.0\n0.1,abc\n").unwrap();
        let err = load_events(dir.path()).unwrap_err();
        assert!(matches!(err, Error::InvalidEvent { ref event_id, field: "sensors", .. } if event_id == "E001"), "{err}");
    }
}
