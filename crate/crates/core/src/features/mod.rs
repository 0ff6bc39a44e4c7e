//! Energy indicators per sensor and the normalized feature matrix.
//!
//! Nine indicators are computed per waveform, in this fixed order:
//! RMS, TE, PA, EPR, PCR, WPF, PF, AME, AM. An event's feature vector is the
//! concatenation over its sensors, so `F = 9 * sensors`.

pub mod dwt;
mod spectrum;

pub use spectrum::{spectrum, Spectrum};

use std::fmt;

use serde::de::{MapAccess, Visitor};
use serde::ser::SerializeMap;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::signal::{ImpactEvent, Waveform};

pub const INDICATOR_NAMES: [&str; 9] = ["RMS", "TE", "PA", "EPR", "PCR", "WPF", "PF", "AME", "AM"];
pub const INDICATORS_PER_SENSOR: usize = INDICATOR_NAMES.len();

/// How per-sensor indicators are combined into one row.
pub const SENSOR_LAYOUT: &str = "concatenate";

/// Magnitudes within this relative distance of the maximum count as ties.
const PEAK_TIE_REL: f64 = 1e-9;

pub fn rms(w: &Waveform) -> f64 {
    (w.samples.iter().map(|x| x * x).sum::<f64>() / w.len() as f64).sqrt()
}

/// Discrete signal energy: sum of squares times the sample interval.
pub fn transmitted_energy(w: &Waveform) -> f64 {
    w.samples.iter().map(|x| x * x).sum::<f64>() * w.sample_interval()
}

pub fn peak_amplitude(w: &Waveform) -> f64 {
    w.peak_abs()
}

pub fn energy_peak_ratio(w: &Waveform) -> f64 {
    let pa = peak_amplitude(w);
    if pa == 0.0 {
        0.0
    } else {
        transmitted_energy(w) / (pa * pa)
    }
}

fn peak_frequency_of(s: &Spectrum) -> f64 {
    let max = s.magnitudes.iter().cloned().fold(0.0_f64, f64::max);
    let threshold = max * (1.0 - PEAK_TIE_REL);
    let k = s.magnitudes.iter().position(|&m| m >= threshold).unwrap_or(0);
    s.frequencies_hz[k]
}

fn centroid_of(s: &Spectrum) -> f64 {
    let total: f64 = s.magnitudes.iter().sum();
    if total == 0.0 {
        return 0.0;
    }
    s.frequencies_hz.iter().zip(&s.magnitudes).map(|(f, m)| f * m).sum::<f64>() / total
}

fn pcr_of(peak: f64, centroid: f64) -> f64 {
    if centroid == 0.0 {
        0.0
    } else {
        peak / centroid
    }
}

/// Frequency of the largest spectral bin; ties go to the lowest frequency.
pub fn peak_frequency(w: &Waveform) -> f64 {
    peak_frequency_of(&spectrum(w))
}

/// Magnitude-weighted mean frequency; 0 for a zero signal.
pub fn frequency_centroid(w: &Waveform) -> f64 {
    centroid_of(&spectrum(w))
}

pub fn peak_centroid_ratio(w: &Waveform) -> f64 {
    let s = spectrum(w);
    pcr_of(peak_frequency_of(&s), centroid_of(&s))
}

/// Geometric mean of peak frequency and centroid.
pub fn weighted_peak_frequency(w: &Waveform) -> f64 {
    let s = spectrum(w);
    (peak_frequency_of(&s) * centroid_of(&s)).sqrt()
}

/// Level-`levels` db4 approximation coefficients.
pub fn dwt_approximation(w: &Waveform, levels: usize) -> Result<Vec<f64>> {
    Ok(dwt::wavedec(&w.samples, levels)?.approximation)
}

pub fn approximation_max(w: &Waveform) -> Result<f64> {
    let a = dwt_approximation(w, dwt::DEFAULT_LEVEL)?;
    Ok(a.iter().fold(0.0_f64, |acc, c| acc.max(c.abs())))
}

pub fn approximation_max_energy(w: &Waveform) -> Result<f64> {
    let a = dwt_approximation(w, dwt::DEFAULT_LEVEL)?;
    Ok(a.iter().fold(0.0_f64, |acc, c| acc.max(c * c)))
}

/// The nine indicators of one waveform, sharing the spectrum and DWT work.
pub fn indicators(w: &Waveform) -> Result<[f64; INDICATORS_PER_SENSOR]> {
    let s = spectrum(w);
    let pf = peak_frequency_of(&s);
    let centroid = centroid_of(&s);
    let approx = dwt_approximation(w, dwt::DEFAULT_LEVEL)?;
    let am = approx.iter().fold(0.0_f64, |acc, c| acc.max(c.abs()));
    let ame = approx.iter().fold(0.0_f64, |acc, c| acc.max(c * c));
    Ok([
        rms(w),
        transmitted_energy(w),
        peak_amplitude(w),
        energy_peak_ratio(w),
        pcr_of(pf, centroid),
        (pf * centroid).sqrt(),
        pf,
        ame,
        am,
    ])
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FeatureVector {
    pub values: Vec<f64>,
    pub feature_names: Vec<String>,
}

pub fn feature_names(sensor_ids: &[&str]) -> Vec<String> {
    sensor_ids
        .iter()
        .flat_map(|s| INDICATOR_NAMES.iter().map(move |n| format!("{s}_{n}")))
        .collect()
}

pub fn extract(event: &ImpactEvent) -> Result<FeatureVector> {
    let mut values = Vec::with_capacity(INDICATORS_PER_SENSOR * event.waveforms.len());
    for w in &event.waveforms {
        let ind = indicators(w).map_err(|e| Error::InvalidEvent {
            event_id: event.event_id.clone(),
            field: "waveforms",
            message: e.to_string(),
        })?;
        values.extend_from_slice(&ind);
    }
    let ids: Vec<&str> = event.waveforms.iter().map(|w| w.sensor_id.as_str()).collect();
    Ok(FeatureVector {
        values,
        feature_names: feature_names(&ids),
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MinMax {
    pub min: f64,
    pub max: f64,
}

/// Per-column min-max parameters. Serialized as an ordered JSON object
/// `{feature_name: {min, max}}`.
#[derive(Clone, Debug, PartialEq)]
pub struct Normalization {
    pub columns: Vec<(String, MinMax)>,
}

impl Normalization {
    pub fn apply(&self, values: &[f64]) -> Result<Vec<f64>> {
        if values.len() != self.columns.len() {
            return Err(Error::DimensionMismatch {
                what: "feature vector",
                expected: self.columns.len(),
                actual: values.len(),
            });
        }
        Ok(values
            .iter()
            .zip(&self.columns)
            .map(|(x, (_, mm))| {
                if mm.max == mm.min {
                    0.5
                } else {
                    (x - mm.min) / (mm.max - mm.min)
                }
            })
            .collect())
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.columns.iter().map(|(n, _)| n.as_str())
    }
}

impl Serialize for Normalization {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        let mut map = serializer.serialize_map(Some(self.columns.len()))?;
        for (name, mm) in &self.columns {
            map.serialize_entry(name, mm)?;
        }
        map.end()
    }
}

impl<'de> Deserialize<'de> for Normalization {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        struct OrderedVisitor;
        impl<'de> Visitor<'de> for OrderedVisitor {
            type Value = Normalization;
            fn expecting(&self, f: &mut fmt::Formatter) -> fmt::Result {
                f.write_str("an object of feature_name -> {min, max}")
            }
            fn visit_map<A: MapAccess<'de>>(self, mut access: A) -> std::result::Result<Self::Value, A::Error> {
                let mut columns = Vec::new();
                while let Some((k, v)) = access.next_entry::<String, MinMax>()? {
                    columns.push((k, v));
                }
                Ok(Normalization { columns })
            }
        }
        deserializer.deserialize_map(OrderedVisitor)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct FeatureMatrix {
    pub rows: Vec<Vec<f64>>,
    pub event_ids: Vec<String>,
    pub feature_names: Vec<String>,
    pub normalization: Option<Normalization>,
}

impl FeatureMatrix {
    pub fn n_rows(&self) -> usize {
        self.rows.len()
    }

    pub fn n_features(&self) -> usize {
        self.feature_names.len()
    }

    pub fn row_of(&self, event_id: &str) -> Option<usize> {
        self.event_ids.iter().position(|id| id == event_id)
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("event_id");
        for n in &self.feature_names {
            out.push(',');
            out.push_str(n);
        }
        out.push('\n');
        for (id, row) in self.event_ids.iter().zip(&self.rows) {
            out.push_str(id);
            for v in row {
                out.push_str(&format!(",{v:.16e}"));
            }
            out.push('\n');
        }
        out
    }
}

/// Raw (unnormalized) matrix, one row per event in input order.
pub fn build_matrix(events: &[ImpactEvent]) -> Result<FeatureMatrix> {
    let first = events.first().ok_or(Error::Empty("event list"))?;
    let vectors = events.iter().map(extract).collect::<Result<Vec<_>>>()?;
    let feature_names = extract(first)?.feature_names;
    for (ev, v) in events.iter().zip(&vectors) {
        if v.values.len() != feature_names.len() {
            return Err(Error::InvalidEvent {
                event_id: ev.event_id.clone(),
                field: "waveforms",
                message: format!(
                    "sensor count differs from first event ({} vs {} features)",
                    v.values.len(),
                    feature_names.len()
                ),
            });
        }
    }
    Ok(FeatureMatrix {
        rows: vectors.into_iter().map(|v| v.values).collect(),
        event_ids: events.iter().map(|e| e.event_id.clone()).collect(),
        feature_names,
        normalization: None,
    })
}

/// Fits min-max parameters on `fit_rows` and applies them to every row.
/// Rows outside the fitted range are not clamped.
pub fn normalize(m: &FeatureMatrix, fit_rows: &[usize]) -> Result<FeatureMatrix> {
    if fit_rows.is_empty() {
        return Err(Error::Empty("normalization fit rows"));
    }
    if let Some(&bad) = fit_rows.iter().find(|&&r| r >= m.n_rows()) {
        return Err(Error::InvalidArgument(format!(
            "fit row {bad} out of range for {} rows",
            m.n_rows()
        )));
    }
    let columns = m
        .feature_names
        .iter()
        .enumerate()
        .map(|(j, name)| {
            let (min, max) = fit_rows.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &r| {
                let v = m.rows[r][j];
                (lo.min(v), hi.max(v))
            });
            (name.clone(), MinMax { min, max })
        })
        .collect();
    let normalization = Normalization { columns };
    let rows = m
        .rows
        .iter()
        .map(|r| normalization.apply(r))
        .collect::<Result<Vec<_>>>()?;
    Ok(FeatureMatrix {
        rows,
        event_ids: m.event_ids.clone(),
        feature_names: m.feature_names.clone(),
        normalization: Some(normalization),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn wave(samples: Vec<f64>, rate: f64) -> Waveform {
        Waveform::new(samples, rate, "s").unwrap()
    }

    fn tones(freqs: &[(f64, f64)], rate: f64, n: usize) -> Waveform {
        wave(
            (0..n)
                .map(|i| {
                    let t = i as f64 / rate;
                    freqs.iter().map(|(f, a)| a * (2.0 * PI * f * t).sin()).sum()
                })
                .collect(),
            rate,
        )
    }

    #[test]
    fn time_domain_indicators() {
        assert!((rms(&wave(vec![3.0; 10], 100.0)) - 3.0).abs() < 1e-12);
        let s = tones(&[(10.0, 1.0)], 1000.0, 1000);
        assert!((rms(&s) - 1.0 / 2f64.sqrt()).abs() < 1e-6);
        assert_eq!(transmitted_energy(&wave(vec![0.0; 10], 100.0)), 0.0);
        for rate in [10.0, 1000.0, 44_100.0] {
            let w = wave(vec![1.0; rate as usize], rate);
            assert!((transmitted_energy(&w) - 1.0).abs() < 1e-9);
            assert!((energy_peak_ratio(&w) - 1.0).abs() < 1e-9);
        }
        assert_eq!(peak_amplitude(&wave(vec![-5.0, 2.0], 1.0)), 5.0);
        assert_eq!(energy_peak_ratio(&wave(vec![0.0; 8], 1.0)), 0.0);
    }

    #[test]
    fn spectral_indicators() {
        let rate = 10_000.0;
        let n = 10_000;
        let one = tones(&[(100.0, 1.0)], rate, n);
        assert!((peak_frequency(&one) - 100.0).abs() <= 1.0);
        assert!((frequency_centroid(&one) - 100.0).abs() <= 1.0);
        assert!((peak_centroid_ratio(&one) - 1.0).abs() < 0.02);
        assert!((weighted_peak_frequency(&one) - 100.0).abs() <= 1.0);

        let two = tones(&[(100.0, 1.0), (300.0, 2.0)], rate, n);
        assert!((peak_frequency(&two) - 300.0).abs() <= 1.0);

        let tie = tones(&[(100.0, 1.0), (200.0, 1.0)], rate, n);
        assert_eq!(peak_frequency(&tie), 100.0);

        let eq = tones(&[(100.0, 1.0), (300.0, 1.0)], rate, n);
        assert!((frequency_centroid(&eq) - 200.0).abs() <= 1.0);
        // peak is 100 Hz by the tie rule here; the 300 Hz case needs the louder tone
        let pcr = peak_centroid_ratio(&tones(&[(100.0, 1.0), (300.0, 1.0 + 1e-6)], rate, n));
        assert!((pcr - 1.5).abs() < 0.02, "{pcr}");
        let wpf = weighted_peak_frequency(&tones(&[(100.0, 1.0), (300.0, 1.0 + 1e-6)], rate, n));
        assert!((wpf - (300.0f64 * 200.0).sqrt()).abs() <= 1.0, "{wpf}");

        let zero = wave(vec![0.0; 512], rate);
        assert_eq!(peak_frequency(&zero), 0.0);
        assert_eq!(frequency_centroid(&zero), 0.0);
        assert_eq!(peak_centroid_ratio(&zero), 0.0);
        assert_eq!(weighted_peak_frequency(&zero), 0.0);
    }

    #[test]
    fn wavelet_indicators() {
        let zero = wave(vec![0.0; 256], 1000.0);
        assert_eq!(approximation_max(&zero).unwrap(), 0.0);
        assert_eq!(approximation_max_energy(&zero).unwrap(), 0.0);
        let w = tones(&[(3.0, 1.0), (40.0, 0.3)], 1000.0, 500);
        let am = approximation_max(&w).unwrap();
        let ame = approximation_max_energy(&w).unwrap();
        assert!((ame - am * am).abs() <= 1e-12 * ame.max(1.0));
        assert!(dwt_approximation(&wave(vec![1.0; 10], 1.0), 4).is_err());
    }

    fn event(id: &str, waves: Vec<Waveform>) -> ImpactEvent {
        ImpactEvent {
            event_id: id.into(),
            waveforms: waves,
            mass_obs_kg: 2.0,
            v0_obs_mps: 2.0,
            energy_meas_j: 4.0,
            damaged: false,
        }
    }

    #[test]
    fn extract_layout() {
        let a = tones(&[(50.0, 1.0)], 2000.0, 400);
        let mut b = a.clone();
        b.sensor_id = "t".into();
        let fv = extract(&event("e", vec![a, b])).unwrap();
        assert_eq!(fv.values.len(), 18);
        assert_eq!(fv.values[..9], fv.values[9..]);
        assert_eq!(fv.feature_names[0], "s_RMS");
        assert_eq!(fv.feature_names[17], "t_AM");

        let z = extract(&event("z", vec![wave(vec![0.0; 256], 1000.0)])).unwrap();
        assert!(z.values.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn normalization_rules() {
        let m = FeatureMatrix {
            rows: vec![vec![1.0, 5.0, 2.0], vec![3.0, 5.0, 0.0], vec![7.0, 5.0, 1.0]],
            event_ids: vec!["a".into(), "b".into(), "c".into()],
            feature_names: vec!["x".into(), "c".into(), "y".into()],
            normalization: None,
        };
        let both = normalize(&m, &[0, 1]).unwrap();
        assert_eq!(both.rows[0], vec![0.0, 0.5, 1.0]);
        assert_eq!(both.rows[1], vec![1.0, 0.5, 0.0]);
        // row 2 lies outside the fitted range and stays unclamped
        assert_eq!(both.rows[2][0], 3.0);
        assert!(normalize(&m, &[]).is_err());
        assert!(build_matrix(&[]).is_err());

        let json = serde_json::to_string(both.normalization.as_ref().unwrap()).unwrap();
        assert!(json.starts_with("{\"x\":"));
        let back: Normalization = serde_json::from_str(&json).unwrap();
        assert_eq!(&back, both.normalization.as_ref().unwrap());
    }
}
