use phyid::features::{self, dwt, spectrum};
use phyid::signal::{ImpactEvent, Waveform};
use proptest::prelude::*;

const RATE: f64 = 10_000.0;

fn wave(samples: Vec<f64>) -> Waveform {
    Waveform::new(samples, RATE, "S1").unwrap()
}

fn signal() -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-10.0..10.0f64, 64..400)
}

fn scale() -> impl Strategy<Value = f64> {
    prop_oneof![0.01..100.0f64, -100.0..-0.01f64]
}

fn close(a: f64, b: f64, rel: f64) -> bool {
    (a - b).abs() <= rel * a.abs().max(b.abs()).max(1e-300)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn degree_one_homogeneity(x in signal(), a in scale()) {
        let w = wave(x.clone());
        let s = wave(x.iter().map(|v| a * v).collect());
        prop_assert!(close(features::rms(&s), a.abs() * features::rms(&w), 1e-12));
        prop_assert!(close(features::peak_amplitude(&s), a.abs() * features::peak_amplitude(&w), 1e-12));
        prop_assert!(close(
            features::approximation_max(&s).unwrap(),
            a.abs() * features::approximation_max(&w).unwrap(),
            1e-10
        ));
    }

    #[test]
    fn degree_two_homogeneity(x in signal(), a in scale()) {
        let w = wave(x.clone());
        let s = wave(x.iter().map(|v| a * v).collect());
        prop_assert!(close(features::transmitted_energy(&s), a * a * features::transmitted_energy(&w), 1e-12));
        prop_assert!(close(
            features::approximation_max_energy(&s).unwrap(),
            a * a * features::approximation_max_energy(&w).unwrap(),
            1e-10
        ));
    }

    #[test]
    fn degree_zero_homogeneity(x in signal(), a in scale()) {
        let w = wave(x.clone());
        let s = wave(x.iter().map(|v| a * v).collect());
        prop_assert!(close(features::energy_peak_ratio(&s), features::energy_peak_ratio(&w), 1e-10));
        prop_assert!(close(features::peak_centroid_ratio(&s), features::peak_centroid_ratio(&w), 1e-8));
    }

    #[test]
    fn sign_flip_and_ame_identity(x in signal()) {
        let w = wave(x.clone());
        let neg = wave(x.iter().map(|v| -v).collect());
        prop_assert_eq!(features::peak_amplitude(&neg), features::peak_amplitude(&w));
        let am = features::approximation_max(&w).unwrap();
        let ame = features::approximation_max_energy(&w).unwrap();
        prop_assert!((ame - am * am).abs() <= 1e-12 * ame.max(1.0));
    }

    #[test]
    fn te_is_additive_under_concatenation(x in signal(), y in signal()) {
        let joined: Vec<f64> = x.iter().chain(&y).copied().collect();
        let lhs = features::transmitted_energy(&wave(joined));
        let rhs = features::transmitted_energy(&wave(x)) + features::transmitted_energy(&wave(y));
        prop_assert!(close(lhs, rhs, 1e-12));
    }

    #[test]
    fn parseval(x in signal()) {
        let w = wave(x.clone());
        let mean = x.iter().sum::<f64>() / x.len() as f64;
        let time_power = x.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / x.len() as f64;
        let s = spectrum(&w);
        prop_assert!(close(s.mean_power(), time_power, 1e-6));
    }

    #[test]
    fn tone_peak_frequency(bin in 3usize..200, n in 512usize..1024, phase in 0.0..6.28f64) {
        let f = bin as f64 * RATE / n as f64;
        let x: Vec<f64> = (0..n).map(|i| (2.0 * std::f64::consts::PI * f * i as f64 / RATE + phase).sin()).collect();
        let w = wave(x);
        let resolution = RATE / n as f64;
        prop_assert!((features::peak_frequency(&w) - f).abs() <= resolution);
    }

    #[test]
    fn wavelet_perfect_reconstruction(x in prop::collection::vec(-10.0..10.0f64, 128..600), levels in 1usize..=4) {
        let dec = dwt::wavedec(&x, levels).unwrap();
        let back = dwt::waverec(&dec);
        prop_assert_eq!(back.len(), x.len());
        for (a, b) in back.iter().zip(&x) {
            prop_assert!((a - b).abs() < 1e-8);
        }
    }

    #[test]
    fn extraction_is_pure_and_finite(x in signal(), y in signal()) {
        let ev = ImpactEvent {
            event_id: "e".into(),
            waveforms: vec![wave(x), Waveform::new(y, RATE, "S2").unwrap()],
            mass_obs_kg: 2.0,
            v0_obs_mps: 2.0,
            energy_meas_j: 4.0,
            damaged: false,
        };
        let a = features::extract(&ev).unwrap();
        let b = features::extract(&ev).unwrap();
        prop_assert_eq!(a.values.len(), 18);
        prop_assert!(a.values.iter().all(|v| v.is_finite()));
        prop_assert_eq!(
            a.values.iter().map(|v| v.to_bits()).collect::<Vec<_>>(),
            b.values.iter().map(|v| v.to_bits()).collect::<Vec<_>>()
        );
    }

    #[test]
    fn normalize_fitted_rows_into_unit_interval(rows in prop::collection::vec(prop::collection::vec(-1e3..1e3f64, 5), 2..30)) {
        let m = features::FeatureMatrix {
            event_ids: (0..rows.len()).map(|i| format!("e{i}")).collect(),
            feature_names: (0..5).map(|j| format!("f{j}")).collect(),
            rows,
            normalization: None,
        };
        let all: Vec<usize> = (0..m.n_rows()).collect();
        let n = features::normalize(&m, &all).unwrap();
        for row in &n.rows {
            for &v in row {
                prop_assert!((0.0..=1.0).contains(&v));
            }
        }
    }
}

#[test]
fn constant_signal_has_no_detail_energy() {
    let dec = dwt::wavedec(&[3.0; 256], 4).unwrap();
    for (level, d) in dec.details.iter().enumerate() {
        // Boundary coefficients see the symmetric extension; interior ones vanish.
        let interior = &d[dwt::FILTER_LEN..d.len().saturating_sub(dwt::FILTER_LEN)];
        assert!(interior.iter().all(|c| c.abs() < 1e-10), "level {}", level + 1);
    }
}

#[test]
fn two_tone_spectral_ratios() {
    // Amplitudes 1 at 100 Hz and 2 at 400 Hz: centroid 300 Hz, peak 400 Hz.
    let n = 10_000;
    let x: Vec<f64> = (0..n)
        .map(|i| {
            let t = i as f64 / RATE;
            (2.0 * std::f64::consts::PI * 100.0 * t).sin() + 2.0 * (2.0 * std::f64::consts::PI * 400.0 * t).sin()
        })
        .collect();
    let w = wave(x);
    assert!((features::frequency_centroid(&w) - 300.0).abs() < 1.0);
    assert!((features::peak_centroid_ratio(&w) - 400.0 / 300.0).abs() < 1e-2);
    assert!((features::weighted_peak_frequency(&w) - (400.0f64 * 300.0).sqrt()).abs() < 1.0);
}
