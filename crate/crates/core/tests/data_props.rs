use std::collections::BTreeSet;

use phyid::bench::{cv_folds, make_splits, subsample};
use phyid::signal::{self, add_noise, augment_dataset, base_id, load_events, write_dataset, ImpactEvent, Waveform};
use phyid::synth::{generate, verify_monotonicity, SynthConfig};
use proptest::prelude::*;

fn small_synth(n_events: usize, seed: u64) -> SynthConfig {
    SynthConfig {
        n_events,
        duration_s: 0.002,
        n_sensors: 2,
        seed,
        ..SynthConfig::default()
    }
}

fn dummy_events(n: usize) -> Vec<ImpactEvent> {
    (0..n)
        .map(|i| ImpactEvent {
            event_id: format!("ev{i:03}"),
            waveforms: vec![Waveform::new(vec![0.0; 8], 1000.0, "S1").unwrap()],
            mass_obs_kg: 2.0,
            v0_obs_mps: 1.0,
            energy_meas_j: 1.0,
            damaged: false,
        })
        .collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn synthetic_labels_are_exact_and_bounded(n in 5usize..30, seed in any::<u64>()) {
        let cfg = small_synth(n, seed);
        let events = generate(&cfg).unwrap();
        prop_assert_eq!(events.len(), n);
        for e in &events {
            prop_assert_eq!(e.energy_meas_j, 0.5 * e.mass_obs_kg * e.v0_obs_mps * e.v0_obs_mps);
            prop_assert_eq!(e.damaged, e.energy_meas_j > cfg.damage_threshold_j);
            prop_assert!(e.energy_meas_j >= cfg.energy_range_j.0 && e.energy_meas_j <= cfg.energy_range_j.1);
            for w in &e.waveforms {
                prop_assert!(w.samples.iter().all(|x| x.is_finite() && x.abs() <= cfg.amplitude_cap));
            }
            e.validate().unwrap();
        }
        prop_assert_eq!(generate(&cfg).unwrap(), events);
    }

    #[test]
    fn noise_preserves_shape_and_labels(seed in any::<u64>(), level in 0.0..0.05f64) {
        let events = generate(&small_synth(6, seed)).unwrap();
        let w = &events[0].waveforms[0];
        let noisy = add_noise(w, level, seed).unwrap();
        prop_assert_eq!(noisy.len(), w.len());
        prop_assert_eq!(noisy.sample_rate_hz, w.sample_rate_hz);
        prop_assert_eq!(&noisy.sensor_id, &w.sensor_id);
        prop_assert_eq!(add_noise(w, level, seed).unwrap(), noisy);

        let aug = augment_dataset(&events, level.max(1e-3), seed).unwrap();
        prop_assert_eq!(aug.len(), 2 * events.len());
        for (orig, copy) in events.iter().zip(&aug[events.len()..]) {
            prop_assert_eq!(base_id(&copy.event_id), orig.event_id.as_str());
            prop_assert_eq!(copy.mass_obs_kg, orig.mass_obs_kg);
            prop_assert_eq!(copy.v0_obs_mps, orig.v0_obs_mps);
            prop_assert_eq!(copy.energy_meas_j, orig.energy_meas_j);
        }
    }

    #[test]
    fn splits_partition_groups(n in 10usize..120, ratio in 0.5..0.9f64, k in 2usize..6, seed in any::<u64>(), augmented in any::<bool>()) {
        let base = dummy_events(n);
        let events = if augmented {
            let mut e = base.clone();
            e.extend(base.iter().map(|b| ImpactEvent { event_id: format!("{}{}", b.event_id, signal::AUGMENT_SUFFIX), ..b.clone() }));
            e
        } else {
            base
        };
        let plan = make_splits(&events, ratio, k, seed).unwrap();
        let train: BTreeSet<&str> = plan.train_ids.iter().map(|s| base_id(s)).collect();
        let test: BTreeSet<&str> = plan.test_ids.iter().map(|s| base_id(s)).collect();
        prop_assert!(train.is_disjoint(&test));
        prop_assert_eq!(train.len(), (n as f64 * ratio).floor() as usize);
        prop_assert_eq!(plan.train_ids.len() + plan.test_ids.len(), events.len());

        let mut covered: Vec<&String> = plan.folds.iter().flat_map(|f| &f.validation).collect();
        covered.sort();
        let mut sorted_train: Vec<&String> = plan.train_ids.iter().collect();
        sorted_train.sort();
        prop_assert_eq!(covered, sorted_train);
        for f in &plan.folds {
            let v: BTreeSet<&String> = f.validation.iter().collect();
            prop_assert!(f.train.iter().all(|t| !v.contains(t)));
            prop_assert_eq!(f.train.len() + f.validation.len(), plan.train_ids.len());
        }

        let outer = cv_folds(&events, k, seed).unwrap();
        let mut all: Vec<&String> = outer.iter().flat_map(|f| &f.validation).collect();
        all.sort();
        all.dedup();
        prop_assert_eq!(all.len(), events.len());
    }

    #[test]
    fn availability_subsets_nest(n in 5usize..80, seed in any::<u64>()) {
        let ids: Vec<String> = (0..n).map(|i| format!("ev{i}")).collect();
        let mut previous: Option<Vec<String>> = None;
        for f in [0.25, 0.5, 0.75, 1.0] {
            let s = subsample(&ids, f, seed).unwrap();
            prop_assert_eq!(s.len(), ((f * n as f64).ceil() as usize).max(5).min(n));
            if let Some(p) = &previous {
                prop_assert!(p.iter().all(|x| s.contains(x)));
            }
            previous = Some(s);
        }
    }
}

#[test]
fn default_dataset_matches_the_reference_statistics() {
    let events = generate(&SynthConfig::default()).unwrap();
    assert_eq!(events.len(), 73);
    let energies: Vec<f64> = events.iter().map(|e| e.energy_meas_j).collect();
    let lo = energies.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = energies.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    // Endpoints are pinned up to the ulp nudges that make E = m v^2 / 2 exact.
    assert!((lo - 3.74).abs() < 1e-12 && (hi - 80.95).abs() < 1e-12, "{lo} {hi}");
    assert!(lo >= 3.74 && hi <= 80.95);
    assert_eq!(augment_dataset(&events, 0.01, 0).unwrap().len(), 146);

    let report = verify_monotonicity(&events).unwrap();
    assert!(report.passed);
    assert_eq!(report.groups.len(), 3);
}

#[test]
fn monotonicity_negative_controls() {
    let mut events = generate(&SynthConfig::default()).unwrap();
    let mut energies: Vec<f64> = events.iter().map(|e| e.energy_meas_j).collect();
    energies.reverse();
    for (e, en) in events.iter_mut().zip(energies) {
        e.energy_meas_j = en;
    }
    assert!(verify_monotonicity(&events).is_err());

    let single = generate(&SynthConfig { masses_kg: vec![5.51], n_events: 12, ..SynthConfig::default() }).unwrap();
    assert_eq!(verify_monotonicity(&single).unwrap().groups.len(), 1);
}

#[test]
fn dataset_round_trips_through_disk() {
    let events = generate(&small_synth(8, 4)).unwrap();
    let dir = tempfile::tempdir().unwrap();
    write_dataset(dir.path(), &events).unwrap();
    let mut loaded = load_events(dir.path()).unwrap();
    loaded.sort_by(|a, b| a.event_id.cmp(&b.event_id));
    assert_eq!(loaded, events);
}

#[test]
fn noise_std_matches_level() {
    let n = 20_000;
    let w = Waveform::new((0..n).map(|i| (i as f64 * 0.01).sin()).collect(), 1000.0, "S1").unwrap();
    let noisy = add_noise(&w, 0.05, 3).unwrap();
    let d: Vec<f64> = noisy.samples.iter().zip(&w.samples).map(|(a, b)| a - b).collect();
    let mean = d.iter().sum::<f64>() / n as f64;
    let std = (d.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n as f64).sqrt();
    assert!((std - 0.05 * w.peak_abs()).abs() < 0.2 * 0.05);
}
