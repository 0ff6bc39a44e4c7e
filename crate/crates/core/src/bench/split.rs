use std::collections::BTreeSet;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng;
use crate::signal::{base_id, ImpactEvent};

/// Train/validation partition of the training ids.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Fold {
    pub train: Vec<String>,
    pub validation: Vec<String>,
}

/// Identifiers are event ids. Events sharing a base id (an original and its
/// noisy copies) always land on the same side.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitPlan {
    pub train_ids: Vec<String>,
    pub test_ids: Vec<String>,
    pub folds: Vec<Fold>,
    pub seed: u64,
}

/// Shuffled base ids, deterministic per seed.
fn shuffled_groups(events: &[ImpactEvent], seed: u64) -> Vec<String> {
    let groups: BTreeSet<&str> = events.iter().map(|e| e.base_id()).collect();
    let mut groups: Vec<String> = groups.into_iter().map(String::from).collect();
    groups.shuffle(&mut rng::stream_rng(rng::derive_seed(seed, "split"), 0));
    groups
}

/// Event ids (in input order) whose base id is in `groups`.
fn members(events: &[ImpactEvent], groups: &[String]) -> Vec<String> {
    let set: BTreeSet<&str> = groups.iter().map(String::as_str).collect();
    events
        .iter()
        .filter(|e| set.contains(e.base_id()))
        .map(|e| e.event_id.clone())
        .collect()
}

/// Seeded group shuffle; the first `floor(G * ratio)` groups train, the rest
/// test. With `k_folds > 0` the training groups are further cut into `k`
/// contiguous validation blocks.
pub fn make_splits(events: &[ImpactEvent], ratio: f64, k_folds: usize, seed: u64) -> Result<SplitPlan> {
    if !(ratio > 0.0 && ratio < 1.0) {
        return Err(Error::InvalidArgument(format!("split ratio must be in (0, 1), got {ratio}")));
    }
    let groups = shuffled_groups(events, seed);
    let n_train = (groups.len() as f64 * ratio).floor() as usize;
    if n_train == 0 || n_train == groups.len() {
        return Err(Error::InvalidArgument(format!(
            "ratio {ratio} leaves an empty side for {} events",
            groups.len()
        )));
    }
    let (train_groups, test_groups) = groups.split_at(n_train);
    if k_folds == 1 || k_folds > train_groups.len() {
        return Err(Error::InvalidArgument(format!(
            "k_folds must be 0 or in 2..={}, got {k_folds}",
            train_groups.len()
        )));
    }
    let folds = (0..k_folds)
        .map(|k| {
            let (lo, hi) = block(train_groups.len(), k_folds, k);
            let rest: Vec<String> = train_groups[..lo].iter().chain(&train_groups[hi..]).cloned().collect();
            Fold {
                train: members(events, &rest),
                validation: members(events, &train_groups[lo..hi]),
            }
        })
        .collect();
    Ok(SplitPlan {
        train_ids: members(events, train_groups),
        test_ids: members(events, test_groups),
        folds,
        seed,
    })
}

/// Bounds of block `k` when `n` items are cut into `k_total` near-equal blocks.
fn block(n: usize, k_total: usize, k: usize) -> (usize, usize) {
    let base = n / k_total;
    let extra = n % k_total;
    let lo = k * base + k.min(extra);
    (lo, lo + base + usize::from(k < extra))
}

/// `k` outer folds covering every event exactly once as test. Fold 0 is the
/// `(k-1)/k` hold-out of `make_splits` with the same seed; the others are the
/// validation blocks of its training part.
pub fn cv_folds(events: &[ImpactEvent], k: usize, seed: u64) -> Result<Vec<Fold>> {
    if k < 2 {
        return Err(Error::InvalidArgument(format!("need at least 2 folds, got {k}")));
    }
    let ratio = (k - 1) as f64 / k as f64;
    let plan = make_splits(events, ratio, if k > 2 { k - 1 } else { 0 }, seed)?;
    let mut folds = vec![Fold {
        train: plan.train_ids.clone(),
        validation: plan.test_ids.clone(),
    }];
    if k == 2 {
        folds.push(Fold {
            train: plan.test_ids,
            validation: plan.train_ids,
        });
        return Ok(folds);
    }
    for f in &plan.folds {
        let held: BTreeSet<&str> = f.validation.iter().map(String::as_str).collect();
        folds.push(Fold {
            train: events
                .iter()
                .filter(|e| !held.contains(e.event_id.as_str()))
                .map(|e| e.event_id.clone())
                .collect(),
            validation: f.validation.clone(),
        });
    }
    Ok(folds)
}

/// Minimum number of training groups kept by `subsample`.
pub const MIN_TRAIN_GROUPS: usize = 5;

/// Keeps `ceil(fraction * G)` (at least 5) of the `G` groups in `train_ids`.
/// The choice is a seeded prefix, so smaller fractions are nested in larger ones.
pub fn subsample(train_ids: &[String], fraction: f64, seed: u64) -> Result<Vec<String>> {
    if !(fraction > 0.0 && fraction <= 1.0) {
        return Err(Error::InvalidArgument(format!("availability must be in (0, 1], got {fraction}")));
    }
    let groups: BTreeSet<&str> = train_ids.iter().map(|id| base_id(id)).collect();
    if groups.is_empty() {
        return Err(Error::Empty("training ids"));
    }
    let mut groups: Vec<&str> = groups.into_iter().collect();
    groups.shuffle(&mut rng::stream_rng(rng::derive_seed(seed, "availability"), 0));
    let keep = ((fraction * groups.len() as f64).ceil() as usize)
        .max(MIN_TRAIN_GROUPS)
        .min(groups.len());
    let kept: BTreeSet<&str> = groups[..keep].iter().copied().collect();
    Ok(train_ids.iter().filter(|id| kept.contains(base_id(id))).cloned().collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::signal::Waveform;

    fn events(n: usize) -> Vec<ImpactEvent> {
        (0..n)
            .map(|i| ImpactEvent {
                event_id: format!("e{i:03}"),
                waveforms: vec![Waveform::new(vec![0.0; 16], 1000.0, "S1").unwrap()],
                mass_obs_kg: 2.0,
                v0_obs_mps: 1.0,
                energy_meas_j: 1.0,
                damaged: false,
            })
            .collect()
    }

    #[test]
    fn split_73_is_58_15() {
        let ev = events(73);
        let plan = make_splits(&ev, 0.8, 5, 4).unwrap();
        assert_eq!(plan.train_ids.len(), 58);
        assert_eq!(plan.test_ids.len(), 15);
        assert_eq!(plan, make_splits(&ev, 0.8, 5, 4).unwrap());
        let mut covered: Vec<String> = plan.folds.iter().flat_map(|f| f.validation.clone()).collect();
        covered.sort();
        let mut train = plan.train_ids.clone();
        train.sort();
        assert_eq!(covered, train);
    }

    #[test]
    fn augmented_copies_stay_with_their_original() {
        let mut ev = events(20);
        let copies: Vec<ImpactEvent> = ev
            .iter()
            .map(|e| ImpactEvent {
                event_id: format!("{}{}", e.event_id, crate::signal::AUGMENT_SUFFIX),
                ..e.clone()
            })
            .collect();
        ev.extend(copies);
        let plan = make_splits(&ev, 0.8, 0, 1).unwrap();
        assert_eq!(plan.train_ids.len(), 32);
        for id in &plan.test_ids {
            assert!(!plan.train_ids.iter().any(|t| base_id(t) == base_id(id)));
        }
    }

    #[test]
    fn cv_fold_zero_matches_holdout() {
        let ev = events(73);
        let folds = cv_folds(&ev, 5, 2).unwrap();
        let plan = make_splits(&ev, 0.8, 0, 2).unwrap();
        assert_eq!(folds.len(), 5);
        assert_eq!(folds[0].validation, plan.test_ids);
        assert_eq!(folds[0].train, plan.train_ids);
        let mut all: Vec<String> = folds.iter().flat_map(|f| f.validation.clone()).collect();
        all.sort();
        assert_eq!(all.len(), 73);
        all.dedup();
        assert_eq!(all.len(), 73);
    }

    #[test]
    fn subsample_rounding_and_nesting() {
        let ids: Vec<String> = (0..58).map(|i| format!("e{i}")).collect();
        let quarter = subsample(&ids, 0.25, 3).unwrap();
        assert_eq!(quarter.len(), 15);
        let half = subsample(&ids, 0.5, 3).unwrap();
        assert!(quarter.iter().all(|q| half.contains(q)));
        assert_eq!(subsample(&ids, 1.0, 3).unwrap(), ids);
        let few: Vec<String> = (0..8).map(|i| format!("e{i}")).collect();
        assert_eq!(subsample(&few, 0.25, 3).unwrap().len(), 5);
        assert!(subsample(&ids, 0.0, 3).is_err());
    }

    #[test]
    fn degenerate_ratios_rejected() {
        let ev = events(3);
        assert!(make_splits(&ev, 0.1, 0, 0).is_err());
        assert!(make_splits(&ev, 1.0, 0, 0).is_err());
    }
}
