use phyid::bench::{
    self, grid_search, run_ablation, run_case, CaseId, CaseSpec, GridOptions, GridSpace, NetGrid, RunOptions, Surrogate,
};
use phyid::nn::Activation;
use phyid::pinn::{LossWeights, NetSpec, TrainConfig};
use phyid::signal::ImpactEvent;
use phyid::synth::{generate, SynthConfig};

fn events() -> Vec<ImpactEvent> {
    generate(&SynthConfig {
        n_events: 30,
        duration_s: 0.002,
        n_sensors: 2,
        seed: 7,
        ..SynthConfig::default()
    })
    .unwrap()
}

fn tiny() -> TrainConfig {
    TrainConfig {
        max_epochs_per_phase: 4,
        max_cycles: 1,
        patience: 4,
        lr_disp: 1e-3,
        seed: 2,
        disp_net: NetSpec { hidden_width: 6, hidden_layers: 1, activation: Activation::Tanh },
        mass_net: NetSpec { hidden_width: 4, hidden_layers: 1, activation: Activation::Softplus },
        ..TrainConfig::default()
    }
}

fn finite(r: &bench::EvalReport) -> bool {
    let m = [Some(r.energy), r.velocity, r.mass];
    m.iter().flatten().all(|t| t.mape.is_finite() && t.r_squared.is_finite() && t.tolerance_band_fraction.is_finite())
}

#[test]
fn r3_yields_24_complete_cells_with_a_shared_test_set() {
    let ev = events();
    let options = RunOptions { jobs: 2, ..RunOptions::default() };
    let reports = run_case(&CaseSpec::preset(CaseId::R3), &ev, &tiny(), &LossWeights::default(), &options).unwrap();
    assert_eq!(reports.len(), 24);
    let ids = |r: &bench::EvalReport| {
        let mut v: Vec<(usize, String)> = r.parity_energy.iter().map(|p| (p.fold, p.event_id.clone())).collect();
        v.sort();
        v
    };
    let first = ids(&reports[0]);
    assert_eq!(first.len(), ev.len());
    for r in &reports {
        assert!(finite(r));
        assert_eq!(ids(r), first);
        assert_eq!(r.n_test, ev.len());
        assert_eq!(r.parity_velocity.len(), r.n_test);
        assert_eq!(r.fold_energy_mape.len(), 5);
        assert!(r.provenance.starts_with("phyid "));
    }
    // Smaller availability never trains on more events.
    let full: usize = reports.iter().find(|r| r.availability == 1.0).unwrap().train_sizes.iter().sum();
    let quarter: usize = reports.iter().find(|r| r.availability == 0.25).unwrap().train_sizes.iter().sum();
    assert!(quarter < full);

    // Same seed, same jobs-independent result.
    let serial = run_case(&CaseSpec::preset(CaseId::R3), &ev, &tiny(), &LossWeights::default(), &RunOptions::default()).unwrap();
    for (a, b) in reports.iter().zip(&serial) {
        assert_eq!(a.parity_energy, b.parity_energy);
    }
}

#[test]
fn r1_full_availability_fold_zero_equals_unaugmented_holdout() {
    let ev = events();
    let w = LossWeights::default();
    let r1 = run_case(&CaseSpec::preset(CaseId::R1), &ev, &tiny(), &w, &RunOptions::default()).unwrap();
    let full = r1.iter().find(|r| r.availability == 1.0).unwrap();
    let p1 = CaseSpec { augment: false, ..CaseSpec::preset(CaseId::P1) };
    let holdout = &run_case(&p1, &ev, &tiny(), &w, &RunOptions::default()).unwrap()[0];
    let fold0: Vec<_> = full.parity_energy.iter().filter(|p| p.fold == 0).cloned().collect();
    assert_eq!(fold0, holdout.parity_energy);
}

#[test]
fn p1_g1_and_ablation_reports() {
    let ev = events();
    let w = LossWeights::default();
    let p1 = &run_case(&CaseSpec::preset(CaseId::P1), &ev, &tiny(), &w, &RunOptions::default()).unwrap()[0];
    assert_eq!(p1.n_test, 2 * (ev.len() - (ev.len() as f64 * 0.8).floor() as usize));
    assert!(finite(p1));
    assert_eq!(p1.energy_bins.iter().map(|b| b.count).sum::<usize>(), p1.n_test);

    let g1 = &run_case(&CaseSpec::preset(CaseId::G1), &ev, &tiny(), &w, &RunOptions::default()).unwrap()[0];
    let ood = g1.ood.as_ref().unwrap();
    assert_eq!(ood.n_low + ood.n_high, g1.n_test);
    assert!(g1.parity_energy.iter().all(|p| p.truth < 20.0 || p.truth > 80.0));

    let all = CaseSpec { train_energy_range_j: Some((0.0, 100.0)), ..CaseSpec::preset(CaseId::G1) };
    assert!(run_case(&all, &ev, &tiny(), &w, &RunOptions::default()).is_err());

    let ab = run_ablation(&ev, &tiny(), &w, &RunOptions::default()).unwrap();
    let ids = |r: &bench::EvalReport| r.parity_energy.iter().map(|p| p.event_id.clone()).collect::<Vec<_>>();
    assert_eq!(ids(&ab.physics), ids(&ab.ablated));
    assert_eq!(ids(&ab.physics), ab.test_ids);
    assert!(ab.ablated.velocity.is_none() && ab.physics.velocity.is_some());

    let dir = tempfile::tempdir().unwrap();
    bench::write_reports(dir.path(), &[ab.physics.clone(), ab.ablated.clone()]).unwrap();
    let json: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(dir.path().join("reports.json")).unwrap()).unwrap();
    assert_eq!(json.as_array().unwrap().len(), 2);
    let parity = std::fs::read_to_string(dir.path().join("parity.csv")).unwrap();
    assert!(parity.starts_with("case_id,model,availability,noise_level,target,fold,event_id,truth,prediction"));
    assert!(dir.path().join("energy_bins.csv").exists());
}

#[test]
fn grid_search_ranks_every_candidate() {
    let ev = events();
    let singleton = GridSpace {
        displacement: NetGrid { widths: vec![4], depths: vec![1], learning_rates: vec![1e-3], activations: vec![Activation::Tanh] },
        mass: NetGrid { widths: vec![], depths: vec![], learning_rates: vec![], activations: vec![] },
    };
    let opts = GridOptions { epoch_cap: 2, ..GridOptions::default() };
    let rows = grid_search(&singleton, &ev, &tiny(), &LossWeights::default(), &opts).unwrap();
    assert_eq!(rows.len(), 1);
    assert_eq!(rows[0].rank, 1);
    assert_eq!(rows[0].fold_r2.len(), 5);

    let two = GridSpace {
        displacement: NetGrid { widths: vec![3], depths: vec![1], learning_rates: vec![1e-3], activations: vec![Activation::Tanh, Activation::Sigmoid] },
        mass: NetGrid { widths: vec![3], depths: vec![1], learning_rates: vec![1e-3], activations: vec![Activation::Softplus] },
    };
    let rows = grid_search(&two, &ev, &tiny(), &LossWeights::default(), &opts).unwrap();
    let ranks: Vec<(Surrogate, usize)> = rows.iter().map(|r| (r.candidate.surrogate, r.rank)).collect();
    assert_eq!(ranks, vec![(Surrogate::Displacement, 1), (Surrogate::Displacement, 2), (Surrogate::Mass, 1)]);
    assert!(rows[0].mean_r2 >= rows[1].mean_r2);
    assert_eq!(GridSpace::default().candidates().len(), 108);
}
