use std::path::Path;
use std::process::Command;

fn phyid(args: &[&str], cwd: &Path) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_phyid")).args(args).current_dir(cwd).output().unwrap()
}

#[test]
fn generate_train_predict_and_error_record() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    std::fs::write(d.join("synth.json"), r#"{"n_events": 15, "duration_s": 0.002, "n_sensors": 2}"#).unwrap();
    std::fs::write(
        d.join("train.json"),
        r#"{"train": {"max_epochs_per_phase": 3, "max_cycles": 1, "disp_net": {"hidden_width": 4, "hidden_layers": 1, "activation": "tanh"}}}"#,
    )
    .unwrap();

    let out = phyid(&["generate", "--config", "synth.json", "--out", "data", "--seed", "3"], d);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(d.join("data/manifest.json").exists());

    let out = phyid(&["train", "--data", "data", "--out", "bundle", "--config", "train.json"], d);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    for f in ["disp_model.json", "mass_model.json", "config.json", "normalization.json", "loss_history.csv"] {
        assert!(d.join("bundle").join(f).exists(), "{f}");
    }
    let history = std::fs::read_to_string(d.join("bundle/loss_history.csv")).unwrap();
    assert!(history.starts_with("cycle,phase,epoch,total,part1,part2,part3"));

    let out = phyid(&["predict", "--bundle", "bundle", "--data", "data", "--out", "report.json"], d);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let report: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(d.join("report.json")).unwrap()).unwrap();
    assert_eq!(report["predictions"].as_array().unwrap().len(), 15);

    let out = phyid(&["sweep", "--case", "P1", "--data", "missing", "--out", "x"], d);
    assert!(!out.status.success());
    let err: serde_json::Value = serde_json::from_slice(&out.stderr).unwrap();
    assert_eq!(err["error"]["code"], "io");
    assert!(err["error"]["message"].as_str().unwrap().contains("missing"));

    let out = phyid(&["train", "--data", "data", "--out", "b2", "--config", "synth.json"], d);
    assert!(!out.status.success());
    let err: serde_json::Value = serde_json::from_slice(&out.stderr).unwrap();
    assert_eq!(err["error"]["code"], "json");
}
