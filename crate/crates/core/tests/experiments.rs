use std::path::PathBuf;

use mixlab::experiments::{
    emit_config, parse_config, run_and_write, run_experiment, ExperimentConfig, ExperimentKind,
};

fn scratch(name: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("mixlab-exp-{}-{name}", std::process::id()));
    let _ = std::fs::remove_dir_all(&dir);
    dir
}

fn small_protected() -> ExperimentConfig {
    let ExperimentConfig::ProtectedSeparation(mut c) = ExperimentKind::ProtectedSeparation.default_config() else {
        unreachable!()
    };
    c.d = 8;
    c.run.n_samples = 16;
    c.curve_samples = 4;
    c.grid.n_points = 40;
    ExperimentConfig::ProtectedSeparation(c)
}

#[test]
fn default_configs_round_trip_through_toml() {
    for kind in ExperimentKind::ALL {
        let config = kind.default_config();
        config.validate().unwrap();
        let text = emit_config(&config).unwrap();
        let back = parse_config(&text).unwrap();
        assert_eq!(back, config, "{}", kind.name());
        assert_eq!(emit_config(&back).unwrap(), text);
    }
}

#[test]
fn outputs_carry_seed_config_and_tables() {
    let config = small_protected();
    let out = scratch("outputs");
    let (output, dir) = run_and_write(&config, &out).unwrap();
    assert_eq!(dir, out.join("protected_separation"));
    let curves = std::fs::read_to_string(dir.join("curves.csv")).unwrap();
    assert!(curves.starts_with("size,series,sample_id,t,g"));
    let summary = std::fs::read_to_string(dir.join("summary.csv")).unwrap();
    assert_eq!(summary, output.summary.to_csv());
    let meta: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(dir.join("meta.json")).unwrap()).unwrap();
    assert_eq!(meta["seed"], config.run_params().seed);
    assert_eq!(meta["experiment"], "protected_separation");
    assert_eq!(parse_config(meta["config"].as_str().unwrap()).unwrap(), config);
    std::fs::remove_dir_all(&out).unwrap();
}

#[test]
fn results_do_not_depend_on_worker_count() {
    let mut one = small_protected();
    one.run_params_mut().workers = 1;
    let mut three = one.clone();
    three.run_params_mut().workers = 3;
    let a = run_experiment(&one).unwrap();
    let b = run_experiment(&three).unwrap();
    assert_eq!(a.summary.to_csv(), b.summary.to_csv());
    assert_eq!(a.curves.to_csv(), b.curves.to_csv());
}

#[test]
fn a_different_seed_changes_the_sample() {
    let a = run_experiment(&small_protected()).unwrap();
    let mut other = small_protected();
    other.run_params_mut().seed += 1;
    let b = run_experiment(&other).unwrap();
    assert_ne!(a.summary.to_csv(), b.summary.to_csv());
}

#[test]
fn davies_bundle_concentrates_with_size() {
    let output = run_experiment(&ExperimentKind::DaviesConcentration.default_config()).unwrap();
    let d = &output.derived;
    assert_eq!(d["std_strictly_decreasing"], true);
    assert_eq!(d["width_strictly_decreasing"], true);
    assert!(d["vertical_std_ratio_last_to_first"].as_f64().unwrap() < 0.5);
    let jensen = output.summary.reals("max_jensen_excess_se").unwrap();
    assert!(jensen.iter().all(|&z| z <= 3.0), "{jensen:?}");
}
