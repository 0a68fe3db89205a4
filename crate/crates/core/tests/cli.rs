//! Experiment-harness integration tests: determinism of artifacts, the
//! resolved-config round trip, and the experiment catalog.

use seqhom::experiments::{list_experiments, run_experiment, ExperimentConfig};

fn run_into(config: &ExperimentConfig, dir: &std::path::Path) -> i32 {
    run_experiment(config, dir).unwrap()
}

#[test]
fn catalog_contains_required_experiments() {
    let names: Vec<&str> = list_experiments().iter().map(|(n, _)| *n).collect();
    assert!(names.contains(&"pendulum-flow"));
    assert!(names.contains(&"elliptic"));
    assert!(names.len() >= 5, "catalog too small: {names:?}");
}

#[test]
fn identical_config_gives_identical_csv() {
    let tmp = tempfile::tempdir().unwrap();
    let mut config = ExperimentConfig::default();
    config.experiment = "pendulum-euler".into();
    config.euler.dt_list = vec![10.0, 100.0];
    config.euler.n_steps = 4;

    let dir_a = tmp.path().join("a");
    let dir_b = tmp.path().join("b");
    assert_eq!(run_into(&config, &dir_a), 0);
    assert_eq!(run_into(&config, &dir_b), 0);
    let a = std::fs::read(dir_a.join("rates.csv")).unwrap();
    let b = std::fs::read(dir_b.join("rates.csv")).unwrap();
    assert_eq!(a, b, "rates.csv must be byte-identical across reruns");
}

#[test]
fn resolved_config_roundtrip_reproduces_run() {
    let tmp = tempfile::tempdir().unwrap();
    let mut config = ExperimentConfig::default();
    config.experiment = "qp-schur".into();
    config.qp.n_instances = 12;
    config.seed = 4242;

    let dir_a = tmp.path().join("a");
    assert_eq!(run_into(&config, &dir_a), 0);

    let resolved = std::fs::read_to_string(dir_a.join("resolved_config.json")).unwrap();
    let config_b = ExperimentConfig::from_json(&resolved).unwrap();
    let dir_b = tmp.path().join("b");
    assert_eq!(run_into(&config_b, &dir_b), 0);

    let a = std::fs::read(dir_a.join("deviations.csv")).unwrap();
    let b = std::fs::read(dir_b.join("deviations.csv")).unwrap();
    assert_eq!(a, b, "resolved config must reproduce the run byte-for-byte");
}

#[test]
fn pendulum_flow_artifacts() {
    let tmp = tempfile::tempdir().unwrap();
    let mut config = ExperimentConfig::default();
    config.experiment = "pendulum-flow".into();
    config.flow.t_final = 2.0;
    config.flow.record_every = 100;

    assert_eq!(run_into(&config, tmp.path()), 0);
    for rho in [1.0, 10.0] {
        let text = std::fs::read_to_string(tmp.path().join(format!("flow_rho{rho}.csv"))).unwrap();
        let header = text.lines().next().unwrap();
        assert_eq!(header, "t,x0,x1,y0,L_rho,norm_c,stat_res,slack_L,slack_c");
        assert!(text.lines().count() > 2);
    }
    let summary: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(tmp.path().join("summary.json")).unwrap())
            .unwrap();
    assert_eq!(summary["experiment"], "pendulum-flow");
}

#[test]
fn unknown_experiment_is_configuration_error() {
    let tmp = tempfile::tempdir().unwrap();
    let mut config = ExperimentConfig::default();
    config.experiment = "no-such-thing".into();
    let err = run_experiment(&config, tmp.path());
    assert!(matches!(err, Err(seqhom::SolverError::Config(_))));
}
