use fairlog::data::Scenario;
use fairlog::experiments::{aggregate, derive_seed, read_results, run_sweep, split_cv, ExperimentConfig, Method};
use fairlog::net::TrainConfig;
use proptest::prelude::*;

fn tiny(dir: &std::path::Path, scenario: Scenario) -> ExperimentConfig {
    let mut c = ExperimentConfig {
        scenario,
        betas: vec![0.0, 0.3],
        methods: vec![Method::Debias, Method::Lower, Method::Upper, Method::ErrorParity],
        train: TrainConfig {
            hidden: vec![8],
            epochs: 3,
            ..TrainConfig::default()
        },
        folds: 2,
        seeds: 2,
        base_seed: 11,
        workers: 2,
        output: dir.to_path_buf(),
        ..ExperimentConfig::default()
    };
    c.generator.n_rows = 400;
    c
}

#[test]
fn sweep_writes_outputs_and_resumes() {
    let dir = tempfile::tempdir().unwrap();
    let config = tiny(dir.path(), Scenario::Label);
    let first = run_sweep(&config).unwrap();
    assert!(first.failed.is_empty());
    assert_eq!(first.resumed, 0);
    assert_eq!(first.rows.len(), 2 * 2 * 2 * 4);
    for f in ["config.json", "results.csv", "summary.csv", "accuracy.svg", "f1.svg", "disparity.svg"] {
        assert!(dir.path().join(f).exists(), "{f} missing");
    }
    let csv = std::fs::read(dir.path().join("results.csv")).unwrap();
    assert_eq!(read_results(&dir.path().join("results.csv")).unwrap().len(), first.rows.len());

    let second = run_sweep(&config).unwrap();
    assert_eq!(second.resumed, 8);
    assert_eq!(std::fs::read(dir.path().join("results.csv")).unwrap(), csv);

    // a different config starts over
    let mut changed = config.clone();
    changed.seeds = 1;
    let third = run_sweep(&changed).unwrap();
    assert_eq!(third.resumed, 0);
    assert_eq!(third.rows.len(), 2 * 2 * 4);
}

#[test]
fn cells_do_not_depend_on_worker_count() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let mut one = tiny(a.path(), Scenario::Historical);
    one.betas = vec![0.2];
    one.workers = 1;
    let mut three = one.clone();
    three.workers = 3;
    three.output = b.path().to_path_buf();
    run_sweep(&one).unwrap();
    run_sweep(&three).unwrap();
    assert_eq!(
        std::fs::read(a.path().join("results.csv")).unwrap(),
        std::fs::read(b.path().join("results.csv")).unwrap()
    );
}

#[test]
fn aggregate_matches_direct_computation() {
    let dir = tempfile::tempdir().unwrap();
    let mut config = tiny(dir.path(), Scenario::Measurement);
    config.betas = vec![0.3];
    config.beta_hats = vec![0.0, 0.3];
    config.methods = vec![Method::Debias, Method::Lower];
    let s = run_sweep(&config).unwrap();
    let aggs = aggregate(&s.rows, true);
    assert_eq!(aggs.len(), 4);
    for a in &aggs {
        let v: Vec<f64> = s
            .rows
            .iter()
            .filter(|r| r.method == a.method && r.beta_hat == a.x)
            .map(|r| r.accuracy)
            .collect();
        assert_eq!(v.len(), a.count);
        let n = v.len() as f64;
        let mean = v.iter().sum::<f64>() / n;
        let sd = (v.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0)).sqrt();
        assert!((a.accuracy_mean - mean).abs() < 1e-12);
        assert!((a.accuracy_se - sd / n.sqrt()).abs() < 1e-12);
    }
    // lower does not use the assumed bias, and both hats share the data
    let lower: Vec<_> = aggs.iter().filter(|a| a.method == "lower").collect();
    assert_eq!(lower[0].accuracy_mean, lower[1].accuracy_mean);
}

#[test]
fn invalid_configs_are_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let mut c = tiny(dir.path(), Scenario::Label);
    c.folds = 1;
    assert!(run_sweep(&c).is_err());
    let mut c = tiny(dir.path(), Scenario::Label);
    c.betas = vec![1.5];
    assert!(run_sweep(&c).is_err());
}

#[test]
fn derived_seeds_separate_parts() {
    assert_ne!(derive_seed(1, &["ab", "c"]), derive_seed(1, &["a", "bc"]));
    assert_ne!(derive_seed(1, &["x"]), derive_seed(2, &["x"]));
    assert_eq!(derive_seed(7, &["x", "y"]), derive_seed(7, &["x", "y"]));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn folds_partition_the_rows(n in 2usize..300, folds in 2usize..8, seed in any::<u64>()) {
        prop_assume!(n >= folds);
        let split = split_cv(n, folds, seed).unwrap();
        prop_assert_eq!(split.len(), folds);
        let mut all: Vec<usize> = split.concat();
        all.sort_unstable();
        prop_assert_eq!(all, (0..n).collect::<Vec<_>>());
        let sizes: Vec<usize> = split.iter().map(Vec::len).collect();
        prop_assert!(sizes.iter().max().unwrap() - sizes.iter().min().unwrap() <= 1);
    }
}
