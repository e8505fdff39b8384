use spinlab::experiment::{compute, run, ExperimentConfig, Subcommand, Summary};
use spinlab::field::MemoryBudget;

fn small(out: &std::path::Path) -> ExperimentConfig {
    let mut c = ExperimentConfig::from_toml_str(
        r#"
        experiment = "small"
        seed = 7
        n = [2]
        m = [2]
        n_disorder = 8
        n_inner = 800
        chain_len = 1200
        burn_in = 200
        thin = 5
        n_probes = 100

        [covariance_check]
        n_pairs = 3
        n_draws = 400

        [poincare_check]
        n_values = [2]
        k = 10000

        [free_energy_sweep]
        oracle_draws = 4
        oracle_n_inner = 2000

        [positivity_scan]
        ts = [0.0, 1.0]
        random_pairs = 2000

        [lipschitz_audit]
        n_total = [4]

        [lemma_estimate_audit]
        n_pairs = 500
        "#,
    )
    .unwrap();
    c.out_dir = out.to_path_buf();
    c
}

#[test]
fn every_subcommand_runs_and_records() {
    let dir = tempfile::tempdir().unwrap();
    let config = small(dir.path());
    for sub in Subcommand::ALL {
        let outcome = run(&config, sub, MemoryBudget::default()).unwrap();
        let r = &outcome.report;
        assert!(!r.rows.is_empty(), "{sub}: no rows");
        assert!(
            r.rows.iter().all(|row| row.len() == r.columns.len()),
            "{sub}: ragged rows"
        );
        assert!(!r.checks.is_empty(), "{sub}: no checks");
        assert!(outcome.written.csv.ends_with(format!("small/{sub}.csv")));
    }
    let summary = Summary::read(&dir.path().join("small/summary.json")).unwrap().unwrap();
    assert_eq!(summary.runs.len(), Subcommand::ALL.len());
    assert_eq!(summary.experiment, "small");
}

#[test]
fn reports_are_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let config = small(dir.path());
    for sub in [
        Subcommand::SuperaddTable,
        Subcommand::InterpEndpoints,
        Subcommand::LemmaEstimateAudit,
    ] {
        let a = compute(&config, sub, MemoryBudget::default()).unwrap();
        let b = compute(&config, sub, MemoryBudget::default()).unwrap();
        assert_eq!(a, b, "{sub}");
    }
}

#[test]
fn poincare_small_n_is_reported_as_expected_failure() {
    let dir = tempfile::tempdir().unwrap();
    let report = compute(&small(dir.path()), Subcommand::PoincareCheck, MemoryBudget::default()).unwrap();
    // at N = 2 the marginal is far from Gaussian, and the check says so
    assert!(report.passed(), "{:?}", report.checks);
}
