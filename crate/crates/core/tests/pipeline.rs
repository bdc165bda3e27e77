use spinor_squeeze::basis::ModelParams;
use spinor_squeeze::config::{Mode, RunConfig};
use spinor_squeeze::error::Result;
use spinor_squeeze::experiments::{oracle_check_with, run, trajectory_file, CheckKind};
use spinor_squeeze::hamiltonian::{build_spin_hamiltonian, TridiagonalOperator};

fn oracle_config(dir: &std::path::Path) -> RunConfig {
    RunConfig {
        mode: Mode::OracleCheck,
        n_list: Some(vec![4, 6]),
        samples: 12,
        output_dir: dir.into(),
        ..RunConfig::default()
    }
}

fn perturbed(params: &ModelParams) -> Result<TridiagonalOperator> {
    let mut h = build_spin_hamiltonian(params)?;
    h.off_diagonal_mut()[0] *= 1.0 + 1e-6;
    Ok(h)
}

#[test]
fn perturbed_hamiltonian_is_caught() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = oracle_config(dir.path());
    let clean = oracle_check_with(&cfg, &build_spin_hamiltonian).unwrap();
    assert!(clean.passed, "{:?}", clean.failures().collect::<Vec<_>>());

    let report = oracle_check_with(&cfg, &perturbed).unwrap();
    assert!(!report.passed);
    let failed: Vec<&str> = report.failures().map(|c| c.name.as_str()).collect();
    assert!(failed.contains(&"hamiltonian_projection"), "{failed:?}");
    assert!(failed.contains(&"observables"), "{failed:?}");
    assert!(report.max_residual > 1e-8);
    assert!(report.failures().any(|c| c.kind == CheckKind::Exact));
}

#[test]
fn trajectories_are_bit_identical() {
    let produce = |workers| {
        let dir = tempfile::tempdir().unwrap();
        let cfg = RunConfig {
            n_list: Some(vec![10, 101, 500]),
            samples: 25,
            workers: Some(workers),
            output_dir: dir.path().into(),
            ..RunConfig::default()
        };
        run(&cfg).unwrap();
        let csv: Vec<Vec<u8>> = [10, 101, 500]
            .iter()
            .map(|&n| std::fs::read(dir.path().join(trajectory_file(n))).unwrap())
            .collect();
        let meta = std::fs::read(dir.path().join("metadata.json")).unwrap();
        (csv, meta)
    };
    let (a, meta_a) = produce(1);
    let (b, meta_b) = produce(1);
    assert_eq!(a, b);
    assert_eq!(meta_a.len(), meta_b.len());
}

#[test]
fn config_round_trip() {
    let cfg = RunConfig {
        n_list: Some(vec![100, 200]),
        tau_max: Some(1e-3),
        zeeman_p: 3.5,
        ..RunConfig::default()
    };
    let text = cfg.to_json().unwrap();
    let back = RunConfig::from_json(&text).unwrap();
    assert_eq!(back, cfg);
    assert_eq!(back.content_hash().unwrap(), cfg.content_hash().unwrap());

    let partial = RunConfig::from_json(r#"{ "n": 7, "method": "krylov" }"#).unwrap();
    assert_eq!(partial.atom_numbers(), vec![7]);
    assert_ne!(
        partial.content_hash().unwrap(),
        RunConfig::default().content_hash().unwrap()
    );
    assert!(RunConfig::from_json(r#"{ "samples": "many" }"#).is_err());
}

#[test]
fn auto_time_window_tracks_atom_number() {
    let cfg = RunConfig::default();
    let ratio = cfg.tau_max_for(8000) / cfg.tau_max_for(1000);
    assert!((ratio - 0.25).abs() < 1e-12);
    let fixed = RunConfig {
        tau_max: Some(2e-3),
        ..cfg
    };
    assert_eq!(fixed.tau_max_for(8000), 2e-3);
}
