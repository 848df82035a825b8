use proptest::prelude::*;

use sabr_core::datagen::{
    generate, read_csv, sha256_hex, to_csv, write_csv, GenerateOptions, Split, SplitMode, STRIKES_PER_CONFIG,
};
use sabr_core::evaluation::{model_metrics, regional_metrics, RegionRule};
use sabr_core::mc::McConfig;
use sabr_core::nn::{train, Arch, ModelBundle, TrainConfig};
use sabr_core::pricing::{black_price, implied_vol, BlackInputs};
use sabr_core::{features, hagan_vol, SabrPoint};

fn small(seed: u64, mode: SplitMode) -> GenerateOptions {
    sized(24, seed, mode)
}

fn sized(num_configs: usize, seed: u64, mode: SplitMode) -> GenerateOptions {
    GenerateOptions {
        num_configs,
        seed,
        mc: McConfig::default().with_paths(2000),
        split_mode: mode,
    }
}

#[test]
fn generate_train_evaluate_round_trip() {
    let (dataset, manifest) = generate(&sized(60, 3, SplitMode::ByRow)).unwrap();
    assert_eq!(dataset.len(), 60 * STRIKES_PER_CONFIG);
    assert_eq!(manifest.rows, dataset.len());
    let counts = dataset.split_counts();
    assert_eq!(counts.train + counts.val + counts.test, dataset.valid_count());

    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("dataset.csv");
    let hash = write_csv(&dataset, &path).unwrap();
    assert_eq!(hash, sha256_hex(&std::fs::read(&path).unwrap()));
    let reloaded = read_csv(&path).unwrap();
    assert_eq!(to_csv(&reloaded), to_csv(&dataset));
    let valid = |d: &sabr_core::datagen::Dataset| d.samples.iter().filter(|s| s.valid).copied().collect::<Vec<_>>();
    assert_eq!(valid(&reloaded), valid(&dataset));

    for s in reloaded.samples.iter().filter(|s| s.valid) {
        let tol = 1e-12f64.max(5e-12 * s.sigma_hagan);
        assert!((hagan_vol(&s.x).unwrap() - s.sigma_hagan).abs() <= tol, "{s:?}");
        let g = features(&s.x).unwrap();
        assert!((g.d_h - s.features.d_h).abs() <= 1e-11 * g.d_h.abs().max(1.0));
    }

    let cfg = TrainConfig {
        epochs: 5,
        hidden: vec![16, 16],
        ..TrainConfig::default()
    };
    let train_rows = reloaded.subset(Split::Train);
    let val_rows = reloaded.subset(Split::Val);
    let test_rows = reloaded.subset(Split::Test);
    let (bundle, history) = train(ModelBundle::new(Arch::GeoResNn, &cfg.hidden, 1), &train_rows, &val_rows, &cfg).unwrap();
    assert_eq!(history.records.len(), 5);

    let metrics = model_metrics(&bundle, &test_rows, RegionRule::GridSign).unwrap();
    assert!(metrics.r2_global <= 1.0 && metrics.rmse_rel >= 0.0);
    assert!(metrics.min_prediction > 0.0);
    let regional = regional_metrics(&test_rows, &bundle, RegionRule::GridSign).unwrap();
    assert!(regional.atm.r2 <= 1.0);

    let model_path = dir.path().join("model.json");
    bundle.save(&model_path).unwrap();
    let loaded = ModelBundle::load(&model_path).unwrap();
    assert_eq!(loaded, bundle);
    assert_eq!(loaded.predict_samples(&test_rows).unwrap(), bundle.predict_samples(&test_rows).unwrap());
}

#[test]
fn generation_and_training_are_deterministic() {
    let (a, _) = generate(&small(11, SplitMode::ByRow)).unwrap();
    let (b, _) = generate(&small(11, SplitMode::ByRow)).unwrap();
    assert_eq!(to_csv(&a), to_csv(&b));
    let (c, _) = generate(&small(12, SplitMode::ByRow)).unwrap();
    assert_ne!(to_csv(&a), to_csv(&c));

    let cfg = TrainConfig {
        epochs: 3,
        hidden: vec![8],
        ..TrainConfig::default()
    };
    let run = || {
        let (m, _) = train(
            ModelBundle::new(Arch::Ndn, &cfg.hidden, cfg.init_seed),
            &a.subset(Split::Train),
            &a.subset(Split::Val),
            &cfg,
        )
        .unwrap();
        m.to_json().unwrap()
    };
    assert_eq!(run(), run());
}

#[test]
fn config_split_keeps_smiles_together() {
    let (dataset, _) = generate(&small(5, SplitMode::ByConfig)).unwrap();
    for rows in dataset.samples.chunks(STRIKES_PER_CONFIG) {
        let splits: Vec<Split> = rows.iter().filter(|s| s.valid).map(|s| s.split).collect();
        assert!(splits.windows(2).all(|w| w[0] == w[1]), "{splits:?}");
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn hagan_vol_survives_black_round_trip(
        t in 0.1f64..5.0,
        f0 in 0.01f64..0.06,
        m in -0.3f64..0.3,
        vol in 0.05f64..0.8,
        beta in 0.0f64..1.0,
        rho in -0.9f64..0.9,
        nu in 0.0f64..0.8,
    ) {
        let k = f0 * m.exp();
        let alpha = vol * f0.powf(1.0 - beta);
        let p = SabrPoint::new(t, f0, k, alpha, beta, rho, nu).unwrap();
        let sigma = hagan_vol(&p).unwrap();
                let price = black_price(&BlackInputs::new(t, f0, k, sigma).unwrap()).unwrap();
        let back = implied_vol(price, t, f0, k).unwrap();
        prop_assert!((back - sigma).abs() <= 1e-6 * sigma, "{back} vs {sigma}");
    }
}
