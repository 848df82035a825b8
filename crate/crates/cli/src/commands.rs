use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context, Result};
use rayon::prelude::*;
use serde::Serialize;

use sabr_core::datagen::{self, fmt_sig12, round_sig12, Split, SplitMode};
use sabr_core::evaluation::{
    self, latency_bench, maturity_sweep, model_metrics, stress_suite, reference_config,
    ArchSlices, MetricsReport, RegionRule, BENCH_MC_PATHS, STRESS_PATHS,
};
use sabr_core::hagan::{hagan_vol_with, HaganBracket};
use sabr_core::mc::{mc_smile, McConfig};
use sabr_core::nn::{train, Arch, ModelBundle};
use sabr_core::params::{SabrConfig, SabrPoint};

use crate::args::*;
use crate::config::FileConfig;
use crate::Numerical;

const DEFAULT_OUT: &str = "out";
const DEFAULT_CONFIGS: usize = 1000;
const DEFAULT_MATURITIES: [f64; 6] = [0.25, 0.5, 1.0, 2.0, 3.0, 5.0];
const MIN_VALID_FRACTION: f64 = 0.99;

fn out_dir(flag: &Option<PathBuf>, file: &FileConfig) -> Result<PathBuf> {
    let dir = flag
        .clone()
        .or_else(|| file.out.clone())
        .unwrap_or_else(|| PathBuf::from(DEFAULT_OUT));
    std::fs::create_dir_all(&dir)
        .with_context(|| format!("cannot create output directory {}", dir.display()))?;
    Ok(dir)
}

fn require_file(path: &Path) -> Result<()> {
    if !path.is_file() {
        bail!("no such file: {}", path.display());
    }
    Ok(())
}

fn sabr_config(a: &ConfigArgs, file: &FileConfig, default: Option<SabrConfig>) -> Result<SabrConfig> {
    let pick = |flag: Option<f64>, f: Option<f64>, d: Option<f64>, name: &str| {
        flag.or(f)
            .or(d)
            .ok_or_else(|| anyhow!("missing --{name}"))
    };
    let d = default;
    let cfg = SabrConfig::new(
        pick(a.t, file.t, d.map(|c| c.t), "t")?,
        pick(a.f0, file.f0, d.map(|c| c.f0), "f0")?,
        pick(a.alpha, file.alpha, d.map(|c| c.alpha), "alpha")?,
        pick(a.beta, file.beta, d.map(|c| c.beta), "beta")?,
        pick(a.rho, file.rho, d.map(|c| c.rho), "rho")?,
        pick(a.nu, file.nu, d.map(|c| c.nu), "nu")?,
    )?;
    Ok(cfg)
}

/// `start:step:end` (multiples of F0) or a comma-separated list of strikes.
pub fn parse_strikes(spec: &str, f0: f64) -> Result<Vec<f64>> {
    let num = |s: &str| -> Result<f64> {
        s.trim()
            .parse::<f64>()
            .map_err(|_| anyhow!("bad number {s:?} in strikes"))
    };
    let strikes = if spec.contains(':') {
        let parts: Vec<&str> = spec.split(':').collect();
        if parts.len() != 3 {
            bail!("strike range must be start:step:end");
        }
        let (a, h, b) = (num(parts[0])?, num(parts[1])?, num(parts[2])?);
        if !(h > 0.0 && b >= a) {
            bail!("strike range needs step > 0 and end >= start");
        }
        let count = ((b - a) / h + 1e-9).floor() as usize + 1;
        (0..count)
            .map(|i| f0 * round_sig12(a + i as f64 * h))
            .collect()
    } else {
        spec.split(',').map(num).collect::<Result<Vec<_>>>()?
    };
    if strikes.is_empty() || strikes.iter().any(|k| !(k.is_finite() && *k > 0.0)) {
        bail!("strikes must be positive and finite");
    }
    Ok(strikes)
}

#[derive(Serialize)]
struct SmileManifest<'a> {
    config: SabrConfig,
    strikes: &'a [f64],
    mc_config: McConfig,
    hagan_bracket: HaganBracket,
}

pub fn smile(a: SmileArgs, file: &FileConfig) -> Result<()> {
    let cfg = sabr_config(&a.params, file, Some(reference_config()))?;
    let spec = a
        .strikes
        .clone()
        .or_else(|| file.strikes.clone())
        .unwrap_or_else(|| "0.5:0.1:2.0".into());
    let strikes = parse_strikes(&spec, cfg.f0)?;
    let mc = file.mc(&a.mc, McConfig::default().paths);
    mc.validate()?;
    let bracket: HaganBracket = a
        .hagan_bracket
        .or(file.hagan_bracket)
        .map_or(HaganBracket::default(), Into::into);
    let dir = out_dir(&a.out, file)?;

    let vols = mc_smile(&cfg, &strikes, &mc, 0)?;
    let mut csv = String::from("K,sigma_hagan,sigma_mc,vol_std_error\n");
    println!(
        "T={} F0={} alpha={} beta={} rho={} nu={}  paths={} seed={}",
        cfg.t, cfg.f0, cfg.alpha, cfg.beta, cfg.rho, cfg.nu, mc.paths, mc.base_seed
    );
    println!("{:>10} {:>12} {:>12} {:>10}", "K", "Hagan", "MC", "std.err");
    let mut failures = 0;
    for (&k, v) in strikes.iter().zip(&vols) {
        let hagan = hagan_vol_with(&cfg.at_strike(k), bracket);
        let h = hagan.as_ref().map_or(f64::NAN, |h| *h);
        let (m, se) = match v {
            Ok(v) => (v.sigma, v.vol_std_error),
            Err(e) => {
                failures += 1;
                eprintln!("K={k}: {e}");
                (f64::NAN, f64::NAN)
            }
        };
        if let Err(e) = &hagan {
            failures += 1;
            eprintln!("K={k}: {e}");
        }
        println!("{k:>10.4} {h:>12.6} {m:>12.6} {se:>10.2e}");
        csv.push_str(&format!("{},{},{},{}\n", fmt_sig12(k), fmt_sig12(h), fmt_sig12(m), fmt_sig12(se)));
    }
    std::fs::write(dir.join("smile.csv"), csv)?;
    let manifest = SmileManifest {
        config: cfg,
        strikes: &strikes,
        mc_config: mc,
        hagan_bracket: bracket,
    };
    std::fs::write(dir.join("smile.json"), serde_json::to_string_pretty(&manifest)? + "\n")?;
    if failures > 0 {
        return Err(Numerical(format!("{failures} strike(s) failed")).into());
    }
    Ok(())
}

pub fn generate(a: GenerateArgs, file: &FileConfig) -> Result<()> {
    let num_configs = a.configs.or(file.configs).unwrap_or(DEFAULT_CONFIGS);
    let mc = file.mc(&a.mc, McConfig::default().paths);
    mc.validate()?;
    let split_mode = match a.split_mode.or(file.split_mode) {
        Some(SplitModeArg::ByConfig) => SplitMode::ByConfig,
        _ => SplitMode::ByRow,
    };
    let dir = out_dir(&a.out, file)?;
    let opts = datagen::GenerateOptions {
        num_configs,
        seed: mc.base_seed,
        mc,
        split_mode,
    };
    let (dataset, mut manifest) = datagen::generate(&opts)?;
    let csv_path = dir.join("dataset.csv");
    manifest.csv_sha256 = datagen::write_csv(&dataset, &csv_path)?;
    manifest.generated_at = chrono::Utc::now().to_rfc3339();
    std::fs::write(
        dir.join("manifest.json"),
        serde_json::to_string_pretty(&manifest)? + "\n",
    )?;
    println!(
        "{} rows ({} valid; train {} / val {} / test {}), sha256 {}",
        manifest.rows,
        manifest.valid_rows,
        manifest.splits.train,
        manifest.splits.val,
        manifest.splits.test,
        manifest.csv_sha256
    );
    let fraction = manifest.valid_rows as f64 / manifest.rows as f64;
    if fraction < MIN_VALID_FRACTION {
        return Err(Numerical(format!(
            "only {:.2}% of rows are valid",
            100.0 * fraction
        ))
        .into());
    }
    Ok(())
}

pub fn parse_archs(spec: &str) -> Result<Vec<Arch>> {
    if spec.eq_ignore_ascii_case("all") {
        return Ok(Arch::ALL.to_vec());
    }
    let archs = spec
        .split(',')
        .map(|s| s.trim().parse::<Arch>())
        .collect::<sabr_core::Result<Vec<_>>>()?;
    Ok(archs)
}

pub fn train_cmd(a: TrainArgs, file: &FileConfig) -> Result<()> {
    require_file(&a.data)?;
    let archs = parse_archs(a.arch.as_deref().or(file.arch.as_deref()).unwrap_or("georesnn"))?;
    let mut cfg = file.train();
    if let Some(e) = a.epochs.or(file.epochs) {
        cfg.epochs = e;
    }
    if let Some(lr) = a.lr.or(file.lr) {
        cfg.lr0 = lr;
    }
    if let Some(b) = a.batch_size.or(file.batch_size) {
        cfg.batch_size = b;
    }
    if let Some(seed) = a.seed.or(file.seed) {
        cfg.init_seed = seed;
        cfg.shuffle_seed = seed;
    }
    cfg.validate()?;
    let dir = out_dir(&a.out, file)?;

    let bytes = std::fs::read(&a.data)?;
    let hash = datagen::sha256_hex(&bytes);
    let dataset = datagen::read_csv(&a.data)?;
    let train_rows = dataset.subset(Split::Train);
    let val_rows = dataset.subset(Split::Val);
    if train_rows.is_empty() || val_rows.is_empty() {
        bail!("dataset has no train or validation rows; was it split?");
    }

    let results: Vec<(Arch, sabr_core::Result<_>)> = archs
        .par_iter()
        .map(|&arch| {
            let bundle = ModelBundle::new(arch, &cfg.hidden, cfg.init_seed);
            (arch, train(bundle, &train_rows, &val_rows, &cfg))
        })
        .collect();
    for (arch, result) in results {
        let (mut bundle, history) = result?;
        if let Some(t) = bundle.training.as_mut() {
            t.dataset_sha256 = Some(hash.clone());
        }
        bundle.save(&dir.join(format!("model_{arch}.json")))?;
        std::fs::write(dir.join(format!("history_{arch}.csv")), history.to_csv())?;
        println!(
            "{arch}: best epoch {} val loss {:.4e} ({} epochs)",
            history.best_epoch,
            history.best_val_loss(),
            history.records.len()
        );
    }
    Ok(())
}

pub fn evaluate(a: EvaluateArgs, file: &FileConfig) -> Result<()> {
    require_file(&a.data)?;
    for m in &a.model {
        require_file(m)?;
    }
    let mc = file.mc(&a.mc, STRESS_PATHS);
    mc.validate()?;
    let maturities: Vec<f64> = match a.maturities.as_deref() {
        Some(s) => s
            .split(',')
            .map(|x| x.trim().parse::<f64>().map_err(|_| anyhow!("bad maturity {x:?}")))
            .collect::<Result<_>>()?,
        None => file.maturities.clone().unwrap_or_else(|| DEFAULT_MATURITIES.to_vec()),
    };
    let bucket_name = a
        .sweep_bucket
        .clone()
        .or_else(|| file.sweep_bucket.clone())
        .unwrap_or_else(|| "2Y_3Y".into());
    let bucket = datagen::bucket_by_name(&bucket_name)
        .ok_or_else(|| anyhow!("unknown bucket {bucket_name}"))?;
    let rule = match a.moneyness_band.or(file.moneyness_band) {
        Some(band) if band > 0.0 => RegionRule::Moneyness { band },
        Some(band) => bail!("moneyness band must be positive, got {band}"),
        None => RegionRule::GridSign,
    };
    let bench_points = a.bench_points.or(file.bench_points);
    let dir = out_dir(&a.out, file)?;

    let bytes = std::fs::read(&a.data)?;
    let hash = datagen::sha256_hex(&bytes);
    let dataset = datagen::read_csv(&a.data)?;
    let test = dataset.subset(Split::Test);
    if test.is_empty() {
        bail!("dataset has no test rows");
    }
    let bundles = a
        .model
        .iter()
        .map(|p| ModelBundle::load(p).with_context(|| format!("loading {}", p.display())))
        .collect::<Result<Vec<_>>>()?;

    let mut models = Vec::new();
    let mut slices = Vec::new();
    for bundle in &bundles {
        let mut m = model_metrics(bundle, &test, rule)?;
        if let Some(n) = bench_points {
            let stats = latency_bench(bundle, n, &mc.with_paths(BENCH_MC_PATHS))?;
            m.latency_us_per_point = Some(stats.median_us);
            m.speedup_vs_mc = Some(stats.speedup_vs_mc);
        }
        models.push(m);
        slices.push(ArchSlices {
            arch: bundle.arch,
            maturity: maturity_sweep(bundle, &bucket.median_config(), &maturities, &mc)?,
            stress: stress_suite(bundle, &mc),
        });
    }
    let report = MetricsReport {
        dataset_sha256: hash,
        mc_config: mc,
        region_rule: rule,
        models,
        slices,
    };
    let written = report.write(&dir)?;
    println!(
        "{:>9} {:>8} {:>8} {:>8} {:>8} {:>9}",
        "arch", "R2", "R2 ITM", "R2 ATM", "R2 OTM", "rmse_rel"
    );
    for m in &report.models {
        println!(
            "{:>9} {:>8.4} {:>8.4} {:>8.4} {:>8.4} {:>9.4}",
            m.arch.name(),
            m.r2_global,
            m.r2_itm,
            m.r2_atm,
            m.r2_otm,
            m.rmse_rel
        );
    }
    for s in &report.slices {
        for r in &s.stress {
            println!(
                "{:>9} stress {} {:<18} model {:.4} hagan {:.4}{}",
                s.arch.name(),
                r.id,
                r.name,
                r.max_abs_error_model,
                r.max_abs_error_hagan,
                r.error.as_deref().map(|e| format!(" ({e})")).unwrap_or_default()
            );
        }
    }
    println!("wrote {} files to {}", written.len(), dir.display());
    Ok(())
}

pub fn price(a: PriceArgs, file: &FileConfig) -> Result<()> {
    require_file(&a.model)?;
    let cfg = sabr_config(&a.params, file, None)?;
    let k = a.k.or(file.k).ok_or_else(|| anyhow!("missing --k"))?;
    let point = SabrPoint::new(cfg.t, cfg.f0, k, cfg.alpha, cfg.beta, cfg.rho, cfg.nu)?;
    let bundle = ModelBundle::load(&a.model)?;
    let v = bundle.predict_vol(&point)?;
    if !(v.is_finite()) {
        return Err(Numerical(format!("non-finite prediction {v}")).into());
    }
    println!("{v}");
    Ok(())
}

pub fn bench(a: BenchArgs, file: &FileConfig) -> Result<()> {
    require_file(&a.model)?;
    let mc = file.mc(&a.mc, BENCH_MC_PATHS);
    mc.validate()?;
    let points = a.points.or(file.points).unwrap_or(10_000);
    let bundle = ModelBundle::load(&a.model)?;
    let stats = evaluation::latency_bench(&bundle, points, &mc)?;
    println!("{}", serde_json::to_string_pretty(&stats)?);
    Ok(())
}
