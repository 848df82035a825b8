//! Accuracy metrics, smile slices, stress scenarios and inference timing.

use std::path::{Path, PathBuf};
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::datagen::{bucket_by_name, fmt_sig12, sample_config, strike_grid, Sample, GRID_N};
use crate::error::{Result, SabrError};
use crate::hagan::hagan_vol;
use crate::mc::{mc_implied_vol, mc_smile, McConfig};
use crate::nn::{Arch, ModelBundle};
use crate::params::SabrConfig;

/// Reference variance below which R² is undefined.
pub const MIN_REFERENCE_VARIANCE: f64 = 1e-18;
/// Monte Carlo paths for stress ground truth.
pub const STRESS_PATHS: usize = 200_000;
/// Monte Carlo paths of the timing reference.
pub const BENCH_MC_PATHS: usize = 100_000;
pub const BENCH_WARMUP: usize = 100;
/// Stream offset keeping evaluation simulations apart from dataset ones.
const EVAL_STREAM_BASE: u64 = 1 << 40;

fn check_pair(pred: &[f64], reference: &[f64]) -> Result<()> {
    if pred.len() != reference.len() {
        return Err(SabrError::ShapeMismatch {
            expected: reference.len(),
            got: pred.len(),
        });
    }
    if pred.is_empty() {
        return Err(SabrError::InvalidInput("empty sample".into()));
    }
    Ok(())
}

/// Coefficient of determination `1 - SS_res / SS_tot`.
pub fn r2(pred: &[f64], reference: &[f64]) -> Result<f64> {
    check_pair(pred, reference)?;
    let n = reference.len() as f64;
    let mean = reference.iter().sum::<f64>() / n;
    let ss_tot: f64 = reference.iter().map(|r| (r - mean).powi(2)).sum();
    if ss_tot / n < MIN_REFERENCE_VARIANCE {
        return Err(SabrError::DegenerateReference);
    }
    let ss_res: f64 = pred
        .iter()
        .zip(reference)
        .map(|(p, r)| (p - r).powi(2))
        .sum();
    Ok(1.0 - ss_res / ss_tot)
}

pub fn rmse(pred: &[f64], reference: &[f64]) -> Result<f64> {
    check_pair(pred, reference)?;
    let s: f64 = pred
        .iter()
        .zip(reference)
        .map(|(p, r)| (p - r).powi(2))
        .sum();
    Ok((s / pred.len() as f64).sqrt())
}

/// Root mean square of the relative error `(pred - ref) / ref`.
pub fn rmse_rel(pred: &[f64], reference: &[f64]) -> Result<f64> {
    check_pair(pred, reference)?;
    let s: f64 = pred
        .iter()
        .zip(reference)
        .map(|(p, r)| ((p - r) / r).powi(2))
        .sum();
    Ok((s / pred.len() as f64).sqrt())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Region {
    Itm,
    Atm,
    Otm,
}

/// How rows are assigned to regions.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RegionRule {
    /// Sign of the grid offset `n`.
    #[default]
    GridSign,
    /// Fixed moneyness: ATM when `|K/F0 - 1| < band`, otherwise by side.
    Moneyness { band: f64 },
}

impl RegionRule {
    pub fn region(&self, s: &Sample) -> Region {
        match *self {
            RegionRule::GridSign => {
                if s.n < 0.0 {
                    Region::Itm
                } else if s.n > 0.0 {
                    Region::Otm
                } else {
                    Region::Atm
                }
            }
            RegionRule::Moneyness { band } => {
                let m = s.x.k / s.x.f0 - 1.0;
                if m.abs() < band {
                    Region::Atm
                } else if m < 0.0 {
                    Region::Itm
                } else {
                    Region::Otm
                }
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RegionScore {
    pub count: usize,
    pub r2: f64,
    pub rmse: f64,
    pub rmse_rel: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RegionalMetrics {
    pub itm: RegionScore,
    pub atm: RegionScore,
    pub otm: RegionScore,
}

/// Regional scores of `pred` against the rows' Monte Carlo vols.
pub fn regional_from_predictions(
    rows: &[Sample],
    pred: &[f64],
    rule: RegionRule,
) -> Result<RegionalMetrics> {
    if pred.len() != rows.len() {
        return Err(SabrError::ShapeMismatch {
            expected: rows.len(),
            got: pred.len(),
        });
    }
    let score = |region: Region| -> Result<RegionScore> {
        let (p, r): (Vec<f64>, Vec<f64>) = rows
            .iter()
            .zip(pred)
            .filter(|(s, _)| rule.region(s) == region)
            .map(|(s, p)| (*p, s.sigma_mc))
            .unzip();
        if p.is_empty() {
            return Err(SabrError::EmptyRegion(format!("{region:?}").to_lowercase()));
        }
        Ok(RegionScore {
            count: p.len(),
            r2: r2(&p, &r)?,
            rmse: rmse(&p, &r)?,
            rmse_rel: rmse_rel(&p, &r)?,
        })
    };
    Ok(RegionalMetrics {
        itm: score(Region::Itm)?,
        atm: score(Region::Atm)?,
        otm: score(Region::Otm)?,
    })
}

pub fn regional_metrics(
    rows: &[Sample],
    bundle: &ModelBundle,
    rule: RegionRule,
) -> Result<RegionalMetrics> {
    regional_from_predictions(rows, &bundle.predict_samples(rows)?, rule)
}

/// One smile: Monte Carlo reference, Hagan and model vols per strike.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SliceRecord {
    pub config: SabrConfig,
    pub strikes: Vec<f64>,
    /// Grid offsets; NaN when the strikes are not on the standard grid.
    pub n: Vec<f64>,
    pub sigma_mc: Vec<f64>,
    pub sigma_hagan: Vec<f64>,
    pub sigma_model: Vec<f64>,
}

impl SliceRecord {
    pub fn to_csv(&self) -> String {
        let mut s = String::from("T,K,n,sigma_mc,sigma_hagan,sigma_model\n");
        for i in 0..self.strikes.len() {
            let row = [
                self.config.t,
                self.strikes[i],
                self.n[i],
                self.sigma_mc[i],
                self.sigma_hagan[i],
                self.sigma_model[i],
            ];
            let fields: Vec<String> = row.iter().map(|v| fmt_sig12(*v)).collect();
            s.push_str(&fields.join(","));
            s.push('\n');
        }
        s
    }

    /// Largest `|σ_model - σ_MC|` over strikes with a finite reference.
    pub fn max_abs_error_model(&self) -> f64 {
        max_abs_error(&self.sigma_model, &self.sigma_mc)
    }

    pub fn max_abs_error_hagan(&self) -> f64 {
        max_abs_error(&self.sigma_hagan, &self.sigma_mc)
    }

    pub fn rmse_model(&self) -> f64 {
        finite_rmse(&self.sigma_model, &self.sigma_mc)
    }
}

fn max_abs_error(a: &[f64], reference: &[f64]) -> f64 {
    a.iter()
        .zip(reference)
        .filter(|(_, r)| r.is_finite())
        .map(|(x, r)| (x - r).abs())
        .fold(0.0, |m, e| if e.is_nan() { f64::NAN } else { m.max(e) })
}

fn finite_rmse(a: &[f64], reference: &[f64]) -> f64 {
    let errs: Vec<f64> = a
        .iter()
        .zip(reference)
        .filter(|(_, r)| r.is_finite())
        .map(|(x, r)| (x - r).powi(2))
        .collect();
    (errs.iter().sum::<f64>() / errs.len() as f64).sqrt()
}

/// Price one smile with fresh Monte Carlo and evaluate Hagan and the model.
/// Strikes whose Monte Carlo inversion fails carry NaN references.
pub fn smile_slice(
    bundle: &ModelBundle,
    cfg: &SabrConfig,
    strikes: &[f64],
    n: &[f64],
    mc: &McConfig,
    stream: u64,
) -> Result<SliceRecord> {
    cfg.validate()?;
    let mc_vols = mc_smile(cfg, strikes, mc, EVAL_STREAM_BASE + stream)?;
    let points: Vec<_> = strikes.iter().map(|&k| cfg.at_strike(k)).collect();
    let sigma_hagan = points
        .iter()
        .map(|p| hagan_vol(p))
        .collect::<Result<Vec<_>>>()?;
    let sigma_model = bundle.predict_vols(&points)?;
    Ok(SliceRecord {
        config: *cfg,
        strikes: strikes.to_vec(),
        n: n.to_vec(),
        sigma_mc: mc_vols
            .into_iter()
            .map(|r| r.map_or(f64::NAN, |v| v.sigma))
            .collect(),
        sigma_hagan,
        sigma_model,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StressScenario {
    pub id: usize,
    pub name: String,
    pub config: SabrConfig,
    pub strikes: Vec<f64>,
    pub n: Vec<f64>,
}

/// Configuration of the reference smile comparison: F0 = 1, T = 1,
/// α = 0.2, β = 0.5, ρ = -0.8, ν = 1.2.
pub fn reference_config() -> SabrConfig {
    SabrConfig {
        t: 1.0,
        f0: 1.0,
        alpha: 0.2,
        beta: 0.5,
        rho: -0.8,
        nu: 1.2,
    }
}

/// Strikes 0.5, 0.6, ..., 2.0.
pub fn reference_strikes() -> Vec<f64> {
    (5..=20).map(|i| i as f64 / 10.0).collect()
}

/// Bucket used for the high-ν scenario.
pub const HIGH_NU_BUCKET: &str = "9M_1Y";

fn grid_scenario(id: usize, name: &str, config: SabrConfig) -> StressScenario {
    StressScenario {
        id,
        name: name.to_string(),
        config,
        strikes: strike_grid(config.f0, config.alpha, config.t).to_vec(),
        n: GRID_N.to_vec(),
    }
}

/// The fixed list of six stress scenarios.
pub fn stress_scenarios() -> Vec<StressScenario> {
    let median = |name: &str| bucket_by_name(name).expect("known bucket").median_config();
    let mut high_nu = median(HIGH_NU_BUCKET);
    high_nu.nu = 1.5 * bucket_by_name(HIGH_NU_BUCKET).unwrap().nu.1;
    let mut strong_skew = median("4Y_5Y");
    strong_skew.rho = -0.9;
    let mut normal_like = median("1W_1M");
    normal_like.beta = 0.0;
    let mut lognormal = median("9M_1Y");
    lognormal.beta = 1.0;
    lognormal.nu = 0.0;
    let mut high_alpha = median("9M_1Y");
    high_alpha.alpha = 2.0 * bucket_by_name("9M_1Y").unwrap().alpha.1;
    let t1 = reference_strikes();
    vec![
        StressScenario {
            id: 1,
            name: "reference_smile".into(),
            config: reference_config(),
            n: vec![f64::NAN; t1.len()],
            strikes: t1,
        },
        grid_scenario(2, "high_nu", high_nu),
        grid_scenario(3, "rho_minus_0.9", strong_skew),
        grid_scenario(4, "beta_0", normal_like),
        grid_scenario(5, "lognormal_sanity", lognormal),
        grid_scenario(6, "high_alpha", high_alpha),
    ]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StressRecord {
    pub id: usize,
    pub name: String,
    pub slice: Option<SliceRecord>,
    pub error: Option<String>,
    pub max_abs_error_model: f64,
    pub max_abs_error_hagan: f64,
}

/// Evaluate every scenario with fresh Monte Carlo ground truth. A failing
/// scenario yields a record carrying its error.
pub fn stress_suite(bundle: &ModelBundle, mc: &McConfig) -> Vec<StressRecord> {
    stress_scenarios()
        .par_iter()
        .map(|s| {
            match smile_slice(bundle, &s.config, &s.strikes, &s.n, mc, 1000 + s.id as u64) {
                Ok(slice) => StressRecord {
                    id: s.id,
                    name: s.name.clone(),
                    max_abs_error_model: slice.max_abs_error_model(),
                    max_abs_error_hagan: slice.max_abs_error_hagan(),
                    slice: Some(slice),
                    error: None,
                },
                Err(e) => StressRecord {
                    id: s.id,
                    name: s.name.clone(),
                    slice: None,
                    error: Some(e.to_string()),
                    max_abs_error_model: f64::NAN,
                    max_abs_error_hagan: f64::NAN,
                },
            }
        })
        .collect()
}

/// One slice per maturity on the standard strike grid.
pub fn maturity_sweep(
    bundle: &ModelBundle,
    base: &SabrConfig,
    maturities: &[f64],
    mc: &McConfig,
) -> Result<Vec<SliceRecord>> {
    if let Some(t) = maturities.iter().find(|t| !(0.25..=5.0).contains(*t)) {
        return Err(SabrError::InvalidInput(format!("maturity {t} outside [0.25, 5]")));
    }
    maturities
        .par_iter()
        .enumerate()
        .map(|(i, &t)| {
            let cfg = SabrConfig { t, ..*base };
            let strikes = strike_grid(cfg.f0, cfg.alpha, t);
            smile_slice(bundle, &cfg, &strikes, &GRID_N, mc, 2000 + i as u64)
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LatencyStats {
    pub n_points: usize,
    pub median_us: f64,
    pub p99_us: f64,
    pub mc_us_per_point: f64,
    pub speedup_vs_mc: f64,
}

fn percentile(sorted: &[f64], q: f64) -> f64 {
    let idx = ((sorted.len() as f64 - 1.0) * q).round() as usize;
    sorted[idx]
}

/// Time single-point `predict_vol` calls on random in-domain points after
/// [`BENCH_WARMUP`] untimed calls, and compare with one Monte Carlo pricing
/// at `mc.paths` paths (median of three).
pub fn latency_bench(bundle: &ModelBundle, n_points: usize, mc: &McConfig) -> Result<LatencyStats> {
    if n_points < 10_000 {
        return Err(SabrError::InvalidInput(format!("n_points = {n_points} < 10000")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(mc.base_seed);
    let points: Vec<_> = (0..n_points + BENCH_WARMUP)
        .map(|_| {
            let cfg = sample_config(&mut rng).config;
            let grid = strike_grid(cfg.f0, cfg.alpha, cfg.t);
            cfg.at_strike(grid[rng.gen_range(0..grid.len())])
        })
        .collect();
    let mut sink = 0.0;
    for p in &points[..BENCH_WARMUP] {
        sink += bundle.predict_vol(p)?;
    }
    let mut times = Vec::with_capacity(n_points);
    for p in &points[BENCH_WARMUP..] {
        let start = Instant::now();
        let v = bundle.predict_vol(p)?;
        times.push(start.elapsed().as_secs_f64() * 1e6);
        sink += v;
    }
    std::hint::black_box(sink);
    times.sort_by(f64::total_cmp);
    let median_us = percentile(&times, 0.5);
    let p99_us = percentile(&times, 0.99);

    let reference = bucket_by_name("9M_1Y").unwrap().median_config();
    let point = reference.at_strike(reference.f0);
    let mut mc_times: Vec<f64> = (0..3)
        .map(|i| {
            let start = Instant::now();
            let r = mc_implied_vol(&point, &mc.with_seed(mc.base_seed + i));
            (start.elapsed().as_secs_f64() * 1e6, r)
        })
        .map(|(t, r)| r.map(|_| t))
        .collect::<Result<_>>()?;
    mc_times.sort_by(f64::total_cmp);
    let mc_us = mc_times[1];
    Ok(LatencyStats {
        n_points,
        median_us,
        p99_us,
        mc_us_per_point: mc_us,
        speedup_vs_mc: mc_us / median_us,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelMetrics {
    pub arch: Arch,
    pub r2_global: f64,
    pub r2_atm: f64,
    pub r2_itm: f64,
    pub r2_otm: f64,
    pub rmse_rel: f64,
    pub val_loss_final: f64,
    pub latency_us_per_point: Option<f64>,
    pub speedup_vs_mc: Option<f64>,
    pub min_prediction: f64,
}

/// Global and regional accuracy of a model on test rows.
pub fn model_metrics(bundle: &ModelBundle, test: &[Sample], rule: RegionRule) -> Result<ModelMetrics> {
    let pred = bundle.predict_samples(test)?;
    let reference: Vec<f64> = test.iter().map(|s| s.sigma_mc).collect();
    let regional = regional_from_predictions(test, &pred, rule)?;
    Ok(ModelMetrics {
        arch: bundle.arch,
        r2_global: r2(&pred, &reference)?,
        r2_atm: regional.atm.r2,
        r2_itm: regional.itm.r2,
        r2_otm: regional.otm.r2,
        rmse_rel: rmse_rel(&pred, &reference)?,
        val_loss_final: bundle.training.as_ref().map_or(f64::NAN, |t| t.best_val_loss),
        latency_us_per_point: None,
        speedup_vs_mc: None,
        min_prediction: pred.iter().copied().fold(f64::INFINITY, f64::min),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArchSlices {
    pub arch: Arch,
    pub maturity: Vec<SliceRecord>,
    pub stress: Vec<StressRecord>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub dataset_sha256: String,
    pub mc_config: McConfig,
    pub region_rule: RegionRule,
    pub models: Vec<ModelMetrics>,
    pub slices: Vec<ArchSlices>,
}

impl MetricsReport {
    /// Write `metrics_<hash8>.json` and one CSV per slice, named by arch and
    /// dataset hash. Returns the written paths.
    pub fn write(&self, dir: &Path) -> Result<Vec<PathBuf>> {
        std::fs::create_dir_all(dir)?;
        let tag: String = self.dataset_sha256.chars().take(8).collect();
        let mut written = Vec::new();
        let json = dir.join(format!("metrics_{tag}.json"));
        std::fs::write(&json, serde_json::to_string_pretty(self)? + "\n")?;
        written.push(json);
        for a in &self.slices {
            for s in &a.maturity {
                let p = dir.join(format!("{}_{tag}_maturity_T{}.csv", a.arch, fmt_sig12(s.config.t)));
                std::fs::write(&p, s.to_csv())?;
                written.push(p);
            }
            for r in &a.stress {
                if let Some(s) = &r.slice {
                    let p = dir.join(format!("{}_{tag}_stress_{}_{}.csv", a.arch, r.id, r.name));
                    std::fs::write(&p, s.to_csv())?;
                    written.push(p);
                }
            }
        }
        Ok(written)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::datagen::Split;
    use crate::geometry::features;
    use crate::nn::DEFAULT_HIDDEN;
    use crate::params::SabrPoint;
    use proptest::prelude::*;

    fn row(n: f64, sigma_mc: f64) -> Sample {
        let x = SabrPoint::new(1.0, 0.03, 0.03 * (0.1 * n).exp(), 0.03, 0.5, -0.2, 0.3).unwrap();
        Sample {
            x,
            sigma_hagan: hagan_vol(&x).unwrap(),
            sigma_mc,
            features: features(&x).unwrap(),
            n,
            split: Split::Test,
            valid: true,
            config_index: 0,
        }
    }

    #[test]
    fn r2_examples() {
        let r = [1.0, 2.0, 3.0];
        assert_eq!(r2(&r, &r).unwrap(), 1.0);
        assert_eq!(r2(&[2.0; 3], &r).unwrap(), 0.0);
        assert!((r2(&[1.0, 2.0, 4.0], &r).unwrap() - 0.5).abs() < 1e-15);
        assert!(matches!(r2(&[1.0; 3], &[0.2; 3]), Err(SabrError::DegenerateReference)));
        assert!(r2(&[1.0], &[1.0, 2.0]).is_err());
    }

    #[test]
    fn rmse_rel_examples() {
        assert_eq!(rmse_rel(&[0.2, 0.3], &[0.2, 0.3]).unwrap(), 0.0);
        assert!((rmse_rel(&[0.22, 0.27], &[0.2, 0.3]).unwrap() - 0.1).abs() < 1e-12);
    }

    proptest! {
        #[test]
        fn r2_shift_invariant(
            v in proptest::collection::vec((0.0f64..1.0, -0.1f64..0.1), 3..40),
            c in -5.0f64..5.0,
        ) {
            let reference: Vec<f64> = v.iter().enumerate().map(|(i, (r, _))| r + i as f64 * 0.01).collect();
            let pred: Vec<f64> = reference.iter().zip(&v).map(|(r, (_, e))| r + e).collect();
            let a = r2(&pred, &reference).unwrap();
            let shift = |x: &[f64]| x.iter().map(|y| y + c).collect::<Vec<_>>();
            let b = r2(&shift(&pred), &shift(&reference)).unwrap();
            prop_assert!(a <= 1.0);
            prop_assert!((a - b).abs() < 1e-9);
        }
    }

    #[test]
    fn regions_partition_rows() {
        let rows: Vec<Sample> = [0.0, 0.05]
            .iter()
            .flat_map(|&c| GRID_N.iter().map(move |&n| row(n, 0.2 + c + 0.01 * n)))
            .collect();
        let pred: Vec<f64> = rows.iter().map(|s| s.sigma_mc).collect();
        let m = regional_from_predictions(&rows, &pred, RegionRule::GridSign).unwrap();
        assert_eq!(m.itm.count + m.atm.count + m.otm.count, rows.len());
        assert_eq!((m.itm.count, m.atm.count, m.otm.count), (10, 2, 10));
        assert_eq!((m.itm.r2, m.atm.r2, m.otm.r2), (1.0, 1.0, 1.0));
        let rule = RegionRule::Moneyness { band: 0.025 };
        let counts = rows.iter().fold([0; 3], |mut c, s| {
            c[rule.region(s) as usize] += 1;
            c
        });
        assert_eq!(counts.iter().sum::<usize>(), rows.len());
    }

    #[test]
    fn atm_only_rows_leave_wings_empty() {
        let rows = vec![row(0.0, 0.2), row(0.0, 0.21)];
        let err = regional_from_predictions(&rows, &[0.2, 0.21], RegionRule::GridSign).unwrap_err();
        assert!(matches!(err, SabrError::EmptyRegion(_)));
    }

    #[test]
    fn six_stress_scenarios() {
        let s = stress_scenarios();
        assert_eq!(s.len(), 6);
        assert_eq!(s[0].strikes.len(), 16);
        assert!((s[1].config.nu - 0.6).abs() < 1e-15);
        assert_eq!(s[2].config.rho, -0.9);
        assert_eq!(s[3].config.beta, 0.0);
        assert_eq!((s[4].config.beta, s[4].config.nu), (1.0, 0.0));
        assert!((s[5].config.alpha - 0.08).abs() < 1e-15);
        for sc in &s {
            assert!(sc.config.validate().is_ok());
        }
    }

    #[test]
    fn lognormal_scenario_is_exact() {
        let bundle = ModelBundle::new(Arch::GeoResNn, &DEFAULT_HIDDEN, 1).zeroed();
        let sc = &stress_scenarios()[4];
        let mc = McConfig::default().with_paths(2000);
        let slice = smile_slice(&bundle, &sc.config, &sc.strikes, &sc.n, &mc, 5).unwrap();
        for (m, h) in slice.sigma_mc.iter().zip(&slice.sigma_hagan) {
            assert!((m - sc.config.alpha).abs() < 1e-10);
            assert!((h - sc.config.alpha).abs() < 1e-14);
        }
        assert!(slice.max_abs_error_model() < 1e-10);
    }

    #[test]
    fn sweep_shapes() {
        let bundle = ModelBundle::new(Arch::GeoResNn, &DEFAULT_HIDDEN, 1).zeroed();
        let base = bucket_by_name("2Y_3Y").unwrap().median_config();
        let mc = McConfig::default().with_paths(2000);
        let slices = maturity_sweep(&bundle, &base, &[0.25, 1.0, 5.0], &mc).unwrap();
        assert_eq!(slices.len(), 3);
        for s in &slices {
            assert_eq!(s.strikes.len(), 11);
            assert!(s.sigma_model.iter().all(|v| v.is_finite() && *v > 0.0));
            assert_eq!(s.to_csv().lines().count(), 12);
        }
        assert!(maturity_sweep(&bundle, &base, &[6.0], &mc).is_err());
    }
}
