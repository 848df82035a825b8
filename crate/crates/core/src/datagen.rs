//! Synthetic supervised dataset: tenor-bucketed parameter sampling, an
//! 11-point strike grid per configuration, Monte Carlo targets, outlier
//! filtering, train/val/test splits and CSV/JSON persistence.

use std::fmt::Write as _;
use std::io::{BufRead, Write};
use std::path::Path;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Result, SabrError};
use crate::geometry::{features, GeomFeatures};
use crate::hagan::hagan_vol;
use crate::mc::{mc_smile, McConfig};
use crate::params::{SabrConfig, SabrPoint, RHO_BOUND};

pub const CSV_HEADER: &str =
    "T,F0,K,alpha,beta,rho,nu,sigma_hagan,sigma_mc,q,sigma_min,d_h,sigma0,n,split,valid";

/// Grid offsets `n` in `K = F0 exp(n α √T)`.
pub const GRID_N: [f64; 11] = [-2.5, -2.0, -1.5, -1.0, -0.5, 0.0, 0.5, 1.0, 1.5, 2.0, 2.5];
pub const STRIKES_PER_CONFIG: usize = GRID_N.len();

/// Relative sizes of the train / validation / test subsets.
pub const SPLIT_WEIGHTS: [u64; 3] = [110, 55, 22];

/// Below this residual standard deviation the outlier filter is disabled.
pub const FILTER_MIN_STD: f64 = 1e-12;
pub const FILTER_SIGMAS: f64 = 10.0;

/// Maturity labels, shortest first.
pub const DEFAULT_MATS: [&str; 15] = [
    "1W", "2W", "3W", "4W", "2M", "3M", "4M", "5M", "6M", "9M", "1Y", "2Y", "3Y", "4Y", "5Y",
];

/// Year fraction of a maturity label: `w → 7w/365`, `m → m/12`, `y → y`.
pub fn year_fraction(label: &str) -> Result<f64> {
    let (num, unit) = label.split_at(label.len().saturating_sub(1));
    let n: f64 = num
        .parse()
        .map_err(|_| SabrError::Parse(format!("maturity label {label}")))?;
    match unit {
        "W" => Ok(7.0 * n / 365.0),
        "M" => Ok(n / 12.0),
        "Y" => Ok(n),
        _ => Err(SabrError::Parse(format!("maturity label {label}"))),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TenorBucket {
    pub name: &'static str,
    pub tenors: &'static [&'static str],
    pub f0: (f64, f64),
    pub alpha: (f64, f64),
    pub beta: (f64, f64),
    pub rho: (f64, f64),
    pub nu: (f64, f64),
}

impl TenorBucket {
    /// Midpoint of every range, at the middle tenor of the bucket.
    pub fn median_config(&self) -> SabrConfig {
        let mid = |r: (f64, f64)| 0.5 * (r.0 + r.1);
        let tenor = self.tenors[self.tenors.len() / 2];
        SabrConfig {
            t: year_fraction(tenor).expect("static tenor labels parse"),
            f0: mid(self.f0),
            alpha: mid(self.alpha),
            beta: mid(self.beta),
            rho: mid(self.rho),
            nu: mid(self.nu),
        }
    }

    pub fn contains(&self, cfg: &SabrConfig) -> bool {
        let inside = |v: f64, r: (f64, f64)| v >= r.0 && v <= r.1;
        inside(cfg.f0, self.f0)
            && inside(cfg.alpha, self.alpha)
            && inside(cfg.beta, self.beta)
            && inside(cfg.rho, self.rho)
            && inside(cfg.nu, self.nu)
    }
}

pub const BUCKETS: [TenorBucket; 5] = [
    TenorBucket {
        name: "1W_1M",
        tenors: &["1W", "2W", "3W", "4W"],
        f0: (0.005, 0.03),
        alpha: (0.005, 0.02),
        beta: (0.0, 0.3),
        rho: (-0.2, 0.2),
        nu: (0.05, 0.2),
    },
    TenorBucket {
        name: "2M_6M",
        tenors: &["2M", "3M", "4M", "5M", "6M"],
        f0: (0.005, 0.04),
        alpha: (0.01, 0.03),
        beta: (0.2, 0.5),
        rho: (-0.3, 0.1),
        nu: (0.1, 0.3),
    },
    TenorBucket {
        name: "9M_1Y",
        tenors: &["9M", "1Y"],
        f0: (0.01, 0.05),
        alpha: (0.02, 0.04),
        beta: (0.3, 0.7),
        rho: (-0.4, 0.0),
        nu: (0.2, 0.4),
    },
    TenorBucket {
        name: "2Y_3Y",
        tenors: &["2Y", "3Y"],
        f0: (0.015, 0.06),
        alpha: (0.03, 0.05),
        beta: (0.4, 0.8),
        rho: (-0.5, -0.1),
        nu: (0.3, 0.5),
    },
    TenorBucket {
        name: "4Y_5Y",
        tenors: &["4Y", "5Y"],
        f0: (0.02, 0.07),
        alpha: (0.04, 0.06),
        beta: (0.5, 1.0),
        rho: (-0.6, -0.2),
        nu: (0.4, 0.6),
    },
];

pub fn bucket_for(tenor: &str) -> Option<&'static TenorBucket> {
    BUCKETS.iter().find(|b| b.tenors.contains(&tenor))
}

pub fn bucket_by_name(name: &str) -> Option<&'static TenorBucket> {
    BUCKETS.iter().find(|b| b.name == name)
}

/// Format with 12 significant digits, `%.12g` style.
pub fn fmt_sig12(x: f64) -> String {
    if x.is_nan() {
        return "nan".into();
    }
    if x.is_infinite() {
        return if x > 0.0 { "inf".into() } else { "-inf".into() };
    }
    if x == 0.0 {
        return "0".into();
    }
    let sci = format!("{x:.11e}");
    let (mantissa, exp) = sci.split_once('e').expect("exponent form");
    let exp: i32 = exp.parse().expect("integer exponent");
    if !(-5..12).contains(&exp) {
        let mantissa = trim_zeros(mantissa);
        let sign = if exp < 0 { '-' } else { '+' };
        return format!("{mantissa}e{sign}{:02}", exp.abs());
    }
    let decimals = (11 - exp).max(0) as usize;
    trim_zeros(&format!("{x:.decimals$}")).to_string()
}

fn trim_zeros(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

/// Round to the value that survives a 12-significant-digit round trip.
pub fn round_sig12(x: f64) -> f64 {
    fmt_sig12(x).parse().expect("formatted float parses")
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SampledConfig {
    pub tenor: &'static str,
    pub config: SabrConfig,
}

/// Draw one configuration: a maturity uniformly from [`DEFAULT_MATS`], then
/// every parameter uniformly within its bucket, with β projected to [0, 1]
/// and ρ to [-0.95, 0.95]. Values are rounded to 12 significant digits so
/// persisted rows reproduce exactly.
pub fn sample_config<R: Rng + ?Sized>(rng: &mut R) -> SampledConfig {
    let tenor = DEFAULT_MATS[rng.gen_range(0..DEFAULT_MATS.len())];
    let bucket = bucket_for(tenor).expect("every maturity has a bucket");
    let mut draw = |r: (f64, f64)| round_sig12(rng.gen_range(r.0..=r.1));
    let f0 = draw(bucket.f0);
    let alpha = draw(bucket.alpha);
    let beta = draw(bucket.beta).clamp(0.0, 1.0);
    let rho = draw(bucket.rho).clamp(-RHO_BOUND, RHO_BOUND);
    let nu = draw(bucket.nu);
    SampledConfig {
        tenor,
        config: SabrConfig {
            t: round_sig12(year_fraction(tenor).expect("static tenor labels parse")),
            f0,
            alpha,
            beta,
            rho,
            nu,
        },
    }
}

/// `K = F0 exp(n α √T)` for each grid offset; the middle strike is `F0`.
pub fn strike_grid(f0: f64, alpha: f64, t: f64) -> [f64; STRIKES_PER_CONFIG] {
    let width = alpha * t.sqrt();
    GRID_N.map(|n| if n == 0.0 { f0 } else { round_sig12(f0 * (n * width).exp()) })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Val,
    Test,
    /// Not assigned (invalid rows, or before splitting).
    None,
}

impl Split {
    pub fn as_str(&self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Val => "val",
            Split::Test => "test",
            Split::None => "none",
        }
    }
}

impl std::str::FromStr for Split {
    type Err = SabrError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "train" => Ok(Split::Train),
            "val" => Ok(Split::Val),
            "test" => Ok(Split::Test),
            "none" => Ok(Split::None),
            other => Err(SabrError::Parse(format!("split {other}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SplitMode {
    #[default]
    ByRow,
    /// All strikes of a configuration land in the same subset.
    ByConfig,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Sample {
    pub x: SabrPoint,
    pub sigma_hagan: f64,
    pub sigma_mc: f64,
    pub features: GeomFeatures,
    /// Grid offset in `{-2.5, ..., 2.5}`.
    pub n: f64,
    pub split: Split,
    pub valid: bool,
    pub config_index: usize,
}

impl Sample {
    /// `σ_MC / σ_Hagan - 1`.
    pub fn residual_ratio(&self) -> f64 {
        self.sigma_mc / self.sigma_hagan - 1.0
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct BuildReport {
    pub configs: usize,
    pub rows: usize,
    pub mc_failures: usize,
    pub hagan_failures: usize,
    pub feature_failures: usize,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct FilterReport {
    pub residual_std: f64,
    pub threshold: f64,
    pub removed: usize,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitCounts {
    pub train: usize,
    pub val: usize,
    pub test: usize,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Dataset {
    pub samples: Vec<Sample>,
}

impl Dataset {
    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn valid_count(&self) -> usize {
        self.samples.iter().filter(|s| s.valid).count()
    }

    pub fn subset(&self, split: Split) -> Vec<Sample> {
        self.samples
            .iter()
            .filter(|s| s.valid && s.split == split)
            .copied()
            .collect()
    }

    pub fn split_counts(&self) -> SplitCounts {
        let mut c = SplitCounts::default();
        for s in self.samples.iter().filter(|s| s.valid) {
            match s.split {
                Split::Train => c.train += 1,
                Split::Val => c.val += 1,
                Split::Test => c.test += 1,
                Split::None => {}
            }
        }
        c
    }
}

fn invalid_features() -> GeomFeatures {
    GeomFeatures {
        q: f64::NAN,
        sigma_min: f64::NAN,
        d_h: f64::NAN,
        sigma0: f64::NAN,
    }
}

/// Rows for one configuration; failures mark rows invalid instead of
/// aborting.
pub fn price_config(
    cfg: &SabrConfig,
    config_index: usize,
    mc: &McConfig,
    report: &mut BuildReport,
) -> Vec<Sample> {
    let strikes = strike_grid(cfg.f0, cfg.alpha, cfg.t);
    let smile = match mc_smile(cfg, &strikes, mc, config_index as u64) {
        Ok(smile) => smile.into_iter().map(|r| r.ok()).collect(),
        Err(_) => vec![None; strikes.len()],
    };
    strikes
        .iter()
        .zip(GRID_N)
        .zip(smile)
        .map(|((&k, n), mc_vol)| {
            let x = cfg.at_strike(k);
            let hagan = hagan_vol(&x).ok();
            let geom = features(&x).ok().map(|g| GeomFeatures {
                q: round_sig12(g.q),
                sigma_min: round_sig12(g.sigma_min),
                d_h: round_sig12(g.d_h),
                sigma0: round_sig12(g.sigma0),
            });
            if mc_vol.is_none() {
                report.mc_failures += 1;
            }
            if hagan.is_none() {
                report.hagan_failures += 1;
            }
            if geom.is_none() {
                report.feature_failures += 1;
            }
            let valid = mc_vol.is_some() && hagan.is_some() && geom.is_some();
            Sample {
                x,
                sigma_hagan: round_sig12(hagan.unwrap_or(f64::NAN)),
                sigma_mc: round_sig12(mc_vol.map_or(f64::NAN, |v| v.sigma)),
                features: geom.unwrap_or_else(invalid_features),
                n,
                split: Split::None,
                valid,
                config_index,
            }
        })
        .collect()
}

/// Sample `num_configs` configurations with `seed`, price each on its strike
/// grid from a single simulation, and attach Hagan vols and features.
pub fn build_dataset(
    num_configs: usize,
    mc: &McConfig,
    seed: u64,
) -> Result<(Dataset, BuildReport)> {
    if num_configs == 0 {
        return Err(SabrError::ConfigError("num_configs = 0".into()));
    }
    mc.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let configs: Vec<SabrConfig> = (0..num_configs)
        .map(|_| sample_config(&mut rng).config)
        .collect();
    build_from_configs(&configs, mc)
}

pub fn build_from_configs(
    configs: &[SabrConfig],
    mc: &McConfig,
) -> Result<(Dataset, BuildReport)> {
    let per_config: Vec<(Vec<Sample>, BuildReport)> = configs
        .par_iter()
        .enumerate()
        .map(|(i, cfg)| {
            let mut report = BuildReport::default();
            let rows = price_config(cfg, i, mc, &mut report);
            (rows, report)
        })
        .collect();

    let mut samples = Vec::with_capacity(configs.len() * STRIKES_PER_CONFIG);
    let mut report = BuildReport {
        configs: configs.len(),
        ..BuildReport::default()
    };
    for (rows, r) in per_config {
        samples.extend(rows);
        report.mc_failures += r.mc_failures;
        report.hagan_failures += r.hagan_failures;
        report.feature_failures += r.feature_failures;
    }
    report.rows = samples.len();
    Ok((Dataset { samples }, report))
}

/// Invalidate rows whose `σ_MC - σ_Hagan` lies more than ten standard
/// deviations (of that residual over the valid rows) from zero.
pub fn filter_outliers(dataset: &mut Dataset) -> Result<FilterReport> {
    let residuals: Vec<f64> = dataset
        .samples
        .iter()
        .filter(|s| s.valid)
        .map(|s| s.sigma_mc - s.sigma_hagan)
        .collect();
    if residuals.is_empty() {
        return Err(SabrError::ConfigError(
            "outlier filter needs at least one valid row".into(),
        ));
    }
    let n = residuals.len() as f64;
    let mean = residuals.iter().sum::<f64>() / n;
    let var = if residuals.len() > 1 {
        residuals.iter().map(|r| (r - mean).powi(2)).sum::<f64>() / (n - 1.0)
    } else {
        0.0
    };
    let std = var.sqrt();
    let threshold = if std < FILTER_MIN_STD {
        f64::INFINITY
    } else {
        FILTER_SIGMAS * std
    };
    let mut removed = 0;
    for s in dataset.samples.iter_mut().filter(|s| s.valid) {
        if (s.sigma_mc - s.sigma_hagan).abs() > threshold {
            s.valid = false;
            s.split = Split::None;
            removed += 1;
        }
    }
    Ok(FilterReport {
        residual_std: std,
        threshold,
        removed,
    })
}

/// Largest-remainder apportionment of `total` by [`SPLIT_WEIGHTS`].
pub fn split_sizes(total: usize) -> [usize; 3] {
    let weight_sum: u64 = SPLIT_WEIGHTS.iter().sum();
    let total = total as u64;
    let mut sizes = [0usize; 3];
    let mut remainders = [(0u64, 0usize); 3];
    for (i, w) in SPLIT_WEIGHTS.iter().enumerate() {
        let exact = total * w;
        sizes[i] = (exact / weight_sum) as usize;
        remainders[i] = (exact % weight_sum, i);
    }
    let assigned: usize = sizes.iter().sum();
    let mut left = total as usize - assigned;
    // Largest remainder first; ties go to the earlier subset.
    remainders.sort_by(|a, b| b.0.cmp(&a.0).then(a.1.cmp(&b.1)));
    for &(_, i) in remainders.iter() {
        if left == 0 {
            break;
        }
        sizes[i] += 1;
        left -= 1;
    }
    sizes
}

/// Shuffle valid rows with `seed` and assign train/val/test in 110:55:22
/// proportions. Invalid rows get [`Split::None`].
pub fn split(dataset: &mut Dataset, seed: u64, mode: SplitMode) -> Result<SplitCounts> {
    if dataset.len() < 10 {
        return Err(SabrError::ConfigError(format!(
            "dataset of {} rows is too small to split",
            dataset.len()
        )));
    }
    for s in dataset.samples.iter_mut() {
        s.split = Split::None;
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let labels = [Split::Train, Split::Val, Split::Test];
    match mode {
        SplitMode::ByRow => {
            let mut idx: Vec<usize> = (0..dataset.len())
                .filter(|&i| dataset.samples[i].valid)
                .collect();
            idx.shuffle(&mut rng);
            let sizes = split_sizes(idx.len());
            let mut pos = 0;
            for (label, size) in labels.iter().zip(sizes) {
                for &i in &idx[pos..pos + size] {
                    dataset.samples[i].split = *label;
                }
                pos += size;
            }
        }
        SplitMode::ByConfig => {
            let mut configs: Vec<usize> = dataset
                .samples
                .iter()
                .filter(|s| s.valid)
                .map(|s| s.config_index)
                .collect();
            configs.dedup();
            configs.sort_unstable();
            configs.dedup();
            configs.shuffle(&mut rng);
            let sizes = split_sizes(configs.len());
            let mut assignment = std::collections::HashMap::new();
            let mut pos = 0;
            for (label, size) in labels.iter().zip(sizes) {
                for &c in &configs[pos..pos + size] {
                    assignment.insert(c, *label);
                }
                pos += size;
            }
            for s in dataset.samples.iter_mut().filter(|s| s.valid) {
                s.split = assignment[&s.config_index];
            }
        }
    }
    Ok(dataset.split_counts())
}

/// Serialise to the dataset CSV (LF endings, 12 significant digits).
pub fn to_csv(dataset: &Dataset) -> String {
    let mut out = String::with_capacity(160 * (dataset.len() + 1));
    out.push_str(CSV_HEADER);
    out.push('\n');
    for s in &dataset.samples {
        let x = s.x.to_array();
        let g = s.features.to_array();
        for v in x.iter().chain(&[s.sigma_hagan, s.sigma_mc]).chain(g.iter()) {
            out.push_str(&fmt_sig12(*v));
            out.push(',');
        }
        let _ = writeln!(
            out,
            "{},{},{}",
            fmt_sig12(s.n),
            s.split.as_str(),
            u8::from(s.valid)
        );
    }
    out
}

pub fn write_csv(dataset: &Dataset, path: &Path) -> Result<String> {
    let csv = to_csv(dataset);
    let mut file = std::io::BufWriter::new(std::fs::File::create(path)?);
    file.write_all(csv.as_bytes())?;
    file.flush()?;
    Ok(sha256_hex(csv.as_bytes()))
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

fn parse_field(field: &str, line: usize) -> Result<f64> {
    field
        .parse()
        .map_err(|_| SabrError::Parse(format!("line {line}: bad number {field:?}")))
}

pub fn read_csv(path: &Path) -> Result<Dataset> {
    let file = std::io::BufReader::new(std::fs::File::open(path)?);
    let mut lines = file.lines();
    let header = lines
        .next()
        .ok_or_else(|| SabrError::Parse("empty dataset file".into()))??;
    if header.trim_end() != CSV_HEADER {
        return Err(SabrError::Parse(format!("unexpected header {header:?}")));
    }
    let mut samples = Vec::new();
    for (row, line) in lines.enumerate() {
        let line = line?;
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 16 {
            return Err(SabrError::Parse(format!(
                "line {}: expected 16 fields, got {}",
                row + 2,
                fields.len()
            )));
        }
        let mut nums = [0.0; 14];
        for (i, f) in fields[..14].iter().enumerate() {
            nums[i] = parse_field(f, row + 2)?;
        }
        let x = SabrPoint::from_array(nums[..7].try_into().expect("seven fields"));
        samples.push(Sample {
            x,
            sigma_hagan: nums[7],
            sigma_mc: nums[8],
            features: GeomFeatures {
                q: nums[9],
                sigma_min: nums[10],
                d_h: nums[11],
                sigma0: nums[12],
            },
            n: nums[13],
            split: fields[14].parse()?,
            valid: match fields[15] {
                "1" => true,
                "0" => false,
                other => return Err(SabrError::Parse(format!("valid flag {other:?}"))),
            },
            config_index: row / STRIKES_PER_CONFIG,
        });
    }
    Ok(Dataset { samples })
}

/// Everything needed to regenerate a dataset file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub seed: u64,
    pub num_configs: usize,
    pub mc_config: McConfig,
    pub split_mode: SplitMode,
    pub buckets: Vec<BucketEntry>,
    pub maturity_convention: String,
    pub rows: usize,
    pub valid_rows: usize,
    pub build: BuildReport,
    pub filter: FilterReport,
    pub splits: SplitCounts,
    pub generated_at: String,
    pub csv_sha256: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BucketEntry {
    pub name: String,
    pub tenors: Vec<String>,
    pub f0: (f64, f64),
    pub alpha: (f64, f64),
    pub beta: (f64, f64),
    pub rho: (f64, f64),
    pub nu: (f64, f64),
}

impl From<&TenorBucket> for BucketEntry {
    fn from(b: &TenorBucket) -> Self {
        Self {
            name: b.name.to_string(),
            tenors: b.tenors.iter().map(|t| t.to_string()).collect(),
            f0: b.f0,
            alpha: b.alpha,
            beta: b.beta,
            rho: b.rho,
            nu: b.nu,
        }
    }
}

pub fn bucket_table() -> Vec<BucketEntry> {
    BUCKETS.iter().map(BucketEntry::from).collect()
}

pub const MATURITY_CONVENTION: &str = "weeks w -> 7w/365, months m -> m/12, years y -> y";

/// Options of a full generation run.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GenerateOptions {
    pub num_configs: usize,
    pub seed: u64,
    pub mc: McConfig,
    pub split_mode: SplitMode,
}

/// Build, filter and split; returns the dataset and a manifest without
/// hash or timestamp.
pub fn generate(opts: &GenerateOptions) -> Result<(Dataset, Manifest)> {
    let (mut dataset, build) = build_dataset(opts.num_configs, &opts.mc, opts.seed)?;
    let filter = filter_outliers(&mut dataset)?;
    let splits = split(&mut dataset, opts.seed, opts.split_mode)?;
    let manifest = Manifest {
        seed: opts.seed,
        num_configs: opts.num_configs,
        mc_config: opts.mc,
        split_mode: opts.split_mode,
        buckets: bucket_table(),
        maturity_convention: MATURITY_CONVENTION.to_string(),
        rows: dataset.len(),
        valid_rows: dataset.valid_count(),
        build,
        filter,
        splits,
        generated_at: String::new(),
        csv_sha256: String::new(),
    };
    Ok((dataset, manifest))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn synthetic(residuals: &[f64]) -> Dataset {
        let x = SabrPoint::new(1.0, 0.03, 0.03, 0.03, 0.5, -0.2, 0.3).unwrap();
        let samples = residuals
            .iter()
            .enumerate()
            .map(|(i, r)| Sample {
                x,
                sigma_hagan: 0.2,
                sigma_mc: 0.2 + r,
                features: features(&x).unwrap(),
                n: 0.0,
                split: Split::None,
                valid: true,
                config_index: i / STRIKES_PER_CONFIG,
            })
            .collect();
        Dataset { samples }
    }

    #[test]
    fn year_fractions() {
        assert_eq!(year_fraction("1W").unwrap(), 7.0 / 365.0);
        assert_eq!(year_fraction("9M").unwrap(), 0.75);
        assert_eq!(year_fraction("5Y").unwrap(), 5.0);
        assert!(year_fraction("3D").is_err());
    }

    #[test]
    fn each_maturity_in_exactly_one_bucket() {
        for m in DEFAULT_MATS {
            let n = BUCKETS.iter().filter(|b| b.tenors.contains(&m)).count();
            assert_eq!(n, 1, "{m}");
        }
        let b = bucket_for("2Y").unwrap();
        assert_eq!(b.name, "2Y_3Y");
        assert_eq!(b.rho, (-0.5, -0.1));
        assert_eq!(b.nu, (0.3, 0.5));
    }

    #[test]
    fn samples_respect_buckets() {
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        for _ in 0..5000 {
            let s = sample_config(&mut rng);
            let b = bucket_for(s.tenor).unwrap();
            assert!(b.contains(&s.config), "{s:?}");
            assert!((0.0..=1.0).contains(&s.config.beta));
            assert!(s.config.rho.abs() <= 0.95);
            assert!(s.config.validate().is_ok());
        }
    }

    #[test]
    fn first_draw_is_reproducible() {
        let a = sample_config(&mut ChaCha8Rng::seed_from_u64(42));
        let b = sample_config(&mut ChaCha8Rng::seed_from_u64(42));
        assert_eq!(a, b);
    }

    #[test]
    fn strike_grid_examples() {
        let g = strike_grid(1.0, 0.2, 1.0);
        assert_eq!(g[5], 1.0);
        assert!((g[10] - 0.5f64.exp()).abs() < 1e-11);
        assert!((g[10] - 1.648721).abs() < 5e-7);
        assert!((g[0] - 0.606531).abs() < 5e-7);
        assert!(g.windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn fmt_sig12_behaviour() {
        assert_eq!(fmt_sig12(0.2), "0.2");
        assert_eq!(fmt_sig12(1.0 / 3.0), "0.333333333333");
        assert_eq!(fmt_sig12(7.0 / 365.0), "0.0191780821918");
        assert_eq!(fmt_sig12(-2.5), "-2.5");
        assert_eq!(fmt_sig12(1.5e-7), "1.5e-07");
        assert_eq!(fmt_sig12(123456789012345.0), "1.23456789012e+14");
        assert_eq!(fmt_sig12(0.0), "0");
        assert_eq!(fmt_sig12(f64::NAN), "nan");
        assert_eq!(round_sig12(round_sig12(0.123456789012345)), round_sig12(0.123456789012345));
    }

    #[test]
    fn filter_constant_population_keeps_everything() {
        let mut d = synthetic(&[0.01; 40]);
        let r = filter_outliers(&mut d).unwrap();
        assert_eq!(r.removed, 0);
        assert!(r.threshold.is_infinite());
    }

    #[test]
    fn filter_removes_injected_outlier() {
        use rand_distr::{Distribution, Normal};
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let normal = Normal::new(0.0, 0.01).unwrap();
        let mut residuals: Vec<f64> = (0..1000).map(|_| normal.sample(&mut rng)).collect();
        residuals.push(0.5);
        let mut d = synthetic(&residuals);
        let r = filter_outliers(&mut d).unwrap();
        assert_eq!(r.removed, 1);
        assert!(!d.samples[1000].valid);
        assert_eq!(d.valid_count(), 1000);
    }

    #[test]
    fn filter_needs_valid_rows() {
        let mut d = synthetic(&[0.0; 3]);
        d.samples.iter_mut().for_each(|s| s.valid = false);
        assert!(matches!(filter_outliers(&mut d), Err(SabrError::ConfigError(_))));
    }

    #[test]
    fn split_proportions() {
        assert_eq!(split_sizes(187_000), [110_000, 55_000, 22_000]);
        assert_eq!(split_sizes(1_870), [1_100, 550, 220]);
        let s = split_sizes(1000);
        assert_eq!(s.iter().sum::<usize>(), 1000);
        // Exact quotas 588.2 / 294.1 / 117.6.
        assert_eq!(s, [588, 294, 118]);
    }

    #[test]
    fn split_is_a_deterministic_partition() {
        let mut a = synthetic(&vec![0.0; 1870]);
        a.samples[7].valid = false;
        let counts = split(&mut a, 42, SplitMode::ByRow).unwrap();
        assert_eq!(counts.train + counts.val + counts.test, 1869);
        assert!(a.samples.iter().all(|s| s.valid == (s.split != Split::None)));
        let mut b = synthetic(&vec![0.0; 1870]);
        b.samples[7].valid = false;
        split(&mut b, 42, SplitMode::ByRow).unwrap();
        assert_eq!(a, b);
        let mut c = synthetic(&vec![0.0; 1870]);
        c.samples[7].valid = false;
        split(&mut c, 43, SplitMode::ByRow).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn split_by_config_keeps_configs_together() {
        let mut d = synthetic(&vec![0.0; 11 * 50]);
        split(&mut d, 1, SplitMode::ByConfig).unwrap();
        for chunk in d.samples.chunks(11) {
            assert!(chunk.iter().all(|s| s.split == chunk[0].split));
        }
    }

    #[test]
    fn split_rejects_tiny_dataset() {
        let mut d = synthetic(&[0.0; 5]);
        assert!(split(&mut d, 42, SplitMode::ByRow).is_err());
    }

    #[test]
    fn one_config_gives_eleven_rows() {
        let mc = McConfig::default().with_paths(2000);
        let (d, report) = build_dataset(1, &mc, 42).unwrap();
        assert_eq!(d.len(), 11);
        assert_eq!(report.rows, 11);
        let c = d.samples[0].x.config();
        assert!(d.samples.iter().all(|s| s.x.config() == c));
        assert_eq!(d.samples[5].x.k, c.f0);
    }

    #[test]
    fn degenerate_config_has_exact_targets() {
        let cfg = SabrConfig::new(2.0, 0.04, 0.05, 1.0, -0.3, 0.0).unwrap();
        let (d, _) = build_from_configs(&[cfg], &McConfig::default().with_paths(1000)).unwrap();
        for s in &d.samples {
            assert!(s.valid);
            assert!((s.sigma_mc - 0.05).abs() < 1e-10);
        }
    }

    #[test]
    fn csv_round_trip() {
        let mc = McConfig::default().with_paths(1000);
        let (mut d, _) = build_dataset(3, &mc, 7).unwrap();
        split(&mut d, 7, SplitMode::ByRow).unwrap();
        let dir = std::env::temp_dir().join(format!("sabr-csv-{}", std::process::id()));
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("d.csv");
        write_csv(&d, &path).unwrap();
        let back = read_csv(&path).unwrap();
        assert_eq!(back, d);
        let text = std::fs::read_to_string(&path).unwrap();
        assert!(text.starts_with(CSV_HEADER));
        assert!(!text.contains('\r'));
        for s in &back.samples {
            let recomputed = hagan_vol(&s.x).unwrap();
            // Half a unit in the 12th stored digit, or 1e-12 below vol 1.
            let tol = 1e-12f64.max(5e-12 * s.sigma_hagan);
            assert!((recomputed - s.sigma_hagan).abs() <= tol);
        }
        std::fs::remove_dir_all(dir).unwrap();
    }
}
