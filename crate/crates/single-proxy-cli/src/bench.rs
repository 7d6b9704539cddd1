//! The synthetic benchmark: replicated fits of all estimators across
//! outcome-noise levels, aggregated into a deterministic JSON report.
//!
//! Each (noise level, replication) cell derives its own seed from the
//! master seed with a fixed mixing function, generates a fresh dataset,
//! fits the requested estimators with per-replication median-heuristic
//! bandwidths, and scores the resulting dose-response curve against the
//! known structural function on a percentile grid of that replication's
//! treatments. Cells are independent, so they run on a thread pool;
//! results are keyed and sorted by (noise index, replication), which makes
//! the report byte-identical across parallelism settings.

use std::time::Instant;

use rayon::prelude::*;
use serde::Serialize;

use single_proxy::kernels::Bandwidths;
use single_proxy::krr::fit_krr;
use single_proxy::skpv::fit_skpv;
use single_proxy::spmmr::fit_spmmr;
use single_proxy::structural::{curve_mse, structural_curve};
use single_proxy::synth::{generate, true_structural, SynthConfig, TreatmentMap};
use single_proxy::Dataset;

use crate::CliError;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub enum Method {
    Regression,
    Skpv,
    Spmmr,
}

impl Method {
    pub const ALL: [Method; 3] = [Method::Regression, Method::Skpv, Method::Spmmr];

    pub fn label(self) -> &'static str {
        match self {
            Method::Regression => "regression",
            Method::Skpv => "skpv",
            Method::Spmmr => "spmmr",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum StdMode {
    /// Population standard deviation over sqrt(replications).
    StandardError,
    /// Raw population standard deviation.
    Raw,
}

impl StdMode {
    pub fn label(self) -> &'static str {
        match self {
            StdMode::StandardError => "standard-error",
            StdMode::Raw => "raw",
        }
    }
}

#[derive(Clone, Copy, Debug)]
pub struct GridSpec {
    pub min_percentile: f64,
    pub max_percentile: f64,
    pub points: usize,
}

#[derive(Clone, Debug)]
pub struct BenchmarkConfig {
    pub samples: usize,
    pub replications: usize,
    pub noise_levels: Vec<f64>,
    pub seed: u64,
    pub lambda: f64,
    pub eta: f64,
    pub bandwidth_scale: f64,
    pub methods: Vec<Method>,
    pub grid: GridSpec,
    pub std_mode: StdMode,
    pub treatment_map: TreatmentMap,
    /// Worker threads; 0 means one per core. Not recorded in the report.
    pub parallelism: usize,
}

impl BenchmarkConfig {
    fn validate(&self) -> Result<(), CliError> {
        let usage = |msg: String| Err(CliError::Usage(msg));
        if self.samples < 2 {
            return usage(format!("n must be >= 2, got {}", self.samples));
        }
        if self.replications == 0 {
            return usage("reps must be >= 1".into());
        }
        if self.noise_levels.is_empty() {
            return usage("at least one noise level is required".into());
        }
        if self.noise_levels.iter().any(|s| !s.is_finite() || *s < 0.0) {
            return usage(format!("noise levels must be finite and >= 0, got {:?}", self.noise_levels));
        }
        if self.methods.is_empty() {
            return usage("at least one method is required".into());
        }
        let g = &self.grid;
        if !(0.0..=100.0).contains(&g.min_percentile)
            || !(0.0..=100.0).contains(&g.max_percentile)
            || g.min_percentile >= g.max_percentile
        {
            return usage(format!(
                "grid percentiles must satisfy 0 <= min < max <= 100, got {} and {}",
                g.min_percentile, g.max_percentile
            ));
        }
        if g.points < 2 {
            return usage(format!("grid points must be >= 2, got {}", g.points));
        }
        Ok(())
    }
}

// Report DTOs. Field order is serialization order; `wall_clock_seconds`
// stays last so the rest of the document is seed-deterministic.

#[derive(Serialize, Debug)]
pub struct GridDto {
    pub min_percentile: f64,
    pub max_percentile: f64,
    pub points: usize,
}

#[derive(Serialize, Debug)]
pub struct ReportConfig {
    pub samples: usize,
    pub replications: usize,
    pub noise_levels: Vec<f64>,
    pub seed: u64,
    pub lambda: f64,
    pub eta: f64,
    pub bandwidth_scale: f64,
    pub methods: Vec<String>,
    pub grid: GridDto,
    pub std_mode: String,
    pub treatment_map: String,
}

#[derive(Serialize, Debug)]
pub struct CellReport {
    pub method: String,
    pub noise: f64,
    pub mean_mse: f64,
    pub std_mse: f64,
    /// Successful replications aggregated into the statistics.
    pub replications: usize,
    /// Replications that failed; error messages are not part of the report.
    pub failures: usize,
}

#[derive(Serialize, Debug)]
pub struct ExperimentReport {
    pub schema_version: u32,
    pub config: ReportConfig,
    pub cells: Vec<CellReport>,
    pub wall_clock_seconds: f64,
}

/// 64-bit finalizer with full avalanche; the standard constants.
pub fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seed of the dataset for replication `rep` at noise index `noise_index`,
/// independent of scheduling.
pub fn cell_seed(master: u64, noise_index: usize, rep: usize) -> u64 {
    splitmix64(master ^ splitmix64(((noise_index as u64) << 32) | rep as u64))
}

/// Linearly interpolated percentile of an ascending-sorted slice.
pub fn percentile(sorted: &[f64], p: f64) -> f64 {
    assert!(!sorted.is_empty() && (0.0..=100.0).contains(&p));
    let rank = p / 100.0 * (sorted.len() - 1) as f64;
    let lo = rank.floor() as usize;
    let hi = rank.ceil() as usize;
    sorted[lo] + (sorted[hi] - sorted[lo]) * (rank - lo as f64)
}

/// `points` evenly spaced values from `min` to `max` inclusive.
pub fn linspace(min: f64, max: f64, points: usize) -> Vec<f64> {
    assert!(points >= 2 && max > min);
    let step = (max - min) / (points - 1) as f64;
    (0..points).map(|i| min + step * i as f64).collect()
}

/// Percentile-spanning evaluation grid over a scalar treatment sample.
pub fn treatment_grid(data: &Dataset, spec: &GridSpec) -> Result<Vec<f64>, CliError> {
    let mut sorted = data.treatments.as_slice().to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let min = percentile(&sorted, spec.min_percentile);
    let max = percentile(&sorted, spec.max_percentile);
    // Negated comparison so NaN percentiles are rejected too.
    #[allow(clippy::neg_cmp_op_on_partial_ord)]
    if !(max > min) {
        return Err(CliError::Core(single_proxy::Error::InvalidData(format!(
            "degenerate treatment grid: percentiles {} and {} both map to {min}",
            spec.min_percentile, spec.max_percentile
        ))));
    }
    Ok(linspace(min, max, spec.points))
}

/// Per-method result of one replication: the curve MSE or the failure message.
type MethodResults = Vec<(Method, Result<f64, String>)>;

struct CellOutcome {
    noise_index: usize,
    rep: usize,
    results: MethodResults,
}

fn run_cell(config: &BenchmarkConfig, noise_index: usize, rep: usize) -> CellOutcome {
    let seed = cell_seed(config.seed, noise_index, rep);
    let results = match cell_mse(config, noise_index, seed) {
        Ok(values) => values,
        Err(message) => config
            .methods
            .iter()
            .map(|&m| (m, Err(message.clone())))
            .collect(),
    };
    CellOutcome {
        noise_index,
        rep,
        results,
    }
}

fn cell_mse(config: &BenchmarkConfig, noise_index: usize, seed: u64) -> Result<MethodResults, String> {
    let synth = SynthConfig {
        samples: config.samples,
        noise: config.noise_levels[noise_index],
        seed,
        treatment_map: config.treatment_map,
    };
    let data = generate(&synth).map_err(|e| e.to_string())?;
    let bandwidths =
        Bandwidths::median_from_data(&data, config.bandwidth_scale).map_err(|e| e.to_string())?;
    let grid = treatment_grid(&data, &config.grid).map_err(|e| e.to_string())?;
    let truth: Vec<f64> = grid.iter().map(|&a| true_structural(a)).collect();

    let score = |method: Method| -> Result<f64, String> {
        let estimates = match method {
            Method::Regression => {
                let model = fit_krr(
                    &data.treatments,
                    &data.outcomes,
                    config.lambda,
                    bandwidths.treatment,
                )
                .map_err(|e| e.to_string())?;
                grid.iter()
                    .map(|&a| model.predict(&[a]).map_err(|e| e.to_string()))
                    .collect::<Result<Vec<f64>, String>>()?
            }
            Method::Skpv => {
                let model = fit_skpv(
                    &data,
                    &data.stage_two(),
                    config.lambda,
                    config.eta,
                    &bandwidths,
                )
                .map_err(|e| e.to_string())?;
                structural_curve(&model, &grid, &data.proxies)
                    .map_err(|e| e.to_string())?
                    .values
            }
            Method::Spmmr => {
                let model =
                    fit_spmmr(&data, config.eta, &bandwidths).map_err(|e| e.to_string())?;
                structural_curve(&model, &grid, &data.proxies)
                    .map_err(|e| e.to_string())?
                    .values
            }
        };
        curve_mse(&estimates, &truth).map_err(|e| e.to_string())
    };

    Ok(config.methods.iter().map(|&m| (m, score(m))).collect())
}

fn aggregate(
    config: &BenchmarkConfig,
    outcomes: &[CellOutcome],
) -> Result<Vec<CellReport>, CliError> {
    let mut cells = Vec::new();
    let mut empty = Vec::new();
    for &method in &config.methods {
        for (noise_index, &noise) in config.noise_levels.iter().enumerate() {
            let mut mses = Vec::new();
            let mut failures = 0usize;
            for outcome in outcomes
                .iter()
                .filter(|o| o.noise_index == noise_index)
            {
                match outcome
                    .results
                    .iter()
                    .find(|(m, _)| *m == method)
                    .map(|(_, r)| r)
                {
                    Some(Ok(mse)) => mses.push(*mse),
                    Some(Err(_)) => failures += 1,
                    None => failures += 1,
                }
            }
            if mses.is_empty() {
                empty.push(format!("{} at noise {noise}", method.label()));
                continue;
            }
            let count = mses.len() as f64;
            let mean = mses.iter().sum::<f64>() / count;
            let variance = mses.iter().map(|m| (m - mean) * (m - mean)).sum::<f64>() / count;
            let std = variance.sqrt();
            let std_mse = match config.std_mode {
                StdMode::StandardError => std / count.sqrt(),
                StdMode::Raw => std,
            };
            cells.push(CellReport {
                method: method.label().to_string(),
                noise,
                mean_mse: mean,
                std_mse,
                replications: mses.len(),
                failures,
            });
        }
    }
    if !empty.is_empty() {
        return Err(CliError::EmptyCells(empty));
    }
    Ok(cells)
}

pub fn run_benchmark(config: &BenchmarkConfig) -> Result<ExperimentReport, CliError> {
    let start = Instant::now();
    config.validate()?;

    // The linear-algebra backend stays single-threaded inside each cell;
    // parallelism comes from running cells concurrently. This keeps every
    // floating-point reduction order fixed regardless of thread count.
    single_proxy::linalg::set_sequential_backend();

    let pairs: Vec<(usize, usize)> = (0..config.noise_levels.len())
        .flat_map(|k| (0..config.replications).map(move |r| (k, r)))
        .collect();

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(config.parallelism)
        .build()
        .map_err(|e| CliError::Usage(format!("thread pool: {e}")))?;
    let mut outcomes: Vec<CellOutcome> = pool.install(|| {
        pairs
            .par_iter()
            .map(|&(k, r)| run_cell(config, k, r))
            .collect()
    });
    outcomes.sort_by_key(|o| (o.noise_index, o.rep));

    let cells = aggregate(config, &outcomes)?;
    Ok(ExperimentReport {
        schema_version: 1,
        config: ReportConfig {
            samples: config.samples,
            replications: config.replications,
            noise_levels: config.noise_levels.clone(),
            seed: config.seed,
            lambda: config.lambda,
            eta: config.eta,
            bandwidth_scale: config.bandwidth_scale,
            methods: config.methods.iter().map(|m| m.label().to_string()).collect(),
            grid: GridDto {
                min_percentile: config.grid.min_percentile,
                max_percentile: config.grid.max_percentile,
                points: config.grid.points,
            },
            std_mode: config.std_mode.label().to_string(),
            treatment_map: match config.treatment_map {
                TreatmentMap::NormalCdf => "normal-cdf".to_string(),
                TreatmentMap::ErrorFunction => "erf".to_string(),
            },
        },
        cells,
        wall_clock_seconds: start.elapsed().as_secs_f64(),
    })
}
