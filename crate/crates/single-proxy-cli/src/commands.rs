//! Implementations of the four subcommands.

use std::fs;
use std::io::Write as _;
use std::path::Path;

use single_proxy::data::{load_stage1_csv, load_stage2_csv, save_stage1_csv, split_stages};
use single_proxy::kernels::{median_heuristic, Bandwidths};
use single_proxy::krr::fit_krr;
use single_proxy::skpv::fit_skpv;
use single_proxy::spmmr::fit_spmmr;
use single_proxy::structural::{curve_mse, structural_curve, BridgeModel};
use single_proxy::synth::{generate_with_latent, true_structural, SynthConfig};
use single_proxy::{Dataset, Points};

use crate::args::{
    BenchmarkArgs, EvaluateArgs, FitArgs, MethodArg, SimulateArgs, TruthArg,
};
use crate::bench::{run_benchmark, BenchmarkConfig, GridSpec, Method, StdMode};
use crate::model_io::{load_model, save_model, sha256_hex, ModelFile, RuntimeModel};
use crate::CliError;

pub fn cmd_simulate(args: &SimulateArgs) -> Result<(), CliError> {
    let config = SynthConfig {
        samples: args.n,
        noise: args.noise,
        seed: args.seed,
        treatment_map: args.treatment_map.to_core(),
    };
    let (data, latents) = generate_with_latent(&config)?;
    let latent_col = args.debug_u.then_some(latents.as_slice());
    save_stage1_csv(&args.out, &data, latent_col)?;
    Ok(())
}

/// Reads the file once for both hashing and parsing decisions.
struct LoadedData {
    sha256: String,
    /// Full dataset when the file has proxy columns.
    stage1: Option<Dataset>,
    treatments: Points,
    outcomes: Vec<f64>,
}

fn read_data(path: &Path) -> Result<LoadedData, CliError> {
    let bytes = fs::read(path).map_err(|e| CliError::Io {
        path: path.to_path_buf(),
        message: e.to_string(),
    })?;
    let sha256 = sha256_hex(&bytes);
    let header = bytes
        .split(|&b| b == b'\n')
        .next()
        .unwrap_or_default();
    let header = String::from_utf8_lossy(header);
    let has_proxies = header
        .split(',')
        .map(|name| name.trim())
        .any(|name| name == "w" || (name.starts_with('w') && name[1..].chars().all(|c| c.is_ascii_digit()) && name.len() > 1));
    if has_proxies {
        let data = load_stage1_csv(path)?;
        Ok(LoadedData {
            sha256,
            treatments: data.treatments.clone(),
            outcomes: data.outcomes.clone(),
            stage1: Some(data),
        })
    } else {
        let data = load_stage2_csv(path)?;
        Ok(LoadedData {
            sha256,
            treatments: data.treatments,
            outcomes: data.outcomes,
            stage1: None,
        })
    }
}

fn resolve_bandwidths(args: &FitArgs, data: &Dataset) -> Result<Bandwidths, CliError> {
    check_scale(args.bandwidth_scale)?;
    let treatment = match args.bandwidth_a {
        Some(v) => v,
        None => args.bandwidth_scale * median_heuristic(&data.treatments)?,
    };
    let outcome = match args.bandwidth_y {
        Some(v) => v,
        None => args.bandwidth_scale * median_heuristic(&Points::from_scalars(&data.outcomes)?)?,
    };
    let proxy = match args.bandwidth_w {
        Some(v) => v,
        None => args.bandwidth_scale * median_heuristic(&data.proxies)?,
    };
    Ok(Bandwidths::new(treatment, outcome, proxy)?)
}

fn check_scale(scale: f64) -> Result<(), CliError> {
    if !scale.is_finite() || scale <= 0.0 {
        return Err(CliError::Usage(format!(
            "--bandwidth-scale must be finite and > 0, got {scale}"
        )));
    }
    Ok(())
}

pub fn cmd_fit(args: &FitArgs) -> Result<(), CliError> {
    if args.split.is_some() && args.method != MethodArg::Skpv {
        return Err(CliError::Usage(
            "--split only applies to the two-stage method (--method skpv)".into(),
        ));
    }
    let loaded = read_data(&args.data)?;
    let model_file = match args.method {
        MethodArg::Krr => {
            check_scale(args.bandwidth_scale)?;
            let bandwidth = match args.bandwidth_a {
                Some(v) => v,
                None => args.bandwidth_scale * median_heuristic(&loaded.treatments)?,
            };
            let model = fit_krr(&loaded.treatments, &loaded.outcomes, args.lambda, bandwidth)?;
            ModelFile::from_krr(&model, loaded.sha256)
        }
        MethodArg::Skpv => {
            let data = loaded.stage1.as_ref().ok_or_else(stage1_required)?;
            let bandwidths = resolve_bandwidths(args, data)?;
            match args.split {
                Some(fraction) => {
                    let split = split_stages(data, fraction, args.seed)?;
                    let model =
                        fit_skpv(&split.stage1, &split.stage2, args.lambda, args.eta, &bandwidths)?;
                    ModelFile::from_skpv(
                        &model,
                        Some(split.stage1_indices),
                        Some(split.stage2_indices),
                        loaded.sha256,
                    )
                }
                None => {
                    let model =
                        fit_skpv(data, &data.stage_two(), args.lambda, args.eta, &bandwidths)?;
                    ModelFile::from_skpv(&model, None, None, loaded.sha256)
                }
            }
        }
        MethodArg::Spmmr => {
            let data = loaded.stage1.as_ref().ok_or_else(stage1_required)?;
            let bandwidths = resolve_bandwidths(args, data)?;
            let model = fit_spmmr(data, args.eta, &bandwidths)?;
            ModelFile::from_spmmr(&model, loaded.sha256)
        }
    };
    save_model(&args.out, &model_file)
}

fn stage1_required() -> CliError {
    CliError::Core(single_proxy::Error::InvalidData(
        "this method needs proxy columns (w) in the data file".into(),
    ))
}

pub fn cmd_evaluate(args: &EvaluateArgs) -> Result<(), CliError> {
    let model = load_model(&args.model)?.into_runtime()?;
    let loaded = read_data(&args.data)?;

    if loaded.treatments.dim() != 1 {
        return Err(CliError::Core(single_proxy::Error::InvalidParameter(
            "curve evaluation needs scalar treatments".into(),
        )));
    }
    if args.grid_points < 2 {
        return Err(CliError::Usage(format!(
            "--grid-points must be >= 2, got {}",
            args.grid_points
        )));
    }
    let mut sorted = loaded.treatments.as_slice().to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let min = match args.grid_min {
        Some(v) => v,
        None => crate::bench::percentile(&sorted, 2.5),
    };
    let max = match args.grid_max {
        Some(v) => v,
        None => crate::bench::percentile(&sorted, 97.5),
    };
    if !(min.is_finite() && max.is_finite() && max > min) {
        return Err(CliError::Usage(format!(
            "grid range must satisfy min < max, got {min} and {max}"
        )));
    }
    let grid = crate::bench::linspace(min, max, args.grid_points);

    let estimates: Vec<f64> = match &model {
        RuntimeModel::Krr(m) => grid
            .iter()
            .map(|&a| m.predict(&[a]))
            .collect::<single_proxy::Result<_>>()?,
        RuntimeModel::Skpv(m) => bridge_curve(m, &grid, &loaded)?,
        RuntimeModel::Spmmr(m) => bridge_curve(m, &grid, &loaded)?,
    };

    let truth: Option<Vec<f64>> = match args.truth {
        TruthArg::None => None,
        TruthArg::Synthetic => Some(grid.iter().map(|&a| true_structural(a)).collect()),
    };

    let mut out = String::new();
    match &truth {
        None => {
            out.push_str("a,f_hat\n");
            for (a, f) in grid.iter().zip(&estimates) {
                out.push_str(&format!("{a},{f}\n"));
            }
        }
        Some(truth) => {
            out.push_str("a,f_hat,f_true\n");
            for ((a, f), t) in grid.iter().zip(&estimates).zip(truth) {
                out.push_str(&format!("{a},{f},{t}\n"));
            }
        }
    }
    fs::write(&args.out, out).map_err(|e| CliError::Io {
        path: args.out.clone(),
        message: e.to_string(),
    })?;

    if let Some(truth) = truth {
        let mse = curve_mse(&estimates, &truth)?;
        let mut stdout = std::io::stdout().lock();
        let _ = writeln!(stdout, "mse {mse}");
    }
    Ok(())
}

fn bridge_curve(
    model: &impl BridgeModel,
    grid: &[f64],
    loaded: &LoadedData,
) -> Result<Vec<f64>, CliError> {
    let data = loaded.stage1.as_ref().ok_or_else(stage1_required)?;
    Ok(structural_curve(model, grid, &data.proxies)?.values)
}

pub fn cmd_benchmark(args: &BenchmarkArgs) -> Result<(), CliError> {
    check_scale(args.bandwidth_scale)?;
    let mut methods = Vec::new();
    for &m in &args.methods {
        let method = match m {
            crate::args::BenchMethodArg::Regression | crate::args::BenchMethodArg::Krr => {
                Method::Regression
            }
            crate::args::BenchMethodArg::Skpv => Method::Skpv,
            crate::args::BenchMethodArg::Spmmr => Method::Spmmr,
        };
        if !methods.contains(&method) {
            methods.push(method);
        }
    }
    let config = BenchmarkConfig {
        samples: args.n,
        replications: args.reps,
        noise_levels: args.noise.clone(),
        seed: args.seed,
        lambda: args.lambda,
        eta: args.eta,
        bandwidth_scale: args.bandwidth_scale,
        methods,
        grid: GridSpec {
            min_percentile: args.grid_min_percentile,
            max_percentile: args.grid_max_percentile,
            points: args.grid_points,
        },
        std_mode: match args.std {
            crate::args::StdModeArg::Se => StdMode::StandardError,
            crate::args::StdModeArg::Raw => StdMode::Raw,
        },
        treatment_map: args.treatment_map.to_core(),
        parallelism: args.parallelism,
    };
    let report = run_benchmark(&config)?;
    let mut text = serde_json::to_string_pretty(&report).map_err(|e| CliError::Json {
        path: args.out.clone(),
        message: e.to_string(),
    })?;
    text.push('\n');
    fs::write(&args.out, text).map_err(|e| CliError::Io {
        path: args.out.clone(),
        message: e.to_string(),
    })
}
