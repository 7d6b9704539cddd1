//! Kernel methods for causal dose-response estimation with a single
//! confounding proxy.
//!
//! When an unobserved confounder influences treatment `A` and outcome `Y`
//! but is reflected in one observable proxy `W`, the causal dose-response
//! (structural) function can still be recovered by first learning an
//! outcome bridge `h(a, w)` and then averaging it over the proxy
//! distribution. This crate provides:
//!
//! - [`skpv`] — a two-stage kernel estimator: a vector-valued first-stage
//!   regression of proxy features on (treatment, outcome), then a ridge
//!   fit of the bridge on the projected features.
//! - [`spmmr`] — a one-shot estimator that minimizes a kernelized
//!   maximum-moment-restriction objective.
//! - [`krr`] — plain kernel ridge regression of `Y` on `A`, the
//!   confounded baseline the bridge estimators are measured against.
//! - [`structural`] — collapse of a fitted bridge into a dose-response
//!   curve and curve-level error metrics.
//! - [`synth`] — a reproducible synthetic benchmark with a known
//!   structural function `f(a) = a^2 - 0.3`.
//! - [`data`], [`kernels`], [`linalg`] — datasets with CSV round-tripping,
//!   Gaussian kernels with the median-distance bandwidth heuristic, and
//!   the dense symmetric solvers behind the estimators.
//!
//! All estimators share conventions: Gaussian kernel
//! `exp(-||x - x'||^2 / (2 sigma^2))`, ridge scaling proportional to the
//! relevant sample-size power, and deterministic behavior given explicit
//! seeds.

pub mod data;
pub mod error;
pub mod kernels;
pub mod krr;
pub mod linalg;
pub mod skpv;
pub mod spmmr;
pub mod structural;
pub mod synth;

pub use data::{
    load_stage1_csv, load_stage2_csv, save_stage1_csv, save_stage2_csv, split_stages, Dataset,
    Points, StageSplit, StageTwoDataset,
};
pub use error::{Error, ErrorClass, Result};
pub use kernels::{gaussian_kernel, median_heuristic, Bandwidths};
pub use krr::{fit_krr, KrrModel};
pub use skpv::{fit_skpv, fit_skpv_mastouri, fit_skpv_singh, FactoredBridge, SkpvModel};
pub use spmmr::{fit_spmmr, fit_spmmr_alt, mmr_loss, SpmmrModel};
pub use structural::{
    curve_mse, estimate_structural, structural_curve, BridgeModel, StructuralCurve,
};
pub use synth::{gaussian_cdf, generate, generate_with_latent, true_structural, SynthConfig, TreatmentMap};
