//! Dose-response recovery from a fitted bridge function.
//!
//! Given a bridge `h(a, w)` and a sample of proxy values, the structural
//! function is estimated by averaging the bridge over the proxies:
//!
//! `f(a) = (1/P) sum_p h(a, w_p)`.
//!
//! Every estimator here represents `h` with a treatment-kernel expansion,
//! so the proxy average collapses once into per-anchor weights
//! (`structural_weights`) and each evaluation of `f` costs one kernel pass
//! over the anchors instead of a pass over anchors × proxies.

use crate::data::Points;
use crate::error::{Error, Result};
use crate::kernels::gaussian_kernel;
use crate::skpv::{FactoredBridge, SkpvModel};
use crate::spmmr::SpmmrModel;

/// A fitted bridge whose proxy average reduces to a weighted sum of
/// treatment-kernel evaluations at the training anchors.
pub trait BridgeModel {
    /// Bridge value `h(a, w)`.
    fn bridge_value(&self, a: &[f64], w: &[f64]) -> Result<f64>;
    /// Weights `c` with `(1/P) sum_p h(a, w_p) = sum_j c_j k(t_j, a)`.
    fn structural_weights(&self, proxies: &Points) -> Result<Vec<f64>>;
    /// The treatment anchors `t_j` paired with [`structural_weights`].
    ///
    /// [`structural_weights`]: BridgeModel::structural_weights
    fn treatment_anchors(&self) -> &Points;
    /// Bandwidth of the treatment kernel in the expansion.
    fn treatment_bandwidth(&self) -> f64;
}

impl BridgeModel for SkpvModel {
    fn bridge_value(&self, a: &[f64], w: &[f64]) -> Result<f64> {
        self.predict_bridge(a, w)
    }
    fn structural_weights(&self, proxies: &Points) -> Result<Vec<f64>> {
        self.collapse_proxies(proxies)
    }
    fn treatment_anchors(&self) -> &Points {
        &self.treatment_anchors
    }
    fn treatment_bandwidth(&self) -> f64 {
        self.bandwidths.treatment
    }
}

impl BridgeModel for FactoredBridge {
    fn bridge_value(&self, a: &[f64], w: &[f64]) -> Result<f64> {
        self.predict_bridge(a, w)
    }
    fn structural_weights(&self, proxies: &Points) -> Result<Vec<f64>> {
        self.collapse_proxies(proxies)
    }
    fn treatment_anchors(&self) -> &Points {
        &self.treatment_anchors
    }
    fn treatment_bandwidth(&self) -> f64 {
        self.bandwidths.treatment
    }
}

impl BridgeModel for SpmmrModel {
    fn bridge_value(&self, a: &[f64], w: &[f64]) -> Result<f64> {
        self.predict_bridge(a, w)
    }
    fn structural_weights(&self, proxies: &Points) -> Result<Vec<f64>> {
        self.collapse_proxies(proxies)
    }
    fn treatment_anchors(&self) -> &Points {
        &self.treatment_anchors
    }
    fn treatment_bandwidth(&self) -> f64 {
        self.bandwidths.treatment
    }
}

fn weighted_kernel_sum(
    model: &(impl BridgeModel + ?Sized),
    weights: &[f64],
    a: &[f64],
) -> Result<f64> {
    let anchors = model.treatment_anchors();
    let mut acc = 0.0;
    for (j, anchor) in anchors.iter_rows().enumerate() {
        acc += weights[j] * gaussian_kernel(anchor, a, model.treatment_bandwidth())?;
    }
    if !acc.is_finite() {
        return Err(Error::NonFinite("structural-function evaluation".into()));
    }
    Ok(acc)
}

/// Structural-function estimate `f(a) = (1/P) sum_p h(a, w_p)`.
pub fn estimate_structural(
    model: &(impl BridgeModel + ?Sized),
    a: &[f64],
    proxies: &Points,
) -> Result<f64> {
    let weights = model.structural_weights(proxies)?;
    weighted_kernel_sum(model, &weights, a)
}

/// A dose-response curve evaluated on a scalar treatment grid.
#[derive(Clone, Debug, PartialEq)]
pub struct StructuralCurve {
    pub grid: Vec<f64>,
    pub values: Vec<f64>,
}

/// Evaluates the structural function on a strictly increasing scalar grid,
/// collapsing the proxy average once for the whole curve.
pub fn structural_curve(
    model: &(impl BridgeModel + ?Sized),
    grid: &[f64],
    proxies: &Points,
) -> Result<StructuralCurve> {
    if model.treatment_anchors().dim() != 1 {
        return Err(Error::InvalidParameter(format!(
            "structural curves require scalar treatments, got dimension {}",
            model.treatment_anchors().dim()
        )));
    }
    if grid.is_empty() {
        return Err(Error::InvalidParameter("empty treatment grid".into()));
    }
    for pair in grid.windows(2) {
        // Negated comparison so NaN grid points are rejected too.
        #[allow(clippy::neg_cmp_op_on_partial_ord)]
        if !(pair[1] > pair[0]) {
            return Err(Error::InvalidParameter(format!(
                "treatment grid must be strictly increasing, got {} then {}",
                pair[0], pair[1]
            )));
        }
    }
    if grid.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidParameter(
            "treatment grid contains a non-finite value".into(),
        ));
    }
    let weights = model.structural_weights(proxies)?;
    let values = grid
        .iter()
        .map(|&a| weighted_kernel_sum(model, &weights, &[a]))
        .collect::<Result<Vec<f64>>>()?;
    Ok(StructuralCurve {
        grid: grid.to_vec(),
        values,
    })
}

/// Mean squared difference between two aligned curves.
pub fn curve_mse(estimates: &[f64], truth: &[f64]) -> Result<f64> {
    if estimates.len() != truth.len() {
        return Err(Error::DimensionMismatch(format!(
            "{} estimates vs {} reference values",
            estimates.len(),
            truth.len()
        )));
    }
    if estimates.is_empty() {
        return Err(Error::InvalidParameter("empty curves".into()));
    }
    let sum: f64 = estimates
        .iter()
        .zip(truth)
        .map(|(e, t)| (e - t) * (e - t))
        .sum();
    Ok(sum / estimates.len() as f64)
}
