//! Two-stage kernel estimator of the outcome bridge function.
//!
//! Stage 1 ridge-regresses proxy kernel features on (treatment, outcome)
//! pairs, producing a weight matrix `B` whose column `j` represents the
//! conditional proxy-feature mean at the stage-2 anchor `(a_j, y_j)`. Stage 2
//! solves a ridge system in the induced Gram matrix
//! `M = K_tt ⊙ (B' K_ww B)` for dual coefficients `alpha`, giving the bridge
//! evaluator
//!
//! `h(a, w) = alpha' (k_t(a) ⊙ B' k_w(w))`
//!
//! where `k_t(a)` runs over the `m` stage-2 treatment anchors and `k_w(w)`
//! over the `n` stage-1 proxy anchors.

use crate::data::{Dataset, Points, StageTwoDataset};
use crate::error::{Error, Result};
use crate::kernels::{gaussian_kernel, gram, gram_sym, Bandwidths};
use crate::linalg::{
    hadamard, hadamard_sym, solve_psd, solve_psd_strict, Mat, SymMatrix,
};

/// Bridge model from the two-stage solve.
#[derive(Clone, Debug)]
pub struct SkpvModel {
    /// Stage-1 proxy anchors (`n` rows); the domain of `k_w`.
    pub proxy_anchors: Points,
    /// Stage-2 treatment anchors (`m` rows); the domain of `k_t`.
    pub treatment_anchors: Points,
    /// Stage-1 weight matrix `B`, `n x m`: column `j` holds the proxy
    /// weights representing the conditional feature mean at stage-2 row `j`.
    pub proxy_weights: Mat<f64>,
    /// Stage-2 dual coefficients, length `m`.
    pub alpha: Vec<f64>,
    pub bandwidths: Bandwidths,
    pub lambda: f64,
    pub eta: f64,
}

/// Factored form of the same bridge: an `n x m` coefficient matrix `Gamma`
/// paired with both kernel vectors, `h(a, w) = k_w(w)' Gamma k_t(a)`.
#[derive(Clone, Debug)]
pub struct FactoredBridge {
    pub proxy_anchors: Points,
    pub treatment_anchors: Points,
    pub gamma: Mat<f64>,
    pub bandwidths: Bandwidths,
}

fn check_lambda(name: &str, v: f64) -> Result<()> {
    if !v.is_finite() || v <= 0.0 {
        return Err(Error::InvalidParameter(format!(
            "{name} must be finite and > 0, got {v}"
        )));
    }
    Ok(())
}

fn check_stage_dims(stage1: &Dataset, stage2: &StageTwoDataset) -> Result<()> {
    if stage1.treatments.dim() != stage2.treatments.dim() {
        return Err(Error::DimensionMismatch(format!(
            "stage-1 treatments of dimension {} vs stage-2 of dimension {}",
            stage1.treatments.dim(),
            stage2.treatments.dim()
        )));
    }
    Ok(())
}

/// Stage-1 weights `B = (K_aa ⊙ K_yy + n lambda I)^{-1} (K_at ⊙ K_yt)`,
/// an `n x m` matrix mapping stage-2 anchors to stage-1 proxy weights.
pub fn fit_stage1(
    stage1: &Dataset,
    stage2: &StageTwoDataset,
    lambda: f64,
    bandwidths: &Bandwidths,
) -> Result<Mat<f64>> {
    check_lambda("lambda", lambda)?;
    check_stage_dims(stage1, stage2)?;
    let n = stage1.len() as f64;

    let y1 = Points::from_scalars(&stage1.outcomes)?;
    let y2 = Points::from_scalars(&stage2.outcomes)?;

    let k_aa = gram_sym(&stage1.treatments, bandwidths.treatment)?;
    let k_yy = gram_sym(&y1, bandwidths.outcome)?;
    let g1 = hadamard_sym(&k_aa, &k_yy)?;

    let k_at = gram(&stage1.treatments, &stage2.treatments, bandwidths.treatment)?;
    let k_yt = gram(&y1, &y2, bandwidths.outcome)?;
    let rhs = hadamard(k_at.as_ref(), k_yt.as_ref())?;

    solve_psd(&g1, n * lambda, rhs.as_ref())
}

/// Stage-2 Gram matrix `M = K_tt ⊙ (B' K_ww B)`, symmetrized against
/// roundoff from the triple product.
pub fn stage2_moment_matrix(
    stage1: &Dataset,
    stage2: &StageTwoDataset,
    proxy_weights: &Mat<f64>,
    bandwidths: &Bandwidths,
) -> Result<SymMatrix> {
    let k_tt = gram_sym(&stage2.treatments, bandwidths.treatment)?;
    let k_ww = gram_sym(&stage1.proxies, bandwidths.proxy)?;
    let kb = k_ww.as_ref() * proxy_weights.as_ref();
    let btk_b = proxy_weights.transpose() * kb.as_ref();
    let inner = SymMatrix::symmetrize(btk_b.as_ref())?;
    hadamard_sym(&k_tt, &inner)
}

fn build_model(
    stage1: &Dataset,
    stage2: &StageTwoDataset,
    lambda: f64,
    eta: f64,
    bandwidths: &Bandwidths,
    singh_normal_equations: bool,
) -> Result<SkpvModel> {
    check_lambda("eta", eta)?;
    let b = fit_stage1(stage1, stage2, lambda, bandwidths)?;
    let m_mat = stage2_moment_matrix(stage1, stage2, &b, bandwidths)?;
    let m = stage2.len() as f64;

    let alpha = if singh_normal_equations {
        // (M M + m eta M) alpha = M y: singular whenever M is, which is the
        // instability this variant exists to exhibit. No jitter rescue.
        let mm = m_mat.as_ref() * m_mat.as_ref();
        let system = Mat::from_fn(m_mat.dim(), m_mat.dim(), |i, j| {
            mm[(i, j)] + m * eta * m_mat.get(i, j)
        });
        let system = SymMatrix::symmetrize(system.as_ref())?;
        let rhs = Mat::from_fn(m_mat.dim(), 1, |i, _| {
            (0..m_mat.dim())
                .map(|j| m_mat.get(i, j) * stage2.outcomes[j])
                .sum()
        });
        let x = solve_psd_strict(&system, 0.0, rhs.as_ref())?;
        (0..m_mat.dim()).map(|i| x[(i, 0)]).collect()
    } else {
        let rhs = Mat::from_fn(m_mat.dim(), 1, |i, _| stage2.outcomes[i]);
        let x = solve_psd(&m_mat, m * eta, rhs.as_ref())?;
        (0..m_mat.dim()).map(|i| x[(i, 0)]).collect()
    };

    Ok(SkpvModel {
        proxy_anchors: stage1.proxies.clone(),
        treatment_anchors: stage2.treatments.clone(),
        proxy_weights: b,
        alpha,
        bandwidths: *bandwidths,
        lambda,
        eta,
    })
}

/// Two-stage fit with the ridge-form stage 2:
/// `alpha = (M + m eta I)^{-1} y`.
pub fn fit_skpv(
    stage1: &Dataset,
    stage2: &StageTwoDataset,
    lambda: f64,
    eta: f64,
    bandwidths: &Bandwidths,
) -> Result<SkpvModel> {
    build_model(stage1, stage2, lambda, eta, bandwidths, false)
}

/// Two-stage fit with the normal-equations stage 2:
/// `alpha = (M M + m eta M)^{-1} M y`.
///
/// Algebraically identical to [`fit_skpv`] when `M` is invertible, but the
/// system matrix squares the conditioning of `M` and becomes exactly
/// singular with it, so this form degrades or fails where the ridge form
/// does not.
pub fn fit_skpv_singh(
    stage1: &Dataset,
    stage2: &StageTwoDataset,
    lambda: f64,
    eta: f64,
    bandwidths: &Bandwidths,
) -> Result<SkpvModel> {
    build_model(stage1, stage2, lambda, eta, bandwidths, true)
}

/// Same bridge as [`fit_skpv`] in factored per-pair form:
/// `Gamma[i][j] = B[i][j] * alpha[j]`.
pub fn fit_skpv_mastouri(
    stage1: &Dataset,
    stage2: &StageTwoDataset,
    lambda: f64,
    eta: f64,
    bandwidths: &Bandwidths,
) -> Result<FactoredBridge> {
    let model = fit_skpv(stage1, stage2, lambda, eta, bandwidths)?;
    let n = model.proxy_anchors.len();
    let m = model.treatment_anchors.len();
    let gamma = Mat::from_fn(n, m, |i, j| model.proxy_weights[(i, j)] * model.alpha[j]);
    Ok(FactoredBridge {
        proxy_anchors: model.proxy_anchors,
        treatment_anchors: model.treatment_anchors,
        gamma,
        bandwidths: model.bandwidths,
    })
}

fn check_query(
    a: &[f64],
    w: &[f64],
    treatment_anchors: &Points,
    proxy_anchors: &Points,
) -> Result<()> {
    if a.len() != treatment_anchors.dim() {
        return Err(Error::DimensionMismatch(format!(
            "treatment query of dimension {} vs model dimension {}",
            a.len(),
            treatment_anchors.dim()
        )));
    }
    if w.len() != proxy_anchors.dim() {
        return Err(Error::DimensionMismatch(format!(
            "proxy query of dimension {} vs model dimension {}",
            w.len(),
            proxy_anchors.dim()
        )));
    }
    Ok(())
}

impl SkpvModel {
    /// Bridge value `h(a, w) = alpha' (k_t(a) ⊙ B' k_w(w))`.
    pub fn predict_bridge(&self, a: &[f64], w: &[f64]) -> Result<f64> {
        check_query(a, w, &self.treatment_anchors, &self.proxy_anchors)?;
        let k_w: Vec<f64> = self
            .proxy_anchors
            .iter_rows()
            .map(|row| gaussian_kernel(row, w, self.bandwidths.proxy))
            .collect::<Result<_>>()?;
        let m = self.treatment_anchors.len();
        let mut acc = 0.0;
        for j in 0..m {
            let k_t = gaussian_kernel(self.treatment_anchors.row(j), a, self.bandwidths.treatment)?;
            let u: f64 = (0..self.proxy_anchors.len())
                .map(|i| self.proxy_weights[(i, j)] * k_w[i])
                .sum();
            acc += self.alpha[j] * k_t * u;
        }
        Ok(acc)
    }

    /// Collapses a proxy sample into per-anchor weights `c[j]` such that the
    /// structural estimate at any treatment `a` is
    /// `sum_j c[j] k_t(anchor_j, a)`; exact by bilinearity of the bridge.
    pub fn collapse_proxies(&self, proxies: &Points) -> Result<Vec<f64>> {
        if proxies.is_empty() {
            return Err(Error::InvalidData("empty proxy sample".into()));
        }
        if proxies.dim() != self.proxy_anchors.dim() {
            return Err(Error::DimensionMismatch(format!(
                "proxy sample of dimension {} vs model dimension {}",
                proxies.dim(),
                self.proxy_anchors.dim()
            )));
        }
        let n = self.proxy_anchors.len();
        let p = proxies.len() as f64;
        let mut k_bar = vec![0.0; n];
        for (i, anchor) in self.proxy_anchors.iter_rows().enumerate() {
            let mut acc = 0.0;
            for row in proxies.iter_rows() {
                acc += gaussian_kernel(anchor, row, self.bandwidths.proxy)?;
            }
            k_bar[i] = acc / p;
        }
        let m = self.treatment_anchors.len();
        Ok((0..m)
            .map(|j| {
                let u: f64 = (0..n).map(|i| self.proxy_weights[(i, j)] * k_bar[i]).sum();
                self.alpha[j] * u
            })
            .collect())
    }
}

impl FactoredBridge {
    /// Bridge value `h(a, w) = k_w(w)' Gamma k_t(a)`.
    pub fn predict_bridge(&self, a: &[f64], w: &[f64]) -> Result<f64> {
        check_query(a, w, &self.treatment_anchors, &self.proxy_anchors)?;
        let n = self.proxy_anchors.len();
        let m = self.treatment_anchors.len();
        let k_w: Vec<f64> = self
            .proxy_anchors
            .iter_rows()
            .map(|row| gaussian_kernel(row, w, self.bandwidths.proxy))
            .collect::<Result<_>>()?;
        let mut acc = 0.0;
        for j in 0..m {
            let k_t = gaussian_kernel(self.treatment_anchors.row(j), a, self.bandwidths.treatment)?;
            let col: f64 = (0..n).map(|i| k_w[i] * self.gamma[(i, j)]).sum();
            acc += col * k_t;
        }
        Ok(acc)
    }

    /// Per-anchor structural weights; see [`SkpvModel::collapse_proxies`].
    pub fn collapse_proxies(&self, proxies: &Points) -> Result<Vec<f64>> {
        if proxies.is_empty() {
            return Err(Error::InvalidData("empty proxy sample".into()));
        }
        if proxies.dim() != self.proxy_anchors.dim() {
            return Err(Error::DimensionMismatch(format!(
                "proxy sample of dimension {} vs model dimension {}",
                proxies.dim(),
                self.proxy_anchors.dim()
            )));
        }
        let n = self.proxy_anchors.len();
        let m = self.treatment_anchors.len();
        let p = proxies.len() as f64;
        let mut k_bar = vec![0.0; n];
        for (i, anchor) in self.proxy_anchors.iter_rows().enumerate() {
            let mut acc = 0.0;
            for row in proxies.iter_rows() {
                acc += gaussian_kernel(anchor, row, self.bandwidths.proxy)?;
            }
            k_bar[i] = acc / p;
        }
        Ok((0..m)
            .map(|j| (0..n).map(|i| k_bar[i] * self.gamma[(i, j)]).sum())
            .collect())
    }
}
