//! Model JSON serialization: every fitted estimator round-trips through a
//! tagged, self-describing file that records anchors, coefficients,
//! hyperparameters, and a content hash of the training data.

use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use single_proxy::kernels::Bandwidths;
use single_proxy::krr::KrrModel;
use single_proxy::linalg::Mat;
use single_proxy::skpv::SkpvModel;
use single_proxy::spmmr::SpmmrModel;
use single_proxy::{Error as CoreError, Points};

use crate::CliError;

/// Row-major point matrix (`values[i * dim + j]` is coordinate `j` of row
/// `i`).
#[derive(Serialize, Deserialize, Clone, Debug)]
pub struct PointsDto {
    pub dim: usize,
    pub values: Vec<f64>,
}

impl PointsDto {
    pub fn from_points(p: &Points) -> Self {
        PointsDto {
            dim: p.dim(),
            values: p.as_slice().to_vec(),
        }
    }

    pub fn into_points(self) -> Result<Points, CoreError> {
        Points::new(self.values, self.dim)
    }
}

/// Row-major dense matrix (`values[i * cols + j]`).
#[derive(Serialize, Deserialize, Clone, Debug)]
pub struct MatDto {
    pub rows: usize,
    pub cols: usize,
    pub values: Vec<f64>,
}

impl MatDto {
    pub fn from_mat(m: &Mat<f64>) -> Self {
        let (rows, cols) = (m.nrows(), m.ncols());
        let mut values = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                values.push(m[(i, j)]);
            }
        }
        MatDto { rows, cols, values }
    }

    pub fn into_mat(self) -> Result<Mat<f64>, CoreError> {
        if self.values.len() != self.rows * self.cols {
            return Err(CoreError::DimensionMismatch(format!(
                "matrix payload of {} values vs {} x {}",
                self.values.len(),
                self.rows,
                self.cols
            )));
        }
        if self.values.iter().any(|v| !v.is_finite()) {
            return Err(CoreError::InvalidData(
                "matrix payload contains a non-finite value".into(),
            ));
        }
        Ok(Mat::from_fn(self.rows, self.cols, |i, j| {
            self.values[i * self.cols + j]
        }))
    }
}

#[derive(Serialize, Deserialize, Clone, Copy, Debug)]
pub struct BandwidthsDto {
    pub treatment: f64,
    pub outcome: f64,
    pub proxy: f64,
}

impl BandwidthsDto {
    pub fn from_core(b: &Bandwidths) -> Self {
        BandwidthsDto {
            treatment: b.treatment,
            outcome: b.outcome,
            proxy: b.proxy,
        }
    }

    pub fn into_core(self) -> Result<Bandwidths, CoreError> {
        Bandwidths::new(self.treatment, self.outcome, self.proxy)
    }
}

/// On-disk model representation, tagged by estimator.
#[derive(Serialize, Deserialize, Clone, Debug)]
#[serde(tag = "method", rename_all = "lowercase")]
pub enum ModelFile {
    Krr {
        treatment_anchors: PointsDto,
        alpha: Vec<f64>,
        bandwidth: f64,
        lambda: f64,
        data_sha256: String,
    },
    Skpv {
        proxy_anchors: PointsDto,
        treatment_anchors: PointsDto,
        /// First-stage weight matrix, one column per treatment anchor.
        proxy_weights: MatDto,
        alpha: Vec<f64>,
        bandwidths: BandwidthsDto,
        lambda: f64,
        eta: f64,
        /// Original row indices of the two stages when the fit used a
        /// sample split; absent when both stages used the full sample.
        #[serde(skip_serializing_if = "Option::is_none")]
        stage1_indices: Option<Vec<usize>>,
        #[serde(skip_serializing_if = "Option::is_none")]
        stage2_indices: Option<Vec<usize>>,
        data_sha256: String,
    },
    Spmmr {
        treatment_anchors: PointsDto,
        proxy_anchors: PointsDto,
        alpha: Vec<f64>,
        bandwidths: BandwidthsDto,
        eta: f64,
        data_sha256: String,
    },
}

/// A model reconstructed into its runtime form.
pub enum RuntimeModel {
    Krr(KrrModel),
    Skpv(SkpvModel),
    Spmmr(SpmmrModel),
}

impl ModelFile {
    pub fn from_krr(model: &KrrModel, data_sha256: String) -> Self {
        ModelFile::Krr {
            treatment_anchors: PointsDto::from_points(&model.anchors),
            alpha: model.alpha.clone(),
            bandwidth: model.bandwidth,
            lambda: model.lambda,
            data_sha256,
        }
    }

    pub fn from_skpv(
        model: &SkpvModel,
        stage1_indices: Option<Vec<usize>>,
        stage2_indices: Option<Vec<usize>>,
        data_sha256: String,
    ) -> Self {
        ModelFile::Skpv {
            proxy_anchors: PointsDto::from_points(&model.proxy_anchors),
            treatment_anchors: PointsDto::from_points(&model.treatment_anchors),
            proxy_weights: MatDto::from_mat(&model.proxy_weights),
            alpha: model.alpha.clone(),
            bandwidths: BandwidthsDto::from_core(&model.bandwidths),
            lambda: model.lambda,
            eta: model.eta,
            stage1_indices,
            stage2_indices,
            data_sha256,
        }
    }

    pub fn from_spmmr(model: &SpmmrModel, data_sha256: String) -> Self {
        ModelFile::Spmmr {
            treatment_anchors: PointsDto::from_points(&model.treatment_anchors),
            proxy_anchors: PointsDto::from_points(&model.proxy_anchors),
            alpha: model.alpha.clone(),
            bandwidths: BandwidthsDto::from_core(&model.bandwidths),
            eta: model.eta,
            data_sha256,
        }
    }

    pub fn data_sha256(&self) -> &str {
        match self {
            ModelFile::Krr { data_sha256, .. }
            | ModelFile::Skpv { data_sha256, .. }
            | ModelFile::Spmmr { data_sha256, .. } => data_sha256,
        }
    }

    pub fn into_runtime(self) -> Result<RuntimeModel, CoreError> {
        match self {
            ModelFile::Krr {
                treatment_anchors,
                alpha,
                bandwidth,
                lambda,
                ..
            } => {
                let anchors = treatment_anchors.into_points()?;
                check_alpha(&alpha, anchors.len())?;
                Ok(RuntimeModel::Krr(KrrModel {
                    anchors,
                    alpha,
                    bandwidth,
                    lambda,
                }))
            }
            ModelFile::Skpv {
                proxy_anchors,
                treatment_anchors,
                proxy_weights,
                alpha,
                bandwidths,
                lambda,
                eta,
                ..
            } => {
                let proxy_anchors = proxy_anchors.into_points()?;
                let treatment_anchors = treatment_anchors.into_points()?;
                let proxy_weights = proxy_weights.into_mat()?;
                check_alpha(&alpha, treatment_anchors.len())?;
                if proxy_weights.nrows() != proxy_anchors.len()
                    || proxy_weights.ncols() != treatment_anchors.len()
                {
                    return Err(CoreError::DimensionMismatch(format!(
                        "weight matrix {} x {} vs {} proxy and {} treatment anchors",
                        proxy_weights.nrows(),
                        proxy_weights.ncols(),
                        proxy_anchors.len(),
                        treatment_anchors.len()
                    )));
                }
                Ok(RuntimeModel::Skpv(SkpvModel {
                    proxy_anchors,
                    treatment_anchors,
                    proxy_weights,
                    alpha,
                    bandwidths: bandwidths.into_core()?,
                    lambda,
                    eta,
                }))
            }
            ModelFile::Spmmr {
                treatment_anchors,
                proxy_anchors,
                alpha,
                bandwidths,
                eta,
                ..
            } => {
                let treatment_anchors = treatment_anchors.into_points()?;
                let proxy_anchors = proxy_anchors.into_points()?;
                check_alpha(&alpha, treatment_anchors.len())?;
                if proxy_anchors.len() != treatment_anchors.len() {
                    return Err(CoreError::DimensionMismatch(format!(
                        "{} proxy anchors vs {} treatment anchors",
                        proxy_anchors.len(),
                        treatment_anchors.len()
                    )));
                }
                Ok(RuntimeModel::Spmmr(SpmmrModel {
                    treatment_anchors,
                    proxy_anchors,
                    alpha,
                    bandwidths: bandwidths.into_core()?,
                    eta,
                }))
            }
        }
    }
}

fn check_alpha(alpha: &[f64], expected: usize) -> Result<(), CoreError> {
    if alpha.len() != expected {
        return Err(CoreError::DimensionMismatch(format!(
            "{} coefficients vs {expected} anchors",
            alpha.len()
        )));
    }
    if alpha.iter().any(|v| !v.is_finite()) {
        return Err(CoreError::InvalidData(
            "coefficients contain a non-finite value".into(),
        ));
    }
    Ok(())
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    let digest = Sha256::digest(bytes);
    digest.iter().map(|b| format!("{b:02x}")).collect()
}

pub fn save_model(path: &Path, model: &ModelFile) -> Result<(), CliError> {
    let mut text = serde_json::to_string_pretty(model).map_err(|e| CliError::Json {
        path: path.to_path_buf(),
        message: e.to_string(),
    })?;
    text.push('\n');
    std::fs::write(path, text).map_err(|e| CliError::Io {
        path: path.to_path_buf(),
        message: e.to_string(),
    })
}

pub fn load_model(path: &Path) -> Result<ModelFile, CliError> {
    let bytes = std::fs::read(path).map_err(|e| CliError::Io {
        path: path.to_path_buf(),
        message: e.to_string(),
    })?;
    serde_json::from_slice(&bytes).map_err(|e| CliError::Json {
        path: path.to_path_buf(),
        message: e.to_string(),
    })
}
