//! Gaussian kernel evaluation, Gram matrices, and median-distance bandwidth
//! selection.
//!
//! Kernel convention: `k(x, x') = exp(-||x - x'||^2 / (2 sigma^2))`.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::data::{Dataset, Points};
use crate::error::{Error, Result};
use crate::linalg::{Mat, SymMatrix};

/// Above this many points the median heuristic works on a fixed-seed
/// subsample of this size instead of all `n(n-1)/2` pairs.
pub const MEDIAN_SUBSAMPLE_LIMIT: usize = 2000;

/// Internal seed for the median-heuristic subsample; fixed so bandwidth
/// selection is a pure function of the data.
const MEDIAN_SUBSAMPLE_SEED: u64 = 0x9a2f_11d4_0c65_7be3;

fn check_sigma(sigma: f64) -> Result<()> {
    if !sigma.is_finite() || sigma <= 0.0 {
        return Err(Error::InvalidParameter(format!(
            "kernel bandwidth must be finite and > 0, got {sigma}"
        )));
    }
    Ok(())
}

fn sq_dist(x: &[f64], x2: &[f64]) -> f64 {
    x.iter()
        .zip(x2)
        .map(|(a, b)| {
            let d = a - b;
            d * d
        })
        .sum()
}

/// Gaussian kernel between two points of the same dimension.
pub fn gaussian_kernel(x: &[f64], x2: &[f64], sigma: f64) -> Result<f64> {
    check_sigma(sigma)?;
    if x.len() != x2.len() {
        return Err(Error::DimensionMismatch(format!(
            "kernel arguments of dimension {} and {}",
            x.len(),
            x2.len()
        )));
    }
    Ok((-sq_dist(x, x2) / (2.0 * sigma * sigma)).exp())
}

/// Rectangular Gram matrix `K[i][j] = k(xs[i], xs2[j])`.
pub fn gram(xs: &Points, xs2: &Points, sigma: f64) -> Result<Mat<f64>> {
    check_sigma(sigma)?;
    if xs.dim() != xs2.dim() {
        return Err(Error::DimensionMismatch(format!(
            "gram arguments of dimension {} and {}",
            xs.dim(),
            xs2.dim()
        )));
    }
    let denom = 2.0 * sigma * sigma;
    Ok(Mat::from_fn(xs.len(), xs2.len(), |i, j| {
        (-sq_dist(xs.row(i), xs2.row(j)) / denom).exp()
    }))
}

/// Square Gram matrix of one point set; exactly symmetric with unit diagonal.
pub fn gram_sym(xs: &Points, sigma: f64) -> Result<SymMatrix> {
    check_sigma(sigma)?;
    let denom = 2.0 * sigma * sigma;
    SymMatrix::from_fn(xs.len(), |i, j| {
        if i == j {
            1.0
        } else {
            (-sq_dist(xs.row(i), xs.row(j)) / denom).exp()
        }
    })
}

fn median_of_sorted(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    let k = v.len();
    if k % 2 == 1 {
        v[k / 2]
    } else {
        0.5 * (v[k / 2 - 1] + v[k / 2])
    }
}

/// Median of the nonzero pairwise Euclidean distances of a point set.
///
/// For more than [`MEDIAN_SUBSAMPLE_LIMIT`] points the median is taken over
/// the pairs of a fixed-seed subsample of that size, so the result stays
/// deterministic for a given input.
pub fn median_heuristic(points: &Points) -> Result<f64> {
    if points.len() < 2 {
        return Err(Error::InvalidData(format!(
            "median heuristic needs at least 2 points, got {}",
            points.len()
        )));
    }

    let subsample;
    let view = if points.len() > MEDIAN_SUBSAMPLE_LIMIT {
        let mut rng = ChaCha8Rng::seed_from_u64(MEDIAN_SUBSAMPLE_SEED);
        let mut idx =
            rand::seq::index::sample(&mut rng, points.len(), MEDIAN_SUBSAMPLE_LIMIT).into_vec();
        idx.sort_unstable();
        subsample = points.subset(&idx);
        &subsample
    } else {
        points
    };

    let n = view.len();
    let mut dists = Vec::with_capacity(n * (n - 1) / 2);
    for i in 0..n {
        for j in (i + 1)..n {
            let d = sq_dist(view.row(i), view.row(j)).sqrt();
            if d > 0.0 {
                dists.push(d);
            }
        }
    }
    if dists.is_empty() {
        return Err(Error::InvalidData(
            "median heuristic undefined: all points identical".into(),
        ));
    }
    Ok(median_of_sorted(dists))
}

/// Per-variable Gaussian kernel bandwidths.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Bandwidths {
    pub treatment: f64,
    pub outcome: f64,
    pub proxy: f64,
}

impl Bandwidths {
    pub fn new(treatment: f64, outcome: f64, proxy: f64) -> Result<Self> {
        check_sigma(treatment)?;
        check_sigma(outcome)?;
        check_sigma(proxy)?;
        Ok(Self { treatment, outcome, proxy })
    }

    /// Median-heuristic bandwidth for each variable of `data`, multiplied by
    /// `scale` (for callers whose kernel convention absorbs a constant).
    pub fn median_from_data(data: &Dataset, scale: f64) -> Result<Self> {
        if !scale.is_finite() || scale <= 0.0 {
            return Err(Error::InvalidParameter(format!(
                "bandwidth scale must be finite and > 0, got {scale}"
            )));
        }
        let outcome_points = Points::from_scalars(&data.outcomes)?;
        Bandwidths::new(
            scale * median_heuristic(&data.treatments)?,
            scale * median_heuristic(&outcome_points)?,
            scale * median_heuristic(&data.proxies)?,
        )
    }
}
