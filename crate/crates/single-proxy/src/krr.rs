//! Kernel ridge regression of outcome on treatment.
//!
//! This estimator ignores the proxy entirely, so under confounding it
//! recovers `E[Y | A = a]` rather than the structural effect; it serves as
//! the confounded baseline the bridge estimators are compared against.

use crate::data::Points;
use crate::error::{Error, Result};
use crate::kernels::{gaussian_kernel, gram_sym};
use crate::linalg::solve_psd_vec;

#[derive(Clone, Debug)]
pub struct KrrModel {
    pub anchors: Points,
    pub alpha: Vec<f64>,
    pub bandwidth: f64,
    pub lambda: f64,
}

/// Fits `alpha = (K_AA + n lambda I)^{-1} y`.
pub fn fit_krr(treatments: &Points, outcomes: &[f64], lambda: f64, bandwidth: f64) -> Result<KrrModel> {
    let n = treatments.len();
    if n < 2 {
        return Err(Error::InvalidData(format!(
            "kernel ridge regression needs at least 2 rows, got {n}"
        )));
    }
    if outcomes.len() != n {
        return Err(Error::DimensionMismatch(format!(
            "{n} treatments vs {} outcomes",
            outcomes.len()
        )));
    }
    if !lambda.is_finite() || lambda <= 0.0 {
        return Err(Error::InvalidParameter(format!(
            "lambda must be finite and > 0, got {lambda}"
        )));
    }
    let k = gram_sym(treatments, bandwidth)?;
    let alpha = solve_psd_vec(&k, n as f64 * lambda, outcomes)?;
    Ok(KrrModel {
        anchors: treatments.clone(),
        alpha,
        bandwidth,
        lambda,
    })
}

impl KrrModel {
    /// Predicted conditional mean at treatment `a`.
    pub fn predict(&self, a: &[f64]) -> Result<f64> {
        if a.len() != self.anchors.dim() {
            return Err(Error::DimensionMismatch(format!(
                "treatment of dimension {} vs model dimension {}",
                a.len(),
                self.anchors.dim()
            )));
        }
        let mut acc = 0.0;
        for (i, anchor) in self.anchors.iter_rows().enumerate() {
            acc += self.alpha[i] * gaussian_kernel(anchor, a, self.bandwidth)?;
        }
        Ok(acc)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pts(xs: &[f64]) -> Points {
        Points::from_scalars(xs).unwrap()
    }

    #[test]
    fn duplicate_anchor_closed_form() {
        // Two identical rows with outcome c: K is all-ones, so the prediction
        // at the anchor is c * 2 / (2 + 2 lambda).
        let c = 3.0;
        let lambda = 0.25;
        let m = fit_krr(&pts(&[1.0, 1.0]), &[c, c], lambda, 1.0).unwrap();
        let want = c * 2.0 / (2.0 + 2.0 * lambda);
        let got = m.predict(&[1.0]).unwrap();
        assert!((got - want).abs() < 1e-12, "got {got}, want {want}");
    }

    #[test]
    fn huge_ridge_shrinks_predictions_to_zero() {
        let xs: Vec<f64> = (0..10).map(|i| i as f64 * 0.2).collect();
        let ys: Vec<f64> = xs.iter().map(|x| 1.0 + x).collect();
        let m = fit_krr(&pts(&xs), &ys, 1e6, 0.5).unwrap();
        for x in [-0.5, 0.0, 0.9, 2.0] {
            assert!(m.predict(&[x]).unwrap().abs() < 1e-3);
        }
    }

    #[test]
    fn near_interpolation_at_tiny_ridge() {
        let xs: Vec<f64> = (0..8).map(|i| i as f64 * 0.7).collect();
        let ys: Vec<f64> = xs.iter().map(|x| (x * 1.3).sin()).collect();
        let m = fit_krr(&pts(&xs), &ys, 1e-10, 0.6).unwrap();
        for (x, y) in xs.iter().zip(&ys) {
            assert!((m.predict(&[*x]).unwrap() - y).abs() < 1e-4);
        }
    }

    #[test]
    fn recovers_linear_function_on_hull() {
        // y = 2a sampled on a grid: small ridge and a median-scale bandwidth
        // should track the line well inside the hull.
        let xs: Vec<f64> = (0..20).map(|i| i as f64 / 19.0).collect();
        let ys: Vec<f64> = xs.iter().map(|x| 2.0 * x).collect();
        let sigma = crate::kernels::median_heuristic(&pts(&xs)).unwrap();
        let m = fit_krr(&pts(&xs), &ys, 1e-6, sigma).unwrap();
        for k in 0..50 {
            let a = 0.1 + 0.8 * k as f64 / 49.0;
            assert!(
                (m.predict(&[a]).unwrap() - 2.0 * a).abs() <= 0.05,
                "poor fit at {a}"
            );
        }
    }

    #[test]
    fn zero_alpha_predicts_zero() {
        let mut m = fit_krr(&pts(&[0.0, 1.0]), &[1.0, 2.0], 0.1, 1.0).unwrap();
        m.alpha = vec![0.0, 0.0];
        assert_eq!(m.predict(&[0.3]).unwrap(), 0.0);
    }

    #[test]
    fn agreement_with_generic_dense_solver() {
        // Oracle: LU with partial pivoting on the same normal equations.
        use faer::linalg::solvers::{PartialPivLu, Solve};
        use faer::Mat;

        let xs: Vec<f64> = (0..15).map(|i| (i as f64 * 0.83).sin() * 2.0).collect();
        let ys: Vec<f64> = xs.iter().map(|x| x * x - 1.0).collect();
        let lambda = 1e-3;
        let sigma = 0.8;
        let m = fit_krr(&pts(&xs), &ys, lambda, sigma).unwrap();

        let k = gram_sym(&pts(&xs), sigma).unwrap();
        let n = xs.len();
        let shifted = Mat::from_fn(n, n, |i, j| {
            k.get(i, j) + if i == j { n as f64 * lambda } else { 0.0 }
        });
        let rhs = Mat::from_fn(n, 1, |i, _| ys[i]);
        let lu = PartialPivLu::new(shifted.as_ref());
        let x = lu.solve(rhs.as_ref());
        for i in 0..n {
            assert!(
                (m.alpha[i] - x[(i, 0)]).abs() <= 1e-10 * (1.0 + x[(i, 0)].abs()),
                "coefficient {i} disagrees"
            );
        }
    }

    #[test]
    fn fitted_alpha_minimizes_ridge_objective() {
        // J(alpha) = ||y - K alpha||^2 + n lambda alpha' K alpha must not
        // decrease under random perturbations of the solution.
        let xs: Vec<f64> = (0..12).map(|i| (i as f64 * 1.37).cos()).collect();
        let ys: Vec<f64> = xs.iter().map(|x| 0.5 - x).collect();
        let lambda = 0.01;
        let sigma = 0.7;
        let m = fit_krr(&pts(&xs), &ys, lambda, sigma).unwrap();
        let k = gram_sym(&pts(&xs), sigma).unwrap();
        let n = xs.len();

        let objective = |al: &[f64]| {
            let mut fit = 0.0;
            let mut reg = 0.0;
            for i in 0..n {
                let mut pred = 0.0;
                for (j, &alj) in al.iter().enumerate() {
                    pred += k.get(i, j) * alj;
                }
                fit += (ys[i] - pred).powi(2);
                reg += al[i] * pred;
            }
            fit + n as f64 * lambda * reg
        };
        let at_fit = objective(&m.alpha);
        assert!(at_fit <= objective(&vec![0.0; n]) + 1e-12);

        let mut state = 42u64;
        let mut next = move || {
            state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            (state >> 11) as f64 / (1u64 << 53) as f64 - 0.5
        };
        for _ in 0..100 {
            let perturbed: Vec<f64> = m.alpha.iter().map(|a| a + 0.1 * next()).collect();
            assert!(at_fit <= objective(&perturbed) + 1e-12);
        }
    }

    #[test]
    fn single_row_is_rejected() {
        assert!(fit_krr(&pts(&[1.0]), &[1.0], 0.1, 1.0).is_err());
    }

    #[test]
    fn invalid_lambda_rejected() {
        let p = pts(&[0.0, 1.0]);
        assert!(fit_krr(&p, &[0.0, 1.0], 0.0, 1.0).is_err());
        assert!(fit_krr(&p, &[0.0, 1.0], -0.5, 1.0).is_err());
        assert!(fit_krr(&p, &[0.0, 1.0], f64::NAN, 1.0).is_err());
    }
}
