//! Maximum-moment-restriction estimator of the outcome bridge function.
//!
//! Minimizes the V-statistic form of the kernelized moment violation
//!
//! `J(h) = (1/n^2) (y - h)' G (y - h) + eta ||h||^2`,  `G = K_aa ⊙ K_yy`,
//!
//! over bridge functions `h(a, w) = sum_i alpha_i k_a(a_i, a) k_w(w_i, w)`
//! anchored at the sample. With `L = K_aa ⊙ K_ww` the minimizer is
//!
//! `alpha = S (S L S + n^2 eta I)^{-1} S y`,  `S = sqrt(G)`,
//!
//! which stays well posed when `L` is ill conditioned; the textbook
//! alternative `alpha = (L G L + n^2 eta L)^{-1} L G y` is provided for
//! comparison and degrades exactly there.

use crate::data::{Dataset, Points};
use crate::error::{Error, Result};
use crate::kernels::{gaussian_kernel, gram_sym, Bandwidths};
use crate::linalg::{hadamard_sym, solve_psd, solve_psd_strict, sqrt_psd, Mat, SymMatrix};

#[derive(Clone, Debug)]
pub struct SpmmrModel {
    /// Treatment anchors (`n` rows).
    pub treatment_anchors: Points,
    /// Proxy anchors (`n` rows).
    pub proxy_anchors: Points,
    /// Dual coefficients, length `n`.
    pub alpha: Vec<f64>,
    pub bandwidths: Bandwidths,
    pub eta: f64,
}

fn check_eta(eta: f64) -> Result<()> {
    if !eta.is_finite() || eta <= 0.0 {
        return Err(Error::InvalidParameter(format!(
            "eta must be finite and > 0, got {eta}"
        )));
    }
    Ok(())
}

/// The anchored-feature Gram `L = K_aa ⊙ K_ww`.
fn feature_gram(data: &Dataset, bandwidths: &Bandwidths) -> Result<SymMatrix> {
    let k_aa = gram_sym(&data.treatments, bandwidths.treatment)?;
    let k_ww = gram_sym(&data.proxies, bandwidths.proxy)?;
    hadamard_sym(&k_aa, &k_ww)
}

/// The moment-weighting Gram `G = K_aa ⊙ K_yy`.
fn moment_gram(data: &Dataset, bandwidths: &Bandwidths) -> Result<SymMatrix> {
    let k_aa = gram_sym(&data.treatments, bandwidths.treatment)?;
    let y = Points::from_scalars(&data.outcomes)?;
    let k_yy = gram_sym(&y, bandwidths.outcome)?;
    hadamard_sym(&k_aa, &k_yy)
}

fn finish(data: &Dataset, alpha: Vec<f64>, bandwidths: &Bandwidths, eta: f64) -> SpmmrModel {
    SpmmrModel {
        treatment_anchors: data.treatments.clone(),
        proxy_anchors: data.proxies.clone(),
        alpha,
        bandwidths: *bandwidths,
        eta,
    }
}

/// Square-root-form fit `alpha = S (S L S + n^2 eta I)^{-1} S y`.
pub fn fit_spmmr(data: &Dataset, eta: f64, bandwidths: &Bandwidths) -> Result<SpmmrModel> {
    check_eta(eta)?;
    let n = data.len();
    let l = feature_gram(data, bandwidths)?;
    let g = moment_gram(data, bandwidths)?;
    let s = sqrt_psd(&g)?;

    let sls = s.as_ref() * l.as_ref() * s.as_ref();
    let system = SymMatrix::symmetrize(sls.as_ref())?;
    let sy = Mat::from_fn(n, 1, |i, _| {
        (0..n).map(|j| s.get(i, j) * data.outcomes[j]).sum()
    });
    let ridge = (n * n) as f64 * eta;
    let z = solve_psd(&system, ridge, sy.as_ref())?;
    let alpha: Vec<f64> = (0..n)
        .map(|i| (0..n).map(|j| s.get(i, j) * z[(j, 0)]).sum())
        .collect();
    Ok(finish(data, alpha, bandwidths, eta))
}

/// Alternative fit `alpha = (L G L + n^2 eta L)^{-1} L G y`.
///
/// Identical to [`fit_spmmr`] whenever `L` is invertible; exactly singular
/// with `L`, so no jitter rescue is applied.
pub fn fit_spmmr_alt(data: &Dataset, eta: f64, bandwidths: &Bandwidths) -> Result<SpmmrModel> {
    check_eta(eta)?;
    let n = data.len();
    let l = feature_gram(data, bandwidths)?;
    let g = moment_gram(data, bandwidths)?;

    let ridge = (n * n) as f64 * eta;
    let lgl = l.as_ref() * g.as_ref() * l.as_ref();
    let system = Mat::from_fn(n, n, |i, j| lgl[(i, j)] + ridge * l.get(i, j));
    let system = SymMatrix::symmetrize(system.as_ref())?;

    let gy: Vec<f64> = (0..n)
        .map(|i| (0..n).map(|j| g.get(i, j) * data.outcomes[j]).sum())
        .collect();
    let rhs = Mat::from_fn(n, 1, |i, _| {
        (0..n).map(|j| l.get(i, j) * gy[j]).sum()
    });
    let x = solve_psd_strict(&system, 0.0, rhs.as_ref())?;
    let alpha = (0..n).map(|i| x[(i, 0)]).collect();
    Ok(finish(data, alpha, bandwidths, eta))
}

/// Moment-violation V-statistic `(1/n^2) (y - h)' G (y - h)` for bridge
/// values `h` at the sample rows.
pub fn mmr_loss(bridge_values: &[f64], data: &Dataset, bandwidths: &Bandwidths) -> Result<f64> {
    let n = data.len();
    if bridge_values.len() != n {
        return Err(Error::DimensionMismatch(format!(
            "{} bridge values vs {n} rows",
            bridge_values.len()
        )));
    }
    let g = moment_gram(data, bandwidths)?;
    let r: Vec<f64> = data
        .outcomes
        .iter()
        .zip(bridge_values)
        .map(|(y, h)| y - h)
        .collect();
    let mut acc = 0.0;
    for i in 0..n {
        for j in 0..n {
            acc += r[i] * g.get(i, j) * r[j];
        }
    }
    Ok(acc / (n * n) as f64)
}

impl SpmmrModel {
    /// Bridge value `h(a, w) = sum_i alpha_i k_a(a_i, a) k_w(w_i, w)`.
    pub fn predict_bridge(&self, a: &[f64], w: &[f64]) -> Result<f64> {
        if a.len() != self.treatment_anchors.dim() {
            return Err(Error::DimensionMismatch(format!(
                "treatment query of dimension {} vs model dimension {}",
                a.len(),
                self.treatment_anchors.dim()
            )));
        }
        if w.len() != self.proxy_anchors.dim() {
            return Err(Error::DimensionMismatch(format!(
                "proxy query of dimension {} vs model dimension {}",
                w.len(),
                self.proxy_anchors.dim()
            )));
        }
        let mut acc = 0.0;
        for i in 0..self.alpha.len() {
            acc += self.alpha[i]
                * gaussian_kernel(self.treatment_anchors.row(i), a, self.bandwidths.treatment)?
                * gaussian_kernel(self.proxy_anchors.row(i), w, self.bandwidths.proxy)?;
        }
        Ok(acc)
    }

    /// Per-anchor structural weights `c[i] = alpha_i * mean_p k_w(w_i, w_p)`;
    /// see `SkpvModel::collapse_proxies` for the contract.
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
        let p = proxies.len() as f64;
        let mut out = Vec::with_capacity(self.alpha.len());
        for (i, anchor) in self.proxy_anchors.iter_rows().enumerate() {
            let mut acc = 0.0;
            for row in proxies.iter_rows() {
                acc += gaussian_kernel(anchor, row, self.bandwidths.proxy)?;
            }
            out.push(self.alpha[i] * acc / p);
        }
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pts(xs: &[f64]) -> Points {
        Points::from_scalars(xs).unwrap()
    }

    fn bw(t: f64, o: f64, p: f64) -> Bandwidths {
        Bandwidths::new(t, o, p).unwrap()
    }

    fn dataset(a: &[f64], y: &[f64], w: &[f64]) -> Dataset {
        Dataset::new(pts(a), y.to_vec(), pts(w)).unwrap()
    }

    fn lcg(seed: u64) -> impl FnMut() -> f64 {
        let mut state = seed;
        move || {
            state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            (state >> 11) as f64 / (1u64 << 53) as f64
        }
    }

    #[test]
    fn single_row_closed_form() {
        // n = 1: all Grams are [1], so alpha = [y / (1 + eta)] in both forms.
        let d = dataset(&[0.4], &[2.0], &[1.3]);
        let eta = 0.5;
        let m = fit_spmmr(&d, eta, &bw(1.0, 1.0, 1.0)).unwrap();
        assert!((m.alpha[0] - 2.0 / 1.5).abs() < 1e-14);
        let h = m.predict_bridge(&[0.4], &[1.3]).unwrap();
        assert!((h - 2.0 / 1.5).abs() < 1e-14);

        let alt = fit_spmmr_alt(&d, eta, &bw(1.0, 1.0, 1.0)).unwrap();
        assert!((alt.alpha[0] - 2.0 / 1.5).abs() < 1e-14);
    }

    #[test]
    fn zero_outcomes_give_zero_bridge() {
        let d = dataset(&[0.0, 1.0, 2.0], &[0.0, 0.0, 0.0], &[0.3, 0.6, 0.9]);
        let m = fit_spmmr(&d, 1e-3, &bw(0.8, 1.0, 0.8)).unwrap();
        assert!(m.alpha.iter().all(|&v| v == 0.0));
        assert_eq!(m.predict_bridge(&[0.7], &[0.5]).unwrap(), 0.0);
    }

    #[test]
    fn sqrt_and_plain_forms_agree_on_distinct_rows() {
        let mut r = lcg(17);
        let a: Vec<f64> = (0..12).map(|_| r() * 3.0 - 1.0).collect();
        let y: Vec<f64> = (0..12).map(|_| r() * 2.0).collect();
        let w: Vec<f64> = (0..12).map(|_| r() * 2.5).collect();
        let d = dataset(&a, &y, &w);
        let bws = bw(0.9, 0.8, 1.1);
        let m1 = fit_spmmr(&d, 1e-3, &bws).unwrap();
        let m2 = fit_spmmr_alt(&d, 1e-3, &bws).unwrap();
        for _ in 0..100 {
            let qa = [r() * 3.0 - 1.0];
            let qw = [r() * 2.5];
            let h1 = m1.predict_bridge(&qa, &qw).unwrap();
            let h2 = m2.predict_bridge(&qa, &qw).unwrap();
            assert!((h1 - h2).abs() <= 1e-6 * (1.0 + h1.abs()), "{h1} vs {h2}");
        }
    }

    #[test]
    fn sqrt_form_survives_duplicated_rows() {
        // Exact duplicates make L singular. The sqrt form must fit; the
        // plain form either fails or achieves no better an objective.
        let a = [0.5, 0.5, 1.5, 2.0, 2.0, 0.9];
        let y = [1.0, 1.0, -0.5, 0.3, 0.3, 0.8];
        let w = [0.2, 0.2, 1.0, 1.4, 1.4, 0.6];
        let d = dataset(&a, &y, &w);
        let bws = bw(0.7, 0.7, 0.7);
        let eta = 1e-6;
        let primary = fit_spmmr(&d, eta, &bws).unwrap();

        let objective = |m: &SpmmrModel| {
            let h: Vec<f64> = (0..d.len())
                .map(|i| {
                    m.predict_bridge(d.treatments.row(i), d.proxies.row(i))
                        .unwrap()
                })
                .collect();
            let l = feature_gram(&d, &bws).unwrap();
            let mut reg = 0.0;
            for i in 0..d.len() {
                for j in 0..d.len() {
                    reg += m.alpha[i] * l.get(i, j) * m.alpha[j];
                }
            }
            mmr_loss(&h, &d, &bws).unwrap() + eta * reg
        };

        match fit_spmmr_alt(&d, eta, &bws) {
            Err(Error::Singular { .. }) => {}
            Ok(alt) => {
                assert!(objective(&primary) <= objective(&alt) + 1e-9);
            }
            Err(e) => panic!("unexpected error {e:?}"),
        }
    }

    #[test]
    fn alpha_minimizes_regularized_moment_objective() {
        // Oracle: gradient descent with exact line search on
        // J(alpha) = (1/n^2)(y - L alpha)' G (y - L alpha) + eta alpha' L alpha.
        let a = [0.0, 0.8, 1.6, 2.4, 3.2];
        let y = [0.5, -0.1, 0.7, 0.2, -0.4];
        let w = [0.1, 0.9, 0.4, 1.7, 1.2];
        let d = dataset(&a, &y, &w);
        let bws = bw(0.8, 0.6, 0.9);
        let eta = 0.02;
        let model = fit_spmmr(&d, eta, &bws).unwrap();

        let n = d.len();
        let l = feature_gram(&d, &bws).unwrap();
        let g = moment_gram(&d, &bws).unwrap();
        let lv = |v: &[f64]| -> Vec<f64> {
            (0..n).map(|i| (0..n).map(|j| l.get(i, j) * v[j]).sum()).collect()
        };
        let gv = |v: &[f64]| -> Vec<f64> {
            (0..n).map(|i| (0..n).map(|j| g.get(i, j) * v[j]).sum()).collect()
        };
        let n2 = (n * n) as f64;
        // grad = (2/n^2) L (G (L alpha - y) + n^2 eta alpha)
        let mut alpha = vec![0.0; n];
        for _ in 0..2_000_000 {
            let la = lv(&alpha);
            let resid: Vec<f64> = (0..n).map(|i| la[i] - y[i]).collect();
            let inner: Vec<f64> = gv(&resid)
                .iter()
                .zip(&alpha)
                .map(|(v, al)| v + n2 * eta * al)
                .collect();
            let g_vec: Vec<f64> = lv(&inner).iter().map(|v| 2.0 / n2 * v).collect();
            let gnorm2: f64 = g_vec.iter().map(|v| v * v).sum();
            if gnorm2 < 1e-30 {
                break;
            }
            let lg = lv(&g_vec);
            let hg_inner: Vec<f64> = gv(&lg)
                .iter()
                .zip(&g_vec)
                .map(|(v, gg)| v + n2 * eta * gg)
                .collect();
            let hg: Vec<f64> = lv(&hg_inner).iter().map(|v| 2.0 / n2 * v).collect();
            let ghg: f64 = g_vec.iter().zip(&hg).map(|(x, z)| x * z).sum();
            let step = gnorm2 / ghg;
            for (ai, gi) in alpha.iter_mut().zip(&g_vec) {
                *ai -= step * gi;
            }
        }
        for (i, (closed, oracle)) in model.alpha.iter().zip(&alpha).enumerate() {
            assert!(
                (closed - oracle).abs() <= 1e-5 * (1.0 + oracle.abs()),
                "coefficient {i}: closed form {closed} vs descent {oracle}"
            );
        }
    }

    #[test]
    fn fitted_objective_beats_perturbations() {
        let mut r = lcg(88);
        let a: Vec<f64> = (0..7).map(|_| r() * 2.0).collect();
        let y: Vec<f64> = (0..7).map(|_| r() - 0.5).collect();
        let w: Vec<f64> = (0..7).map(|_| r() * 2.0).collect();
        let d = dataset(&a, &y, &w);
        let bws = bw(0.8, 0.8, 0.8);
        let eta = 1e-2;
        let model = fit_spmmr(&d, eta, &bws).unwrap();
        let l = feature_gram(&d, &bws).unwrap();

        let objective = |al: &[f64]| {
            let n = d.len();
            let h: Vec<f64> = (0..n)
                .map(|i| (0..n).map(|j| l.get(i, j) * al[j]).sum())
                .collect();
            let mut reg = 0.0;
            for i in 0..n {
                for j in 0..n {
                    reg += al[i] * l.get(i, j) * al[j];
                }
            }
            mmr_loss(&h, &d, &bws).unwrap() + eta * reg
        };
        let at_fit = objective(&model.alpha);
        assert!(at_fit <= objective(&vec![0.0; d.len()]) + 1e-12);
        for _ in 0..100 {
            let perturbed: Vec<f64> = model.alpha.iter().map(|v| v + 0.05 * (r() - 0.5)).collect();
            assert!(at_fit <= objective(&perturbed) + 1e-12);
        }
    }

    #[test]
    fn huge_eta_shrinks_predictions() {
        let mut r = lcg(7);
        let a: Vec<f64> = (0..6).map(|_| r() * 2.0).collect();
        let y: Vec<f64> = (0..6).map(|_| r() * 4.0 - 2.0).collect();
        let w: Vec<f64> = (0..6).map(|_| r()).collect();
        let d = dataset(&a, &y, &w);
        let m = fit_spmmr(&d, 1e9, &bw(1.0, 1.0, 1.0)).unwrap();
        assert!(m.predict_bridge(&[1.0], &[0.5]).unwrap().abs() < 1e-6);
    }

    #[test]
    fn mmr_loss_zero_at_exact_fit_and_matches_loop() {
        let mut r = lcg(55);
        let a: Vec<f64> = (0..9).map(|_| r() * 2.0).collect();
        let y: Vec<f64> = (0..9).map(|_| r() * 3.0).collect();
        let w: Vec<f64> = (0..9).map(|_| r()).collect();
        let d = dataset(&a, &y, &w);
        let bws = bw(0.9, 1.1, 0.7);

        assert_eq!(mmr_loss(&y, &d, &bws).unwrap(), 0.0);

        // Oracle: explicit double loop over kernel products.
        let h: Vec<f64> = (0..9).map(|_| r() * 2.0).collect();
        let got = mmr_loss(&h, &d, &bws).unwrap();
        let mut want = 0.0;
        for i in 0..9 {
            for j in 0..9 {
                let ka = gaussian_kernel(&[a[i]], &[a[j]], bws.treatment).unwrap();
                let ky = gaussian_kernel(&[y[i]], &[y[j]], bws.outcome).unwrap();
                want += (y[i] - h[i]) * ka * ky * (y[j] - h[j]);
            }
        }
        want /= 81.0;
        assert!((got - want).abs() <= 1e-12 * (1.0 + want.abs()));
        assert!(got >= -1e-12);
    }

    #[test]
    fn mmr_loss_single_row() {
        let d = dataset(&[0.1], &[2.0], &[0.5]);
        let v = mmr_loss(&[0.0], &d, &bw(1.0, 1.0, 1.0)).unwrap();
        assert!((v - 4.0).abs() < 1e-14);
    }

    #[test]
    fn mmr_loss_length_mismatch() {
        let d = dataset(&[0.1, 0.2], &[1.0, 2.0], &[0.5, 0.6]);
        assert!(mmr_loss(&[0.0], &d, &bw(1.0, 1.0, 1.0)).is_err());
    }

    #[test]
    fn invalid_eta_rejected() {
        let d = dataset(&[0.1, 0.2], &[1.0, 2.0], &[0.5, 0.6]);
        let bws = bw(1.0, 1.0, 1.0);
        assert!(fit_spmmr(&d, 0.0, &bws).is_err());
        assert!(fit_spmmr(&d, -1.0, &bws).is_err());
        assert!(fit_spmmr_alt(&d, f64::INFINITY, &bws).is_err());
    }
}
