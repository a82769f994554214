//! Laplace residual model over reward sequences: pdf, sequence
//! log-likelihood, mean-absolute-deviation scale estimation, and the
//! scalar uncertainty score consumed by arbitration.

use crate::config::UncertaintyConfig;
use crate::error::{Error, Result};

/// Predicted vs observed reward vectors over a time window.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct RewardSeries {
    pub predicted: Vec<Vec<f64>>,
    pub observed: Vec<Vec<f64>>,
}

impl RewardSeries {
    pub fn validate(&self) -> Result<()> {
        if self.predicted.len() != self.observed.len() {
            return Err(Error::LengthMismatch {
                detail: format!(
                    "predicted has {} steps, observed {}",
                    self.predicted.len(),
                    self.observed.len()
                ),
            });
        }
        if self.predicted.is_empty() {
            return Err(Error::InvalidArgument("series must have T >= 1".into()));
        }
        for (p, o) in self.predicted.iter().zip(&self.observed) {
            if p.len() != o.len() || p.is_empty() {
                return Err(Error::LengthMismatch {
                    detail: "per-step reward dimensions differ or are empty".into(),
                });
            }
        }
        Ok(())
    }

    fn abs_residuals(&self) -> impl Iterator<Item = f64> + '_ {
        self.predicted
            .iter()
            .zip(&self.observed)
            .flat_map(|(p, o)| p.iter().zip(o).map(|(a, b)| (a - b).abs()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LaplaceParams {
    pub b: f64,
}

/// f(x | mu, b) = exp(-|x - mu| / b) / (2b).
pub fn laplace_pdf(x: f64, mu: f64, b: f64) -> Result<f64> {
    if b <= 0.0 {
        return Err(Error::InvalidArgument(format!("scale b must be > 0, got {b}")));
    }
    Ok((-(x - mu).abs() / b).exp() / (2.0 * b))
}

/// Log-likelihood of the residual sequence under a shared scale b:
/// sum over (t, j) of [-log(2b) - |r - r_hat| / b].
pub fn sequence_log_likelihood(series: &RewardSeries, b: f64) -> Result<f64> {
    if b <= 0.0 {
        return Err(Error::InvalidArgument(format!("scale b must be > 0, got {b}")));
    }
    series.validate()?;
    let log_norm = (2.0 * b).ln();
    Ok(series.abs_residuals().map(|r| -log_norm - r / b).sum())
}

/// MLE of the Laplace scale: the mean absolute residual over all (t, j),
/// floored at epsilon_b to avoid a degenerate zero scale.
pub fn estimate_scale_mle(series: &RewardSeries, epsilon_b: f64) -> Result<LaplaceParams> {
    series.validate()?;
    let mut sum = 0.0;
    let mut n = 0usize;
    for r in series.abs_residuals() {
        sum += r;
        n += 1;
    }
    let b = sum / n as f64;
    Ok(LaplaceParams {
        b: if b > epsilon_b { b } else { epsilon_b },
    })
}

/// Interquartile range with linearly interpolated quantiles.
pub fn iqr(values: &[f64]) -> f64 {
    if values.len() < 2 {
        return 0.0;
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let q = |frac: f64| {
        let pos = frac * (sorted.len() - 1) as f64;
        let lo = pos.floor() as usize;
        let hi = pos.ceil() as usize;
        sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - lo as f64)
    };
    q(0.75) - q(0.25)
}

/// Scalar uncertainty: the fitted residual scale plus a spread term over
/// the current candidate rewards, U = b_hat + lambda * IQR(rewards).
pub fn uncertainty_score(
    window: &RewardSeries,
    candidate_rewards: &[f64],
    cfg: &UncertaintyConfig,
) -> Result<f64> {
    let params = estimate_scale_mle(window, cfg.epsilon_b)?;
    Ok(params.b + cfg.lambda_spread * iqr(candidate_rewards))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn series(pred: &[f64], obs: &[f64]) -> RewardSeries {
        RewardSeries {
            predicted: pred.iter().map(|&v| vec![v]).collect(),
            observed: obs.iter().map(|&v| vec![v]).collect(),
        }
    }

    #[test]
    fn pdf_peak_and_shoulder() {
        assert_relative_eq!(laplace_pdf(0.0, 0.0, 1.0).unwrap(), 0.5);
        let shoulder = 1.0 / (2.0 * std::f64::consts::E);
        assert_relative_eq!(laplace_pdf(1.0, 0.0, 1.0).unwrap(), shoulder, epsilon = 1e-12);
        assert_relative_eq!(laplace_pdf(-1.0, 0.0, 1.0).unwrap(), shoulder, epsilon = 1e-12);
        assert!(laplace_pdf(0.0, 0.0, 0.0).is_err());
    }

    /// Simpson quadrature of the pdf over [-span, span].
    fn quadrature_mass(mu: f64, b: f64, span: f64, n: usize) -> f64 {
        let h = 2.0 * span / n as f64;
        let f = |x: f64| laplace_pdf(x, mu, b).unwrap();
        let mut s = f(-span) + f(span);
        for i in 1..n {
            let x = -span + i as f64 * h;
            s += if i % 2 == 1 { 4.0 } else { 2.0 } * f(x);
        }
        s * h / 3.0
    }

    #[test]
    fn pdf_integrates_to_one() {
        assert_relative_eq!(quadrature_mass(0.0, 1.0, 50.0, 200_000), 1.0, epsilon = 1e-9);
        for b in [0.1, 1.0, 10.0] {
            assert_relative_eq!(quadrature_mass(0.3, b, 400.0, 400_000), 1.0, epsilon = 1e-6);
        }
    }

    #[test]
    fn log_likelihood_zero_residual_cases() {
        let s = series(&[0.0], &[0.0]);
        assert_relative_eq!(sequence_log_likelihood(&s, 1.0).unwrap(), 0.5f64.ln(), epsilon = 1e-12);
        // doubling b with zero residuals costs log 2 per (t, j)
        let s3 = series(&[1.0, 2.0, 3.0], &[1.0, 2.0, 3.0]);
        let l1 = sequence_log_likelihood(&s3, 1.0).unwrap();
        let l2 = sequence_log_likelihood(&s3, 2.0).unwrap();
        assert_relative_eq!(l1 - l2, 3.0 * 2.0f64.ln(), epsilon = 1e-12);
    }

    #[test]
    fn log_likelihood_matches_brute_force_product() {
        let s = RewardSeries {
            predicted: vec![vec![0.1, -0.4], vec![1.0, 2.0], vec![-3.0, 0.0]],
            observed: vec![vec![0.3, -0.1], vec![0.5, 2.5], vec![-2.0, 0.7]],
        };
        let b = 0.8;
        let got = sequence_log_likelihood(&s, b).unwrap();
        let mut product = 1.0f64;
        for (p, o) in s.predicted.iter().zip(&s.observed) {
            for (a, x) in p.iter().zip(o) {
                product *= (-(a - x).abs() / b).exp() / (2.0 * b);
            }
        }
        assert_relative_eq!(got, product.ln(), epsilon = 1e-10);
    }

    #[test]
    fn mle_scale_simple_cases() {
        let s = series(&[1.0, 1.0, 1.0], &[0.0, 0.0, 0.0]);
        assert_relative_eq!(estimate_scale_mle(&s, 1e-6).unwrap().b, 1.0);
        let s = series(&[0.0, 2.0], &[0.0, 0.0]);
        assert_relative_eq!(estimate_scale_mle(&s, 1e-6).unwrap().b, 1.0);
        // zero residuals hit the floor
        let s = series(&[5.0], &[5.0]);
        assert_relative_eq!(estimate_scale_mle(&s, 1e-6).unwrap().b, 1e-6);
    }

    proptest! {
        #[test]
        fn mle_is_grid_search_argmax(
            residuals in proptest::collection::vec(0.01..5.0f64, 2..12),
        ) {
            let s = series(&residuals, &vec![0.0; residuals.len()]);
            let b_hat = estimate_scale_mle(&s, 1e-9).unwrap().b;
            // dense grid over a bracketing interval
            let grid_step = 0.001;
            let mut best = (f64::NEG_INFINITY, 0.0);
            let mut b = grid_step;
            while b < 6.0 {
                let ll = sequence_log_likelihood(&s, b).unwrap();
                if ll > best.0 {
                    best = (ll, b);
                }
                b += grid_step;
            }
            prop_assert!((b_hat - best.1).abs() <= grid_step + 1e-9,
                "mle {} vs grid argmax {}", b_hat, best.1);
        }

        #[test]
        fn uncertainty_translation_invariant(
            pred in proptest::collection::vec(-5.0..5.0f64, 1..8),
            shift in -100.0..100.0f64,
        ) {
            let obs: Vec<f64> = pred.iter().map(|v| v * 0.9 + 0.1).collect();
            let cfg = crate::config::UncertaintyConfig::default();
            let base = series(&pred, &obs);
            let shifted = series(
                &pred.iter().map(|v| v + shift).collect::<Vec<_>>(),
                &obs.iter().map(|v| v + shift).collect::<Vec<_>>(),
            );
            let rewards = [1.0, 2.0, 3.0];
            let u1 = uncertainty_score(&base, &rewards, &cfg).unwrap();
            let u2 = uncertainty_score(&shifted, &rewards, &cfg).unwrap();
            prop_assert!((u1 - u2).abs() < 1e-9);
        }
    }

    #[test]
    fn uncertainty_score_cases() {
        let cfg = crate::config::UncertaintyConfig::default();
        // zero residuals, identical candidates: the floor survives
        let s = series(&[1.0, 2.0], &[1.0, 2.0]);
        let u = uncertainty_score(&s, &[3.0, 3.0, 3.0], &cfg).unwrap();
        assert_relative_eq!(u, cfg.epsilon_b);

        // doubling residuals doubles the scale term
        let s1 = series(&[1.0, 2.0], &[0.0, 0.0]);
        let s2 = series(&[2.0, 4.0], &[0.0, 0.0]);
        let b1 = estimate_scale_mle(&s1, cfg.epsilon_b).unwrap().b;
        let b2 = estimate_scale_mle(&s2, cfg.epsilon_b).unwrap().b;
        assert_relative_eq!(b2, 2.0 * b1, epsilon = 1e-12);

        // mixed case matches the hand-composed value
        let rewards = [0.0, 1.0, 2.0, 10.0];
        let u = uncertainty_score(&s1, &rewards, &cfg).unwrap();
        assert_relative_eq!(u, b1 + cfg.lambda_spread * iqr(&rewards), epsilon = 1e-12);
    }

    #[test]
    fn iqr_linear_interpolation() {
        // quartiles of [1, 2, 3, 4]: q25 = 1.75, q75 = 3.25
        assert_relative_eq!(iqr(&[4.0, 1.0, 3.0, 2.0]), 1.5, epsilon = 1e-12);
        assert_eq!(iqr(&[1.0]), 0.0);
    }
}
