//! Logloss, AUROC and multi-run aggregation.

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::error::{Error, Result};

pub const DEFAULT_LOGLOSS_EPS: f64 = 1e-15;

/// Label used in reports for the interval construction below.
pub const CI_METHOD: &str = "normal approximation: mean +/- z * s / sqrt(n), s = sample std";

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalResult {
    pub logloss: f64,
    /// `None` when the labels are single-class.
    pub auroc: Option<f64>,
    pub n_rows: usize,
}

impl EvalResult {
    pub fn compute(y: &[u8], p: &[f64]) -> Result<Self> {
        let logloss = logloss(y, p, DEFAULT_LOGLOSS_EPS)?;
        let auroc = match auroc(y, p) {
            Ok(v) => Some(v),
            Err(Error::SingleClass) => None,
            Err(e) => return Err(e),
        };
        Ok(EvalResult {
            logloss,
            auroc,
            n_rows: y.len(),
        })
    }
}

fn check_lengths(a: usize, b: usize) -> Result<()> {
    if a != b {
        return Err(Error::LengthMismatch(a, b));
    }
    if a == 0 {
        return Err(Error::EmptyInput);
    }
    Ok(())
}

/// Mean binary cross-entropy with probabilities clipped to `[eps, 1 - eps]`.
pub fn logloss(y: &[u8], p: &[f64], eps: f64) -> Result<f64> {
    check_lengths(y.len(), p.len())?;
    if !(eps > 0.0 && eps < 0.5) {
        return Err(Error::InvalidConfig(format!("eps must be in (0, 0.5), got {eps}")));
    }
    let total: f64 = y
        .iter()
        .zip(p)
        .map(|(&y, &p)| {
            let p = p.clamp(eps, 1.0 - eps);
            if y == 1 {
                -p.ln()
            } else {
                -(1.0 - p).ln()
            }
        })
        .sum();
    Ok(total / y.len() as f64)
}

/// Area under the ROC curve via the Mann-Whitney rank sum, ties at midrank.
pub fn auroc(y: &[u8], scores: &[f64]) -> Result<f64> {
    check_lengths(y.len(), scores.len())?;
    let n_pos = y.iter().filter(|&&v| v == 1).count();
    let n_neg = y.len() - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return Err(Error::SingleClass);
    }
    let mut order: Vec<usize> = (0..y.len()).collect();
    order.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));

    // Work in doubled ranks so midranks stay integral and the result is exact.
    let mut pos_rank_sum2: u128 = 0;
    let mut i = 0;
    while i < order.len() {
        let mut j = i + 1;
        while j < order.len() && scores[order[j]] == scores[order[i]] {
            j += 1;
        }
        // Ranks i+1..=j, midrank*2 = i + 1 + j.
        let midrank2 = (i + 1 + j) as u128;
        let positives = order[i..j].iter().filter(|&&r| y[r] == 1).count() as u128;
        pos_rank_sum2 += midrank2 * positives;
        i = j;
    }
    let n_pos = n_pos as u128;
    // 2U = 2*R_pos - n_pos*(n_pos+1)
    let u2 = pos_rank_sum2 - n_pos * (n_pos + 1);
    Ok(u2 as f64 / (2 * n_pos * n_neg as u128) as f64)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunAggregate {
    pub metric: String,
    pub values: Vec<f64>,
    pub mean: f64,
    pub half_width: f64,
    pub confidence: f64,
    pub n_runs: usize,
}

/// Two-sided normal quantile for `confidence`; 1.959964 at 0.95.
pub fn z_value(confidence: f64) -> f64 {
    let normal = Normal::new(0.0, 1.0).expect("standard normal");
    normal.inverse_cdf(0.5 + confidence / 2.0)
}

/// `mean ± z·s/√n` with `s` the sample standard deviation.
pub fn aggregate_runs(metric: &str, values: &[f64], confidence: f64) -> Result<RunAggregate> {
    if values.len() < 2 {
        return Err(Error::TooFewValues {
            needed: 2,
            got: values.len(),
        });
    }
    if !(confidence > 0.0 && confidence < 1.0) {
        return Err(Error::InvalidConfig(format!(
            "confidence must be in (0, 1), got {confidence}"
        )));
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    let half_width = z_value(confidence) * var.sqrt() / n.sqrt();
    Ok(RunAggregate {
        metric: metric.to_string(),
        values: values.to_vec(),
        mean,
        half_width,
        confidence,
        n_runs: values.len(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn pairwise(y: &[u8], s: &[f64]) -> f64 {
        let mut wins = 0.0;
        let mut pairs = 0.0;
        for i in 0..y.len() {
            for j in 0..y.len() {
                if y[i] == 1 && y[j] == 0 {
                    pairs += 1.0;
                    if s[i] > s[j] {
                        wins += 1.0;
                    } else if s[i] == s[j] {
                        wins += 0.5;
                    }
                }
            }
        }
        wins / pairs
    }

    #[test]
    #[allow(clippy::approx_constant)]
    fn logloss_hand_cases() {
        assert_abs_diff_eq!(logloss(&[1], &[0.5], 1e-15).unwrap(), 0.693147, epsilon = 1e-6);
        assert_abs_diff_eq!(logloss(&[1, 0], &[0.9, 0.2], 1e-15).unwrap(), 0.164252, epsilon = 1e-6);
        let perfect = logloss(&[1, 0, 1], &[1.0, 0.0, 1.0], 1e-15).unwrap();
        assert!(perfect <= -(1.0 - 1e-15f64).ln() + 1e-30);
    }

    #[test]
    fn logloss_errors() {
        assert!(matches!(logloss(&[], &[], 1e-15), Err(Error::EmptyInput)));
        assert!(matches!(
            logloss(&[1], &[0.5, 0.5], 1e-15),
            Err(Error::LengthMismatch(1, 2))
        ));
        assert!(logloss(&[1], &[0.5], 0.7).is_err());
    }

    #[test]
    fn constant_prediction_is_binary_entropy() {
        let y = [1, 0, 0, 1, 1, 0, 0, 0];
        let m = 3.0 / 8.0;
        let entropy = -(m * f64::ln(m) + (1.0 - m) * f64::ln(1.0 - m));
        assert_abs_diff_eq!(logloss(&y, &[m; 8], 1e-15).unwrap(), entropy, epsilon = 1e-12);
    }

    #[test]
    fn auroc_hand_cases() {
        assert_eq!(auroc(&[0, 0, 1, 1], &[0.1, 0.4, 0.35, 0.8]).unwrap(), 0.75);
        assert_eq!(auroc(&[0, 1, 0, 1], &[0.3; 4]).unwrap(), 0.5);
        assert_eq!(auroc(&[0, 1, 0, 1], &[0.1, 0.9, 0.2, 0.8]).unwrap(), 1.0);
        assert!(matches!(auroc(&[1, 1], &[0.1, 0.2]), Err(Error::SingleClass)));
    }

    #[test]
    fn aggregate_examples() {
        let agg = aggregate_runs("auroc", &[0.5; 10], 0.95).unwrap();
        assert_eq!((agg.mean, agg.half_width), (0.5, 0.0));
        let mut values = vec![0.4; 5];
        values.extend([0.6; 5]);
        let agg = aggregate_runs("auroc", &values, 0.95).unwrap();
        assert_abs_diff_eq!(agg.mean, 0.5, epsilon = 1e-12);
        assert_abs_diff_eq!(agg.half_width, 0.06533, epsilon = 1e-5);
        assert_abs_diff_eq!(z_value(0.95), 1.959964, epsilon = 1e-6);
        assert!(aggregate_runs("x", &[1.0], 0.95).is_err());
        assert!(aggregate_runs("x", &[1.0, 2.0], 1.0).is_err());
    }

    proptest! {
        #[test]
        fn rank_auroc_matches_pairwise(
            data in prop::collection::vec((0u8..2, 0u32..20), 2..80)
        ) {
            let y: Vec<u8> = data.iter().map(|d| d.0).collect();
            prop_assume!(y.contains(&0) && y.contains(&1));
            let s: Vec<f64> = data.iter().map(|d| d.1 as f64 / 7.0).collect();
            prop_assert_eq!(auroc(&y, &s).unwrap(), pairwise(&y, &s));
        }

        #[test]
        fn auroc_complement_and_monotone_invariance(
            data in prop::collection::vec((0u8..2, -1e3f64..1e3), 2..60)
        ) {
            let y: Vec<u8> = data.iter().map(|d| d.0).collect();
            prop_assume!(y.contains(&0) && y.contains(&1));
            let s: Vec<f64> = data.iter().map(|d| d.1).collect();
            let mut sorted = s.clone();
            sorted.sort_by(f64::total_cmp);
            prop_assume!(sorted.windows(2).all(|w| w[0] < w[1]));
            let neg: Vec<f64> = s.iter().map(|v| -v).collect();
            let a = auroc(&y, &s).unwrap();
            prop_assert!((a + auroc(&y, &neg).unwrap() - 1.0).abs() < 1e-12);
            let transformed: Vec<f64> = s.iter().map(|v| (v / 100.0).exp() * 3.0 + 1.0).collect();
            prop_assert_eq!(a, auroc(&y, &transformed).unwrap());
        }

        #[test]
        fn aggregate_scales_linearly(values in prop::collection::vec(-10f64..10.0, 2..12), c in -5f64..5.0) {
            let base = aggregate_runs("m", &values, 0.95).unwrap();
            let scaled: Vec<f64> = values.iter().map(|v| v * c).collect();
            let agg = aggregate_runs("m", &scaled, 0.95).unwrap();
            prop_assert!((agg.mean - c * base.mean).abs() < 1e-9);
            prop_assert!((agg.half_width - c.abs() * base.half_width).abs() < 1e-9);
            let min = values.iter().cloned().fold(f64::INFINITY, f64::min);
            let max = values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            prop_assert!(base.mean >= min - 1e-12 && base.mean <= max + 1e-12);
        }
    }
}
