//! Hypothesis tests and effect sizes for comparing per-operator distributions.

use std::f64::consts::{PI, SQRT_2};

use serde::{Deserialize, Serialize};
use statrs::function::erf::erfc;
use thiserror::Error;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StatResult {
    pub statistic: f64,
    pub p_value: f64,
    pub method: String,
}

#[derive(Debug, Error, PartialEq)]
pub enum StatError {
    #[error("need at least {needed} observations, got {got}")]
    TooFew { needed: usize, got: usize },
    #[error("sample has zero variance")]
    Degenerate,
    #[error("sample contains a non-finite value")]
    NonFinite,
}

pub fn normal_cdf(x: f64) -> f64 {
    0.5 * erfc(-x / SQRT_2)
}

pub fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Sample variance (n - 1 denominator).
pub fn variance(xs: &[f64]) -> f64 {
    let m = mean(xs);
    xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (xs.len() as f64 - 1.0)
}

fn check_finite(xs: &[f64]) -> Result<(), StatError> {
    if xs.iter().all(|x| x.is_finite()) {
        Ok(())
    } else {
        Err(StatError::NonFinite)
    }
}

/// Kolmogorov distribution tail `P(K > lambda)`.
pub fn kolmogorov_q(lambda: f64) -> f64 {
    if lambda <= 0.0 {
        return 1.0;
    }
    let q = if lambda < 1.18 {
        // the alternating series converges slowly here; use the dual form
        let y = (-PI * PI / (8.0 * lambda * lambda)).exp();
        let s: f64 = (0..8).map(|j| y.powi((2 * j + 1) * (2 * j + 1))).sum();
        1.0 - (2.0 * PI).sqrt() / lambda * s
    } else {
        let x = (-2.0 * lambda * lambda).exp();
        2.0 * (1..=100)
            .map(|j: i32| {
                let sign = if j % 2 == 1 { 1.0 } else { -1.0 };
                sign * x.powi(j * j)
            })
            .sum::<f64>()
    };
    q.clamp(0.0, 1.0)
}

/// One-sample KS test of normality with mean and standard deviation estimated
/// from the sample. The asymptotic p-value is anti-conservative in that
/// setting (it overstates p).
pub fn ks_normal(sample: &[f64]) -> Result<StatResult, StatError> {
    if sample.len() < 5 {
        return Err(StatError::TooFew {
            needed: 5,
            got: sample.len(),
        });
    }
    check_finite(sample)?;
    let m = mean(sample);
    let sd = variance(sample).sqrt();
    if sd == 0.0 {
        return Err(StatError::Degenerate);
    }
    let mut sorted = sample.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len() as f64;
    let d = sorted
        .iter()
        .enumerate()
        .map(|(i, &x)| {
            let f = normal_cdf((x - m) / sd);
            ((i + 1) as f64 / n - f).max(f - i as f64 / n)
        })
        .fold(0.0, f64::max);
    let sqrt_n = n.sqrt();
    Ok(StatResult {
        statistic: d,
        p_value: kolmogorov_q((sqrt_n + 0.12 + 0.11 / sqrt_n) * d),
        method: "kolmogorov-smirnov (normal, estimated parameters)".into(),
    })
}

/// Midranks (1-based) of the pooled sample, plus the tie-correction term
/// `sum(t^3 - t)` over tie groups.
pub fn midranks(pooled: &[f64]) -> (Vec<f64>, f64) {
    let mut order: Vec<usize> = (0..pooled.len()).collect();
    order.sort_by(|&i, &j| pooled[i].total_cmp(&pooled[j]));
    let mut ranks = vec![0.0; pooled.len()];
    let mut ties = 0.0;
    let mut start = 0;
    while start < order.len() {
        let mut end = start + 1;
        while end < order.len() && pooled[order[end]] == pooled[order[start]] {
            end += 1;
        }
        let rank = (start + end + 1) as f64 / 2.0;
        for &k in &order[start..end] {
            ranks[k] = rank;
        }
        let t = (end - start) as f64;
        ties += t * t * t - t;
        start = end;
    }
    (ranks, ties)
}

/// Sum of the midranks of `a` within `a ∪ b`.
pub fn rank_sum(a: &[f64], b: &[f64]) -> f64 {
    let pooled: Vec<f64> = a.iter().chain(b).copied().collect();
    midranks(&pooled).0[..a.len()].iter().sum()
}

/// Two-sided Wilcoxon rank-sum test, normal approximation with tie and
/// continuity corrections. The statistic is the signed z score: negative
/// when `a` tends to be smaller than `b`.
pub fn wilcoxon_rank_sum(a: &[f64], b: &[f64]) -> Result<StatResult, StatError> {
    for s in [a, b] {
        if s.is_empty() {
            return Err(StatError::TooFew { needed: 1, got: 0 });
        }
        check_finite(s)?;
    }
    let pooled: Vec<f64> = a.iter().chain(b).copied().collect();
    let (ranks, ties) = midranks(&pooled);
    let w: f64 = ranks[..a.len()].iter().sum();
    let (n1, n2) = (a.len() as f64, b.len() as f64);
    let n = n1 + n2;
    let expected = n1 * (n + 1.0) / 2.0;
    let var = n1 * n2 / 12.0 * ((n + 1.0) - ties / (n * (n - 1.0)));
    let diff = w - expected;
    let z = if var <= 0.0 || diff.abs() <= 0.5 {
        0.0
    } else {
        (diff - 0.5 * diff.signum()) / var.sqrt()
    };
    Ok(StatResult {
        statistic: z,
        p_value: (2.0 * normal_cdf(-z.abs())).min(1.0),
        method: "wilcoxon rank-sum (normal approximation)".into(),
    })
}

/// Cohen's d with the n-1 weighted pooled standard deviation.
pub fn cohens_d(a: &[f64], b: &[f64]) -> Result<f64, StatError> {
    for s in [a, b] {
        if s.len() < 2 {
            return Err(StatError::TooFew {
                needed: 2,
                got: s.len(),
            });
        }
        check_finite(s)?;
    }
    let (n1, n2) = (a.len() as f64, b.len() as f64);
    let pooled = ((n1 - 1.0) * variance(a) + (n2 - 1.0) * variance(b)) / (n1 + n2 - 2.0);
    if pooled <= 0.0 {
        return Err(StatError::Degenerate);
    }
    Ok((mean(a) - mean(b)) / pooled.sqrt())
}

/// Conventional magnitude label for |d|.
pub fn effect_size_label(d: f64) -> &'static str {
    match d.abs() {
        x if x < 0.2 => "negligible",
        x if x < 0.5 => "small",
        x if x < 0.8 => "medium",
        _ => "large",
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn normal_cdf_reference_points() {
        assert!((normal_cdf(0.0) - 0.5).abs() < 1e-15);
        let p = normal_cdf(1.959_963_984_540_054);
        assert!((p - 0.975).abs() < 1e-9, "{p}");
        assert!((normal_cdf(-1.0) - 0.158_655_253_931_457_05).abs() < 1e-9);
    }

    #[test]
    fn kolmogorov_branches_agree() {
        // both forms are exact; they must meet at the switch point
        let lambda: f64 = 1.18;
        let x = (-2.0 * lambda * lambda).exp();
        let series: f64 = 2.0 * (1..=100).map(|j: i32| if j % 2 == 1 { x.powi(j * j) } else { -x.powi(j * j) }).sum::<f64>();
        assert!((kolmogorov_q(lambda - 1e-12) - series).abs() < 1e-9);
        // tabulated critical value: Q(1.3581) = 0.05
        assert!((kolmogorov_q(1.3581) - 0.05).abs() < 1e-4);
        assert_eq!(kolmogorov_q(0.0), 1.0);
    }

    #[test]
    fn wilcoxon_extreme_three_by_three() {
        // exact two-sided p is 2/20 = 0.1
        let r = wilcoxon_rank_sum(&[1.0, 2.0, 3.0], &[4.0, 5.0, 6.0]).unwrap();
        assert!((r.p_value - 0.1).abs() < 0.05, "{}", r.p_value);
        assert!(r.statistic < 0.0);
        assert_eq!(rank_sum(&[1.0, 2.0, 3.0], &[4.0, 5.0, 6.0]), 6.0);
    }

    #[test]
    fn wilcoxon_identical_and_symmetric() {
        let a = [1.0, 2.0, 2.0, 5.0];
        assert_eq!(wilcoxon_rank_sum(&a, &a).unwrap().p_value, 1.0);
        let b = [3.0, 4.0, 6.0, 7.0, 7.0];
        let ab = wilcoxon_rank_sum(&a, &b).unwrap();
        let ba = wilcoxon_rank_sum(&b, &a).unwrap();
        assert_eq!(ab.statistic, -ba.statistic);
        assert_eq!(ab.p_value, ba.p_value);
        let all_tied = wilcoxon_rank_sum(&[1.0, 1.0], &[1.0]).unwrap();
        assert_eq!((all_tied.statistic, all_tied.p_value), (0.0, 1.0));
    }

    #[test]
    fn midranks_with_ties() {
        let (r, t) = midranks(&[3.0, 1.0, 3.0, 2.0]);
        assert_eq!(r, vec![3.5, 1.0, 3.5, 2.0]);
        assert_eq!(t, 6.0);
    }

    #[test]
    fn cohens_d_examples() {
        let d = cohens_d(&[2.0, 4.0], &[1.0, 3.0]).unwrap();
        assert!((d - std::f64::consts::FRAC_1_SQRT_2).abs() < 1e-15);
        assert_eq!(cohens_d(&[1.0, 2.0], &[1.0, 2.0]).unwrap(), 0.0);
        assert_eq!(cohens_d(&[1.0, 1.0], &[2.0, 2.0]), Err(StatError::Degenerate));
        assert!(cohens_d(&[1.0], &[2.0, 3.0]).is_err());
        assert_eq!(effect_size_label(0.7), "medium");
        assert_eq!(effect_size_label(-0.9), "large");
    }

    #[test]
    fn ks_rejects_constant_and_short_samples() {
        assert_eq!(ks_normal(&[2.0; 10]), Err(StatError::Degenerate));
        assert!(matches!(ks_normal(&[1.0, 2.0]), Err(StatError::TooFew { .. })));
    }
}
