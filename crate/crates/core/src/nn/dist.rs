//! Action distributions over network outputs.

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

const LN_2PI: f64 = 1.837_877_066_409_345_3;

pub fn log_softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let lse = max + logits.iter().map(|l| (l - max).exp()).sum::<f64>().ln();
    logits.iter().map(|l| l - lse).collect()
}

pub fn softmax(logits: &[f64]) -> Vec<f64> {
    log_softmax(logits).into_iter().map(f64::exp).collect()
}

pub fn entropy(logits: &[f64]) -> f64 {
    let lp = log_softmax(logits);
    -lp.iter().map(|l| l.exp() * l).sum::<f64>()
}

/// KL(p || q) for two categorical distributions given as logits.
pub fn categorical_kl(p_logits: &[f64], q_logits: &[f64]) -> f64 {
    let lp = log_softmax(p_logits);
    let lq = log_softmax(q_logits);
    lp.iter().zip(&lq).map(|(a, b)| a.exp() * (a - b)).sum()
}

pub fn sample_categorical<R: Rng + ?Sized>(probs: &[f64], rng: &mut R) -> usize {
    let u: f64 = rng.random();
    let mut acc = 0.0;
    for (i, p) in probs.iter().enumerate() {
        acc += p;
        if u < acc {
            return i;
        }
    }
    probs.len() - 1
}

/// Index of the largest value; ties go to the lowest index.
pub fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, v) in values.iter().enumerate() {
        if *v > values[best] {
            best = i;
        }
    }
    best
}

pub fn gaussian_log_prob(x: &[f64], mean: &[f64], log_std: &[f64]) -> f64 {
    x.iter()
        .zip(mean)
        .zip(log_std)
        .map(|((x, m), s)| {
            let z = (x - m) / s.exp();
            -0.5 * z * z - s - 0.5 * LN_2PI
        })
        .sum()
}

pub fn gaussian_entropy(log_std: &[f64]) -> f64 {
    log_std.iter().map(|s| s + 0.5 * (1.0 + LN_2PI)).sum()
}

pub fn sample_gaussian<R: Rng + ?Sized>(mean: &[f64], log_std: &[f64], rng: &mut R) -> Vec<f64> {
    mean.iter()
        .zip(log_std)
        .map(|(m, s)| {
            let n: f64 = StandardNormal.sample(rng);
            m + s.exp() * n
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn uniform_logits() {
        let p = softmax(&[0.0; 9]);
        assert!(p.iter().all(|v| (v - 1.0 / 9.0).abs() < 1e-15));
        assert!((entropy(&[0.0; 9]) - 9f64.ln()).abs() < 1e-12);
        assert_eq!(categorical_kl(&[0.0; 9], &[0.0; 9]), 0.0);
    }

    #[test]
    fn argmax_prefers_lowest_index() {
        assert_eq!(argmax(&[1.0, 3.0, 3.0, 2.0]), 1);
    }

    #[test]
    fn standard_normal_log_density_at_zero() {
        let lp = gaussian_log_prob(&[0.0], &[0.0], &[0.0]);
        assert!((lp - (-(2.0 * std::f64::consts::PI).sqrt().ln())).abs() < 1e-12);
    }

    proptest! {
        #[test]
        fn softmax_sums_to_one(logits in prop::collection::vec(-500.0f64..500.0, 1..12)) {
            let p = softmax(&logits);
            prop_assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-9);
            prop_assert!(p.iter().all(|v| *v >= 0.0 && v.is_finite()));
        }

        #[test]
        fn kl_is_non_negative(a in prop::collection::vec(-5.0f64..5.0, 4), b in prop::collection::vec(-5.0f64..5.0, 4)) {
            prop_assert!(categorical_kl(&a, &b) >= -1e-12);
        }
    }
}
