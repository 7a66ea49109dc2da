use crate::error::{Error, Result};
use crate::types::feature::{dot, l2};
use crate::types::Feature;

const MIN_MEAN_NORM: f64 = 1e-12;

/// Normalized arithmetic mean of the members.
pub fn mean_embedding(members: &[&Feature]) -> Result<Feature> {
    weighted_mean(members.iter().map(|f| (*f, 1.0)))
}

/// Normalized weighted mean.
pub fn weighted_mean<'a>(members: impl IntoIterator<Item = (&'a Feature, f64)>) -> Result<Feature> {
    let mut acc: Vec<f64> = Vec::new();
    let mut any = false;
    for (f, w) in members {
        if acc.is_empty() {
            acc = vec![0.0; f.dim()];
        } else if f.dim() != acc.len() {
            return Err(Error::DimensionMismatch { expected: acc.len(), found: f.dim() });
        }
        any = true;
        acc.iter_mut().zip(f.as_slice()).for_each(|(a, x)| *a += w * x);
    }
    if !any {
        return Err(Error::InvalidConfig("mean of an empty member list".into()));
    }
    let norm = l2(&acc);
    if !(norm >= MIN_MEAN_NORM) {
        return Err(Error::DegenerateNorm { norm });
    }
    Feature::normalized(acc)
}

/// Softmax cross-entropy of `z` against `means[label]` at temperature `tau`.
pub fn contrastive_loss(z: &[f64], label: usize, means: &[Feature], tau: f64) -> f64 {
    loss_terms(z, label, means, tau).0
}

/// Loss and softmax probabilities over the means.
fn loss_terms(z: &[f64], label: usize, means: &[Feature], tau: f64) -> (f64, Vec<f64>) {
    let logits: Vec<f64> = means.iter().map(|m| dot(z, m.as_slice()) / tau).collect();
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|s| (s - max).exp()).collect();
    let sum: f64 = exps.iter().sum();
    let loss = (sum.ln() - (logits[label] - max)).max(0.0);
    (loss, exps.into_iter().map(|e| e / sum).collect())
}

/// `dL/dz = (Σ_j p_j z̄_j − z̄_label) / τ`, with the means held fixed.
pub fn contrastive_gradient(z: &[f64], label: usize, means: &[Feature], tau: f64) -> (f64, Vec<f64>) {
    let (loss, p) = loss_terms(z, label, means, tau);
    let mut g = vec![0.0; z.len()];
    for (pj, m) in p.iter().zip(means) {
        g.iter_mut().zip(m.as_slice()).for_each(|(gi, mi)| *gi += pj * mi);
    }
    g.iter_mut().zip(means[label].as_slice()).for_each(|(gi, mi)| *gi = (*gi - mi) / tau);
    (loss, g)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::types::rng;
    use proptest::prelude::*;

    fn e(dim: usize, axis: usize) -> Feature {
        Feature::basis(dim, axis)
    }

    #[test]
    fn means() {
        let a = e(3, 0);
        assert_eq!(mean_embedding(&[&a]).unwrap(), a);
        assert_eq!(mean_embedding(&[&a, &a]).unwrap(), a);
        let m = mean_embedding(&[&e(3, 0), &e(3, 1)]).unwrap();
        let s = std::f64::consts::FRAC_1_SQRT_2;
        assert!((m.as_slice()[0] - s).abs() < 1e-15 && (m.as_slice()[1] - s).abs() < 1e-15);
        let neg = Feature::from_unit(vec![-1.0, 0.0, 0.0]).unwrap();
        assert!(matches!(mean_embedding(&[&a, &neg]), Err(Error::DegenerateNorm { .. })));
        assert!(mean_embedding(&[]).is_err());
    }

    #[test]
    fn loss_values() {
        let z = e(3, 0);
        assert_eq!(contrastive_loss(z.as_slice(), 0, &[e(3, 1)], 0.07), 0.0);
        let l = contrastive_loss(z.as_slice(), 0, &[e(3, 0), e(3, 1)], 1.0);
        let expected = (1.0 + (-1.0f64).exp()).ln();
        assert!((l - expected).abs() < 1e-12);
        assert!((l - 0.31326).abs() < 1e-5);
        let uniform = contrastive_loss(z.as_slice(), 1, &[e(3, 1), e(3, 2), e(3, 1)], 0.07);
        assert!((uniform - 3f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn single_mean_has_zero_gradient() {
        let (l, g) = contrastive_gradient(e(4, 2).as_slice(), 0, &[e(4, 1)], 0.07);
        assert_eq!(l, 0.0);
        assert!(g.iter().all(|&x| x == 0.0));
    }

    #[test]
    fn extreme_logits_stay_finite() {
        let l = contrastive_loss(e(2, 0).as_slice(), 1, &[e(2, 0), e(2, 1)], 1e-4);
        assert!(l.is_finite() && (l - 1e4).abs() < 1e-6);
    }

    fn unit(seed: u64, dim: usize) -> Feature {
        Feature::random(dim, &mut rng::seeded(seed))
    }

    proptest! {
        #[test]
        fn invariant_under_permuting_other_means(seed in 0u64..10_000, n in 2usize..6) {
            let z = unit(seed, 4);
            let means: Vec<Feature> = (0..n as u64).map(|j| unit(seed * 31 + j + 1, 4)).collect();
            let base = contrastive_loss(z.as_slice(), 0, &means, 0.07);
            let mut rev = means.clone();
            rev[1..].reverse();
            let perm = contrastive_loss(z.as_slice(), 0, &rev, 0.07);
            prop_assert!((base - perm).abs() <= 1e-12 * base.max(1.0));
        }

        #[test]
        fn loss_decreases_as_target_similarity_increases(s in -0.9f64..0.8, ds in 0.01f64..0.1) {
            // Orthonormal means; z has a fixed component on the second mean.
            let means = [e(3, 0), e(3, 1)];
            let at = |t: f64| contrastive_loss(&[t, 0.1, 0.0], 0, &means, 0.07);
            prop_assert!(at(s + ds) < at(s));
        }
    }
}
