//! Contrastive embedding tables: one learnable unit vector per pixel group,
//! trained so that groups sharing a label agree with their label's mean
//! embedding and disagree with the other labels of the same scene.

mod loss;
mod table;

pub use loss::{contrastive_gradient, contrastive_loss, mean_embedding, weighted_mean};
pub use table::{EmbeddingTable, GroupKey};

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::types::Feature;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EmbedConfig {
    pub epochs: usize,
    pub lr: f64,
    pub tau: f64,
}

impl Default for EmbedConfig {
    fn default() -> Self {
        Self { epochs: 50, lr: 0.5, tau: 0.07 }
    }
}

impl EmbedConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.tau > 0.0 && self.tau.is_finite()) {
            return Err(Error::InvalidConfig(format!("tau = {} must be positive", self.tau)));
        }
        if !(self.lr > 0.0 && self.lr.is_finite()) {
            return Err(Error::InvalidConfig(format!("lr = {} must be positive", self.lr)));
        }
        Ok(())
    }
}

/// A pixel group taking part in training: its row, its label within the
/// scene, and its weight (pixel count).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Anchor {
    pub key: GroupKey,
    pub label: usize,
    pub weight: f64,
}

/// All anchors of one scene together with the label means computed from the
/// table at construction time.
#[derive(Clone, Debug, PartialEq)]
pub struct ContrastiveBatch {
    pub anchors: Vec<Anchor>,
    /// Distinct labels in ascending order; `means[j]` belongs to `labels[j]`.
    pub labels: Vec<usize>,
    pub means: Vec<Feature>,
}

impl ContrastiveBatch {
    pub fn new(anchors: Vec<Anchor>, table: &EmbeddingTable) -> Result<Self> {
        if anchors.is_empty() {
            return Err(Error::InvalidConfig("batch without anchors".into()));
        }
        let mut groups: BTreeMap<usize, Vec<(&Feature, f64)>> = BTreeMap::new();
        for a in &anchors {
            if !(a.weight > 0.0 && a.weight.is_finite()) {
                return Err(Error::InvalidConfig(format!("anchor {} has weight {}", a.key, a.weight)));
            }
            groups.entry(a.label).or_default().push((table.require(&a.key)?, a.weight));
        }
        let labels: Vec<usize> = groups.keys().copied().collect();
        let means = groups.into_values().map(weighted_mean).collect::<Result<Vec<_>>>()?;
        Ok(Self { anchors, labels, means })
    }

    fn label_index(&self, label: usize) -> usize {
        self.labels.binary_search(&label).expect("label present by construction")
    }

    /// Weighted mean loss over the anchors.
    pub fn loss(&self, table: &EmbeddingTable, tau: f64) -> Result<f64> {
        Ok(self.loss_and_gradient(table, tau)?.0)
    }

    /// Weighted mean loss and its gradient with respect to every anchor row,
    /// means held constant. Keys are returned in ascending order.
    pub fn loss_and_gradient(&self, table: &EmbeddingTable, tau: f64) -> Result<(f64, Vec<(GroupKey, Vec<f64>)>)> {
        let total: f64 = self.anchors.iter().map(|a| a.weight).sum();
        let mut loss = 0.0;
        let mut grads: BTreeMap<GroupKey, Vec<f64>> = BTreeMap::new();
        for a in &self.anchors {
            let z = table.require(&a.key)?;
            let (l, g) = contrastive_gradient(z.as_slice(), self.label_index(a.label), &self.means, tau);
            loss += a.weight * l;
            let w = a.weight / total;
            let acc = grads.entry(a.key).or_insert_with(|| vec![0.0; g.len()]);
            acc.iter_mut().zip(&g).for_each(|(x, gi)| *x += w * gi);
        }
        Ok((loss / total, grads.into_iter().collect()))
    }
}

/// Loss per epoch (measured before each step, plus once after the last) and
/// the trained table.
#[derive(Clone, Debug, PartialEq)]
pub struct TrainOutcome {
    pub table: EmbeddingTable,
    pub losses: Vec<f64>,
}

/// Projected gradient descent, one step per scene per epoch. Scenes own
/// disjoint rows, so their steps run concurrently.
pub fn train(mut table: EmbeddingTable, scenes: &[Vec<Anchor>], cfg: &EmbedConfig) -> Result<TrainOutcome> {
    cfg.validate()?;
    let scenes: Vec<&Vec<Anchor>> = scenes.iter().filter(|s| !s.is_empty()).collect();
    let mut losses = Vec::with_capacity(cfg.epochs + 1);
    for epoch in 0..=cfg.epochs {
        let steps = scenes
            .par_iter()
            .map(|anchors| {
                let batch = ContrastiveBatch::new(anchors.to_vec(), &table)?;
                batch.loss_and_gradient(&table, cfg.tau)
            })
            .collect::<Result<Vec<_>>>()
            .map_err(|e| Error::Divergence { epoch, detail: e.to_string() })?;
        let loss = if steps.is_empty() { 0.0 } else { steps.iter().map(|s| s.0).sum::<f64>() / steps.len() as f64 };
        if !loss.is_finite() {
            return Err(Error::Divergence { epoch, detail: format!("loss = {loss}") });
        }
        losses.push(loss);
        if epoch == cfg.epochs {
            break;
        }
        for (_, grads) in steps {
            for (key, g) in grads {
                let row = table.require(&key)?;
                let next: Vec<f64> = row.as_slice().iter().zip(&g).map(|(z, gi)| z - cfg.lr * gi).collect();
                let next = Feature::normalized(next)
                    .map_err(|e| Error::Divergence { epoch, detail: format!("row {key}: {e}") })?;
                table.insert(key, next)?;
            }
        }
    }
    Ok(TrainOutcome { table, losses })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::types::rng;
    use rand::Rng;

    fn anchors(scene: usize, labels: &[usize]) -> Vec<Anchor> {
        labels
            .iter()
            .enumerate()
            .map(|(i, &label)| Anchor { key: GroupKey::new(scene, i), label, weight: 1.0 + i as f64 })
            .collect()
    }

    #[test]
    fn batch_means_are_weighted() {
        let mut t = EmbeddingTable::new(2);
        t.insert(GroupKey::new(0, 0), Feature::basis(2, 0)).unwrap();
        t.insert(GroupKey::new(0, 1), Feature::basis(2, 1)).unwrap();
        let b = ContrastiveBatch::new(
            vec![
                Anchor { key: GroupKey::new(0, 0), label: 4, weight: 3.0 },
                Anchor { key: GroupKey::new(0, 1), label: 4, weight: 1.0 },
            ],
            &t,
        )
        .unwrap();
        assert_eq!(b.labels, vec![4]);
        let m = b.means[0].as_slice();
        assert!((m[0] / m[1] - 3.0).abs() < 1e-12);
        assert_eq!(b.loss(&t, 0.07).unwrap(), 0.0);
    }

    #[test]
    fn missing_row_is_reported() {
        let t = EmbeddingTable::new(2);
        let err = ContrastiveBatch::new(anchors(3, &[0]), &t).unwrap_err();
        assert!(matches!(err, Error::MissingSegment { scene: 3, segment: 0 }));
    }

    #[test]
    fn loss_strictly_decreases_from_orthogonal_start() {
        let mut t = EmbeddingTable::new(4);
        let mut r = rng::seeded(2);
        let labels = [0, 0, 0, 1, 1, 1];
        for (i, &l) in labels.iter().enumerate() {
            let mut v = vec![0.0; 4];
            v[l] = 1.0;
            v[2] = r.random_range(-0.3..0.3);
            v[3] = r.random_range(-0.3..0.3);
            t.insert(GroupKey::new(0, i), Feature::normalized(v).unwrap()).unwrap();
        }
        let cfg = EmbedConfig { epochs: 10, ..Default::default() };
        let out = train(t, &[anchors(0, &labels)], &cfg).unwrap();
        for w in out.losses.windows(2) {
            assert!(w[1] < w[0], "{:?}", out.losses);
        }
    }

    #[test]
    fn rows_stay_unit_norm_and_training_is_deterministic() {
        let keys = (0..3).flat_map(|s| (0..5).map(move |i| GroupKey::new(s, i)));
        let t = EmbeddingTable::random(keys, 8, 11);
        let scenes: Vec<Vec<Anchor>> = (0..3).map(|s| anchors(s, &[0, 1, 0, 2, 1])).collect();
        let cfg = EmbedConfig { epochs: 20, ..Default::default() };
        let a = train(t.clone(), &scenes, &cfg).unwrap();
        let b = train(t, &scenes, &cfg).unwrap();
        assert_eq!(a, b);
        for (_, row) in a.table.iter() {
            let n: f64 = row.as_slice().iter().map(|x| x * x).sum::<f64>().sqrt();
            assert!((n - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn converges_to_vanishing_gradient_on_separable_data() {
        let keys = (0..6).map(|i| GroupKey::new(0, i));
        let t = EmbeddingTable::random(keys, 4, 5);
        let scene = anchors(0, &[0, 0, 0, 1, 1, 1]);
        let cfg = EmbedConfig { epochs: 200, lr: 50.0, ..Default::default() };
        let out = train(t, std::slice::from_ref(&scene), &cfg).unwrap();
        let batch = ContrastiveBatch::new(scene, &out.table).unwrap();
        let (_, grads) = batch.loss_and_gradient(&out.table, cfg.tau).unwrap();
        let norm = grads.iter().flat_map(|(_, g)| g).map(|x| x * x).sum::<f64>().sqrt();
        assert!(norm < 1e-6, "gradient norm {norm}");
    }

    #[test]
    fn rejects_bad_config() {
        let t = EmbeddingTable::new(2);
        assert!(train(t.clone(), &[], &EmbedConfig { tau: 0.0, ..Default::default() }).is_err());
        assert!(train(t, &[], &EmbedConfig { lr: -1.0, ..Default::default() }).is_err());
    }
}
