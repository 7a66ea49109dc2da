mod support;

use proptest::prelude::*;
use rand::Rng;
use segmatch::embed::{contrastive_loss, train, Anchor, EmbedConfig, EmbeddingTable, GroupKey};
use segmatch::pipeline::PipelineConfig;
use segmatch::synth::{Dataset, GeneratorConfig, RenderConfig};
use segmatch::types::Feature;
use support::oracle::{cosine_silhouette, naive_contrastive_loss, rng};
use support::trials::{gradient_error, norm};

#[test]
fn gradient_matches_central_differences() {
    let worst = (0..100).map(gradient_error).fold(0.0, f64::max);
    assert!(worst < 1e-5, "max relative error {worst}");
}

fn trained_on_objects(seed: u64) -> (Dataset, EmbeddingTable) {
    let generator = GeneratorConfig { k_objects: 3, m_scenes: 4, ..Default::default() };
    let render = RenderConfig { train_views: 1, test_views: 1, ..Default::default() };
    let ds = Dataset::generate(&generator, &render, seed).unwrap();
    let scenes: Vec<Vec<Anchor>> = ds
        .scenes
        .iter()
        .map(|s| {
            s.instance
                .origins
                .iter()
                .enumerate()
                .map(|(seg, o)| Anchor { key: GroupKey::new(s.scene_id(), seg), label: o.object, weight: 1.0 })
                .collect()
        })
        .collect();
    let keys: Vec<GroupKey> = scenes.iter().flatten().map(|a| a.key).collect();
    let table = EmbeddingTable::random(keys, generator.feature_dim, seed);
    let out = train(table, &scenes, &PipelineConfig::default().phi2).unwrap();
    (ds, out.table)
}

#[test]
fn object_labels_give_well_separated_rows() {
    let (ds, table) = trained_on_objects(4);
    for s in &ds.scenes {
        let labels: Vec<usize> = s.instance.origins.iter().map(|o| o.object).collect();
        if labels.iter().all(|&l| l == labels[0]) {
            continue;
        }
        let rows: Vec<Vec<f64>> =
            (0..labels.len()).map(|seg| table.get(&GroupKey::new(s.scene_id(), seg)).unwrap().as_slice().to_vec()).collect();
        let sil = cosine_silhouette(&rows, &labels);
        assert!(sil > 0.8, "scene {}: silhouette {sil}", s.scene_id());

        let (mut intra, mut inter) = (Vec::new(), Vec::new());
        for a in 0..rows.len() {
            for b in (a + 1)..rows.len() {
                let c: f64 = rows[a].iter().zip(&rows[b]).map(|(x, y)| x * y).sum();
                if labels[a] == labels[b] { intra.push(c) } else { inter.push(c) }
            }
        }
        let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
        if !intra.is_empty() {
            assert!(mean(&intra) > mean(&inter));
        }
    }
    assert!(table.iter().all(|(_, f)| (norm(f.as_slice()) - 1.0).abs() < 1e-12));
}

#[test]
fn training_is_deterministic() {
    let (_, a) = trained_on_objects(2);
    let (_, b) = trained_on_objects(2);
    assert_eq!(a, b);
}

#[test]
fn two_orthogonal_labels_decrease_the_loss() {
    let mut table = EmbeddingTable::new(4);
    let anchors: Vec<Anchor> = (0..4)
        .map(|i| {
            let key = GroupKey::new(0, i);
            let axis = if i < 2 { 0 } else { 1 };
            let mut v = Feature::basis(4, axis).into_vec();
            v[2] = 0.3 * i as f64;
            table.insert(key, Feature::normalized(v).unwrap()).unwrap();
            Anchor { key, label: axis, weight: 1.0 }
        })
        .collect();
    let cfg = EmbedConfig { epochs: 10, ..EmbedConfig::default() };
    let losses = train(table, &[anchors], &cfg).unwrap().losses;
    assert!(losses.windows(2).all(|w| w[1] < w[0]), "{losses:?}");
}

fn arb_unit(dim: usize) -> impl Strategy<Value = Feature> {
    prop::collection::vec(-1.0..1.0f64, dim).prop_filter_map("zero", |v| Feature::normalized(v).ok())
}

proptest! {
    #[test]
    fn loss_ignores_order_of_other_means(
        z in arb_unit(4),
        means in prop::collection::vec(arb_unit(4), 3..6),
        seed in 0u64..100,
    ) {
        let mut rest: Vec<Feature> = means[1..].to_vec();
        let mut r = rng(seed);
        for i in (1..rest.len()).rev() {
            rest.swap(i, r.random_range(0..=i));
        }
        let mut shuffled = vec![means[0].clone()];
        shuffled.extend(rest);
        let a = contrastive_loss(z.as_slice(), 0, &means, 0.3);
        let b = contrastive_loss(z.as_slice(), 0, &shuffled, 0.3);
        prop_assert!((a - b).abs() < 1e-12);
    }

    #[test]
    fn loss_matches_naive_formula(z in arb_unit(4), means in prop::collection::vec(arb_unit(4), 1..6), tau in 0.07..2.0f64) {
        let m: Vec<Vec<f64>> = means.iter().map(|f| f.as_slice().to_vec()).collect();
        for label in 0..means.len() {
            let ours = contrastive_loss(z.as_slice(), label, &means, tau);
            prop_assert!((ours - naive_contrastive_loss(z.as_slice(), label, &m, tau)).abs() < 1e-9);
            prop_assert!(ours >= 0.0);
        }
    }
}
