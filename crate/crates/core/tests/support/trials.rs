//! Single randomized trials shared by the module tests and the acceptance
//! suite. Each returns the measured quantity; callers decide the threshold.

use rand::Rng;
use rand_distr::{Distribution, Normal};
use segmatch::cluster::{cluster_image, ClusterConfig};
use segmatch::embed::{Anchor, ContrastiveBatch, EmbeddingTable, GroupKey};
use segmatch::matching::{match_all_components, MatchConfig};
use segmatch::prune::{prune_matches, PruneConfig};
use segmatch::registration::{ransac_register, RegistrationConfig, RegistrationScore};
use segmatch::synth::{generate_templates, GeneratorConfig};
use segmatch::types::{Feature, RigidTransform, Vec3};

use super::oracle::{naive_contrastive_loss, pair_counting_ari, rng};
use super::scenario::impostor_scenario;

pub const FD_STEP: f64 = 1e-6;

/// A batch of `2..=6` anchors in dimension 4 with up to 3 labels.
pub fn random_batch(seed: u64) -> (EmbeddingTable, ContrastiveBatch, f64) {
    let mut r = rng(seed);
    let n = r.random_range(2..=6);
    let labels = r.random_range(1..=3.min(n));
    let mut table = EmbeddingTable::new(4);
    let anchors: Vec<Anchor> = (0..n)
        .map(|i| {
            let key = GroupKey::new(0, i);
            table.insert(key, Feature::random(4, &mut r)).unwrap();
            // Every label gets at least one anchor.
            let label = if i < labels { i } else { r.random_range(0..labels) };
            Anchor { key, label, weight: r.random_range(0.5..3.0) }
        })
        .collect();
    let tau = r.random_range(0.07..1.0);
    let batch = ContrastiveBatch::new(anchors, &table).unwrap();
    (table, batch, tau)
}

/// Weighted mean loss from the naive formula over the anchors accepted by
/// `keep`, with each anchor's row given by `row`.
pub fn oracle_loss(
    batch: &ContrastiveBatch,
    tau: f64,
    keep: impl Fn(&Anchor) -> bool,
    row: impl Fn(&Anchor) -> Vec<f64>,
) -> f64 {
    let means: Vec<Vec<f64>> = batch.means.iter().map(|m| m.as_slice().to_vec()).collect();
    let total: f64 = batch.anchors.iter().map(|a| a.weight).sum();
    batch
        .anchors
        .iter()
        .filter(|a| keep(a))
        .map(|a| {
            let j = batch.labels.iter().position(|&l| l == a.label).unwrap();
            a.weight * naive_contrastive_loss(&row(a), j, &means, tau)
        })
        .sum::<f64>()
        / total
}

pub fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Largest relative error (vector norm per row) between the analytic
/// gradient of batch `seed` and central differences of the naive loss.
pub fn gradient_error(seed: u64) -> f64 {
    let (table, batch, tau) = random_batch(seed);
    let (loss, grads) = batch.loss_and_gradient(&table, tau).unwrap();
    let stored = |a: &Anchor| table.get(&a.key).unwrap().as_slice().to_vec();
    assert!((loss - oracle_loss(&batch, tau, |_| true, stored)).abs() < 1e-12);
    let mut worst: f64 = 0.0;
    for (key, g) in grads {
        let z = table.get(&key).unwrap().as_slice().to_vec();
        let fd: Vec<f64> = (0..z.len())
            .map(|d| {
                let (mut plus, mut minus) = (z.clone(), z.clone());
                plus[d] += FD_STEP;
                minus[d] -= FD_STEP;
                // Only the anchors on this row depend on it.
                let at = |v: &Vec<f64>| oracle_loss(&batch, tau, |a| a.key == key, |_| v.clone());
                (at(&plus) - at(&minus)) / (2.0 * FD_STEP)
            })
            .collect();
        let diff: Vec<f64> = g.iter().zip(&fd).map(|(a, b)| a - b).collect();
        let scale = norm(&g).max(norm(&fd));
        if scale > 0.0 {
            worst = worst.max(norm(&diff) / scale);
        }
    }
    worst
}

pub fn object_points(seed: u64) -> Vec<Vec3> {
    let cfg = GeneratorConfig { k_objects: 1, ..Default::default() };
    generate_templates(&cfg, seed).unwrap()[0].parts.iter().flat_map(|p| p.points.clone()).collect()
}

pub fn random_motion(seed: u64) -> RigidTransform {
    let mut r = rng(seed);
    let axis = Vec3::new(r.random_range(-1.0..1.0), r.random_range(-1.0..1.0), r.random_range(-1.0..1.0));
    let t = Vec3::new(r.random_range(-0.5..0.5), r.random_range(-0.5..0.5), r.random_range(-0.5..0.5));
    RigidTransform::from_axis_angle(axis, r.random_range(0.0..std::f64::consts::PI), t)
}

/// Registers an object onto a moved copy of itself, with Gaussian noise of
/// standard deviation `sigma` per coordinate on the copy. Returns the score
/// and the Frobenius error of the recovered rotation.
pub fn registration_trial(seed: u64, sigma: f64) -> (RegistrationScore, f64, Vec<Vec3>, Vec<Vec3>) {
    let p = object_points(seed % 10);
    let truth = random_motion(seed);
    let mut r = rng(1000 + seed);
    let q: Vec<Vec3> = if sigma > 0.0 {
        let noise = Normal::new(0.0, sigma).unwrap();
        p.iter()
            .map(|x| truth.apply(x) + Vec3::new(noise.sample(&mut r), noise.sample(&mut r), noise.sample(&mut r)))
            .collect()
    } else {
        p.iter().map(|x| truth.apply(x)).collect()
    };
    let s = ransac_register(&p, &q, &RegistrationConfig::default(), seed).unwrap();
    let err = (s.transform.rotation() - truth.rotation()).norm();
    (s, err, p, q)
}

/// True when pruning removes exactly the impostor pair from every match of
/// the impostor scenario.
pub fn impostor_removed(seed: u64) -> bool {
    let s = impostor_scenario(seed);
    let matches = match_all_components(&s.graphs, &MatchConfig::default()).unwrap();
    let clouds: Vec<_> = s.clouds.iter().collect();
    let pruned = prune_matches(matches, &clouds, &PruneConfig::default(), &RegistrationConfig::default(), seed).unwrap();
    let imp = s.impostor;
    !pruned.is_empty()
        && pruned.iter().all(|p| {
            let expected: Vec<_> = p.m.x.iter().copied().filter(|&(i, k)| i != imp || k != imp).collect();
            p.cost_gate && p.m.x.contains(&(imp, imp)) && p.kept == expected
        })
}

pub const W: usize = 80;
pub const H: usize = 60;

/// Paints axis-aligned rectangles `(x0, x1, y0, y1, object)` with noisy
/// copies of one basis vector per object. Returns features and truth.
pub fn paint(rects: &[(usize, usize, usize, usize, usize)], noise: f64, seed: u64) -> (Vec<Option<Feature>>, Vec<Option<usize>>) {
    let mut r = rng(seed);
    let mut features = vec![None; W * H];
    let mut truth = vec![None; W * H];
    for &(x0, x1, y0, y1, obj) in rects {
        for y in y0..y1 {
            for x in x0..x1 {
                features[y * W + x] = Some(Feature::basis(16, obj).perturbed(noise, &mut r));
                truth[y * W + x] = Some(obj);
            }
        }
    }
    (features, truth)
}

/// ARI of mean-shift on three adjacent orthogonal-feature rectangles.
pub fn planted_ari(seed: u64) -> f64 {
    let mut r = rng(seed);
    let rects: Vec<_> = (0..3)
        .map(|j| {
            let x0 = 5 + 25 * j;
            let y0 = r.random_range(2..20);
            (x0, x0 + 20, y0, y0 + r.random_range(20..38), j)
        })
        .collect();
    let (features, truth) = paint(&rects, 0.1, seed);
    let (grid, _) = cluster_image(W, H, &features, &ClusterConfig::default()).unwrap();
    let fg: Vec<usize> = (0..W * H).filter(|&p| truth[p].is_some()).collect();
    let a: Vec<usize> = fg.iter().map(|&p| truth[p].unwrap()).collect();
    let b: Vec<usize> = fg.iter().map(|&p| grid.labels[p].expect("foreground labeled")).collect();
    pair_counting_ari(&a, &b)
}

/// True when two separated copies of one object get two labels, each
/// uniform over its copy.
pub fn duplicate_split(seed: u64) -> bool {
    let mut r = rng(100 + seed);
    let (ya, yb) = (r.random_range(5..25), r.random_range(5..25));
    // Object 0 twice, separated by object 1.
    let rects = [(5, 25, ya, ya + 30, 0), (25, 50, 10, 50, 1), (50, 72, yb, yb + 30, 0)];
    let (features, _) = paint(&rects, 0.05, seed);
    let (grid, _) = cluster_image(W, H, &features, &ClusterConfig::default()).unwrap();
    let label = |x: usize, y: usize| grid.labels[y * W + x].unwrap();
    let uniform = [rects[0], rects[2]].iter().all(|&(x0, x1, y0, y1, _)| {
        let first = label(x0, y0);
        (y0..y1).all(|y| (x0..x1).all(|x| label(x, y) == first))
    });
    uniform && label(15, ya + 15) != label(60, yb + 15)
}
