mod support;

use nalgebra::{Matrix3, Rotation3, Unit};
use proptest::prelude::*;
use segmatch::matching::{match_all_components, MatchConfig};
use segmatch::registration::{kabsch, residual_rms, score_matched_nodes, RegistrationConfig};
use segmatch::types::{RigidTransform, Vec3};
use support::scenario::impostor_scenario;
use support::trials::registration_trial;

/// Fraction of `a` within `delta` of some point of `b`, by exhaustive search.
fn brute_hit_fraction(a: &[Vec3], b: &[Vec3], delta: f64) -> f64 {
    let hits = a.iter().filter(|p| b.iter().any(|q| (*p - q).norm() <= delta)).count();
    hits as f64 / a.len() as f64
}

#[test]
fn noiseless_motion_is_recovered() {
    for seed in 0..10 {
        let (s, err, _, _) = registration_trial(seed, 0.0);
        assert!(err < 1e-6, "seed {seed}: {err}");
        assert_eq!((s.precision, s.recall), (1.0, 1.0), "seed {seed}");
    }
}

#[test]
fn noisy_copies_score_high_on_most_seeds() {
    let delta = RegistrationConfig::default().delta;
    let mut good = 0;
    for seed in 0..50 {
        let (s, _, p, q) = registration_trial(seed, delta / 5.0);
        // The reported scores are what an exhaustive search gives under the
        // returned transform.
        let moved: Vec<Vec3> = p.iter().map(|x| s.transform.apply(x)).collect();
        assert!((s.precision - brute_hit_fraction(&moved, &q, delta)).abs() < 1e-12);
        assert!((s.recall - brute_hit_fraction(&q, &moved, delta)).abs() < 1e-12);
        good += usize::from(s.precision >= 0.99 && s.recall >= 0.99);
    }
    assert!(good >= 45, "{good}/50");
}

#[test]
fn impostor_pair_scores_low_and_the_rest_high() {
    for seed in 0..5 {
        let s = impostor_scenario(seed);
        let m = match_all_components(&s.graphs, &MatchConfig::default())
            .unwrap()
            .into_iter()
            .find(|m| m.src_scene == 0)
            .unwrap();
        assert!(m.x.contains(&(s.impostor, s.impostor)));
        let scores = score_matched_nodes(&m, &s.clouds[0], &s.clouds[1], &RegistrationConfig::default(), seed).unwrap();
        for p in scores {
            if p.i == s.impostor {
                assert!(p.precision < 0.9 || p.recall < 0.9, "seed {seed}: {p:?}");
            } else {
                assert!(p.precision >= 0.9 && p.recall >= 0.9, "seed {seed}: {p:?}");
            }
        }
    }
}

#[test]
fn empty_match_gives_no_scores() {
    let s = impostor_scenario(0);
    let mut m = match_all_components(&s.graphs, &MatchConfig::default()).unwrap().remove(0);
    m.x.clear();
    assert!(score_matched_nodes(&m, &s.clouds[0], &s.clouds[1], &RegistrationConfig::default(), 0).unwrap().is_empty());
}

fn arb_rotation() -> impl Strategy<Value = Matrix3<f64>> {
    (-1.0..1.0f64, -1.0..1.0f64, 0.1..1.0f64, -3.0..3.0f64).prop_map(|(x, y, z, angle)| {
        Rotation3::from_axis_angle(&Unit::new_normalize(Vec3::new(x, y, z)), angle).into_inner()
    })
}

fn arb_points() -> impl Strategy<Value = Vec<Vec3>> {
    prop::collection::vec((-1.0..1.0f64, -1.0..1.0f64, -1.0..1.0f64), 4..30)
        .prop_map(|v| v.into_iter().map(|(x, y, z)| Vec3::new(x, y, z)).collect())
}

proptest! {
    #[test]
    fn kabsch_recovers_rotation(pts in arb_points(), rot in arb_rotation(), t in (-1.0..1.0f64, -1.0..1.0f64, -1.0..1.0f64)) {
        let truth = RigidTransform::new(rot, Vec3::new(t.0, t.1, t.2)).unwrap();
        let dst: Vec<Vec3> = pts.iter().map(|p| truth.apply(p)).collect();
        let fit = kabsch(&pts, &dst).unwrap();
        prop_assert!((fit.rotation() - rot).norm() < 1e-9);
        prop_assert!((fit.rotation().determinant() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn kabsch_residual_invariant_under_common_motion(
        pts in arb_points(),
        noise in prop::collection::vec((-0.05..0.05f64, -0.05..0.05f64, -0.05..0.05f64), 30),
        rot in arb_rotation(),
    ) {
        let dst: Vec<Vec3> = pts.iter().zip(&noise).map(|(p, n)| p + Vec3::new(n.0, n.1, n.2)).collect();
        let base = residual_rms(&kabsch(&pts, &dst).unwrap(), &pts, &dst);
        let g = RigidTransform::new(rot, Vec3::new(0.3, -0.2, 0.1)).unwrap();
        let (gp, gd): (Vec<Vec3>, Vec<Vec3>) = (pts.iter().map(|p| g.apply(p)).collect(), dst.iter().map(|p| g.apply(p)).collect());
        let moved = residual_rms(&kabsch(&gp, &gd).unwrap(), &gp, &gd);
        prop_assert!((base - moved).abs() < 1e-9);
    }
}
