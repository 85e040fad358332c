//! Pose hypotheses from single correspondences and their clustering.

use serde::Serialize;

use crate::geometry::{euler_delta, euler_zyx, from_euler_zyx, orthonormalize, wrap_angle, Mat3, Vec3};
use crate::lrf::LocalReferenceFrame;
use crate::matching::FeatureCorrespondence;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TransformHypothesis {
    pub model_id: u32,
    /// Row-vector convention: `scene = model · rotation + translation`.
    pub rotation: Mat3,
    pub translation: Vec3,
    pub scene_feature: u32,
    pub model_feature: u32,
    /// Descriptor distance of the source correspondence.
    pub distance: f64,
}

/// Aligns the model LRF onto the scene LRF: `F_m · R = F_s`,
/// `p_m · R + t = p_s`.
pub fn hypothesize(
    corr: &FeatureCorrespondence,
    scene: &LocalReferenceFrame,
    model: &LocalReferenceFrame,
) -> TransformHypothesis {
    let rotation = model.axes.transpose() * scene.axes;
    // row vector p_m·R is Rᵀ p_m in column form
    let translation = scene.origin - rotation.tr_mul(&model.origin);
    TransformHypothesis {
        model_id: corr.model_id,
        rotation,
        translation,
        scene_feature: corr.scene_feature,
        model_feature: corr.model_feature,
        distance: corr.distance,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HypothesisCluster {
    pub model_id: u32,
    /// Indices into the hypothesis slice that was clustered.
    pub members: Vec<usize>,
    pub rotation: Mat3,
    pub translation: Vec3,
    /// Euler-angle center (intrinsic Z-Y-X, radians).
    pub euler: Vec3,
    pub n_f: usize,
    pub mean_distance: f64,
    pub score: f64,
}

fn near(ua: &Vec3, ta: &Vec3, ub: &Vec3, tb: &Vec3, tau_a: f64, tau_t: f64) -> bool {
    euler_delta(ua, ub).norm() < tau_a && (ta - tb).norm() < tau_t
}

/// One cluster per seed hypothesis, pruned below half the best score, then
/// greedily selected best-first with near-duplicate centers discarded.
pub fn cluster_hypotheses(hyps: &[TransformHypothesis], tau_a: f64, tau_t: f64) -> Vec<HypothesisCluster> {
    if hyps.is_empty() {
        return Vec::new();
    }
    let eulers: Vec<Vec3> = hyps.iter().map(|h| euler_zyx(&h.rotation)).collect();
    let mut clusters: Vec<HypothesisCluster> = (0..hyps.len())
        .map(|s| {
            let members: Vec<usize> = (0..hyps.len())
                .filter(|&j| near(&eulers[j], &hyps[j].translation, &eulers[s], &hyps[s].translation, tau_a, tau_t))
                .collect();
            let n = members.len() as f64;
            let mut du = Vec3::zeros();
            let mut t = Vec3::zeros();
            let mut d = 0.0;
            for &j in &members {
                du += euler_delta(&eulers[j], &eulers[s]);
                t += hyps[j].translation;
                d += hyps[j].distance;
            }
            let u = eulers[s] + du / n;
            let euler = Vec3::new(wrap_angle(u[0]), wrap_angle(u[1]), wrap_angle(u[2]));
            let mean_distance = (d / n).max(1e-12);
            HypothesisCluster {
                model_id: hyps[s].model_id,
                n_f: members.len(),
                members,
                rotation: orthonormalize(&from_euler_zyx(&euler)),
                translation: t / n,
                euler,
                mean_distance,
                score: n / mean_distance,
            }
        })
        .collect();
    let best = clusters.iter().map(|c| c.score).fold(f64::NEG_INFINITY, f64::max);
    clusters.retain(|c| c.score >= best / 2.0);
    // stable: equal scores keep seed order
    clusters.sort_by(|a, b| b.score.total_cmp(&a.score));
    let mut selected: Vec<HypothesisCluster> = Vec::new();
    for c in clusters {
        if selected
            .iter()
            .all(|s| !near(&c.euler, &c.translation, &s.euler, &s.translation, tau_a, tau_t))
        {
            selected.push(c);
        }
    }
    selected
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{random_rotation, rotation_angle_between};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn frame<R: Rng>(rng: &mut R) -> LocalReferenceFrame {
        LocalReferenceFrame {
            origin: Vec3::new(rng.random(), rng.random(), rng.random()) * 10.0,
            axes: random_rotation(rng),
            eigenvalues: [3.0, 2.0, 1.0],
        }
    }

    fn corr() -> FeatureCorrespondence {
        FeatureCorrespondence {
            scene_feature: 0,
            model_id: 0,
            model_feature: 0,
            distance: 0.5,
            ratio: 0.5,
        }
    }

    fn hyp(r: Mat3, t: Vec3) -> TransformHypothesis {
        TransformHypothesis {
            model_id: 0,
            rotation: r,
            translation: t,
            scene_feature: 0,
            model_feature: 0,
            distance: 1.0,
        }
    }

    #[test]
    fn identical_frames_give_identity() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let f = frame(&mut rng);
        let h = hypothesize(&corr(), &f, &f);
        assert!((h.rotation - Mat3::identity()).norm() < 1e-12);
        assert!(h.translation.norm() < 1e-12);
    }

    #[test]
    fn model_frame_maps_onto_scene_frame() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..100 {
            let fs = frame(&mut rng);
            let fm = frame(&mut rng);
            let h = hypothesize(&corr(), &fs, &fm);
            assert!((fm.axes * h.rotation - fs.axes).norm() < 1e-9);
            let mapped = h.rotation.tr_mul(&fm.origin) + h.translation;
            assert!((mapped - fs.origin).norm() < 1e-9);
            assert!((h.rotation.transpose() * h.rotation - Mat3::identity()).norm() < 1e-9);
            assert!((h.rotation.determinant() - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn single_hypothesis_single_cluster() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let r = random_rotation(&mut rng);
        let t = Vec3::new(1.0, 2.0, 3.0);
        let c = cluster_hypotheses(&[hyp(r, t)], 0.2, 30.0);
        assert_eq!(c.len(), 1);
        assert_eq!(c[0].n_f, 1);
        assert!(rotation_angle_between(&c[0].rotation, &r) < 1e-9);
        assert!((c[0].translation - t).norm() < 1e-12);
        assert!((c[0].score - 1.0).abs() < 1e-12);
    }

    #[test]
    fn outlier_is_pruned() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let r = random_rotation(&mut rng);
        let mut hyps = vec![hyp(r, Vec3::zeros()); 10];
        hyps.push(hyp(random_rotation(&mut rng), Vec3::new(500.0, 0.0, 0.0)));
        let c = cluster_hypotheses(&hyps, 0.2, 30.0);
        assert_eq!(c.len(), 1);
        assert_eq!(c[0].n_f, 10);
        assert!(!c[0].members.contains(&10));
    }

    #[test]
    fn perturbations_land_in_one_cluster() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..20 {
            let base = random_rotation(&mut rng);
            let u0 = euler_zyx(&base);
            if u0[1].abs() > 1.3 {
                continue;
            }
            let t0 = Vec3::new(5.0, -2.0, 1.0);
            // every pair stays within both thresholds
            let hyps: Vec<_> = (0..30)
                .map(|_| {
                    let du = Vec3::new(rng.random_range(-0.025..0.025), rng.random_range(-0.025..0.025), rng.random_range(-0.025..0.025));
                    let dt = Vec3::new(rng.random_range(-4.0..4.0), rng.random_range(-4.0..4.0), rng.random_range(-4.0..4.0));
                    hyp(from_euler_zyx(&(u0 + du)), t0 + dt)
                })
                .collect();
            let c = cluster_hypotheses(&hyps, 0.2, 30.0);
            assert_eq!(c.len(), 1);
            assert_eq!(c[0].n_f, 30);
        }
    }

    #[test]
    fn surviving_scores_respect_half_max() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let hyps: Vec<_> = (0..60)
            .map(|i| {
                let mut h = hyp(random_rotation(&mut rng), Vec3::new((i % 4) as f64 * 100.0, 0.0, 0.0));
                h.distance = rng.random_range(0.1..2.0);
                h
            })
            .collect();
        let c = cluster_hypotheses(&hyps, 0.5, 30.0);
        let best = c.iter().map(|c| c.score).fold(0.0, f64::max);
        for cl in &c {
            assert!(cl.score >= best / 2.0);
            assert!(cl.n_f >= 1 && cl.mean_distance > 0.0);
        }
        for w in c.windows(2) {
            assert!(w[0].score >= w[1].score);
        }
    }
}
