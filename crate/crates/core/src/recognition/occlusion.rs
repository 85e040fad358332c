//! Occlusion of a posed model instance in a scene.

use serde::Serialize;

use crate::error::Result;
use crate::kdtree::KdTree;
use crate::mesh::{GroundTruthPose, TriangleMesh};

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Occlusion {
    /// `1 − visible area / total area`.
    pub occlusion: f64,
    /// Visible model area fraction.
    pub visible: f64,
}

/// A model triangle counts as visible when all three posed vertices have a
/// scene vertex within twice the model resolution.
pub fn occlusion(model: &TriangleMesh, scene: &TriangleMesh, pose: &GroundTruthPose) -> Result<Occlusion> {
    let radius = 2.0 * model.resolution()?;
    let total = model.total_area();
    if scene.vertex_count() == 0 || total == 0.0 {
        return Ok(Occlusion { occlusion: 1.0, visible: 0.0 });
    }
    let tree = KdTree::from_points3(scene.vertices());
    let seen: Vec<bool> = model
        .vertices()
        .iter()
        .map(|v| {
            let q = pose.apply(v);
            tree.nearest(q.as_slice()).is_some_and(|n| n.dist_sq <= radius * radius)
        })
        .collect();
    let visible: f64 = (0..model.triangle_count())
        .filter(|&t| model.triangles()[t].iter().all(|&k| seen[k as usize]))
        .map(|t| model.double_area(t) / 2.0)
        .sum::<f64>()
        / total;
    Ok(Occlusion {
        occlusion: 1.0 - visible,
        visible,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{random_rotation, Mat3, Vec3};
    use crate::mesh::shapes;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn full_model_is_unoccluded() {
        let m = shapes::bundled_model(0);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let pose = GroundTruthPose::new(0, random_rotation(&mut rng), Vec3::new(3.0, 1.0, 0.0)).unwrap();
        let scene = m.transformed(&pose.rotation, &pose.translation);
        let o = occlusion(&m, &scene, &pose).unwrap();
        assert!(o.occlusion.abs() < 1e-12);
    }

    #[test]
    fn empty_scene_is_fully_occluded() {
        let m = shapes::bundled_model(0);
        let scene = TriangleMesh::new(vec![], vec![]).unwrap();
        let pose = GroundTruthPose::new(0, Mat3::identity(), Vec3::zeros()).unwrap();
        assert_eq!(occlusion(&m, &scene, &pose).unwrap().occlusion, 1.0);
    }

    #[test]
    fn half_model_is_half_occluded() {
        let m = shapes::icosphere(5);
        let keep: Vec<[u32; 3]> = m
            .triangles()
            .iter()
            .filter(|t| t.iter().all(|&k| m.vertices()[k as usize].x >= 0.0))
            .copied()
            .collect();
        let half = TriangleMesh::new(m.vertices().to_vec(), keep).unwrap().compacted();
        let pose = GroundTruthPose::new(0, Mat3::identity(), Vec3::zeros()).unwrap();
        let o = occlusion(&m, &half, &pose).unwrap();
        assert!((o.occlusion - 0.5).abs() < 0.05, "{o:?}");
        assert!((o.occlusion + o.visible - 1.0).abs() < 1e-12);
    }
}
