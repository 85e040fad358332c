//! Seed selection and per-point feature computation shared by the model
//! library and scene detection.

use crate::error::{Error, Result};
use crate::geometry::Vec3;
use crate::kdtree::KdTree;
use crate::lrf::{compute_lrf, LocalReferenceFrame};
use crate::mesh::{MeshSearch, TriangleMesh};
use crate::rops::{compute_rops, RopsParams};

/// `count` vertex indices by farthest-point sampling, starting at vertex 0.
pub fn farthest_point_sampling(mesh: &TriangleMesh, count: usize) -> Result<Vec<usize>> {
    let verts = mesh.vertices();
    if count == 0 || count > verts.len() {
        return Err(Error::InvalidParameter(format!(
            "cannot sample {count} seeds from {} vertices",
            verts.len()
        )));
    }
    let mut chosen = Vec::with_capacity(count);
    let mut dist = vec![f64::INFINITY; verts.len()];
    let mut current = 0usize;
    for _ in 0..count {
        chosen.push(current);
        let c = verts[current];
        let mut best = (0usize, f64::NEG_INFINITY);
        for (i, v) in verts.iter().enumerate() {
            let d = (v - c).norm_squared();
            if d < dist[i] {
                dist[i] = d;
            }
            if dist[i] > best.1 {
                best = (i, dist[i]);
            }
        }
        current = best.0;
    }
    Ok(chosen)
}

/// Greedy spacing filter: walks `points` in order and keeps a point unless
/// an already kept point lies strictly closer than `spacing`.
pub fn resolution_control(points: &[Vec3], spacing: f64) -> Vec<usize> {
    if spacing <= 0.0 {
        return (0..points.len()).collect();
    }
    let tree = KdTree::from_points3(points);
    let mut suppressed = vec![false; points.len()];
    let mut kept = Vec::new();
    for i in 0..points.len() {
        if suppressed[i] {
            continue;
        }
        kept.push(i);
        for j in tree.within_radius(points[i].as_slice(), spacing) {
            if (points[j] - points[i]).norm() < spacing {
                suppressed[j] = true;
            }
        }
    }
    kept
}

/// LRF and descriptor at one point.
pub fn describe_point(
    search: &MeshSearch<'_>,
    point: Vec3,
    support_radius: f64,
    params: &RopsParams,
) -> Result<(LocalReferenceFrame, Vec<f64>)> {
    let surface = search.crop(point, support_radius)?;
    let lrf = compute_lrf(&surface)?;
    let desc = compute_rops(&surface, &lrf, params)?;
    Ok((lrf, desc.values))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::shapes;

    #[test]
    fn fps_is_spread_and_unique() {
        let m = shapes::icosphere(3);
        let s = farthest_point_sampling(&m, 50).unwrap();
        let mut u = s.clone();
        u.sort_unstable();
        u.dedup();
        assert_eq!(u.len(), 50);
        assert!(farthest_point_sampling(&m, m.vertex_count() + 1).is_err());
    }

    #[test]
    fn zero_spacing_keeps_all() {
        let pts = vec![Vec3::zeros(); 5];
        assert_eq!(resolution_control(&pts, 0.0), vec![0, 1, 2, 3, 4]);
        assert_eq!(resolution_control(&pts, 0.1), vec![0]);
    }

    #[test]
    fn spacing_is_respected() {
        let pts: Vec<Vec3> = (0..20).map(|i| Vec3::x() * (i as f64 * 0.3)).collect();
        let kept = resolution_control(&pts, 1.0);
        for w in kept.windows(2) {
            assert!((pts[w[1]] - pts[w[0]]).norm() >= 1.0);
        }
        assert_eq!(kept, vec![0, 4, 8, 12, 16]);
    }
}
