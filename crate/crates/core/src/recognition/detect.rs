//! Scene feature detection: decimation seeds, spacing, boundary and
//! eigenvalue-ratio filters.

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::geometry::Vec3;
use crate::lrf::{compute_lrf, LocalReferenceFrame};
use crate::mesh::{decimate, MeshSearch, TriangleMesh};

use super::features::resolution_control;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DetectParams {
    /// Support radius in world units.
    pub support_radius: f64,
    /// Resolution-control spacing in world units.
    pub spacing: f64,
    /// Vertex fraction kept by the seed decimation.
    pub decimation: f64,
    /// Minimum λ1/λ2 (exclusive).
    pub tau_lambda: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SceneFeature {
    pub vertex: usize,
    pub position: Vec3,
    pub lrf: LocalReferenceFrame,
}

/// Counts after each filter stage.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct DetectionReport {
    pub seeds: usize,
    pub spaced: usize,
    pub boundary_rejected: usize,
    pub degenerate: usize,
    pub ratio_rejected: usize,
    pub features: usize,
}

enum Outcome {
    Boundary,
    Degenerate,
    Ratio,
    Kept(LocalReferenceFrame),
}

/// Scene vertices nearest to the decimated mesh's vertices, in decimated
/// vertex order, without repeats.
pub fn decimation_seeds(scene: &TriangleMesh, search: &MeshSearch<'_>, fraction: f64) -> Result<Vec<usize>> {
    let low = match decimate(scene, fraction) {
        Ok(m) => m,
        Err(Error::TooFewVertices(_)) => return Ok((0..scene.vertex_count()).collect()),
        Err(e) => return Err(e),
    };
    let mut taken = vec![false; scene.vertex_count()];
    let mut seeds = Vec::with_capacity(low.vertex_count());
    for v in low.vertices() {
        if let Some((i, _)) = search.nearest_vertex(v) {
            if !taken[i] {
                taken[i] = true;
                seeds.push(i);
            }
        }
    }
    Ok(seeds)
}

pub fn detect_scene_features(scene: &TriangleMesh, params: &DetectParams) -> Result<(Vec<SceneFeature>, DetectionReport)> {
    if !(params.support_radius > 0.0 && params.tau_lambda > 0.0) {
        return Err(Error::InvalidParameter(format!("bad detection parameters {params:?}")));
    }
    let mut report = DetectionReport::default();
    if scene.triangle_count() == 0 {
        return Ok((Vec::new(), report));
    }
    let search = MeshSearch::new(scene);
    let seeds = decimation_seeds(scene, &search, params.decimation)?;
    report.seeds = seeds.len();
    let positions: Vec<Vec3> = seeds.iter().map(|&i| scene.vertices()[i]).collect();
    let spaced: Vec<usize> = resolution_control(&positions, params.spacing)
        .into_iter()
        .map(|k| seeds[k])
        .collect();
    report.spaced = spaced.len();
    let boundary = scene.boundary_vertices();
    let outcomes: Vec<Outcome> = spaced
        .par_iter()
        .map(|&v| {
            let p = scene.vertices()[v];
            let surface = match search.crop(p, params.support_radius) {
                Ok(s) => s,
                Err(_) => return Outcome::Degenerate,
            };
            if surface.vertex_indices().iter().any(|&k| boundary[k as usize]) {
                return Outcome::Boundary;
            }
            match compute_lrf(&surface) {
                Ok(lrf) if lrf.eigen_ratio_12() > params.tau_lambda => Outcome::Kept(lrf),
                Ok(_) => Outcome::Ratio,
                Err(_) => Outcome::Degenerate,
            }
        })
        .collect();
    let mut features = Vec::new();
    for (&v, o) in spaced.iter().zip(outcomes) {
        match o {
            Outcome::Boundary => report.boundary_rejected += 1,
            Outcome::Degenerate => report.degenerate += 1,
            Outcome::Ratio => report.ratio_rejected += 1,
            Outcome::Kept(lrf) => features.push(SceneFeature {
                vertex: v,
                position: scene.vertices()[v],
                lrf,
            }),
        }
    }
    report.features = features.len();
    Ok((features, report))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::shapes;

    fn params(mesh: &TriangleMesh) -> DetectParams {
        let mr = mesh.resolution().unwrap();
        DetectParams {
            support_radius: 15.0 * mr,
            spacing: 2.0 * mr,
            decimation: 0.125,
            tau_lambda: 1.2,
        }
    }

    #[test]
    fn closed_mesh_has_no_boundary_rejections() {
        let m = shapes::icosphere(4);
        let (_, rep) = detect_scene_features(&m, &params(&m)).unwrap();
        assert!(rep.spaced > 0);
        assert_eq!(rep.boundary_rejected, 0);
    }

    #[test]
    fn flat_interior_fails_ratio_test() {
        let m = shapes::grid(120, 120, 1.0);
        let mut p = params(&m);
        p.support_radius = 8.0;
        let (f, rep) = detect_scene_features(&m, &p).unwrap();
        assert!(f.is_empty());
        assert_eq!(rep.boundary_rejected + rep.ratio_rejected + rep.degenerate, rep.spaced);
        assert!(rep.ratio_rejected > 0);
    }

    #[test]
    fn rerun_is_identical() {
        let m = shapes::bundled_model(2);
        let (a, ra) = detect_scene_features(&m, &params(&m)).unwrap();
        let (b, rb) = detect_scene_features(&m, &params(&m)).unwrap();
        assert_eq!(a, b);
        assert_eq!(ra, rb);
        assert!(!a.is_empty());
    }
}
