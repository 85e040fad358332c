//! Triangle meshes and the synthetic-experiment generators built on them.

mod crop;
mod decimate;
pub mod io;
mod noise;
mod scene;
pub mod shapes;

use std::collections::HashSet;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{apply_rigid, Mat3, Vec3};

pub use crop::{crop_local_surface, LocalSurface, MeshSearch};
pub use decimate::decimate;
pub use noise::{add_gaussian_noise, add_gaussian_noise_world};
pub use scene::{compose_scene, GroundTruthPose, SceneOptions};

/// Indexed triangle mesh.
///
/// Immutable once built; every constructor validates indices, degenerate
/// index triples and finiteness.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TriangleMesh {
    vertices: Vec<Vec3>,
    triangles: Vec<[u32; 3]>,
    tags: Option<Vec<u32>>,
}

impl TriangleMesh {
    pub fn new(vertices: Vec<Vec3>, triangles: Vec<[u32; 3]>) -> Result<Self> {
        Self::with_tags(vertices, triangles, None)
    }

    /// Builds a mesh carrying a per-vertex provenance tag (e.g. model id).
    pub fn with_tags(
        vertices: Vec<Vec3>,
        triangles: Vec<[u32; 3]>,
        tags: Option<Vec<u32>>,
    ) -> Result<Self> {
        let n = vertices.len();
        if let Some(t) = &tags {
            if t.len() != n {
                return Err(Error::InvalidMesh(format!(
                    "{} tags for {} vertices",
                    t.len(),
                    n
                )));
            }
        }
        if let Some(i) = vertices.iter().position(|v| !v.iter().all(|c| c.is_finite())) {
            return Err(Error::InvalidMesh(format!("vertex {i} is not finite")));
        }
        for (i, t) in triangles.iter().enumerate() {
            if t.iter().any(|&k| k as usize >= n) {
                return Err(Error::InvalidMesh(format!(
                    "triangle {i} references a vertex out of range ({n} vertices)"
                )));
            }
            if t[0] == t[1] || t[1] == t[2] || t[0] == t[2] {
                return Err(Error::InvalidMesh(format!("triangle {i} repeats a vertex")));
            }
        }
        Ok(TriangleMesh {
            vertices,
            triangles,
            tags,
        })
    }

    pub fn vertices(&self) -> &[Vec3] {
        &self.vertices
    }

    pub fn triangles(&self) -> &[[u32; 3]] {
        &self.triangles
    }

    pub fn tags(&self) -> Option<&[u32]> {
        self.tags.as_deref()
    }

    pub fn vertex_count(&self) -> usize {
        self.vertices.len()
    }

    pub fn triangle_count(&self) -> usize {
        self.triangles.len()
    }

    #[inline]
    pub fn corners(&self, t: usize) -> [Vec3; 3] {
        let [a, b, c] = self.triangles[t];
        [
            self.vertices[a as usize],
            self.vertices[b as usize],
            self.vertices[c as usize],
        ]
    }

    /// Twice the triangle area (norm of the edge cross product).
    pub fn double_area(&self, t: usize) -> f64 {
        let [a, b, c] = self.corners(t);
        (b - a).cross(&(c - a)).norm()
    }

    pub fn total_area(&self) -> f64 {
        (0..self.triangles.len()).map(|t| self.double_area(t)).sum::<f64>() / 2.0
    }

    /// Undirected edges, each listed once as `(lo, hi)`, sorted.
    pub fn unique_edges(&self) -> Vec<(u32, u32)> {
        let mut edges: Vec<(u32, u32)> = self
            .triangles
            .iter()
            .flat_map(|t| {
                [(t[0], t[1]), (t[1], t[2]), (t[2], t[0])]
                    .map(|(a, b)| if a < b { (a, b) } else { (b, a) })
            })
            .collect();
        edges.sort_unstable();
        edges.dedup();
        edges
    }

    /// Mesh resolution: mean length over the set of unique edges.
    pub fn resolution(&self) -> Result<f64> {
        if self.triangles.is_empty() {
            return Err(Error::EmptyMesh);
        }
        let edges = self.unique_edges();
        let sum: f64 = edges
            .iter()
            .map(|&(a, b)| (self.vertices[a as usize] - self.vertices[b as usize]).norm())
            .sum();
        let mr = sum / edges.len() as f64;
        if mr > 0.0 {
            Ok(mr)
        } else {
            Err(Error::InvalidMesh("all edges have zero length".into()))
        }
    }

    /// Vertices lying on an edge used by exactly one triangle.
    pub fn boundary_vertices(&self) -> Vec<bool> {
        let mut edges: Vec<(u32, u32)> = self
            .triangles
            .iter()
            .flat_map(|t| {
                [(t[0], t[1]), (t[1], t[2]), (t[2], t[0])]
                    .map(|(a, b)| if a < b { (a, b) } else { (b, a) })
            })
            .collect();
        edges.sort_unstable();
        let mut flags = vec![false; self.vertices.len()];
        let mut i = 0;
        while i < edges.len() {
            let mut j = i + 1;
            while j < edges.len() && edges[j] == edges[i] {
                j += 1;
            }
            if j - i == 1 {
                flags[edges[i].0 as usize] = true;
                flags[edges[i].1 as usize] = true;
            }
            i = j;
        }
        flags
    }

    /// Triangles incident to each vertex.
    pub fn vertex_triangles(&self) -> Vec<Vec<u32>> {
        let mut adj = vec![Vec::new(); self.vertices.len()];
        for (t, tri) in self.triangles.iter().enumerate() {
            for &v in tri {
                adj[v as usize].push(t as u32);
            }
        }
        adj
    }

    /// Axis-aligned bounding box diagonal length.
    pub fn diameter(&self) -> f64 {
        let (lo, hi) = self.bounds();
        (hi - lo).norm()
    }

    pub fn bounds(&self) -> (Vec3, Vec3) {
        let mut lo = Vec3::repeat(f64::INFINITY);
        let mut hi = Vec3::repeat(f64::NEG_INFINITY);
        for v in &self.vertices {
            lo = lo.inf(v);
            hi = hi.sup(v);
        }
        (lo, hi)
    }

    pub fn centroid(&self) -> Vec3 {
        let s: Vec3 = self.vertices.iter().sum();
        s / self.vertices.len().max(1) as f64
    }

    /// Applies `q·R + t` to every vertex; topology and tags are kept.
    pub fn transformed(&self, rotation: &Mat3, translation: &Vec3) -> TriangleMesh {
        TriangleMesh {
            vertices: self
                .vertices
                .iter()
                .map(|v| apply_rigid(rotation, translation, v))
                .collect(),
            triangles: self.triangles.clone(),
            tags: self.tags.clone(),
        }
    }

    /// Same topology, new vertex positions.
    pub fn with_vertices(&self, vertices: Vec<Vec3>) -> Result<TriangleMesh> {
        if vertices.len() != self.vertices.len() {
            return Err(Error::InvalidMesh("vertex count changed".into()));
        }
        TriangleMesh::with_tags(vertices, self.triangles.clone(), self.tags.clone())
    }

    pub fn with_all_tags(mut self, tag: u32) -> TriangleMesh {
        self.tags = Some(vec![tag; self.vertices.len()]);
        self
    }

    /// Drops vertices not referenced by any triangle.
    pub fn compacted(&self) -> TriangleMesh {
        let used: HashSet<u32> = self.triangles.iter().flatten().copied().collect();
        let mut remap = vec![u32::MAX; self.vertices.len()];
        let mut vertices = Vec::with_capacity(used.len());
        let mut tags = self.tags.as_ref().map(|_| Vec::with_capacity(used.len()));
        for (i, v) in self.vertices.iter().enumerate() {
            if used.contains(&(i as u32)) {
                remap[i] = vertices.len() as u32;
                vertices.push(*v);
                if let (Some(out), Some(src)) = (tags.as_mut(), self.tags.as_ref()) {
                    out.push(src[i]);
                }
            }
        }
        let triangles = self
            .triangles
            .iter()
            .map(|t| t.map(|k| remap[k as usize]))
            .collect();
        TriangleMesh {
            vertices,
            triangles,
            tags,
        }
    }

    /// Concatenates meshes, offsetting indices.
    pub fn merge(parts: &[TriangleMesh]) -> Result<TriangleMesh> {
        let any_tags = parts.iter().any(|p| p.tags.is_some());
        let mut vertices = Vec::new();
        let mut triangles = Vec::new();
        let mut tags = Vec::new();
        for p in parts {
            let off = vertices.len() as u32;
            vertices.extend_from_slice(&p.vertices);
            triangles.extend(p.triangles.iter().map(|t| t.map(|k| k + off)));
            if any_tags {
                match &p.tags {
                    Some(t) => tags.extend_from_slice(t),
                    None => tags.extend(std::iter::repeat_n(u32::MAX, p.vertices.len())),
                }
            }
        }
        TriangleMesh::with_tags(vertices, triangles, any_tags.then_some(tags))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::random_rotation;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn equilateral() -> TriangleMesh {
        TriangleMesh::new(
            vec![
                Vec3::new(0.0, 0.0, 0.0),
                Vec3::new(1.0, 0.0, 0.0),
                Vec3::new(0.5, 3f64.sqrt() / 2.0, 0.0),
            ],
            vec![[0, 1, 2]],
        )
        .unwrap()
    }

    #[test]
    fn resolution_of_unit_triangle() {
        assert!((equilateral().resolution().unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn resolution_of_rhombus() {
        let h = 3f64.sqrt() / 2.0;
        let m = TriangleMesh::new(
            vec![
                Vec3::new(0.0, 0.0, 0.0),
                Vec3::new(1.0, 0.0, 0.0),
                Vec3::new(0.5, h, 0.0),
                Vec3::new(0.5, -h, 0.0),
            ],
            vec![[0, 1, 2], [1, 0, 3]],
        )
        .unwrap();
        assert_eq!(m.unique_edges().len(), 5);
        assert!((m.resolution().unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn resolution_matches_brute_force_edge_set() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mesh = shapes::icosphere(2);
        let jitter: Vec<Vec3> = mesh
            .vertices()
            .iter()
            .map(|v| v + Vec3::new(rng.random(), rng.random(), rng.random()) * 0.05)
            .collect();
        let mesh = mesh.with_vertices(jitter).unwrap();
        // independent oracle: string-keyed set of edges
        let mut seen = std::collections::BTreeMap::new();
        for t in mesh.triangles() {
            for (a, b) in [(t[0], t[1]), (t[1], t[2]), (t[2], t[0])] {
                let key = format!("{}-{}", a.min(b), a.max(b));
                let len = (mesh.vertices()[a as usize] - mesh.vertices()[b as usize]).norm();
                seen.insert(key, len);
            }
        }
        let oracle = seen.values().sum::<f64>() / seen.len() as f64;
        assert!((mesh.resolution().unwrap() - oracle).abs() < 1e-12);
    }

    #[test]
    fn resolution_is_rigid_invariant() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let mesh = shapes::icosphere(3);
        let mr = mesh.resolution().unwrap();
        for _ in 0..10 {
            let r = random_rotation(&mut rng);
            let t = Vec3::new(rng.random(), rng.random(), rng.random()) * 100.0;
            let moved = mesh.transformed(&r, &t).resolution().unwrap();
            assert!(((moved - mr) / mr).abs() < 1e-9);
        }
    }

    #[test]
    fn empty_mesh_has_no_resolution() {
        let m = TriangleMesh::new(vec![Vec3::zeros()], vec![]).unwrap();
        assert!(matches!(m.resolution(), Err(Error::EmptyMesh)));
    }

    #[test]
    fn invalid_meshes_rejected() {
        let v = vec![Vec3::zeros(), Vec3::x(), Vec3::y()];
        assert!(TriangleMesh::new(v.clone(), vec![[0, 1, 3]]).is_err());
        assert!(TriangleMesh::new(v.clone(), vec![[0, 1, 1]]).is_err());
        let mut bad = v;
        bad[0].x = f64::NAN;
        assert!(TriangleMesh::new(bad, vec![[0, 1, 2]]).is_err());
    }

    #[test]
    fn closed_sphere_has_no_boundary() {
        assert!(!shapes::icosphere(2).boundary_vertices().iter().any(|&b| b));
        assert!(equilateral().boundary_vertices().iter().all(|&b| b));
    }
}
