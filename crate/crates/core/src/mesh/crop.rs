use crate::error::{Error, Result};
use crate::geometry::Vec3;
use crate::kdtree::KdTree;

use super::TriangleMesh;

/// The part of a mesh cropped by a sphere around a feature point.
///
/// Holds every triangle with at least one vertex inside the sphere;
/// triangles are not clipped.
#[derive(Debug, Clone)]
pub struct LocalSurface<'a> {
    mesh: &'a TriangleMesh,
    center: Vec3,
    radius: f64,
    triangles: Vec<u32>,
}

impl<'a> LocalSurface<'a> {
    /// Wraps an explicit triangle selection. Triangle indices are sorted.
    pub fn from_triangles(
        mesh: &'a TriangleMesh,
        center: Vec3,
        radius: f64,
        mut triangles: Vec<u32>,
    ) -> Result<Self> {
        if triangles.is_empty() {
            return Err(Error::EmptySurface { radius });
        }
        triangles.sort_unstable();
        triangles.dedup();
        Ok(LocalSurface {
            mesh,
            center,
            radius,
            triangles,
        })
    }

    pub fn mesh(&self) -> &'a TriangleMesh {
        self.mesh
    }

    pub fn center(&self) -> Vec3 {
        self.center
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }

    pub fn triangle_indices(&self) -> &[u32] {
        &self.triangles
    }

    pub fn triangles(&self) -> impl Iterator<Item = [Vec3; 3]> + '_ {
        self.triangles.iter().map(|&t| self.mesh.corners(t as usize))
    }

    /// Distinct vertex indices of the included triangles, sorted.
    pub fn vertex_indices(&self) -> Vec<u32> {
        let mut v: Vec<u32> = self
            .triangles
            .iter()
            .flat_map(|&t| self.mesh.triangles()[t as usize])
            .collect();
        v.sort_unstable();
        v.dedup();
        v
    }

    pub fn vertices(&self) -> Vec<Vec3> {
        self.vertex_indices()
            .into_iter()
            .map(|i| self.mesh.vertices()[i as usize])
            .collect()
    }
}

/// Sphere crop by exhaustive scan over all triangles.
pub fn crop_local_surface(mesh: &TriangleMesh, center: Vec3, radius: f64) -> Result<LocalSurface<'_>> {
    if !(radius > 0.0) {
        return Err(Error::InvalidParameter(format!("support radius {radius} must be positive")));
    }
    let r2 = radius * radius;
    let inside: Vec<bool> = mesh
        .vertices()
        .iter()
        .map(|v| (v - center).norm_squared() <= r2)
        .collect();
    let tris = mesh
        .triangles()
        .iter()
        .enumerate()
        .filter(|(_, t)| t.iter().any(|&k| inside[k as usize]))
        .map(|(i, _)| i as u32)
        .collect();
    LocalSurface::from_triangles(mesh, center, radius, tris)
}

/// Spatial index over a mesh's vertices plus vertex→triangle adjacency,
/// for repeated cropping and nearest-vertex queries.
#[derive(Debug, Clone)]
pub struct MeshSearch<'a> {
    mesh: &'a TriangleMesh,
    tree: KdTree,
    vertex_triangles: Vec<Vec<u32>>,
}

impl<'a> MeshSearch<'a> {
    pub fn new(mesh: &'a TriangleMesh) -> Self {
        MeshSearch {
            mesh,
            tree: KdTree::from_points3(mesh.vertices()),
            vertex_triangles: mesh.vertex_triangles(),
        }
    }

    pub fn mesh(&self) -> &'a TriangleMesh {
        self.mesh
    }

    pub fn tree(&self) -> &KdTree {
        &self.tree
    }

    /// Same result as [`crop_local_surface`], using the vertex tree.
    pub fn crop(&self, center: Vec3, radius: f64) -> Result<LocalSurface<'a>> {
        if !(radius > 0.0) {
            return Err(Error::InvalidParameter(format!("support radius {radius} must be positive")));
        }
        let mut tris: Vec<u32> = self
            .vertices_within(center, radius)
            .into_iter()
            .flat_map(|v| self.vertex_triangles[v].iter().copied())
            .collect();
        tris.sort_unstable();
        tris.dedup();
        LocalSurface::from_triangles(self.mesh, center, radius, tris)
    }

    pub fn vertices_within(&self, center: Vec3, radius: f64) -> Vec<usize> {
        self.tree.within_radius(center.as_slice(), radius)
    }

    /// Index and distance of the nearest vertex.
    pub fn nearest_vertex(&self, q: &Vec3) -> Option<(usize, f64)> {
        self.tree
            .nearest(q.as_slice())
            .map(|n| (n.index, n.dist_sq.sqrt()))
    }
}
