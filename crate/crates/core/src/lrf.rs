//! Local reference frames from the continuous scatter matrix of a local
//! surface, with sign disambiguation toward the majority of the scatter.
//!
//! Axes are stored as the ROWS of a 3×3 matrix. The local coordinates of an
//! offset `d` are therefore `axes · d` (column form of `d·axesᵀ`).

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{sorted_symmetric_eigen, Mat3, Vec3};
use crate::mesh::LocalSurface;

/// Sign products below this magnitude fall back to the deterministic tie-break.
pub const SIGN_EPS: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LocalReferenceFrame {
    pub origin: Vec3,
    /// Rows are the x, y, z axes in world coordinates.
    pub axes: Mat3,
    /// Eigenvalues of the overall scatter matrix, descending.
    pub eigenvalues: [f64; 3],
}

impl LocalReferenceFrame {
    pub fn x_axis(&self) -> Vec3 {
        self.axes.row(0).transpose()
    }

    pub fn y_axis(&self) -> Vec3 {
        self.axes.row(1).transpose()
    }

    pub fn z_axis(&self) -> Vec3 {
        self.axes.row(2).transpose()
    }

    /// `λ1/λ2`; large values mean a well-defined x axis.
    pub fn eigen_ratio_12(&self) -> f64 {
        self.eigenvalues[0] / self.eigenvalues[1].max(f64::MIN_POSITIVE)
    }

    pub fn eigen_ratio_23(&self) -> f64 {
        self.eigenvalues[1] / self.eigenvalues[2].max(f64::MIN_POSITIVE)
    }

    /// Local coordinates `(q − origin)·axesᵀ`.
    #[inline]
    pub fn to_local(&self, q: &Vec3) -> Vec3 {
        self.axes * (q - self.origin)
    }

    /// Inverse of [`Self::to_local`].
    #[inline]
    pub fn to_world(&self, local: &Vec3) -> Vec3 {
        self.axes.tr_mul(local) + self.origin
    }
}

/// Accumulated weighted scatter of a local surface.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScatterAccumulation {
    pub scatter: Mat3,
    /// `Σ w1·w2·(1/6)·Σ_j (p_ij − p)`, dotted with eigenvectors for signs.
    pub h: Vec3,
}

/// Area-normalized integral of `(x − p)(x − p)ᵀ` over a triangle.
pub fn triangle_scatter(p1: &Vec3, p2: &Vec3, p3: &Vec3, p: &Vec3) -> Mat3 {
    let d = [p1 - p, p2 - p, p3 - p];
    let sum = d[0] + d[1] + d[2];
    let diag = d[0] * d[0].transpose() + d[1] * d[1].transpose() + d[2] * d[2].transpose();
    (sum * sum.transpose() + diag) / 12.0
}

/// Weighted sum of per-triangle scatter matrices. `w1` is the triangle's
/// share of the total area and `w2 = (r − |p − centroid|)²`, with the
/// distance term clamped at zero for centroids beyond `r`.
pub fn accumulate_scatter(surface: &LocalSurface<'_>) -> Result<ScatterAccumulation> {
    let p = surface.center();
    let r = surface.radius();
    let mut total_area = 0.0;
    let mut scatter = Mat3::zeros();
    let mut h = Vec3::zeros();
    for [a, b, c] in surface.triangles() {
        let area2 = (b - a).cross(&(c - a)).norm();
        if area2 == 0.0 {
            continue;
        }
        total_area += area2;
        let centroid = (a + b + c) / 3.0;
        let w2 = (r - (p - centroid).norm()).max(0.0).powi(2);
        let w = area2 * w2;
        scatter += triangle_scatter(&a, &b, &c, &p) * w;
        h += ((a - p) + (b - p) + (c - p)) * (w / 6.0);
    }
    if total_area == 0.0 {
        return Err(Error::ZeroArea);
    }
    scatter /= total_area;
    h /= total_area;
    // exact symmetry
    scatter = (scatter + scatter.transpose()) * 0.5;
    Ok(ScatterAccumulation { scatter, h })
}

fn disambiguate(v: Vec3, h: &Vec3) -> Vec3 {
    let s = h.dot(&v);
    if s.abs() >= SIGN_EPS {
        return if s > 0.0 { v } else { -v };
    }
    let k = v.iamax();
    if v[k] < 0.0 {
        -v
    } else {
        v
    }
}

/// Builds the frame from an accumulated scatter.
pub fn lrf_from_scatter(origin: Vec3, acc: &ScatterAccumulation) -> Result<LocalReferenceFrame> {
    let (vals, vecs) = sorted_symmetric_eigen(&acc.scatter);
    if !(vals[0] > 0.0) || vals[1] <= 1e-12 * vals[0] {
        return Err(Error::DegenerateScatter(vals));
    }
    let x = disambiguate(vecs[0], &acc.h);
    let z = disambiguate(vecs[2], &acc.h);
    let y = z.cross(&x);
    let axes = Mat3::from_rows(&[x.transpose(), y.transpose(), z.transpose()]);
    Ok(LocalReferenceFrame {
        origin,
        axes,
        eigenvalues: vals,
    })
}

/// The unique, sign-disambiguated frame of a local surface.
pub fn compute_lrf(surface: &LocalSurface<'_>) -> Result<LocalReferenceFrame> {
    let acc = accumulate_scatter(surface)?;
    lrf_from_scatter(surface.center(), &acc)
}

/// Rotation error between two frames in degrees, in `[0, 180]`.
pub fn lrf_error(ls: &LocalReferenceFrame, lm: &LocalReferenceFrame) -> f64 {
    let rel = ls.axes * lm.axes.transpose();
    ((rel.trace() - 1.0) / 2.0).clamp(-1.0, 1.0).acos().to_degrees()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{apply_rigid, axis_angle_row, random_rotation, rotation_residuals};
    use crate::mesh::{crop_local_surface, shapes, MeshSearch, TriangleMesh};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn point_triangles() {
        let p = Vec3::new(1.0, 2.0, 3.0);
        assert_eq!(triangle_scatter(&p, &p, &p, &p), Mat3::zeros());
        let q = Vec3::new(-1.0, 0.5, 2.0);
        let d = q - p;
        assert!((triangle_scatter(&q, &q, &q, &p) - d * d.transpose()).norm() < 1e-12);
    }

    #[test]
    fn scatter_matches_quadrature() {
        // 2D Gauss-free check: fine uniform barycentric grid, midpoint rule
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let rv = |rng: &mut ChaCha8Rng| Vec3::new(rng.random(), rng.random(), rng.random());
        let (a, b, c, p) = (rv(&mut rng), rv(&mut rng), rv(&mut rng), rv(&mut rng));
        let n = 400;
        let mut acc = Mat3::zeros();
        let mut count = 0.0;
        for i in 0..n {
            for j in 0..n - i {
                // centroids of the sub-triangles of a regular subdivision
                for (s, t) in [
                    ((i as f64 + 1.0 / 3.0) / n as f64, (j as f64 + 1.0 / 3.0) / n as f64),
                    ((i as f64 + 2.0 / 3.0) / n as f64, (j as f64 + 2.0 / 3.0) / n as f64),
                ] {
                    if s + t > 1.0 {
                        continue;
                    }
                    let x = a + (b - a) * s + (c - a) * t - p;
                    acc += x * x.transpose();
                    count += 1.0;
                }
            }
        }
        acc /= count;
        let closed = triangle_scatter(&a, &b, &c, &p);
        assert!((acc - closed).norm() / closed.norm() < 1e-4);
    }

    fn single_triangle() -> TriangleMesh {
        TriangleMesh::new(
            vec![Vec3::new(0.0, 0.0, 0.0), Vec3::new(1.0, 0.0, 0.0), Vec3::new(0.0, 1.0, 0.0)],
            vec![[0, 1, 2]],
        )
        .unwrap()
    }

    #[test]
    fn single_triangle_weight() {
        let m = single_triangle();
        let p = Vec3::new(0.1, 0.1, 0.2);
        let r = 2.0;
        let s = crop_local_surface(&m, p, r).unwrap();
        let acc = accumulate_scatter(&s).unwrap();
        let [a, b, c] = m.corners(0);
        let w2 = (r - (p - (a + b + c) / 3.0).norm()).powi(2);
        let expect = triangle_scatter(&a, &b, &c, &p) * w2;
        assert!((acc.scatter - expect).norm() < 1e-12);
    }

    #[test]
    fn centroid_on_sphere_contributes_nothing() {
        let m = single_triangle();
        let centroid = Vec3::new(1.0 / 3.0, 1.0 / 3.0, 0.0);
        let p = Vec3::new(0.0, 0.0, 0.0);
        let r = centroid.norm();
        let s = crop_local_surface(&m, p, r).unwrap();
        let acc = accumulate_scatter(&s).unwrap();
        assert!(acc.scatter.norm() < 1e-24);
    }

    #[test]
    fn two_triangles_match_direct_formula() {
        let m = TriangleMesh::new(
            vec![
                Vec3::new(0.0, 0.0, 0.0),
                Vec3::new(2.0, 0.0, 0.1),
                Vec3::new(0.0, 1.0, 0.0),
                Vec3::new(2.0, 1.5, -0.3),
            ],
            vec![[0, 1, 2], [1, 3, 2]],
        )
        .unwrap();
        let p = Vec3::new(0.7, 0.4, 0.05);
        let r = 3.0;
        let s = crop_local_surface(&m, p, r).unwrap();
        let acc = accumulate_scatter(&s).unwrap();
        // independent evaluation: explicit area ratio and double sums
        let mut areas = Vec::new();
        for t in 0..2 {
            let [a, b, c] = m.corners(t);
            areas.push(0.5 * (b - a).cross(&(c - a)).norm());
        }
        let total: f64 = areas.iter().sum();
        let mut expect = Mat3::zeros();
        let mut h = Vec3::zeros();
        for t in 0..2 {
            let pts = m.corners(t);
            let mut ci = Mat3::zeros();
            for j in 0..3 {
                for k in 0..3 {
                    ci += (pts[j] - p) * (pts[k] - p).transpose();
                }
                ci += (pts[j] - p) * (pts[j] - p).transpose();
            }
            ci /= 12.0;
            let cen = (pts[0] + pts[1] + pts[2]) / 3.0;
            let w = areas[t] / total * (r - (p - cen).norm()).powi(2);
            expect += ci * w;
            h += (pts[0] + pts[1] + pts[2] - 3.0 * p) * (w / 6.0);
        }
        assert!((acc.scatter - expect).norm() < 1e-12);
        assert!((acc.h - h).norm() < 1e-12);
    }

    #[test]
    fn elongated_strip() {
        // 4×1 strip in the xy plane, center at origin
        let mut verts = Vec::new();
        for j in 0..=4 {
            for i in 0..=16 {
                verts.push(Vec3::new(i as f64 * 0.25 - 2.0, j as f64 * 0.25 - 0.5, 0.0));
            }
        }
        let mut faces = Vec::new();
        for j in 0..4u32 {
            for i in 0..16u32 {
                let a = j * 17 + i;
                faces.push([a, a + 1, a + 18]);
                faces.push([a, a + 18, a + 17]);
            }
        }
        let m = TriangleMesh::new(verts, faces).unwrap();
        let s = crop_local_surface(&m, Vec3::zeros(), 10.0).unwrap();
        let f = compute_lrf(&s).unwrap();
        assert!(f.z_axis().x.abs() < 1e-6 && f.z_axis().y.abs() < 1e-6);
        assert!((f.x_axis().x.abs() - 1.0).abs() < 1e-6);
        let (o, d) = rotation_residuals(&f.axes);
        assert!(o < 1e-9 && d < 1e-9);
    }

    #[test]
    fn covariant_under_rigid_motion() {
        let m = shapes::bundled_model(0);
        let mr = m.resolution().unwrap();
        let search = MeshSearch::new(&m);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut checked = 0;
        for _ in 0..40 {
            let p = m.vertices()[rng.random_range(0..m.vertex_count())];
            let f = compute_lrf(&search.crop(p, 15.0 * mr).unwrap()).unwrap();
            if f.eigen_ratio_12() < 1.05 || f.eigen_ratio_23() < 1.05 {
                continue;
            }
            let rot = random_rotation(&mut rng);
            let t = Vec3::new(rng.random(), rng.random(), rng.random()) * 5.0;
            let moved = m.transformed(&rot, &t);
            let p2 = apply_rigid(&rot, &t, &p);
            let f2 = compute_lrf(&crop_local_surface(&moved, p2, 15.0 * mr).unwrap()).unwrap();
            let expect = f.axes * rot;
            for k in 0..3 {
                let a = f2.axes.row(k).transpose();
                let b = expect.row(k).transpose();
                assert!(a.angle(&b) < 1e-6, "axis {k} off by {}", a.angle(&b));
            }
            checked += 1;
        }
        assert!(checked > 20);
    }

    #[test]
    fn repeat_is_bit_identical() {
        let m = shapes::bundled_model(1);
        let mr = m.resolution().unwrap();
        let p = m.vertices()[123];
        let s = crop_local_surface(&m, p, 15.0 * mr).unwrap();
        assert_eq!(compute_lrf(&s).unwrap(), compute_lrf(&s).unwrap());
    }

    #[test]
    fn sphere_patch_is_near_degenerate() {
        let m = shapes::icosphere(5);
        let p = m.vertices()[0];
        let f = compute_lrf(&crop_local_surface(&m, p, 0.3).unwrap()).unwrap();
        assert!(f.eigen_ratio_12() < 1.05, "ratio {}", f.eigen_ratio_12());
    }

    #[test]
    fn collinear_surface_is_degenerate() {
        let m = TriangleMesh::new(
            vec![Vec3::zeros(), Vec3::x(), Vec3::x() * 2.0],
            vec![[0, 1, 2]],
        )
        .unwrap();
        let s = crop_local_surface(&m, Vec3::zeros(), 5.0).unwrap();
        assert!(matches!(compute_lrf(&s), Err(Error::ZeroArea)));
    }

    #[test]
    fn error_metric_values() {
        let f = LocalReferenceFrame {
            origin: Vec3::zeros(),
            axes: Mat3::identity(),
            eigenvalues: [3.0, 2.0, 1.0],
        };
        assert_eq!(lrf_error(&f, &f), 0.0);
        for deg in [1.0f64, 30.0, 90.0, 135.0, 180.0] {
            let mut g = f;
            g.axes = f.axes * axis_angle_row(&f.z_axis(), deg.to_radians());
            assert!((lrf_error(&f, &g) - deg).abs() < 1e-6);
            assert!((lrf_error(&g, &f) - deg).abs() < 1e-6);
        }
        let mut g = f;
        g.axes = f.axes * axis_angle_row(&Vec3::new(1.0, 1.0, 0.0), std::f64::consts::PI);
        assert!((lrf_error(&f, &g) - 180.0).abs() < 1e-6);
    }
}
