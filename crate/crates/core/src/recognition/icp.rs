//! Point-to-point ICP in the row-vector convention.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{Mat3, Vec3};
use crate::kdtree::KdTree;
use crate::mesh::TriangleMesh;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Correspondence {
    /// Nearest target vertex.
    Vertex,
    /// Closest point on the triangles around the nearest target vertex
    /// (falls back to the vertex when the target has no triangles).
    Surface,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IcpParams {
    /// Correspondence rejection radius in mr.
    pub rejection_mr: f64,
    pub max_iterations: usize,
    /// Stop when the mean residual changes by less than this (mr).
    pub tolerance_mr: f64,
    /// Model points used while iterating (evenly strided); the final
    /// residual uses every point.
    pub max_points: usize,
    pub correspondence: Correspondence,
}

impl Default for IcpParams {
    fn default() -> Self {
        IcpParams {
            rejection_mr: 4.0,
            max_iterations: 50,
            tolerance_mr: 1e-4,
            max_points: 2000,
            correspondence: Correspondence::Surface,
        }
    }
}

impl IcpParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.rejection_mr > 0.0 && self.tolerance_mr > 0.0) || self.max_points == 0 {
            return Err(Error::InvalidParameter(format!("bad ICP parameters {self:?}")));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct IcpResult {
    pub rotation: Mat3,
    pub translation: Vec3,
    /// Mean correspondence distance in mr; `+∞` when nothing was in range.
    pub residual_mr: f64,
    pub correspondences: usize,
    pub iterations: usize,
}

/// Registration target: points with a spatial index and, optionally, the
/// triangles incident to each point.
#[derive(Debug, Clone)]
pub struct IcpTarget {
    points: Vec<Vec3>,
    tree: KdTree,
    /// Per point, incident triangles as local point indices.
    rings: Vec<Vec<[u32; 3]>>,
}

impl IcpTarget {
    pub fn from_points(points: Vec<Vec3>) -> Self {
        let tree = KdTree::from_points3(&points);
        let rings = vec![Vec::new(); points.len()];
        IcpTarget { points, tree, rings }
    }

    /// Vertices of `mesh` with `keep[v]` set (all when `None`), plus the
    /// triangles whose three corners are kept.
    pub fn from_mesh(mesh: &TriangleMesh, keep: Option<&[bool]>) -> Self {
        let n = mesh.vertex_count();
        let kept = |v: usize| keep.is_none_or(|k| k[v]);
        let mut local = vec![u32::MAX; n];
        let mut points = Vec::new();
        for v in 0..n {
            if kept(v) {
                local[v] = points.len() as u32;
                points.push(mesh.vertices()[v]);
            }
        }
        let mut rings = vec![Vec::new(); points.len()];
        for t in mesh.triangles() {
            if t.iter().all(|&k| kept(k as usize)) {
                let lt = t.map(|k| local[k as usize]);
                for &k in &lt {
                    rings[k as usize].push(lt);
                }
            }
        }
        let tree = KdTree::from_points3(&points);
        IcpTarget { points, tree, rings }
    }

    pub fn points(&self) -> &[Vec3] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn nearest_vertex(&self, q: &Vec3) -> Option<(usize, f64)> {
        self.tree.nearest(q.as_slice()).map(|n| (n.index, n.dist_sq))
    }

    /// Corresponding target point and squared distance.
    pub fn closest(&self, q: &Vec3, mode: Correspondence) -> Option<(Vec3, f64)> {
        let (i, d2) = self.nearest_vertex(q)?;
        let mut best = (self.points[i], d2);
        if mode == Correspondence::Surface {
            for t in &self.rings[i] {
                let c = closest_on_triangle(
                    q,
                    &self.points[t[0] as usize],
                    &self.points[t[1] as usize],
                    &self.points[t[2] as usize],
                );
                let d = (c - q).norm_squared();
                if d < best.1 {
                    best = (c, d);
                }
            }
        }
        Some(best)
    }
}

/// Closest point to `p` on triangle `abc` (Voronoi-region walk).
pub fn closest_on_triangle(p: &Vec3, a: &Vec3, b: &Vec3, c: &Vec3) -> Vec3 {
    let ab = b - a;
    let ac = c - a;
    let ap = p - a;
    let d1 = ab.dot(&ap);
    let d2 = ac.dot(&ap);
    if d1 <= 0.0 && d2 <= 0.0 {
        return *a;
    }
    let bp = p - b;
    let d3 = ab.dot(&bp);
    let d4 = ac.dot(&bp);
    if d3 >= 0.0 && d4 <= d3 {
        return *b;
    }
    let vc = d1 * d4 - d3 * d2;
    if vc <= 0.0 && d1 >= 0.0 && d3 <= 0.0 {
        return a + ab * (d1 / (d1 - d3));
    }
    let cp = p - c;
    let d5 = ab.dot(&cp);
    let d6 = ac.dot(&cp);
    if d6 >= 0.0 && d5 <= d6 {
        return *c;
    }
    let vb = d5 * d2 - d1 * d6;
    if vb <= 0.0 && d2 >= 0.0 && d6 <= 0.0 {
        return a + ac * (d2 / (d2 - d6));
    }
    let va = d3 * d6 - d5 * d4;
    if va <= 0.0 && (d4 - d3) >= 0.0 && (d5 - d6) >= 0.0 {
        return b + (c - b) * ((d4 - d3) / ((d4 - d3) + (d5 - d6)));
    }
    let denom = 1.0 / (va + vb + vc);
    a + ab * (vb * denom) + ac * (vc * denom)
}

/// Least-squares rigid motion with `target ≈ source · R + t`.
pub fn fit_rigid(source: &[Vec3], target: &[Vec3]) -> (Mat3, Vec3) {
    let n = source.len() as f64;
    let cs = source.iter().sum::<Vec3>() / n;
    let ct = target.iter().sum::<Vec3>() / n;
    let mut h = Mat3::zeros();
    for (a, b) in source.iter().zip(target) {
        h += (a - cs) * (b - ct).transpose();
    }
    let svd = h.svd(true, true);
    let u = svd.u.unwrap();
    let v = svd.v_t.unwrap().transpose();
    let mut d = Mat3::identity();
    if (v * u.transpose()).determinant() < 0.0 {
        d[(2, 2)] = -1.0;
    }
    // column form: target = Rc·source + t with Rc = V D Uᵀ
    let rc = v * d * u.transpose();
    (rc.transpose(), ct - rc * cs)
}

fn pairs(
    target: &IcpTarget,
    model: &[Vec3],
    r: &Mat3,
    t: &Vec3,
    reject_sq: f64,
    mode: Correspondence,
) -> (Vec<Vec3>, Vec<Vec3>, f64) {
    let mut src = Vec::new();
    let mut dst = Vec::new();
    let mut sum = 0.0;
    for m in model {
        let q = r.tr_mul(m) + t;
        if let Some((c, d2)) = target.closest(&q, mode) {
            if d2 <= reject_sq {
                src.push(*m);
                dst.push(c);
                sum += d2.sqrt();
            }
        }
    }
    (src, dst, sum)
}

/// Refines `(rotation, translation)` so that `model · R + t` hugs the
/// target. `mr` converts the mr-valued parameters to world units.
pub fn icp_refine_target(
    target: &IcpTarget,
    model: &[Vec3],
    rotation: Mat3,
    translation: Vec3,
    mr: f64,
    params: &IcpParams,
) -> IcpResult {
    let reject = params.rejection_mr * mr;
    let reject_sq = reject * reject;
    let mode = params.correspondence;
    let stride = model.len().div_ceil(params.max_points).max(1);
    let sample: Vec<Vec3> = model.iter().step_by(stride).copied().collect();
    let (mut r, mut t) = (rotation, translation);
    let mut prev = f64::INFINITY;
    let mut iterations = 0;
    for _ in 0..params.max_iterations {
        let (src, dst, sum) = pairs(target, &sample, &r, &t, reject_sq, mode);
        if src.len() < 3 {
            break;
        }
        let mean = sum / src.len() as f64;
        if mean == 0.0 || (prev - mean).abs() < params.tolerance_mr * mr {
            break;
        }
        prev = mean;
        let (nr, nt) = fit_rigid(&src, &dst);
        r = nr;
        t = nt;
        iterations += 1;
    }
    let (src, _, sum) = pairs(target, model, &r, &t, reject_sq, mode);
    if src.is_empty() {
        return IcpResult {
            rotation,
            translation,
            residual_mr: f64::INFINITY,
            correspondences: 0,
            iterations,
        };
    }
    IcpResult {
        rotation: r,
        translation: t,
        residual_mr: sum / src.len() as f64 / mr,
        correspondences: src.len(),
        iterations,
    }
}

/// Registers `model` vertices onto `scene` starting from
/// `(rotation, translation)`; `mr` is the model resolution.
pub fn icp_refine(
    scene: &TriangleMesh,
    model: &TriangleMesh,
    rotation: Mat3,
    translation: Vec3,
    mr: f64,
    params: &IcpParams,
) -> Result<IcpResult> {
    params.validate()?;
    if !(mr > 0.0) {
        return Err(Error::InvalidParameter(format!("mesh resolution {mr} must be positive")));
    }
    let target = IcpTarget::from_mesh(scene, None);
    Ok(icp_refine_target(&target, model.vertices(), rotation, translation, mr, params))
}
