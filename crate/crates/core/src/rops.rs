//! RoPS descriptor.
//!
//! The local point set is expressed in its LRF, rotated about each LRF axis
//! by a schedule of angles, projected onto the xy, xz and yz planes, binned
//! into normalized L×L distribution matrices, and summarized by low-order
//! central moments and Shannon entropy.

use std::f64::consts::TAU;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{Mat3, Vec3};
use crate::lrf::LocalReferenceFrame;
use crate::mesh::LocalSurface;

/// One statistic extracted from a distribution matrix.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Statistic {
    /// Central moment μ_mn.
    Moment(u32, u32),
    Entropy,
}

use Statistic::{Entropy as E, Moment as M};

const COMBINATIONS: [&[Statistic]; 8] = [
    &[M(0, 2), M(1, 1), M(2, 0)],
    &[M(0, 2), M(1, 1), M(2, 0), M(0, 3), M(1, 2), M(2, 1), M(3, 0)],
    &[
        M(0, 2), M(1, 1), M(2, 0), M(0, 3), M(1, 2), M(2, 1), M(3, 0),
        M(0, 4), M(1, 3), M(2, 2), M(3, 1), M(4, 0),
    ],
    &[
        M(0, 2), M(1, 1), M(2, 0), M(0, 3), M(1, 2), M(2, 1), M(3, 0),
        M(0, 4), M(1, 3), M(2, 2), M(3, 1), M(4, 0), E,
    ],
    &[M(1, 1), M(2, 1), M(1, 2), M(2, 2)],
    &[M(1, 1), M(2, 1), M(1, 2), M(2, 2), E],
    &[M(1, 1), M(2, 1), M(1, 2), M(2, 2), M(3, 1), M(1, 3)],
    &[M(1, 1), M(2, 1), M(1, 2), M(2, 2), M(3, 1), M(1, 3), E],
];

/// Statistics of combination `id` (1-based, 1..=8), in listed order.
pub fn combination(id: u8) -> Result<&'static [Statistic]> {
    if (1..=8).contains(&id) {
        Ok(COMBINATIONS[id as usize - 1])
    } else {
        Err(Error::InvalidParameter(format!("statistics combination {id} not in 1..=8")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RopsParams {
    /// Bins per side of each distribution matrix.
    pub bins: u32,
    /// Rotations about each axis.
    pub rotations: u32,
    /// Support radius in mesh-resolution units.
    pub radius_mr: f64,
    /// Statistics combination, 1..=8.
    pub combination: u8,
    /// Rotation angles are `k·angle_span/T` for `k = 0..T`.
    pub angle_span: f64,
}

impl Default for RopsParams {
    fn default() -> Self {
        RopsParams {
            bins: 5,
            rotations: 3,
            radius_mr: 15.0,
            combination: 6,
            angle_span: TAU,
        }
    }
}

impl RopsParams {
    pub fn validate(&self) -> Result<()> {
        if self.bins < 2 {
            return Err(Error::InvalidParameter("bins must be >= 2".into()));
        }
        if self.rotations < 1 {
            return Err(Error::InvalidParameter("rotations must be >= 1".into()));
        }
        if !(self.radius_mr > 0.0) {
            return Err(Error::InvalidParameter("support radius must be positive".into()));
        }
        if !(self.angle_span > 0.0 && self.angle_span.is_finite()) {
            return Err(Error::InvalidParameter("angle span must be positive".into()));
        }
        combination(self.combination)?;
        Ok(())
    }

    pub fn statistics(&self) -> Result<&'static [Statistic]> {
        combination(self.combination)
    }

    /// `3 axes × T rotations × 3 planes × |statistics|`.
    pub fn descriptor_len(&self) -> usize {
        let stats = combination(self.combination).map(|s| s.len()).unwrap_or(0);
        9 * self.rotations as usize * stats
    }

    pub fn angles(&self) -> Vec<f64> {
        (0..self.rotations)
            .map(|k| k as f64 * self.angle_span / self.rotations as f64)
            .collect()
    }
}

/// Normalized L×L histogram of projected points (row index = first
/// coordinate bin, column index = second coordinate bin).
#[derive(Debug, Clone, PartialEq)]
pub struct DistributionMatrix {
    bins: usize,
    values: Vec<f64>,
}

impl DistributionMatrix {
    /// Wraps raw values (row-major), checking shape, sign and normalization.
    pub fn from_values(bins: usize, values: Vec<f64>) -> Result<Self> {
        if bins < 1 || values.len() != bins * bins {
            return Err(Error::InvalidParameter(format!(
                "{} values for a {bins}×{bins} matrix",
                values.len()
            )));
        }
        if values.iter().any(|&v| !(v >= 0.0)) {
            return Err(Error::InvalidParameter("negative or NaN bin".into()));
        }
        let sum: f64 = values.iter().sum();
        if (sum - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidParameter(format!("bins sum to {sum}, not 1")));
        }
        Ok(DistributionMatrix { bins, values })
    }

    pub fn bins(&self) -> usize {
        self.bins
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.bins + j]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// `(ī, j̄)` with 1-based bin indices.
    pub fn centroid(&self) -> (f64, f64) {
        let (mut ib, mut jb) = (0.0, 0.0);
        for i in 0..self.bins {
            for j in 0..self.bins {
                let d = self.get(i, j);
                ib += (i + 1) as f64 * d;
                jb += (j + 1) as f64 * d;
            }
        }
        (ib, jb)
    }

    /// Central moment μ_mn.
    pub fn central_moment(&self, m: u32, n: u32) -> f64 {
        let (ib, jb) = self.centroid();
        let mut acc = 0.0;
        for i in 0..self.bins {
            let di = ((i + 1) as f64 - ib).powi(m as i32);
            for j in 0..self.bins {
                let d = self.get(i, j);
                if d != 0.0 {
                    acc += di * ((j + 1) as f64 - jb).powi(n as i32) * d;
                }
            }
        }
        acc
    }

    /// Shannon entropy with natural log; empty bins contribute 0.
    pub fn entropy(&self) -> f64 {
        -self
            .values
            .iter()
            .filter(|&&d| d > 0.0)
            .map(|&d| d * d.ln())
            .sum::<f64>()
    }
}

/// Bin index along one axis. A collapsed extent puts everything in bin 0;
/// the upper boundary is closed.
#[inline]
fn bin_of(v: f64, lo: f64, width: f64, bins: usize) -> usize {
    if width <= 0.0 {
        return 0;
    }
    let k = ((v - lo) / width * bins as f64).floor();
    if k < 0.0 {
        0
    } else {
        (k as usize).min(bins - 1)
    }
}

/// Treats extents that are pure round-off relative to the point scale as collapsed.
fn effective_width(lo: f64, hi: f64, scale: f64) -> f64 {
    let w = hi - lo;
    if w <= 1e-12 * scale {
        0.0
    } else {
        w
    }
}

/// Bins 2D points over their bounding rectangle into an L×L matrix summing to 1.
pub fn distribution_matrix(points: &[[f64; 2]], bins: usize) -> Result<DistributionMatrix> {
    if points.is_empty() {
        return Err(Error::InvalidParameter("no points to bin".into()));
    }
    if bins < 1 {
        return Err(Error::InvalidParameter("bins must be positive".into()));
    }
    let (mut lo, mut hi) = ([f64::INFINITY; 2], [f64::NEG_INFINITY; 2]);
    for p in points {
        for k in 0..2 {
            lo[k] = lo[k].min(p[k]);
            hi[k] = hi[k].max(p[k]);
        }
    }
    let scale = lo
        .iter()
        .chain(hi.iter())
        .fold(0.0f64, |a, b| a.max(b.abs()))
        .max((hi[0] - lo[0]).max(hi[1] - lo[1]));
    let w = [
        effective_width(lo[0], hi[0], scale),
        effective_width(lo[1], hi[1], scale),
    ];
    let mut counts = vec![0usize; bins * bins];
    for p in points {
        let i = bin_of(p[0], lo[0], w[0], bins);
        let j = bin_of(p[1], lo[1], w[1], bins);
        counts[i * bins + j] += 1;
    }
    let n = points.len() as f64;
    Ok(DistributionMatrix {
        bins,
        values: counts.into_iter().map(|c| c as f64 / n).collect(),
    })
}

/// Statistics of `d` for combination `id`, in listed order.
pub fn matrix_statistics(d: &DistributionMatrix, id: u8) -> Result<Vec<f64>> {
    Ok(combination(id)?
        .iter()
        .map(|s| match *s {
            Statistic::Moment(m, n) => d.central_moment(m, n),
            Statistic::Entropy => d.entropy(),
        })
        .collect())
}

/// A RoPS feature vector and the parameters that produced it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RopsDescriptor {
    pub values: Vec<f64>,
    pub params: RopsParams,
}

/// Expresses points in the frame: `(q − p)·axesᵀ`.
pub fn transform_to_lrf(points: &[Vec3], lrf: &LocalReferenceFrame) -> Vec<Vec3> {
    points.iter().map(|q| lrf.to_local(q)).collect()
}

/// Column-form rotation about a coordinate axis (0 = x, 1 = y, 2 = z).
fn axis_rotation(axis: usize, angle: f64) -> Mat3 {
    let (s, c) = angle.sin_cos();
    match axis {
        0 => Mat3::new(1.0, 0.0, 0.0, 0.0, c, -s, 0.0, s, c),
        1 => Mat3::new(c, 0.0, s, 0.0, 1.0, 0.0, -s, 0.0, c),
        _ => Mat3::new(c, -s, 0.0, s, c, 0.0, 0.0, 0.0, 1.0),
    }
}

/// Descriptor of points already expressed in their LRF.
pub fn rops_from_local_points(local: &[Vec3], params: &RopsParams) -> Result<RopsDescriptor> {
    params.validate()?;
    if local.len() < 3 {
        return Err(Error::DegenerateSurface(format!("{} points", local.len())));
    }
    // collinearity check via the point scatter
    let mean: Vec3 = local.iter().sum::<Vec3>() / local.len() as f64;
    let cov: Mat3 = local
        .iter()
        .map(|q| (q - mean) * (q - mean).transpose())
        .sum();
    let ev = cov.symmetric_eigenvalues();
    let mut ev = [ev[0], ev[1], ev[2]];
    ev.sort_by(|a, b| b.total_cmp(a));
    if !(ev[0] > 0.0) || ev[1] <= 1e-12 * ev[0] {
        return Err(Error::DegenerateSurface("points are collinear".into()));
    }
    let bins = params.bins as usize;
    let stats = params.statistics()?;
    let mut values = Vec::with_capacity(params.descriptor_len());
    let mut rotated = vec![Vec3::zeros(); local.len()];
    let mut proj = vec![[0.0f64; 2]; local.len()];
    for axis in 0..3 {
        for theta in params.angles() {
            let rot = axis_rotation(axis, theta);
            for (dst, q) in rotated.iter_mut().zip(local) {
                *dst = rot * q;
            }
            for (a, b) in [(0usize, 1usize), (0, 2), (1, 2)] {
                for (dst, q) in proj.iter_mut().zip(&rotated) {
                    *dst = [q[a], q[b]];
                }
                let d = distribution_matrix(&proj, bins)?;
                for s in stats {
                    values.push(match *s {
                        Statistic::Moment(m, n) => d.central_moment(m, n),
                        Statistic::Entropy => d.entropy(),
                    });
                }
            }
        }
    }
    Ok(RopsDescriptor {
        values,
        params: *params,
    })
}

/// RoPS descriptor of the vertices of `surface` in `lrf`.
pub fn compute_rops(
    surface: &LocalSurface<'_>,
    lrf: &LocalReferenceFrame,
    params: &RopsParams,
) -> Result<RopsDescriptor> {
    let local = transform_to_lrf(&surface.vertices(), lrf);
    rops_from_local_points(&local, params)
}

/// Euclidean distance between two descriptors of the same shape.
pub fn descriptor_distance(a: &RopsDescriptor, b: &RopsDescriptor) -> Result<f64> {
    if a.params != b.params {
        return Err(Error::VersionMismatch("descriptors built with different parameters".into()));
    }
    l2_distance(&a.values, &b.values)
}

pub fn l2_distance(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::LengthMismatch(a.len(), b.len()));
    }
    Ok(a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt())
}

/// Mean L2 distance between paired descriptors after per-dimension min-max
/// normalization over both sets (constant dimensions map to 0).
pub fn average_normalized_l2(a: &[Vec<f64>], b: &[Vec<f64>]) -> Result<f64> {
    if a.len() != b.len() || a.is_empty() {
        return Err(Error::InvalidParameter("need equally sized, non-empty descriptor sets".into()));
    }
    let dim = a[0].len();
    if let Some(bad) = a.iter().chain(b).find(|v| v.len() != dim) {
        return Err(Error::LengthMismatch(dim, bad.len()));
    }
    let mut lo = vec![f64::INFINITY; dim];
    let mut hi = vec![f64::NEG_INFINITY; dim];
    for v in a.iter().chain(b) {
        for k in 0..dim {
            lo[k] = lo[k].min(v[k]);
            hi[k] = hi[k].max(v[k]);
        }
    }
    let norm = |v: &[f64], k: usize| {
        let w = hi[k] - lo[k];
        if w > 0.0 {
            (v[k] - lo[k]) / w
        } else {
            0.0
        }
    };
    let total: f64 = a
        .iter()
        .zip(b)
        .map(|(x, y)| {
            (0..dim)
                .map(|k| (norm(x, k) - norm(y, k)).powi(2))
                .sum::<f64>()
                .sqrt()
        })
        .sum();
    Ok(total / a.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{apply_rigid, random_rotation};
    use crate::lrf::compute_lrf;
    use crate::mesh::{crop_local_surface, shapes, MeshSearch};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn identical_points_fill_one_bin() {
        let d = distribution_matrix(&[[0.3, -2.0]; 7], 5).unwrap();
        assert_eq!(d.get(0, 0), 1.0);
        assert_eq!(d.values().iter().sum::<f64>(), 1.0);
    }

    #[test]
    fn grid_centers_fill_every_bin() {
        for l in 2..8usize {
            let mut pts = Vec::new();
            for i in 0..l {
                for j in 0..l {
                    pts.push([(i as f64 + 0.5) / l as f64, (j as f64 + 0.5) / l as f64 * 3.0]);
                }
            }
            let d = distribution_matrix(&pts, l).unwrap();
            for v in d.values() {
                assert!((v - 1.0 / (l * l) as f64).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn binning_matches_brute_force() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let pts: Vec<[f64; 2]> = (0..1000)
            .map(|_| [rng.random_range(-3.0..1.0), rng.random_range(0.0..0.01)])
            .collect();
        let d = distribution_matrix(&pts, 5).unwrap();
        // oracle: explicit bin edges, count membership per bin
        let (x0, x1) = pts.iter().fold((f64::MAX, f64::MIN), |a, p| (a.0.min(p[0]), a.1.max(p[0])));
        let (y0, y1) = pts.iter().fold((f64::MAX, f64::MIN), |a, p| (a.0.min(p[1]), a.1.max(p[1])));
        for i in 0..5 {
            for j in 0..5 {
                let ex = |k: usize, lo: f64, hi: f64| lo + (hi - lo) * k as f64 / 5.0;
                let count = pts
                    .iter()
                    .filter(|p| {
                        let in_x = p[0] >= ex(i, x0, x1) && (p[0] < ex(i + 1, x0, x1) || (i == 4 && p[0] <= x1));
                        let in_y = p[1] >= ex(j, y0, y1) && (p[1] < ex(j + 1, y0, y1) || (j == 4 && p[1] <= y1));
                        in_x && in_y
                    })
                    .count();
                assert!((d.get(i, j) - count as f64 / 1000.0).abs() < 1e-12, "bin {i},{j}");
            }
        }
    }

    #[test]
    fn point_mass_statistics() {
        let d = DistributionMatrix::from_values(2, vec![1.0, 0.0, 0.0, 0.0]).unwrap();
        let s = matrix_statistics(&d, 6).unwrap();
        assert_eq!(s, vec![0.0, 0.0, 0.0, 0.0, 0.0]);
    }

    #[test]
    fn diagonal_statistics() {
        let d = DistributionMatrix::from_values(2, vec![0.5, 0.0, 0.0, 0.5]).unwrap();
        let s = matrix_statistics(&d, 6).unwrap();
        // (±0.5)(±0.5) and (0.25)(0.25) at both diagonal bins, each with mass 0.5
        assert_eq!(s[0], 0.25);
        assert_eq!(s[1], 0.0);
        assert_eq!(s[2], 0.0);
        assert_eq!(s[3], 0.0625);
        assert!((s[4] - 2f64.ln()).abs() < 1e-15);
    }

    #[test]
    fn uniform_statistics() {
        for l in 2..7usize {
            let d = DistributionMatrix::from_values(l, vec![1.0 / (l * l) as f64; l * l]).unwrap();
            assert!(d.central_moment(1, 1).abs() < 1e-12);
            assert!((d.entropy() - ((l * l) as f64).ln()).abs() < 1e-12);
        }
    }

    #[test]
    fn lengths_follow_law() {
        for c in 1..=8u8 {
            for t in 1..=6u32 {
                let p = RopsParams {
                    combination: c,
                    rotations: t,
                    ..Default::default()
                };
                assert_eq!(p.descriptor_len(), 9 * t as usize * combination(c).unwrap().len());
            }
        }
        assert_eq!(RopsParams::default().descriptor_len(), 135);
    }

    #[test]
    fn transform_basics() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let lrf = LocalReferenceFrame {
            origin: Vec3::new(1.0, 2.0, 3.0),
            axes: random_rotation(&mut rng),
            eigenvalues: [3.0, 2.0, 1.0],
        };
        let out = transform_to_lrf(&[lrf.origin, lrf.origin + lrf.x_axis()], &lrf);
        assert!(out[0].norm() < 1e-15);
        assert!((out[1] - Vec3::x()).norm() < 1e-12);
        let q = Vec3::new(-4.0, 0.5, 9.0);
        assert!((lrf.to_world(&lrf.to_local(&q)) - q).norm() < 1e-12);
    }

    fn patch_descriptor(mesh: &crate::mesh::TriangleMesh, p: Vec3, r: f64) -> RopsDescriptor {
        let s = crop_local_surface(mesh, p, r).unwrap();
        let f = compute_lrf(&s).unwrap();
        compute_rops(&s, &f, &RopsParams::default()).unwrap()
    }

    #[test]
    fn deterministic_and_rigid_invariant() {
        let m = shapes::bundled_model(0);
        let mr = m.resolution().unwrap();
        let p = m.vertices()[500];
        let a = patch_descriptor(&m, p, 15.0 * mr);
        assert_eq!(a, patch_descriptor(&m, p, 15.0 * mr));
        assert_eq!(a.values.len(), 135);
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let rot = random_rotation(&mut rng);
        let t = Vec3::new(0.3, -2.0, 7.0);
        let moved = m.transformed(&rot, &t);
        let b = patch_descriptor(&moved, apply_rigid(&rot, &t, &p), 15.0 * mr);
        let l1: f64 = a.values.iter().zip(&b.values).map(|(x, y)| (x - y).abs()).sum();
        assert!(l1 < 0.05, "L1 {l1}");
    }

    #[test]
    fn duplicated_points_leave_descriptor_unchanged() {
        let m = shapes::bundled_model(1);
        let mr = m.resolution().unwrap();
        let search = MeshSearch::new(&m);
        let s = search.crop(m.vertices()[42], 15.0 * mr).unwrap();
        let f = compute_lrf(&s).unwrap();
        let local = transform_to_lrf(&s.vertices(), &f);
        let doubled: Vec<Vec3> = local.iter().chain(local.iter()).copied().collect();
        let p = RopsParams::default();
        assert_eq!(
            rops_from_local_points(&local, &p).unwrap(),
            rops_from_local_points(&doubled, &p).unwrap()
        );
    }

    #[test]
    fn collinear_points_rejected() {
        let pts: Vec<Vec3> = (0..10).map(|k| Vec3::x() * k as f64).collect();
        assert!(matches!(
            rops_from_local_points(&pts, &RopsParams::default()),
            Err(Error::DegenerateSurface(_))
        ));
    }

    #[test]
    fn distances() {
        let p = RopsParams::default();
        let a = RopsDescriptor { values: vec![0.0; 135], params: p };
        let mut b = a.clone();
        assert_eq!(descriptor_distance(&a, &b).unwrap(), 0.0);
        b.values[17] = -0.25;
        assert_eq!(descriptor_distance(&a, &b).unwrap(), 0.25);
        assert!(matches!(l2_distance(&[0.0], &[0.0, 1.0]), Err(Error::LengthMismatch(1, 2))));
    }

    #[test]
    fn distance_matches_compensated_sum() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let a: Vec<f64> = (0..135).map(|_| rng.random_range(-1.0..1.0)).collect();
        let b: Vec<f64> = (0..135).map(|_| rng.random_range(-1.0..1.0)).collect();
        // Kahan summation oracle
        let (mut sum, mut c) = (0.0f64, 0.0f64);
        for (x, y) in a.iter().zip(&b) {
            let term = (x - y) * (x - y) - c;
            let t = sum + term;
            c = (t - sum) - term;
            sum = t;
        }
        assert!((l2_distance(&a, &b).unwrap() - sum.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn normalized_l2() {
        let a = vec![vec![0.0, 5.0], vec![1.0, 5.0]];
        assert_eq!(average_normalized_l2(&a, &a).unwrap(), 0.0);
        let b = vec![vec![1.0, 5.0], vec![0.0, 5.0]];
        assert!((average_normalized_l2(&a, &b).unwrap() - 1.0).abs() < 1e-15);
    }
}
