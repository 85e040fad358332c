use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};
use crate::geometry::Vec3;

use super::TriangleMesh;

/// Perturbs every vertex coordinate with i.i.d. N(0, (sigma·mr)²), where mr
/// is the mesh's own resolution. Topology is unchanged.
pub fn add_gaussian_noise(mesh: &TriangleMesh, sigma_mr: f64, seed: u64) -> Result<TriangleMesh> {
    if sigma_mr == 0.0 {
        return Ok(mesh.clone());
    }
    let mr = mesh.resolution()?;
    add_gaussian_noise_world(mesh, sigma_mr * mr, seed)
}

/// Same as [`add_gaussian_noise`] with the standard deviation given in world
/// units, for callers that measure noise against another mesh's resolution.
pub fn add_gaussian_noise_world(mesh: &TriangleMesh, sigma: f64, seed: u64) -> Result<TriangleMesh> {
    if !(sigma >= 0.0) || !sigma.is_finite() {
        return Err(Error::InvalidParameter(format!("noise sigma {sigma} must be >= 0")));
    }
    if sigma == 0.0 {
        return Ok(mesh.clone());
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let normal = Normal::new(0.0, sigma).expect("valid sigma");
    let vertices = mesh
        .vertices()
        .iter()
        .map(|v| {
            v + Vec3::new(
                normal.sample(&mut rng),
                normal.sample(&mut rng),
                normal.sample(&mut rng),
            )
        })
        .collect();
    mesh.with_vertices(vertices)
}
