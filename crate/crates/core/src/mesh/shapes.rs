//! Procedural meshes: primitives for tests plus the bundled desk-scale
//! models used by the experiment harness.

use std::collections::HashMap;
use std::f64::consts::{PI, TAU};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::geometry::Vec3;

use super::TriangleMesh;

/// Unit icosphere; level `n` has `10·4ⁿ + 2` vertices.
pub fn icosphere(level: u32) -> TriangleMesh {
    let t = (1.0 + 5f64.sqrt()) / 2.0;
    let mut verts: Vec<Vec3> = [
        (-1.0, t, 0.0),
        (1.0, t, 0.0),
        (-1.0, -t, 0.0),
        (1.0, -t, 0.0),
        (0.0, -1.0, t),
        (0.0, 1.0, t),
        (0.0, -1.0, -t),
        (0.0, 1.0, -t),
        (t, 0.0, -1.0),
        (t, 0.0, 1.0),
        (-t, 0.0, -1.0),
        (-t, 0.0, 1.0),
    ]
    .iter()
    .map(|&(x, y, z)| Vec3::new(x, y, z).normalize())
    .collect();
    let mut faces: Vec<[u32; 3]> = vec![
        [0, 11, 5], [0, 5, 1], [0, 1, 7], [0, 7, 10], [0, 10, 11],
        [1, 5, 9], [5, 11, 4], [11, 10, 2], [10, 7, 6], [7, 1, 8],
        [3, 9, 4], [3, 4, 2], [3, 2, 6], [3, 6, 8], [3, 8, 9],
        [4, 9, 5], [2, 4, 11], [6, 2, 10], [8, 6, 7], [9, 8, 1],
    ];
    for _ in 0..level {
        let mut cache: HashMap<(u32, u32), u32> = HashMap::new();
        let mut mid = |a: u32, b: u32, verts: &mut Vec<Vec3>| -> u32 {
            let key = (a.min(b), a.max(b));
            *cache.entry(key).or_insert_with(|| {
                let m = ((verts[a as usize] + verts[b as usize]) / 2.0).normalize();
                verts.push(m);
                (verts.len() - 1) as u32
            })
        };
        let mut next = Vec::with_capacity(faces.len() * 4);
        for [a, b, c] in faces {
            let ab = mid(a, b, &mut verts);
            let bc = mid(b, c, &mut verts);
            let ca = mid(c, a, &mut verts);
            next.extend_from_slice(&[[a, ab, ca], [b, bc, ab], [c, ca, bc], [ab, bc, ca]]);
        }
        faces = next;
    }
    TriangleMesh::new(verts, faces).expect("icosphere is valid")
}

/// Planar `nx × ny` vertex grid in the z = 0 plane.
pub fn grid(nx: usize, ny: usize, spacing: f64) -> TriangleMesh {
    let mut verts = Vec::with_capacity(nx * ny);
    for j in 0..ny {
        for i in 0..nx {
            verts.push(Vec3::new(i as f64 * spacing, j as f64 * spacing, 0.0));
        }
    }
    let mut faces = Vec::new();
    for j in 0..ny - 1 {
        for i in 0..nx - 1 {
            let a = (j * nx + i) as u32;
            let b = a + 1;
            let c = a + nx as u32;
            let d = c + 1;
            faces.push([a, b, d]);
            faces.push([a, d, c]);
        }
    }
    TriangleMesh::new(verts, faces).expect("grid is valid")
}

/// Sum of randomly oriented plane waves on the unit sphere.
struct Waves {
    dirs: Vec<Vec3>,
    freqs: Vec<f64>,
    phases: Vec<f64>,
    amps: Vec<f64>,
}

impl Waves {
    fn new(seed: u64, count: usize, freq: (f64, f64), amp: (f64, f64)) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut w = Waves {
            dirs: Vec::new(),
            freqs: Vec::new(),
            phases: Vec::new(),
            amps: Vec::new(),
        };
        for _ in 0..count {
            let z: f64 = rng.random_range(-1.0..1.0);
            let az: f64 = rng.random_range(0.0..TAU);
            let s = (1.0 - z * z).sqrt();
            w.dirs.push(Vec3::new(s * az.cos(), s * az.sin(), z));
            w.freqs.push(rng.random_range(freq.0..freq.1));
            w.phases.push(rng.random_range(0.0..TAU));
            w.amps.push(rng.random_range(amp.0..amp.1));
        }
        w
    }

    fn eval(&self, p: &Vec3) -> f64 {
        (0..self.dirs.len())
            .map(|k| self.amps[k] * (self.freqs[k] * self.dirs[k].dot(p) + self.phases[k]).sin())
            .sum()
    }
}

fn blob(level: u32, scale: Vec3, waves: &[Waves]) -> TriangleMesh {
    let base = icosphere(level);
    let verts = base
        .vertices()
        .iter()
        .map(|d| {
            let rad = 1.0 + waves.iter().map(|w| w.eval(d)).sum::<f64>();
            d.component_mul(&scale) * rad.max(0.3)
        })
        .collect();
    base.with_vertices(verts).expect("blob is valid")
}

fn bumpy_torus(nu: usize, nv: usize, major: f64, minor: f64, waves: &Waves) -> TriangleMesh {
    let mut verts = Vec::with_capacity(nu * nv);
    for i in 0..nu {
        let u = TAU * i as f64 / nu as f64;
        for j in 0..nv {
            let v = TAU * j as f64 / nv as f64;
            let center = Vec3::new(major * u.cos(), major * u.sin(), 0.0);
            let dir = Vec3::new(v.cos() * u.cos(), v.cos() * u.sin(), v.sin());
            let base = center + dir * minor;
            let r = minor * (1.0 + waves.eval(&base));
            verts.push(center + dir * r);
        }
    }
    let mut faces = Vec::with_capacity(2 * nu * nv);
    for i in 0..nu {
        for j in 0..nv {
            let a = (i * nv + j) as u32;
            let b = (((i + 1) % nu) * nv + j) as u32;
            let c = (i * nv + (j + 1) % nv) as u32;
            let d = (((i + 1) % nu) * nv + (j + 1) % nv) as u32;
            faces.push([a, b, d]);
            faces.push([a, d, c]);
        }
    }
    TriangleMesh::new(verts, faces).expect("torus is valid")
}

/// Names of the bundled models, in id order. The last entry is the
/// distractor that is never put in a model library by the harness.
pub const BUNDLED_NAMES: [&str; 4] = ["gourd", "pebble", "ring", "rock"];

pub const DISTRACTOR_ID: usize = 3;

/// Bundled desk-scale model `id` (see [`BUNDLED_NAMES`]); roughly 10k
/// vertices each, closed, with asymmetric detail at the 15·mr scale.
pub fn bundled_model(id: usize) -> TriangleMesh {
    match id {
        0 => blob(
            5,
            Vec3::new(1.4, 0.9, 0.8),
            &[
                Waves::new(101, 5, (1.5, 3.0), (0.05, 0.10)),
                Waves::new(102, 8, (5.0, 8.0), (0.02, 0.04)),
            ],
        ),
        1 => blob(
            5,
            Vec3::new(1.1, 1.0, 0.75),
            &[
                Waves::new(201, 5, (1.5, 3.0), (0.05, 0.10)),
                Waves::new(202, 8, (5.0, 8.0), (0.02, 0.04)),
            ],
        ),
        2 => bumpy_torus(
            144,
            64,
            1.0,
            0.45,
            &Waves::new(301, 10, (3.0, 7.0), (0.04, 0.08)),
        ),
        3 => blob(
            5,
            Vec3::new(1.0, 1.2, 1.0),
            &[
                Waves::new(401, 6, (2.0, 4.0), (0.06, 0.10)),
                Waves::new(402, 10, (6.0, 9.0), (0.015, 0.03)),
            ],
        ),
        _ => panic!("no bundled model with id {id}"),
    }
}

/// Flat-ish mesh used to exercise symmetric-patch rejection.
pub fn plane(n: usize) -> TriangleMesh {
    let m = grid(n, n, 1.0 / (n - 1) as f64);
    let c = Vec3::new(0.5, 0.5, 0.0);
    let verts = m.vertices().iter().map(|v| (v - c) * PI).collect();
    m.with_vertices(verts).expect("plane is valid")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn icosphere_counts() {
        for level in 0..4 {
            let m = icosphere(level);
            assert_eq!(m.vertex_count(), 10 * 4usize.pow(level) + 2);
            assert_eq!(m.triangle_count(), 20 * 4usize.pow(level));
        }
    }

    #[test]
    fn bundled_models_are_closed_and_sized() {
        for id in 0..BUNDLED_NAMES.len() {
            let m = bundled_model(id);
            assert!(m.vertex_count() > 9000 && m.vertex_count() < 11000);
            assert!(!m.boundary_vertices().iter().any(|&b| b), "{}", BUNDLED_NAMES[id]);
        }
    }
}
