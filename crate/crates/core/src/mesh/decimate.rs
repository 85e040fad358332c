//! Quadric-error edge collapse targeting a vertex-count fraction.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use crate::error::{Error, Result};
use crate::geometry::{Mat3, Vec3};

use super::TriangleMesh;

/// Area-weighted sum of squared plane distances: `xᵀAx + 2bᵀx + c`.
#[derive(Debug, Clone, Copy)]
struct Quadric {
    a: Mat3,
    b: Vec3,
    c: f64,
    area: f64,
}

impl Quadric {
    fn zero() -> Self {
        Quadric {
            a: Mat3::zeros(),
            b: Vec3::zeros(),
            c: 0.0,
            area: 0.0,
        }
    }

    fn plane(n: &Vec3, point: &Vec3, weight: f64) -> Self {
        let d = -n.dot(point);
        Quadric {
            a: n * n.transpose() * weight,
            b: n * (d * weight),
            c: d * d * weight,
            area: 0.0,
        }
    }

    fn add(&self, o: &Quadric) -> Quadric {
        Quadric {
            a: self.a + o.a,
            b: self.b + o.b,
            c: self.c + o.c,
            area: self.area + o.area,
        }
    }

    fn eval(&self, x: &Vec3) -> f64 {
        (x.dot(&(self.a * x)) + 2.0 * self.b.dot(x) + self.c).max(0.0)
    }

    /// Minimizer closest to `anchor`, using a truncated pseudo-inverse so
    /// flat or cylindrical neighborhoods stay well defined.
    fn minimizer(&self, anchor: &Vec3) -> Vec3 {
        let svd = self.a.svd(true, true);
        let smax = svd.singular_values.max();
        if smax <= 0.0 {
            return *anchor;
        }
        let u = svd.u.unwrap();
        let v_t = svd.v_t.unwrap();
        let g = self.a * anchor + self.b;
        let mut step = Vec3::zeros();
        for i in 0..3 {
            let s = svd.singular_values[i];
            if s > 1e-3 * smax {
                let ui = u.column(i);
                step += v_t.row(i).transpose() * (ui.dot(&g) / s);
            }
        }
        anchor - step
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct Candidate {
    cost: f64,
    u: u32,
    v: u32,
    stamp_u: u32,
    stamp_v: u32,
    target: Vec3,
}

impl Eq for Candidate {}

impl Ord for Candidate {
    fn cmp(&self, other: &Self) -> Ordering {
        // min-heap on cost, then on vertex ids for determinism
        other
            .cost
            .total_cmp(&self.cost)
            .then_with(|| other.u.cmp(&self.u))
            .then_with(|| other.v.cmp(&self.v))
    }
}

impl PartialOrd for Candidate {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

const LENGTH_PENALTY: f64 = 1e-3;
const BOUNDARY_WEIGHT: f64 = 100.0;

struct Collapser {
    pos: Vec<Vec3>,
    quadrics: Vec<Quadric>,
    faces: Vec<[u32; 3]>,
    face_alive: Vec<bool>,
    vfaces: Vec<Vec<u32>>,
    alive: Vec<bool>,
    boundary: Vec<bool>,
    stamp: Vec<u32>,
    heap: BinaryHeap<Candidate>,
}

impl Collapser {
    fn new(mesh: &TriangleMesh) -> Self {
        let pos = mesh.vertices().to_vec();
        let faces = mesh.triangles().to_vec();
        let n = pos.len();
        let mut quadrics = vec![Quadric::zero(); n];
        for f in &faces {
            let [a, b, c] = f.map(|k| pos[k as usize]);
            let cr = (b - a).cross(&(c - a));
            let area = cr.norm() / 2.0;
            if area <= 0.0 {
                continue;
            }
            let nrm = cr.normalize();
            let mut q = Quadric::plane(&nrm, &a, area);
            q.area = area;
            for &k in f {
                quadrics[k as usize] = quadrics[k as usize].add(&q);
            }
        }
        let boundary = mesh.boundary_vertices();
        // constraint planes along open edges
        let mut edge_faces: Vec<((u32, u32), u32)> = Vec::new();
        for (fi, f) in faces.iter().enumerate() {
            for (a, b) in [(f[0], f[1]), (f[1], f[2]), (f[2], f[0])] {
                edge_faces.push(((a.min(b), a.max(b)), fi as u32));
            }
        }
        edge_faces.sort_unstable();
        let mut i = 0;
        while i < edge_faces.len() {
            let mut j = i + 1;
            while j < edge_faces.len() && edge_faces[j].0 == edge_faces[i].0 {
                j += 1;
            }
            if j - i == 1 {
                let (a, b) = edge_faces[i].0;
                let f = faces[edge_faces[i].1 as usize].map(|k| pos[k as usize]);
                let fn_ = (f[1] - f[0]).cross(&(f[2] - f[0]));
                let e = pos[b as usize] - pos[a as usize];
                let side = e.cross(&fn_);
                if side.norm() > 0.0 {
                    let w = BOUNDARY_WEIGHT * e.norm_squared();
                    let q = Quadric::plane(&side.normalize(), &pos[a as usize], w);
                    quadrics[a as usize] = quadrics[a as usize].add(&q);
                    quadrics[b as usize] = quadrics[b as usize].add(&q);
                }
            }
            i = j;
        }
        let mut vfaces = vec![Vec::new(); n];
        for (fi, f) in faces.iter().enumerate() {
            for &k in f {
                vfaces[k as usize].push(fi as u32);
            }
        }
        let alive = vfaces.iter().map(|f| !f.is_empty()).collect();
        Collapser {
            pos,
            quadrics,
            face_alive: vec![true; faces.len()],
            faces,
            vfaces,
            alive,
            boundary,
            stamp: vec![0; n],
            heap: BinaryHeap::new(),
        }
    }

    fn neighbors(&self, v: u32) -> Vec<u32> {
        let mut out: Vec<u32> = self.vfaces[v as usize]
            .iter()
            .filter(|&&f| self.face_alive[f as usize])
            .flat_map(|&f| self.faces[f as usize])
            .filter(|&k| k != v)
            .collect();
        out.sort_unstable();
        out.dedup();
        out
    }

    fn push_edge(&mut self, u: u32, v: u32) {
        let (u, v) = (u.min(v), u.max(v));
        let q = self.quadrics[u as usize].add(&self.quadrics[v as usize]);
        let pu = self.pos[u as usize];
        let pv = self.pos[v as usize];
        let mid = (pu + pv) / 2.0;
        let bu = self.boundary[u as usize];
        let bv = self.boundary[v as usize];
        let target = if bu && !bv {
            pu
        } else if bv && !bu {
            pv
        } else {
            q.minimizer(&mid)
        };
        let len2 = (pu - pv).norm_squared();
        let cost = q.eval(&target) + LENGTH_PENALTY * q.area * len2;
        self.heap.push(Candidate {
            cost,
            u,
            v,
            stamp_u: self.stamp[u as usize],
            stamp_v: self.stamp[v as usize],
            target,
        });
    }

    fn shared_faces(&self, u: u32, v: u32) -> Vec<u32> {
        self.vfaces[u as usize]
            .iter()
            .copied()
            .filter(|&f| self.face_alive[f as usize] && self.faces[f as usize].contains(&v))
            .collect()
    }

    fn can_collapse(&self, c: &Candidate) -> bool {
        let (u, v) = (c.u, c.v);
        let shared = self.shared_faces(u, v);
        if shared.is_empty() || shared.len() > 2 {
            return false;
        }
        let is_boundary_edge = shared.len() == 1;
        if self.boundary[u as usize] && self.boundary[v as usize] && !is_boundary_edge {
            return false;
        }
        // link condition
        let nu = self.neighbors(u);
        let nv = self.neighbors(v);
        let common = nu.iter().filter(|k| nv.binary_search(k).is_ok()).count();
        if common != shared.len() {
            return false;
        }
        // collapsing a tetrahedron-like configuration would leave a degenerate shell
        if nu.len() <= 3 || nv.len() <= 3 {
            if !is_boundary_edge {
                return false;
            }
        }
        // normal flips / slivers around both endpoints
        for &w in &[u, v] {
            for &f in &self.vfaces[w as usize] {
                if !self.face_alive[f as usize] || shared.contains(&f) {
                    continue;
                }
                let tri = self.faces[f as usize];
                let old = tri.map(|k| self.pos[k as usize]);
                let new = tri.map(|k| {
                    if k == u || k == v {
                        c.target
                    } else {
                        self.pos[k as usize]
                    }
                });
                let n_old = (old[1] - old[0]).cross(&(old[2] - old[0]));
                let n_new = (new[1] - new[0]).cross(&(new[2] - new[0]));
                let (lo, ln) = (n_old.norm(), n_new.norm());
                if ln <= 1e-14 * (lo + 1e-300) || ln == 0.0 {
                    return false;
                }
                if lo > 0.0 && n_old.dot(&n_new) < 0.2 * lo * ln {
                    return false;
                }
            }
        }
        true
    }

    fn collapse(&mut self, c: &Candidate) {
        let (u, v) = (c.u, c.v);
        for f in self.shared_faces(u, v) {
            self.face_alive[f as usize] = false;
        }
        let moved: Vec<u32> = self.vfaces[v as usize]
            .iter()
            .copied()
            .filter(|&f| self.face_alive[f as usize])
            .collect();
        for &f in &moved {
            for k in self.faces[f as usize].iter_mut() {
                if *k == v {
                    *k = u;
                }
            }
        }
        let mut merged: Vec<u32> = self.vfaces[u as usize]
            .iter()
            .copied()
            .chain(moved)
            .filter(|&f| self.face_alive[f as usize])
            .collect();
        merged.sort_unstable();
        merged.dedup();
        self.vfaces[u as usize] = merged;
        self.vfaces[v as usize].clear();
        self.alive[v as usize] = false;
        self.pos[u as usize] = c.target;
        self.quadrics[u as usize] = self.quadrics[u as usize].add(&self.quadrics[v as usize]);
        self.boundary[u as usize] |= self.boundary[v as usize];
        self.stamp[u as usize] += 1;
        self.stamp[v as usize] += 1;
        for w in self.neighbors(u) {
            self.push_edge(u, w);
        }
    }
}

/// Decimates `mesh` by quadric-error edge collapse until about
/// `target_fraction` of the (referenced) vertices remain.
pub fn decimate(mesh: &TriangleMesh, target_fraction: f64) -> Result<TriangleMesh> {
    if !(target_fraction > 0.0 && target_fraction <= 1.0) {
        return Err(Error::InvalidParameter(format!(
            "decimation fraction {target_fraction} must lie in (0, 1]"
        )));
    }
    if mesh.triangle_count() == 0 {
        return Err(Error::EmptyMesh);
    }
    if target_fraction == 1.0 {
        return Ok(mesh.clone());
    }
    let mut state = Collapser::new(mesh);
    let referenced = state.alive.iter().filter(|&&a| a).count();
    let target = (target_fraction * referenced as f64).round() as usize;
    if target < 3 {
        return Err(Error::TooFewVertices(target));
    }
    for (a, b) in mesh.unique_edges() {
        state.push_edge(a, b);
    }
    let mut remaining = referenced;
    while remaining > target {
        let Some(c) = state.heap.pop() else { break };
        if !state.alive[c.u as usize]
            || !state.alive[c.v as usize]
            || state.stamp[c.u as usize] != c.stamp_u
            || state.stamp[c.v as usize] != c.stamp_v
        {
            continue;
        }
        if !state.can_collapse(&c) {
            continue;
        }
        state.collapse(&c);
        remaining -= 1;
    }
    if remaining > target {
        log::warn!("decimation stopped at {remaining} vertices (target {target})");
    }
    let triangles: Vec<[u32; 3]> = state
        .faces
        .iter()
        .zip(&state.face_alive)
        .filter(|(_, &a)| a)
        .map(|(f, _)| *f)
        .collect();
    let out = TriangleMesh::with_tags(state.pos, triangles, mesh.tags().map(|t| t.to_vec()))?;
    Ok(out.compacted())
}
