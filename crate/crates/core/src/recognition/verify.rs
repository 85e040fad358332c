//! Hypothesis verification with flexible thresholds, and scene
//! segmentation.

use serde::{Deserialize, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::geometry::{Mat3, Vec3};
use crate::kdtree::KdTree;
use crate::mesh::TriangleMesh;

use super::hypothesis::HypothesisCluster;
use super::icp::{icp_refine_target, IcpParams, IcpTarget};
use super::library::ModelLibrary;

/// Accept iff `(ε < eps_tight ∧ α > alpha_low) ∨ (ε < eps_loose ∧ α > alpha_high)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AcceptanceThresholds {
    /// mr
    pub eps_tight: f64,
    /// mr
    pub eps_loose: f64,
    pub alpha_low: f64,
    pub alpha_high: f64,
}

impl Default for AcceptanceThresholds {
    fn default() -> Self {
        AcceptanceThresholds {
            eps_tight: 0.75,
            eps_loose: 1.5,
            alpha_low: 0.04,
            alpha_high: 0.2,
        }
    }
}

impl AcceptanceThresholds {
    pub fn accepts(&self, epsilon_mr: f64, alpha: f64) -> bool {
        (epsilon_mr < self.eps_tight && alpha > self.alpha_low) || (epsilon_mr < self.eps_loose && alpha > self.alpha_high)
    }

    pub fn validate(&self) -> Result<()> {
        let all = [self.eps_tight, self.eps_loose, self.alpha_low, self.alpha_high];
        if all.iter().any(|v| !(*v > 0.0)) || self.alpha_low > 1.0 || self.alpha_high > 1.0 {
            return Err(Error::InvalidParameter(format!("bad acceptance thresholds {self:?}")));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VerifyParams {
    pub thresholds: AcceptanceThresholds,
    pub icp: IcpParams,
    /// Correspondence radius for α and segmentation, in model mr.
    pub correspondence_mr: f64,
    /// Stop once fewer unlabeled scene points remain.
    pub min_remaining: usize,
}

impl Default for VerifyParams {
    fn default() -> Self {
        VerifyParams {
            thresholds: AcceptanceThresholds::default(),
            icp: IcpParams::default(),
            correspondence_mr: 2.0,
            min_remaining: 100,
        }
    }
}

/// A model with its vote count and ranked pose clusters.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Candidate {
    pub model_id: u32,
    pub votes: usize,
    pub clusters: Vec<HypothesisCluster>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecognizedInstance {
    pub model: u32,
    #[serde(rename = "R", serialize_with = "rows", deserialize_with = "from_rows")]
    pub rotation: Mat3,
    #[serde(rename = "t", serialize_with = "vec3", deserialize_with = "from_vec3")]
    pub translation: Vec3,
    pub epsilon_mr: f64,
    pub alpha: f64,
}

fn rows<S: Serializer>(m: &Mat3, s: S) -> std::result::Result<S::Ok, S::Error> {
    let r: [[f64; 3]; 3] = std::array::from_fn(|i| std::array::from_fn(|j| m[(i, j)]));
    r.serialize(s)
}

fn from_rows<'de, D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Mat3, D::Error> {
    let r = <[[f64; 3]; 3]>::deserialize(d)?;
    Ok(Mat3::from_fn(|i, j| r[i][j]))
}

fn vec3<S: Serializer>(v: &Vec3, s: S) -> std::result::Result<S::Ok, S::Error> {
    [v.x, v.y, v.z].serialize(s)
}

fn from_vec3<'de, D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Vec3, D::Error> {
    let v = <[f64; 3]>::deserialize(d)?;
    Ok(Vec3::new(v[0], v[1], v[2]))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecognitionResult {
    pub instances: Vec<RecognizedInstance>,
    /// Per scene vertex: the accepted model id, or -1 for background.
    pub segmentation: Vec<i64>,
}

impl RecognitionResult {
    pub fn empty(vertices: usize) -> Self {
        RecognitionResult {
            instances: Vec::new(),
            segmentation: vec![-1; vertices],
        }
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct VerifyReport {
    pub icp_runs: usize,
    pub accepted: usize,
}

struct Remaining {
    ids: Vec<usize>,
    target: IcpTarget,
}

impl Remaining {
    fn new(scene: &TriangleMesh, labels: &[i64]) -> Self {
        let keep: Vec<bool> = labels.iter().map(|&l| l < 0).collect();
        let ids: Vec<usize> = (0..labels.len()).filter(|&i| keep[i]).collect();
        let target = IcpTarget::from_mesh(scene, Some(&keep));
        Remaining { ids, target }
    }
}

/// Tries clusters of each candidate best-first; every accepted pose labels
/// the scene points it explains and removes them from later checks.
pub fn verify_and_segment(
    scene: &TriangleMesh,
    library: &ModelLibrary,
    candidates: &[Candidate],
    params: &VerifyParams,
) -> Result<(RecognitionResult, VerifyReport)> {
    params.thresholds.validate()?;
    params.icp.validate()?;
    let mut result = RecognitionResult::empty(scene.vertex_count());
    let mut report = VerifyReport::default();
    let mut remaining = Remaining::new(scene, &result.segmentation);
    'outer: for cand in candidates {
        let entry = library
            .models()
            .get(cand.model_id as usize)
            .ok_or_else(|| Error::InvalidParameter(format!("unknown model id {}", cand.model_id)))?;
        let mr = entry.resolution;
        let radius = params.correspondence_mr * mr;
        for cluster in &cand.clusters {
            if remaining.ids.len() < params.min_remaining.max(1) {
                break 'outer;
            }
            report.icp_runs += 1;
            let icp = icp_refine_target(
                &remaining.target,
                entry.mesh.vertices(),
                cluster.rotation,
                cluster.translation,
                mr,
                &params.icp,
            );
            if !icp.residual_mr.is_finite() {
                continue;
            }
            let posed: Vec<Vec3> = entry
                .mesh
                .vertices()
                .iter()
                .map(|v| icp.rotation.tr_mul(v) + icp.translation)
                .collect();
            let model_tree = KdTree::from_points3(&posed);
            let points = remaining.target.points();
            let explained: Vec<usize> = (0..points.len())
                .filter(|&k| {
                    model_tree
                        .nearest(points[k].as_slice())
                        .is_some_and(|n| n.dist_sq <= radius * radius)
                })
                .collect();
            let alpha = explained.len() as f64 / points.len() as f64;
            log::debug!(
                "model {} cluster n_f={} eps={:.3}mr alpha={:.3}",
                cand.model_id,
                cluster.n_f,
                icp.residual_mr,
                alpha
            );
            if !params.thresholds.accepts(icp.residual_mr, alpha) || explained.is_empty() {
                continue;
            }
            for &k in &explained {
                result.segmentation[remaining.ids[k]] = cand.model_id as i64;
            }
            result.instances.push(RecognizedInstance {
                model: cand.model_id,
                rotation: icp.rotation,
                translation: icp.translation,
                epsilon_mr: icp.residual_mr,
                alpha,
            });
            report.accepted += 1;
            remaining = Remaining::new(scene, &result.segmentation);
        }
    }
    Ok((result, report))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn threshold_arithmetic() {
        let t = AcceptanceThresholds::default();
        assert!(!t.accepts(1.0, 0.1));
        assert!(t.accepts(0.5, 0.05));
        assert!(t.accepts(1.0, 0.3));
        assert!(!t.accepts(0.5, 0.03));
        assert!(!t.accepts(2.0, 0.9));
    }

    #[test]
    fn result_json_round_trip() {
        let r = RecognitionResult {
            instances: vec![RecognizedInstance {
                model: 2,
                rotation: Mat3::new(0.0, 1.0, 0.0, -1.0, 0.0, 0.0, 0.0, 0.0, 1.0),
                translation: Vec3::new(1.0, 2.0, 3.0),
                epsilon_mr: 0.25,
                alpha: 0.5,
            }],
            segmentation: vec![-1, 2, 2],
        };
        let s = r.to_json().unwrap();
        assert!(s.contains("\"R\"") && s.contains("\"epsilon_mr\""));
        let v: serde_json::Value = serde_json::from_str(&s).unwrap();
        assert_eq!(v["instances"][0]["R"][0][1], 1.0);
        assert_eq!(RecognitionResult::from_json(&s).unwrap(), r);
    }
}
