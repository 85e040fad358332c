use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{apply_rigid, random_rotation, rotation_residuals, Mat3, Vec3};

use super::TriangleMesh;

/// Pose of a model instance in a scene: `q_scene = q_model·R + t`.
#[derive(Debug, Clone, PartialEq)]
pub struct GroundTruthPose {
    pub model_id: u32,
    pub rotation: Mat3,
    pub translation: Vec3,
}

#[derive(Serialize, Deserialize)]
struct PoseJson {
    model_id: u32,
    #[serde(rename = "R")]
    r: [f64; 9],
    t: [f64; 3],
}

impl GroundTruthPose {
    pub fn new(model_id: u32, rotation: Mat3, translation: Vec3) -> Result<Self> {
        let (ortho, det) = rotation_residuals(&rotation);
        if ortho > 1e-9 || det > 1e-9 {
            return Err(Error::InvalidParameter(format!(
                "pose rotation is not a proper rotation (orthonormality {ortho:e}, det error {det:e})"
            )));
        }
        Ok(GroundTruthPose {
            model_id,
            rotation,
            translation,
        })
    }

    pub fn apply(&self, q: &Vec3) -> Vec3 {
        apply_rigid(&self.rotation, &self.translation, q)
    }

    fn to_json_struct(&self) -> PoseJson {
        let r = &self.rotation;
        PoseJson {
            model_id: self.model_id,
            r: [
                r[(0, 0)], r[(0, 1)], r[(0, 2)],
                r[(1, 0)], r[(1, 1)], r[(1, 2)],
                r[(2, 0)], r[(2, 1)], r[(2, 2)],
            ],
            t: [self.translation.x, self.translation.y, self.translation.z],
        }
    }

    fn from_json_struct(p: PoseJson) -> Result<Self> {
        let rot = Mat3::from_row_slice(&p.r);
        Self::new(p.model_id, rot, Vec3::from_row_slice(&p.t))
    }

    /// Serializes a list of poses as a JSON array of `{model_id, R, t}`
    /// (R row-major).
    pub fn list_to_json(poses: &[GroundTruthPose]) -> Result<String> {
        let v: Vec<PoseJson> = poses.iter().map(|p| p.to_json_struct()).collect();
        Ok(serde_json::to_string_pretty(&v)?)
    }

    pub fn list_from_json(s: &str) -> Result<Vec<GroundTruthPose>> {
        let v: Vec<PoseJson> = serde_json::from_str(s)?;
        v.into_iter().map(Self::from_json_struct).collect()
    }
}

#[derive(Debug, Clone, Copy)]
pub struct SceneOptions {
    /// Number of model instances placed.
    pub instances: usize,
    /// Side of the placement cube in multiples of the largest model diameter.
    pub box_scale: f64,
    pub seed: u64,
}

impl SceneOptions {
    pub fn new(instances: usize, seed: u64) -> Self {
        SceneOptions {
            instances,
            box_scale: 4.0,
            seed,
        }
    }
}

/// Places `instances` models under random rigid poses inside a cube and
/// merges them into a single tagged scene mesh.
///
/// Distinct models are drawn when there are enough of them, otherwise
/// models repeat. Instance centroids are uniform in the cube; overlapping
/// instances are allowed.
pub fn compose_scene(
    models: &[TriangleMesh],
    opts: SceneOptions,
) -> Result<(TriangleMesh, Vec<GroundTruthPose>)> {
    if models.is_empty() {
        return Err(Error::InvalidParameter("no models to place".into()));
    }
    if opts.instances == 0 {
        return Err(Error::InvalidParameter("scene needs at least one instance".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut ids: Vec<usize> = (0..models.len()).collect();
    ids.shuffle(&mut rng);
    let chosen: Vec<usize> = if opts.instances <= models.len() {
        ids[..opts.instances].to_vec()
    } else {
        (0..opts.instances)
            .map(|_| rng.random_range(0..models.len()))
            .collect()
    };
    let diameter = models.iter().map(|m| m.diameter()).fold(0.0, f64::max);
    let half = opts.box_scale * diameter / 2.0;
    let mut parts = Vec::with_capacity(chosen.len());
    let mut poses = Vec::with_capacity(chosen.len());
    for &id in &chosen {
        let model = &models[id];
        let rotation = random_rotation(&mut rng);
        let target = Vec3::new(
            rng.random_range(-half..=half),
            rng.random_range(-half..=half),
            rng.random_range(-half..=half),
        );
        let translation = target - rotation.tr_mul(&model.centroid());
        parts.push(model.transformed(&rotation, &translation).with_all_tags(id as u32));
        poses.push(GroundTruthPose::new(id as u32, rotation, translation)?);
    }
    Ok((TriangleMesh::merge(&parts)?, poses))
}
