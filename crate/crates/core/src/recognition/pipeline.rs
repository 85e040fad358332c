//! End-to-end online recognition.

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matching::match_all;
use crate::mesh::{MeshSearch, TriangleMesh};
use crate::rops::compute_rops;

use super::detect::{detect_scene_features, DetectParams, DetectionReport};
use super::hypothesis::{cluster_hypotheses, hypothesize, TransformHypothesis};
use super::library::ModelLibrary;
use super::verify::{verify_and_segment, Candidate, RecognitionResult, VerifyParams, VerifyReport};

/// Online settings. Lengths ending in `_mr` are multiples of the library
/// mesh resolution.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RecognitionParams {
    pub decimation: f64,
    pub spacing_mr: f64,
    pub tau_lambda: f64,
    pub tau_f: f64,
    /// Euler-angle cluster radius (radians).
    pub tau_a: f64,
    pub tau_t_mr: f64,
    pub verify: VerifyParams,
}

impl Default for RecognitionParams {
    fn default() -> Self {
        RecognitionParams {
            decimation: 0.125,
            spacing_mr: 2.0,
            tau_lambda: 1.2,
            tau_f: 0.8,
            tau_a: 0.2,
            tau_t_mr: 30.0,
            verify: VerifyParams::default(),
        }
    }
}

impl RecognitionParams {
    pub fn validate(&self) -> Result<()> {
        let positive = [self.spacing_mr, self.tau_lambda, self.tau_f, self.tau_a, self.tau_t_mr];
        if positive.iter().any(|v| !(*v > 0.0)) || !(self.decimation > 0.0 && self.decimation <= 1.0) {
            return Err(Error::InvalidParameter(format!("bad recognition parameters {self:?}")));
        }
        self.verify.thresholds.validate()?;
        self.verify.icp.validate()
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct RecognitionReport {
    pub detection: DetectionReport,
    pub described: usize,
    pub matches: usize,
    /// `(model id, votes)` in verification order.
    pub candidates: Vec<(u32, usize)>,
    pub hypotheses: usize,
    pub clusters: usize,
    pub verify: VerifyReport,
}

pub fn recognize(scene: &TriangleMesh, library: &ModelLibrary, params: &RecognitionParams) -> Result<RecognitionResult> {
    recognize_with_report(scene, library, params).map(|(r, _)| r)
}

pub fn recognize_with_report(
    scene: &TriangleMesh,
    library: &ModelLibrary,
    params: &RecognitionParams,
) -> Result<(RecognitionResult, RecognitionReport)> {
    let (candidates, mut report) = generate_candidates(scene, library, params)?;
    if candidates.is_empty() {
        return Ok((RecognitionResult::empty(scene.vertex_count()), report));
    }
    let (result, verify) = verify_and_segment(scene, library, &candidates, &params.verify)?;
    report.verify = verify;
    Ok((result, report))
}

/// Every stage before verification: detection, description, matching,
/// voting, hypotheses and clustering. Candidates come ranked by votes
/// (ties by model id), each with its ranked clusters.
pub fn generate_candidates(
    scene: &TriangleMesh,
    library: &ModelLibrary,
    params: &RecognitionParams,
) -> Result<(Vec<Candidate>, RecognitionReport)> {
    params.validate()?;
    let mr = library.resolution();
    let support = library.support_radius();
    let mut report = RecognitionReport::default();
    let (features, detection) = detect_scene_features(
        scene,
        &DetectParams {
            support_radius: support,
            spacing: params.spacing_mr * mr,
            decimation: params.decimation,
            tau_lambda: params.tau_lambda,
        },
    )?;
    report.detection = detection;
    if features.is_empty() {
        return Ok((Vec::new(), report));
    }

    let search = MeshSearch::new(scene);
    let rops = library.params().rops;
    let described: Vec<(usize, Vec<f64>)> = features
        .par_iter()
        .enumerate()
        .filter_map(|(i, f)| {
            let surface = search.crop(f.position, support).ok()?;
            compute_rops(&surface, &f.lrf, &rops).ok().map(|d| (i, d.values))
        })
        .collect();
    report.described = described.len();
    let queries: Vec<Vec<f64>> = described.iter().map(|(_, d)| d.clone()).collect();
    let matches = match_all(library.index(), &queries, params.tau_f)?;

    let mut per_model: BTreeMap<u32, Vec<TransformHypothesis>> = BTreeMap::new();
    for (k, m) in matches.into_iter().enumerate() {
        let Some(mut corr) = m else { continue };
        let feature = &features[described[k].0];
        corr.scene_feature = described[k].0 as u32;
        let record = library.record(crate::matching::FeatureLabel {
            model_id: corr.model_id,
            feature_id: corr.model_feature,
        });
        per_model
            .entry(corr.model_id)
            .or_default()
            .push(hypothesize(&corr, &feature.lrf, &record.lrf));
    }
    report.matches = per_model.values().map(Vec::len).sum();
    report.hypotheses = report.matches;

    let tau_t = params.tau_t_mr * mr;
    let mut candidates: Vec<Candidate> = per_model
        .into_iter()
        .map(|(model_id, mut hyps)| {
            hyps.sort_by_key(|h| h.scene_feature);
            Candidate {
                model_id,
                votes: hyps.len(),
                clusters: cluster_hypotheses(&hyps, params.tau_a, tau_t),
            }
        })
        .collect();
    // ties keep ascending model id
    candidates.sort_by(|a, b| b.votes.cmp(&a.votes));
    report.candidates = candidates.iter().map(|c| (c.model_id, c.votes)).collect();
    report.clusters = candidates.iter().map(|c| c.clusters.len()).sum();
    Ok((candidates, report))
}
