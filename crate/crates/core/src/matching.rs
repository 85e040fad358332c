//! Exact descriptor matching with the nearest/second-nearest ratio test,
//! and recall vs 1-precision evaluation.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::Vec3;
use crate::kdtree::{brute_force_knn, KdTree, Neighbor};
use crate::mesh::GroundTruthPose;

/// Owner of an indexed descriptor. Ordering is the tie-break order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct FeatureLabel {
    pub model_id: u32,
    pub feature_id: u32,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum IndexBackend {
    KdTree,
    BruteForce,
}

/// Immutable exact 2-NN index over fixed-length descriptors.
#[derive(Debug, Clone)]
pub struct DescriptorIndex {
    labels: Vec<FeatureLabel>,
    flat: Vec<f64>,
    dim: usize,
    tree: Option<KdTree>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LabeledNeighbor {
    pub label: FeatureLabel,
    pub distance: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FeatureCorrespondence {
    pub scene_feature: u32,
    pub model_id: u32,
    pub model_feature: u32,
    pub distance: f64,
    /// nearest / second-nearest distance.
    pub ratio: f64,
}

impl DescriptorIndex {
    pub fn build(entries: Vec<(FeatureLabel, Vec<f64>)>) -> Result<Self> {
        Self::build_with(entries, IndexBackend::KdTree)
    }

    /// Entries are stored in label order, so results do not depend on the
    /// order they are supplied in.
    pub fn build_with(mut entries: Vec<(FeatureLabel, Vec<f64>)>, backend: IndexBackend) -> Result<Self> {
        if entries.len() < 2 {
            return Err(Error::IndexTooSmall(entries.len()));
        }
        entries.sort_by(|a, b| a.0.cmp(&b.0));
        if entries.windows(2).any(|w| w[0].0 == w[1].0) {
            return Err(Error::InvalidParameter("duplicate feature label in index".into()));
        }
        let dim = entries[0].1.len();
        if dim == 0 {
            return Err(Error::InvalidParameter("zero-length descriptors".into()));
        }
        let mut labels = Vec::with_capacity(entries.len());
        let mut flat = Vec::with_capacity(entries.len() * dim);
        for (label, d) in entries {
            if d.len() != dim {
                return Err(Error::LengthMismatch(dim, d.len()));
            }
            labels.push(label);
            flat.extend_from_slice(&d);
        }
        let tree = match backend {
            IndexBackend::KdTree => Some(KdTree::new(flat.clone(), dim)),
            IndexBackend::BruteForce => None,
        };
        Ok(DescriptorIndex {
            labels,
            flat,
            dim,
            tree,
        })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn labels(&self) -> &[FeatureLabel] {
        &self.labels
    }

    /// Exact nearest and second-nearest entries (ties by label).
    pub fn two_nearest(&self, query: &[f64]) -> Result<[LabeledNeighbor; 2]> {
        if query.len() != self.dim {
            return Err(Error::LengthMismatch(self.dim, query.len()));
        }
        let hits: Vec<Neighbor> = match &self.tree {
            Some(t) => t.knn(query, 2),
            None => brute_force_knn(&self.flat, self.dim, query, 2),
        };
        let conv = |n: &Neighbor| LabeledNeighbor {
            label: self.labels[n.index],
            distance: n.dist_sq.sqrt(),
        };
        Ok([conv(&hits[0]), conv(&hits[1])])
    }
}

fn ratio(d1: f64, d2: f64) -> f64 {
    if d2 > 0.0 {
        d1 / d2
    } else {
        0.0
    }
}

/// Ratio test: a correspondence iff nearest/second-nearest `< tau_f`.
pub fn match_features(
    index: &DescriptorIndex,
    scene_feature: u32,
    query: &[f64],
    tau_f: f64,
) -> Result<Option<FeatureCorrespondence>> {
    if !(tau_f > 0.0 && tau_f <= 1.0) {
        return Err(Error::InvalidParameter(format!("tau_f {tau_f} not in (0, 1]")));
    }
    let [a, b] = index.two_nearest(query)?;
    let r = ratio(a.distance, b.distance);
    Ok((r < tau_f).then_some(FeatureCorrespondence {
        scene_feature,
        model_id: a.label.model_id,
        model_feature: a.label.feature_id,
        distance: a.distance,
        ratio: r,
    }))
}

/// Matches every query in parallel; entry `i` is scene feature `i`.
pub fn match_all(
    index: &DescriptorIndex,
    queries: &[Vec<f64>],
    tau_f: f64,
) -> Result<Vec<Option<FeatureCorrespondence>>> {
    queries
        .par_iter()
        .enumerate()
        .map(|(i, q)| match_features(index, i as u32, q, tau_f))
        .collect()
}

/// A feature used for evaluation: location plus descriptor.
#[derive(Debug, Clone, PartialEq)]
pub struct EvalFeature {
    pub position: Vec3,
    pub descriptor: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RpCurvePoint {
    pub threshold: f64,
    pub recall: f64,
    pub one_minus_precision: f64,
    pub true_positives: usize,
    pub false_positives: usize,
    pub positives: usize,
    pub matches: usize,
}

impl RpCurvePoint {
    pub fn from_counts(threshold: f64, tp: usize, fp: usize, positives: usize) -> Self {
        let matches = tp + fp;
        let frac = |a: usize, b: usize| if b == 0 { 0.0 } else { a as f64 / b as f64 };
        RpCurvePoint {
            threshold,
            recall: frac(tp, positives),
            one_minus_precision: frac(fp, matches),
            true_positives: tp,
            false_positives: fp,
            positives,
            matches,
        }
    }

    /// Pools the counts of two evaluations at the same threshold.
    pub fn merge(&self, other: &RpCurvePoint) -> RpCurvePoint {
        RpCurvePoint::from_counts(
            self.threshold,
            self.true_positives + other.true_positives,
            self.false_positives + other.false_positives,
            self.positives + other.positives,
        )
    }
}

/// Recall vs 1-precision over a sweep of ratio thresholds.
///
/// A match is a true positive when the scene feature lies within
/// `tolerance` of the ground-truth image of the matched model feature.
/// Positives are the scene features that have some model feature within
/// `tolerance` after the ground-truth transform.
pub fn rp_curve(
    scene: &[EvalFeature],
    model: &[EvalFeature],
    gt: &GroundTruthPose,
    tolerance: f64,
    thresholds: &[f64],
) -> Result<Vec<RpCurvePoint>> {
    if !(tolerance > 0.0) {
        return Err(Error::InvalidParameter("location tolerance must be positive".into()));
    }
    let index = DescriptorIndex::build(
        model
            .iter()
            .enumerate()
            .map(|(i, f)| {
                (
                    FeatureLabel {
                        model_id: gt.model_id,
                        feature_id: i as u32,
                    },
                    f.descriptor.clone(),
                )
            })
            .collect(),
    )?;
    let mapped: Vec<Vec3> = model.iter().map(|f| gt.apply(&f.position)).collect();
    let mapped_tree = KdTree::from_points3(&mapped);
    let positives = scene
        .iter()
        .filter(|f| {
            mapped_tree
                .nearest(f.position.as_slice())
                .is_some_and(|n| n.dist_sq.sqrt() < tolerance)
        })
        .count();
    let nn: Vec<(f64, usize, f64)> = scene
        .par_iter()
        .map(|f| {
            let [a, b] = index.two_nearest(&f.descriptor)?;
            let m = a.label.feature_id as usize;
            Ok((ratio(a.distance, b.distance), m, (f.position - mapped[m]).norm()))
        })
        .collect::<Result<_>>()?;
    Ok(thresholds
        .iter()
        .map(|&tau| {
            let (mut tp, mut fp) = (0, 0);
            for &(r, _, dist) in &nn {
                if r < tau {
                    if dist < tolerance {
                        tp += 1;
                    } else {
                        fp += 1;
                    }
                }
            }
            RpCurvePoint::from_counts(tau, tp, fp, positives)
        })
        .collect())
}

/// Area under the recall vs 1-precision polyline over [0, 1], anchored at
/// the origin and held flat at the last recall out to 1-precision = 1.
/// Higher is better; a perfect descriptor scores 1.
pub fn rp_area(points: &[RpCurvePoint]) -> f64 {
    let mut pts: Vec<(f64, f64)> = points.iter().map(|p| (p.one_minus_precision.clamp(0.0, 1.0), p.recall)).collect();
    pts.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.total_cmp(&b.1)));
    let mut prev = (0.0, 0.0);
    let mut area = 0.0;
    for p in pts {
        area += (p.0 - prev.0) * (p.1 + prev.1) / 2.0;
        prev = p;
    }
    area + (1.0 - prev.0) * prev.1
}

pub const RP_CSV_HEADER: &str = "threshold,recall,one_minus_precision,tp,fp,positives,matches";

pub fn rp_curve_csv(points: &[RpCurvePoint]) -> String {
    let mut s = String::from(RP_CSV_HEADER);
    s.push('\n');
    for p in points {
        s.push_str(&format!(
            "{},{},{},{},{},{},{}\n",
            p.threshold,
            p.recall,
            p.one_minus_precision,
            p.true_positives,
            p.false_positives,
            p.positives,
            p.matches
        ));
    }
    s
}
