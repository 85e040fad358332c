//! Hierarchical 3D object recognition: offline model library, scene
//! feature detection, correspondence voting, pose hypotheses with
//! clustering, and ICP verification with segmentation.

pub mod detect;
pub mod features;
pub mod hypothesis;
pub mod icp;
pub mod library;
pub mod occlusion;
pub mod pipeline;
pub mod verify;

pub use detect::{detect_scene_features, DetectParams, DetectionReport, SceneFeature};
pub use features::{describe_point, farthest_point_sampling, resolution_control};
pub use hypothesis::{cluster_hypotheses, hypothesize, HypothesisCluster, TransformHypothesis};
pub use icp::{closest_on_triangle, fit_rigid, icp_refine, icp_refine_target, Correspondence, IcpParams, IcpResult, IcpTarget};
pub use library::{LibraryParams, ModelEntry, ModelFeatureRecord, ModelLibrary, LIBRARY_MAGIC};
pub use occlusion::{occlusion, Occlusion};
pub use pipeline::{generate_candidates, recognize, recognize_with_report, RecognitionParams, RecognitionReport};
pub use verify::{
    verify_and_segment, AcceptanceThresholds, Candidate, RecognitionResult, RecognizedInstance, VerifyParams, VerifyReport,
};
