//! Triangle-mesh local features: a local reference frame built from a
//! continuous scatter integral, the RoPS rotation-and-projection
//! descriptor, exact descriptor matching, and a hierarchical object
//! recognition pipeline, with synthetic-experiment helpers.

pub mod error;
pub mod geometry;
pub mod kdtree;
pub mod lrf;
pub mod matching;
pub mod mesh;
pub mod recognition;
pub mod rops;

pub use error::{Error, Result};
pub use geometry::{Mat3, Vec3};
pub use lrf::{compute_lrf, lrf_error, LocalReferenceFrame};
pub use matching::{DescriptorIndex, FeatureCorrespondence, FeatureLabel};
pub use mesh::TriangleMesh;
pub use recognition::{recognize, ModelLibrary, RecognitionParams, RecognitionResult};
pub use rops::{compute_rops, RopsDescriptor, RopsParams};
