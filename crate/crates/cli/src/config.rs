//! Flat JSON experiment configuration; every field can be overridden by a
//! command-line flag of the same name (underscores become dashes).

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::Args;
use serde::{Deserialize, Serialize};

use rops3d::recognition::{AcceptanceThresholds, IcpParams, LibraryParams, RecognitionParams, VerifyParams};
use rops3d::RopsParams;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Mesh files, or `bundled:<name>` for the built-in models.
    pub models: Vec<String>,
    pub scenes: Vec<String>,
    /// Ground-truth JSON per scene (same order as `scenes`).
    pub ground_truth: Vec<String>,
    pub library: Option<String>,
    pub output: String,

    pub bins: Option<u32>,
    pub rotations: Option<u32>,
    pub radius_mr: Option<f64>,
    pub combination: Option<u8>,

    pub seeds_per_model: usize,
    pub spacing_mr: f64,

    pub noise_mr: Option<f64>,
    pub noise_levels: Vec<f64>,
    pub decimation: Option<f64>,
    pub seed: u64,
    pub instances: usize,
    pub scene_count: usize,
    pub pairs: usize,
    pub tolerance_mr: f64,

    pub scene_decimation: f64,
    pub tau_f: f64,
    pub tau_lambda: f64,
    pub tau_a: f64,
    pub tau_t_mr: f64,
    pub eps_tight: f64,
    pub eps_loose: f64,
    pub alpha_low: f64,
    pub alpha_high: f64,
    pub pose_tolerance_deg: f64,
    pub pose_tolerance_mr: f64,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        let rec = RecognitionParams::default();
        let lib = LibraryParams::default();
        let acc = AcceptanceThresholds::default();
        ExperimentConfig {
            models: ["gourd", "pebble", "ring"].iter().map(|n| format!("bundled:{n}")).collect(),
            scenes: Vec::new(),
            ground_truth: Vec::new(),
            library: None,
            output: "out".into(),
            bins: None,
            rotations: None,
            radius_mr: None,
            combination: None,
            seeds_per_model: lib.seeds_per_model,
            spacing_mr: lib.spacing_mr,
            noise_mr: None,
            noise_levels: vec![0.1, 0.3, 0.5],
            decimation: None,
            seed: 0,
            instances: 3,
            scene_count: 1,
            pairs: 200,
            tolerance_mr: 7.5,
            scene_decimation: rec.decimation,
            tau_f: rec.tau_f,
            tau_lambda: rec.tau_lambda,
            tau_a: rec.tau_a,
            tau_t_mr: rec.tau_t_mr,
            eps_tight: acc.eps_tight,
            eps_loose: acc.eps_loose,
            alpha_low: acc.alpha_low,
            alpha_high: acc.alpha_high,
            pose_tolerance_deg: 5.0,
            pose_tolerance_mr: 5.0,
        }
    }
}

/// Command-line overrides for [`ExperimentConfig`].
#[derive(Debug, Clone, Default, Args)]
pub struct Overrides {
    /// Model mesh (repeatable); `bundled:<name>` selects a built-in model.
    #[arg(long = "model", global = true)]
    pub models: Vec<String>,
    /// Scene mesh (repeatable).
    #[arg(long = "scene", global = true)]
    pub scenes: Vec<String>,
    /// Ground-truth JSON (repeatable, one per scene).
    #[arg(long = "ground-truth", global = true)]
    pub ground_truth: Vec<String>,
    /// Library file (default <output>/library.ropslib).
    #[arg(long, global = true)]
    pub library: Option<String>,
    /// Output directory.
    #[arg(long, short = 'o', global = true)]
    pub output: Option<String>,
    /// Bins per side of each distribution matrix.
    #[arg(long, global = true)]
    pub bins: Option<u32>,
    /// Rotations about each LRF axis.
    #[arg(long, global = true)]
    pub rotations: Option<u32>,
    /// Support radius in mr.
    #[arg(long, global = true)]
    pub radius_mr: Option<f64>,
    /// Statistics combination, 1..=8.
    #[arg(long, global = true)]
    pub combination: Option<u8>,
    /// Farthest-point seeds per model.
    #[arg(long, global = true)]
    pub seeds_per_model: Option<usize>,
    /// Minimum feature spacing in mr.
    #[arg(long, global = true)]
    pub spacing_mr: Option<f64>,
    /// Gaussian noise σ in mr.
    #[arg(long, global = true)]
    pub noise_mr: Option<f64>,
    /// Comma-separated noise levels in mr.
    #[arg(long, global = true, value_delimiter = ',')]
    pub noise_levels: Option<Vec<f64>>,
    /// Fraction of vertices kept when decimating test meshes.
    #[arg(long, global = true)]
    pub decimation: Option<f64>,
    /// RNG seed.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Model instances per synthetic scene.
    #[arg(long, global = true)]
    pub instances: Option<usize>,
    /// Synthetic scenes to write.
    #[arg(long, global = true)]
    pub scene_count: Option<usize>,
    /// LRF pairs sampled by lrf-error.
    #[arg(long, global = true)]
    pub pairs: Option<usize>,
    /// RP-curve location tolerance in mr.
    #[arg(long, global = true)]
    pub tolerance_mr: Option<f64>,
    /// Fraction of scene vertices used as feature seeds.
    #[arg(long, global = true)]
    pub scene_decimation: Option<f64>,
    /// Nearest/second-nearest ratio threshold.
    #[arg(long, global = true)]
    pub tau_f: Option<f64>,
    /// Minimum λ1/λ2 of a scene feature's LRF.
    #[arg(long, global = true)]
    pub tau_lambda: Option<f64>,
    /// Rotation cluster radius (radians, Euler angles).
    #[arg(long, global = true)]
    pub tau_a: Option<f64>,
    /// Translation cluster radius in mr.
    #[arg(long, global = true)]
    pub tau_t_mr: Option<f64>,
    /// Residual (mr) accepted with the low overlap bound.
    #[arg(long, global = true)]
    pub eps_tight: Option<f64>,
    /// Residual (mr) accepted with the high overlap bound.
    #[arg(long, global = true)]
    pub eps_loose: Option<f64>,
    /// Overlap needed at the tight residual.
    #[arg(long, global = true)]
    pub alpha_low: Option<f64>,
    /// Overlap needed at the loose residual.
    #[arg(long, global = true)]
    pub alpha_high: Option<f64>,
    /// Rotation error (degrees) for a correct recognition.
    #[arg(long, global = true)]
    pub pose_tolerance_deg: Option<f64>,
    /// Translation error (mr) for a correct recognition.
    #[arg(long, global = true)]
    pub pose_tolerance_mr: Option<f64>,
}

macro_rules! take {
    ($cfg:ident, $ov:ident, $($f:ident),*) => {
        $(if let Some(v) = $ov.$f.clone() { $cfg.$f = v; })*
    };
}

macro_rules! take_opt {
    ($cfg:ident, $ov:ident, $($f:ident),*) => {
        $(if $ov.$f.is_some() { $cfg.$f = $ov.$f.clone(); })*
    };
}

impl ExperimentConfig {
    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
        serde_json::from_str(&text).with_context(|| format!("parsing config {}", path.display()))
    }

    pub fn apply(&mut self, ov: &Overrides) {
        if !ov.models.is_empty() {
            self.models = ov.models.clone();
        }
        if !ov.scenes.is_empty() {
            self.scenes = ov.scenes.clone();
        }
        if !ov.ground_truth.is_empty() {
            self.ground_truth = ov.ground_truth.clone();
        }
        take!(self, ov, output, seeds_per_model, spacing_mr, noise_levels, seed, instances, scene_count, pairs, tolerance_mr);
        take!(self, ov, scene_decimation, tau_f, tau_lambda, tau_a, tau_t_mr, eps_tight, eps_loose, alpha_low, alpha_high);
        take!(self, ov, pose_tolerance_deg, pose_tolerance_mr);
        take_opt!(self, ov, library, bins, rotations, radius_mr, combination, noise_mr, decimation);
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("spacing_mr", self.spacing_mr, true),
            ("tolerance_mr", self.tolerance_mr, false),
            ("tau_f", self.tau_f, false),
            ("tau_lambda", self.tau_lambda, false),
            ("tau_a", self.tau_a, false),
            ("tau_t_mr", self.tau_t_mr, false),
            ("eps_tight", self.eps_tight, false),
            ("eps_loose", self.eps_loose, false),
            ("alpha_low", self.alpha_low, false),
            ("alpha_high", self.alpha_high, false),
            ("pose_tolerance_deg", self.pose_tolerance_deg, false),
            ("pose_tolerance_mr", self.pose_tolerance_mr, false),
        ];
        for (name, v, zero_ok) in positive {
            if !(v > 0.0 || (zero_ok && v == 0.0)) || !v.is_finite() {
                bail!("config: {name} must be positive, got {v}");
            }
        }
        for (name, f) in [("decimation", self.decimation), ("scene_decimation", Some(self.scene_decimation))] {
            if let Some(f) = f {
                if !(f > 0.0 && f <= 1.0) {
                    bail!("config: {name} must be in (0, 1], got {f}");
                }
            }
        }
        if let Some(n) = self.noise_mr {
            if !(n >= 0.0) {
                bail!("config: noise_mr must be non-negative, got {n}");
            }
        }
        if self.noise_levels.iter().any(|n| !(*n >= 0.0)) {
            bail!("config: noise levels must be non-negative");
        }
        if self.tau_f > 1.0 {
            bail!("config: tau_f must be at most 1");
        }
        self.rops().validate()?;
        Ok(())
    }

    /// True when any descriptor parameter was set explicitly.
    pub fn rops_given(&self) -> bool {
        self.bins.is_some() || self.rotations.is_some() || self.radius_mr.is_some() || self.combination.is_some()
    }

    pub fn rops(&self) -> RopsParams {
        self.rops_over(&RopsParams::default())
    }

    /// Given descriptor fields laid over `base`.
    pub fn rops_over(&self, base: &RopsParams) -> RopsParams {
        let d = *base;
        RopsParams {
            bins: self.bins.unwrap_or(d.bins),
            rotations: self.rotations.unwrap_or(d.rotations),
            radius_mr: self.radius_mr.unwrap_or(d.radius_mr),
            combination: self.combination.unwrap_or(d.combination),
            angle_span: d.angle_span,
        }
    }

    pub fn library_params(&self) -> LibraryParams {
        LibraryParams {
            rops: self.rops(),
            seeds_per_model: self.seeds_per_model,
            spacing_mr: self.spacing_mr,
        }
    }

    pub fn recognition_params(&self) -> RecognitionParams {
        RecognitionParams {
            decimation: self.scene_decimation,
            spacing_mr: self.spacing_mr.max(f64::MIN_POSITIVE),
            tau_lambda: self.tau_lambda,
            tau_f: self.tau_f,
            tau_a: self.tau_a,
            tau_t_mr: self.tau_t_mr,
            verify: VerifyParams {
                thresholds: AcceptanceThresholds {
                    eps_tight: self.eps_tight,
                    eps_loose: self.eps_loose,
                    alpha_low: self.alpha_low,
                    alpha_high: self.alpha_high,
                },
                icp: IcpParams::default(),
                ..VerifyParams::default()
            },
        }
    }

    pub fn output_dir(&self) -> PathBuf {
        PathBuf::from(&self.output)
    }

    pub fn library_path(&self) -> PathBuf {
        self.library
            .as_ref()
            .map(PathBuf::from)
            .unwrap_or_else(|| self.output_dir().join("library.ropslib"))
    }
}
