//! Subcommand implementations.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use rops3d::geometry::{random_rotation, rotation_angle_between, Vec3};
use rops3d::lrf::{compute_lrf, lrf_error};
use rops3d::matching::{rp_area, rp_curve_csv, EvalFeature, RpCurvePoint};
use rops3d::mesh::io::load_mesh;
use rops3d::mesh::{add_gaussian_noise_world, compose_scene, decimate, shapes, GroundTruthPose, MeshSearch, SceneOptions, TriangleMesh};
use rops3d::recognition::{
    describe_point, farthest_point_sampling, recognize_with_report, resolution_control, ModelLibrary, RecognitionResult,
};
use rops3d::{Error, RopsParams};

use crate::config::ExperimentConfig;
use crate::output::{num, write_text};

pub struct NamedMesh {
    pub name: String,
    pub mesh: TriangleMesh,
}

/// Resolves `bundled:<name>` or loads a mesh file.
pub fn load_model(source: &str) -> Result<NamedMesh> {
    if let Some(name) = source.strip_prefix("bundled:") {
        let id = shapes::BUNDLED_NAMES
            .iter()
            .position(|n| *n == name)
            .with_context(|| format!("unknown bundled model '{name}' (have {:?})", shapes::BUNDLED_NAMES))?;
        return Ok(NamedMesh {
            name: name.to_string(),
            mesh: shapes::bundled_model(id),
        });
    }
    let path = Path::new(source);
    let mesh = load_mesh(path)?;
    let name = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_else(|| source.to_string());
    Ok(NamedMesh { name, mesh })
}

fn load_models(cfg: &ExperimentConfig) -> Result<Vec<NamedMesh>> {
    if cfg.models.is_empty() {
        bail!("config: no models given");
    }
    cfg.models.iter().map(|m| load_model(m)).collect()
}

fn load_ground_truth(path: &str) -> Result<Vec<GroundTruthPose>> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading ground truth {path}"))?;
    GroundTruthPose::list_from_json(&text).with_context(|| format!("config: malformed ground truth {path}"))
}

/// Applies decimation then Gaussian noise with σ in units of `mr`.
fn nuisance(mesh: &TriangleMesh, decimation: f64, noise_mr: f64, mr: f64, seed: u64) -> Result<TriangleMesh> {
    let mut m = if decimation < 1.0 { decimate(mesh, decimation)? } else { mesh.clone() };
    if noise_mr > 0.0 {
        m = add_gaussian_noise_world(&m, noise_mr * mr, seed)?;
    }
    Ok(m)
}

pub fn build_library(cfg: &ExperimentConfig, json: bool) -> Result<()> {
    let models = load_models(cfg)?;
    let lib = ModelLibrary::build(models.into_iter().map(|m| (m.name, m.mesh)).collect(), cfg.library_params())?;
    let path = cfg.library_path();
    crate::output::write_atomic(&path, &lib.to_bytes())?;
    for m in lib.models() {
        println!("{}: {} features ({} skipped)", m.name, m.features.len(), m.skipped);
    }
    if json {
        let jp = path.with_extension("json");
        write_text(&jp, &lib.to_json()?)?;
        println!("wrote {} and {}", path.display(), jp.display());
    } else {
        println!("wrote {}", path.display());
    }
    Ok(())
}

#[derive(Serialize)]
struct DescriptorSidecar<'a> {
    mesh: &'a str,
    params: RopsParams,
    resolution: f64,
    support_radius: f64,
    features: usize,
    skipped: usize,
    columns: Vec<String>,
}

/// Features at evenly spread seeds of `mesh`: (vertex, position, descriptor).
fn sample_features(mesh: &TriangleMesh, seeds: usize, spacing: f64, support: f64, rops: &RopsParams) -> Result<(Vec<(usize, Vec3, Vec<f64>)>, usize)> {
    let seeds = farthest_point_sampling(mesh, seeds.min(mesh.vertex_count()))?;
    let pos: Vec<Vec3> = seeds.iter().map(|&i| mesh.vertices()[i]).collect();
    let kept = resolution_control(&pos, spacing);
    let search = MeshSearch::new(mesh);
    let out: Vec<Option<(usize, Vec3, Vec<f64>)>> = kept
        .par_iter()
        .map(|&k| describe_point(&search, pos[k], support, rops).ok().map(|(_, d)| (seeds[k], pos[k], d)))
        .collect();
    let skipped = out.iter().filter(|o| o.is_none()).count();
    Ok((out.into_iter().flatten().collect(), skipped))
}

pub fn describe(cfg: &ExperimentConfig) -> Result<()> {
    let rops = cfg.rops();
    let dir = cfg.output_dir();
    for m in load_models(cfg)? {
        let mr = m.mesh.resolution()?;
        let support = rops.radius_mr * mr;
        let (feats, skipped) = sample_features(&m.mesh, cfg.seeds_per_model, cfg.spacing_mr * mr, support, &rops)?;
        let len = rops.descriptor_len();
        let mut csv = String::from("feature_id,x,y,z");
        for k in 0..len {
            write!(csv, ",f{k}")?;
        }
        csv.push('\n');
        for (i, (_, p, d)) in feats.iter().enumerate() {
            write!(csv, "{i},{},{},{}", num(p.x), num(p.y), num(p.z))?;
            for v in d {
                write!(csv, ",{}", num(*v))?;
            }
            csv.push('\n');
        }
        let csv_path = dir.join(format!("{}.descriptors.csv", m.name));
        write_text(&csv_path, &csv)?;
        let side = DescriptorSidecar {
            mesh: &m.name,
            params: rops,
            resolution: mr,
            support_radius: support,
            features: feats.len(),
            skipped,
            columns: (0..len).map(|k| format!("f{k}")).collect(),
        };
        write_text(&dir.join(format!("{}.descriptors.json", m.name)), &serde_json::to_string_pretty(&side)?)?;
        println!("{}: {} descriptors of length {len} -> {}", m.name, feats.len(), csv_path.display());
    }
    Ok(())
}

#[derive(Serialize)]
struct LrfSummary {
    pairs: usize,
    below_10_deg: usize,
    fraction_below_10_deg: f64,
    decimation: f64,
    noise_mr: f64,
}

pub fn lrf_error_cmd(cfg: &ExperimentConfig) -> Result<()> {
    let models = load_models(cfg)?;
    let decimation = cfg.decimation.unwrap_or(0.5);
    let noise = cfg.noise_mr.unwrap_or(0.1);
    let radius_mr = cfg.rops().radius_mr;
    let mut errors = Vec::new();
    let per_model = cfg.pairs.div_ceil(models.len());
    for (k, m) in models.iter().enumerate() {
        let mr = m.mesh.resolution()?;
        let scene = nuisance(&m.mesh, decimation, noise, mr, cfg.seed.wrapping_add(k as u64))?;
        let ms = MeshSearch::new(&m.mesh);
        let ss = MeshSearch::new(&scene);
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ (0x5eed + k as u64));
        let take = per_model.min(cfg.pairs - errors.len());
        let mut attempts = 0;
        let mut got = 0;
        while got < take && attempts < 20 * take.max(1) {
            attempts += 1;
            let p = m.mesh.vertices()[rng.random_range(0..m.mesh.vertex_count())];
            let Some((si, _)) = ss.nearest_vertex(&p) else { break };
            let lm = ms.crop(p, radius_mr * mr).and_then(|s| compute_lrf(&s));
            let ls = ss.crop(scene.vertices()[si], radius_mr * mr).and_then(|s| compute_lrf(&s));
            if let (Ok(lm), Ok(ls)) = (lm, ls) {
                errors.push(lrf_error(&ls, &lm));
                got += 1;
            }
        }
    }
    let mut counts = [0usize; 18];
    for e in &errors {
        counts[((e / 10.0) as usize).min(17)] += 1;
    }
    let mut csv = String::from("bin_start_deg,bin_end_deg,count,fraction\n");
    let n = errors.len().max(1) as f64;
    for (b, c) in counts.iter().enumerate() {
        writeln!(csv, "{},{},{c},{}", b * 10, (b + 1) * 10, num(*c as f64 / n))?;
    }
    let dir = cfg.output_dir();
    write_text(&dir.join("lrf_error_histogram.csv"), &csv)?;
    let summary = LrfSummary {
        pairs: errors.len(),
        below_10_deg: counts[0],
        fraction_below_10_deg: counts[0] as f64 / n,
        decimation,
        noise_mr: noise,
    };
    write_text(&dir.join("lrf_error_summary.json"), &serde_json::to_string_pretty(&summary)?)?;
    println!(
        "{} pairs, {:.1}% below 10 deg -> {}",
        summary.pairs,
        100.0 * summary.fraction_below_10_deg,
        dir.join("lrf_error_histogram.csv").display()
    );
    Ok(())
}

fn thresholds() -> Vec<f64> {
    (1..=20).map(|k| k as f64 * 0.05).collect()
}

/// Model features at spread seeds; scene features at the scene vertices
/// nearest to each seed's ground-truth image.
fn rp_for_instance(
    model_feats: &[(usize, Vec3, Vec<f64>)],
    scene_search: &MeshSearch<'_>,
    pose: &GroundTruthPose,
    support: f64,
    tolerance: f64,
    rops: &RopsParams,
) -> Result<Vec<RpCurvePoint>> {
    let model_eval: Vec<EvalFeature> = model_feats
        .iter()
        .map(|(_, p, d)| EvalFeature {
            position: *p,
            descriptor: d.clone(),
        })
        .collect();
    let scene = scene_search.mesh();
    let scene_eval: Vec<EvalFeature> = model_feats
        .par_iter()
        .filter_map(|(_, p, _)| {
            let (si, _) = scene_search.nearest_vertex(&pose.apply(p))?;
            let q = scene.vertices()[si];
            describe_point(scene_search, q, support, rops).ok().map(|(_, d)| EvalFeature { position: q, descriptor: d })
        })
        .collect();
    if scene_eval.is_empty() {
        return Ok(thresholds().iter().map(|&t| RpCurvePoint::from_counts(t, 0, 0, 0)).collect());
    }
    Ok(rops3d::matching::rp_curve(&scene_eval, &model_eval, pose, tolerance, &thresholds())?)
}

fn merge_curves(acc: &mut Option<Vec<RpCurvePoint>>, c: Vec<RpCurvePoint>) {
    *acc = Some(match acc.take() {
        None => c,
        Some(a) => a.iter().zip(&c).map(|(x, y)| x.merge(y)).collect(),
    });
}

/// RP curve pooled over every library-model instance of synthesized
/// scenes at noise level `noise_mr` (in model mr).
fn synthetic_rp(
    models: &[NamedMesh],
    cfg: &ExperimentConfig,
    rops: &RopsParams,
    noise_mr: f64,
    decimation: f64,
) -> Result<Vec<RpCurvePoint>> {
    let mut pooled = None;
    for (k, m) in models.iter().enumerate() {
        let mr = m.mesh.resolution()?;
        let support = rops.radius_mr * mr;
        let (feats, _) = sample_features(&m.mesh, cfg.seeds_per_model, cfg.spacing_mr * mr, support, rops)?;
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed.wrapping_add(1000 * k as u64));
        let pose = GroundTruthPose::new(k as u32, random_rotation(&mut rng), Vec3::new(rng.random(), rng.random(), rng.random()) * 50.0 * mr)?;
        let scene = nuisance(&m.mesh.transformed(&pose.rotation, &pose.translation), decimation, noise_mr, mr, cfg.seed.wrapping_add(k as u64))?;
        let search = MeshSearch::new(&scene);
        let c = rp_for_instance(&feats, &search, &pose, support, cfg.tolerance_mr * mr, rops)?;
        merge_curves(&mut pooled, c);
    }
    Ok(pooled.unwrap_or_default())
}

pub fn rp_curve_cmd(cfg: &ExperimentConfig) -> Result<()> {
    let models = load_models(cfg)?;
    let rops = cfg.rops();
    let dir = cfg.output_dir();
    if !cfg.scenes.is_empty() {
        if cfg.ground_truth.len() != cfg.scenes.len() {
            bail!("config: rp-curve needs one ground-truth file per scene");
        }
        let truths: Vec<Vec<GroundTruthPose>> = cfg.ground_truth.iter().map(|g| load_ground_truth(g)).collect::<Result<_>>()?;
        let mut cache: BTreeMap<usize, Vec<(usize, Vec3, Vec<f64>)>> = BTreeMap::new();
        for (scene_path, gt) in cfg.scenes.iter().zip(truths) {
            let scene = load_mesh(scene_path)?;
            let search = MeshSearch::new(&scene);
            let mut pooled = None;
            for pose in &gt {
                let Some(m) = models.get(pose.model_id as usize) else { continue };
                let mr = m.mesh.resolution()?;
                let support = rops.radius_mr * mr;
                if !cache.contains_key(&(pose.model_id as usize)) {
                    let (f, _) = sample_features(&m.mesh, cfg.seeds_per_model, cfg.spacing_mr * mr, support, &rops)?;
                    cache.insert(pose.model_id as usize, f);
                }
                let feats = &cache[&(pose.model_id as usize)];
                merge_curves(&mut pooled, rp_for_instance(feats, &search, pose, support, cfg.tolerance_mr * mr, &rops)?);
            }
            let curve = pooled.context("no ground-truth instance refers to a loaded model")?;
            let stem = Path::new(scene_path).file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
            let out = dir.join(format!("rp_{stem}.csv"));
            write_text(&out, &rp_curve_csv(&curve))?;
            println!("{stem}: area {:.4} -> {}", rp_area(&curve), out.display());
        }
        return Ok(());
    }
    let decimation = cfg.decimation.unwrap_or(1.0);
    let levels = match cfg.noise_mr {
        Some(n) => vec![n],
        None => cfg.noise_levels.clone(),
    };
    for sigma in levels {
        let curve = synthetic_rp(&models, cfg, &rops, sigma, decimation)?;
        let out = dir.join(format!("rp_sigma{sigma}.csv"));
        write_text(&out, &rp_curve_csv(&curve))?;
        println!("sigma {sigma} mr: area {:.4} -> {}", rp_area(&curve), out.display());
    }
    Ok(())
}

pub fn synth_scene(cfg: &ExperimentConfig) -> Result<()> {
    let models = load_models(cfg)?;
    let meshes: Vec<TriangleMesh> = models.iter().map(|m| m.mesh.clone()).collect();
    let mr = meshes.iter().map(|m| m.resolution()).collect::<rops3d::Result<Vec<f64>>>()?.iter().sum::<f64>() / meshes.len() as f64;
    let dir = cfg.output_dir();
    for k in 0..cfg.scene_count {
        let seed = cfg.seed.wrapping_add(k as u64);
        let (scene, poses) = compose_scene(&meshes, SceneOptions::new(cfg.instances, seed))?;
        let scene = nuisance(&scene, cfg.decimation.unwrap_or(1.0), cfg.noise_mr.unwrap_or(0.0), mr, seed)?;
        let mesh_path = dir.join(format!("scene_{k:03}.ply"));
        let gt_path = dir.join(format!("scene_{k:03}.gt.json"));
        let mut buf = Vec::new();
        rops3d::mesh::io::write_ply(&scene, rops3d::mesh::io::PlyFormat::BinaryLittleEndian, &mut buf)?;
        crate::output::write_atomic(&mesh_path, &buf)?;
        write_text(&gt_path, &GroundTruthPose::list_to_json(&poses)?)?;
        println!("{}: {} vertices, {} instances", mesh_path.display(), scene.vertex_count(), poses.len());
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SceneScore {
    pub expected: usize,
    pub correct: usize,
    pub false_positives: usize,
    pub mean_rotation_deg: f64,
    pub mean_translation_mr: f64,
}

/// Greedy one-to-one matching of recognized instances to ground truth.
pub fn score(result: &RecognitionResult, gt: &[GroundTruthPose], library_models: usize, mr: f64, tol_deg: f64, tol_mr: f64) -> SceneScore {
    let mut used = vec![false; gt.len()];
    let (mut correct, mut fp) = (0, 0);
    let (mut sr, mut st) = (0.0, 0.0);
    for inst in &result.instances {
        let best = gt
            .iter()
            .enumerate()
            .filter(|(k, g)| !used[*k] && g.model_id == inst.model)
            .map(|(k, g)| {
                (
                    k,
                    rotation_angle_between(&g.rotation, &inst.rotation).to_degrees(),
                    (g.translation - inst.translation).norm() / mr,
                )
            })
            .filter(|(_, r, t)| *r < tol_deg && *t < tol_mr)
            .min_by(|a, b| a.2.total_cmp(&b.2));
        match best {
            Some((k, r, t)) => {
                used[k] = true;
                correct += 1;
                sr += r;
                st += t;
            }
            None => fp += 1,
        }
    }
    let n = correct.max(1) as f64;
    SceneScore {
        expected: gt.iter().filter(|g| (g.model_id as usize) < library_models).count(),
        correct,
        false_positives: fp,
        mean_rotation_deg: sr / n,
        mean_translation_mr: st / n,
    }
}

pub fn recognize_cmd(cfg: &ExperimentConfig) -> Result<()> {
    let lib_path = cfg.library_path();
    let lib = ModelLibrary::load(&lib_path).with_context(|| format!("loading library {}", lib_path.display()))?;
    let built = lib.params().rops;
    if cfg.rops_given() && cfg.rops_over(&built) != built {
        return Err(Error::VersionMismatch(format!(
            "library {} was built with {:?}, config asks for {:?}",
            lib_path.display(),
            built,
            cfg.rops_over(&built)
        ))
        .into());
    }
    if cfg.scenes.is_empty() {
        bail!("config: no scenes given");
    }
    let with_gt = !cfg.ground_truth.is_empty();
    if with_gt && cfg.ground_truth.len() != cfg.scenes.len() {
        bail!("config: {} ground-truth files for {} scenes", cfg.ground_truth.len(), cfg.scenes.len());
    }
    let params = cfg.recognition_params();
    let dir = cfg.output_dir();
    let mut csv = String::from("scene,instances");
    if with_gt {
        csv.push_str(",expected,correct,false_positives,recognition_rate,mean_rotation_error_deg,mean_translation_error_mr");
    }
    csv.push('\n');
    let (mut tot_expected, mut tot_correct) = (0, 0);
    for (k, scene_path) in cfg.scenes.iter().enumerate() {
        let scene = load_mesh(scene_path)?;
        let (result, report) = recognize_with_report(&scene, &lib, &params)?;
        log::info!("{scene_path}: {report:?}");
        let stem = Path::new(scene_path).file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_else(|| format!("scene{k}"));
        let out: PathBuf = dir.join(format!("{stem}.recognition.json"));
        write_text(&out, &result.to_json()?)?;
        write!(csv, "{stem},{}", result.instances.len())?;
        if with_gt {
            let gt = load_ground_truth(&cfg.ground_truth[k])?;
            let s = score(&result, &gt, lib.models().len(), lib.resolution(), cfg.pose_tolerance_deg, cfg.pose_tolerance_mr);
            tot_expected += s.expected;
            tot_correct += s.correct.min(s.expected);
            let rate = if s.expected == 0 { 1.0 } else { s.correct as f64 / s.expected as f64 };
            write!(
                csv,
                ",{},{},{},{},{},{}",
                s.expected,
                s.correct,
                s.false_positives,
                num(rate),
                num(s.mean_rotation_deg),
                num(s.mean_translation_mr)
            )?;
        }
        csv.push('\n');
        println!("{stem}: {} instance(s) -> {}", result.instances.len(), out.display());
    }
    write_text(&dir.join("recognition_summary.csv"), &csv)?;
    if with_gt {
        let rate = if tot_expected == 0 { 1.0 } else { tot_correct as f64 / tot_expected as f64 };
        println!("recognition rate {:.1}% ({tot_correct}/{tot_expected})", 100.0 * rate);
    }
    Ok(())
}

pub fn sweep_params(cfg: &ExperimentConfig) -> Result<()> {
    let models = load_models(cfg)?;
    let base = cfg.rops();
    let noise = cfg.noise_mr.unwrap_or(0.1);
    let decimation = cfg.decimation.unwrap_or(1.0);
    let mut settings: Vec<(&str, String, RopsParams)> = Vec::new();
    for id in 1..=8u8 {
        settings.push(("combination", id.to_string(), RopsParams { combination: id, ..base }));
    }
    for l in [3u32, 4, 5, 6, 7, 8, 9, 10] {
        settings.push(("bins", l.to_string(), RopsParams { bins: l, ..base }));
    }
    for t in 1..=6u32 {
        settings.push(("rotations", t.to_string(), RopsParams { rotations: t, ..base }));
    }
    for r in [5.0, 10.0, 15.0, 20.0, 25.0, 30.0] {
        settings.push(("radius_mr", r.to_string(), RopsParams { radius_mr: r, ..base }));
    }
    let mut csv = String::from("parameter,value,descriptor_len,rp_area\n");
    for (name, value, p) in settings {
        let curve = synthetic_rp(&models, cfg, &p, noise, decimation)?;
        let area = rp_area(&curve);
        writeln!(csv, "{name},{value},{},{}", p.descriptor_len(), num(area))?;
        println!("{name}={value}: length {} area {area:.4}", p.descriptor_len());
    }
    let out = cfg.output_dir().join("sweep_params.csv");
    write_text(&out, &csv)?;
    println!("wrote {}", out.display());
    Ok(())
}
