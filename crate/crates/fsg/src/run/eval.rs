//! Scene-benchmark evaluation: generates held-out corrupted scenes, runs
//! the full perception → plan pipeline on each, scores every plan with the
//! geometric oracle, and writes an aggregate report.

use std::collections::BTreeMap;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{log_resolved, parse_as, parse_mix, plan_for_mode, unknown_key, Resolve};
use super::{PLATEAU_REL, SMOOTH_SIGMA};
use crate::error::{FsgError, FsgResult};
use crate::extract::best_grasp;
use crate::net::checkpoint::load_checkpoint;
use crate::net::{parallel_ordered, InputMode};
use crate::plan::{measured_height, PlannerConfig};
use crate::preprocess::{preprocess, PreprocessParams, INPUT_SIDE};
use crate::sim::oracle::evaluate_plan;
use crate::sim::{generate_scene, make_sample, CatalogParams, GripperModel};

#[derive(Debug, Clone, PartialEq)]
pub struct EvalConfig {
    pub n_scenes: usize,
    pub seed: u64,
    pub mode: InputMode,
    /// Square frame side, px; the network consumes the center crop.
    pub side: usize,
    pub material_mix: [f64; 4],
}

impl Default for EvalConfig {
    fn default() -> Self {
        EvalConfig {
            n_scenes: 100,
            seed: 7,
            mode: InputMode::Fsg,
            side: INPUT_SIDE,
            material_mix: [0.25, 0.25, 0.25, 0.25],
        }
    }
}

const KEYS: &[&str] = &["n_scenes", "seed", "mode", "side", "material_mix"];

impl Resolve for EvalConfig {
    fn set(&mut self, key: &str, value: &str) -> FsgResult<()> {
        match key {
            "n_scenes" => self.n_scenes = parse_as(key, value)?,
            "seed" => self.seed = parse_as(key, value)?,
            "mode" => self.mode = InputMode::parse(value)?,
            "side" => self.side = parse_as(key, value)?,
            "material_mix" => self.material_mix = parse_mix(key, value)?,
            _ => return Err(unknown_key(key, KEYS)),
        }
        Ok(())
    }

    fn validate(&self) -> FsgResult<()> {
        if self.n_scenes == 0 {
            return Err(FsgError::Config("n_scenes must be at least 1".into()));
        }
        if self.side < INPUT_SIDE {
            return Err(FsgError::Config(format!(
                "side must be at least {INPUT_SIDE} (the network input crop), got {}",
                self.side
            )));
        }
        Ok(())
    }
}

/// Success tally for one slice of the benchmark.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateBucket {
    pub attempts: usize,
    pub successes: usize,
    pub rate: f64,
}

impl RateBucket {
    fn new(attempts: usize, successes: usize) -> Self {
        RateBucket {
            attempts,
            successes,
            rate: if attempts == 0 {
                0.0
            } else {
                successes as f64 / attempts as f64
            },
        }
    }
}

/// One evaluated scene, in generation order (ids are zero-padded indices,
/// so id order is generation order).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneRecord {
    pub id: String,
    pub material: String,
    pub success: bool,
    pub failure: Option<String>,
    pub h_star_mm: f64,
    pub h_m_mm: f64,
    pub z_grasp_mm: f64,
    pub object_height_mm: f64,
}

/// The benchmark report written as JSON.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub mode: String,
    pub n_scenes: usize,
    pub seed: u64,
    pub overall: RateBucket,
    pub per_material: BTreeMap<String, RateBucket>,
    pub failures: BTreeMap<String, usize>,
    pub scenes: Vec<SceneRecord>,
}

/// Evaluates the checkpoint on `cfg.n_scenes` freshly generated corrupted
/// scenes and writes the report to `out_report`. The checkpoint's stored
/// input mode must match `cfg.mode`.
pub fn eval(checkpoint: &Path, out_report: &Path, cfg: &EvalConfig) -> FsgResult<EvalReport> {
    cfg.validate()?;
    let net = load_checkpoint(checkpoint)?;
    if net.mode() != cfg.mode {
        return Err(FsgError::Config(format!(
            "checkpoint was trained in mode `{}` but eval requested `{}`",
            net.mode().name(),
            cfg.mode.name()
        )));
    }
    let catalog = CatalogParams {
        material_mix: cfg.material_mix,
        ..CatalogParams::default()
    };
    catalog.validate()?;
    log_resolved(
        "eval",
        &serde_json::json!({
            "checkpoint": checkpoint.display().to_string(),
            "out_report": out_report.display().to_string(),
            "n_scenes": cfg.n_scenes,
            "seed": cfg.seed,
            "mode": cfg.mode.name(),
            "side": cfg.side,
            "material_mix": cfg.material_mix,
        }),
    );

    let mut master = ChaCha8Rng::seed_from_u64(cfg.seed);
    let seeds: Vec<u64> = (0..cfg.n_scenes).map(|_| master.gen()).collect();
    let gripper = GripperModel::default();
    let planner = PlannerConfig::default();

    let scenes = parallel_ordered(cfg.n_scenes, |i| {
        let mut rng = ChaCha8Rng::seed_from_u64(seeds[i]);
        let scene = generate_scene(&mut rng, &catalog)?;
        let (sample, rendered) = make_sample(scene, cfg.side, &mut rng, format!("{i:05}"))?;
        let (input, crop) = preprocess(&sample.frame, None, None, &PreprocessParams::default())?;
        let maps = net.forward(&input)?;
        let g = best_grasp(&maps, SMOOTH_SIGMA, PLATEAU_REL)?;
        let plan = plan_for_mode(cfg.mode, &g, &crop, &sample.frame, &planner)?;
        let outcome = evaluate_plan(&rendered.scene, &plan, &gripper);
        let object = &rendered.scene.objects[0];
        Ok(SceneRecord {
            id: sample.id,
            material: object.material.name().to_string(),
            success: outcome.success,
            failure: outcome.failure.map(|f| format!("{f:?}")),
            h_star_mm: g.h_star,
            h_m_mm: measured_height(crop.camera.d_t, crop.depth_at(g.y_p, g.x_p) as f64),
            z_grasp_mm: plan.grasp.z_mm,
            object_height_mm: object.height_mm,
        })
    })?;

    let mut per_material: BTreeMap<String, (usize, usize)> = BTreeMap::new();
    let mut failures: BTreeMap<String, usize> = BTreeMap::new();
    let mut successes = 0;
    for rec in &scenes {
        let slot = per_material.entry(rec.material.clone()).or_insert((0, 0));
        slot.0 += 1;
        if rec.success {
            slot.1 += 1;
            successes += 1;
        }
        if let Some(f) = &rec.failure {
            *failures.entry(f.clone()).or_insert(0) += 1;
        }
    }
    let report = EvalReport {
        mode: cfg.mode.name().to_string(),
        n_scenes: cfg.n_scenes,
        seed: cfg.seed,
        overall: RateBucket::new(cfg.n_scenes, successes),
        per_material: per_material
            .into_iter()
            .map(|(k, (a, s))| (k, RateBucket::new(a, s)))
            .collect(),
        failures,
        scenes,
    };

    let text = serde_json::to_string_pretty(&report)?;
    std::fs::write(out_report, text + "\n").map_err(|e| FsgError::io(out_report.display(), e))?;

    println!(
        "[eval] {}: {}/{} grasps succeeded ({:.1}%)",
        report.mode,
        report.overall.successes,
        report.overall.attempts,
        100.0 * report.overall.rate
    );
    for (material, bucket) in &report.per_material {
        println!(
            "[eval]   {material:12} {}/{} ({:.1}%)",
            bucket.successes,
            bucket.attempts,
            100.0 * bucket.rate
        );
    }
    Ok(report)
}
