//! Single-frame inference: checkpoint + stored sample → grasp maps → best
//! grasp → executable plan JSON plus a rendered overlay image.

use std::path::Path;
use std::time::Instant;

use super::{log_resolved, overlay::draw_overlay, plan_for_mode, PLATEAU_REL, SMOOTH_SIGMA};
use crate::dataset::io::load_sample;
use crate::error::{FsgError, FsgResult};
use crate::extract::{best_grasp, ImageGrasp};
use crate::net::checkpoint::load_checkpoint;
use crate::plan::{GraspPlan, PlannerConfig};
use crate::preprocess::{preprocess, PreprocessParams};

#[derive(Debug, Clone)]
pub struct InferSummary {
    pub plan: GraspPlan,
    pub grasp: ImageGrasp,
    pub forward_ms: f64,
}

/// Runs the checkpoint on one stored sample and writes the plan JSON and
/// the overlay image; prints the primitive, h*, and forward wall-clock.
pub fn infer(
    checkpoint: &Path,
    data_dir: &Path,
    id: &str,
    out_plan: &Path,
    out_overlay: &Path,
) -> FsgResult<InferSummary> {
    let net = load_checkpoint(checkpoint)?;
    log_resolved(
        "infer",
        &serde_json::json!({
            "checkpoint": checkpoint.display().to_string(),
            "data_dir": data_dir.display().to_string(),
            "id": id,
            "mode": net.mode().name(),
            "out_plan": out_plan.display().to_string(),
            "out_overlay": out_overlay.display().to_string(),
        }),
    );

    let sample = load_sample(data_dir, id)?;
    let (input, crop) = preprocess(&sample.frame, None, None, &PreprocessParams::default())?;

    let started = Instant::now();
    let maps = net.forward(&input)?;
    let forward_ms = started.elapsed().as_secs_f64() * 1e3;

    let g = best_grasp(&maps, SMOOTH_SIGMA, PLATEAU_REL)?;
    let plan = plan_for_mode(net.mode(), &g, &crop, &sample.frame, &PlannerConfig::default())?;

    let json = plan.to_json()?;
    std::fs::write(out_plan, json + "\n").map_err(|e| FsgError::io(out_plan.display(), e))?;
    draw_overlay(&crop, &g, &plan, out_overlay)?;

    println!(
        "[infer] primitive: {:?}   h*: {:.1} mm   forward: {forward_ms:.1} ms",
        plan.primitive, g.h_star
    );
    Ok(InferSummary {
        plan,
        grasp: g,
        forward_ms,
    })
}
