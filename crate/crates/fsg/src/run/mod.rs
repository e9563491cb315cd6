//! Pipeline runners behind the command-line interface: dataset generation,
//! training, single-frame inference with an overlay image, and the
//! scene-benchmark evaluation. Every runner logs its fully resolved
//! configuration up front and writes only to paths it was handed — the same
//! inputs always produce byte-identical artifacts (wall-clock readings are
//! printed, never written).

pub mod eval;
pub mod gen_data;
pub mod infer;
pub mod overlay;
pub mod train;

pub use eval::{eval, EvalConfig, EvalReport, RateBucket, SceneRecord};
pub use gen_data::{gen_data, DatasetManifest, GenDataConfig, GenDataSummary, ManifestSample};
pub use infer::{infer, InferSummary};
pub use train::{train, TrainConfig, TrainSummary};

use std::collections::BTreeMap;
use std::fmt::Display;
use std::path::Path;
use std::str::FromStr;

use crate::error::{FsgError, FsgResult};
use crate::extract::ImageGrasp;
use crate::frame::RgbdFrame;
use crate::net::InputMode;
use crate::plan::{
    measured_height, pixel_to_world, plan_grasp, GraspPlan, PlannerConfig, PrimitiveKind,
    Waypoint, APPROACH_CLEARANCE_MM,
};

/// Gaussian sigma used to smooth the quality map before peak picking.
pub const SMOOTH_SIGMA: f64 = 2.0;
/// Relative plateau tolerance when resolving tied quality maxima.
pub const PLATEAU_REL: f64 = 1e-4;

/// Parses flat `key = value` config text: one pair per line, `#` starts a
/// comment, blank lines are ignored, later duplicates win.
pub fn parse_key_values(text: &str) -> FsgResult<BTreeMap<String, String>> {
    let mut map = BTreeMap::new();
    for (ln, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let Some((k, v)) = line.split_once('=') else {
            return Err(FsgError::Config(format!(
                "config line {}: expected `key = value`, got {raw:?}",
                ln + 1
            )));
        };
        map.insert(k.trim().to_string(), v.trim().to_string());
    }
    Ok(map)
}

/// A knob set resolvable from defaults, then a config file, then flag
/// overrides — in that precedence order. Unknown keys are rejected so typos
/// fail loudly instead of silently running defaults.
pub trait Resolve: Default {
    /// Applies one `key = value` pair.
    fn set(&mut self, key: &str, value: &str) -> FsgResult<()>;

    /// Cross-field validation after everything is applied.
    fn validate(&self) -> FsgResult<()> {
        Ok(())
    }

    fn resolve(file: Option<&Path>, overrides: &[(String, String)]) -> FsgResult<Self> {
        let mut cfg = Self::default();
        if let Some(path) = file {
            let text = std::fs::read_to_string(path)
                .map_err(|e| FsgError::io(path.display(), e))?;
            for (k, v) in parse_key_values(&text)? {
                cfg.set(&k, &v)?;
            }
        }
        for (k, v) in overrides {
            cfg.set(k, v)?;
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

fn parse_as<T: FromStr>(key: &str, value: &str) -> FsgResult<T>
where
    T::Err: Display,
{
    value
        .parse()
        .map_err(|e| FsgError::Config(format!("{key}: cannot parse {value:?}: {e}")))
}

/// Comma-separated opaque/specular/transparent/flat weights.
fn parse_mix(key: &str, value: &str) -> FsgResult<[f64; 4]> {
    let parts: Vec<&str> = value.split(',').map(str::trim).collect();
    if parts.len() != 4 {
        return Err(FsgError::Config(format!(
            "{key}: expected four comma-separated weights, got {value:?}"
        )));
    }
    let mut mix = [0.0; 4];
    for (slot, part) in mix.iter_mut().zip(&parts) {
        *slot = parse_as(key, part)?;
    }
    Ok(mix)
}

fn unknown_key(key: &str, known: &[&str]) -> FsgError {
    FsgError::Config(format!("unknown config key {key:?}; known keys: {}", known.join(", ")))
}

fn log_resolved(subcommand: &str, value: &serde_json::Value) {
    println!("[{subcommand}] resolved config: {value}");
}

/// Builds the executable plan the way each input modality can.
///
/// The full pipeline trusts the predicted height; the no-height ablation
/// substitutes the measured height for it before planning; the depth-only
/// baseline lifts the grasp straight off the *corrupted* depth map with no
/// primitives at all, which is exactly where it loses fuzzy-depth objects.
pub fn plan_for_mode(
    mode: InputMode,
    g: &ImageGrasp,
    crop: &RgbdFrame,
    raw: &RgbdFrame,
    config: &PlannerConfig,
) -> FsgResult<GraspPlan> {
    let (ur, uc) = crop.to_uncropped(g.y_p, g.x_p);
    let raw_idx = raw.idx(ur, uc);
    let originally_valid = raw.valid[raw_idx];
    match mode {
        InputMode::Fsg => plan_grasp(g, crop, originally_valid, config),
        InputMode::RgbdNoHeight => {
            // no height head to read: the measured height stands in for h*
            let mut flat = *g;
            flat.h_star = measured_height(crop.camera.d_t, crop.depth_at(g.y_p, g.x_p) as f64);
            plan_grasp(&flat, crop, originally_valid, config)
        }
        InputMode::DepthOnly => {
            config.validate()?;
            let d_t = raw.camera.d_t;
            let reading = raw.depth[raw_idx] as f64; // 0 = no return
            // A dropped return reads as depth zero, so the surface appears
            // to sit at the camera and the grasp height blows up; xy falls
            // back to the ray-table intersection to stay finite.
            let z_grasp = d_t - reading;
            let xy_depth = if reading > 0.0 { reading } else { d_t };
            let world = pixel_to_world(g, xy_depth, &crop.camera, crop.crop_offset)?;
            let approach_z = config.z_pre_mm.max(z_grasp + APPROACH_CLEARANCE_MM);
            let xy = |z_mm: f64| Waypoint {
                x_mm: world.x_w,
                y_mm: world.y_w,
                z_mm,
            };
            Ok(GraspPlan {
                // nominal: this path has no primitive logic at all
                primitive: PrimitiveKind::NormalSized,
                approach: xy(approach_z),
                grasp: xy(z_grasp),
                retreat: xy(approach_z),
                theta_w: world.theta_w,
                open_width_mm: world.w_w.max(0.0),
                close_on_retreat: false,
            })
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::camera::CameraModel;

    #[test]
    fn key_value_lines_parse_with_comments_and_spacing() {
        let text = "# a comment\n  seed = 9\nmode=depth_only   # trailing\n\nn_scenes = 3\n";
        let kv = parse_key_values(text).unwrap();
        assert_eq!(kv["seed"], "9");
        assert_eq!(kv["mode"], "depth_only");
        assert_eq!(kv["n_scenes"], "3");
        assert!(parse_key_values("just words\n").is_err());
    }

    #[test]
    fn material_mix_needs_exactly_four_weights() {
        assert_eq!(parse_mix("m", "1, 0, 0, 0").unwrap(), [1.0, 0.0, 0.0, 0.0]);
        assert!(parse_mix("m", "1, 0, 0").is_err());
        assert!(parse_mix("m", "1, 0, 0, x").is_err());
    }

    fn frame_with_hole(side: usize, d_t: f32) -> RgbdFrame {
        let mut depth = vec![d_t; side * side];
        depth[side / 2 * side + side / 2] = 0.0; // the grasp pixel itself
        RgbdFrame::new(
            side,
            side,
            vec![128; side * side * 3],
            depth,
            CameraModel::top_down(700.0, 600.0, 600.0, (side as f64 - 1.0) / 2.0, (side as f64 - 1.0) / 2.0),
        )
        .unwrap()
    }

    #[test]
    fn depth_only_plans_through_the_hole_instead_of_rescuing_it() {
        let side = 32;
        let raw = frame_with_hole(side, 700.0);
        let mut crop = raw.clone();
        // pretend inpainting filled the hole at table depth
        let mid = crop.idx(side / 2, side / 2);
        crop.depth[mid] = 700.0;
        crop.valid[mid] = true;
        let g = ImageGrasp {
            x_p: side / 2,
            y_p: side / 2,
            theta_p: 0.0,
            w_p: 40.0,
            q: 0.9,
            h_star: 60.0,
        };
        let cfg = PlannerConfig::default();

        let blind = plan_for_mode(InputMode::DepthOnly, &g, &crop, &raw, &cfg).unwrap();
        // depth zero → believed surface at the camera → grasp way too high
        assert_eq!(blind.grasp.z_mm, 700.0);
        assert!(!blind.close_on_retreat);

        // the full pipeline distrusts the fill and descends on the
        // predicted height instead
        let full = plan_for_mode(InputMode::Fsg, &g, &crop, &raw, &cfg).unwrap();
        assert_eq!(full.grasp.z_mm, cfg.z1_mm + g.h_star);
    }

    #[test]
    fn no_height_mode_substitutes_the_measured_height() {
        let side = 32;
        let mut raw = frame_with_hole(side, 700.0);
        let mid = raw.idx(side / 2, side / 2);
        raw.depth[mid] = 660.0; // real 40 mm return
        raw.valid[mid] = true;
        let crop = raw.clone();
        let g = ImageGrasp {
            x_p: side / 2,
            y_p: side / 2,
            theta_p: 0.0,
            w_p: 40.0,
            q: 0.9,
            h_star: 90.0, // deliberately wrong prediction
        };
        let cfg = PlannerConfig::default();
        let plan = plan_for_mode(InputMode::RgbdNoHeight, &g, &crop, &raw, &cfg).unwrap();
        // height head ignored: 5 + 40, not 5 + 90
        assert_eq!(plan.grasp.z_mm, cfg.z1_mm + 40.0);
    }
}
