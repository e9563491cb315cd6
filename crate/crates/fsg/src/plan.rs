//! Grasp geometry and primitive logic: lift an image grasp into world
//! coordinates, combine predicted and measured object height, pick the
//! grasping primitive, and emit an executable waypoint plan.

use serde::{Deserialize, Serialize};

use crate::camera::CameraModel;
use crate::error::{FsgError, FsgResult};
use crate::extract::ImageGrasp;
use crate::frame::RgbdFrame;

/// Vertical clearance the approach waypoint keeps above the grasp height.
pub const APPROACH_CLEARANCE_MM: f64 = 30.0;

/// A grasp pose in world coordinates (mm / radians).
///
/// Planner-emitted grasps always sit at or above the table (z_w ≥ 0); a raw
/// back-projection of corrupted depth may violate that, and rejecting such
/// poses is the evaluator's job, not this type's.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WorldGrasp {
    pub x_w: f64,
    pub y_w: f64,
    pub z_w: f64,
    /// Closing-axis angle in the world xy-plane, (−π/2, π/2].
    pub theta_w: f64,
    /// Gripper opening, mm.
    pub w_w: f64,
    pub q: f64,
}

/// Which of the two grasping strategies a plan executes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum PrimitiveKind {
    /// Descend to the surface-contact height and close while retreating —
    /// for objects too flat or small to approach from the side.
    FlatSmall,
    /// Close at a height gated by predicted and measured object height.
    NormalSized,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Waypoint {
    pub x_mm: f64,
    pub y_mm: f64,
    pub z_mm: f64,
}

/// Executable grasp: three waypoints (approach → grasp → retreat), the
/// in-plane gripper angle, and the gripper commands.
#[derive(Debug, Clone, PartialEq)]
pub struct GraspPlan {
    pub primitive: PrimitiveKind,
    pub approach: Waypoint,
    pub grasp: Waypoint,
    pub retreat: Waypoint,
    pub theta_w: f64,
    pub open_width_mm: f64,
    /// FlatSmall closes its fingers during the vertical retreat instead of
    /// at the grasp waypoint.
    pub close_on_retreat: bool,
}

/// Planner constants. `z1` is the surface-contact grasp height, `h_c` the
/// primitive threshold, `z_pre` the nominal approach height.
#[derive(Debug, Clone, Copy)]
pub struct PlannerConfig {
    pub h_c_mm: f64,
    pub z1_mm: f64,
    pub z_pre_mm: f64,
}

impl Default for PlannerConfig {
    fn default() -> Self {
        PlannerConfig {
            h_c_mm: 15.0,
            z1_mm: 5.0,
            z_pre_mm: 150.0,
        }
    }
}

impl PlannerConfig {
    pub fn validate(&self) -> FsgResult<()> {
        if !(self.h_c_mm > 0.0) {
            return Err(FsgError::param("h_c", "primitive threshold must be positive"));
        }
        if !(self.z1_mm > 0.0 && self.z1_mm < self.z_pre_mm) {
            return Err(FsgError::param(
                "z1/z_pre",
                format!(
                    "need 0 < z1 < z_pre, got z1 = {}, z_pre = {}",
                    self.z1_mm, self.z_pre_mm
                ),
            ));
        }
        Ok(())
    }
}

/// Lifts an image grasp to world coordinates at the given depth along the
/// optical axis: un-crop the pixel, back-project through the pinhole model,
/// transfer angle and width.
pub fn pixel_to_world(
    g: &ImageGrasp,
    z_depth_mm: f64,
    camera: &CameraModel,
    crop_offset: (usize, usize),
) -> FsgResult<WorldGrasp> {
    let u = (g.x_p + crop_offset.1) as f64;
    let v = (g.y_p + crop_offset.0) as f64;
    let p = camera.backproject(u, v, z_depth_mm)?;
    Ok(WorldGrasp {
        x_w: p.x,
        y_w: p.y,
        z_w: p.z,
        theta_w: camera.image_to_world_angle(g.theta_p)?,
        w_w: camera.width_image_to_world(g.w_p, z_depth_mm),
        q: g.q,
    })
}

/// Height of the observed surface above the table: `max(0, d_t − depth)`.
pub fn measured_height(d_t_mm: f64, depth_mm: f64) -> f64 {
    (d_t_mm - depth_mm).max(0.0)
}

/// Primitive gate: flat/small only when BOTH the predicted and the measured
/// height sit strictly below the threshold.
pub fn select_primitive(h_star_mm: f64, h_m_mm: f64, h_c_mm: f64) -> PrimitiveKind {
    if h_star_mm.max(h_m_mm) < h_c_mm {
        PrimitiveKind::FlatSmall
    } else {
        PrimitiveKind::NormalSized
    }
}

/// Builds the executable plan for a decoded grasp.
///
/// `grasp_pixel_originally_valid` tells the planner whether the depth it is
/// reading at the grasp center was a real sensor return or an inpainted
/// fill; fills are not trusted as a descent cap — the predicted height
/// alone decides (this is what rescues transparent objects whose depth
/// dropped out entirely).
pub fn plan_grasp(
    g: &ImageGrasp,
    processed: &RgbdFrame,
    grasp_pixel_originally_valid: bool,
    config: &PlannerConfig,
) -> FsgResult<GraspPlan> {
    config.validate()?;
    if g.x_p >= processed.width() || g.y_p >= processed.height() {
        return Err(FsgError::dim(
            "grasp pixel",
            format!("inside {}×{}", processed.height(), processed.width()),
            format!("({}, {})", g.x_p, g.y_p),
        ));
    }
    let d_t = processed.camera.d_t;
    let depth = processed.depth_at(g.y_p, g.x_p) as f64;
    // unclamped measured term: a sensor reading below the table plane must
    // not raise the descent cap, only lower it toward z1
    let h_m_raw = d_t - depth;
    let h_m = h_m_raw.max(0.0);

    let primitive = select_primitive(g.h_star, h_m, config.h_c_mm);
    let z_grasp = match primitive {
        PrimitiveKind::FlatSmall => config.z1_mm,
        PrimitiveKind::NormalSized => {
            let network_term = config.z1_mm + g.h_star;
            let capped = if grasp_pixel_originally_valid {
                network_term.min(config.z1_mm + h_m_raw)
            } else {
                network_term
            };
            // never below the surface-contact height
            capped.max(config.z1_mm)
        }
    };

    // horizontal pose at the predicted object-top depth
    let world = pixel_to_world(g, d_t - g.h_star, &processed.camera, processed.crop_offset)?;
    let approach_z = config.z_pre_mm.max(z_grasp + APPROACH_CLEARANCE_MM);

    if !(approach_z > z_grasp && z_grasp >= 0.0) || z_grasp > config.z1_mm + g.h_star + 1e-6 {
        return Err(FsgError::Internal(format!(
            "plan heights violate invariants: approach {approach_z}, grasp {z_grasp}, \
             cap {}",
            config.z1_mm + g.h_star
        )));
    }

    Ok(GraspPlan {
        primitive,
        approach: Waypoint {
            x_mm: world.x_w,
            y_mm: world.y_w,
            z_mm: approach_z,
        },
        grasp: Waypoint {
            x_mm: world.x_w,
            y_mm: world.y_w,
            z_mm: z_grasp,
        },
        retreat: Waypoint {
            x_mm: world.x_w,
            y_mm: world.y_w,
            z_mm: approach_z,
        },
        theta_w: world.theta_w,
        open_width_mm: world.w_w.max(0.0),
        close_on_retreat: primitive == PrimitiveKind::FlatSmall,
    })
}

/// On-the-wire form of a plan (the contract the evaluator and any robot
/// bridge consume): waypoints in approach → grasp → retreat order.
#[derive(Debug, Serialize, Deserialize)]
struct PlanJson {
    primitive: PrimitiveKind,
    waypoints: Vec<Waypoint>,
    theta_rad: f64,
    open_width_mm: f64,
    close_on_retreat: bool,
}

impl GraspPlan {
    pub fn to_json(&self) -> FsgResult<String> {
        let dto = PlanJson {
            primitive: self.primitive,
            waypoints: vec![self.approach, self.grasp, self.retreat],
            theta_rad: self.theta_w,
            open_width_mm: self.open_width_mm,
            close_on_retreat: self.close_on_retreat,
        };
        Ok(serde_json::to_string_pretty(&dto)?)
    }

    pub fn from_json(s: &str) -> FsgResult<Self> {
        let dto: PlanJson = serde_json::from_str(s)?;
        if dto.waypoints.len() != 3 {
            return Err(FsgError::format(
                "grasp plan",
                format!("expected 3 waypoints, got {}", dto.waypoints.len()),
            ));
        }
        Ok(GraspPlan {
            primitive: dto.primitive,
            approach: dto.waypoints[0],
            grasp: dto.waypoints[1],
            retreat: dto.waypoints[2],
            theta_w: dto.theta_rad,
            open_width_mm: dto.open_width_mm,
            close_on_retreat: dto.close_on_retreat,
        })
    }
}
