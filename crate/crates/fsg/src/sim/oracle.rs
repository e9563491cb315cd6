//! Independent geometric grasp-success oracle. Judges a finished plan
//! against scene ground truth using only closed-form footprint geometry —
//! no shared code with the planner beyond the plan data itself.

use super::{GripperModel, Scene, SceneObject, Shape};
use crate::plan::GraspPlan;

/// Why a plan failed, geometric case by case.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum FailureReason {
    /// The closing segment does not cross any object footprint.
    MissedObject,
    /// A finger starts on or inside the footprint — no antipodal closure.
    FingersInsideFootprint,
    /// Commanded opening exceeds what the gripper can do.
    OpeningExceedsGripper,
    /// Grasp height above the object top by more than the compliance band.
    NoContactTooHigh,
    /// Grasp height below the table plane.
    BelowTable,
    /// Object thinner than a finger needs the close-on-retreat maneuver.
    ThinObjectNeedsRetreatClose,
}

impl FailureReason {
    pub fn name(self) -> &'static str {
        match self {
            FailureReason::MissedObject => "missed_object",
            FailureReason::FingersInsideFootprint => "fingers_inside_footprint",
            FailureReason::OpeningExceedsGripper => "opening_exceeds_gripper",
            FailureReason::NoContactTooHigh => "no_contact_too_high",
            FailureReason::BelowTable => "below_table",
            FailureReason::ThinObjectNeedsRetreatClose => "thin_object_needs_retreat_close",
        }
    }
}

/// Oracle verdict for one plan.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PlanOutcome {
    pub success: bool,
    pub failure: Option<FailureReason>,
    /// Index of the object the closing line crossed, when any.
    pub target: Option<usize>,
}

impl PlanOutcome {
    fn fail(reason: FailureReason, target: Option<usize>) -> Self {
        PlanOutcome {
            success: false,
            failure: Some(reason),
            target,
        }
    }
}

/// Signed interval (t0, t1) cut out of the closing line by the footprint,
/// measured along the closing direction from the grasp point; None when
/// the line misses.
fn crossing_interval(obj: &SceneObject, x: f64, y: f64, theta: f64) -> Option<(f64, f64)> {
    let (s, c) = theta.sin_cos();
    match obj.shape {
        Shape::Box { half_x_mm, half_y_mm } => {
            // line in the box frame
            let (ys, yc) = obj.yaw_rad.sin_cos();
            let (rx, ry) = (x - obj.x_mm, y - obj.y_mm);
            let p = (rx * yc + ry * ys, -rx * ys + ry * yc);
            let d = (c * yc + s * ys, -c * ys + s * yc);
            let mut t0 = f64::NEG_INFINITY;
            let mut t1 = f64::INFINITY;
            for (pi, di, hi) in [(p.0, d.0, half_x_mm), (p.1, d.1, half_y_mm)] {
                if di.abs() < 1e-12 {
                    if pi.abs() > hi {
                        return None;
                    }
                    continue;
                }
                let (a, b) = ((-hi - pi) / di, (hi - pi) / di);
                t0 = t0.max(a.min(b));
                t1 = t1.min(a.max(b));
                if t0 > t1 {
                    return None;
                }
            }
            Some((t0, t1))
        }
        Shape::Cylinder { radius_mm } | Shape::Disk { radius_mm } => {
            let (rx, ry) = (obj.x_mm - x, obj.y_mm - y);
            let tc = rx * c + ry * s; // closest approach along the line
            let perp2 = (rx * rx + ry * ry) - tc * tc;
            let r2 = radius_mm * radius_mm;
            if perp2 > r2 {
                return None;
            }
            let half = (r2 - perp2).sqrt();
            Some((tc - half, tc + half))
        }
    }
}

/// Judges one plan. Success requires all of:
/// antipodal containment (the closing segment crosses the footprint and
/// both fingers start strictly outside it), the grasp height reaching the
/// object (at most `compliance_band` above its top) without dipping below
/// the table, and close-on-retreat for objects thinner than a finger.
pub fn evaluate_plan(scene: &Scene, plan: &GraspPlan, gripper: &GripperModel) -> PlanOutcome {
    let (x, y, z) = (plan.grasp.x_mm, plan.grasp.y_mm, plan.grasp.z_mm);
    let half_open = plan.open_width_mm / 2.0;

    if plan.open_width_mm > gripper.max_opening_mm {
        return PlanOutcome::fail(FailureReason::OpeningExceedsGripper, None);
    }

    // the object whose footprint the closing segment actually crosses
    let mut target: Option<(usize, (f64, f64))> = None;
    for (i, obj) in scene.objects.iter().enumerate() {
        if let Some((t0, t1)) = crossing_interval(obj, x, y, plan.theta_w) {
            // crossing must overlap the finger travel
            if t1 > -half_open && t0 < half_open {
                target = Some((i, (t0, t1)));
                break;
            }
        }
    }
    let Some((idx, (t0, t1))) = target else {
        return PlanOutcome::fail(FailureReason::MissedObject, None);
    };
    let obj = &scene.objects[idx];

    if t0 <= -half_open || t1 >= half_open {
        return PlanOutcome::fail(FailureReason::FingersInsideFootprint, Some(idx));
    }
    if z < 0.0 {
        return PlanOutcome::fail(FailureReason::BelowTable, Some(idx));
    }
    if z > obj.height_mm + gripper.compliance_band_mm {
        return PlanOutcome::fail(FailureReason::NoContactTooHigh, Some(idx));
    }
    if obj.height_mm < gripper.finger_thickness_mm && !plan.close_on_retreat {
        return PlanOutcome::fail(FailureReason::ThinObjectNeedsRetreatClose, Some(idx));
    }
    PlanOutcome {
        success: true,
        failure: None,
        target: Some(idx),
    }
}
