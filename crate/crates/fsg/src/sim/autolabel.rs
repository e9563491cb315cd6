//! Automatic grasp labeling from scene geometry: antipodal rectangles
//! across each object's minor footprint axis, expressed in image
//! coordinates with true object heights.

use nalgebra::Point3;

use super::{GripperModel, Scene, Shape};
use crate::dataset::GraspRectangle;
use crate::error::FsgResult;

/// Opening margin added on each side of the object when closing, mm.
pub const GRIP_MARGIN_MM: f64 = 10.0;
/// Lateral finger span used for label rectangles, mm (capped by the
/// object's own extent so the mask stays on the object).
const FINGER_SPAN_MM: f64 = 45.0;

/// Labels every graspable object: one rectangle across the minor axis for
/// boxes, four at 45° increments for rotationally symmetric shapes.
/// Objects whose opening requirement exceeds the gripper are skipped —
/// the scene becomes a no-grasp sample, not an error.
pub fn autolabel(
    scene: &Scene,
    side: usize,
    gripper: &GripperModel,
) -> FsgResult<Vec<GraspRectangle>> {
    gripper.validate()?;
    let cam = &scene.camera;
    let mut out = Vec::new();
    for obj in &scene.objects {
        let (minor, minor_dir) = obj.minor_axis();
        let opening = minor + 2.0 * GRIP_MARGIN_MM;
        if opening > gripper.max_opening_mm {
            continue; // ungraspable: labeled as a no-grasp sample
        }
        let (u, v, z_cam) = cam.project(&Point3::new(obj.x_mm, obj.y_mm, obj.height_mm))?;
        if u < 0.0 || u >= side as f64 || v < 0.0 || v >= side as f64 {
            continue;
        }
        let px = |mm: f64| mm * cam.fx / z_cam;

        let world_angles: Vec<f64> = match obj.shape {
            Shape::Box { .. } => vec![minor_dir],
            // rotational symmetry: 4 rectangles at 45° increments
            Shape::Cylinder { .. } | Shape::Disk { .. } => (0..4)
                .map(|k| k as f64 * std::f64::consts::FRAC_PI_4)
                .collect(),
        };
        for theta_w in world_angles {
            let span = obj
                .extent_along(theta_w + std::f64::consts::FRAC_PI_2)
                .min(FINGER_SPAN_MM);
            out.push(GraspRectangle {
                x_px: u,
                y_px: v,
                theta_rad: cam.world_to_image_angle(theta_w)?,
                width_px: px(opening),
                length_px: px(span),
                height_mm: obj.height_mm,
            });
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::camera::wrap_half_turn;
    use crate::sim::{default_camera, Material, SceneObject, TableTexture};

    fn scene(obj: SceneObject) -> Scene {
        Scene {
            objects: vec![obj],
            table: TableTexture {
                base: [192, 188, 182],
                alt: [205, 202, 197],
                square_mm: 24.0,
                phase_mm: (0.0, 0.0),
                noise_seed: 3,
            },
            camera: default_camera(),
        }
    }

    fn boxy(half_x: f64, half_y: f64, yaw: f64) -> SceneObject {
        SceneObject {
            shape: Shape::Box { half_x_mm: half_x, half_y_mm: half_y },
            x_mm: 20.0,
            y_mm: -30.0,
            yaw_rad: yaw,
            height_mm: 50.0,
            material: Material::Opaque,
            albedo: [198, 64, 54],
        }
    }

    #[test]
    fn axis_aligned_box_is_grasped_across_its_narrow_side() {
        // 40×80 box: the 40 mm extent lies along world x, so the gripper
        // closes along x: world angle 0, image angle 0
        let labels = autolabel(&scene(boxy(20.0, 40.0, 0.0)), 300, &GripperModel::default())
            .unwrap();
        assert_eq!(labels.len(), 1);
        let g = &labels[0];
        assert!(g.theta_rad.abs() < 1e-12);
        // opening = 40 + 2·10 = 60 mm at z = 650 → ·600/650 px
        assert!((g.width_px - 60.0 * 600.0 / 650.0).abs() < 1e-9);
        assert!((g.height_mm - 50.0).abs() < 1e-12);
    }

    #[test]
    fn cylinders_get_four_labels_at_45_degree_increments() {
        let labels = autolabel(
            &scene(SceneObject {
                shape: Shape::Cylinder { radius_mm: 25.0 },
                x_mm: 0.0,
                y_mm: 0.0,
                yaw_rad: 0.4,
                height_mm: 60.0,
                material: Material::Opaque,
                albedo: [66, 132, 198],
            }),
            300,
            &GripperModel::default(),
        )
        .unwrap();
        assert_eq!(labels.len(), 4);
        // world angles 0°, 45°, 90°, 135° negate and wrap to the image
        // principal range: {0, −45°, +90°, +45°}
        let mut got: Vec<f64> = labels.iter().map(|g| g.theta_rad).collect();
        got.sort_by(f64::total_cmp);
        let q = std::f64::consts::FRAC_PI_4;
        for (a, b) in got.iter().zip([-q, 0.0, q, 2.0 * q]) {
            assert!((a - b).abs() < 1e-9, "angles {got:?}");
        }
        for g in &labels {
            assert!((g.width_px - 70.0 * 600.0 / 640.0).abs() < 1e-9);
        }
    }

    #[test]
    fn rotating_a_box_rotates_the_label_angle_exactly() {
        let base = autolabel(&scene(boxy(20.0, 40.0, 0.0)), 300, &GripperModel::default())
            .unwrap()[0]
            .theta_rad;
        for &phi in &[0.3, -0.7, 1.2] {
            let turned = autolabel(&scene(boxy(20.0, 40.0, phi)), 300, &GripperModel::default())
                .unwrap()[0]
                .theta_rad;
            // image angles negate world rotations under the overhead camera
            let expect = wrap_half_turn(base - phi);
            assert!(
                (wrap_half_turn(turned - expect)).abs() < 1e-9,
                "φ={phi}: {turned} vs {expect}"
            );
        }
    }

    #[test]
    fn oversized_objects_become_no_grasp_samples() {
        // minor 90 + 20 margin = 110 > 100 gripper opening
        let labels = autolabel(&scene(boxy(45.0, 55.0, 0.0)), 300, &GripperModel::default())
            .unwrap();
        assert!(labels.is_empty());
    }
}
