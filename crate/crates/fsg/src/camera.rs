//! Pinhole camera geometry: projection, back-projection, and the
//! image↔world transfer of grasp angle and width used by planning,
//! autolabeling, and the simulator.
//!
//! Conventions, fixed crate-wide: camera frame is x-right / y-down /
//! z-forward along the optical axis; world frame is z-up with z = 0 on the
//! table plane; all lengths in millimeters; pixel u is the column
//! coordinate and v the row.

use nalgebra::{Isometry3, Matrix3, Point3, Rotation3, Translation3, UnitQuaternion, Vector3};

use crate::error::{FsgError, FsgResult};

/// Maximum tilt of the optical axis away from straight-down before in-plane
/// angle transfer refuses to run. Beyond this the flat image↔world angle
/// map distorts grasp orientations instead of merely rotating them.
pub const MAX_TILT_RAD: f64 = 15.0 * std::f64::consts::PI / 180.0;

/// Intrinsics + extrinsics + table depth of one fixed camera.
#[derive(Debug, Clone)]
pub struct CameraModel {
    pub fx: f64,
    pub fy: f64,
    pub cx: f64,
    pub cy: f64,
    /// Rigid transform taking camera-frame points to world frame.
    pub pose: Isometry3<f64>,
    /// Depth of the table plane along the optical axis, mm.
    pub d_t: f64,
}

impl CameraModel {
    /// Camera looking straight down at the table from `height_mm`, image x
    /// aligned with world x. The optical axis (camera z) maps to world −z,
    /// so a level table reads the constant depth `height_mm` everywhere.
    pub fn top_down(height_mm: f64, fx: f64, fy: f64, cx: f64, cy: f64) -> Self {
        let r = Rotation3::from_matrix_unchecked(Matrix3::new(
            1.0, 0.0, 0.0, //
            0.0, -1.0, 0.0, //
            0.0, 0.0, -1.0,
        ));
        let pose = Isometry3::from_parts(
            Translation3::new(0.0, 0.0, height_mm),
            UnitQuaternion::from_rotation_matrix(&r),
        );
        CameraModel {
            fx,
            fy,
            cx,
            cy,
            pose,
            d_t: height_mm,
        }
    }

    pub fn validate(&self) -> FsgResult<()> {
        if !(self.fx > 0.0) || !(self.fy > 0.0) {
            return Err(FsgError::param("focal length", "fx and fy must be positive"));
        }
        if !(self.d_t > 0.0) {
            return Err(FsgError::param("d_t", "table depth must be positive"));
        }
        Ok(())
    }

    /// Pixel (u, v) plus depth along the optical axis → world point.
    pub fn backproject(&self, u: f64, v: f64, z_depth: f64) -> FsgResult<Point3<f64>> {
        if !(z_depth > 0.0) {
            return Err(FsgError::Geometry(format!(
                "cannot back-project non-positive depth {z_depth} mm"
            )));
        }
        let p_cam = Point3::new(
            (u - self.cx) * z_depth / self.fx,
            (v - self.cy) * z_depth / self.fy,
            z_depth,
        );
        Ok(self.pose * p_cam)
    }

    /// World point → pixel (u, v) and depth along the optical axis.
    pub fn project(&self, p_world: &Point3<f64>) -> FsgResult<(f64, f64, f64)> {
        let p_cam = self.pose.inverse_transform_point(p_world);
        if p_cam.z <= 0.0 {
            return Err(FsgError::Geometry(format!(
                "point {p_world} is behind the camera (z_cam = {:.3})",
                p_cam.z
            )));
        }
        let u = self.cx + self.fx * p_cam.x / p_cam.z;
        let v = self.cy + self.fy * p_cam.y / p_cam.z;
        Ok((u, v, p_cam.z))
    }

    /// Direction of the optical axis expressed in world coordinates.
    pub fn optical_axis_world(&self) -> Vector3<f64> {
        self.pose.rotation * Vector3::z()
    }

    /// Errors unless the camera looks down within [`MAX_TILT_RAD`] of
    /// vertical — the validity domain of the flat angle transfer below.
    pub fn require_top_down(&self) -> FsgResult<()> {
        let cos_tilt = self.optical_axis_world().dot(&-Vector3::z());
        if cos_tilt < MAX_TILT_RAD.cos() {
            return Err(FsgError::Config(format!(
                "camera optical axis tilted {:.1}° from vertical; in-plane angle \
                 transfer supports at most {:.1}°",
                cos_tilt.clamp(-1.0, 1.0).acos().to_degrees(),
                MAX_TILT_RAD.to_degrees()
            )));
        }
        Ok(())
    }

    /// In-plane grasp angle, image frame → world frame, by rotating the
    /// image-plane direction vector through the camera pose.
    pub fn image_to_world_angle(&self, theta_img: f64) -> FsgResult<f64> {
        self.require_top_down()?;
        let d = self.pose.rotation * Vector3::new(theta_img.cos(), theta_img.sin(), 0.0);
        Ok(wrap_half_turn(d.y.atan2(d.x)))
    }

    /// In-plane grasp angle, world frame → image frame (inverse transfer).
    pub fn world_to_image_angle(&self, theta_world: f64) -> FsgResult<f64> {
        self.require_top_down()?;
        let d = self.pose.rotation.inverse()
            * Vector3::new(theta_world.cos(), theta_world.sin(), 0.0);
        Ok(wrap_half_turn(d.y.atan2(d.x)))
    }

    /// Gripper opening, image px → world mm, at a given depth.
    pub fn width_image_to_world(&self, w_px: f64, z_depth: f64) -> f64 {
        w_px * z_depth / self.fx
    }

    /// Gripper opening, world mm → image px, at a given depth.
    pub fn width_world_to_image(&self, w_mm: f64, z_depth: f64) -> f64 {
        w_mm * self.fx / z_depth
    }
}

/// Wrap a line-like (period-π) angle into the principal interval (−π/2, π/2].
pub fn wrap_half_turn(angle: f64) -> f64 {
    use std::f64::consts::{FRAC_PI_2, PI};
    let mut a = angle % PI;
    if a <= -FRAC_PI_2 {
        a += PI;
    } else if a > FRAC_PI_2 {
        a -= PI;
    }
    a
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::{FRAC_PI_2, PI};

    fn cam() -> CameraModel {
        CameraModel::top_down(700.0, 600.0, 600.0, 149.5, 149.5)
    }

    #[test]
    fn principal_point_backprojects_to_optical_axis() {
        let c = cam();
        let p = c.backproject(149.5, 149.5, 700.0).unwrap();
        assert!(p.x.abs() < 1e-9 && p.y.abs() < 1e-9);
        assert!(p.z.abs() < 1e-9, "table plane sits at world z = 0, got {}", p.z);
    }

    #[test]
    fn project_backproject_round_trip() {
        let c = cam();
        for &(x, y, z) in &[(30.0, -40.0, 0.0), (-75.5, 12.25, 88.0), (0.1, 0.2, 149.9)] {
            let p = Point3::new(x, y, z);
            let (u, v, d) = c.project(&p).unwrap();
            let q = c.backproject(u, v, d).unwrap();
            assert!((p - q).norm() < 1e-9, "{p} -> {q}");
        }
    }

    #[test]
    fn top_down_angle_transfer_is_negation() {
        let c = cam();
        for &t in &[0.0, 0.3, -1.2, FRAC_PI_2] {
            let w = c.image_to_world_angle(t).unwrap();
            assert!((w - wrap_half_turn(-t)).abs() < 1e-12);
            let back = c.world_to_image_angle(w).unwrap();
            assert!((back - wrap_half_turn(t)).abs() < 1e-12);
        }
    }

    #[test]
    fn tilted_camera_refuses_angle_transfer() {
        let mut c = cam();
        c.pose =
            Isometry3::rotation(Vector3::x() * (20.0f64).to_radians()) * c.pose;
        assert!(matches!(
            c.image_to_world_angle(0.0),
            Err(FsgError::Config(_))
        ));
        // 10° of tilt stays within the supported cone
        let mut ok = cam();
        ok.pose =
            Isometry3::rotation(Vector3::x() * (10.0f64).to_radians()) * ok.pose;
        assert!(ok.image_to_world_angle(0.0).is_ok());
    }

    #[test]
    fn non_positive_depth_is_a_geometry_error() {
        let c = cam();
        assert!(matches!(c.backproject(10.0, 10.0, 0.0), Err(FsgError::Geometry(_))));
        assert!(matches!(c.backproject(10.0, 10.0, -5.0), Err(FsgError::Geometry(_))));
    }

    #[test]
    fn half_turn_wrap_hits_principal_interval() {
        for &(a, want) in &[
            (PI, 0.0),
            (-FRAC_PI_2, FRAC_PI_2),
            (FRAC_PI_2, FRAC_PI_2),
            (0.6 * PI, -0.4 * PI),
            (-2.6 * PI, 0.4 * PI),
        ] {
            assert!((wrap_half_turn(a) - want).abs() < 1e-12, "wrap({a})");
        }
    }
}
