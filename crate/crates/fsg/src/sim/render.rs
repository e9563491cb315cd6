//! Analytic pinhole rendering of primitive scenes: per-pixel ray casting
//! against boxes, cylinders, and the table plane — flat-shaded RGB with a
//! single top light, plus true optical-axis depth and an instance mask.

use nalgebra::{Point3, Vector3};

use super::{Material, Scene, SceneObject, Shape};

/// Light direction (world frame, toward the light), fixed for all scenes.
const LIGHT: [f64; 3] = [0.35, -0.45, 0.82];

struct Hit {
    /// Ray parameter of the hit (world units along the unit ray).
    s: f64,
    normal: Vector3<f64>,
    /// Which face: true for the top cap / top box face, false for a side.
    top: bool,
}

fn ray_box(o: &Point3<f64>, d: &Vector3<f64>, obj: &SceneObject, hx: f64, hy: f64) -> Option<Hit> {
    // transform to the box frame: rotate by −yaw about z, center at origin
    let (sin_y, cos_y) = obj.yaw_rad.sin_cos();
    let rel = Vector3::new(o.x - obj.x_mm, o.y - obj.y_mm, o.z);
    let ro = Vector3::new(
        rel.x * cos_y + rel.y * sin_y,
        -rel.x * sin_y + rel.y * cos_y,
        rel.z,
    );
    let rd = Vector3::new(
        d.x * cos_y + d.y * sin_y,
        -d.x * sin_y + d.y * cos_y,
        d.z,
    );
    let bounds = [(-hx, hx), (-hy, hy), (0.0, obj.height_mm)];
    let mut t_enter = f64::NEG_INFINITY;
    let mut t_exit = f64::INFINITY;
    let mut enter_axis = 0usize;
    let mut enter_sign = 0.0f64;
    for axis in 0..3 {
        let (lo, hi) = bounds[axis];
        let (origin, dir) = (ro[axis], rd[axis]);
        if dir.abs() < 1e-12 {
            if origin < lo || origin > hi {
                return None;
            }
            continue;
        }
        let (mut t0, mut t1) = ((lo - origin) / dir, (hi - origin) / dir);
        let mut sign = -1.0;
        if t0 > t1 {
            std::mem::swap(&mut t0, &mut t1);
            sign = 1.0;
        }
        if t0 > t_enter {
            t_enter = t0;
            enter_axis = axis;
            enter_sign = sign;
        }
        t_exit = t_exit.min(t1);
        if t_enter > t_exit {
            return None;
        }
    }
    if t_enter <= 1e-9 {
        return None;
    }
    let mut n_local = Vector3::zeros();
    n_local[enter_axis] = enter_sign;
    // rotate the normal back to world (z unchanged)
    let normal = Vector3::new(
        n_local.x * cos_y - n_local.y * sin_y,
        n_local.x * sin_y + n_local.y * cos_y,
        n_local.z,
    );
    Some(Hit {
        s: t_enter,
        normal,
        top: enter_axis == 2 && enter_sign > 0.0,
    })
}

fn ray_cylinder(o: &Point3<f64>, d: &Vector3<f64>, obj: &SceneObject, r: f64) -> Option<Hit> {
    let h = obj.height_mm;
    let mut best: Option<Hit> = None;

    // top cap: plane z = h, inside radius
    if d.z.abs() > 1e-12 {
        let s = (h - o.z) / d.z;
        if s > 1e-9 {
            let (px, py) = (o.x + s * d.x - obj.x_mm, o.y + s * d.y - obj.y_mm);
            if px.hypot(py) <= r {
                best = Some(Hit {
                    s,
                    normal: Vector3::new(0.0, 0.0, 1.0),
                    top: true,
                });
            }
        }
    }

    // side: |(p − c)_xy| = r
    let (ox, oy) = (o.x - obj.x_mm, o.y - obj.y_mm);
    let a = d.x * d.x + d.y * d.y;
    if a > 1e-12 {
        let b = 2.0 * (ox * d.x + oy * d.y);
        let c = ox * ox + oy * oy - r * r;
        let disc = b * b - 4.0 * a * c;
        if disc >= 0.0 {
            let sq = disc.sqrt();
            for s in [(-b - sq) / (2.0 * a), (-b + sq) / (2.0 * a)] {
                if s > 1e-9 {
                    let z = o.z + s * d.z;
                    if (0.0..=h).contains(&z) && best.as_ref().map_or(true, |hit| s < hit.s) {
                        let n = Vector3::new(ox + s * d.x, oy + s * d.y, 0.0) / r;
                        best = Some(Hit { s, normal: n, top: false });
                        break; // roots are ordered; the first valid is nearest
                    }
                }
            }
        }
    }
    best
}

fn ray_object(o: &Point3<f64>, d: &Vector3<f64>, obj: &SceneObject) -> Option<Hit> {
    match obj.shape {
        Shape::Box { half_x_mm, half_y_mm } => ray_box(o, d, obj, half_x_mm, half_y_mm),
        Shape::Cylinder { radius_mm } | Shape::Disk { radius_mm } => {
            ray_cylinder(o, d, obj, radius_mm)
        }
    }
}

/// Deterministic per-pixel hash noise in [−amp, amp].
fn pixel_noise(seed: u32, r: usize, c: usize, amp: f64) -> f64 {
    let mut x = seed ^ (r as u32).wrapping_mul(0x9E37_79B9) ^ (c as u32).wrapping_mul(0x85EB_CA6B);
    x ^= x >> 16;
    x = x.wrapping_mul(0x7FEB_352D);
    x ^= x >> 15;
    x = x.wrapping_mul(0x846C_A68B);
    x ^= x >> 16;
    (x as f64 / u32::MAX as f64 * 2.0 - 1.0) * amp
}

/// Checker color of the table plane at a world point.
pub(crate) fn table_color(scene: &Scene, x: f64, y: f64) -> [f64; 3] {
    let t = &scene.table;
    let q = |v: f64, phase: f64| ((v + phase) / t.square_mm).floor() as i64;
    let odd = (q(x, t.phase_mm.0) + q(y, t.phase_mm.1)).rem_euclid(2) == 1;
    let c = if odd { t.alt } else { t.base };
    [c[0] as f64, c[1] as f64, c[2] as f64]
}

fn shade(albedo: [f64; 3], normal: &Vector3<f64>, specular: bool) -> [f64; 3] {
    let l = Vector3::new(LIGHT[0], LIGHT[1], LIGHT[2]).normalize();
    let ndl = normal.dot(&l).max(0.0);
    let diffuse = 0.55 + 0.45 * ndl;
    let mut out = [albedo[0] * diffuse, albedo[1] * diffuse, albedo[2] * diffuse];
    if specular {
        // blown-out highlight where the face aligns with the light
        let gloss = ndl.powi(16) * 140.0;
        for v in &mut out {
            *v += gloss;
        }
    }
    out
}

/// Stripe pattern of flat textured objects, in the object frame.
fn flat_stripe(obj: &SceneObject, wx: f64, wy: f64) -> bool {
    let (s, c) = obj.yaw_rad.sin_cos();
    let u = (wx - obj.x_mm) * c + (wy - obj.y_mm) * s;
    (u / 8.0).floor() as i64 % 2 == 0
}

/// Casts one ray per pixel and returns (rgb, depth, instance mask).
///
/// Depth is measured along the optical axis in millimeters (the table
/// plane reads exactly `d_t` everywhere under the overhead camera);
/// instance is −1 for the table, else the object index. Fully
/// deterministic: the only noise is hashed from the scene's texture seed.
pub fn render_ideal(scene: &Scene, side: usize) -> (Vec<u8>, Vec<f32>, Vec<i32>) {
    let cam = &scene.camera;
    let origin = cam.pose * Point3::new(0.0, 0.0, 0.0);
    let mut rgb = vec![0u8; side * side * 3];
    let mut depth = vec![0.0f32; side * side];
    let mut instance = vec![-1i32; side * side];

    for v in 0..side {
        for u in 0..side {
            let dir_cam = Vector3::new(
                (u as f64 - cam.cx) / cam.fx,
                (v as f64 - cam.cy) / cam.fy,
                1.0,
            );
            let dir = (cam.pose.rotation * dir_cam).normalize();

            // nearest object hit, if any
            let mut best: Option<(usize, Hit)> = None;
            for (i, obj) in scene.objects.iter().enumerate() {
                if let Some(hit) = ray_object(&origin, &dir, obj) {
                    if best.as_ref().map_or(true, |(_, b)| hit.s < b.s) {
                        best = Some((i, hit));
                    }
                }
            }

            // table hit (plane z = 0); the overhead camera always sees it
            let s_table = -origin.z / dir.z;
            let table_pt = origin + s_table * dir;

            let idx = v * side + u;
            let (color, z_world) = match best {
                Some((i, hit)) if hit.s < s_table => {
                    let obj = &scene.objects[i];
                    let p = origin + hit.s * dir;
                    instance[idx] = i as i32;
                    let albedo = match obj.material {
                        Material::FlatTextured => {
                            let mut a = [
                                obj.albedo[0] as f64,
                                obj.albedo[1] as f64,
                                obj.albedo[2] as f64,
                            ];
                            if flat_stripe(obj, p.x, p.y) {
                                for v in &mut a {
                                    *v = (*v - 46.0).max(0.0);
                                }
                            }
                            a
                        }
                        _ => [
                            obj.albedo[0] as f64,
                            obj.albedo[1] as f64,
                            obj.albedo[2] as f64,
                        ],
                    };
                    let lit = shade(albedo, &hit.normal, obj.material == Material::Specular);
                    let color = if obj.material == Material::Transparent {
                        // see-through: blend the table seen along the same
                        // ray; silhouette sides keep a stronger tint rim
                        let behind = table_color(scene, table_pt.x, table_pt.y);
                        let w = if hit.top { 0.68 } else { 0.30 };
                        [
                            w * behind[0] + (1.0 - w) * lit[0],
                            w * behind[1] + (1.0 - w) * lit[1],
                            w * behind[2] + (1.0 - w) * lit[2],
                        ]
                    } else {
                        lit
                    };
                    (color, p.z)
                }
                _ => (table_color(scene, table_pt.x, table_pt.y), 0.0),
            };

            // optical-axis depth of the hit: distance along camera z
            let z_cam = cam.d_t - z_world;
            depth[idx] = z_cam as f32;
            for ch in 0..3 {
                let n = pixel_noise(
                    scene.table.noise_seed.wrapping_add(ch as u32),
                    v,
                    u,
                    4.0,
                );
                rgb[idx * 3 + ch] = (color[ch] + n).round().clamp(0.0, 255.0) as u8;
            }
        }
    }
    (rgb, depth, instance)
}
