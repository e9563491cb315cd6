//! Synthetic fuzzy-depth world: material-tagged primitive scenes, analytic
//! RGBD rendering, depth-sensor corruption, automatic grasp labeling, and
//! a geometric grasp-success oracle — the closed loop the pipeline is
//! trained and evaluated against.

pub mod autolabel;
pub mod corrupt;
pub mod oracle;
pub mod render;

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::camera::CameraModel;
use crate::dataset::Sample;
use crate::error::{FsgError, FsgResult};
use crate::frame::RgbdFrame;

/// Surface behavior of an object under a structured-light depth sensor.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Material {
    /// Reads true depth with mild noise.
    Opaque,
    /// Reflections blank out large correlated patches.
    Specular,
    /// The sensor reads the background surface through the object.
    Transparent,
    /// So thin it blends into the table plane in depth.
    FlatTextured,
}

impl Material {
    pub const ALL: [Material; 4] = [
        Material::Opaque,
        Material::Specular,
        Material::Transparent,
        Material::FlatTextured,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Material::Opaque => "opaque",
            Material::Specular => "specular",
            Material::Transparent => "transparent",
            Material::FlatTextured => "flat_textured",
        }
    }
}

/// Footprint geometry of one tabletop primitive. Boxes carry half-extents
/// in their own yaw-rotated frame; cylinders and disks are round.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Shape {
    Box { half_x_mm: f64, half_y_mm: f64 },
    Cylinder { radius_mm: f64 },
    Disk { radius_mm: f64 },
}

impl Shape {
    pub fn radius_like(self) -> Option<f64> {
        match self {
            Shape::Cylinder { radius_mm } | Shape::Disk { radius_mm } => Some(radius_mm),
            Shape::Box { .. } => None,
        }
    }
}

/// One rigid object resting on the table (occupies z ∈ [0, height]).
#[derive(Debug, Clone, PartialEq)]
pub struct SceneObject {
    pub shape: Shape,
    pub x_mm: f64,
    pub y_mm: f64,
    pub yaw_rad: f64,
    pub height_mm: f64,
    pub material: Material,
    pub albedo: [u8; 3],
}

impl SceneObject {
    /// Whether the world point (x, y) lies inside the footprint.
    pub fn contains(&self, x: f64, y: f64) -> bool {
        let (dx, dy) = (x - self.x_mm, y - self.y_mm);
        match self.shape {
            Shape::Box { half_x_mm, half_y_mm } => {
                let (s, c) = self.yaw_rad.sin_cos();
                let u = dx * c + dy * s;
                let v = -dx * s + dy * c;
                u.abs() <= half_x_mm && v.abs() <= half_y_mm
            }
            Shape::Cylinder { radius_mm } | Shape::Disk { radius_mm } => {
                dx.hypot(dy) <= radius_mm
            }
        }
    }

    /// Full extent of the footprint measured along a world direction.
    pub fn extent_along(&self, dir_rad: f64) -> f64 {
        match self.shape {
            Shape::Box { half_x_mm, half_y_mm } => {
                let a = dir_rad - self.yaw_rad;
                2.0 * (half_x_mm * a.cos().abs() + half_y_mm * a.sin().abs())
            }
            Shape::Cylinder { radius_mm } | Shape::Disk { radius_mm } => 2.0 * radius_mm,
        }
    }

    /// (extent, world direction) of the narrowest footprint axis — the
    /// side a parallel gripper closes across.
    pub fn minor_axis(&self) -> (f64, f64) {
        match self.shape {
            Shape::Box { half_x_mm, half_y_mm } => {
                if half_x_mm <= half_y_mm {
                    (2.0 * half_x_mm, self.yaw_rad)
                } else {
                    (2.0 * half_y_mm, self.yaw_rad + std::f64::consts::FRAC_PI_2)
                }
            }
            Shape::Cylinder { radius_mm } | Shape::Disk { radius_mm } => (2.0 * radius_mm, 0.0),
        }
    }

    /// Extent of the longest footprint axis.
    pub fn major_extent(&self) -> f64 {
        match self.shape {
            Shape::Box { half_x_mm, half_y_mm } => 2.0 * half_x_mm.max(half_y_mm),
            Shape::Cylinder { radius_mm } | Shape::Disk { radius_mm } => 2.0 * radius_mm,
        }
    }
}

/// Procedural checker texture of the table plane.
#[derive(Debug, Clone, PartialEq)]
pub struct TableTexture {
    pub base: [u8; 3],
    pub alt: [u8; 3],
    pub square_mm: f64,
    pub phase_mm: (f64, f64),
    /// Seed of the per-pixel shading noise baked into the render.
    pub noise_seed: u32,
}

/// One synthetic tabletop scene seen by a fixed overhead camera.
#[derive(Debug, Clone)]
pub struct Scene {
    pub objects: Vec<SceneObject>,
    pub table: TableTexture,
    pub camera: CameraModel,
}

/// Parallel-jaw soft gripper abstraction: geometry plus the vertical
/// tolerance band within which compliant fingers still make contact.
#[derive(Debug, Clone, Copy)]
pub struct GripperModel {
    pub max_opening_mm: f64,
    pub finger_thickness_mm: f64,
    pub compliance_band_mm: f64,
}

impl Default for GripperModel {
    fn default() -> Self {
        GripperModel {
            max_opening_mm: 100.0,
            finger_thickness_mm: 10.0,
            compliance_band_mm: 15.0,
        }
    }
}

impl GripperModel {
    pub fn validate(&self) -> FsgResult<()> {
        if !(self.max_opening_mm > 0.0
            && self.finger_thickness_mm > 0.0
            && self.compliance_band_mm > 0.0)
        {
            return Err(FsgError::param(
                "gripper",
                "opening, finger thickness, and compliance band must be positive",
            ));
        }
        Ok(())
    }
}

/// Object-catalog ranges and the material mixture for scene generation.
#[derive(Debug, Clone)]
pub struct CatalogParams {
    /// Height range for ordinary (not flat) objects, mm.
    pub height_range_mm: (f64, f64),
    /// Height range for flat material and disk shapes, mm.
    pub flat_height_range_mm: (f64, f64),
    /// Footprint extent range, mm (major axis side / diameter).
    pub footprint_range_mm: (f64, f64),
    /// Upper bound on the minor footprint extent so objects stay
    /// graspable: minor + 2·grip margin must clear the gripper opening.
    pub graspable_minor_max_mm: f64,
    /// Draw weights for opaque / specular / transparent / flat.
    pub material_mix: [f64; 4],
    /// Objects are centered within ±this of the table origin, mm.
    pub center_range_mm: f64,
    /// Retries before placement gives up.
    pub retries: usize,
}

impl Default for CatalogParams {
    fn default() -> Self {
        CatalogParams {
            height_range_mm: (15.0, 110.0),
            flat_height_range_mm: (2.0, 10.0),
            footprint_range_mm: (28.0, 95.0),
            graspable_minor_max_mm: 75.0,
            material_mix: [0.25, 0.25, 0.25, 0.25],
            center_range_mm: 100.0,
            retries: 64,
        }
    }
}

impl CatalogParams {
    pub fn validate(&self) -> FsgResult<()> {
        let (hl, hh) = self.height_range_mm;
        let (fl, fh) = self.flat_height_range_mm;
        let (pl, ph) = self.footprint_range_mm;
        if !(2.0 <= hl && hl <= hh && hh <= 150.0) || !(2.0 <= fl && fl <= fh && fh <= 10.0) {
            return Err(FsgError::param(
                "catalog heights",
                "need 2 ≤ low ≤ high ≤ 150 mm (flat high ≤ 10)",
            ));
        }
        if !(20.0 <= pl && pl <= ph && ph <= 120.0) {
            return Err(FsgError::param(
                "catalog footprints",
                "need 20 ≤ low ≤ high ≤ 120 mm",
            ));
        }
        if !(self.graspable_minor_max_mm >= pl) {
            return Err(FsgError::param(
                "graspable_minor_max_mm",
                "below the footprint lower bound — nothing could be drawn",
            ));
        }
        if self.material_mix.iter().any(|&w| w < 0.0)
            || self.material_mix.iter().sum::<f64>() <= 0.0
        {
            return Err(FsgError::param("material_mix", "weights must be ≥ 0 and sum > 0"));
        }
        if !(self.center_range_mm >= 0.0) || self.retries == 0 {
            return Err(FsgError::param("catalog", "center range ≥ 0 and retries ≥ 1"));
        }
        Ok(())
    }
}

/// The fixed overhead evaluation camera: 300×300, straight down from
/// 700 mm, principal point at the image center.
pub fn default_camera() -> CameraModel {
    CameraModel::top_down(700.0, 600.0, 600.0, 149.5, 149.5)
}

const OPAQUE_PALETTE: [[u8; 3]; 6] = [
    [198, 64, 54],
    [66, 132, 198],
    [74, 168, 92],
    [212, 160, 64],
    [142, 92, 178],
    [205, 120, 150],
];
const FLAT_PALETTE: [[u8; 3]; 4] = [
    [226, 210, 170],
    [188, 206, 222],
    [222, 180, 188],
    [196, 220, 188],
];

fn draw_material(rng: &mut ChaCha8Rng, mix: &[f64; 4]) -> Material {
    let total: f64 = mix.iter().sum();
    let mut x = rng.gen_range(0.0..total);
    for (m, &w) in Material::ALL.iter().zip(mix) {
        if x < w {
            return *m;
        }
        x -= w;
    }
    Material::FlatTextured
}

/// Draws one isolated object on a textured table; deterministic per seed.
///
/// Shape, material, footprint, and pose come from the catalog mixture.
/// Flat-material objects and disks stay below 10 mm; transparent heights
/// track the footprint size (tall glassware reads bigger) so appearance
/// carries a height cue. The drawn object is guaranteed graspable; if the
/// footprint draw cannot satisfy that within the retry budget a
/// generation error is returned.
pub fn generate_scene(rng: &mut ChaCha8Rng, params: &CatalogParams) -> FsgResult<Scene> {
    params.validate()?;
    let camera = default_camera();
    let table = TableTexture {
        base: [192, 188, 182],
        alt: [205, 202, 197],
        square_mm: 24.0,
        phase_mm: (rng.gen_range(0.0..24.0), rng.gen_range(0.0..24.0)),
        noise_seed: rng.gen(),
    };

    let (pl, ph) = params.footprint_range_mm;
    let minor_cap = params.graspable_minor_max_mm.min(ph);
    let mut placed: Option<SceneObject> = None;
    for _ in 0..params.retries {
        let shape_kind: u32 = rng.gen_range(0..3);
        let material = draw_material(rng, &params.material_mix);
        let flat = material == Material::FlatTextured || shape_kind == 2;

        let shape = match shape_kind {
            0 => {
                let minor = rng.gen_range(pl..=minor_cap);
                let major = rng.gen_range(minor..=ph);
                // which object axis is the minor one varies with the draw
                if rng.gen::<bool>() {
                    Shape::Box { half_x_mm: minor / 2.0, half_y_mm: major / 2.0 }
                } else {
                    Shape::Box { half_x_mm: major / 2.0, half_y_mm: minor / 2.0 }
                }
            }
            1 => Shape::Cylinder { radius_mm: rng.gen_range(pl / 2.0..=minor_cap / 2.0) },
            _ => Shape::Disk { radius_mm: rng.gen_range(pl / 2.0..=minor_cap / 2.0) },
        };

        let minor = match shape {
            Shape::Box { half_x_mm, half_y_mm } => 2.0 * half_x_mm.min(half_y_mm),
            Shape::Cylinder { radius_mm } | Shape::Disk { radius_mm } => 2.0 * radius_mm,
        };
        let height = if flat {
            rng.gen_range(params.flat_height_range_mm.0..=params.flat_height_range_mm.1)
        } else if material == Material::Transparent {
            // glassware: taller pieces have wider footprints, within ±8 mm
            let (hl, hh) = params.height_range_mm;
            (1.1 * minor + rng.gen_range(-8.0..=8.0)).clamp(hl.max(40.0).min(hh), hh)
        } else {
            rng.gen_range(params.height_range_mm.0..=params.height_range_mm.1)
        };

        let albedo = match material {
            Material::Opaque => OPAQUE_PALETTE[rng.gen_range(0..OPAQUE_PALETTE.len())],
            Material::Specular => [176, 184, 196],
            Material::Transparent => [186, 214, 232],
            Material::FlatTextured => FLAT_PALETTE[rng.gen_range(0..FLAT_PALETTE.len())],
        };

        let object = SceneObject {
            shape,
            x_mm: rng.gen_range(-params.center_range_mm..=params.center_range_mm),
            y_mm: rng.gen_range(-params.center_range_mm..=params.center_range_mm),
            yaw_rad: rng.gen_range(-std::f64::consts::FRAC_PI_2..=std::f64::consts::FRAC_PI_2),
            height_mm: height,
            material,
            albedo,
        };
        if minor <= params.graspable_minor_max_mm {
            placed = Some(object);
            break;
        }
    }
    let object = placed.ok_or_else(|| {
        FsgError::Generation("no graspable object placement within the retry budget".into())
    })?;
    Ok(Scene {
        objects: vec![object],
        table,
        camera,
    })
}

/// A rendered scene bundled with the ground truth the oracle needs.
#[derive(Debug, Clone)]
pub struct RenderedScene {
    pub scene: Scene,
    pub side: usize,
    pub true_depth: Vec<f32>,
    /// −1 table, else index into `scene.objects`.
    pub instance: Vec<i32>,
}

/// Renders, corrupts, and labels one scene into a training/eval sample.
/// The returned `RenderedScene` keeps the uncorrupted ground truth.
pub fn make_sample(
    scene: Scene,
    side: usize,
    rng: &mut ChaCha8Rng,
    id: String,
) -> FsgResult<(Sample, RenderedScene)> {
    let (rgb, true_depth, instance) = render::render_ideal(&scene, side);
    let (fuzzy, _valid) = corrupt::corrupt_depth(&scene, &true_depth, &instance, rng);
    let grasps = autolabel::autolabel(&scene, side, &GripperModel::default())?;
    let frame = RgbdFrame::new(side, side, rgb, fuzzy, scene.camera.clone())?;
    let sample = Sample {
        frame,
        grasps,
        d_t_mm: scene.camera.d_t,
        id,
    };
    let rendered = RenderedScene {
        scene,
        side,
        true_depth,
        instance,
    };
    Ok((sample, rendered))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;

    #[test]
    fn same_seed_generates_identical_scenes() {
        let params = CatalogParams::default();
        let a = generate_scene(&mut ChaCha8Rng::seed_from_u64(42), &params).unwrap();
        let b = generate_scene(&mut ChaCha8Rng::seed_from_u64(42), &params).unwrap();
        assert_eq!(a.objects, b.objects);
        assert_eq!(a.table, b.table);
    }

    #[test]
    fn flat_material_draws_stay_under_ten_millimeters() {
        let params = CatalogParams {
            material_mix: [0.0, 0.0, 0.0, 1.0],
            ..CatalogParams::default()
        };
        for seed in 0..50 {
            let s = generate_scene(&mut ChaCha8Rng::seed_from_u64(seed), &params).unwrap();
            assert!(s.objects[0].height_mm <= 10.0);
            assert_eq!(s.objects[0].material, Material::FlatTextured);
        }
    }

    #[test]
    fn generated_objects_are_always_graspable() {
        let params = CatalogParams::default();
        for seed in 0..100 {
            let s = generate_scene(&mut ChaCha8Rng::seed_from_u64(seed), &params).unwrap();
            let (minor, _) = s.objects[0].minor_axis();
            assert!(minor <= params.graspable_minor_max_mm, "minor {minor}");
            assert!(s.objects[0].height_mm >= 2.0 && s.objects[0].height_mm <= 150.0);
        }
    }

    #[test]
    fn box_extents_and_containment_agree_with_hand_geometry() {
        let obj = SceneObject {
            shape: Shape::Box { half_x_mm: 20.0, half_y_mm: 40.0 },
            x_mm: 10.0,
            y_mm: -5.0,
            yaw_rad: std::f64::consts::FRAC_PI_6,
            height_mm: 50.0,
            material: Material::Opaque,
            albedo: [200, 60, 50],
        };
        // extent along the object's own x-axis is the full x side
        assert!((obj.extent_along(obj.yaw_rad) - 40.0).abs() < 1e-12);
        assert!((obj.extent_along(obj.yaw_rad + std::f64::consts::FRAC_PI_2) - 80.0).abs() < 1e-12);
        let (minor, dir) = obj.minor_axis();
        assert!((minor - 40.0).abs() < 1e-12);
        assert!((dir - obj.yaw_rad).abs() < 1e-12);
        // a point 19 mm along the object x-axis is inside; 21 mm is not
        let (s, c) = obj.yaw_rad.sin_cos();
        assert!(obj.contains(10.0 + 19.0 * c, -5.0 + 19.0 * s));
        assert!(!obj.contains(10.0 + 21.0 * c, -5.0 + 21.0 * s));
    }

    #[test]
    fn invalid_catalog_ranges_are_rejected() {
        let bad = CatalogParams {
            height_range_mm: (1.0, 110.0),
            ..CatalogParams::default()
        };
        assert!(bad.validate().is_err());
        let bad = CatalogParams {
            footprint_range_mm: (20.0, 130.0),
            ..CatalogParams::default()
        };
        assert!(bad.validate().is_err());
    }
}
