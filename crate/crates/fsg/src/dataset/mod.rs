//! Training samples: rectangle grasp labels, their rasterization into
//! pixel-wise target maps (including the height channel), online
//! augmentation, and the train/eval split.

pub mod io;

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::camera::wrap_half_turn;
use crate::error::{FsgError, FsgResult};
use crate::frame::RgbdFrame;
use crate::maps::{GraspMaps, CH_COS, CH_H, CH_Q, CH_SIN, CH_W, HEIGHT_NORM_MM, WIDTH_NORM_PX};
use crate::tensor::Tensor;

/// One labeled grasp: center, closing-axis angle, gripper opening (width,
/// measured along the closing axis), lateral finger span (length, across
/// it), and the object height at the grasp point.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct GraspRectangle {
    pub x_px: f64,
    pub y_px: f64,
    /// Closing-axis angle, radians in (−π/2, π/2].
    pub theta_rad: f64,
    /// Gripper opening, px.
    pub width_px: f64,
    /// Finger span perpendicular to the closing axis, px.
    pub length_px: f64,
    /// Object height at the grasp point, mm.
    pub height_mm: f64,
}

/// One dataset sample: the frame, its grasp labels, and the table depth.
#[derive(Debug, Clone)]
pub struct Sample {
    pub frame: RgbdFrame,
    pub grasps: Vec<GraspRectangle>,
    pub d_t_mm: f64,
    pub id: String,
}

impl Sample {
    /// Checks the label invariants; names the offending grasp on failure.
    pub fn validate(&self) -> FsgResult<()> {
        let (h, w) = (self.frame.height() as f64, self.frame.width() as f64);
        for (i, g) in self.grasps.iter().enumerate() {
            if !(g.x_px >= 0.0 && g.x_px < w && g.y_px >= 0.0 && g.y_px < h) {
                return Err(FsgError::Label {
                    grasp_index: i,
                    reason: format!("center ({}, {}) outside {w}×{h} image", g.x_px, g.y_px),
                });
            }
            if !(g.width_px > 0.0) || !(g.length_px > 0.0) {
                return Err(FsgError::Label {
                    grasp_index: i,
                    reason: format!(
                        "width and length must be positive (got {} × {})",
                        g.width_px, g.length_px
                    ),
                });
            }
            if !(g.height_mm >= 0.0) {
                return Err(FsgError::Label {
                    grasp_index: i,
                    reason: format!("height {} mm is negative", g.height_mm),
                });
            }
        }
        Ok(())
    }
}

/// Rasterizes every grasp rectangle into the five training target maps.
///
/// Each rectangle contributes its center-third region — width/3 along the
/// closing axis, full length across — setting Q = 1, the angle encoding
/// (sin 2θ, cos 2θ), normalized width, and the (constant-per-mask)
/// normalized height. Pixels outside every mask stay zero; overlaps are
/// resolved last-writer-wins in label order.
pub fn encode_labels(sample: &Sample) -> FsgResult<GraspMaps> {
    sample.validate()?;
    let (h, w) = (sample.frame.height(), sample.frame.width());
    if h != w {
        return Err(FsgError::dim("label frame", "square image", format!("{h}×{w}")));
    }
    let side = h;
    let mut t = Tensor::zeros([1, 5, side, side]);
    for g in &sample.grasps {
        let (sin_t, cos_t) = (g.theta_rad.sin(), g.theta_rad.cos());
        let (s2, c2) = ((2.0 * g.theta_rad).sin(), (2.0 * g.theta_rad).cos());
        let wn = (g.width_px / WIDTH_NORM_PX).clamp(0.0, 1.0) as f32;
        let hn = (g.height_mm / HEIGHT_NORM_MM).clamp(0.0, 1.0) as f32;
        let half_open = g.width_px / 6.0; // center third of the opening
        let half_span = g.length_px / 2.0;
        let reach = half_open.hypot(half_span).ceil() as i64 + 1;
        let (cx, cy) = (g.x_px, g.y_px);
        let r0 = ((cy as i64) - reach).max(0);
        let r1 = ((cy as i64) + reach).min(side as i64 - 1);
        let c0 = ((cx as i64) - reach).max(0);
        let c1 = ((cx as i64) + reach).min(side as i64 - 1);
        for r in r0..=r1 {
            for c in c0..=c1 {
                let (dx, dy) = (c as f64 - cx, r as f64 - cy);
                // coordinates along / across the closing axis
                let along = dx * cos_t + dy * sin_t;
                let across = -dx * sin_t + dy * cos_t;
                if along.abs() <= half_open && across.abs() <= half_span {
                    let (rr, cc) = (r as usize, c as usize);
                    *t.at_mut(0, CH_Q, rr, cc) = 1.0;
                    *t.at_mut(0, CH_SIN, rr, cc) = s2 as f32;
                    *t.at_mut(0, CH_COS, rr, cc) = c2 as f32;
                    *t.at_mut(0, CH_W, rr, cc) = wn;
                    *t.at_mut(0, CH_H, rr, cc) = hn;
                }
            }
        }
    }
    GraspMaps::from_raw(t)
}

/// Ranges for online augmentation. All draws are uniform.
#[derive(Debug, Clone)]
pub struct AugmentParams {
    /// Rotation range ± radians.
    pub max_rotation_rad: f64,
    /// Isotropic zoom range.
    pub zoom: (f64, f64),
    /// Translation jitter range ± px on each axis.
    pub max_jitter_px: f64,
    /// Redraws before giving up when every grasp lands out of frame.
    pub retries: usize,
}

impl Default for AugmentParams {
    fn default() -> Self {
        AugmentParams {
            max_rotation_rad: std::f64::consts::PI,
            zoom: (0.8, 1.2),
            max_jitter_px: 50.0,
            retries: 10,
        }
    }
}

impl AugmentParams {
    pub fn validate(&self) -> FsgResult<()> {
        if !(self.max_rotation_rad >= 0.0 && self.max_rotation_rad <= std::f64::consts::PI) {
            return Err(FsgError::param("max_rotation_rad", "must be in [0, π]"));
        }
        if !(self.zoom.0 > 0.0 && self.zoom.0 <= self.zoom.1) {
            return Err(FsgError::param("zoom", "need 0 < low ≤ high"));
        }
        if !(self.max_jitter_px >= 0.0 && self.max_jitter_px <= 50.0) {
            return Err(FsgError::param("max_jitter_px", "must be in [0, 50]"));
        }
        Ok(())
    }

    /// Parameters that make `augment` the identity map.
    pub fn identity() -> Self {
        AugmentParams {
            max_rotation_rad: 0.0,
            zoom: (1.0, 1.0),
            max_jitter_px: 0.0,
            retries: 1,
        }
    }
}

/// One drawn similarity transform (rotation, zoom, jitter) about the image
/// center, applied consistently to pixels, labels, and depth values.
struct Similarity {
    phi: f64,
    zeta: f64,
    dx: f64,
    dy: f64,
    cx: f64,
    cy: f64,
}

impl Similarity {
    fn apply(&self, x: f64, y: f64) -> (f64, f64) {
        let (s, c) = self.phi.sin_cos();
        let (rx, ry) = (x - self.cx, y - self.cy);
        (
            self.zeta * (c * rx - s * ry) + self.cx + self.dx,
            self.zeta * (s * rx + c * ry) + self.cy + self.dy,
        )
    }

    fn invert(&self, x: f64, y: f64) -> (f64, f64) {
        let (s, c) = (-self.phi).sin_cos();
        let (rx, ry) = ((x - self.cx - self.dx) / self.zeta, (y - self.cy - self.dy) / self.zeta);
        (c * rx - s * ry + self.cx, s * rx + c * ry + self.cy)
    }
}

/// Applies one explicit similarity transform (rotation about the image
/// center, isotropic zoom, translation jitter) to image, depth, and every
/// label.
///
/// Depth values scale with zoom so heights stay consistent with the scaled
/// pixel footprint (`d' = d_t − ζ·(d_t − d)`), and grasp height labels
/// scale the same way. Returns `Ok(None)` — the skip-this-sample signal —
/// when the transform pushed every grasp center out of frame.
pub fn augment_fixed(
    sample: &Sample,
    rotation_rad: f64,
    zoom: f64,
    jitter_px: (f64, f64),
) -> FsgResult<Option<Sample>> {
    sample.validate()?;
    if !(zoom > 0.0) {
        return Err(FsgError::param("zoom", "must be positive"));
    }
    let (h, w) = (sample.frame.height(), sample.frame.width());
    let sim = Similarity {
        phi: rotation_rad,
        zeta: zoom,
        dx: jitter_px.0,
        dy: jitter_px.1,
        cx: (w as f64 - 1.0) / 2.0,
        cy: (h as f64 - 1.0) / 2.0,
    };

    let grasps: Vec<GraspRectangle> = sample
        .grasps
        .iter()
        .filter_map(|g| {
            let (x, y) = sim.apply(g.x_px, g.y_px);
            if x >= 0.0 && x < w as f64 && y >= 0.0 && y < h as f64 {
                Some(GraspRectangle {
                    x_px: x,
                    y_px: y,
                    theta_rad: wrap_half_turn(g.theta_rad + sim.phi),
                    width_px: g.width_px * sim.zeta,
                    length_px: g.length_px * sim.zeta,
                    height_mm: g.height_mm * sim.zeta,
                })
            } else {
                None
            }
        })
        .collect();
    if grasps.is_empty() && !sample.grasps.is_empty() {
        return Ok(None);
    }

    // resample: RGB bilinear, depth/validity nearest-neighbor (no blending
    // across depth discontinuities), both edge-clamped
    let mut rgb = vec![0u8; h * w * 3];
    let mut depth = vec![0.0f32; h * w];
    let d_t = sample.d_t_mm as f32;
    for r in 0..h {
        for c in 0..w {
            let (sx, sy) = sim.invert(c as f64, r as f64);
            let fx = sx.clamp(0.0, w as f64 - 1.0);
            let fy = sy.clamp(0.0, h as f64 - 1.0);
            let (x0, y0) = (fx.floor() as usize, fy.floor() as usize);
            let (x1, y1) = ((x0 + 1).min(w - 1), (y0 + 1).min(h - 1));
            let (ax, ay) = (fx - x0 as f64, fy - y0 as f64);
            for ch in 0..3 {
                let v00 = sample.frame.rgb[(y0 * w + x0) * 3 + ch] as f64;
                let v01 = sample.frame.rgb[(y0 * w + x1) * 3 + ch] as f64;
                let v10 = sample.frame.rgb[(y1 * w + x0) * 3 + ch] as f64;
                let v11 = sample.frame.rgb[(y1 * w + x1) * 3 + ch] as f64;
                let v = (1.0 - ay) * ((1.0 - ax) * v00 + ax * v01)
                    + ay * ((1.0 - ax) * v10 + ax * v11);
                rgb[(r * w + c) * 3 + ch] = v.round().clamp(0.0, 255.0) as u8;
            }
            let (nx, ny) = (fx.round() as usize, fy.round() as usize);
            let src = ny * w + nx;
            depth[r * w + c] = if sample.frame.valid[src] {
                let d = sample.frame.depth[src];
                (d_t - sim.zeta as f32 * (d_t - d)).max(1e-3)
            } else {
                0.0
            };
        }
    }
    let mut frame = RgbdFrame::new(h, w, rgb, depth, sample.frame.camera.clone())?;
    frame.crop_offset = sample.frame.crop_offset;
    Ok(Some(Sample {
        frame,
        grasps,
        d_t_mm: sample.d_t_mm,
        id: sample.id.clone(),
    }))
}

/// Draws a random transform from `params` and applies it, redrawing up to
/// `params.retries` times when every grasp lands out of frame. `Ok(None)`
/// means the retries were exhausted: skip this sample.
pub fn augment(
    sample: &Sample,
    rng: &mut ChaCha8Rng,
    params: &AugmentParams,
) -> FsgResult<Option<Sample>> {
    params.validate()?;
    for _ in 0..params.retries.max(1) {
        let phi = if params.max_rotation_rad > 0.0 {
            rng.gen_range(-params.max_rotation_rad..=params.max_rotation_rad)
        } else {
            0.0
        };
        let zeta = if params.zoom.0 < params.zoom.1 {
            rng.gen_range(params.zoom.0..=params.zoom.1)
        } else {
            params.zoom.0
        };
        let (dx, dy) = if params.max_jitter_px > 0.0 {
            (
                rng.gen_range(-params.max_jitter_px..=params.max_jitter_px),
                rng.gen_range(-params.max_jitter_px..=params.max_jitter_px),
            )
        } else {
            (0.0, 0.0)
        };
        if let Some(out) = augment_fixed(sample, phi, zeta, (dx, dy))? {
            return Ok(Some(out));
        }
    }
    Ok(None)
}

/// Deterministic seeded shuffle split into (train, eval) index lists.
pub fn split(n: usize, eval_fraction: f64, seed: u64) -> FsgResult<(Vec<usize>, Vec<usize>)> {
    if n < 10 {
        return Err(FsgError::Data(format!(
            "need at least 10 samples to split, got {n}"
        )));
    }
    if !(eval_fraction > 0.0 && eval_fraction < 1.0) {
        return Err(FsgError::param("eval_fraction", "must be in (0, 1)"));
    }
    use rand::SeedableRng;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut order: Vec<usize> = (0..n).collect();
    // Fisher–Yates
    for i in (1..n).rev() {
        let j = rng.gen_range(0..=i);
        order.swap(i, j);
    }
    let eval_n = ((n as f64 * eval_fraction).round() as usize).clamp(1, n - 1);
    let eval = order[..eval_n].to_vec();
    let train = order[eval_n..].to_vec();
    Ok((train, eval))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::camera::CameraModel;
    use rand::SeedableRng;

    fn cam() -> CameraModel {
        CameraModel::top_down(700.0, 600.0, 600.0, 149.5, 149.5)
    }

    fn sample_with(grasps: Vec<GraspRectangle>) -> Sample {
        let side = 100;
        let frame = RgbdFrame::new(
            side,
            side,
            vec![60; side * side * 3],
            vec![700.0; side * side],
            cam(),
        )
        .unwrap();
        Sample {
            frame,
            grasps,
            d_t_mm: 700.0,
            id: "t".into(),
        }
    }

    fn rect(x: f64, y: f64, theta: f64) -> GraspRectangle {
        GraspRectangle {
            x_px: x,
            y_px: y,
            theta_rad: theta,
            width_px: 30.0,
            length_px: 12.0,
            height_mm: 45.0,
        }
    }

    #[test]
    fn no_grasps_encode_to_zero_targets() {
        let maps = encode_labels(&sample_with(vec![])).unwrap();
        assert!(maps.tensor().data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn axis_aligned_rectangle_masks_the_center_third() {
        let maps = encode_labels(&sample_with(vec![rect(50.0, 40.0, 0.0)])).unwrap();
        // angle 0: closing axis along +x → mask spans width/6 = 5 px in x,
        // length/2 = 6 px in y, centered on (50, 40)
        assert_eq!(maps.q(50, 40), 1.0);
        assert_eq!(maps.q(55, 40), 1.0);
        assert_eq!(maps.q(56, 40), 0.0, "outside the center third");
        assert_eq!(maps.q(50, 46), 1.0);
        assert_eq!(maps.q(50, 47), 0.0, "outside the finger span");
        assert_eq!(maps.sin2t(50, 40), 0.0);
        assert_eq!(maps.cos2t(50, 40), 1.0);
        assert_eq!(maps.wn(50, 40), 30.0 / 150.0);
        assert_eq!(maps.hn(50, 40), 45.0 / 150.0);
        assert_eq!(maps.q(0, 0), 0.0);
    }

    #[test]
    fn angle_and_its_half_turn_encode_identically() {
        let a = encode_labels(&sample_with(vec![rect(50.0, 50.0, 0.7)])).unwrap();
        let b = encode_labels(&sample_with(vec![rect(
            50.0,
            50.0,
            wrap_half_turn(0.7 + std::f64::consts::PI),
        )]))
        .unwrap();
        assert_eq!(a.tensor().data(), b.tensor().data());
    }

    #[test]
    fn center_outside_image_names_the_grasp() {
        let s = sample_with(vec![rect(50.0, 50.0, 0.0), rect(150.0, 10.0, 0.0)]);
        match encode_labels(&s) {
            Err(FsgError::Label { grasp_index, .. }) => assert_eq!(grasp_index, 1),
            other => panic!("expected a label error, got {other:?}"),
        }
    }

    #[test]
    fn identity_augment_is_the_identity() {
        let s = sample_with(vec![rect(30.0, 60.0, 0.4)]);
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let out = augment(&s, &mut rng, &AugmentParams::identity())
            .unwrap()
            .expect("identity transform keeps grasps in frame");
        assert_eq!(out.frame.rgb, s.frame.rgb);
        assert_eq!(out.frame.depth, s.frame.depth);
        assert_eq!(out.grasps, s.grasps);
    }

    #[test]
    fn fixed_quarter_turn_rotates_center_and_wraps_angle() {
        let s = sample_with(vec![rect(70.0, 49.5, 0.3)]);
        let out = augment_fixed(&s, std::f64::consts::FRAC_PI_2, 1.0, (0.0, 0.0))
            .unwrap()
            .expect("center stays in frame");
        let g = &out.grasps[0];
        // (70, 49.5) is 20.5 px right of center; a quarter turn (x→ −y axis
        // swap in image coordinates) moves it 20.5 px below center
        assert!((g.x_px - 49.5).abs() < 1e-9, "x {}", g.x_px);
        assert!((g.y_px - 70.0).abs() < 1e-9, "y {}", g.y_px);
        let expect = wrap_half_turn(0.3 + std::f64::consts::FRAC_PI_2);
        assert!((g.theta_rad - expect).abs() < 1e-12);
        assert!(g.theta_rad > -std::f64::consts::FRAC_PI_2 && g.theta_rad <= std::f64::consts::FRAC_PI_2);
    }

    #[test]
    fn augment_scales_heights_with_zoom() {
        let mut s = sample_with(vec![rect(50.0, 50.0, 0.0)]);
        // object region 30 mm above the table
        for r in 40..60 {
            for c in 40..60 {
                s.frame.depth[r * 100 + c] = 670.0;
            }
        }
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let params = AugmentParams {
            max_rotation_rad: 0.0,
            zoom: (1.5, 1.5),
            max_jitter_px: 0.0,
            retries: 1,
        };
        let out = augment(&s, &mut rng, &params).unwrap().unwrap();
        assert!((out.grasps[0].height_mm - 67.5).abs() < 1e-9);
        assert!((out.grasps[0].width_px - 45.0).abs() < 1e-9);
        // center pixel depth now reads 1.5× the height above the table
        let d = out.frame.depth[50 * 100 + 50];
        assert!((d - (700.0 - 1.5 * 30.0)).abs() < 1e-3, "depth {d}");
    }

    #[test]
    fn augment_signals_skip_when_grasps_leave_the_frame() {
        let s = sample_with(vec![rect(2.0, 2.0, 0.0)]);
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        let params = AugmentParams {
            max_rotation_rad: 0.0,
            zoom: (1.0, 1.0),
            // jitter is drawn from ±50 but the center is at (2,2): most
            // draws throw the grasp out; retries=1 with a seed that does
            max_jitter_px: 50.0,
            retries: 1,
        };
        let mut skipped = false;
        for _ in 0..20 {
            if augment(&s, &mut rng, &params).unwrap().is_none() {
                skipped = true;
                break;
            }
        }
        assert!(skipped, "expected at least one skip signal over 20 draws");
    }

    #[test]
    fn split_is_deterministic_disjoint_exhaustive() {
        let (tr1, ev1) = split(90, 0.1, 1234).unwrap();
        let (tr2, ev2) = split(90, 0.1, 1234).unwrap();
        assert_eq!((tr1.clone(), ev1.clone()), (tr2, ev2));
        assert_eq!(tr1.len(), 81);
        assert_eq!(ev1.len(), 9);
        let mut all: Vec<usize> = tr1.iter().chain(ev1.iter()).copied().collect();
        all.sort_unstable();
        assert_eq!(all, (0..90).collect::<Vec<_>>());
        // a different seed shuffles differently
        let (tr3, _) = split(90, 0.1, 99).unwrap();
        assert_ne!(tr1, tr3);
    }

    #[test]
    fn split_rejects_tiny_datasets() {
        assert!(matches!(split(9, 0.1, 1), Err(FsgError::Data(_))));
    }
}
