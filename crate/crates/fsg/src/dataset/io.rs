//! On-disk sample format: `{id}_rgb.png` (8-bit RGB), `{id}_depth.png`
//! (16-bit single-channel, millimeters, 0 = invalid), `{id}_meta.json`
//! (camera intrinsics + pose as a 4×4 row-major matrix, table depth, grasp
//! rectangles).

use std::path::Path;

use image::{DynamicImage, ImageBuffer, Luma, Rgb};
use nalgebra::{Isometry3, Matrix3, Matrix4, Rotation3, Translation3, UnitQuaternion};
use serde::{Deserialize, Serialize};

use super::{GraspRectangle, Sample};
use crate::camera::CameraModel;
use crate::error::{FsgError, FsgResult};
use crate::frame::RgbdFrame;

#[derive(Serialize, Deserialize)]
struct CameraMeta {
    fx: f64,
    fy: f64,
    cx: f64,
    cy: f64,
    /// Camera-to-world rigid transform, 4×4 row-major.
    pose: [f64; 16],
}

#[derive(Serialize, Deserialize)]
struct MetaJson {
    camera: CameraMeta,
    d_t_mm: f64,
    grasps: Vec<GraspRectangle>,
}

fn check_id(id: &str) -> FsgResult<()> {
    if id.is_empty() || id.contains(['/', '\\']) {
        return Err(FsgError::format("sample id", format!("{id:?} is not a bare file stem")));
    }
    Ok(())
}

fn pose_to_row_major(pose: &Isometry3<f64>) -> [f64; 16] {
    let m: Matrix4<f64> = pose.to_homogeneous();
    let mut out = [0.0; 16];
    for r in 0..4 {
        for c in 0..4 {
            out[r * 4 + c] = m[(r, c)];
        }
    }
    out
}

fn pose_from_row_major(v: &[f64; 16]) -> FsgResult<Isometry3<f64>> {
    let bottom = [v[12], v[13], v[14], v[15]];
    if bottom
        .iter()
        .zip([0.0, 0.0, 0.0, 1.0])
        .any(|(a, b)| (a - b).abs() > 1e-9)
    {
        return Err(FsgError::format(
            "pose matrix",
            "bottom row must be (0, 0, 0, 1)",
        ));
    }
    let r = Matrix3::new(
        v[0], v[1], v[2], //
        v[4], v[5], v[6], //
        v[8], v[9], v[10],
    );
    let gram = r.transpose() * r;
    if (gram - Matrix3::identity()).abs().max() > 1e-6 || (r.determinant() - 1.0).abs() > 1e-6 {
        return Err(FsgError::format(
            "pose matrix",
            "rotation block is not a proper rotation",
        ));
    }
    let rot = UnitQuaternion::from_rotation_matrix(&Rotation3::from_matrix_unchecked(r));
    Ok(Isometry3::from_parts(
        Translation3::new(v[3], v[7], v[11]),
        rot,
    ))
}

/// Writes the three files for one sample into `dir`.
pub fn save_sample(dir: &Path, sample: &Sample) -> FsgResult<()> {
    check_id(&sample.id)?;
    sample.validate()?;
    let (h, w) = (sample.frame.height() as u32, sample.frame.width() as u32);

    let rgb: ImageBuffer<Rgb<u8>, _> =
        ImageBuffer::from_raw(w, h, sample.frame.rgb.clone()).ok_or_else(|| {
            FsgError::Internal("rgb buffer length disagrees with frame size".into())
        })?;
    rgb.save(dir.join(format!("{}_rgb.png", sample.id)))?;

    let depth_mm: Vec<u16> = sample
        .frame
        .depth
        .iter()
        .zip(&sample.frame.valid)
        .map(|(&d, &ok)| {
            if ok {
                d.round().clamp(1.0, u16::MAX as f32) as u16
            } else {
                0
            }
        })
        .collect();
    let depth: ImageBuffer<Luma<u16>, _> =
        ImageBuffer::from_raw(w, h, depth_mm).ok_or_else(|| {
            FsgError::Internal("depth buffer length disagrees with frame size".into())
        })?;
    depth.save(dir.join(format!("{}_depth.png", sample.id)))?;

    let meta = MetaJson {
        camera: CameraMeta {
            fx: sample.frame.camera.fx,
            fy: sample.frame.camera.fy,
            cx: sample.frame.camera.cx,
            cy: sample.frame.camera.cy,
            pose: pose_to_row_major(&sample.frame.camera.pose),
        },
        d_t_mm: sample.d_t_mm,
        grasps: sample.grasps.clone(),
    };
    let text = serde_json::to_string_pretty(&meta)?;
    let meta_path = dir.join(format!("{}_meta.json", sample.id));
    std::fs::write(&meta_path, text).map_err(|e| FsgError::io(meta_path.display(), e))?;
    Ok(())
}

/// Reads one sample back. Missing files surface as I/O errors, malformed
/// metadata as JSON/format errors, wrong image encodings as format errors,
/// and disagreeing image sizes as dimension errors.
pub fn load_sample(dir: &Path, id: &str) -> FsgResult<Sample> {
    check_id(id)?;
    let meta_path = dir.join(format!("{id}_meta.json"));
    let meta_text = std::fs::read_to_string(&meta_path)
        .map_err(|e| FsgError::io(meta_path.display(), e))?;
    let meta: MetaJson = serde_json::from_str(&meta_text)?;
    if !(meta.d_t_mm > 0.0) {
        return Err(FsgError::format("d_t_mm", "table depth must be positive"));
    }

    let rgb_img = image::open(dir.join(format!("{id}_rgb.png")))?;
    let rgb = match rgb_img {
        DynamicImage::ImageRgb8(buf) => buf,
        _ => return Err(FsgError::format("rgb image", "must be 8-bit RGB")),
    };
    let depth_img = image::open(dir.join(format!("{id}_depth.png")))?;
    let depth = match depth_img {
        DynamicImage::ImageLuma16(buf) => buf,
        _ => {
            return Err(FsgError::format(
                "depth image",
                "must be 16-bit single-channel",
            ))
        }
    };
    if rgb.dimensions() != depth.dimensions() {
        return Err(FsgError::dim(
            "depth image",
            format!("{:?}", rgb.dimensions()),
            format!("{:?}", depth.dimensions()),
        ));
    }

    let (w, h) = rgb.dimensions();
    let camera = CameraModel {
        fx: meta.camera.fx,
        fy: meta.camera.fy,
        cx: meta.camera.cx,
        cy: meta.camera.cy,
        pose: pose_from_row_major(&meta.camera.pose)?,
        d_t: meta.d_t_mm,
    };
    camera.validate()?;
    let depth_f: Vec<f32> = depth.as_raw().iter().map(|&d| d as f32).collect();
    let frame = RgbdFrame::new(h as usize, w as usize, rgb.into_raw(), depth_f, camera)?;
    let sample = Sample {
        frame,
        grasps: meta.grasps,
        d_t_mm: meta.d_t_mm,
        id: id.to_string(),
    };
    sample.validate()?;
    Ok(sample)
}

/// Sorted ids of every sample found in `dir` (by its `_meta.json`).
pub fn list_ids(dir: &Path) -> FsgResult<Vec<String>> {
    let mut ids = Vec::new();
    let entries = std::fs::read_dir(dir).map_err(|e| FsgError::io(dir.display(), e))?;
    for entry in entries {
        let name = entry.map_err(|e| FsgError::io(dir.display(), e))?.file_name();
        let name = name.to_string_lossy();
        if let Some(id) = name.strip_suffix("_meta.json") {
            ids.push(id.to_string());
        }
    }
    ids.sort();
    Ok(ids)
}
