//! In-memory RGBD frame: pixel-aligned color and depth with a validity
//! mask, the owning camera model, and the crop bookkeeping that lets image
//! coordinates be mapped back to the un-cropped sensor frame.

use crate::camera::CameraModel;
use crate::error::{FsgError, FsgResult};

/// One RGBD observation. Depth is millimeters with 0 meaning "no reading"
/// (the validity mask mirrors that before inpainting; after inpainting every
/// pixel is valid). `rgb` is interleaved row-major R,G,B.
#[derive(Debug, Clone)]
pub struct RgbdFrame {
    h: usize,
    w: usize,
    pub rgb: Vec<u8>,
    pub depth: Vec<f32>,
    pub valid: Vec<bool>,
    pub camera: CameraModel,
    /// (row, col) of this frame's origin inside the original sensor frame.
    pub crop_offset: (usize, usize),
}

impl RgbdFrame {
    /// Builds a frame, deriving the validity mask from `depth == 0`.
    pub fn new(
        h: usize,
        w: usize,
        rgb: Vec<u8>,
        depth: Vec<f32>,
        camera: CameraModel,
    ) -> FsgResult<Self> {
        if rgb.len() != h * w * 3 {
            return Err(FsgError::dim("rgb buffer", h * w * 3, rgb.len()));
        }
        if depth.len() != h * w {
            return Err(FsgError::dim("depth buffer", h * w, depth.len()));
        }
        let valid = depth.iter().map(|&d| d != 0.0).collect();
        Ok(RgbdFrame {
            h,
            w,
            rgb,
            depth,
            valid,
            camera,
            crop_offset: (0, 0),
        })
    }

    pub fn height(&self) -> usize {
        self.h
    }

    pub fn width(&self) -> usize {
        self.w
    }

    #[inline]
    pub fn idx(&self, row: usize, col: usize) -> usize {
        row * self.w + col
    }

    pub fn depth_at(&self, row: usize, col: usize) -> f32 {
        self.depth[self.idx(row, col)]
    }

    pub fn rgb_at(&self, row: usize, col: usize) -> [u8; 3] {
        let i = self.idx(row, col) * 3;
        [self.rgb[i], self.rgb[i + 1], self.rgb[i + 2]]
    }

    /// Centered square crop; accumulates into `crop_offset` so repeated
    /// crops still map back to the original sensor frame.
    pub fn center_crop(&self, side: usize) -> FsgResult<RgbdFrame> {
        if self.h < side || self.w < side {
            return Err(FsgError::dim_ctx(
                "frame size",
                format!("at least {side}×{side}"),
                format!("{}×{}", self.h, self.w),
                "center crop",
            ));
        }
        let r0 = (self.h - side) / 2;
        let c0 = (self.w - side) / 2;
        let mut rgb = Vec::with_capacity(side * side * 3);
        let mut depth = Vec::with_capacity(side * side);
        let mut valid = Vec::with_capacity(side * side);
        for r in r0..r0 + side {
            let row = r * self.w + c0;
            rgb.extend_from_slice(&self.rgb[row * 3..(row + side) * 3]);
            depth.extend_from_slice(&self.depth[row..row + side]);
            valid.extend_from_slice(&self.valid[row..row + side]);
        }
        Ok(RgbdFrame {
            h: side,
            w: side,
            rgb,
            depth,
            valid,
            camera: self.camera.clone(),
            crop_offset: (self.crop_offset.0 + r0, self.crop_offset.1 + c0),
        })
    }

    /// Maps a pixel of this (possibly cropped) frame back to the original
    /// sensor frame.
    pub fn to_uncropped(&self, row: usize, col: usize) -> (usize, usize) {
        (row + self.crop_offset.0, col + self.crop_offset.1)
    }
}
