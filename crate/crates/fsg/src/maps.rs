//! The five pixel-wise grasp maps — quality, angle (as sin 2θ / cos 2θ),
//! normalized gripper width, and normalized object height — with the range
//! clamps every consumer may rely on. The same container serves as network
//! output and as training target.

use crate::error::{FsgError, FsgResult};
use crate::tensor::Tensor;

/// Channel indices inside the (1, 5, side, side) map tensor.
pub const CH_Q: usize = 0;
pub const CH_SIN: usize = 1;
pub const CH_COS: usize = 2;
pub const CH_W: usize = 3;
pub const CH_H: usize = 4;

/// Pixel width that normalizes the W map: `Wn = width_px / 150`, clamped.
pub const WIDTH_NORM_PX: f64 = 150.0;
/// Millimeter height that normalizes the H map: `Hn = height_mm / 150`.
pub const HEIGHT_NORM_MM: f64 = 150.0;

/// Clamped five-channel grasp maps over one square image.
#[derive(Debug, Clone, PartialEq)]
pub struct GraspMaps {
    t: Tensor,
    side: usize,
}

impl GraspMaps {
    /// Wraps raw network output (or assembled targets), clamping each
    /// channel into its documented range: Q, Wn, Hn into [0, 1] and the two
    /// angle channels into [−1, 1].
    pub fn from_raw(mut t: Tensor) -> FsgResult<Self> {
        let [n, c, h, w] = t.shape();
        if n != 1 || c != 5 || h != w {
            return Err(FsgError::dim(
                "grasp maps",
                "shape (1, 5, side, side)",
                format!("({n}, {c}, {h}, {w})"),
            ));
        }
        t.ensure_finite("grasp maps")?;
        let side = h;
        let plane = side * side;
        let data = t.data_mut();
        for ch in 0..5 {
            let (lo, hi) = if ch == CH_SIN || ch == CH_COS {
                (-1.0f32, 1.0f32)
            } else {
                (0.0f32, 1.0f32)
            };
            for v in &mut data[ch * plane..(ch + 1) * plane] {
                *v = v.clamp(lo, hi);
            }
        }
        Ok(GraspMaps { t, side })
    }

    /// All-zero maps (the empty training target).
    pub fn zeros(side: usize) -> Self {
        GraspMaps {
            t: Tensor::zeros([1, 5, side, side]),
            side,
        }
    }

    pub fn side(&self) -> usize {
        self.side
    }

    pub fn tensor(&self) -> &Tensor {
        &self.t
    }

    pub fn tensor_mut(&mut self) -> &mut Tensor {
        &mut self.t
    }

    pub fn into_tensor(self) -> Tensor {
        self.t
    }

    /// One channel as a contiguous row-major plane.
    pub fn plane(&self, channel: usize) -> &[f32] {
        self.t.plane(0, channel)
    }

    #[inline]
    pub fn at(&self, channel: usize, x: usize, y: usize) -> f32 {
        self.t.at(0, channel, y, x)
    }

    pub fn q(&self, x: usize, y: usize) -> f32 {
        self.at(CH_Q, x, y)
    }

    pub fn sin2t(&self, x: usize, y: usize) -> f32 {
        self.at(CH_SIN, x, y)
    }

    pub fn cos2t(&self, x: usize, y: usize) -> f32 {
        self.at(CH_COS, x, y)
    }

    pub fn wn(&self, x: usize, y: usize) -> f32 {
        self.at(CH_W, x, y)
    }

    pub fn hn(&self, x: usize, y: usize) -> f32 {
        self.at(CH_H, x, y)
    }
}
