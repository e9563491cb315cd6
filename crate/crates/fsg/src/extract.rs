//! From grasp maps to the best image-space grasp: Gaussian smoothing of the
//! quality map, plateau detection with connected-component labeling, and
//! per-pixel decoding of angle, width, and height.

use crate::error::{FsgError, FsgResult};
use crate::maps::{GraspMaps, CH_Q, HEIGHT_NORM_MM, WIDTH_NORM_PX};

/// Default smoothing scale for the quality map, px.
pub const DEFAULT_SMOOTH_SIGMA: f64 = 2.0;
/// Default plateau tolerance as a fraction of the quality map's range.
pub const DEFAULT_PLATEAU_REL: f64 = 1e-4;

/// One decoded grasp in image coordinates.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ImageGrasp {
    /// Pixel column of the grasp center.
    pub x_p: usize,
    /// Pixel row of the grasp center.
    pub y_p: usize,
    /// Closing-axis angle, radians in (−π/2, π/2].
    pub theta_p: f64,
    /// Gripper opening in pixels.
    pub w_p: f64,
    /// Quality in [0, 1].
    pub q: f64,
    /// Predicted object height at the grasp point, mm.
    pub h_star: f64,
}

/// Separable Gaussian blur of one square plane, kernel truncated at 3σ,
/// edges clamped (replicated). Output range never exceeds input range.
pub fn smooth_quality(q: &[f32], side: usize, sigma: f64) -> FsgResult<Vec<f32>> {
    if q.len() != side * side {
        return Err(FsgError::dim("quality plane", side * side, q.len()));
    }
    if !(sigma > 0.0) {
        return Err(FsgError::param("sigma", format!("must be positive, got {sigma}")));
    }
    let half = (3.0 * sigma).ceil() as i64;
    let mut kernel = Vec::with_capacity((2 * half + 1) as usize);
    for t in -half..=half {
        kernel.push((-(t * t) as f64 / (2.0 * sigma * sigma)).exp());
    }
    let norm: f64 = kernel.iter().sum();
    for k in &mut kernel {
        *k /= norm;
    }
    let clamp = |i: i64| i.clamp(0, side as i64 - 1) as usize;
    let mut tmp = vec![0.0f32; side * side];
    for r in 0..side {
        for c in 0..side {
            let mut acc = 0.0f64;
            for (ki, k) in kernel.iter().enumerate() {
                acc += k * q[r * side + clamp(c as i64 + ki as i64 - half)] as f64;
            }
            tmp[r * side + c] = acc as f32;
        }
    }
    let mut out = vec![0.0f32; side * side];
    for r in 0..side {
        for c in 0..side {
            let mut acc = 0.0f64;
            for (ki, k) in kernel.iter().enumerate() {
                acc += k * tmp[clamp(r as i64 + ki as i64 - half) * side + c] as f64;
            }
            out[r * side + c] = acc as f32;
        }
    }
    Ok(out)
}

/// Centers of the near-maximal plateaus of a quality plane.
///
/// Every pixel within `epsilon` of the global maximum joins the plateau
/// mask; 8-connected components of the mask are reduced to their centroids
/// (snapped to the nearest pixel belonging to the component). The returned
/// list is ordered largest component first, ties broken by the component's
/// first pixel in row-major order. Coordinates are (x = col, y = row).
pub fn resolve_maxima(q: &[f32], side: usize, epsilon: f64) -> FsgResult<Vec<(usize, usize)>> {
    if q.len() != side * side {
        return Err(FsgError::dim("quality plane", side * side, q.len()));
    }
    if !(epsilon >= 0.0) {
        return Err(FsgError::param("epsilon", format!("must be ≥ 0, got {epsilon}")));
    }
    let qmax = q.iter().cloned().fold(f32::MIN, f32::max);
    let thresh = qmax as f64 - epsilon;
    let mask: Vec<bool> = q.iter().map(|&v| v as f64 >= thresh).collect();

    // 8-connected components by scan-order flood fill
    let mut comp = vec![usize::MAX; side * side];
    let mut components: Vec<Vec<usize>> = Vec::new();
    let mut stack = Vec::new();
    for start in 0..side * side {
        if !mask[start] || comp[start] != usize::MAX {
            continue;
        }
        let id = components.len();
        let mut pixels = Vec::new();
        comp[start] = id;
        stack.push(start);
        while let Some(i) = stack.pop() {
            pixels.push(i);
            let (r, c) = (i / side, i % side);
            for dr in -1i64..=1 {
                for dc in -1i64..=1 {
                    let (nr, nc) = (r as i64 + dr, c as i64 + dc);
                    if nr < 0 || nr >= side as i64 || nc < 0 || nc >= side as i64 {
                        continue;
                    }
                    let j = (nr as usize) * side + nc as usize;
                    if mask[j] && comp[j] == usize::MAX {
                        comp[j] = id;
                        stack.push(j);
                    }
                }
            }
        }
        pixels.sort_unstable();
        components.push(pixels);
    }

    // order: size descending, then first row-major pixel
    let mut order: Vec<usize> = (0..components.len()).collect();
    order.sort_by_key(|&i| (std::cmp::Reverse(components[i].len()), components[i][0]));

    let centers = order
        .into_iter()
        .map(|i| {
            let pixels = &components[i];
            let n = pixels.len() as f64;
            let cx = pixels.iter().map(|&p| (p % side) as f64).sum::<f64>() / n;
            let cy = pixels.iter().map(|&p| (p / side) as f64).sum::<f64>() / n;
            // snap to the component pixel nearest the true centroid so the
            // returned center always lies on the plateau
            let best = pixels
                .iter()
                .copied()
                .min_by(|&a, &b| {
                    let d = |p: usize| {
                        let (x, y) = ((p % side) as f64, (p / side) as f64);
                        (x - cx).powi(2) + (y - cy).powi(2)
                    };
                    d(a).total_cmp(&d(b)).then(a.cmp(&b))
                })
                .expect("component is nonempty");
            (best % side, best / side)
        })
        .collect();
    Ok(centers)
}

/// Reads the angle/width/height maps at one center: θ = ½·atan2(sin2θ,
/// cos2θ), width and height un-normalized by their fixed constants.
pub fn decode_grasp(maps: &GraspMaps, center: (usize, usize)) -> FsgResult<ImageGrasp> {
    let (x, y) = center;
    if x >= maps.side() || y >= maps.side() {
        return Err(FsgError::dim(
            "grasp center",
            format!("inside {0}×{0}", maps.side()),
            format!("({x}, {y})"),
        ));
    }
    let theta_p = 0.5 * (maps.sin2t(x, y) as f64).atan2(maps.cos2t(x, y) as f64);
    Ok(ImageGrasp {
        x_p: x,
        y_p: y,
        theta_p,
        w_p: maps.wn(x, y) as f64 * WIDTH_NORM_PX,
        q: maps.q(x, y) as f64,
        h_star: maps.hn(x, y) as f64 * HEIGHT_NORM_MM,
    })
}

/// The full extraction pipeline: smooth Q, resolve the maximal plateaus,
/// decode the center of the largest one.
pub fn best_grasp(maps: &GraspMaps, sigma: f64, plateau_rel: f64) -> FsgResult<ImageGrasp> {
    let side = maps.side();
    let smoothed = smooth_quality(maps.plane(CH_Q), side, sigma)?;
    let lo = smoothed.iter().cloned().fold(f32::MAX, f32::min);
    let hi = smoothed.iter().cloned().fold(f32::MIN, f32::max);
    let epsilon = plateau_rel * (hi - lo) as f64;
    let centers = resolve_maxima(&smoothed, side, epsilon)?;
    let center = centers.first().copied().ok_or_else(|| {
        FsgError::Internal("resolve_maxima returned no components on a nonempty plane".into())
    })?;
    decode_grasp(maps, center)
}
