//! Depth conditioning and network-input assembly.
//!
//! Order is fixed: temporal blend (when a history frame exists) → guided
//! edge-preserving spatial filter → invalid-pixel inpainting → center crop
//! and normalization. Each stage is also exposed on its own so tests can
//! pin its behavior against independent oracles.

use crate::error::{FsgError, FsgResult};
use crate::frame::RgbdFrame;
use crate::tensor::Tensor;

/// Side length of the network input crop.
pub const INPUT_SIDE: usize = 300;

/// Parameters for the whole conditioning pipeline.
#[derive(Debug, Clone)]
pub struct PreprocessParams {
    /// Spatial scale of the edge-preserving filter, pixels.
    pub sigma_s: f64,
    /// Range scale of the edge-preserving filter, depth units (mm).
    pub sigma_r: f64,
    /// Filter iterations (horizontal + vertical pass pairs).
    pub iterations: usize,
    /// Temporal blend weight on the current frame, in (0, 1].
    pub alpha: f64,
    /// Temporal gate: pixels differing more than this from history are
    /// treated as scene change and passed through, mm.
    pub delta_mm: f64,
    /// Neighborhood radius used when filling invalid pixels, px.
    pub inpaint_radius: f64,
}

impl Default for PreprocessParams {
    fn default() -> Self {
        PreprocessParams {
            sigma_s: 25.0,
            sigma_r: 30.0,
            iterations: 3,
            alpha: 0.4,
            delta_mm: 20.0,
            inpaint_radius: 3.0,
        }
    }
}

/// Optional fixed normalization constants. When absent, per-crop means are
/// used, which keeps the input distribution centered regardless of table
/// depth or lighting.
#[derive(Debug, Clone, Copy)]
pub struct NormStats {
    /// Per-channel RGB mean in [0, 1] scale.
    pub rgb_mean: [f32; 3],
    /// Depth mean in meters.
    pub depth_mean_m: f32,
}

/// Blends the current frame toward `history` wherever both are valid and
/// agree within `delta_mm`; pixels that moved more than the gate pass
/// through untouched. Invalid current pixels inherit the history reading
/// (persistence), which is what lets flickering sensor dropouts heal over a
/// static scene.
pub fn temporal_filter(
    frame: &mut RgbdFrame,
    history: &RgbdFrame,
    alpha: f64,
    delta_mm: f64,
) -> FsgResult<()> {
    if !(alpha > 0.0 && alpha <= 1.0) {
        return Err(FsgError::param("alpha", format!("must be in (0, 1], got {alpha}")));
    }
    if !(delta_mm >= 0.0) {
        return Err(FsgError::param("delta_mm", format!("must be ≥ 0, got {delta_mm}")));
    }
    if history.height() != frame.height() || history.width() != frame.width() {
        return Err(FsgError::dim(
            "history frame",
            format!("{}×{}", frame.height(), frame.width()),
            format!("{}×{}", history.height(), history.width()),
        ));
    }
    let (a, b) = (alpha as f32, (1.0 - alpha) as f32);
    for i in 0..frame.depth.len() {
        if frame.valid[i] && history.valid[i] {
            if (frame.depth[i] - history.depth[i]).abs() as f64 <= delta_mm {
                frame.depth[i] = a * frame.depth[i] + b * history.depth[i];
            }
        } else if !frame.valid[i] && history.valid[i] {
            frame.depth[i] = history.depth[i];
            frame.valid[i] = true;
        }
    }
    Ok(())
}

/// Per-iteration spatial scales of the recursive edge-preserving filter.
/// The geometric schedule makes the N cascaded exponential passes add up to
/// the requested overall `sigma_s`.
fn iteration_sigmas(sigma_s: f64, iterations: usize) -> Vec<f64> {
    let n = iterations as i32;
    (0..iterations)
        .map(|i| {
            sigma_s * 3.0f64.sqrt() * 2.0f64.powi(n - i as i32 - 1)
                / (4.0f64.powi(n) - 1.0).sqrt()
        })
        .collect()
}

/// Edge-preserving smoothing of depth guided by the color image.
///
/// Neighboring pixels are separated by a transformed-domain distance
/// `1 + (sigma_s/sigma_r)·Σ_channel |Δguide|`, so color edges stretch the
/// domain and the recursive exponential filter stops smoothing across them.
/// Validity is handled as normalized convolution: the same recursion runs
/// over `depth·valid` and `valid`, valid pixels take the ratio, and invalid
/// pixels are left for the inpainting stage (never overwritten here).
pub fn domain_transform_filter(
    frame: &mut RgbdFrame,
    sigma_s: f64,
    sigma_r: f64,
    iterations: usize,
) -> FsgResult<()> {
    if !(sigma_s > 0.0) {
        return Err(FsgError::param("sigma_s", format!("must be positive, got {sigma_s}")));
    }
    if !(sigma_r > 0.0) {
        return Err(FsgError::param("sigma_r", format!("must be positive, got {sigma_r}")));
    }
    if iterations == 0 {
        return Err(FsgError::param("iterations", "must be at least 1"));
    }
    let (h, w) = (frame.height(), frame.width());
    let ratio = sigma_s / sigma_r;

    // Transformed-domain distances to the left neighbor (stored at col ≥ 1)
    // and to the upper neighbor (stored at row ≥ 1).
    let guide_step = |i: usize, j: usize| -> f64 {
        let a = &frame.rgb[i * 3..i * 3 + 3];
        let b = &frame.rgb[j * 3..j * 3 + 3];
        let grad: f64 = (0..3).map(|c| (a[c] as f64 - b[c] as f64).abs()).sum();
        1.0 + ratio * grad
    };
    let mut dist_h = vec![0.0f64; h * w];
    let mut dist_v = vec![0.0f64; h * w];
    for r in 0..h {
        for c in 1..w {
            let i = r * w + c;
            dist_h[i] = guide_step(i, i - 1);
        }
    }
    for r in 1..h {
        for c in 0..w {
            let i = r * w + c;
            dist_v[i] = guide_step(i, i - w);
        }
    }

    let mut num: Vec<f64> = frame
        .depth
        .iter()
        .zip(&frame.valid)
        .map(|(&d, &v)| if v { d as f64 } else { 0.0 })
        .collect();
    let mut den: Vec<f64> = frame.valid.iter().map(|&v| v as u8 as f64).collect();

    for sigma_i in iteration_sigmas(sigma_s, iterations) {
        let a = (-std::f64::consts::SQRT_2 / sigma_i).exp();
        // horizontal, left→right then right→left
        for r in 0..h {
            let row = r * w;
            for c in 1..w {
                let f = a.powf(dist_h[row + c]);
                num[row + c] += f * (num[row + c - 1] - num[row + c]);
                den[row + c] += f * (den[row + c - 1] - den[row + c]);
            }
            for c in (0..w - 1).rev() {
                let f = a.powf(dist_h[row + c + 1]);
                num[row + c] += f * (num[row + c + 1] - num[row + c]);
                den[row + c] += f * (den[row + c + 1] - den[row + c]);
            }
        }
        // vertical, top→bottom then bottom→top
        for c in 0..w {
            for r in 1..h {
                let (i, j) = (r * w + c, (r - 1) * w + c);
                let f = a.powf(dist_v[i]);
                num[i] += f * (num[j] - num[i]);
                den[i] += f * (den[j] - den[i]);
            }
            for r in (0..h - 1).rev() {
                let (i, j) = (r * w + c, (r + 1) * w + c);
                let f = a.powf(dist_v[j]);
                num[i] += f * (num[j] - num[i]);
                den[i] += f * (den[j] - den[i]);
            }
        }
    }

    for i in 0..h * w {
        if frame.valid[i] {
            frame.depth[i] = (num[i] / den[i].max(1e-12)) as f32;
        }
    }
    Ok(())
}

/// Fills invalid depth pixels by marching inward from the valid boundary.
///
/// Pixels are processed in increasing distance from the nearest valid pixel
/// (8-connected shortest path); each is set to the distance- and
/// level-weighted average of already-known neighbors within `radius`, with
/// a first-order gradient term so linear depth fields extrapolate exactly.
pub fn inpaint_invalid(frame: &mut RgbdFrame, radius: f64) -> FsgResult<()> {
    if !(radius >= 1.0) {
        return Err(FsgError::param("inpaint radius", format!("must be ≥ 1 px, got {radius}")));
    }
    let (h, w) = (frame.height(), frame.width());
    let n = h * w;
    let mut known = frame.valid.clone();
    if known.iter().all(|&k| !k) {
        return Err(FsgError::Data(
            "cannot inpaint a frame with no valid depth pixels".into(),
        ));
    }
    if known.iter().all(|&k| k) {
        return Ok(());
    }

    // Multi-source shortest distance to the valid region (Dijkstra over the
    // 8-neighborhood; positive f64 distances compare correctly as raw bits,
    // which keeps the heap ordering total and the fill order deterministic).
    use std::cmp::Reverse;
    use std::collections::BinaryHeap;
    const INF: f64 = f64::INFINITY;
    let mut dist = vec![INF; n];
    let mut heap: BinaryHeap<Reverse<(u64, usize)>> = BinaryHeap::new();
    for i in 0..n {
        if known[i] {
            dist[i] = 0.0;
            heap.push(Reverse((0u64, i)));
        }
    }
    let neighbors = |i: usize| -> [(usize, f64); 8] {
        let (r, c) = (i / w, i % w);
        let mut out = [(usize::MAX, 0.0); 8];
        let mut k = 0;
        for dr in -1i64..=1 {
            for dc in -1i64..=1 {
                if dr == 0 && dc == 0 {
                    continue;
                }
                let (nr, nc) = (r as i64 + dr, c as i64 + dc);
                if nr >= 0 && nr < h as i64 && nc >= 0 && nc < w as i64 {
                    let cost = if dr != 0 && dc != 0 {
                        std::f64::consts::SQRT_2
                    } else {
                        1.0
                    };
                    out[k] = ((nr as usize) * w + nc as usize, cost);
                    k += 1;
                }
            }
        }
        out
    };
    while let Some(Reverse((dbits, i))) = heap.pop() {
        let d = f64::from_bits(dbits);
        if d > dist[i] {
            continue;
        }
        for (j, cost) in neighbors(i) {
            if j == usize::MAX {
                continue;
            }
            let nd = d + cost;
            if nd < dist[j] {
                dist[j] = nd;
                heap.push(Reverse((nd.to_bits(), j)));
            }
        }
    }

    let mut order: Vec<usize> = (0..n).filter(|&i| !known[i]).collect();
    order.sort_by_key(|&i| (dist[i].to_bits(), i));

    let rad = radius.ceil() as i64;
    for &p in &order {
        let (pr, pc) = ((p / w) as i64, (p % w) as i64);
        let mut wsum = 0.0f64;
        let mut vsum = 0.0f64;
        for dr in -rad..=rad {
            for dc in -rad..=rad {
                let (qr, qc) = (pr + dr, pc + dc);
                if qr < 0 || qr >= h as i64 || qc < 0 || qc >= w as i64 {
                    continue;
                }
                let q = (qr as usize) * w + qc as usize;
                if !known[q] || (dr == 0 && dc == 0) {
                    continue;
                }
                let sep2 = (dr * dr + dc * dc) as f64;
                if sep2 > radius * radius {
                    continue;
                }
                // central/one-sided depth gradient from known neighbors only
                let grad = |du: i64, dv: i64| -> f64 {
                    let (ar, ac) = (qr + du, qc + dv);
                    let (br, bc) = (qr - du, qc - dv);
                    let fwd = ar >= 0 && ar < h as i64 && ac >= 0 && ac < w as i64 && {
                        known[(ar as usize) * w + ac as usize]
                    };
                    let bwd = br >= 0 && br < h as i64 && bc >= 0 && bc < w as i64 && {
                        known[(br as usize) * w + bc as usize]
                    };
                    let at = |r: i64, c: i64| frame.depth[(r as usize) * w + c as usize] as f64;
                    match (fwd, bwd) {
                        (true, true) => (at(ar, ac) - at(br, bc)) / 2.0,
                        (true, false) => at(ar, ac) - at(qr, qc),
                        (false, true) => at(qr, qc) - at(br, bc),
                        (false, false) => 0.0,
                    }
                };
                let gr = grad(1, 0);
                let gc = grad(0, 1);
                let level = 1.0 / (1.0 + (dist[q] - dist[p]).abs());
                let weight = level / sep2;
                let value =
                    frame.depth[q] as f64 + gr * (pr - qr) as f64 + gc * (pc - qc) as f64;
                wsum += weight;
                vsum += weight * value;
            }
        }
        debug_assert!(wsum > 0.0, "fill order guarantees a known neighbor in range");
        // 0 is the "invalid" sentinel, so keep fills strictly positive
        frame.depth[p] = ((vsum / wsum).max(1e-3)) as f32;
        known[p] = true;
    }
    for v in frame.valid.iter_mut() {
        *v = true;
    }
    Ok(())
}

/// Center-crops to the network's input size and normalizes into a
/// 1×4×300×300 tensor (channels R, G, B, depth-in-meters). Returns the
/// cropped frame alongside so later stages can read conditioned depth and
/// map pixel coordinates back to the sensor frame.
pub fn assemble_input(
    frame: &RgbdFrame,
    stats: Option<&NormStats>,
) -> FsgResult<(Tensor, RgbdFrame)> {
    let crop = frame.center_crop(INPUT_SIDE)?;
    if crop.valid.iter().any(|&v| !v) {
        return Err(FsgError::Data(
            "input assembly requires inpainted depth (invalid pixels remain)".into(),
        ));
    }
    let npix = (INPUT_SIDE * INPUT_SIDE) as f64;
    let (rgb_mean, depth_mean_m) = match stats {
        Some(s) => (s.rgb_mean, s.depth_mean_m),
        None => {
            let mut m = [0.0f64; 3];
            for px in crop.rgb.chunks_exact(3) {
                for c in 0..3 {
                    m[c] += px[c] as f64 / 255.0;
                }
            }
            let dm = crop.depth.iter().map(|&d| d as f64 / 1000.0).sum::<f64>() / npix;
            ([(m[0] / npix) as f32, (m[1] / npix) as f32, (m[2] / npix) as f32], dm as f32)
        }
    };
    let mut input = Tensor::zeros([1, 4, INPUT_SIDE, INPUT_SIDE]);
    for r in 0..INPUT_SIDE {
        for c in 0..INPUT_SIDE {
            let i = r * INPUT_SIDE + c;
            for ch in 0..3 {
                *input.at_mut(0, ch, r, c) =
                    crop.rgb[i * 3 + ch] as f32 / 255.0 - rgb_mean[ch];
            }
            *input.at_mut(0, 3, r, c) = crop.depth[i] / 1000.0 - depth_mean_m;
        }
    }
    input.ensure_finite("assemble_input")?;
    Ok((input, crop))
}

/// The full conditioning pipeline in its fixed order.
pub fn preprocess(
    frame: &RgbdFrame,
    history: Option<&RgbdFrame>,
    stats: Option<&NormStats>,
    params: &PreprocessParams,
) -> FsgResult<(Tensor, RgbdFrame)> {
    let mut f = frame.clone();
    if let Some(hist) = history {
        temporal_filter(&mut f, hist, params.alpha, params.delta_mm)?;
    }
    domain_transform_filter(&mut f, params.sigma_s, params.sigma_r, params.iterations)?;
    inpaint_invalid(&mut f, params.inpaint_radius)?;
    assemble_input(&f, stats)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::camera::CameraModel;

    fn cam() -> CameraModel {
        CameraModel::top_down(700.0, 600.0, 600.0, 149.5, 149.5)
    }

    fn flat_frame(h: usize, w: usize, depth_mm: f32) -> RgbdFrame {
        RgbdFrame::new(h, w, vec![128; h * w * 3], vec![depth_mm; h * w], cam()).unwrap()
    }

    #[test]
    fn filter_preserves_constant_depth() {
        let mut f = flat_frame(40, 40, 702.5);
        domain_transform_filter(&mut f, 25.0, 30.0, 3).unwrap();
        for &d in &f.depth {
            assert!((d - 702.5).abs() < 1e-3, "constant depth drifted to {d}");
        }
    }

    #[test]
    fn filter_rejects_bad_parameters() {
        let mut f = flat_frame(8, 8, 700.0);
        assert!(matches!(
            domain_transform_filter(&mut f, 0.0, 30.0, 3),
            Err(FsgError::Parameter { .. })
        ));
        assert!(matches!(
            domain_transform_filter(&mut f, 25.0, -1.0, 3),
            Err(FsgError::Parameter { .. })
        ));
        assert!(matches!(
            domain_transform_filter(&mut f, 25.0, 30.0, 0),
            Err(FsgError::Parameter { .. })
        ));
    }

    #[test]
    fn temporal_identity_and_gate() {
        let hist = flat_frame(6, 6, 700.0);
        // current == history → unchanged
        let mut cur = hist.clone();
        temporal_filter(&mut cur, &hist, 0.4, 20.0).unwrap();
        assert_eq!(cur.depth, hist.depth);
        // far beyond the gate everywhere → current passes through
        let mut moved = flat_frame(6, 6, 600.0);
        temporal_filter(&mut moved, &hist, 0.4, 20.0).unwrap();
        assert!(moved.depth.iter().all(|&d| d == 600.0));
        // inside the gate → convex blend
        let mut close = flat_frame(6, 6, 710.0);
        temporal_filter(&mut close, &hist, 0.4, 20.0).unwrap();
        assert!(close.depth.iter().all(|&d| (d - 704.0).abs() < 1e-4));
    }

    #[test]
    fn temporal_persistence_fills_invalid_from_history() {
        let hist = flat_frame(4, 4, 700.0);
        let mut cur = flat_frame(4, 4, 700.0);
        cur.depth[5] = 0.0;
        cur.valid[5] = false;
        temporal_filter(&mut cur, &hist, 0.4, 20.0).unwrap();
        assert_eq!(cur.depth[5], 700.0);
        assert!(cur.valid[5]);
    }

    #[test]
    fn temporal_rejects_alpha_out_of_range() {
        let hist = flat_frame(4, 4, 700.0);
        let mut cur = flat_frame(4, 4, 700.0);
        for bad in [0.0, -0.5, 1.5] {
            assert!(matches!(
                temporal_filter(&mut cur, &hist, bad, 20.0),
                Err(FsgError::Parameter { .. })
            ));
        }
    }

    #[test]
    fn inpaint_identity_and_single_pixel() {
        let mut f = flat_frame(10, 10, 700.0);
        inpaint_invalid(&mut f, 3.0).unwrap();
        assert!(f.depth.iter().all(|&d| d == 700.0));

        let mut g = flat_frame(10, 10, 654.0);
        g.depth[5 * 10 + 5] = 0.0;
        g.valid[5 * 10 + 5] = false;
        inpaint_invalid(&mut g, 3.0).unwrap();
        assert!((g.depth[5 * 10 + 5] - 654.0).abs() < 1e-3);
        assert!(g.valid.iter().all(|&v| v));
    }

    #[test]
    fn inpaint_all_invalid_is_a_data_error() {
        let mut f = flat_frame(5, 5, 700.0);
        f.depth.fill(0.0);
        f.valid.fill(false);
        assert!(matches!(inpaint_invalid(&mut f, 3.0), Err(FsgError::Data(_))));
    }

    #[test]
    fn assemble_centers_constant_depth_to_zero() {
        let f = flat_frame(300, 300, 687.0);
        let (input, crop) = assemble_input(&f, None).unwrap();
        assert_eq!(crop.crop_offset, (0, 0));
        for r in (0..300).step_by(97) {
            for c in (0..300).step_by(89) {
                assert!(input.at(0, 3, r, c).abs() < 1e-6);
            }
        }
    }

    #[test]
    fn assemble_rejects_remaining_invalid_pixels() {
        let mut f = flat_frame(300, 300, 700.0);
        f.depth[7] = 0.0;
        f.valid[7] = false;
        assert!(matches!(assemble_input(&f, None), Err(FsgError::Data(_))));
    }

    #[test]
    fn assemble_crop_offset_matches_centered_arithmetic() {
        let mut f = flat_frame(480, 640, 700.0);
        // tag the sensor-frame center pixel through the depth channel
        let center = 240 * 640 + 320;
        f.depth[center] = 725.0;
        let (input, crop) = assemble_input(&f, None).unwrap();
        assert_eq!(crop.crop_offset, (90, 170));
        assert_eq!(crop.to_uncropped(150, 150), (240, 320));
        let d_center = input.at(0, 3, 150, 150);
        let d_off = input.at(0, 3, 150, 151);
        assert!(
            d_center > d_off,
            "center tag lost: {d_center} vs {d_off}"
        );
    }
}
