//! Depth-sensor corruption: turns ideal rendered depth into the fuzzy
//! depth a structured-light camera would report — specular dropout blobs,
//! transparent see-through reads, flat objects blending into the table,
//! and global sensor noise.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use std::collections::VecDeque;

use super::{Material, Scene};

/// Standard deviation of the sensor noise applied to every valid pixel.
const GLOBAL_NOISE_MM: f64 = 1.5;
/// Extra noise on opaque object surfaces.
const OPAQUE_NOISE_MM: f64 = 2.0;
/// Noise of the table-plane reads through transparent objects.
const TRANSPARENT_DISTORT_MM: f64 = 10.0;
/// Noise of flat objects blended toward the table plane.
const FLAT_NOISE_MM: f64 = 3.0;

/// Multi-source BFS over the mask: marks `target` pixels reachable from
/// `seeds` in breadth-first order — correlated blobs, exact pixel count.
fn grow_blobs(
    mask: &[usize],
    side: usize,
    in_mask: &[bool],
    seeds: &[usize],
    target: usize,
) -> Vec<usize> {
    let mut picked = Vec::with_capacity(target);
    let mut seen = vec![false; side * side];
    let mut queue: VecDeque<usize> = VecDeque::new();
    for &s in seeds {
        if !seen[s] {
            seen[s] = true;
            queue.push_back(s);
        }
    }
    while let Some(p) = queue.pop_front() {
        picked.push(p);
        if picked.len() == target {
            break;
        }
        let (r, c) = (p / side, p % side);
        let mut push = |rr: usize, cc: usize, queue: &mut VecDeque<usize>| {
            let q = rr * side + cc;
            if in_mask[q] && !seen[q] {
                seen[q] = true;
                queue.push_back(q);
            }
        };
        if r > 0 {
            push(r - 1, c, &mut queue);
        }
        if r + 1 < side {
            push(r + 1, c, &mut queue);
        }
        if c > 0 {
            push(r, c - 1, &mut queue);
        }
        if c + 1 < side {
            push(r, c + 1, &mut queue);
        }
    }
    // disconnected mask regions can starve the flood; top up arbitrarily
    if picked.len() < target {
        for &p in mask {
            if !seen[p] {
                picked.push(p);
                if picked.len() == target {
                    break;
                }
            }
        }
    }
    picked
}

/// Applies per-material corruption on object pixels and global sensor
/// noise everywhere. Returns the fuzzy depth (0 = invalid) and its
/// validity mask. Pixels outside object masks are only touched by the
/// global noise.
pub fn corrupt_depth(
    scene: &Scene,
    true_depth: &[f32],
    instance: &[i32],
    rng: &mut ChaCha8Rng,
) -> (Vec<f32>, Vec<bool>) {
    let side = (true_depth.len() as f64).sqrt() as usize;
    debug_assert_eq!(side * side, true_depth.len());
    let global = Normal::new(0.0, GLOBAL_NOISE_MM).unwrap();

    let mut depth: Vec<f32> = true_depth
        .iter()
        .map(|&d| d + global.sample(rng) as f32)
        .collect();
    let mut valid = vec![true; depth.len()];
    let d_t = scene.camera.d_t as f32;

    for (obj_idx, obj) in scene.objects.iter().enumerate() {
        let mask: Vec<usize> = (0..depth.len())
            .filter(|&i| instance[i] == obj_idx as i32)
            .collect();
        if mask.is_empty() {
            continue;
        }
        match obj.material {
            Material::Opaque => {
                let extra = Normal::new(0.0, OPAQUE_NOISE_MM).unwrap();
                for &i in &mask {
                    depth[i] += extra.sample(rng) as f32;
                }
            }
            Material::FlatTextured => {
                // blends into the table: |depth − d_t| below sensor noise
                let n = Normal::new(0.0, FLAT_NOISE_MM).unwrap();
                for &i in &mask {
                    depth[i] = d_t + n.sample(rng) as f32;
                }
            }
            Material::Transparent => {
                // most pixels read the background plane through the object;
                // the rest — nearest the mask centroid, where incidence is
                // normal — drop out entirely
                let bg_frac = rng.gen_range(0.70..=0.95);
                let n_bg = ((mask.len() as f64) * bg_frac).round() as usize;
                let (mut cr, mut cc) = (0.0f64, 0.0f64);
                for &i in &mask {
                    cr += (i / side) as f64;
                    cc += (i % side) as f64;
                }
                cr /= mask.len() as f64;
                cc /= mask.len() as f64;
                let mut by_center: Vec<usize> = mask.clone();
                by_center.sort_by(|&a, &b| {
                    let da = ((a / side) as f64 - cr).powi(2) + ((a % side) as f64 - cc).powi(2);
                    let db = ((b / side) as f64 - cr).powi(2) + ((b % side) as f64 - cc).powi(2);
                    da.total_cmp(&db).then(a.cmp(&b))
                });
                // background reads, farthest-from-center first
                for &i in by_center.iter().rev().take(n_bg) {
                    depth[i] = d_t
                        + rng.gen_range(-TRANSPARENT_DISTORT_MM..=TRANSPARENT_DISTORT_MM) as f32;
                }
                for &i in by_center.iter().take(mask.len() - n_bg) {
                    depth[i] = 0.0;
                    valid[i] = false;
                }
            }
            Material::Specular => {
                let frac = rng.gen_range(0.45..=0.75);
                let target = (((mask.len() as f64) * frac).round() as usize).max(1);
                let mut in_mask = vec![false; depth.len()];
                for &i in &mask {
                    in_mask[i] = true;
                }
                let n_seeds = 3 + (rng.gen::<u32>() % 3) as usize;
                let seeds: Vec<usize> = (0..n_seeds)
                    .map(|_| mask[rng.gen_range(0..mask.len())])
                    .collect();
                for i in grow_blobs(&mask, side, &in_mask, &seeds, target) {
                    depth[i] = 0.0;
                    valid[i] = false;
                }
                let extra = Normal::new(0.0, OPAQUE_NOISE_MM).unwrap();
                for &i in &mask {
                    if valid[i] {
                        depth[i] += extra.sample(rng) as f32;
                    }
                }
            }
        }
    }

    for i in 0..depth.len() {
        if valid[i] && depth[i] <= 0.0 {
            depth[i] = 0.1; // noise can't push a valid read to the sentinel
        }
        if !valid[i] {
            depth[i] = 0.0;
        }
    }
    (depth, valid)
}
