//! Overlay rendering: the decoded grasp drawn as a rotated rectangle on the
//! RGB crop, with the primitive name and predicted height lettered into the
//! image by a small built-in 5×7 font.

use std::path::Path;

use crate::error::{FsgError, FsgResult};
use crate::extract::ImageGrasp;
use crate::frame::RgbdFrame;
use crate::plan::{GraspPlan, PrimitiveKind};

const RED: [u8; 3] = [235, 64, 40];
const GREEN: [u8; 3] = [70, 220, 90];
const WHITE: [u8; 3] = [255, 255, 255];
const BLACK: [u8; 3] = [0, 0, 0];

struct Canvas {
    px: Vec<u8>,
    w: usize,
    h: usize,
}

impl Canvas {
    fn set(&mut self, x: i64, y: i64, color: [u8; 3]) {
        if x < 0 || y < 0 || x >= self.w as i64 || y >= self.h as i64 {
            return;
        }
        let i = (y as usize * self.w + x as usize) * 3;
        self.px[i..i + 3].copy_from_slice(&color);
    }

    /// Stepped line draw; endpoints in pixel coordinates.
    fn line(&mut self, a: (f64, f64), b: (f64, f64), color: [u8; 3]) {
        let steps = (b.0 - a.0).abs().max((b.1 - a.1).abs()).ceil().max(1.0) as usize;
        for s in 0..=steps {
            let t = s as f64 / steps as f64;
            let x = a.0 + t * (b.0 - a.0);
            let y = a.1 + t * (b.1 - a.1);
            self.set(x.round() as i64, y.round() as i64, color);
        }
    }

    fn text(&mut self, x0: i64, y0: i64, scale: i64, s: &str, color: [u8; 3]) {
        let mut cx = x0;
        for ch in s.chars() {
            let rows = glyph(ch);
            for (ry, row) in rows.iter().enumerate() {
                for rx in 0..5 {
                    if row & (0b10000 >> rx) != 0 {
                        for dy in 0..scale {
                            for dx in 0..scale {
                                self.set(
                                    cx + rx as i64 * scale + dx,
                                    y0 + ry as i64 * scale + dy,
                                    color,
                                );
                            }
                        }
                    }
                }
            }
            cx += 6 * scale;
        }
    }
}

/// 5×7 uppercase bitmap font; rows top to bottom, bit 4 is the left column.
fn glyph(c: char) -> [u8; 7] {
    match c.to_ascii_uppercase() {
        'A' => [0b01110, 0b10001, 0b10001, 0b11111, 0b10001, 0b10001, 0b10001],
        'B' => [0b11110, 0b10001, 0b10001, 0b11110, 0b10001, 0b10001, 0b11110],
        'C' => [0b01110, 0b10001, 0b10000, 0b10000, 0b10000, 0b10001, 0b01110],
        'D' => [0b11110, 0b10001, 0b10001, 0b10001, 0b10001, 0b10001, 0b11110],
        'E' => [0b11111, 0b10000, 0b10000, 0b11110, 0b10000, 0b10000, 0b11111],
        'F' => [0b11111, 0b10000, 0b10000, 0b11110, 0b10000, 0b10000, 0b10000],
        'G' => [0b01110, 0b10001, 0b10000, 0b10111, 0b10001, 0b10001, 0b01111],
        'H' => [0b10001, 0b10001, 0b10001, 0b11111, 0b10001, 0b10001, 0b10001],
        'I' => [0b01110, 0b00100, 0b00100, 0b00100, 0b00100, 0b00100, 0b01110],
        'J' => [0b00111, 0b00010, 0b00010, 0b00010, 0b00010, 0b10010, 0b01100],
        'K' => [0b10001, 0b10010, 0b10100, 0b11000, 0b10100, 0b10010, 0b10001],
        'L' => [0b10000, 0b10000, 0b10000, 0b10000, 0b10000, 0b10000, 0b11111],
        'M' => [0b10001, 0b11011, 0b10101, 0b10101, 0b10001, 0b10001, 0b10001],
        'N' => [0b10001, 0b11001, 0b10101, 0b10011, 0b10001, 0b10001, 0b10001],
        'O' => [0b01110, 0b10001, 0b10001, 0b10001, 0b10001, 0b10001, 0b01110],
        'P' => [0b11110, 0b10001, 0b10001, 0b11110, 0b10000, 0b10000, 0b10000],
        'Q' => [0b01110, 0b10001, 0b10001, 0b10001, 0b10101, 0b10010, 0b01101],
        'R' => [0b11110, 0b10001, 0b10001, 0b11110, 0b10100, 0b10010, 0b10001],
        'S' => [0b01111, 0b10000, 0b10000, 0b01110, 0b00001, 0b00001, 0b11110],
        'T' => [0b11111, 0b00100, 0b00100, 0b00100, 0b00100, 0b00100, 0b00100],
        'U' => [0b10001, 0b10001, 0b10001, 0b10001, 0b10001, 0b10001, 0b01110],
        'V' => [0b10001, 0b10001, 0b10001, 0b10001, 0b01010, 0b01010, 0b00100],
        'W' => [0b10001, 0b10001, 0b10001, 0b10101, 0b10101, 0b10101, 0b01010],
        'X' => [0b10001, 0b10001, 0b01010, 0b00100, 0b01010, 0b10001, 0b10001],
        'Y' => [0b10001, 0b10001, 0b01010, 0b00100, 0b00100, 0b00100, 0b00100],
        'Z' => [0b11111, 0b00001, 0b00010, 0b00100, 0b01000, 0b10000, 0b11111],
        '0' => [0b01110, 0b10001, 0b10011, 0b10101, 0b11001, 0b10001, 0b01110],
        '1' => [0b00100, 0b01100, 0b00100, 0b00100, 0b00100, 0b00100, 0b01110],
        '2' => [0b01110, 0b10001, 0b00001, 0b00110, 0b01000, 0b10000, 0b11111],
        '3' => [0b11111, 0b00010, 0b00100, 0b00010, 0b00001, 0b10001, 0b01110],
        '4' => [0b00010, 0b00110, 0b01010, 0b10010, 0b11111, 0b00010, 0b00010],
        '5' => [0b11111, 0b10000, 0b11110, 0b00001, 0b00001, 0b10001, 0b01110],
        '6' => [0b00110, 0b01000, 0b10000, 0b11110, 0b10001, 0b10001, 0b01110],
        '7' => [0b11111, 0b00001, 0b00010, 0b00100, 0b01000, 0b01000, 0b01000],
        '8' => [0b01110, 0b10001, 0b10001, 0b01110, 0b10001, 0b10001, 0b01110],
        '9' => [0b01110, 0b10001, 0b10001, 0b01111, 0b00001, 0b00010, 0b01100],
        '*' => [0b00000, 0b00100, 0b10101, 0b01110, 0b10101, 0b00100, 0b00000],
        '=' => [0b00000, 0b00000, 0b11111, 0b00000, 0b11111, 0b00000, 0b00000],
        '.' => [0b00000, 0b00000, 0b00000, 0b00000, 0b00000, 0b01100, 0b01100],
        '-' => [0b00000, 0b00000, 0b00000, 0b11111, 0b00000, 0b00000, 0b00000],
        '_' => [0b00000, 0b00000, 0b00000, 0b00000, 0b00000, 0b00000, 0b11111],
        ' ' => [0; 7],
        _ => [0b11111; 7],
    }
}

/// Draws the grasp rectangle (red finger lines, green closing axis) on the
/// RGB crop, letters the primitive name and h* into the corner, and writes
/// the PNG.
pub fn draw_overlay(
    crop: &RgbdFrame,
    g: &ImageGrasp,
    plan: &GraspPlan,
    path: &Path,
) -> FsgResult<()> {
    let (w, h) = (crop.width(), crop.height());
    let mut canvas = Canvas {
        px: crop.rgb.clone(),
        w,
        h,
    };

    let c = (g.x_p as f64, g.y_p as f64);
    let axis = (g.theta_p.cos(), g.theta_p.sin());
    let perp = (-axis.1, axis.0);
    let half_w = (g.w_p / 2.0).max(2.0);
    let half_l = (g.w_p * 0.25).clamp(6.0, 20.0);

    // the two finger lines, perpendicular to the closing axis
    for side in [-1.0, 1.0] {
        let f = (c.0 + side * half_w * axis.0, c.1 + side * half_w * axis.1);
        let a = (f.0 + half_l * perp.0, f.1 + half_l * perp.1);
        let b = (f.0 - half_l * perp.0, f.1 - half_l * perp.1);
        canvas.line(a, b, RED);
    }
    // closing axis between them
    canvas.line(
        (c.0 - half_w * axis.0, c.1 - half_w * axis.1),
        (c.0 + half_w * axis.0, c.1 + half_w * axis.1),
        GREEN,
    );
    canvas.set(c.0 as i64, c.1 as i64, WHITE);

    let name = match plan.primitive {
        PrimitiveKind::FlatSmall => "FLAT-SMALL",
        PrimitiveKind::NormalSized => "NORMAL-SIZED",
    };
    let label = format!("{name} H*={:.1}MM", g.h_star);
    canvas.text(5, 5, 2, &label, BLACK);
    canvas.text(4, 4, 2, &label, WHITE);

    let img = image::RgbImage::from_raw(w as u32, h as u32, canvas.px)
        .ok_or_else(|| FsgError::Internal("overlay buffer size mismatch".into()))?;
    img.save(path)?;
    Ok(())
}
