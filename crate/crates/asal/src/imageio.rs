//! PNG encoding of frames plus minimal line and bar charts.

use std::io::Cursor;
use std::path::Path;

use asal_core::Frame;
use image::{ImageFormat, RgbImage};

use crate::error::{AppError, Result};

pub fn to_rgb8(frame: &Frame) -> RgbImage {
    let bytes = frame.pixels().iter().map(|&v| (v.clamp(0.0, 1.0) * 255.0).round() as u8).collect();
    RgbImage::from_raw(frame.width() as u32, frame.height() as u32, bytes).expect("3 channels")
}

pub fn from_rgb8(img: &RgbImage) -> Frame {
    let pixels = img.as_raw().iter().map(|&b| b as f32 / 255.0).collect();
    Frame::from_pixels(img.width() as usize, img.height() as usize, pixels)
}

pub fn encode_png(frame: &Frame) -> Vec<u8> {
    let mut out = Cursor::new(Vec::new());
    to_rgb8(frame).write_to(&mut out, ImageFormat::Png).expect("in-memory PNG encode");
    out.into_inner()
}

pub fn write_png(path: &Path, frame: &Frame) -> Result<()> {
    std::fs::write(path, encode_png(frame)).map_err(|e| AppError::io(path, e))
}

/// Any PNG, converted to RGB.
pub fn read_png(path: &Path) -> Result<Frame> {
    let bytes = std::fs::read(path).map_err(|e| AppError::io(path, e))?;
    let img = image::load_from_memory_with_format(&bytes, ImageFormat::Png)
        .map_err(|e| AppError::format(path, e))?;
    Ok(from_rgb8(&img.to_rgb8()))
}

/// Frames side by side, each resampled to `tile x tile`.
pub fn strip(frames: &[&Frame], tile: usize) -> Frame {
    let mut out = Frame::black(tile * frames.len().max(1), tile);
    for (i, f) in frames.iter().enumerate() {
        let t = f.resample(tile, tile);
        for y in 0..tile {
            for x in 0..tile {
                out.set(i * tile + x, y, t.get(x, y));
            }
        }
    }
    out
}

const MARGIN: usize = 8;
const AXIS: [f32; 3] = [0.6, 0.6, 0.6];
pub const PALETTE: [[f32; 3]; 4] =
    [[0.95, 0.55, 0.1], [0.2, 0.6, 0.95], [0.3, 0.85, 0.35], [0.9, 0.3, 0.4]];

struct Canvas {
    frame: Frame,
    x_range: (f64, f64),
    y_range: (f64, f64),
}

impl Canvas {
    fn new(width: usize, height: usize, x_range: (f64, f64), y_range: (f64, f64)) -> Self {
        let mut frame = Frame::black(width, height);
        for x in MARGIN..width - MARGIN {
            frame.set(x, height - MARGIN, AXIS);
        }
        for y in MARGIN..=height - MARGIN {
            frame.set(MARGIN, y, AXIS);
        }
        Canvas { frame, x_range, y_range }
    }

    fn to_px(&self, x: f64, y: f64) -> (f64, f64) {
        let (w, h) = (self.frame.width() as f64, self.frame.height() as f64);
        let m = MARGIN as f64;
        let sx = (x - self.x_range.0) / span(self.x_range);
        let sy = (y - self.y_range.0) / span(self.y_range);
        (m + sx * (w - 2.0 * m - 1.0), h - m - sy * (h - 2.0 * m - 1.0))
    }

    fn plot(&mut self, x: f64, y: f64, rgb: [f32; 3]) {
        let (w, h) = (self.frame.width() as isize, self.frame.height() as isize);
        let (px, py) = (x.round() as isize, y.round() as isize);
        if (0..w).contains(&px) && (0..h).contains(&py) {
            self.frame.set(px as usize, py as usize, rgb);
        }
    }

    fn line(&mut self, a: (f64, f64), b: (f64, f64), rgb: [f32; 3]) {
        let n = ((b.0 - a.0).abs().max((b.1 - a.1).abs()).ceil() as usize).max(1);
        for i in 0..=n {
            let t = i as f64 / n as f64;
            self.plot(a.0 + t * (b.0 - a.0), a.1 + t * (b.1 - a.1), rgb);
        }
    }
}

fn span(r: (f64, f64)) -> f64 {
    if r.1 > r.0 {
        r.1 - r.0
    } else {
        1.0
    }
}

fn finite_range(values: impl Iterator<Item = f64>) -> (f64, f64) {
    let (lo, hi) = values
        .filter(|v| v.is_finite())
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v), hi.max(v)));
    if lo > hi {
        (0.0, 1.0)
    } else if lo == hi {
        (lo - 0.5, hi + 0.5)
    } else {
        (lo, hi)
    }
}

/// One polyline per series over a shared x axis. Non-finite points break the
/// line.
pub fn line_plot(x: &[f64], series: &[&[f64]], width: usize, height: usize) -> Frame {
    let xr = finite_range(x.iter().copied());
    let yr = finite_range(series.iter().flat_map(|s| s.iter().copied()));
    let mut c = Canvas::new(width, height, xr, yr);
    for (k, ys) in series.iter().enumerate() {
        let rgb = PALETTE[k % PALETTE.len()];
        let mut prev = None;
        for (&xv, &yv) in x.iter().zip(ys.iter()) {
            if !(xv.is_finite() && yv.is_finite()) {
                prev = None;
                continue;
            }
            let p = c.to_px(xv, yv);
            match prev {
                Some(q) => c.line(q, p, rgb),
                None => c.plot(p.0, p.1, rgb),
            }
            prev = Some(p);
        }
    }
    c.frame
}

/// Vertical bars from zero, one per value.
pub fn bar_chart(values: &[f64], width: usize, height: usize) -> Frame {
    let hi = values.iter().copied().filter(|v| v.is_finite()).fold(0.0, f64::max);
    let n = values.len().max(1) as f64;
    let mut c = Canvas::new(width, height, (0.0, n), (0.0, if hi > 0.0 { hi } else { 1.0 }));
    for (i, &v) in values.iter().enumerate() {
        if !(v.is_finite() && v > 0.0) {
            continue;
        }
        let (x0, y0) = c.to_px(i as f64, 0.0);
        let (x1, y1) = c.to_px(i as f64 + 1.0, v);
        let (xa, xb) = (x0.ceil() as usize, (x1.floor() as usize).max(x0.ceil() as usize));
        for x in xa..=xb.min(width - MARGIN - 1) {
            c.line((x as f64, y0 - 1.0), (x as f64, y1), PALETTE[0]);
        }
    }
    c.frame
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn png_round_trip_is_exact_for_8bit_values() {
        let mut f = Frame::black(5, 3);
        f.set(1, 2, [1.0, 128.0 / 255.0, 0.0]);
        f.set(4, 0, [3.0 / 255.0, 1.0, 1.0]);
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("f.png");
        write_png(&p, &f).unwrap();
        assert_eq!(read_png(&p).unwrap().pixels(), f.pixels());
    }

    #[test]
    fn strip_places_frames_left_to_right() {
        let red = Frame::filled(4, 4, [1.0, 0.0, 0.0]);
        let blue = Frame::filled(2, 2, [0.0, 0.0, 1.0]);
        let s = strip(&[&red, &blue], 3);
        assert_eq!((s.width(), s.height()), (6, 3));
        assert_eq!(s.get(2, 1), [1.0, 0.0, 0.0]);
        assert_eq!(s.get(3, 1), [0.0, 0.0, 1.0]);
    }

    #[test]
    fn charts_draw_inside_their_bounds() {
        let p = line_plot(&[0.0, 1.0, 2.0], &[&[0.0, 1.0, f64::NAN], &[2.0; 3]], 64, 48);
        assert_eq!((p.width(), p.height()), (64, 48));
        assert!(p.pixels().chunks(3).any(|c| c == PALETTE[0]));
        assert!(p.pixels().chunks(3).any(|c| c == PALETTE[1]));
        let b = bar_chart(&[0.0, 3.0, 1.0], 40, 30);
        assert!(b.pixels().chunks(3).any(|c| c == PALETTE[0]));
        let empty = line_plot(&[], &[], 32, 32);
        assert!(empty.is_valid());
    }
}
