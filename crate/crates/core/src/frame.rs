use alloc::vec;
use alloc::vec::Vec;

/// A rendered RGB image with channel values in `[0, 1]`, row-major, interleaved.
#[derive(Debug, Clone, PartialEq)]
pub struct Frame {
    width: usize,
    height: usize,
    pub step_index: usize,
    pixels: Vec<f32>,
}

impl Frame {
    pub fn black(width: usize, height: usize) -> Self {
        Frame { width, height, step_index: 0, pixels: vec![0.0; width * height * 3] }
    }

    pub fn filled(width: usize, height: usize, rgb: [f32; 3]) -> Self {
        let mut f = Self::black(width, height);
        for px in f.pixels.chunks_exact_mut(3) {
            px.copy_from_slice(&rgb);
        }
        f
    }

    /// Wraps raw pixels, clamping every value into `[0, 1]`.
    ///
    /// Panics if `pixels.len() != width * height * 3`.
    pub fn from_pixels(width: usize, height: usize, mut pixels: Vec<f32>) -> Self {
        assert_eq!(pixels.len(), width * height * 3, "pixel buffer size");
        for p in &mut pixels {
            *p = if p.is_nan() { 0.0 } else { p.clamp(0.0, 1.0) };
        }
        Frame { width, height, step_index: 0, pixels }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn pixels(&self) -> &[f32] {
        &self.pixels
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> [f32; 3] {
        let i = (y * self.width + x) * 3;
        [self.pixels[i], self.pixels[i + 1], self.pixels[i + 2]]
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize, rgb: [f32; 3]) {
        let i = (y * self.width + x) * 3;
        self.pixels[i] = rgb[0].clamp(0.0, 1.0);
        self.pixels[i + 1] = rgb[1].clamp(0.0, 1.0);
        self.pixels[i + 2] = rgb[2].clamp(0.0, 1.0);
    }

    /// Nearest-neighbor resample.
    pub fn resample(&self, width: usize, height: usize) -> Frame {
        if width == self.width && height == self.height {
            return self.clone();
        }
        let mut out = Frame::black(width, height);
        out.step_index = self.step_index;
        for y in 0..height {
            let sy = y * self.height / height;
            for x in 0..width {
                let sx = x * self.width / width;
                let src = (sy * self.width + sx) * 3;
                let dst = (y * width + x) * 3;
                out.pixels[dst..dst + 3].copy_from_slice(&self.pixels[src..src + 3]);
            }
        }
        out
    }

    pub fn is_valid(&self) -> bool {
        self.pixels.len() == self.width * self.height * 3
            && self.pixels.iter().all(|p| (0.0..=1.0).contains(p))
    }
}

/// Upsample a `rows x cols` RGB lattice to a `size x size` frame with
/// nearest-neighbor lookup. `cell(r, c)` returns the colour of one lattice cell.
pub fn upsample_lattice(
    rows: usize,
    cols: usize,
    size: usize,
    mut cell: impl FnMut(usize, usize) -> [f32; 3],
) -> Frame {
    let mut frame = Frame::black(size, size);
    let col_of: Vec<usize> = (0..size).map(|x| x * cols / size).collect();
    for y in 0..size {
        let r = y * rows / size;
        let row_start = y * size * 3;
        let mut last_c = usize::MAX;
        let mut rgb = [0.0f32; 3];
        for (x, &c) in col_of.iter().enumerate() {
            if c != last_c {
                rgb = cell(r, c);
                for v in &mut rgb {
                    *v = v.clamp(0.0, 1.0);
                }
                last_c = c;
            }
            let i = row_start + x * 3;
            frame.pixels[i..i + 3].copy_from_slice(&rgb);
        }
    }
    frame
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn resample_identity_and_upsample() {
        let mut f = Frame::black(2, 2);
        f.set(1, 0, [1.0, 0.0, 0.0]);
        assert_eq!(f.resample(2, 2), f);
        let big = f.resample(4, 4);
        assert_eq!(big.get(2, 0), [1.0, 0.0, 0.0]);
        assert_eq!(big.get(3, 1), [1.0, 0.0, 0.0]);
        assert_eq!(big.get(1, 1), [0.0, 0.0, 0.0]);
    }

    #[test]
    fn from_pixels_clamps() {
        let f = Frame::from_pixels(1, 1, vec![-1.0, 2.0, f32::NAN]);
        assert_eq!(f.pixels(), &[0.0, 1.0, 0.0]);
        assert!(f.is_valid());
    }
}
