//! Unit-norm embeddings of frames and prompts.

use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::frame::Frame;

/// Tolerance on `‖v‖₂ = 1`.
pub const NORM_TOLERANCE: f64 = 1e-5;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct EmbeddingVector(Vec<f64>);

impl EmbeddingVector {
    /// Accepts a vector that is already unit-norm within [`NORM_TOLERANCE`].
    pub fn new(values: Vec<f64>) -> Result<Self> {
        let n = norm(&values);
        if values.is_empty() || !n.is_finite() || (n - 1.0).abs() > NORM_TOLERANCE {
            return Err(Error::InvalidArgument("embedding is not unit-norm"));
        }
        Ok(EmbeddingVector(values))
    }

    /// L2-normalize; `None` if the norm is zero or not finite.
    pub fn normalize(mut values: Vec<f64>) -> Option<Self> {
        let n = norm(&values);
        if n == 0.0 || !n.is_finite() {
            return None;
        }
        for v in &mut values {
            *v /= n;
        }
        Some(EmbeddingVector(values))
    }

    /// L2-normalize, mapping a zero vector to the first basis vector.
    pub fn normalize_or_basis(values: Vec<f64>) -> Self {
        let dim = values.len();
        Self::normalize(values).unwrap_or_else(|| Self::basis(dim, 0))
    }

    pub fn basis(dim: usize, axis: usize) -> Self {
        let mut v = vec![0.0; dim];
        v[axis] = 1.0;
        EmbeddingVector(v)
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }

    pub fn neg(&self) -> Self {
        EmbeddingVector(self.0.iter().map(|v| -v).collect())
    }
}

impl AsRef<[f64]> for EmbeddingVector {
    fn as_ref(&self) -> &[f64] {
        &self.0
    }
}

fn norm(v: &[f64]) -> f64 {
    libm::sqrt(v.iter().map(|x| x * x).sum())
}

#[inline]
pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Inner product of two embeddings of equal dimension.
pub fn similarity(a: &EmbeddingVector, b: &EmbeddingVector) -> Result<f64> {
    if a.dim() != b.dim() {
        return Err(Error::DimMismatch { left: a.dim(), right: b.dim() });
    }
    Ok(dot(&a.0, &b.0))
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EmbedderDescriptor {
    pub name: String,
    pub dim: usize,
    pub supports_text: bool,
}

/// Image and text embedding backend.
///
/// `embed_images` returns one embedding per input frame, in input order.
pub trait Embedder {
    fn descriptor(&self) -> EmbedderDescriptor;

    fn embed_images(&self, frames: &[&Frame]) -> Result<Vec<EmbeddingVector>>;

    fn embed_text(&self, prompt: &str) -> Result<EmbeddingVector>;

    fn embed_image(&self, frame: &Frame) -> Result<EmbeddingVector> {
        let mut out = self.embed_images(&[frame])?;
        out.pop().ok_or_else(|| Error::BackendUnavailable("empty response".to_string()))
    }
}

impl<E: Embedder + ?Sized> Embedder for &E {
    fn descriptor(&self) -> EmbedderDescriptor {
        (**self).descriptor()
    }
    fn embed_images(&self, frames: &[&Frame]) -> Result<Vec<EmbeddingVector>> {
        (**self).embed_images(frames)
    }
    fn embed_text(&self, prompt: &str) -> Result<EmbeddingVector> {
        (**self).embed_text(prompt)
    }
}

/// Low-level baseline: box-average the frame down to `side x side x 3`,
/// flatten row-major with channels innermost, subtract the mean and
/// L2-normalize. A frame whose downsample is constant maps to the first
/// basis vector.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PixelEmbedder {
    side: usize,
}

impl Default for PixelEmbedder {
    fn default() -> Self {
        PixelEmbedder { side: 8 }
    }
}

impl PixelEmbedder {
    pub fn new(side: usize) -> Self {
        assert!(side > 0);
        PixelEmbedder { side }
    }

    pub fn dim(&self) -> usize {
        self.side * self.side * 3
    }

    /// Box-averaged `side x side x 3` values.
    pub fn downsample(&self, frame: &Frame) -> Vec<f64> {
        let side = self.side;
        let bounds = |i: usize, len: usize| {
            let lo = i * len / side;
            let hi = ((i + 1) * len / side).max(lo + 1).min(len);
            (lo.min(len - 1), hi)
        };
        let mut out = vec![0.0; self.dim()];
        for by in 0..side {
            let (y0, y1) = bounds(by, frame.height());
            for bx in 0..side {
                let (x0, x1) = bounds(bx, frame.width());
                let mut acc = [0.0f64; 3];
                for y in y0..y1 {
                    for x in x0..x1 {
                        let p = frame.get(x, y);
                        for c in 0..3 {
                            acc[c] += f64::from(p[c]);
                        }
                    }
                }
                let count = ((y1 - y0) * (x1 - x0)) as f64;
                for c in 0..3 {
                    out[(by * side + bx) * 3 + c] = acc[c] / count;
                }
            }
        }
        out
    }

    pub fn embed(&self, frame: &Frame) -> EmbeddingVector {
        let mut v = self.downsample(frame);
        let mean = v.iter().sum::<f64>() / v.len() as f64;
        for x in &mut v {
            *x -= mean;
        }
        // Constant images leave only rounding noise after centring.
        if v.iter().all(|x| x.abs() < 1e-12) {
            return EmbeddingVector::basis(self.dim(), 0);
        }
        EmbeddingVector::normalize_or_basis(v)
    }
}

impl Embedder for PixelEmbedder {
    fn descriptor(&self) -> EmbedderDescriptor {
        EmbedderDescriptor {
            name: alloc::format!("pixel-{}x{}", self.side, self.side),
            dim: self.dim(),
            supports_text: false,
        }
    }

    fn embed_images(&self, frames: &[&Frame]) -> Result<Vec<EmbeddingVector>> {
        Ok(frames.iter().map(|f| self.embed(f)).collect())
    }

    fn embed_text(&self, prompt: &str) -> Result<EmbeddingVector> {
        if prompt.is_empty() {
            return Err(Error::EmptyPrompt);
        }
        Err(Error::CapabilityMissing { backend: self.descriptor().name, capability: "text" })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn gray_frame_maps_to_first_basis_vector() {
        let e = PixelEmbedder::default();
        let v = e.embed(&Frame::filled(224, 224, [0.5; 3]));
        assert_eq!(v, EmbeddingVector::basis(192, 0));
    }

    #[test]
    fn identical_frames_identical_embeddings() {
        let e = PixelEmbedder::default();
        let mut f = Frame::black(64, 64);
        f.set(3, 5, [1.0, 0.2, 0.0]);
        assert_eq!(e.embed(&f), e.embed(&f.clone()));
    }

    #[test]
    fn quadrant_change_matches_direct_formula() {
        let e = PixelEmbedder::default();
        // Left half white, right half black; the second frame also whitens the
        // bottom-right quadrant.
        let mut a = Frame::black(16, 16);
        for y in 0..16 {
            for x in 0..8 {
                a.set(x, y, [1.0; 3]);
            }
        }
        let mut b = a.clone();
        for y in 8..16 {
            for x in 8..16 {
                b.set(x, y, [1.0; 3]);
            }
        }
        // Direct: each 8x8 cell averages a 2x2 pixel block, so the downsample is
        // the quadrant pattern itself. a: 96 ones / 96 zeros, mean 1/2, every
        // centred entry ±1/2. b: 144 ones / 48 zeros, mean 3/4, entries 1/4 or -3/4.
        // Dot = sum over 96 (a=+1/2, b=+1/4) + 48 (a=-1/2, b=+1/4) + 48 (a=-1/2, b=-3/4)
        //     = 12 - 6 + 18 = 24.  |a| = sqrt(192/4) = sqrt(48), |b| = sqrt(144/16 + 48*9/16) = sqrt(36).
        let expected = 24.0 / (libm::sqrt(48.0) * 6.0);
        let got = similarity(&e.embed(&a), &e.embed(&b)).unwrap();
        assert!((got - expected).abs() < 1e-12, "{got} vs {expected}");
        assert!(got < 1.0);
    }

    #[test]
    fn text_is_unsupported() {
        let e = PixelEmbedder::default();
        assert_eq!(e.embed_text(""), Err(Error::EmptyPrompt));
        assert!(matches!(e.embed_text("a red square"), Err(Error::CapabilityMissing { .. })));
        assert!(!e.descriptor().supports_text);
    }

    #[test]
    fn similarity_examples() {
        let v = EmbeddingVector::normalize(vec![0.3, -0.4, 0.5]).unwrap();
        assert!((similarity(&v, &v).unwrap() - 1.0).abs() < 1e-15);
        assert!((similarity(&v, &v.neg()).unwrap() + 1.0).abs() < 1e-15);
        let x = EmbeddingVector::basis(3, 0);
        let y = EmbeddingVector::basis(3, 1);
        assert_eq!(similarity(&x, &y).unwrap(), 0.0);
        assert_eq!(
            similarity(&x, &EmbeddingVector::basis(4, 0)),
            Err(Error::DimMismatch { left: 3, right: 4 })
        );
    }

    #[test]
    fn new_rejects_non_unit() {
        assert!(EmbeddingVector::new(vec![1.0, 1.0]).is_err());
        assert!(EmbeddingVector::new(vec![]).is_err());
        assert!(EmbeddingVector::new(vec![0.6, 0.8]).is_ok());
    }

    proptest! {
        #[test]
        fn pixel_embeddings_are_unit_norm(pixels in proptest::collection::vec(0.0f32..=1.0, 12 * 12 * 3)) {
            let f = Frame::from_pixels(12, 12, pixels);
            let v = PixelEmbedder::default().embed(&f);
            prop_assert!((norm(v.as_slice()) - 1.0).abs() < 1e-12);
        }

        #[test]
        fn similarity_symmetric(a in proptest::collection::vec(-1.0f64..1.0, 8), b in proptest::collection::vec(-1.0f64..1.0, 8)) {
            if let (Some(a), Some(b)) = (EmbeddingVector::normalize(a), EmbeddingVector::normalize(b)) {
                let s = similarity(&a, &b).unwrap();
                prop_assert_eq!(s, similarity(&b, &a).unwrap());
                prop_assert!((-1.0 - 1e-12..=1.0 + 1e-12).contains(&s));
            }
        }
    }
}
