//! Memoizing wrapper around an embedder.

use std::collections::HashMap;
use std::sync::Mutex;

use asal_core::{Embedder, EmbedderDescriptor, EmbeddingVector, Error, Frame};
use sha2::{Digest, Sha256};

/// Caches image embeddings keyed by backend name and a SHA-256 of the
/// frame's dimensions and pixel bytes. Text embeddings are cached by prompt.
pub struct CachedEmbedder<E> {
    inner: E,
    name: String,
    images: Mutex<HashMap<[u8; 32], EmbeddingVector>>,
    texts: Mutex<HashMap<String, EmbeddingVector>>,
}

impl<E: Embedder> CachedEmbedder<E> {
    pub fn new(inner: E) -> Self {
        let name = inner.descriptor().name;
        CachedEmbedder {
            inner,
            name,
            images: Mutex::new(HashMap::new()),
            texts: Mutex::new(HashMap::new()),
        }
    }

    pub fn key(&self, frame: &Frame) -> [u8; 32] {
        let mut h = Sha256::new();
        h.update(self.name.as_bytes());
        h.update([0]);
        h.update((frame.width() as u64).to_le_bytes());
        h.update((frame.height() as u64).to_le_bytes());
        for v in frame.pixels() {
            h.update(v.to_le_bytes());
        }
        h.finalize().into()
    }

    pub fn len(&self) -> usize {
        self.images.lock().expect("cache lock").len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

impl<E: Embedder> Embedder for CachedEmbedder<E> {
    fn descriptor(&self) -> EmbedderDescriptor {
        self.inner.descriptor()
    }

    fn embed_images(&self, frames: &[&Frame]) -> Result<Vec<EmbeddingVector>, Error> {
        let keys: Vec<[u8; 32]> = frames.iter().map(|f| self.key(f)).collect();
        let mut out: Vec<Option<EmbeddingVector>> = {
            let cache = self.images.lock().expect("cache lock");
            keys.iter().map(|k| cache.get(k).cloned()).collect()
        };
        let missing: Vec<usize> = (0..frames.len()).filter(|&i| out[i].is_none()).collect();
        if !missing.is_empty() {
            let batch: Vec<&Frame> = missing.iter().map(|&i| frames[i]).collect();
            let fresh = self.inner.embed_images(&batch)?;
            if fresh.len() != batch.len() {
                return Err(Error::LengthMismatch { expected: batch.len(), found: fresh.len() });
            }
            let mut cache = self.images.lock().expect("cache lock");
            for (&i, e) in missing.iter().zip(fresh) {
                cache.insert(keys[i], e.clone());
                out[i] = Some(e);
            }
        }
        Ok(out.into_iter().map(|e| e.expect("filled")).collect())
    }

    fn embed_text(&self, prompt: &str) -> Result<EmbeddingVector, Error> {
        if let Some(e) = self.texts.lock().expect("cache lock").get(prompt) {
            return Ok(e.clone());
        }
        let e = self.inner.embed_text(prompt)?;
        self.texts.lock().expect("cache lock").insert(prompt.to_string(), e.clone());
        Ok(e)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use asal_core::PixelEmbedder;
    use std::sync::atomic::{AtomicUsize, Ordering};

    struct Counting {
        inner: PixelEmbedder,
        frames: AtomicUsize,
    }

    impl Embedder for Counting {
        fn descriptor(&self) -> EmbedderDescriptor {
            self.inner.descriptor()
        }
        fn embed_images(&self, frames: &[&Frame]) -> Result<Vec<EmbeddingVector>, Error> {
            self.frames.fetch_add(frames.len(), Ordering::SeqCst);
            self.inner.embed_images(frames)
        }
        fn embed_text(&self, prompt: &str) -> Result<EmbeddingVector, Error> {
            self.inner.embed_text(prompt)
        }
    }

    #[test]
    fn repeated_frames_hit_the_cache() {
        let c = CachedEmbedder::new(Counting { inner: PixelEmbedder::default(), frames: AtomicUsize::new(0) });
        let a = Frame::filled(8, 8, [1.0, 0.0, 0.0]);
        let mut b = Frame::black(8, 8);
        b.set(3, 3, [1.0; 3]);
        let first = c.embed_images(&[&a, &b, &a]).unwrap();
        assert_eq!(c.inner.frames.load(Ordering::SeqCst), 3);
        let second = c.embed_images(&[&b, &a]).unwrap();
        assert_eq!(c.inner.frames.load(Ordering::SeqCst), 3);
        assert_eq!(second, vec![first[1].clone(), first[0].clone()]);
        assert_eq!(first[0], PixelEmbedder::default().embed(&a));
        assert_eq!(c.len(), 2);
    }

    #[test]
    fn key_depends_on_shape_and_content() {
        let c = CachedEmbedder::new(PixelEmbedder::default());
        let a = Frame::black(4, 2);
        let b = Frame::black(2, 4);
        assert_ne!(c.key(&a), c.key(&b));
        let mut d = a.clone();
        d.set(0, 0, [0.0, 0.0, 1e-6]);
        assert_ne!(c.key(&a), c.key(&d));
        assert_eq!(c.key(&a), c.key(&a.clone()));
    }
}
