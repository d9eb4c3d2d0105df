#![cfg_attr(not(test), no_std)]
extern crate alloc;

pub mod atlas;
pub mod embedding;
pub mod error;
pub mod eval;
pub mod fft;
pub mod frame;
pub mod objectives;
pub mod quantify;
pub mod rng;
pub mod rollout;
pub mod search;
pub mod substrate;
pub mod theta;

pub use embedding::{similarity, Embedder, EmbedderDescriptor, EmbeddingVector, PixelEmbedder};
pub use error::{Error, Result};
pub use frame::Frame;
pub use rollout::{rollout, RolloutSpec, Substrate, Trajectory};
pub use substrate::{AnySubstrate, SubstrateConfig};
pub use theta::{Genome, SubstrateKind, Theta};
