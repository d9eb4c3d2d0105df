//! Embedder construction from configuration.

use asal_core::{Embedder, PixelEmbedder};

use crate::cache::CachedEmbedder;
use crate::config::EmbedderConfig;
use crate::error::{AppError, Result};
use crate::sidecar::{SidecarAddress, SidecarClient, ENV_VAR};

pub type DynEmbedder = Box<dyn Embedder + Send + Sync>;

pub fn build_embedder(config: &EmbedderConfig) -> Result<DynEmbedder> {
    match config {
        EmbedderConfig::Pixel { side } => Ok(Box::new(PixelEmbedder::new(*side))),
        EmbedderConfig::Sidecar { address, cache } => {
            let address: SidecarAddress = match address {
                Some(a) => a.parse()?,
                None => SidecarClient::address_from_env().ok_or_else(|| {
                    AppError::config(
                        "embedder.address",
                        format!("no sidecar address; set it here or in {ENV_VAR}"),
                    )
                })??,
            };
            let client = SidecarClient::connect(&address)?;
            Ok(if *cache { Box::new(CachedEmbedder::new(client)) } else { Box::new(client) })
        }
    }
}
