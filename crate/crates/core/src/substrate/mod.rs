pub mod boids;
pub mod lenia;
pub mod lifelike_ca;
pub mod nca;
pub mod particle_life;

use alloc::vec;

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::rollout::{rollout, RolloutSpec, Substrate, Trajectory};
use crate::theta::{SubstrateKind, Theta};

pub use boids::{Boids, BoidsConfig};
pub use lenia::{Lenia, LeniaConfig};
pub use lifelike_ca::{CaConfig, CaRule, LifelikeCa};
pub use nca::{Nca, NcaConfig};
pub use particle_life::{ParticleLife, ParticleLifeConfig};

/// Substrate constants as they appear in run configuration files.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SubstrateConfig {
    LifelikeCa(CaConfig),
    Lenia(LeniaConfig),
    Boids(BoidsConfig),
    ParticleLife(ParticleLifeConfig),
    Nca(NcaConfig),
}

impl SubstrateConfig {
    pub fn kind(&self) -> SubstrateKind {
        match self {
            SubstrateConfig::LifelikeCa(_) => SubstrateKind::LifelikeCa,
            SubstrateConfig::Lenia(_) => SubstrateKind::Lenia,
            SubstrateConfig::Boids(_) => SubstrateKind::Boids,
            SubstrateConfig::ParticleLife(_) => SubstrateKind::ParticleLife,
            SubstrateConfig::Nca(_) => SubstrateKind::Nca,
        }
    }

    pub fn render_size(&self) -> usize {
        match self {
            SubstrateConfig::LifelikeCa(c) => c.render_size,
            SubstrateConfig::Lenia(c) => c.render_size,
            SubstrateConfig::Boids(c) => c.render_size,
            SubstrateConfig::ParticleLife(c) => c.render_size,
            SubstrateConfig::Nca(c) => c.render_size,
        }
    }

    /// Constants used in the published experiments for each substrate.
    pub fn paper_default(kind: SubstrateKind) -> Self {
        match kind {
            SubstrateKind::LifelikeCa => SubstrateConfig::LifelikeCa(CaConfig::default()),
            SubstrateKind::Lenia => SubstrateConfig::Lenia(LeniaConfig::default()),
            SubstrateKind::Boids => SubstrateConfig::Boids(BoidsConfig::default()),
            SubstrateKind::ParticleLife => {
                SubstrateConfig::ParticleLife(ParticleLifeConfig::default())
            }
            SubstrateKind::Nca => SubstrateConfig::Nca(NcaConfig::default()),
        }
    }

    /// Shrunken constants that run on a single core in seconds.
    pub fn desk_default(kind: SubstrateKind) -> Self {
        match kind {
            SubstrateKind::LifelikeCa => SubstrateConfig::LifelikeCa(CaConfig {
                width: 32,
                height: 32,
                render_size: 32,
                ..CaConfig::default()
            }),
            SubstrateKind::Lenia => SubstrateConfig::Lenia(LeniaConfig {
                grid: 32,
                max_radius: 13.0,
                render_size: 32,
            }),
            SubstrateKind::Boids => SubstrateConfig::Boids(BoidsConfig {
                boids: 64,
                neighbors: 8,
                encoder_width: 16,
                head_width: 16,
                speed: 0.004,
                boid_size: 0.04,
                render_size: 64,
                ..BoidsConfig::default()
            }),
            SubstrateKind::ParticleLife => SubstrateConfig::ParticleLife(ParticleLifeConfig {
                particles: 500,
                particle_radius: 1.0,
                render_size: 64,
                ..ParticleLifeConfig::default()
            }),
            SubstrateKind::Nca => SubstrateConfig::Nca(NcaConfig {
                grid: 32,
                channels: 8,
                hidden: 16,
                min_radius: 2,
                max_radius: 8,
                render_size: 32,
                ..NcaConfig::default()
            }),
        }
    }
}

/// Any of the five substrates behind one type.
#[derive(Debug, Clone, PartialEq)]
pub enum AnySubstrate {
    LifelikeCa(LifelikeCa),
    Lenia(Lenia),
    Boids(Boids),
    ParticleLife(ParticleLife),
    Nca(Nca),
}

impl AnySubstrate {
    pub fn from_config(config: &SubstrateConfig) -> Result<Self> {
        Ok(match config {
            SubstrateConfig::LifelikeCa(c) => AnySubstrate::LifelikeCa(LifelikeCa::new(c.clone())?),
            SubstrateConfig::Lenia(c) => AnySubstrate::Lenia(Lenia::new(c.clone())?),
            SubstrateConfig::Boids(c) => AnySubstrate::Boids(Boids::new(c.clone())?),
            SubstrateConfig::ParticleLife(c) => {
                AnySubstrate::ParticleLife(ParticleLife::new(c.clone())?)
            }
            SubstrateConfig::Nca(c) => AnySubstrate::Nca(Nca::new(c.clone())?),
        })
    }

    pub fn kind(&self) -> SubstrateKind {
        match self {
            AnySubstrate::LifelikeCa(s) => s.kind(),
            AnySubstrate::Lenia(s) => s.kind(),
            AnySubstrate::Boids(s) => s.kind(),
            AnySubstrate::ParticleLife(s) => s.kind(),
            AnySubstrate::Nca(s) => s.kind(),
        }
    }

    pub fn genome_dim(&self) -> usize {
        match self {
            AnySubstrate::LifelikeCa(s) => s.genome_dim(),
            AnySubstrate::Lenia(s) => s.genome_dim(),
            AnySubstrate::Boids(s) => s.genome_dim(),
            AnySubstrate::ParticleLife(s) => s.genome_dim(),
            AnySubstrate::Nca(s) => s.genome_dim(),
        }
    }

    pub fn rollout(&self, theta: &Theta, spec: &RolloutSpec) -> Result<Trajectory> {
        match self {
            AnySubstrate::LifelikeCa(s) => rollout(s, theta, spec),
            AnySubstrate::Lenia(s) => rollout(s, theta, spec),
            AnySubstrate::Boids(s) => rollout(s, theta, spec),
            AnySubstrate::ParticleLife(s) => rollout(s, theta, spec),
            AnySubstrate::Nca(s) => rollout(s, theta, spec),
        }
    }

    /// Default search centre: the shipped fixture for Lenia, the empty rule
    /// for the CA, all zeros otherwise.
    pub fn default_theta(&self) -> Theta {
        match self {
            AnySubstrate::LifelikeCa(_) => LifelikeCa::theta(CaRule::from_masks(0, 0)),
            AnySubstrate::Lenia(_) => Lenia::default_genome(),
            _ => Theta::real(self.kind(), vec![0.0; self.genome_dim()]),
        }
    }
}
