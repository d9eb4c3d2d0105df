use alloc::vec::Vec;
use core::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SubstrateKind {
    LifelikeCa,
    Lenia,
    Boids,
    ParticleLife,
    Nca,
}

impl SubstrateKind {
    pub fn name(self) -> &'static str {
        match self {
            SubstrateKind::LifelikeCa => "lifelike_ca",
            SubstrateKind::Lenia => "lenia",
            SubstrateKind::Boids => "boids",
            SubstrateKind::ParticleLife => "particle_life",
            SubstrateKind::Nca => "nca",
        }
    }
}

impl fmt::Display for SubstrateKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Genome {
    Real(Vec<f64>),
    /// Bit genome, bit `i` of `packed` is gene `i`.
    Bits { packed: u64, len: u32 },
}

/// A genome together with the substrate it parameterizes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Theta {
    pub substrate: SubstrateKind,
    pub genome: Genome,
}

impl Theta {
    pub fn real(substrate: SubstrateKind, values: Vec<f64>) -> Self {
        Theta { substrate, genome: Genome::Real(values) }
    }

    pub fn bits(substrate: SubstrateKind, packed: u64, len: u32) -> Self {
        Theta { substrate, genome: Genome::Bits { packed, len } }
    }

    pub fn dim(&self) -> usize {
        match &self.genome {
            Genome::Real(v) => v.len(),
            Genome::Bits { len, .. } => *len as usize,
        }
    }

    /// Real values; empty for bit genomes.
    pub fn values(&self) -> &[f64] {
        match &self.genome {
            Genome::Real(v) => v,
            Genome::Bits { .. } => &[],
        }
    }

    pub fn values_mut(&mut self) -> Option<&mut Vec<f64>> {
        match &mut self.genome {
            Genome::Real(v) => Some(v),
            Genome::Bits { .. } => None,
        }
    }

    /// Checks the substrate tag, the length and finiteness.
    pub fn validate(&self, substrate: SubstrateKind, dim: usize) -> Result<()> {
        if self.substrate != substrate {
            return Err(Error::WrongSubstrate { expected: substrate, found: self.substrate });
        }
        if self.dim() != dim {
            return Err(Error::GenomeLength { expected: dim, found: self.dim() });
        }
        match &self.genome {
            Genome::Real(v) => {
                if let Some(index) = v.iter().position(|x| !x.is_finite()) {
                    return Err(Error::NonFiniteGenome { index });
                }
            }
            Genome::Bits { packed, len } => {
                if *len < 64 && *packed >> len != 0 {
                    return Err(Error::InvalidArgument("bit genome has bits above its length"));
                }
            }
        }
        Ok(())
    }

    /// FNV-1a fingerprint of the substrate tag and genome bits.
    pub fn fingerprint(&self) -> u64 {
        let mut h = Fnv::new();
        h.write(self.substrate.name().as_bytes());
        match &self.genome {
            Genome::Real(v) => {
                for x in v {
                    h.write(&x.to_bits().to_le_bytes());
                }
            }
            Genome::Bits { packed, len } => {
                h.write(&packed.to_le_bytes());
                h.write(&len.to_le_bytes());
            }
        }
        h.finish()
    }
}

pub(crate) struct Fnv(u64);

impl Fnv {
    pub(crate) fn new() -> Self {
        Fnv(0xcbf2_9ce4_8422_2325)
    }

    pub(crate) fn write(&mut self, bytes: &[u8]) {
        for b in bytes {
            self.0 ^= u64::from(*b);
            self.0 = self.0.wrapping_mul(0x0000_0100_0000_01b3);
        }
    }

    pub(crate) fn finish(&self) -> u64 {
        self.0
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    #[test]
    fn validate_checks_everything() {
        let t = Theta::real(SubstrateKind::Boids, vec![0.0, 1.0]);
        assert!(t.validate(SubstrateKind::Boids, 2).is_ok());
        assert!(matches!(t.validate(SubstrateKind::Lenia, 2), Err(Error::WrongSubstrate { .. })));
        assert!(matches!(t.validate(SubstrateKind::Boids, 3), Err(Error::GenomeLength { .. })));
        let bad = Theta::real(SubstrateKind::Boids, vec![0.0, f64::NAN]);
        assert_eq!(bad.validate(SubstrateKind::Boids, 2), Err(Error::NonFiniteGenome { index: 1 }));
        let bits = Theta::bits(SubstrateKind::LifelikeCa, 1 << 18, 18);
        assert!(bits.validate(SubstrateKind::LifelikeCa, 18).is_err());
    }

    #[test]
    fn fingerprint_distinguishes() {
        let a = Theta::real(SubstrateKind::Boids, vec![0.0, 1.0]);
        let b = Theta::real(SubstrateKind::Boids, vec![1.0, 0.0]);
        assert_ne!(a.fingerprint(), b.fingerprint());
        assert_eq!(a.fingerprint(), a.clone().fingerprint());
    }
}
