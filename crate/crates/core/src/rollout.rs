//! The init/step/render composition shared by all substrates.

use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::frame::Frame;
use crate::rng::{make_rng, Rng, STREAM_INIT};
use crate::theta::{SubstrateKind, Theta};

/// Marker returned by substrate step functions when the new state contains
/// a non-finite value. [`rollout`] turns it into [`Error::Diverged`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct NonFiniteState;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RolloutSpec {
    pub total_steps: usize,
    pub capture_steps: Vec<usize>,
    pub seed: u64,
}

impl RolloutSpec {
    pub fn new(total_steps: usize, capture_steps: Vec<usize>, seed: u64) -> Result<Self> {
        let spec = RolloutSpec { total_steps, capture_steps, seed };
        spec.validate()?;
        Ok(spec)
    }

    /// Capture only the final state.
    pub fn final_only(total_steps: usize, seed: u64) -> Self {
        RolloutSpec { total_steps, capture_steps: alloc::vec![total_steps], seed }
    }

    /// Capture every step from 0 to `total_steps` inclusive.
    pub fn every_step(total_steps: usize, seed: u64) -> Self {
        RolloutSpec { total_steps, capture_steps: (0..=total_steps).collect(), seed }
    }

    /// `count` captures spread evenly over `[0, total_steps]`, both ends included.
    pub fn subsampled(total_steps: usize, count: usize, seed: u64) -> Result<Self> {
        if count == 0 {
            return Err(Error::InvalidRolloutSpec("capture count must be positive"));
        }
        let captures = if count == 1 {
            alloc::vec![total_steps]
        } else {
            (0..count).map(|k| k * total_steps / (count - 1)).collect()
        };
        Self::new(total_steps, captures, seed)
    }

    pub fn validate(&self) -> Result<()> {
        if self.capture_steps.is_empty() {
            return Err(Error::InvalidRolloutSpec("no capture steps"));
        }
        if self.capture_steps.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidRolloutSpec("capture steps must be strictly increasing"));
        }
        if *self.capture_steps.last().unwrap() > self.total_steps {
            return Err(Error::InvalidRolloutSpec("capture step beyond total steps"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub frames: Vec<Frame>,
    /// [`Theta::fingerprint`] of the genome that produced the frames.
    pub theta_ref: u64,
}

impl Trajectory {
    pub fn final_frame(&self) -> &Frame {
        self.frames.last().expect("trajectory has at least one frame")
    }
}

/// One parameterized family of simulations.
///
/// `decode` turns a genome into whatever the step function needs, once per
/// rollout. `init` receives a generator already bound to the rollout seed.
pub trait Substrate {
    type Params;
    type State;

    fn kind(&self) -> SubstrateKind;
    fn genome_dim(&self) -> usize;
    fn decode(&self, theta: &Theta) -> Result<Self::Params>;
    fn init(&self, params: &Self::Params, rng: &mut Rng) -> Self::State;
    fn step(&self, params: &Self::Params, state: &Self::State)
        -> Result<Self::State, NonFiniteState>;
    fn render(&self, params: &Self::Params, state: &Self::State) -> Frame;
}

/// Sample `s0 ~ Init(seed)`, apply `Step` `total_steps` times and render at
/// every capture step.
pub fn rollout<S: Substrate + ?Sized>(
    substrate: &S,
    theta: &Theta,
    spec: &RolloutSpec,
) -> Result<Trajectory> {
    spec.validate()?;
    let params = substrate.decode(theta)?;
    let mut rng = make_rng(spec.seed, STREAM_INIT);
    let mut state = substrate.init(&params, &mut rng);
    let mut frames = Vec::with_capacity(spec.capture_steps.len());
    let mut next = 0;
    let last = *spec.capture_steps.last().unwrap();
    for t in 0..=last {
        if spec.capture_steps[next] == t {
            let mut frame = substrate.render(&params, &state);
            frame.step_index = t;
            frames.push(frame);
            next += 1;
        }
        if t == last {
            break;
        }
        state = substrate
            .step(&params, &state)
            .map_err(|NonFiniteState| Error::Diverged { step: t + 1 })?;
    }
    Ok(Trajectory { frames, theta_ref: theta.fingerprint() })
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    #[test]
    fn spec_validation() {
        assert!(RolloutSpec::new(10, vec![0, 5, 10], 0).is_ok());
        assert!(RolloutSpec::new(10, vec![0, 5, 5], 0).is_err());
        assert!(RolloutSpec::new(10, vec![0, 11], 0).is_err());
        assert!(RolloutSpec::new(10, vec![], 0).is_err());
    }

    #[test]
    fn subsampled_includes_ends() {
        let s = RolloutSpec::subsampled(2048, 32, 0).unwrap();
        assert_eq!(s.capture_steps.len(), 32);
        assert_eq!(s.capture_steps[0], 0);
        assert_eq!(*s.capture_steps.last().unwrap(), 2048);
        let s = RolloutSpec::subsampled(128, 32, 0).unwrap();
        assert_eq!(s.capture_steps.len(), 32);
        assert!(RolloutSpec::subsampled(10, 32, 0).is_err());
    }
}
