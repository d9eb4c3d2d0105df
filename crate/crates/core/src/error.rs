use alloc::string::String;
use core::fmt;

use crate::theta::SubstrateKind;

/// Errors produced by rollouts, embedders, objectives and optimizers.
#[derive(Debug, Clone, PartialEq)]
pub enum Error {
    /// A state value became non-finite. `step` is the index of the step that produced it.
    Diverged { step: usize },
    GenomeLength { expected: usize, found: usize },
    NonFiniteGenome { index: usize },
    WrongSubstrate { expected: SubstrateKind, found: SubstrateKind },
    InvalidRolloutSpec(&'static str),
    RuleParse { position: usize, reason: &'static str },
    DimMismatch { left: usize, right: usize },
    EmptyPrompt,
    CapabilityMissing { backend: String, capability: &'static str },
    BackendUnavailable(String),
    MissingCapture { step: usize },
    TooFewEmbeddings { needed: usize, found: usize },
    NonFiniteFitness { index: usize },
    LengthMismatch { expected: usize, found: usize },
    MissingFrame { genome: usize },
    InvalidArgument(&'static str),
    DivergenceBudget { diverged: usize, attempts: usize },
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::Diverged { step } => write!(f, "simulation diverged at step {step}"),
            Error::GenomeLength { expected, found } => {
                write!(f, "genome has {found} values, substrate expects {expected}")
            }
            Error::NonFiniteGenome { index } => write!(f, "genome value {index} is not finite"),
            Error::WrongSubstrate { expected, found } => {
                write!(f, "genome is for {found:?}, expected {expected:?}")
            }
            Error::InvalidRolloutSpec(why) => write!(f, "invalid rollout spec: {why}"),
            Error::RuleParse { position, reason } => {
                write!(f, "rule notation error at position {position}: {reason}")
            }
            Error::DimMismatch { left, right } => {
                write!(f, "dimension mismatch: {left} vs {right}")
            }
            Error::EmptyPrompt => f.write_str("prompt is empty"),
            Error::CapabilityMissing { backend, capability } => {
                write!(f, "embedder {backend} does not support {capability}")
            }
            Error::BackendUnavailable(why) => write!(f, "embedding backend unavailable: {why}"),
            Error::MissingCapture { step } => write!(f, "step {step} was not captured"),
            Error::TooFewEmbeddings { needed, found } => {
                write!(f, "need at least {needed} embeddings, got {found}")
            }
            Error::NonFiniteFitness { index } => write!(f, "fitness {index} is not finite"),
            Error::LengthMismatch { expected, found } => {
                write!(f, "length mismatch: expected {expected}, found {found}")
            }
            Error::MissingFrame { genome } => write!(f, "no frame for genome {genome}"),
            Error::InvalidArgument(why) => write!(f, "invalid argument: {why}"),
            Error::DivergenceBudget { diverged, attempts } => write!(
                f,
                "{diverged} of {attempts} mutants diverged, exceeding the divergence budget"
            ),
        }
    }
}

impl core::error::Error for Error {}

pub type Result<T, E = Error> = core::result::Result<T, E>;
