use thiserror::Error;

use crate::rational::{format_rational, Rational};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ParseError {
    #[error("invalid rational literal `{0}` (expected \"p/q\")")]
    Rational(String),
    #[error("invalid json: {0}")]
    Json(String),
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error(transparent)]
    Parse(#[from] ParseError),

    #[error("grid is not strictly increasing from 0 at index {index}")]
    UnsortedGrid { index: usize },
    #[error("partition at index {index} does not refine partition at index {}", index - 1)]
    NonRefiningPartition { index: usize },
    #[error("atom weights sum to {} instead of 1", format_rational(.sum))]
    WeightsNotNormalized { sum: Rational },
    #[error("partition at index {index} is malformed: {reason}")]
    MalformedPartition { index: usize, reason: String },
    #[error("space description: {0}")]
    InvalidSpace(String),
    #[error("grid index {index} out of range (grid has {len} points)")]
    IndexOutOfRange { index: usize, len: usize },

    #[error("random time: {0}")]
    InvalidRandomTime(String),
    #[error("random time is not thin: thick mass {}", format_rational(.thick_mass))]
    NotThin { thick_mass: Rational },
    #[error("stopping times {first} and {second} share graph mass {}", format_rational(.mass))]
    GraphsNotDisjoint {
        first: usize,
        second: usize,
        mass: Rational,
    },
    #[error("exhausting sequence leaves mass {} of {{tau < inf}} uncovered", format_rational(.uncovered))]
    NotCovering { uncovered: Rational },
    #[error("exhausting systems describe different random times")]
    MismatchedTime,
    #[error("{0} is not a stopping time")]
    NotStoppingTime(String),

    #[error("random time has an absolutely continuous part; exact enlargement needs a purely atomic time")]
    HasContinuousPart,
    #[error("{what} is not a martingale (max residual {})", format_rational(.residual))]
    NotMartingale { what: String, residual: Rational },
    #[error("integrand is not predictable on the enlarged filtration: {0}")]
    NotPredictable(String),
    #[error("random time is not honest (violation mass {})", format_rational(.violation_mass))]
    NotHonest { violation_mass: Rational },
    #[error("honest time with a thick part found on a jumping filtration")]
    ThickHonestOnJumpingFiltration,
    #[error("unknown suite `{0}` (expected bundle, decomposition, drift, honest, immersion or all)")]
    UnknownSuite(String),
    #[error("Z^2 vanishes at t = {} on a cell where {{t < tau2}} has positive mass", format_rational(.time))]
    DegenerateDenominator { time: Rational },

    #[error("invalid simulation parameters: {0}")]
    InvalidParams(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
