//! Random times on finite filtered probability spaces.
//!
//! The exact engine works in rational arithmetic: a [`FilteredSpace`] is a
//! finite tree of weighted atoms with a refining chain of partitions, and a
//! [`RandomTime`] is a per-leaf mixture of atoms and step densities. On top of
//! that the crate computes Azéma supermartingales and dual projections,
//! splits times into thin and thick parts, builds progressive and initial
//! enlargements, evaluates semimartingale drifts and checks honesty and
//! immersion. The [`simulators`] module reproduces continuous-time examples by
//! Monte Carlo in floating point.

pub mod bundle;
pub mod corpus;
pub mod decompose;
pub mod enlargement;
pub mod error;
pub mod exhaust;
pub mod honest;
pub mod models;
pub mod path;
pub mod projections;
pub mod random_time;
pub mod rational;
pub mod simulators;
pub mod space;
pub mod verify;

pub use bundle::{associated_processes, TimeProcessBundle};
pub use error::{Error, ParseError, Result};
pub use path::{Knot, PathFlags, PiecewisePath};
pub use projections::{dual_project, project, project_path, Projection, RawIncreasingProcess};
pub use random_time::{LeafLaw, Piece, RandomTime};
pub use rational::{Rational, TimePoint};
pub use space::{
    condition, is_stopping_time, FilteredSpace, Partition, RandomVariable, StoppingCheck,
    StoppingTime,
};
