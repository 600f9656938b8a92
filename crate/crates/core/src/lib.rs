//! Exact and certified computation of recurrence behavior for ℤ-valued
//! cocycles over irrational rotations and interval exchange transformations.
//!
//! The crate is organized bottom-up:
//!
//! - [`contfrac`]: continued fractions, convergents and certified signs of
//!   numbers `u + vα`.
//! - [`cocycle`]: exact rotation orbits, step cocycles and their ergodic sums.
//! - [`recurrence`]: weight functions ω, the ζ series and the balls-and-bins
//!   statistics used to establish ω-recurrence.
//! - [`staircase`]: the three-letter substitution system coding the infinite
//!   staircase, level histograms and the construction of rotation numbers for
//!   which the ζ series stays bounded.
//! - [`iet`]: periodic-type interval exchanges built from Rauzy loops.

pub mod cocycle;
pub mod contfrac;
pub mod error;
pub mod experiments;
pub mod export;
pub mod iet;
pub mod recurrence;
pub mod staircase;

pub use cocycle::{CirclePoint, StepCocycle, SumTrace};
pub use contfrac::{ContinuedFraction, Convergent};
pub use error::{Error, Result};
pub use iet::{Iet, RauzyLoop};
pub use recurrence::{OmegaWeight, RecurrenceConfig};
pub use staircase::{Letter, LevelHistogram, StaircaseParams, Word};

/// Crate version embedded in report headers.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
