//! Validated continuation and bifurcation certification for
//! parameter-dependent discrete maps, with an age-structured red coral
//! population model as the built-in case study.
//!
//! Numerical kernels are generic over [`Scalar`]: plain floats for
//! simulation, [`Interval`] for rigorous bounds, [`Dual`] numbers for
//! derivatives and [`qd::Quad`] for high-precision reference solves.

pub mod error;
pub mod interval;
pub mod scalar;
pub mod model;
pub mod system;
pub mod cift;
pub mod linalg;
pub mod bifurcation;
pub mod continuation;
pub mod dynamics;
pub mod refine;

pub use error::{BifurcationError, CiftError, ContinuationError, DynamicsError, IntervalError, ModelError};
pub use interval::{IMatrix, IVector, Interval};
pub use model::{Coral, CoralModel, CoralParams, DerivedCoefficients, Preconditioner};
pub use scalar::{Dual, Scalar};

/// Double-double precision scalar (about 31 significant digits).
pub type Quad = qd::Quad;
/// Second-order forward-mode scalar over intervals.
pub type HyperDual<T> = Dual<Dual<T>>;
/// Model evaluated in plain double precision.
pub type CoralF64 = Coral<f64>;
/// Model evaluated in single precision.
pub type CoralF32 = Coral<f32>;
/// Model evaluated with interval enclosures.
pub type CoralInterval = Coral<Interval>;
