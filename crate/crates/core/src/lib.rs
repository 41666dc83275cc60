//! Conditional f-information generalization bounds computed from
//! supersample loss data.
//!
//! The crate is organised bottom-up: finite distributions, closed-form
//! divergences, variational lower bounds, the supersample data model with
//! its plug-in statistics, and finally the bound formulas.

pub mod bounds;
pub mod channels;
pub mod distributions;
pub mod divergences;
pub mod error;
pub mod sampling;
pub mod serde_ext;
pub mod statistics;
pub mod supersample;
pub mod variational;
pub mod verify;

pub use distributions::{DiscreteDistribution, JointLossMaskDistribution, Quantizer};
pub use divergences::{conjugate_inverse, divergence, f_information, tv_dual_check, ConjugatePair, DivergenceKind};
pub use error::{Error, Result};
