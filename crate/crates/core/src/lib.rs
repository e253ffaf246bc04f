//! Finite-scale tooling for zero-exponent measures of projective skew products:
//! f̄ metrics, Bernoulli-coded measures, suspensions, repeat-and-tail cascades,
//! contracting iterated function systems on the projective line and SL(2,ℝ)
//! cocycle estimators.

pub mod cascade;
pub mod circle;
pub mod cocycle;
pub mod error;
pub mod fbar;
pub mod lab;
pub mod rng;
pub mod substitution;
pub mod suspension;
pub mod symdyn;

pub use error::{Error, Result};
pub use rng::RngStream;
pub use symdyn::{Alphabet, BernoulliVector, CylinderSpec, Word};
