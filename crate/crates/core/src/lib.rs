//! Fit and evaluate bijective alignment maps between two embedding spaces.
//!
//! * [`linear`]: least-squares regression, CCA (with its `W_X W_Y^-1`
//!   transform), SVCCA, PWCCA and the four closed-form similarity indices.
//! * [`inn`]: an invertible network of affine coupling layers, trained with
//!   hand-written gradients to minimise the L2 distance to the target space.
//! * [`evaluation`] and [`analysis`]: distances, per-pair reports, and the
//!   collection-level pipelines behind the `repalign` CLI.

pub mod error;
pub mod analysis;
pub mod cli;
pub mod embedding;
pub mod evaluation;
pub mod inn;
pub mod linear;
pub mod numerics;
pub mod synth;
pub mod rng;

pub use error::{Error, Result};
