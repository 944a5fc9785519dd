//! Fusion of classifier-ensemble and cluster-ensemble label matrices over an
//! unlabeled target set into refined per-object class posteriors, by
//! variational EM in a coupled logistic-normal latent model — together with
//! deterministic simulators for three privacy-preserving distributed
//! execution topologies, desk-scale benchmark generators, and a CLI-facing
//! io layer.
//!
//! Numeric kernels are generic over the scalar type via [`scalar::Real`]
//! (f32 or f64); concrete f64 aliases live at the crate root. All
//! multi-term reductions are order-invariant (see [`exact`]), which is what
//! makes distributed runs reproduce centralized results bit-for-bit.

pub mod baselines;
pub mod elbo;
pub mod inference;
pub mod error;
pub mod exact;
pub mod math;
pub mod numopt;
pub mod sampler;
pub mod scalar;
#[doc(hidden)]
pub mod testutil;
pub mod types;

pub use error::{Error, Result};
pub use scalar::Real;

/// Default working precision for the CLI and the distributed simulators.
pub type Scalar = f64;
pub type ModelParamsF64 = types::ModelParams<f64>;
pub type VariationalStateF64 = types::VariationalState<f64>;
pub type PosteriorResultF64 = types::PosteriorResult<f64>;
pub type LatentTruthF64 = types::LatentTruth<f64>;
