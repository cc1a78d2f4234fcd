//! Bayesian fusion of heterogeneous explosion-yield evidence.
//!
//! Four observation channels (seismic magnitude, crater geometry, SAR damage
//! proxies and vision-language damage labels) are tied to a single yield
//! through physical forward models and combined under learned trust weights.
//!
//! The densities are generic over [`Real`], so they can be evaluated in `f32`,
//! `f64` or with forward-mode [`Dual`] numbers for exact gradients.

pub mod data;
pub mod diagnostics;
pub mod dual;
pub mod error;
pub mod likelihood;
pub mod physics;
pub mod posterior;
pub mod priors;
pub mod sampler;
pub mod sarprep;
pub mod scalar;
pub mod stats;
pub mod synth;
pub mod transform;
pub mod validation;

pub use data::{CraterObs, Dataset, Modality, SarBox, SeismicObs, VlmRecord, N_BINS};
pub use dual::Dual;
pub use error::{Error, Result};
pub use physics::{MagnitudeLink, YieldKt};
pub use posterior::{FusionMethod, JointDensity};
pub use priors::{ParamVector, PriorConfig};
pub use sampler::{run_nuts, Fit, LogDensity, NutsConfig};
pub use scalar::Real;

/// Default scalar for values and summaries.
pub type Scalar = f64;
/// Single-precision lane.
pub type Scalar32 = f32;
/// Dual number carrying a full-model gradient (eight scalars and three simplex coordinates).
pub type Grad11 = Dual<11>;
