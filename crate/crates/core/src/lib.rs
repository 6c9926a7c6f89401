//! Cautious spike-and-slab variable selection for linear regression.

pub mod covariance;
pub mod data;
pub mod decision;
pub mod error;
pub mod exact;
pub mod gibbs;
pub mod linalg;
pub mod model;
pub mod numeric;
pub mod odds;
pub mod orthogonal;
pub mod pipeline;
pub mod plotdata;
pub mod rng;

pub use error::{Error, Result};
pub use model::{AlphaBox, Dataset, Hyperparameters, SpikeSlabDensityParams};
pub use odds::{classify, OddsInterval, Status};
