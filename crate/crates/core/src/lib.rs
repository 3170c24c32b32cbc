//! Parallel-tempered MCMC inversion of layered 3-D geological models from
//! gravity, magnetic and magnetotelluric data.

pub mod diagnostics;
pub mod error;
pub mod forward;
pub mod io;
pub mod likelihood;
pub mod model;
pub mod pipeline;
pub mod prior;
pub mod proposal;
pub mod sampler;
pub mod synthetic;
pub mod world;

pub use error::{Error, Result};
