pub mod alloc;
pub mod cli;
pub mod config;
pub mod crm;
pub mod error;
pub mod levy;
pub mod numerics;
pub mod schema;
pub mod harness;
pub mod sp;
pub mod species;

pub use config::{EvalConfig, MomentRoute};
pub use error::{Error, Result};
pub use levy::{CustomIntensity, LevyIntensity, LevyKind, LevySpec};
