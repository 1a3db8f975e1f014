pub mod backend;
pub mod clock;
pub mod dataset;
pub mod error;
pub mod harness;
pub mod metrics;
pub mod orchestrator;
pub mod par;
pub mod trace;
pub mod trigger;
pub mod vocab;

pub use error::{Error, Result};
