//! Clinical note generation from doctor-patient conversations by
//! extraction, clustering and abstraction.

pub mod abstractor;
pub mod asr_sim;
pub mod cluster;
pub mod config;
pub mod corpus;
pub mod error;
pub mod extract;
pub mod metrics;
pub mod pipeline;
pub mod text;

pub use error::{Error, ErrorCategory, Result};
