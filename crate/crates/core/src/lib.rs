//! Learnable Gabor filterbank frontend with PCEN, hand-derived reverse-mode
//! gradients, a desk-scale training harness and Jensen-Shannon based
//! measurement of how far learned filters move from their initialization.

pub mod audio_io;
pub mod cli_reports;
pub mod diffengine;
pub mod error;
pub mod exec;
pub mod filterbank;
pub mod frontend;
pub mod initializers;
pub mod sensitivity;
pub mod task_harness;

pub use error::{LeafError, Result};
