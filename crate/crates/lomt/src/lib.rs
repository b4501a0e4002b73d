//! Filesystem formats, the iterative pipeline runner and the `lomt` command
//! line for [`lomt_core`].

pub mod bundle;
pub mod error;
pub mod io;
pub mod mining;
pub mod pipeline;

pub use error::{Error, Result};
