pub mod analytics;
pub mod cli;
pub mod config;
pub mod corpus;
pub mod error;
pub mod eval;
pub mod inference;
pub mod linalg;
pub mod manifest;
pub mod providers;
pub mod retrieval;
pub mod store;
pub mod templates;
pub mod util;
pub mod values;

pub use error::{Error, Result};
