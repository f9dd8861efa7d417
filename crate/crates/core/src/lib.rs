pub mod error;
pub mod eval;
pub mod estimation;
pub mod instance;
pub mod models;
pub mod oracle;
pub mod rod;
pub mod scenario;
pub mod solver;
pub mod uncertainty;

pub use error::{Error, Result};
