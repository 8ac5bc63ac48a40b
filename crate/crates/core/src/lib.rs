pub mod bath_sim;
pub mod channel;
pub mod entanglement;
pub mod error;
pub mod irreversibility;
pub mod quantum;
pub mod sum;

pub use error::{Error, Result};
