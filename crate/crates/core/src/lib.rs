pub mod config;
pub mod dispersive;
pub mod error;
pub mod fcs;
pub mod lindblad;
pub mod metrics;
pub mod model;
pub mod observables;
pub mod ode;
pub mod output;
pub mod protocols;
pub mod reproduce;
pub mod system;

pub use error::{Error, Result};
