pub mod abstraction;
pub mod config;
pub mod deadline;
pub mod error;
pub mod game;
pub mod lti;
pub mod mpg;
pub mod policy;
pub mod rational;
pub mod simulation;
pub mod synthesis;

pub use error::{Error, Result};
