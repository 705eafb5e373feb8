pub mod controller;
pub mod discretization;
pub mod driver;
pub mod error;
pub mod fac;
pub mod integrator;
pub mod jfnk;
pub mod mesh;
pub mod regrid;
pub mod stepper;

pub use error::{Error, Result};
