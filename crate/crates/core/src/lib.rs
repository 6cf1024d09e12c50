//! Composition of joint distributions without disintegration.

pub mod canonical;
pub mod cli;
pub mod discrete;
pub mod error;
pub mod interval;
pub mod joint;
pub mod kernel;
pub mod lang;
pub mod matrix;
pub mod mc;
pub mod measure;
pub mod normal;
pub mod quadrature;
pub mod report;
pub mod sum;

pub use error::{Error, Result};
