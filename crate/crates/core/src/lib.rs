#![no_std]
//! Graph model predictive control of the pivoting gait.

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod dynamics;
pub mod error;
pub mod gait;
pub mod geom;
pub mod model;
pub mod mpc;
pub mod qp;
pub mod sim;

pub use error::{Error, Result};
