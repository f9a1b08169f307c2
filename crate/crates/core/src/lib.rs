#![no_std]
extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod channel;
pub mod config;
pub mod error;
pub mod exec;
pub mod geometry;
pub mod irs;
pub mod math;
pub mod metrics;
pub mod numerics;
pub mod rng;
pub mod scenario;
pub mod wmmse;

pub use error::{Error, Result};
pub use numerics::{CMat, C64};
