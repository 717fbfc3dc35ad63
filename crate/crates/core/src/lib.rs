#![no_std]

extern crate alloc;
#[cfg(test)]
extern crate std;

mod correspondence;
mod error;
pub mod evaluation;
pub mod geometry;
pub mod noise;
pub mod pipeline;
pub mod refinement;
pub mod robust_init;
pub mod sim;

pub use correspondence::Correspondence;
pub use error::{Error, Result};
