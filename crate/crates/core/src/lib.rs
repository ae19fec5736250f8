//! Bit-weight-decomposed PE models, their arithmetic, and an array simulator.
#![no_std]

extern crate alloc;

pub mod analytics;
pub mod arith;
pub mod array;
pub mod encoding;
pub mod matrix;
pub mod pe;
pub mod rng;
pub mod workloads;
