//! Minimum-cost manipulation of price benchmarks.
//!
//! A manipulator moves individual prices, paying a fixed cost `k` per touched
//! price plus a convex variable cost `c(shift)`, until a benchmark statistic
//! (mean, median, trimmed mean, weighted mean, ...) reads a target price `P`.
//! This crate computes the cheapest such manipulation in closed form where
//! one exists ([`attack`], [`hetero`]) and by structured brute force on
//! discretized inputs ([`oracle`]) so the two can be cross-checked.
//!
//! The crate is `no_std` and only needs `alloc`.
#![cfg_attr(not(test), no_std)]

extern crate alloc;

pub mod attack;
pub mod bench;
pub mod cost;
pub mod dist;
pub mod error;
pub mod hetero;
pub mod numeric;
pub mod oracle;

pub use error::{Error, Result};
