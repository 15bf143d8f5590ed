//! Extreme value laws and hitting time statistics for one-dimensional maps.
//!
//! The crate simulates orbits of the full tent map, the doubling map, circle
//! rotations and the Manneville-Pomeau map, builds observables that peak at a
//! chosen centre, and compares the laws of their block maxima with the laws of
//! hitting times to shrinking balls and cylinders.

pub mod conditions;
pub mod cylinder;
pub mod digits;
pub mod error;
pub mod evl;
pub mod hitting;
pub mod measure;
pub mod observable;
pub mod rng;
pub mod stats;
pub mod system;
pub mod target;

pub use error::{Error, Result};
