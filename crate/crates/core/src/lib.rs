//! Exact simulation of grid-state breeding from squeezed cat states.
//!
//! States are finite sums of displaced squeezed vacua, so every quantity used
//! here (overlaps, displacement expectations, homodyne densities, Wigner
//! values) has a closed form. A von Mises model of the same protocol and the
//! probability bounds that go with it live in [`mises`].

pub mod breeding;
pub mod error;
pub mod experiments;
pub mod gaussian_state;
pub mod mises;
pub mod numerics;
pub mod pe_map;

pub use error::{Error, Result};
