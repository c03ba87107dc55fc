//! Constraint-based day planning over simple temporal networks.

pub mod bench;
pub mod datagen;
pub mod model;
pub mod reflect;
pub mod scheduler;
pub mod stn;
pub mod validator;

#[cfg(any(test, feature = "test-oracles"))]
pub mod testing;
