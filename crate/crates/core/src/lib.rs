//! Automatic augmentation-policy search for dialogue text.
//!
//! The crate is organised around the search loop: a [`controller`] samples a
//! [`policy::Policy`], the policy perturbs the training corpus through the
//! operations in [`ops`], a target model from [`harness`] trains on the
//! perturbed data, and the validation score from [`reward`] is fed back to the
//! controller as a REINFORCE reward.

pub mod controller;
pub mod corpus;
mod error;
pub mod harness;
pub mod ops;
pub mod policy;
pub mod reward;
mod util;

pub use error::{Error, Result};
pub use util::write_atomic;
