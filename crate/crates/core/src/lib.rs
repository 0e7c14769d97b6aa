//! Coded caching over two-hop relay networks.
//!
//! A server holding `N` files reaches `K` cache-equipped users through `H`
//! relays. This crate builds cache placements, computes relay-aware
//! multicast deliveries with exact rational link loads, and checks that
//! every user can decode its request.

pub mod analysis;
pub mod delivery;
pub mod error;
pub mod placement;
pub mod rational;
pub mod topology;
pub mod userset;
pub mod verifier;

pub use error::{Error, Result};
pub use rational::Q;
