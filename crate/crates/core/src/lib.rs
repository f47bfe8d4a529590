//! Simulator for a hierarchical anonymous position-based routing protocol for
//! mobile ad hoc networks, with a GPSR baseline and passive traffic-analysis
//! adversaries.

pub mod adversary;
pub mod cli;
pub mod error;
pub mod geometry;
pub mod gpsr;
pub mod hpar;
pub mod identity;
pub mod simcore;

pub use error::{Error, Result};
