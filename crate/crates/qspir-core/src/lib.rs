//! Exact finite-field simulator for quantum symmetric private information
//! retrieval over N-sum boxes, with Byzantine, eavesdropping, colluding and
//! unresponsive servers.

#![cfg_attr(not(test), no_std)]

extern crate alloc;

pub mod audit;
pub mod byzantine;
pub mod error;
pub mod field;
pub mod matrices;
pub mod nsum;
pub mod params;
pub mod rates;
pub mod rng;
pub mod scheme;
pub mod sim;
pub mod threat;

pub use error::{Error, Result};
pub use field::{Fq, FqMatrix, FieldError};
