//! Near-optimal sparse sensor placement and full-field reconstruction from
//! snapshot data.
//!
//! The pipeline: load or generate a snapshot matrix ([`snapshots`]), reduce
//! it to a handful of spatial modes ([`pod`]), pick sensor locations by
//! column-pivoted QR under region and spacing constraints ([`placement`]),
//! then estimate full fields from the sparse, possibly noisy readings and
//! score the result ([`reconstruct`]).
//!
//! All randomized operations take explicit seeds and are reproducible bit
//! for bit; see [`seed`] for how child streams are derived.

pub mod error;
pub mod placement;
pub mod pod;
pub mod reconstruct;
pub mod seed;
pub mod snapshots;

pub use error::{Error, Result};
