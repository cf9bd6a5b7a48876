//! Remote sample generation and function estimation over rate-constrained
//! links, for finite alphabets.
//!
//! An encoder holds a target distribution; decoders hold priors correlated
//! through a known joint. Using shared randomness, the encoder steers each
//! decoder to samples from (approximately) the target by transmitting only
//! proposal indices. When the joint prior has a block structure, a common
//! block index can be broadcast once to all decoders and refined per decoder
//! over unicast links, which is where the savings live.
//!
//! Modules:
//! - [`dist`]: finite distributions and the divergence toolkit (nats).
//! - [`randomness`]: the bit-exact shared proposal streams.
//! - [`common_info`]: block decomposition of a joint prior.
//! - [`mrc`]: single-stage minimal random coding.
//! - [`hier`]: two-stage block + refinement sampling.
//! - [`protocol`]: two-decoder broadcast/unicast orchestration and the cost
//!   ledger.
//! - [`bounds`]: closed-form bias/TV/complexity guarantees on finite
//!   alphabets.
//! - [`oracles`]: brute-force ground truth for tiny instances.
//! - [`scenario`]: scenario/report file formats and validation.

pub mod bounds;
pub mod common_info;
pub mod dist;
pub mod error;
pub mod hier;
pub mod mrc;
pub mod oracles;
pub mod protocol;
pub mod randomness;
pub mod scenario;

pub use error::{Error, Result};
