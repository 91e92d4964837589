//! Random-coding analysis of distributed multiple access channels: exponent
//! functionals, error bounds, the threshold decoders they describe, and a
//! Monte Carlo harness that checks one against the other.
//!
//! Users are 0-based throughout the API (user `0` is the receiver's user of
//! interest); printed reports use 1-based labels.

pub mod channel;
pub mod decoder;
pub mod ensemble;
pub mod error;
pub mod exponents;
pub mod format;
pub mod logmath;
pub mod montecarlo;
pub mod optimize;
pub mod scenario;
pub mod space;

pub use channel::{
    binary_entropy, make_compound_bsc, make_dmc, marginalize_out, output_marginal, CodeSpec, Dmc,
    EntropyUnit, MarginalChannel, SystemModel,
};
pub use ensemble::{
    encode, ensemble_log_expectation, message_count, sample_codebook, CodebookRealization,
};
pub use error::{Error, Result};
pub use exponents::{
    detection_bound, exponent_ec, exponent_eid, exponent_emd, gep_bound_d, gep_bound_margin,
    gep_bound_partitioned, BoundReport, ExponentResult, WeightFunction,
};
pub use space::{CodeIndexVector, CodeSpace, Region, RegionPartition, UserSet};
