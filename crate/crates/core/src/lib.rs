//! Minimum-error discrimination of binary coherent states.
//!
//! The crate models receivers that split a coherent signal into channels,
//! displace each channel conditioned on the outcomes seen so far, and count
//! photons. It provides:
//!
//! - [`coherent`]: Poisson statistics, state overlap and the closed-form
//!   Helstrom, Kennedy and homodyne error rates.
//! - [`single_channel`]: the one-channel displacement receiver with on-off
//!   and photon-number-resolving detection.
//! - [`feedforward`]: the multichannel receiver with Bayesian feed-forward,
//!   exact outcome-tree evaluation and schedule optimization.
//! - [`montecarlo`]: seeded, shard-invariant simulation of the same receiver.
//! - [`optimizer`]: the derivative-free minimizers the above rely on.
//!
//! The crate is `no_std` and only needs `alloc`.
#![no_std]
#![forbid(unsafe_code)]
// Negated comparisons deliberately reject NaN along with out-of-range values.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

extern crate alloc;

pub mod coherent;
mod error;
pub mod feedforward;
pub mod montecarlo;
pub mod optimizer;
pub mod single_channel;
mod sum;

pub use coherent::{
    displace, helstrom_bound, homodyne_error, kennedy_error, ln_poisson_pmf, log_overlap, overlap,
    poisson_pmf, poisson_truncation, Amplitude, BinaryEnsemble, DetectorKind, DetectorModel,
    Hypothesis,
};
pub use error::{Error, Result};
pub use feedforward::{
    bayes_update, beta_schedule_asymptotic, exact_error, optimize_plan, parity_decision, run_chain,
    ChannelPlan, FeedForwardState,
};
pub use montecarlo::{sample_outcome, simulate, ErrorReport, Method, SimConfig};
pub use single_channel::{
    build_displaced, discrimination_threshold, error_map_pnr, error_onoff, optimize_beta,
    DisplacedPair, Strategy, ThresholdRule,
};
pub use sum::NeumaierSum;
