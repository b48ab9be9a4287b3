//! Exact smooth min- and max-entropies of finite product distributions,
//! together with numerical verification of the concentration, tightness and
//! operational bounds that relate them to Shannon entropy.
//!
//! The central object is the [`Spectrum`]: the distribution of the
//! conditional surprisal −log2 P_{X|Y}(x, y), aggregated by level. Spectra
//! convolve under independent products, which makes n-fold quantities exact
//! at sizes far beyond explicit enumeration.

// `!(x >= 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod binom;
pub mod bounds;
pub mod checks;
pub mod dist;
pub mod error;
pub mod mc;
pub mod numeric;
pub mod operational;
pub mod smoothing;
pub mod spectrum;
pub mod tightness;

pub use bounds::{BoundName, BoundReport, MgfMode};
pub use checks::{CheckRow, CheckSummary};
pub use dist::{conditional_entropy, validate_joint, Alphabet, FactorSequence, JointDistribution};
pub use error::{Error, Result};
pub use mc::{McConfig, McEstimate};
pub use operational::{CodecSpec, ExtractorSeed, PropReport};
pub use smoothing::{
    brute_force_smooth, hmax_smooth_unconditional, hmax_threshold_upper, hmin_smooth, EntropyKind,
    SmoothEntropyResult, Witness,
};
pub use spectrum::{LevelEntry, Side, Spectrum, SpectrumConfig, TailMass};
pub use tightness::{family, TightnessFamily};
