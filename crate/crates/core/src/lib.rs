//! Random-matrix diagnostics for neural network weight spectra.
//!
//! The crate computes the empirical spectral density (ESD) of a layer's
//! weight matrix, fits a Marchenko-Pastur bulk and a power-law tail to it,
//! derives capacity metrics and assigns the layer to one of six
//! self-regularization phases. Seeded synthetic ensembles with known ground
//! truth drive the validation suites.
//!
//! Closed-form kernels (MP law, KS distance, spectrum metrics) are generic
//! over [`Real`]; the aliases below fix them to `f64` or `f32`.

// `!(x > 0.0)` is the NaN-rejecting guard throughout.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod esd;
pub mod linalg;
pub mod metrics;
pub mod mp;
pub mod optim;
pub mod phases;
pub mod plot;
pub mod powerlaw;
pub mod quad;
pub mod report;
pub mod rng;
pub mod scalar;
pub mod synth;
pub mod tensor_io;
pub mod validate;

pub use error::{Error, Result};
pub use esd::{compute_esd, empirical_cdf, histogram};
pub use metrics::LayerMetrics;
pub use mp::{fit_mp, fit_mp_with, ks_distance, MpFit, MpFitOptions};
pub use phases::{classify, Phase, PhaseEvidence, PhaseLabel, Thresholds};
pub use powerlaw::{
    fit_power_law, fit_power_law_with, AlternativeModel, PlFit, PowerLawOptions, UniversalityClass,
};
pub use report::{analyze_matrix, AnalysisOptions, PhaseReport, Report};
pub use scalar::Real;
pub use synth::{generate, SynthKind, SynthSpec, Synthesized};
pub use tensor_io::{load_array, load_manifest, save_array, LayerKind, Manifest, WeightMatrix};

pub type Esd = esd::Spectrum<f64>;
pub type Esd32 = esd::Spectrum<f32>;
pub type Histogram = esd::Histogram<f64>;
pub type Histogram32 = esd::Histogram<f32>;
pub type MpParams = mp::MpParams<f64>;
pub type MpParams32 = mp::MpParams<f32>;
