//! Weighted fractional Sobolev spaces on `R^n`, numerically.
//!
//! The crate computes the weighted Gagliardo seminorm
//!
//! `[u] = ( int int |u(x)-u(y)|^p |x-y|^(-n-sp) |x|^(-a) |y|^(-a) dx dy )^(1/p)`
//!
//! and the critical norm `( int |u|^(p*) |x|^(-b) dx )^(1/p*)` with
//! `p* = np/(n-sp)` and `b = 2an/(n-sp)`, builds the cutoff-then-mollify
//! approximations `(tau_j u) * eta_eps`, and checks the weighted averaging,
//! maximal and convolution estimates that make those approximations
//! converge.
//!
//! Numerical routines are generic over [`Real`] (`f32` or `f64`); the
//! `*64` aliases fix double precision.

pub mod error;
pub mod field;
pub mod norms;
pub mod quadrature;
pub mod scalar;
pub mod smoothing;
pub mod space;
pub mod verification;

pub use error::{Error, Result};
pub use field::{
    clip_to_level, cutoff_tau_j, eta_derivative_identity_check, lift_difference_quotient,
    make_field, mollifier_eta, CutoffProfile, Decay, FieldMeta, FieldSpec, MollifierProfile,
    PairField, PairMeta, ScalarField, Smoothness,
};
pub use norms::{
    norm_full, norm_lpaa_2n, norm_lpstar_a, seminorm_general, seminorm_with_kernel, seminorm_wspa,
    NormReport,
};
pub use quadrature::{Estimate, Method, QuadratureSpec};
pub use scalar::Real;
pub use smoothing::{
    convolve, mollify, pipeline_rho, pipeline_rho_with, star_convolve, star_mollify, truncate,
    truncation_remainder, Convolver, SmoothingConfig, SmoothingProfiles,
};
pub use space::{
    inverse_weight_value, weight_value, GeneralWeightParams, Kernel, SpaceParams, WeightKind,
};
pub use verification::{
    BoundReport, BoundVerdict, ConvergenceReport, ConvergenceVerdict, Knob, Thresholds,
    STATEMENT_IDS,
};

pub type SpaceParams64 = SpaceParams<f64>;
pub type SpaceParams32 = SpaceParams<f32>;
pub type Kernel64 = Kernel<f64>;
pub type ScalarField64 = ScalarField<f64>;
pub type ScalarField32 = ScalarField<f32>;
pub type PairField64 = PairField<f64>;
pub type Estimate64 = Estimate<f64>;
pub type Estimate32 = Estimate<f32>;
