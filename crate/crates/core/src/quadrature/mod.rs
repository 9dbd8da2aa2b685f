//! Singular-integral quadrature: chunked Monte Carlo with radial importance
//! sampling in any dimension, and a deterministic tensor oracle for `n = 1`.

pub mod grid;
mod mc;
mod oracle;
mod sampling;
mod tails;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::scalar::Real;

pub use mc::{
    ball_average, estimate_pair_integral_singular, estimate_weighted_integral_rn, BallHint,
    PairIntegrand, PointIntegrand,
};
pub use oracle::{tensor_oracle_1d, OracleIntegrand, ORACLE_GRADING_RATIO, ORACLE_SMALLEST_CELL};
pub use sampling::{RadialLaw, RadialMixture};
pub use tails::{pair_tail_bound, point_tail_bound};

/// Number of independent chunks every Monte Carlo budget is split into.
pub const CHUNKS: usize = 64;
/// Relative standard error above which an estimate is flagged unstable.
pub const UNSTABLE_RATIO: f64 = 0.25;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    MonteCarlo,
    TensorOracle1D,
}

/// Estimator choice, budget and importance-sampling knobs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuadratureSpec {
    pub method: Method,
    /// Monte Carlo draws (each draw is an antithetic pair of evaluations).
    pub samples: u64,
    pub grid_points: usize,
    pub seed: u64,
    /// Truncation radius; defaults to support + 10, or 50 for unbounded support.
    pub outer_radius: Option<f64>,
    /// Pareto index of the far-field sampler; defaults to `s p`.
    pub tail_exponent: Option<f64>,
    /// Radial index of the near-diagonal sampler; defaults to `p (1 - s)`.
    pub near_exponent: Option<f64>,
    /// Forces the radius of the inner sampling component, so that integrands
    /// of different reach share one sampler (common random numbers).
    pub core_radius: Option<f64>,
}

impl Default for QuadratureSpec {
    fn default() -> Self {
        Self {
            method: Method::MonteCarlo,
            samples: 100_000,
            grid_points: 1024,
            seed: 0x5eed,
            outer_radius: None,
            tail_exponent: None,
            near_exponent: None,
            core_radius: None,
        }
    }
}

impl QuadratureSpec {
    pub fn monte_carlo(samples: u64, seed: u64) -> Self {
        Self {
            samples,
            seed,
            ..Self::default()
        }
    }

    pub fn oracle(grid_points: usize) -> Self {
        Self {
            method: Method::TensorOracle1D,
            grid_points,
            ..Self::default()
        }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn with_core_radius(mut self, r: f64) -> Self {
        self.core_radius = Some(r);
        self
    }

    /// Checks budgets and that the sampling exponents give normalizable
    /// densities.
    pub fn validate(&self) -> Result<()> {
        match self.method {
            Method::MonteCarlo if self.samples < 1000 => {
                return Err(Error::InvalidSpec(format!(
                    "Monte Carlo needs at least 1000 samples, got {}",
                    self.samples
                )))
            }
            Method::TensorOracle1D if self.grid_points < 64 => {
                return Err(Error::InvalidSpec(format!(
                    "oracle needs at least 64 grid points, got {}",
                    self.grid_points
                )))
            }
            _ => {}
        }
        let positive = |name: &str, v: Option<f64>| match v {
            Some(x) if !(x > 0.0 && x.is_finite()) => Err(Error::NonNormalizableDensity(format!(
                "{name} = {x} must be positive and finite"
            ))),
            _ => Ok(()),
        };
        positive("tail_exponent", self.tail_exponent)?;
        positive("near_exponent", self.near_exponent)?;
        positive("outer_radius", self.outer_radius)?;
        positive("core_radius", self.core_radius)?;
        Ok(())
    }

    /// Draws per chunk; the budget is rounded up to a multiple of the chunk
    /// count.
    pub fn draws_per_chunk(&self) -> u64 {
        self.samples.div_ceil(CHUNKS as u64).max(1)
    }

    /// Short hex digest of every field, recorded in each estimate.
    pub fn digest(&self) -> String {
        let text = format!(
            "{:?}|{}|{}|{}|{:?}|{:?}|{:?}|{:?}",
            self.method,
            self.samples,
            self.grid_points,
            self.seed,
            self.outer_radius.map(f64::to_bits),
            self.tail_exponent.map(f64::to_bits),
            self.near_exponent.map(f64::to_bits),
            self.core_radius.map(f64::to_bits),
        );
        let h = Sha256::digest(text.as_bytes());
        hex::encode(&h[..8])
    }
}

/// A numerical integral with its error bar and provenance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Estimate<T = f64> {
    pub value: T,
    /// Monte Carlo standard error, or the oracle's refinement difference.
    pub stderr: T,
    pub samples_used: u64,
    pub spec_digest: String,
    /// Analytic bound on the mass beyond the truncation radius.
    pub tail_truncation_bound: Option<T>,
    /// `stderr > 25%` of the value after the full budget.
    pub unstable: bool,
    /// The first-order error propagation used for this value is invalid.
    pub unreliable: bool,
}

impl<T: Real> Estimate<T> {
    pub fn exact_zero(spec: &QuadratureSpec) -> Self {
        Self {
            value: T::zero(),
            stderr: T::zero(),
            samples_used: 0,
            spec_digest: spec.digest(),
            tail_truncation_bound: Some(T::zero()),
            unstable: false,
            unreliable: false,
        }
    }

    pub(crate) fn from_parts(value: T, stderr: T, samples_used: u64, spec: &QuadratureSpec) -> Self {
        Self {
            value,
            stderr,
            samples_used,
            spec_digest: spec.digest(),
            tail_truncation_bound: None,
            unstable: is_unstable(value, stderr),
            unreliable: false,
        }
    }

    pub fn relative_error(&self) -> T {
        if self.value == T::zero() {
            if self.stderr == T::zero() {
                T::zero()
            } else {
                T::infinity()
            }
        } else {
            self.stderr / self.value.abs()
        }
    }

    /// `value^(1/p)` with the error bar carried by the delta method. The
    /// result is flagged unreliable when `stderr > value / 2`.
    pub fn root(&self, p: T) -> Self {
        let v = self.value.max(T::zero());
        let inv = T::one() / p;
        let value = v.powf(inv);
        let stderr = if self.stderr == T::zero() {
            T::zero()
        } else if v == T::zero() {
            self.stderr.powf(inv)
        } else {
            self.stderr * inv * v.powf(inv - T::one())
        };
        Self {
            value,
            stderr,
            samples_used: self.samples_used,
            spec_digest: self.spec_digest.clone(),
            tail_truncation_bound: self.tail_truncation_bound.map(|t| t.max(T::zero()).powf(inv)),
            unstable: self.unstable,
            unreliable: self.unreliable || self.stderr > self.value.abs() * T::half(),
        }
    }

    pub fn to_f64(&self) -> Estimate<f64> {
        Estimate {
            value: self.value.as_f64(),
            stderr: self.stderr.as_f64(),
            samples_used: self.samples_used,
            spec_digest: self.spec_digest.clone(),
            tail_truncation_bound: self.tail_truncation_bound.map(Real::as_f64),
            unstable: self.unstable,
            unreliable: self.unreliable,
        }
    }
}

pub(crate) fn is_unstable<T: Real>(value: T, stderr: T) -> bool {
    if stderr == T::zero() {
        return false;
    }
    !(stderr <= T::lit(UNSTABLE_RATIO) * value.abs())
}
