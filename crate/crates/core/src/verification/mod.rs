//! Numerical experiments with machine-readable verdicts.
//!
//! Every check is deterministic given its seed and quadrature spec, and
//! records the thresholds it was judged against.

mod bounds;
mod convergence;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quadrature::Estimate;
use crate::space::SpaceParams;

pub use bounds::{
    admissible_weight_grid, check_averaged_weight_bound, check_averaged_weight_bound_with,
    check_commutation_identity, check_finiteness_smooth, check_maximal_bound,
    check_sobolev_inequality, check_star_convolution_bound, averaged_weight_product,
    CommutationReport, FinitenessEntry, FinitenessReport, MaximalTarget, StarTarget,
};
pub use convergence::{
    run_clipping_convergence, run_density_experiment, run_mollification_convergence,
    run_truncation_convergence, DensityReport, DensityStep,
};

/// Identifiers of the checks, as accepted by the command line.
pub const STATEMENT_IDS: [&str; 12] = [
    "finiteness",
    "truncation",
    "averaged-pair-weight",
    "averaged-point-weight",
    "maximal",
    "star-pair",
    "star-point",
    "clipping",
    "commutation",
    "mollification",
    "density",
    "sobolev-inequality",
];

/// Pass thresholds; copied into every report.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Thresholds {
    /// An estimate is unstable when `stderr >= stderr_fraction * value`.
    pub stderr_fraction: f64,
    /// Required `errors[last] / errors[first]` for a decreasing ladder.
    pub final_over_initial: f64,
    /// Slack, in combined standard errors, allowed between ladder neighbors.
    pub monotone_sigmas: f64,
    /// Fraction of trials, at the end, in which the running max must settle.
    pub stabilization_window: f64,
    /// Relative growth of the max tolerated inside the window.
    pub new_max_slack: f64,
    /// Relative spread tolerated across a parameter ladder.
    pub variation: f64,
}

impl Default for Thresholds {
    fn default() -> Self {
        Self {
            stderr_fraction: 0.25,
            final_over_initial: 0.1,
            monotone_sigmas: 2.0,
            stabilization_window: 0.5,
            new_max_slack: 0.05,
            variation: 0.25,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum BoundVerdict {
    BoundedStable,
    Unstable,
}

/// Input at which a bound report's maximum was attained.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Witness {
    pub label: String,
    pub point: Vec<f64>,
}

/// One measured quantity inside a bound report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundEntry {
    pub label: String,
    pub value: f64,
    pub stderr: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundReport {
    pub statement_id: String,
    pub measured_constant: f64,
    pub measured_stderr: f64,
    pub witness: Witness,
    pub trials: u64,
    pub verdict: BoundVerdict,
    /// Absent when the check runs on a kernel with `s p >= n`.
    pub params: Option<SpaceParams<f64>>,
    pub seed: u64,
    pub entries: Vec<BoundEntry>,
    pub thresholds: Thresholds,
    pub notes: Vec<String>,
}

impl BoundReport {
    pub fn passed(&self) -> bool {
        self.verdict == BoundVerdict::BoundedStable
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Knob {
    #[serde(rename = "j")]
    J,
    #[serde(rename = "epsilon")]
    Epsilon,
    #[serde(rename = "M")]
    M,
}

impl Knob {
    pub fn name(self) -> &'static str {
        match self {
            Knob::J => "j",
            Knob::Epsilon => "epsilon",
            Knob::M => "M",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ConvergenceVerdict {
    Decreasing,
    NonMonotone,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceReport {
    pub statement_id: String,
    pub field_id: String,
    pub knob: Knob,
    pub ladder: Vec<f64>,
    pub errors: Vec<Estimate<f64>>,
    pub verdict: ConvergenceVerdict,
    /// `errors[last] / errors[first]`, 0 when both vanish.
    pub final_over_initial: f64,
    pub params: Option<SpaceParams<f64>>,
    pub thresholds: Thresholds,
}

impl ConvergenceReport {
    pub fn passed(&self) -> bool {
        self.verdict == ConvergenceVerdict::Decreasing
    }
}

pub(crate) fn check_ladder(ladder: &[f64]) -> Result<()> {
    if ladder.is_empty() {
        return Err(Error::InvalidSpec("ladder is empty".into()));
    }
    if ladder.iter().any(|v| !(v.is_finite() && *v > 0.0)) {
        return Err(Error::InvalidSpec(format!(
            "ladder values must be positive and finite: {ladder:?}"
        )));
    }
    let up = ladder.windows(2).all(|w| w[1] > w[0]);
    let down = ladder.windows(2).all(|w| w[1] < w[0]);
    if !(up || down) {
        return Err(Error::InvalidSpec(format!(
            "ladder must be strictly monotone: {ladder:?}"
        )));
    }
    Ok(())
}

/// Decreasing iff every step is non-increasing within the combined
/// standard errors and the last error is at most the required fraction of
/// the first. A single-entry ladder is vacuously decreasing.
pub(crate) fn convergence_verdict(errors: &[Estimate<f64>], th: &Thresholds) -> (ConvergenceVerdict, f64) {
    let first = errors.first().map_or(0.0, |e| e.value);
    let last = errors.last().map_or(0.0, |e| e.value);
    let ratio = if first == 0.0 && last == 0.0 {
        0.0
    } else if first == 0.0 {
        f64::INFINITY
    } else {
        last / first
    };
    if errors.len() <= 1 {
        return (ConvergenceVerdict::Decreasing, ratio);
    }
    let monotone = errors.windows(2).all(|w| {
        let slack = th.monotone_sigmas * w[0].stderr.hypot(w[1].stderr);
        w[1].value <= w[0].value + slack
    });
    let finite = errors.iter().all(|e| e.value.is_finite());
    let verdict = if monotone && finite && ratio <= th.final_over_initial {
        ConvergenceVerdict::Decreasing
    } else {
        ConvergenceVerdict::NonMonotone
    };
    (verdict, ratio)
}

/// `a / b` with a first-order standard error.
pub(crate) fn ratio_with_error(a: f64, sa: f64, b: f64, sb: f64) -> (f64, f64) {
    let r = a / b;
    (r, (sa / b).hypot(a * sb / (b * b)))
}
