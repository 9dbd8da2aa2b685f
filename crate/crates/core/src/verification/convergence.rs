//! Error ladders for truncation, mollification and clipping, and the
//! two-stage density search.

use serde::{Deserialize, Serialize};

use super::{check_ladder, convergence_verdict, ConvergenceReport, Knob, Thresholds};
use crate::error::{Error, Result};
use crate::field::{clip_to_level, CutoffProfile, MollifierProfile, PairField, ScalarField};
use crate::norms::{norm_full, norm_lpaa_kernel};
use crate::quadrature::{Estimate, QuadratureSpec};
use crate::smoothing::{mollify, truncate, truncation_remainder, SmoothingConfig};
use crate::space::{Kernel, SpaceParams};

/// Doubling or halving steps allowed per density search.
pub const DENSITY_MAX_STEPS: usize = 12;

fn full_estimate(u: &ScalarField<f64>, params: &SpaceParams<f64>, spec: &QuadratureSpec) -> Result<Estimate<f64>> {
    let r = norm_full(u, params, spec)?;
    let mut e = r.seminorm.clone();
    e.value = r.full;
    e.stderr = r.full_stderr;
    e.samples_used += r.lpstar.samples_used;
    e.unstable = r.seminorm.unstable || r.lpstar.unstable;
    e.unreliable = r.seminorm.unreliable || r.lpstar.unreliable;
    e.tail_truncation_bound = r
        .seminorm
        .tail_truncation_bound
        .zip(r.lpstar.tail_truncation_bound)
        .map(|(a, b)| a + b);
    Ok(e)
}

fn report(
    statement: &str,
    field_id: &str,
    knob: Knob,
    ladder: &[f64],
    errors: Vec<Estimate<f64>>,
    params: Option<SpaceParams<f64>>,
) -> ConvergenceReport {
    let th = Thresholds::default();
    let (verdict, ratio) = convergence_verdict(&errors, &th);
    ConvergenceReport {
        statement_id: statement.into(),
        field_id: field_id.into(),
        knob,
        ladder: ladder.to_vec(),
        errors,
        verdict,
        final_over_initial: ratio,
        params,
        thresholds: th,
    }
}

/// `||u - tau_j u||` along an increasing `j` ladder. Unbounded fields are
/// sampled with core radius `2j` unless the spec fixes one.
pub fn run_truncation_convergence(
    u: &ScalarField<f64>,
    params: &SpaceParams<f64>,
    j_ladder: &[f64],
    spec: &QuadratureSpec,
) -> Result<ConvergenceReport> {
    check_ladder(j_ladder)?;
    let cutoff = CutoffProfile::standard();
    let mut errors = Vec::with_capacity(j_ladder.len());
    for &j in j_ladder {
        let rem = truncation_remainder(u, j, &cutoff)?;
        let s = if u.meta().has_finite_support() || spec.core_radius.is_some() {
            spec.clone()
        } else {
            spec.clone().with_core_radius(2.0 * j)
        };
        errors.push(full_estimate(&rem, params, &s)?);
    }
    Ok(report("truncation", u.id(), Knob::J, j_ladder, errors, Some(*params)))
}

/// `||u - u * eta_eps||` along a decreasing `eps` ladder.
pub fn run_mollification_convergence(
    u: &ScalarField<f64>,
    params: &SpaceParams<f64>,
    profile: &MollifierProfile,
    eps_ladder: &[f64],
    spec: &QuadratureSpec,
) -> Result<ConvergenceReport> {
    check_ladder(eps_ladder)?;
    let prof = profile.for_dimension(params.n())?;
    let cfg = SmoothingConfig::default();
    let mut errors = Vec::with_capacity(eps_ladder.len());
    for &e in eps_ladder {
        let diff = u.sub(&mollify(u, e, &prof, &cfg)?);
        errors.push(full_estimate(&diff, params, spec)?);
    }
    Ok(report("mollification", u.id(), Knob::Epsilon, eps_ladder, errors, Some(*params)))
}

/// `||v - clip(v, M)||` in `L^p` against the kernel weights along an
/// increasing `M` ladder; exactly zero once `M` exceeds a known sup bound.
pub fn run_clipping_convergence(
    v: &PairField<f64>,
    kernel: &Kernel<f64>,
    m_ladder: &[f64],
    spec: &QuadratureSpec,
) -> Result<ConvergenceReport> {
    check_ladder(m_ladder)?;
    let mut errors = Vec::with_capacity(m_ladder.len());
    for &m in m_ladder {
        if v.sup_bound().is_some_and(|s| s <= m) {
            errors.push(Estimate::exact_zero(spec));
            continue;
        }
        let diff = v.sub(&clip_to_level(v, m)?);
        errors.push(norm_lpaa_kernel(&diff, kernel, spec)?);
    }
    Ok(report("clipping", v.id(), Knob::M, m_ladder, errors, None))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DensityStep {
    pub knob: Knob,
    pub value: f64,
    pub error: f64,
    pub stderr: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DensityReport {
    pub field_id: String,
    pub delta: f64,
    pub j: f64,
    pub epsilon: f64,
    pub steps: Vec<DensityStep>,
    /// `||u - (tau_j u) * eta_eps||` at the selected pair.
    pub total_error: Estimate<f64>,
    pub achieved: bool,
    pub params: SpaceParams<f64>,
}

/// Finds `j` (doubling from 1) with `||u - tau_j u|| < delta/2`, then `eps`
/// (halving from 1) with `||tau_j u - (tau_j u) * eta_eps|| < delta/2`, and
/// measures the combined error at the pair.
pub fn run_density_experiment(
    u: &ScalarField<f64>,
    params: &SpaceParams<f64>,
    delta: f64,
    spec: &QuadratureSpec,
) -> Result<DensityReport> {
    if !(delta > 0.0 && delta.is_finite()) {
        return Err(Error::ParameterOutOfRange(format!("delta must be positive, got {delta}")));
    }
    let cutoff = CutoffProfile::standard();
    let mollifier = MollifierProfile::standard(params.n());
    let cfg = SmoothingConfig::default();
    let mut steps = Vec::new();

    let mut j = 1.0;
    let mut found = false;
    for _ in 0..DENSITY_MAX_STEPS {
        let rem = truncation_remainder(u, j, &cutoff)?;
        let s = if u.meta().has_finite_support() || spec.core_radius.is_some() {
            spec.clone()
        } else {
            spec.clone().with_core_radius(2.0 * j)
        };
        let e = full_estimate(&rem, params, &s)?;
        steps.push(DensityStep {
            knob: Knob::J,
            value: j,
            error: e.value,
            stderr: e.stderr,
        });
        if e.value < 0.5 * delta {
            found = true;
            break;
        }
        j *= 2.0;
    }
    if !found {
        return Err(Error::FailureAtBudget(format!(
            "no j up to {} brings the truncation error below {}",
            j,
            0.5 * delta
        )));
    }
    let t = truncate(u, j, &cutoff)?;

    let mut eps = 1.0;
    found = false;
    for _ in 0..DENSITY_MAX_STEPS {
        let diff = t.sub(&mollify(&t, eps, &mollifier, &cfg)?);
        let e = full_estimate(&diff, params, spec)?;
        steps.push(DensityStep {
            knob: Knob::Epsilon,
            value: eps,
            error: e.value,
            stderr: e.stderr,
        });
        if e.value < 0.5 * delta {
            found = true;
            break;
        }
        eps *= 0.5;
    }
    if !found {
        return Err(Error::FailureAtBudget(format!(
            "no eps down to {} brings the mollification error below {}",
            eps,
            0.5 * delta
        )));
    }
    let rho = mollify(&t, eps, &mollifier, &cfg)?;
    let total_error = full_estimate(&u.sub(&rho), params, spec)?;
    Ok(DensityReport {
        field_id: u.id().to_string(),
        delta,
        j,
        epsilon: eps,
        steps,
        achieved: total_error.value < delta,
        total_error,
        params: *params,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::{lift_difference_quotient, make_field, FieldSpec};
    use crate::verification::ConvergenceVerdict;

    fn field(s: &str) -> ScalarField<f64> {
        make_field(&FieldSpec::parse(s).unwrap(), None).unwrap()
    }

    fn sp() -> SpaceParams<f64> {
        SpaceParams::new(1, 0.3, 2.0, 0.1).unwrap()
    }

    #[test]
    fn compact_field_truncation_is_exact_past_its_support() {
        let spec = QuadratureSpec::monte_carlo(4000, 1);
        let r = run_truncation_convergence(&field("smooth_bump(R=1)"), &sp(), &[1.0, 2.0], &spec).unwrap();
        assert!(r.errors.iter().all(|e| e.value == 0.0));
        assert_eq!(r.verdict, ConvergenceVerdict::Decreasing);
        assert!(run_truncation_convergence(&field("gaussian"), &sp(), &[2.0, 1.0, 3.0], &spec).is_err());
    }

    #[test]
    fn gaussian_truncation_decreases() {
        let spec = QuadratureSpec::monte_carlo(20_000, 2);
        let r = run_truncation_convergence(&field("gaussian"), &sp(), &[0.5, 1.0, 2.0], &spec).unwrap();
        assert!(r.passed(), "{r:?}");
    }

    #[test]
    fn clipping_of_bounded_lift_is_exact() {
        let k = Kernel::new(1, 0.3, 2.0, 0.1, 0.1).unwrap();
        let v = lift_difference_quotient(&field("hat_1d"), &k);
        let spec = QuadratureSpec::monte_carlo(4000, 3);
        let r = run_clipping_convergence(&v, &k, &[0.05, 0.2, 0.8, 4.0], &spec).unwrap();
        assert!(r.errors[0].value > 0.0);
        assert!(r.errors.windows(2).all(|w| w[1].value <= w[0].value + 1e-12), "{r:?}");
        assert_eq!(r.errors[3].value, 0.0);
        assert!(r.passed());
    }

    #[test]
    fn density_reaches_a_loose_target() {
        let spec = QuadratureSpec::monte_carlo(8000, 4);
        let r = run_density_experiment(&field("smooth_bump(R=1)"), &sp(), 0.5, &spec).unwrap();
        assert_eq!(r.j, 1.0);
        assert!(r.achieved, "{r:?}");
        assert!(run_density_experiment(&field("gaussian"), &sp(), 0.0, &spec).is_err());
    }
}
