//! Seminorms and norms as compositions of fields and quadrature.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::{lift_difference_quotient, Decay, PairField, ScalarField};
use crate::quadrature::{
    estimate_pair_integral_singular, estimate_weighted_integral_rn, pair_tail_bound,
    point_tail_bound, tensor_oracle_1d, Estimate, Method, OracleIntegrand, PairIntegrand,
    PointIntegrand, QuadratureSpec,
};
use crate::scalar::{pow_abs, Real};
use crate::space::{GeneralWeightParams, Kernel, SpaceParams};

const DEFAULT_OUTER: f64 = 50.0;

/// The seminorm, the critical weighted Lebesgue norm and their sum.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NormReport<T = f64> {
    pub seminorm: Estimate<T>,
    pub lpstar: Estimate<T>,
    pub full: T,
    /// `seminorm.stderr + lpstar.stderr`.
    pub full_stderr: T,
    pub params: SpaceParams<T>,
    pub field_id: String,
}

fn outer_radius(spec: &QuadratureSpec, reach: f64) -> f64 {
    spec.outer_radius.unwrap_or(if reach.is_finite() {
        reach + 10.0
    } else {
        DEFAULT_OUTER
    })
}

/// `int int |v|^p |x|^(-alpha) |y|^(-beta) dx dy`, without the root.
pub fn pair_lp_integral<T: Real>(v: &PairField<T>, kernel: &Kernel<T>, spec: &QuadratureSpec) -> Result<Estimate<T>> {
    let p = kernel.p();
    let meta = v.meta();
    let n = kernel.n();
    let (alpha, beta) = (kernel.alpha().as_f64(), kernel.beta().as_f64());
    let pf = p.as_f64();
    let sigma = kernel.default_tail_exponent().as_f64();
    let source = meta.source.clone();
    let tail = move |r: f64| {
        let s = source.as_ref()?;
        let decay = s.decay.to_f64();
        let sig = pf * s.lift_exponent.as_f64() - n as f64;
        pair_tail_bound(
            n,
            decay,
            s.support_radius.as_f64(),
            s.lipschitz_bound.map(Real::as_f64),
            pf,
            sig,
            alpha,
            beta,
            r,
        )
    };
    let reach = meta.reach.as_f64();
    let origin = meta.origin_exponent.map_or(0.0, |g| g.as_f64() * pf);
    match spec.method {
        Method::MonteCarlo => {
            let g = |x: &[T], y: &[T]| pow_abs(v.eval(x, y), p);
            let integrand = PairIntegrand {
                f: &g,
                reach,
                effective_radius: meta.effective_radius.as_f64(),
                origin_exponent: origin,
                tail_bound: Some(&tail),
            };
            estimate_pair_integral_singular(&integrand, kernel, spec)
        }
        Method::TensorOracle1D => {
            let g = |x: f64, y: f64| pow_abs(v.eval(&[T::lit(x)], &[T::lit(y)]), p).as_f64();
            let (half, tb) = if reach.is_finite() {
                (reach, Some(0.0))
            } else {
                let eff = meta.effective_radius.as_f64();
                let gaussian = matches!(
                    meta.source.as_ref().map(|s| s.decay),
                    Some(Decay::Gaussian { .. })
                );
                if gaussian {
                    (eff, tail(eff))
                } else {
                    let r = outer_radius(spec, reach);
                    (r, tail(r))
                }
            };
            let integrand = OracleIntegrand::Pair {
                g: &g,
                alpha,
                beta,
                half_width: half,
                breakpoints: meta.kink_points.iter().map(|k| k.as_f64()).collect(),
                far_exponent: sigma,
                singular_origin: meta.origin_exponent.is_some(),
                tail_bound: tb,
            };
            let e = tensor_oracle_1d(n, &integrand, spec)?;
            Ok(cast_estimate(&e))
        }
    }
}

fn cast_estimate<T: Real>(e: &Estimate<f64>) -> Estimate<T> {
    Estimate {
        value: T::lit(e.value),
        stderr: T::lit(e.stderr),
        samples_used: e.samples_used,
        spec_digest: e.spec_digest.clone(),
        tail_truncation_bound: e.tail_truncation_bound.map(T::lit),
        unstable: e.unstable,
        unreliable: e.unreliable,
    }
}

/// `||v||_{L^p_{a,a}(R^(2n))}`.
pub fn norm_lpaa_2n<T: Real>(v: &PairField<T>, params: &SpaceParams<T>, spec: &QuadratureSpec) -> Result<Estimate<T>> {
    norm_lpaa_kernel(v, &params.kernel(), spec)
}

/// `||v||` in `L^p` of `R^(2n)` with the measure of `kernel`.
pub fn norm_lpaa_kernel<T: Real>(v: &PairField<T>, kernel: &Kernel<T>, spec: &QuadratureSpec) -> Result<Estimate<T>> {
    Ok(pair_lp_integral(v, kernel, spec)?.root(kernel.p()))
}

/// The weighted Gagliardo seminorm, computed as the `L^p_{a,a}` norm of the
/// difference-quotient lift; both routes therefore share every sample.
pub fn seminorm_wspa<T: Real>(u: &ScalarField<T>, params: &SpaceParams<T>, spec: &QuadratureSpec) -> Result<Estimate<T>> {
    seminorm_with_kernel(u, &params.kernel(), spec)
}

/// The seminorm for any kernel satisfying the two-weight condition; this
/// covers `s p >= n`, where the critical exponent is undefined.
pub fn seminorm_with_kernel<T: Real>(u: &ScalarField<T>, kernel: &Kernel<T>, spec: &QuadratureSpec) -> Result<Estimate<T>> {
    norm_lpaa_kernel(&lift_difference_quotient(u, kernel), kernel, spec)
}

/// The raw two-weight energy (no `1/p` root).
pub fn seminorm_general<T: Real>(
    u: &ScalarField<T>,
    params: &SpaceParams<T>,
    gw: &GeneralWeightParams<T>,
    spec: &QuadratureSpec,
) -> Result<Estimate<T>> {
    let kernel = Kernel::general(params, gw);
    pair_lp_integral(&lift_difference_quotient(u, &kernel), &kernel, spec)
}

/// `int_{R^n} |u|^q |x|^(-c) dx`, without the root.
pub fn point_lq_integral<T: Real>(u: &ScalarField<T>, n: usize, q: T, c: T, spec: &QuadratureSpec) -> Result<Estimate<T>> {
    let meta = u.meta();
    let (qf, cf) = (q.as_f64(), c.as_f64());
    let support = meta.support_radius.as_f64();
    let decay = meta.decay.to_f64();
    let tail = move |r: f64| point_tail_bound(n, decay, support, qf, cf, r);
    let origin = meta.singular_exponent.map_or(0.0, |g| g.as_f64() * qf);
    match spec.method {
        Method::MonteCarlo => {
            let f = |x: &[T]| pow_abs(u.eval(x), q);
            let tail_exponent = match decay {
                Decay::Power { gamma, .. } => (gamma * qf + cf - n as f64).max(0.25),
                _ => 1.0,
            };
            let integrand = PointIntegrand {
                n,
                f: &f,
                reach: support,
                effective_radius: meta.effective_radius().as_f64(),
                origin_exponent: origin,
                tail_exponent,
                tail_bound: Some(&tail),
            };
            estimate_weighted_integral_rn(&integrand, cf, spec)
        }
        Method::TensorOracle1D => {
            let f = |x: f64| pow_abs(u.eval(&[T::lit(x)]), q).as_f64();
            let (half, tb) = if support.is_finite() {
                (support, Some(0.0))
            } else if matches!(decay, Decay::Gaussian { .. }) {
                let eff = meta.effective_radius().as_f64();
                (eff, tail(eff))
            } else {
                let r = outer_radius(spec, support);
                (r, tail(r))
            };
            let mut breaks = Vec::new();
            for k in &meta.kink_radii {
                breaks.push(-k.as_f64());
                breaks.push(k.as_f64());
            }
            let integrand = OracleIntegrand::Point {
                f: &f,
                c: cf,
                half_width: half,
                breakpoints: breaks,
                tail_bound: tb,
            };
            Ok(cast_estimate(&tensor_oracle_1d(n, &integrand, spec)?))
        }
    }
}

/// `( int |u|^(p*) |x|^(-b) dx )^(1/p*)`.
pub fn norm_lpstar_a<T: Real>(u: &ScalarField<T>, params: &SpaceParams<T>, spec: &QuadratureSpec) -> Result<Estimate<T>> {
    let q = params.p_star();
    Ok(point_lq_integral(u, params.n(), q, params.b(), spec)?.root(q))
}

/// Seminorm plus critical norm.
pub fn norm_full<T: Real>(u: &ScalarField<T>, params: &SpaceParams<T>, spec: &QuadratureSpec) -> Result<NormReport<T>> {
    let seminorm = seminorm_wspa(u, params, spec)?;
    let lpstar = norm_lpstar_a(u, params, spec)?;
    if seminorm.value < T::zero() || lpstar.value < T::zero() {
        return Err(Error::QuadratureFailure("negative norm estimate".into()));
    }
    Ok(NormReport {
        full: seminorm.value + lpstar.value,
        full_stderr: seminorm.stderr + lpstar.stderr,
        seminorm,
        lpstar,
        params: *params,
        field_id: u.id().to_string(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::{clip_to_level, make_field, FieldSpec};
    use approx::assert_relative_eq;

    fn field(s: &str) -> ScalarField<f64> {
        make_field(&FieldSpec::parse(s).unwrap(), None).unwrap()
    }

    fn k1(a: f64) -> Kernel<f64> {
        Kernel::new(1, 0.5, 2.0, a, a).unwrap()
    }

    #[test]
    fn zero_field_everywhere_zero() {
        let sp = SpaceParams::new(2, 0.5, 2.0, 0.3).unwrap();
        let spec = QuadratureSpec::monte_carlo(1000, 1);
        let r = norm_full(&ScalarField::zero(), &sp, &spec).unwrap();
        assert_eq!((r.full, r.full_stderr), (0.0, 0.0));
        let v = PairField::<f64>::zero();
        assert_eq!(norm_lpaa_2n(&v, &sp, &spec).unwrap().value, 0.0);
        let c = ScalarField::constant(2.5);
        let e = seminorm_wspa(&c, &sp, &spec).unwrap();
        assert_eq!((e.value, e.stderr), (0.0, 0.0));
    }

    #[test]
    fn hat_seminorm_matches_closed_form() {
        let hat = field("hat_1d");
        let exact = (8.0 * 2f64.ln()).sqrt();
        let o = seminorm_with_kernel(&hat, &k1(0.0), &QuadratureSpec::oracle(512)).unwrap();
        assert_relative_eq!(o.value, exact, max_relative = 1e-4);
        let mc = seminorm_with_kernel(&hat, &k1(0.0), &QuadratureSpec::monte_carlo(200_000, 3)).unwrap();
        assert!((mc.value - exact).abs() < 4.0 * mc.stderr, "{mc:?}");
    }

    #[test]
    fn homogeneity_is_exact_with_common_random_numbers() {
        let sp = SpaceParams::new(1, 0.3, 2.0, 0.1).unwrap();
        let spec = QuadratureSpec::monte_carlo(20_000, 9);
        let u = field("gaussian");
        let a = seminorm_wspa(&u, &sp, &spec).unwrap();
        let b = seminorm_wspa(&u.scaled(-2.0), &sp, &spec).unwrap();
        assert_relative_eq!(b.value, 2.0 * a.value, max_relative = 1e-12);
        let la = norm_lpstar_a(&u, &sp, &spec).unwrap();
        let lb = norm_lpstar_a(&u.scaled(2.0), &sp, &spec).unwrap();
        assert_relative_eq!(lb.value, 2.0 * la.value, max_relative = 1e-12);
    }

    #[test]
    fn inactive_clip_is_identity() {
        let sp = SpaceParams::new(1, 0.3, 2.0, 0.0).unwrap();
        let spec = QuadratureSpec::monte_carlo(5_000, 2);
        let v = lift_difference_quotient(&field("hat_1d"), &sp.kernel());
        let sup = v.sup_bound().unwrap();
        let c = clip_to_level(&v, sup).unwrap();
        assert_eq!(norm_lpaa_2n(&v, &sp, &spec).unwrap(), norm_lpaa_2n(&c, &sp, &spec).unwrap());
    }

    #[test]
    fn general_seminorm_reproduces_symmetric_case() {
        let sp = SpaceParams::new(1, 0.3, 2.0, 0.1).unwrap();
        let gw = GeneralWeightParams::new(&sp, 0.1, 0.1).unwrap();
        let spec = QuadratureSpec::monte_carlo(10_000, 4);
        let u = field("smooth_bump(1)");
        let raw = seminorm_general(&u, &sp, &gw, &spec).unwrap();
        let root = seminorm_wspa(&u, &sp, &spec).unwrap();
        assert_relative_eq!(raw.value.sqrt(), root.value, max_relative = 1e-12);
    }

    #[test]
    fn lpstar_of_bump_against_oracle() {
        let sp = SpaceParams::new(1, 0.3, 2.0, 0.0).unwrap();
        let u = field("smooth_bump(1)");
        let o = norm_lpstar_a(&u, &sp, &QuadratureSpec::oracle(256)).unwrap();
        let m = norm_lpstar_a(&u, &sp, &QuadratureSpec::monte_carlo(100_000, 8)).unwrap();
        assert!((o.value - m.value).abs() < 3.0 * (o.stderr + m.stderr), "{o:?} {m:?}");
    }
}
