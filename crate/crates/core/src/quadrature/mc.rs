//! Chunked Monte Carlo estimators.
//!
//! Every estimator splits its budget into [`CHUNKS`] chunks. Chunk `k` draws
//! from `ChaCha8` seeded with the master seed on stream `k`, so results do
//! not depend on how chunks are scheduled; chunk means are folded in order.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::sampling::{RadialLaw, RadialMixture};
use super::{is_unstable, Estimate, QuadratureSpec, CHUNKS};
use crate::error::{Error, Result};
use crate::field::{smallbuf, PointBuf};
use crate::scalar::{inv_pow, norm, unit_ball_volume, Real};
use crate::space::Kernel;

/// Default truncation radius beyond the reach, and for unbounded reach.
const OUTER_MARGIN: f64 = 10.0;
const OUTER_UNBOUNDED: f64 = 50.0;
/// Keeps sampler exponents strictly below the dimension.
const EXPONENT_GUARD: f64 = 1e-3;

fn chunk_rng(seed: u64, chunk: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(chunk as u64);
    rng
}

/// Runs `draw` `draws_per_chunk` times in each chunk and returns
/// `(mean, stderr of the mean, draws used)`.
fn run_chunks<F>(spec: &QuadratureSpec, draw: F) -> (f64, f64, u64)
where
    F: Fn(&mut ChaCha8Rng) -> f64 + Sync,
{
    let per = spec.draws_per_chunk();
    let means: Vec<f64> = (0..CHUNKS)
        .into_par_iter()
        .map(|k| {
            let mut rng = chunk_rng(spec.seed, k);
            let mut acc = 0.0;
            for _ in 0..per {
                acc += draw(&mut rng);
            }
            acc / per as f64
        })
        .collect();
    let m = CHUNKS as f64;
    let mean = means.iter().sum::<f64>() / m;
    let var = means.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (m - 1.0);
    (mean, (var / m).sqrt(), per * CHUNKS as u64)
}

fn finish<T: Real>(mean: f64, se: f64, used: u64, spec: &QuadratureSpec, tail: Option<f64>) -> Result<Estimate<T>> {
    if !mean.is_finite() || !se.is_finite() {
        return Err(Error::QuadratureFailure(format!(
            "non-finite estimate (value {mean}, stderr {se})"
        )));
    }
    let mut e = Estimate::from_parts(T::lit(mean), T::lit(se), used, spec);
    e.tail_truncation_bound = tail.map(T::lit);
    e.unstable = is_unstable(mean, se);
    Ok(e)
}

#[inline]
fn to_buf<T: Real>(src: &[f64]) -> PointBuf<T> {
    let mut b = smallbuf(src.len());
    for (o, &v) in b.iter_mut().zip(src) {
        *o = T::lit(v);
    }
    b
}

/// Integrand on `R^n` with the metadata the sampler needs.
pub struct PointIntegrand<'a, T> {
    pub n: usize,
    pub f: &'a (dyn Fn(&[T]) -> T + Sync),
    /// `f(x) = 0` for `|x| > reach`.
    pub reach: f64,
    /// Inner sampling radius when the reach is unbounded.
    pub effective_radius: f64,
    /// `|f(x)| <~ |x|^(-origin_exponent)` at the origin.
    pub origin_exponent: f64,
    /// Pareto index for the region beyond the inner radius.
    pub tail_exponent: f64,
    /// Truncation radius -> bound on the discarded integral.
    pub tail_bound: Option<&'a (dyn Fn(f64) -> Option<f64> + Sync)>,
}

impl<'a, T> PointIntegrand<'a, T> {
    pub fn new(n: usize, f: &'a (dyn Fn(&[T]) -> T + Sync)) -> Self {
        Self {
            n,
            f,
            reach: f64::INFINITY,
            effective_radius: 1.0,
            origin_exponent: 0.0,
            tail_exponent: 1.0,
            tail_bound: None,
        }
    }
}

fn resolve_radii(spec: &QuadratureSpec, reach: f64, effective: f64) -> (f64, f64) {
    let core = spec
        .core_radius
        .unwrap_or(if reach.is_finite() { reach } else { effective });
    let outer = spec.outer_radius.unwrap_or(if reach.is_finite() {
        reach + OUTER_MARGIN
    } else {
        OUTER_UNBOUNDED
    });
    (core, outer)
}

/// Radial sampler: `|x|^(-c)` on the core ball, and a truncated Pareto
/// shell up to the outer radius when the reach exceeds the core.
fn radial_sampler(n: usize, c: f64, core: f64, outer: f64, reach: f64, tail: f64) -> Result<RadialMixture> {
    let mut mix = RadialMixture::new(n).with(1.0, RadialLaw::new(n, c, 0.0, core)?, None);
    if reach > core && outer > core {
        mix = mix.with(1.0, RadialLaw::new(n, n as f64 + tail, core, outer)?, None);
    }
    Ok(mix)
}

/// `int_{R^n} f(x) |x|^(-c) dx` over the truncation ball.
pub fn estimate_weighted_integral_rn<T: Real>(
    integrand: &PointIntegrand<'_, T>,
    c: f64,
    spec: &QuadratureSpec,
) -> Result<Estimate<T>> {
    spec.validate()?;
    let n = integrand.n;
    let nf = n as f64;
    if !(c >= 0.0 && c < nf) {
        return Err(Error::NonNormalizableDensity(format!(
            "weight exponent {c} outside [0, {n})"
        )));
    }
    if integrand.reach == 0.0 {
        return Ok(Estimate::exact_zero(spec));
    }
    let (core, outer) = resolve_radii(spec, integrand.reach, integrand.effective_radius);
    let cs = (c + integrand.origin_exponent).min(nf - EXPONENT_GUARD);
    let tail = spec.tail_exponent.unwrap_or(integrand.tail_exponent);
    let mix = radial_sampler(n, cs, core, outer, integrand.reach, tail)?;
    let f = integrand.f;
    let (mean, se, used) = run_chunks(spec, |rng| {
        let mut x = smallbuf::<f64>(n);
        mix.sample(rng, &mut x);
        let dens = mix.density(&x);
        let w = inv_pow(norm(&x), c) / dens;
        let a = f(&to_buf::<T>(&x)).as_f64();
        for v in x.iter_mut() {
            *v = -*v;
        }
        let b = f(&to_buf::<T>(&x)).as_f64();
        0.5 * (a + b) * w
    });
    let tail_bound = if integrand.reach <= outer {
        Some(0.0)
    } else {
        integrand.tail_bound.and_then(|g| g(outer))
    };
    finish(mean, se, used, spec, tail_bound)
}

/// Unweighted pair integrand `g(x, y)` with sampler metadata.
pub struct PairIntegrand<'a, T> {
    pub f: &'a (dyn Fn(&[T], &[T]) -> T + Sync),
    /// `g(x, y) = 0` when `min(|x|, |y|) > reach`.
    pub reach: f64,
    pub effective_radius: f64,
    /// Extra singularity of `g` at `x = 0`.
    pub origin_exponent: f64,
    pub tail_bound: Option<&'a (dyn Fn(f64) -> Option<f64> + Sync)>,
}

impl<'a, T> PairIntegrand<'a, T> {
    pub fn new(f: &'a (dyn Fn(&[T], &[T]) -> T + Sync)) -> Self {
        Self {
            f,
            reach: f64::INFINITY,
            effective_radius: 1.0,
            origin_exponent: 0.0,
            tail_bound: None,
        }
    }
}

/// `int int g(x, y) |x|^(-alpha) |y|^(-beta) dx dy` over `R^n x R^n`.
///
/// The integral is folded onto `|x| <= |y|` by symmetry, `x` is drawn from
/// a radial law adapted to the weights, and `z = y - x` from a 50/50 mixture
/// of `|z|^(kappa - n)` on the unit ball and a Pareto tail `|z|^(-n - t)`;
/// every draw is evaluated at `z` and `-z`.
pub fn estimate_pair_integral_singular<T: Real>(
    integrand: &PairIntegrand<'_, T>,
    kernel: &Kernel<T>,
    spec: &QuadratureSpec,
) -> Result<Estimate<T>> {
    spec.validate()?;
    if integrand.reach == 0.0 {
        return Ok(Estimate::exact_zero(spec));
    }
    let n = kernel.n();
    let nf = n as f64;
    let (alpha, beta) = (kernel.alpha().as_f64(), kernel.beta().as_f64());
    let kappa = spec
        .near_exponent
        .unwrap_or(kernel.default_near_exponent().as_f64());
    let tail = spec
        .tail_exponent
        .unwrap_or((kernel.default_tail_exponent().as_f64() + alpha.min(beta).min(0.0)).max(EXPONENT_GUARD));
    let (core, outer) = resolve_radii(spec, integrand.reach, integrand.effective_radius);
    let cx = (alpha.max(beta).max(0.0) + integrand.origin_exponent).min(nf - EXPONENT_GUARD);
    let xs = radial_sampler(n, cx, core, outer, integrand.reach, kernel.default_tail_exponent().as_f64())?;
    let zs = RadialMixture::new(n)
        .with(1.0, RadialLaw::new(n, nf - kappa, 0.0, 1.0)?, None)
        .with(1.0, RadialLaw::new(n, nf + tail, 1.0, f64::INFINITY)?, None);
    let g = integrand.f;
    let (at, bt) = (kernel.alpha(), kernel.beta());
    let (mean, se, used) = run_chunks(spec, |rng| {
        let mut x = smallbuf::<f64>(n);
        let mut z = smallbuf::<f64>(n);
        let mut y = smallbuf::<f64>(n);
        xs.sample(rng, &mut x);
        zs.sample(rng, &mut z);
        let dens = xs.density(&x) * zs.density(&z);
        let rx = norm(&x);
        let xt = to_buf::<T>(&x);
        let mut acc = 0.0;
        for sign in [1.0, -1.0] {
            for i in 0..n {
                y[i] = x[i] + sign * z[i];
            }
            let ry = norm(&y);
            if rx > ry {
                continue;
            }
            let yt = to_buf::<T>(&y);
            let (nx, ny) = (T::lit(rx), T::lit(ry));
            let fwd = g(&xt, &yt) * inv_pow(nx, at) * inv_pow(ny, bt);
            let bwd = g(&yt, &xt) * inv_pow(ny, at) * inv_pow(nx, bt);
            acc += (fwd + bwd).as_f64();
        }
        0.5 * acc / dens
    });
    let tail_bound = if integrand.reach <= outer {
        Some(0.0)
    } else {
        integrand.tail_bound.and_then(|b| b(outer))
    };
    finish(mean, se, used, spec, tail_bound)
}

/// A singular point of a ball-average integrand: `|z - center|^(-exponent)`.
#[derive(Debug, Clone, PartialEq)]
pub struct BallHint {
    pub center: Vec<f64>,
    pub exponent: f64,
}

/// `r^(-n) int_{B_r} f(z) dz`.
///
/// Without hints `z` is uniform on `B_r` and the value is `|B_1|` times the
/// sample mean. Each hint adds a power-law component centered at its
/// singular point, which keeps the variance finite when the singularity
/// falls inside the ball.
pub fn ball_average<T: Real>(
    f: &(dyn Fn(&[T]) -> T + Sync),
    n: usize,
    r: f64,
    hints: &[BallHint],
    spec: &QuadratureSpec,
) -> Result<Estimate<T>> {
    spec.validate()?;
    if !(r > 0.0 && r.is_finite()) {
        return Err(Error::ParameterOutOfRange(format!("ball radius must be positive, got {r}")));
    }
    let nf = n as f64;
    if hints.is_empty() {
        let (mean, se, used) = run_chunks(spec, |rng| {
            let mut z = smallbuf::<f64>(n);
            super::sampling::unit_direction(rng, &mut z);
            let u: f64 = 1.0 - rand::Rng::random::<f64>(rng);
            let rho = r * u.powf(1.0 / nf);
            for v in z.iter_mut() {
                *v *= rho;
            }
            let a = f(&to_buf::<T>(&z)).as_f64();
            for v in z.iter_mut() {
                *v = -*v;
            }
            0.5 * (a + f(&to_buf::<T>(&z)).as_f64())
        });
        let vol = unit_ball_volume::<f64>(n);
        return finish(vol * mean, vol * se, used, spec, Some(0.0));
    }
    let mut mix = RadialMixture::new(n).with(hints.len() as f64, RadialLaw::new(n, 0.0, 0.0, r)?, None);
    for h in hints {
        let reach = r + norm(&h.center);
        let e = h.exponent.clamp(0.0, nf - EXPONENT_GUARD);
        mix = mix.with(1.0, RadialLaw::new(n, e, 0.0, reach)?, Some(h.center.clone()));
    }
    let scale = r.powf(-nf);
    let (mean, se, used) = run_chunks(spec, |rng| {
        let mut z = smallbuf::<f64>(n);
        mix.sample(rng, &mut z);
        if norm(&z) > r {
            return 0.0;
        }
        f(&to_buf::<T>(&z)).as_f64() / mix.density(&z)
    });
    finish(scale * mean, scale * se, used, spec, Some(0.0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn spec(samples: u64) -> QuadratureSpec {
        QuadratureSpec::monte_carlo(samples, 17)
    }

    #[test]
    fn indicator_integrals() {
        let ind = |x: &[f64]| if norm(x) <= 1.0 { 1.0 } else { 0.0 };
        let mut it = PointIntegrand::new(1, &ind);
        it.reach = 1.0;
        let e = estimate_weighted_integral_rn(&it, 0.0, &spec(10_000)).unwrap();
        assert_relative_eq!(e.value, 2.0, max_relative = 1e-12);
        let e = estimate_weighted_integral_rn(&it, 0.5, &spec(10_000)).unwrap();
        assert_relative_eq!(e.value, 4.0, max_relative = 1e-12);
        assert_eq!(e.tail_truncation_bound, Some(0.0));
        let zero = |_: &[f64]| 0.0;
        let e = estimate_weighted_integral_rn(&PointIntegrand::new(2, &zero), 0.3, &spec(1000)).unwrap();
        assert_eq!((e.value, e.stderr), (0.0, 0.0));
        assert!(matches!(
            estimate_weighted_integral_rn(&it, 1.0, &spec(1000)),
            Err(Error::NonNormalizableDensity(_))
        ));
    }

    #[test]
    fn deterministic_and_schedule_independent() {
        let g = |x: &[f64]| (-norm(x).powi(2)).exp();
        let it = PointIntegrand::new(2, &g);
        let a = estimate_weighted_integral_rn(&it, 0.4, &spec(50_000)).unwrap();
        let pool = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
        let b = pool.install(|| estimate_weighted_integral_rn(&it, 0.4, &spec(50_000)).unwrap());
        assert_eq!(a, b);
        // int exp(-r^2) r^-0.4 2 pi r dr = pi Gamma(0.8)
        let exact = std::f64::consts::PI * 1.164_229_713_725_303;
        assert!((a.value - exact).abs() < 4.0 * a.stderr + 1e-12, "{a:?} vs {exact}");
    }

    #[test]
    fn ball_average_examples() {
        let one = |_: &[f64]| 1.0;
        let e = ball_average(&one, 2, 0.37, &[], &spec(1000)).unwrap();
        assert_eq!(e.value, std::f64::consts::PI);
        assert_eq!(e.stderr, 0.0);
        let e = ball_average(&one, 1, 5.0, &[], &spec(1000)).unwrap();
        assert_eq!(e.value, 2.0);
        let sing = |z: &[f64]| norm(z).powf(-0.5);
        let hint = [BallHint { center: vec![0.0], exponent: 0.5 }];
        let e = ball_average(&sing, 1, 1.0, &hint, &spec(20_000)).unwrap();
        assert!((e.value - 4.0).abs() < 4.0 * e.stderr + 1e-12, "{e:?}");
        assert!(e.stderr < 1e-2);
        let e = ball_average(&sing, 1, 1.0, &[], &spec(200_000)).unwrap();
        assert!((e.value - 4.0).abs() < 4.0 * e.stderr);
    }

    #[test]
    fn pair_integral_of_separable_gaussian() {
        // g(x, y) = exp(-x^2 - y^2) |x - y|^(1 + sp) makes the weighted
        // integrand separable: (sqrt(pi))^2 = pi
        let k = Kernel::new(1, 0.5, 2.0, 0.0, 0.0).unwrap();
        let g = |x: &[f64], y: &[f64]| {
            let d = (x[0] - y[0]).abs();
            (-x[0] * x[0] - y[0] * y[0]).exp() * d.powi(2)
        };
        let mut it = PairIntegrand::new(&g);
        it.effective_radius = 6.0;
        let e = estimate_pair_integral_singular(&it, &k, &spec(400_000)).unwrap();
        assert!((e.value - std::f64::consts::PI).abs() < 4.0 * e.stderr, "{e:?}");
    }
}
