//! Truncation `tau_j u`, mollification `u * eta_eps`, the diagonal-shift
//! convolution `v * eta` on pair fields, and their composition
//! `rho = (tau_j u) * eta_eps`.
//!
//! Ball integrals are computed along rays: `int_{B_eps} F(z) eta(z) dz` is
//! a sum over a spherical rule of one-dimensional radial integrals, each
//! split wherever the integrand has a kink. Two radial rules are provided:
//! composite midpoint with refinement (pointwise evaluation, with an error
//! estimate) and a fixed composite Gauss-Legendre rule (fields that are
//! re-integrated by the norm estimators). Both divide by the discrete mass
//! of the mollifier, so constants are reproduced to round-off.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::{
    mollifier_eta, CutoffProfile, Decay, FieldMeta, LiftSource, MollifierProfile, PairField,
    PairMeta, ScalarField, ScaledMollifier, Smoothness,
};
use crate::quadrature::grid::{gauss_legendre, graded_points};
use crate::quadrature::{ball_average, QuadratureSpec};
use crate::scalar::{norm, Real};

/// Relative tolerance of the refined convolution on bounded fields.
pub const CONV_TOLERANCE: f64 = 1e-4;
/// Relaxed tolerance when the field carries an integrable singularity.
pub const SINGULAR_CONV_TOLERANCE: f64 = 1e-3;
/// Sample count of the Monte Carlo convolution used above three dimensions.
pub const MC_CONV_SAMPLES: u64 = 100_000;
const MC_CONV_SEED: u64 = 0x6d6f_6c6c;
const MAX_DOUBLINGS: u32 = 7;
const GRADE_RATIO: f64 = 1.15;
const GRADE_FLOOR: f64 = 1e-10;
/// Geometric levels used by the fixed rule next to a singular point.
const FIXED_SINGULAR_LEVELS: i32 = 24;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SmoothingConfig {
    /// Radial cells per `eps` on the first pass of the refined rule.
    pub conv_quadrature: usize,
    /// Gauss-Legendre nodes per smooth radial piece in the fixed rule.
    pub gauss_nodes: usize,
    pub j: f64,
    pub epsilon: f64,
}

impl Default for SmoothingConfig {
    fn default() -> Self {
        Self {
            conv_quadrature: 256,
            gauss_nodes: 24,
            j: 1.0,
            epsilon: 0.1,
        }
    }
}

impl SmoothingConfig {
    pub fn pipeline(j: f64, epsilon: f64) -> Self {
        Self {
            j,
            epsilon,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.conv_quadrature < 32 {
            return Err(Error::ParameterOutOfRange(format!(
                "conv_quadrature must be at least 32, got {}",
                self.conv_quadrature
            )));
        }
        if self.gauss_nodes < 2 {
            return Err(Error::ParameterOutOfRange(format!(
                "gauss_nodes must be at least 2, got {}",
                self.gauss_nodes
            )));
        }
        check_positive("j", self.j)?;
        check_positive("epsilon", self.epsilon)
    }
}

fn check_positive(name: &str, v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(Error::ParameterOutOfRange(format!("{name} must be positive, got {v}")))
    }
}

/// Cutoff and mollifier used by the pipeline.
#[derive(Debug, Clone)]
pub struct SmoothingProfiles {
    pub cutoff: CutoffProfile,
    pub mollifier: MollifierProfile,
}

impl SmoothingProfiles {
    pub fn standard(n: usize) -> Self {
        Self {
            cutoff: CutoffProfile::standard(),
            mollifier: MollifierProfile::standard(n),
        }
    }
}

/// A convolution value with its quadrature diagnostics.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConvValue {
    pub value: f64,
    /// `|I_2m - I_m|` for the refined rule, the standard error for Monte
    /// Carlo, absent for the fixed rule.
    pub error: Option<f64>,
    /// `int |F| eta`, the scale against which the tolerance is relative.
    pub scale: f64,
    pub evaluations: u64,
}

impl ConvValue {
    fn zero() -> Self {
        Self {
            value: 0.0,
            error: Some(0.0),
            scale: 0.0,
            evaluations: 0,
        }
    }
}

/// Directions and weights on the unit sphere of `R^n`, `n <= 3`.
#[derive(Debug, Clone)]
struct SphereRule {
    n: usize,
    dirs: Vec<f64>,
    weights: Vec<f64>,
}

impl SphereRule {
    fn new(n: usize) -> Option<Self> {
        use std::f64::consts::PI;
        let (dirs, weights) = match n {
            1 => (vec![1.0, -1.0], vec![1.0, 1.0]),
            2 => {
                let k = 64;
                let mut d = Vec::with_capacity(2 * k);
                for i in 0..k {
                    let t = 2.0 * PI * (i as f64 + 0.5) / k as f64;
                    d.push(t.cos());
                    d.push(t.sin());
                }
                (d, vec![2.0 * PI / k as f64; k])
            }
            3 => {
                // 8 Gauss-Legendre latitudes in cos(theta) times 14 longitudes
                let lon = 14;
                let mut d = Vec::new();
                let mut w = Vec::new();
                for (t, wt) in gauss_legendre(8) {
                    let st = (1.0 - t * t).sqrt();
                    for i in 0..lon {
                        let phi = 2.0 * PI * (i as f64 + 0.5) / lon as f64;
                        d.extend([st * phi.cos(), st * phi.sin(), t]);
                        w.push(wt * 2.0 * PI / lon as f64);
                    }
                }
                (d, w)
            }
            _ => return None,
        };
        Some(Self { n, dirs, weights })
    }

    fn len(&self) -> usize {
        self.weights.len()
    }

    fn dir(&self, k: usize) -> &[f64] {
        &self.dirs[k * self.n..(k + 1) * self.n]
    }
}

/// Where a ball integrand is not smooth.
#[derive(Debug, Default)]
struct Features {
    /// Kinks on the spheres `|z - q| = rho`.
    spheres: Vec<(Vec<f64>, f64)>,
    /// Integrable singularities at these points.
    singular: Vec<Vec<f64>>,
}

#[derive(Clone, Copy)]
enum Pass<'a> {
    Midpoint(f64),
    Gauss(&'a [(f64, f64)]),
}

#[derive(Default, Clone, Copy)]
struct Sums {
    integral: f64,
    mass: f64,
    abs: f64,
    evals: u64,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Roots `r` of `|d + r w|^2 = rho^2` for a unit vector `w`.
fn ray_sphere(d: &[f64], w: &[f64], rho: f64) -> Option<(f64, f64)> {
    let b = dot(d, w);
    let disc = b * b - (dot(d, d) - rho * rho);
    if disc < 0.0 {
        return None;
    }
    let s = disc.sqrt();
    Some((-b - s, -b + s))
}

/// Convolution engine for one dimension and one scaled mollifier.
#[derive(Debug, Clone)]
pub struct Convolver {
    n: usize,
    eta: ScaledMollifier,
    sphere: Option<SphereRule>,
    gauss: Arc<Vec<(f64, f64)>>,
    cfg: SmoothingConfig,
}

impl Convolver {
    pub fn new(profile: &MollifierProfile, epsilon: f64, n: usize, cfg: &SmoothingConfig) -> Result<Self> {
        cfg.validate()?;
        let eta = mollifier_eta(profile, epsilon, n)?;
        Ok(Self {
            n,
            eta,
            sphere: SphereRule::new(n),
            gauss: Arc::new(gauss_legendre(cfg.gauss_nodes)),
            cfg: *cfg,
        })
    }

    pub fn epsilon(&self) -> f64 {
        self.eta.epsilon()
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn mollifier(&self) -> &ScaledMollifier {
        &self.eta
    }

    /// Sorted radial breakpoints on the ray `c + r w`, with a flag marking
    /// singular points. `None` when the ray misses the ball.
    fn ray_breaks(&self, c: &[f64], w: &[f64], feats: &Features) -> Option<Vec<(f64, bool)>> {
        let eps = self.eta.epsilon();
        let (lo, hi) = ray_sphere(c, w, eps)?;
        let (lo, hi) = (lo.max(0.0), hi);
        if !(hi > lo) {
            return None;
        }
        let mut pts = vec![(lo, false), (hi, false)];
        let mut d = vec![0.0; self.n];
        for (q, rho) in &feats.spheres {
            for i in 0..self.n {
                d[i] = c[i] - q[i];
            }
            if let Some((r0, r1)) = ray_sphere(&d, w, *rho) {
                for r in [r0, r1] {
                    if r > lo && r < hi {
                        pts.push((r, false));
                    }
                }
            }
        }
        for z0 in &feats.singular {
            for i in 0..self.n {
                d[i] = z0[i] - c[i];
            }
            let r = dot(&d, w);
            let off: f64 = d.iter().zip(w).map(|(a, b)| (a - r * b).powi(2)).sum();
            if r >= lo && r <= hi && off <= 1e-24 * (1.0 + dot(&d, &d)) {
                pts.push((r.max(lo), true));
            }
        }
        pts.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
        let mut out: Vec<(f64, bool)> = Vec::with_capacity(pts.len());
        for (r, s) in pts {
            match out.last_mut() {
                Some(last) if (r - last.0).abs() <= 1e-14 * (1.0 + r.abs()) => last.1 |= s,
                _ => out.push((r, s)),
            }
        }
        Some(out)
    }

    fn sweep<F: Fn(&[f64]) -> f64>(&self, f: &F, c: &[f64], feats: &Features, pass: Pass<'_>) -> Sums {
        let sphere = self.sphere.as_ref().expect("ray rules cover n <= 3");
        let n = self.n;
        let k = (n - 1) as i32;
        let mut s = Sums::default();
        let mut z = vec![0.0; n];
        let mut node = |r: f64, h: f64, wdir: f64, w: &[f64], s: &mut Sums| {
            for i in 0..n {
                z[i] = c[i] + r * w[i];
            }
            let e = self.eta.at_radius(norm(&z));
            if e == 0.0 {
                return;
            }
            let wt = wdir * h * r.powi(k) * e;
            let v = f(&z);
            s.integral += wt * v;
            s.abs += wt * v.abs();
            s.mass += wt;
            s.evals += 1;
        };
        for d in 0..sphere.len() {
            let w = sphere.dir(d);
            let wdir = sphere.weights[d];
            let Some(breaks) = self.ray_breaks(c, w, feats) else {
                continue;
            };
            for p in breaks.windows(2) {
                let ((a, sa), (b, sb)) = (p[0], p[1]);
                if !(b > a) {
                    continue;
                }
                match pass {
                    Pass::Midpoint(h) => {
                        let cells = graded_points(a, b, sa, sb, h, GRADE_RATIO, GRADE_FLOOR);
                        for cw in cells.windows(2) {
                            node(0.5 * (cw[0] + cw[1]), cw[1] - cw[0], wdir, w, &mut s);
                        }
                    }
                    Pass::Gauss(gl) => {
                        for (lo, hi) in fixed_pieces(a, b, sa, sb) {
                            let (m, hw) = (0.5 * (lo + hi), 0.5 * (hi - lo));
                            for &(t, wt) in gl {
                                node(m + hw * t, hw * wt, wdir, w, &mut s);
                            }
                        }
                    }
                }
            }
        }
        s
    }

    /// Ray center: the origin of `z`, or a singular point inside the ball
    /// when `n >= 2`, so that the singularity sits at `r = 0` of every ray.
    fn center(&self, feats: &Features) -> Vec<f64> {
        if self.n >= 2 {
            let eps = self.eta.epsilon();
            if let Some(z0) = feats
                .singular
                .iter()
                .filter(|z0| norm(z0) < eps)
                .min_by(|a, b| norm(a).partial_cmp(&norm(b)).unwrap())
            {
                return z0.clone();
            }
        }
        vec![0.0; self.n]
    }

    fn refined<F: Fn(&[f64]) -> f64>(&self, f: &F, feats: &Features, tol: f64) -> Result<ConvValue> {
        let c = self.center(feats);
        let eps = self.eta.epsilon();
        let mut m = self.cfg.conv_quadrature;
        let mut prev = self.sweep(f, &c, feats, Pass::Midpoint(eps / m as f64));
        let mut evals = prev.evals;
        for _ in 0..MAX_DOUBLINGS {
            m *= 2;
            let cur = self.sweep(f, &c, feats, Pass::Midpoint(eps / m as f64));
            evals += cur.evals;
            if cur.mass == 0.0 {
                return Ok(ConvValue::zero());
            }
            let (v0, v1) = (prev.integral / prev.mass, cur.integral / cur.mass);
            let scale = cur.abs / cur.mass;
            let err = (v1 - v0).abs();
            if err <= tol * scale || scale == 0.0 {
                return Ok(ConvValue {
                    value: v1,
                    error: Some(err),
                    scale,
                    evaluations: evals,
                });
            }
            prev = cur;
        }
        Err(Error::QuadratureFailure(format!(
            "convolution did not reach relative tolerance {tol:.1e} with {m} radial cells"
        )))
    }

    fn fixed<F: Fn(&[f64]) -> f64>(&self, f: &F, feats: &Features) -> ConvValue {
        let c = self.center(feats);
        let s = self.sweep(f, &c, feats, Pass::Gauss(&self.gauss));
        if s.mass == 0.0 {
            return ConvValue::zero();
        }
        ConvValue {
            value: s.integral / s.mass,
            error: None,
            scale: s.abs / s.mass,
            evaluations: s.evals,
        }
    }

    fn monte_carlo<F: Fn(&[f64]) -> f64 + Sync>(&self, f: &F) -> Result<ConvValue> {
        let spec = QuadratureSpec::monte_carlo(MC_CONV_SAMPLES, MC_CONV_SEED);
        let eta = &self.eta;
        let eps = eta.epsilon();
        let weighted = |z: &[f64]| eta.at_radius(norm(z)) * f(z);
        let mass_f = |z: &[f64]| eta.at_radius(norm(z));
        let abs_f = |z: &[f64]| eta.at_radius(norm(z)) * f(z).abs();
        let i = ball_average::<f64>(&weighted, self.n, eps, &[], &spec)?;
        let m = ball_average::<f64>(&mass_f, self.n, eps, &[], &spec)?;
        let a = ball_average::<f64>(&abs_f, self.n, eps, &[], &spec)?;
        if m.value == 0.0 {
            return Ok(ConvValue::zero());
        }
        Ok(ConvValue {
            value: i.value / m.value,
            error: Some(i.stderr / m.value),
            scale: a.value / m.value,
            evaluations: 3 * MC_CONV_SAMPLES,
        })
    }

    fn run<F: Fn(&[f64]) -> f64 + Sync>(&self, f: &F, feats: &Features, tol: Option<f64>) -> Result<ConvValue> {
        if self.sphere.is_none() {
            return self.monte_carlo(f);
        }
        match tol {
            Some(t) => self.refined(f, feats, t),
            None => Ok(self.fixed(f, feats)),
        }
    }

    fn scalar_features<T: Real>(u: &ScalarField<T>, x: &[f64]) -> Features {
        let m = u.meta();
        let mut feats = Features::default();
        let mut radii: Vec<f64> = m.kink_radii.iter().map(|r| r.as_f64()).collect();
        if m.support_radius.is_finite() {
            radii.push(m.support_radius.as_f64());
        }
        for r in radii {
            feats.spheres.push((x.to_vec(), r));
        }
        if m.singular_exponent.is_some() {
            feats.singular.push(x.to_vec());
        }
        feats
    }

    fn scalar_at<T: Real>(&self, u: &ScalarField<T>, x: &[T], tol: Option<f64>) -> Result<ConvValue> {
        check_dim(self.n, x.len())?;
        let xf: Vec<f64> = x.iter().map(|v| v.as_f64()).collect();
        let r = u.support_radius().as_f64();
        if r.is_finite() && norm(&xf) > r + self.epsilon() {
            return Ok(ConvValue::zero());
        }
        let feats = Self::scalar_features(u, &xf);
        let f = |z: &[f64]| {
            let mut w = crate::field::smallbuf::<T>(z.len());
            for i in 0..z.len() {
                w[i] = T::lit(xf[i] - z[i]);
            }
            u.eval(&w).as_f64()
        };
        self.run(&f, &feats, tol)
    }

    fn pair_at<T: Real>(&self, v: &PairField<T>, x: &[T], y: &[T], tol: Option<f64>) -> Result<ConvValue> {
        check_dim(self.n, x.len())?;
        check_dim(self.n, y.len())?;
        let xf: Vec<f64> = x.iter().map(|t| t.as_f64()).collect();
        let yf: Vec<f64> = y.iter().map(|t| t.as_f64()).collect();
        let m = v.meta();
        let reach = m.reach.as_f64();
        let eps = self.epsilon();
        if reach.is_finite() && norm(&xf).min(norm(&yf)) > reach + eps {
            return Ok(ConvValue::zero());
        }
        let mut feats = Features::default();
        let mut radii: Vec<f64> = m.kink_points.iter().map(|k| k.as_f64().abs()).collect();
        if reach.is_finite() {
            radii.push(reach);
        }
        radii.sort_by(|a, b| a.partial_cmp(b).unwrap());
        radii.dedup();
        for r in radii {
            feats.spheres.push((xf.clone(), r));
            feats.spheres.push((yf.clone(), r));
        }
        if m.origin_exponent.is_some() {
            feats.singular.push(xf.clone());
            feats.singular.push(yf.clone());
        }
        let f = |z: &[f64]| {
            let n = z.len();
            let mut a = crate::field::smallbuf::<T>(n);
            let mut b = crate::field::smallbuf::<T>(n);
            for i in 0..n {
                a[i] = T::lit(xf[i] - z[i]);
                b[i] = T::lit(yf[i] - z[i]);
            }
            v.eval(&a, &b).as_f64()
        };
        self.run(&f, &feats, tol)
    }

    /// `(u * eta_eps)(x)` by the refined rule.
    pub fn convolve<T: Real>(&self, u: &ScalarField<T>, x: &[T]) -> Result<ConvValue> {
        self.scalar_at(u, x, Some(scalar_tolerance(u)))
    }

    /// `(u * eta_eps)(x)` by the fixed rule.
    pub fn convolve_fixed<T: Real>(&self, u: &ScalarField<T>, x: &[T]) -> Result<ConvValue> {
        self.scalar_at(u, x, None)
    }

    /// `int v(x - z, y - z) eta_eps(z) dz` by the fixed rule.
    pub fn star_fixed<T: Real>(&self, v: &PairField<T>, x: &[T], y: &[T]) -> Result<ConvValue> {
        self.pair_at(v, x, y, None)
    }

    /// `int v(x - z, y - z) eta_eps(z) dz` by the refined rule.
    pub fn star<T: Real>(&self, v: &PairField<T>, x: &[T], y: &[T]) -> Result<ConvValue> {
        let tol = if v.meta().singular_shift() {
            SINGULAR_CONV_TOLERANCE
        } else {
            CONV_TOLERANCE
        };
        self.pair_at(v, x, y, Some(tol))
    }
}

fn check_dim(n: usize, got: usize) -> Result<()> {
    if n == got {
        Ok(())
    } else {
        Err(Error::ParameterOutOfRange(format!(
            "point has dimension {got}, the mollifier was built for {n}"
        )))
    }
}

/// Tolerance the refined rule applies to `u`.
pub fn scalar_tolerance<T: Real>(u: &ScalarField<T>) -> f64 {
    if u.meta().singular_exponent.is_some() {
        SINGULAR_CONV_TOLERANCE
    } else {
        CONV_TOLERANCE
    }
}

/// Pieces of `[a, b]` for the fixed rule, graded geometrically toward
/// singular endpoints.
fn fixed_pieces(a: f64, b: f64, sa: bool, sb: bool) -> Vec<(f64, f64)> {
    let graded = |a: f64, b: f64, toward_a: bool| -> Vec<(f64, f64)> {
        let len = b - a;
        let mut out = Vec::new();
        let mut t_prev = 1.0;
        for k in 1..=FIXED_SINGULAR_LEVELS {
            let t = 0.25f64.powi(k);
            out.push((t, t_prev));
            t_prev = t;
        }
        out.push((0.0, t_prev));
        out.into_iter()
            .map(|(t0, t1)| {
                if toward_a {
                    (a + len * t0, a + len * t1)
                } else {
                    (b - len * t1, b - len * t0)
                }
            })
            .collect()
    };
    match (sa, sb) {
        (false, false) => vec![(a, b)],
        (true, false) => graded(a, b, true),
        (false, true) => graded(a, b, false),
        (true, true) => {
            let m = 0.5 * (a + b);
            let mut v = graded(a, m, true);
            v.extend(graded(m, b, false));
            v
        }
    }
}

/// `(u * eta_eps)(x)` to relative `10^-4` (`10^-3` for singular fields).
pub fn convolve<T: Real>(u: &ScalarField<T>, epsilon: f64, profile: &MollifierProfile, x: &[T]) -> Result<T> {
    let c = Convolver::new(profile, epsilon, x.len(), &SmoothingConfig::default())?;
    Ok(T::lit(c.convolve(u, x)?.value))
}

/// `(v star eta_eps)(x, y) = int v(x - z, y - z) eta_eps(z) dz`.
pub fn star_convolve<T: Real>(
    v: &PairField<T>,
    profile: &MollifierProfile,
    epsilon: f64,
    point: (&[T], &[T]),
) -> Result<T> {
    let c = Convolver::new(profile, epsilon, point.0.len(), &SmoothingConfig::default())?;
    Ok(T::lit(c.star(v, point.0, point.1)?.value))
}

/// `tau_j u`: equal to `u` on `B_j`, zero outside `B_2j`.
pub fn truncate<T: Real>(u: &ScalarField<T>, j: f64, profile: &CutoffProfile) -> Result<ScalarField<T>> {
    check_positive("j", j)?;
    let m = u.meta();
    let jt = T::lit(j);
    let id = format!("tau_{j}[{}]", u.id());
    if m.support_radius <= jt {
        return Ok(u.clone().with_id(id));
    }
    let two_j = T::lit(2.0 * j);
    let slope = T::lit(profile.lipschitz() / j);
    let meta = FieldMeta {
        support_radius: m.support_radius.min(two_j),
        smoothness: m.smoothness,
        lipschitz_bound: m
            .lipschitz_bound
            .zip(m.sup_bound)
            .map(|(l, s)| l + s * slope),
        sup_bound: m.sup_bound,
        decay: Decay::Compact,
        singular_exponent: m.singular_exponent,
        kink_radii: m.kink_radii.iter().copied().filter(|&r| r < two_j).collect(),
    };
    let f = u.evaluator().clone();
    let prof = *profile;
    Ok(ScalarField::from_fn(id, meta, move |x: &[T]| {
        let t = prof.at_radius(norm(x).as_f64() / j);
        if t == 0.0 {
            T::zero()
        } else if t == 1.0 {
            f(x)
        } else {
            T::lit(t) * f(x)
        }
    }))
}

/// `u - tau_j u = (1 - tau_j) u`; identically zero once `supp u` lies in `B_j`.
pub fn truncation_remainder<T: Real>(u: &ScalarField<T>, j: f64, profile: &CutoffProfile) -> Result<ScalarField<T>> {
    check_positive("j", j)?;
    let m = u.meta();
    if m.support_radius <= T::lit(j) {
        return Ok(ScalarField::zero());
    }
    let slope = T::lit(profile.lipschitz() / j);
    let meta = FieldMeta {
        lipschitz_bound: m
            .lipschitz_bound
            .zip(m.sup_bound)
            .map(|(l, s)| l + s * slope),
        // 1 - tau_j vanishes on B_j, removing any singularity at the origin
        singular_exponent: None,
        kink_radii: m.kink_radii.iter().copied().filter(|&r| r > T::lit(j)).collect(),
        ..m.clone()
    };
    let f = u.evaluator().clone();
    let prof = *profile;
    Ok(ScalarField::from_fn(
        format!("(1-tau_{j})[{}]", u.id()),
        meta,
        move |x: &[T]| {
            let t = prof.at_radius(norm(x).as_f64() / j);
            if t == 1.0 {
                T::zero()
            } else if t == 0.0 {
                f(x)
            } else {
                T::lit(1.0 - t) * f(x)
            }
        },
    ))
}

fn mollified_meta<T: Real>(m: &FieldMeta<T>, eps: f64) -> FieldMeta<T> {
    let e = T::lit(eps);
    let decay = match m.decay {
        Decay::Compact => Decay::Compact,
        // (|x| - eps)^2 >= |x|^2 / 2 - eps^2
        Decay::Gaussian { c, rate } => Decay::Gaussian {
            c: c * (rate * e * e).exp(),
            rate: rate * T::half(),
        },
        // |x| - eps >= |x| / 2 once |x| >= 1 >= 2 eps
        Decay::Power { c, gamma } if eps <= 0.5 => Decay::Power {
            c: c * T::two().powf(gamma),
            gamma,
        },
        _ => Decay::Unknown,
    };
    FieldMeta {
        support_radius: m.support_radius + e,
        smoothness: Smoothness::Smooth,
        lipschitz_bound: m.lipschitz_bound,
        sup_bound: m.sup_bound,
        decay,
        singular_exponent: None,
        kink_radii: Vec::new(),
    }
}

/// `u * eta_eps` as a field on `R^n`, evaluated by the fixed rule (Monte
/// Carlo above three dimensions).
pub fn mollify<T: Real>(u: &ScalarField<T>, epsilon: f64, profile: &MollifierProfile, cfg: &SmoothingConfig) -> Result<ScalarField<T>> {
    let n = profile.n();
    let conv = Arc::new(Convolver::new(profile, epsilon, n, cfg)?);
    if u.sup_bound() == Some(T::zero()) {
        return Ok(ScalarField::zero());
    }
    let meta = mollified_meta(u.meta(), epsilon);
    let w = u.clone();
    let prof = profile.clone();
    let cfg = *cfg;
    Ok(ScalarField::from_fn(
        format!("{}*eta_{epsilon}", u.id()),
        meta,
        move |x: &[T]| {
            let r = if x.len() == conv.n() {
                conv.convolve_fixed(&w, x)
            } else {
                Convolver::new(&prof, epsilon, x.len(), &cfg).and_then(|c| c.convolve_fixed(&w, x))
            };
            r.map_or(T::nan(), |c| T::lit(c.value))
        },
    ))
}

/// `v star eta_eps` as a pair field, evaluated by the fixed rule. For a lift
/// `v = lift(u)` the result is `lift(u * eta_eps)`, and the metadata says so.
pub fn star_mollify<T: Real>(v: &PairField<T>, epsilon: f64, profile: &MollifierProfile, cfg: &SmoothingConfig) -> Result<PairField<T>> {
    let n = profile.n();
    let conv = Arc::new(Convolver::new(profile, epsilon, n, cfg)?);
    let m = v.meta();
    if m.reach == T::zero() {
        return Ok(PairField::zero());
    }
    let e = T::lit(epsilon);
    let source = m.source.as_ref().map(|s| {
        let inner = FieldMeta {
            support_radius: s.support_radius,
            smoothness: Smoothness::MeasurableOnly,
            lipschitz_bound: s.lipschitz_bound,
            sup_bound: None,
            decay: s.decay,
            singular_exponent: None,
            kink_radii: Vec::new(),
        };
        let mm = mollified_meta(&inner, epsilon);
        LiftSource {
            lift_exponent: s.lift_exponent,
            lipschitz_bound: mm.lipschitz_bound,
            decay: mm.decay,
            support_radius: mm.support_radius,
        }
    });
    let meta = PairMeta {
        support_radius: m.support_radius + e * T::two().sqrt(),
        reach: m.reach + e,
        effective_radius: m.effective_radius + e,
        sup_bound: m.sup_bound,
        origin_exponent: None,
        kink_points: Vec::new(),
        source,
    };
    let w = v.clone();
    Ok(PairField::from_fn(
        format!("{}*eta_{epsilon}", v.id()),
        meta,
        move |x: &[T], y: &[T]| {
            conv.star_fixed(&w, x, y).map_or(T::nan(), |c| T::lit(c.value))
        },
    ))
}

/// `rho = (tau_j u) * eta_eps`, supported in `B_{min(2j, R) + eps}`.
pub fn pipeline_rho<T: Real>(
    u: &ScalarField<T>,
    j: f64,
    epsilon: f64,
    profiles: &SmoothingProfiles,
) -> Result<ScalarField<T>> {
    pipeline_rho_with(u, &SmoothingConfig::pipeline(j, epsilon), profiles)
}

pub fn pipeline_rho_with<T: Real>(u: &ScalarField<T>, cfg: &SmoothingConfig, profiles: &SmoothingProfiles) -> Result<ScalarField<T>> {
    cfg.validate()?;
    let t = truncate(u, cfg.j, &profiles.cutoff)?;
    let rho = mollify(&t, cfg.epsilon, &profiles.mollifier, cfg)?;
    Ok(rho.with_id(format!("rho(j={}, eps={})[{}]", cfg.j, cfg.epsilon, u.id())))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::{lift_difference_quotient, make_field, FieldSpec};
    use crate::space::SpaceParams;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn field(s: &str) -> ScalarField<f64> {
        make_field(&FieldSpec::parse(s).unwrap(), None).unwrap()
    }

    #[test]
    fn config_validation() {
        assert!(SmoothingConfig::default().validate().is_ok());
        let bad = SmoothingConfig {
            conv_quadrature: 16,
            ..Default::default()
        };
        assert!(bad.validate().is_err());
        assert!(SmoothingConfig::pipeline(0.0, 0.1).validate().is_err());
        assert!(SmoothingConfig::pipeline(1.0, -0.1).validate().is_err());
    }

    #[test]
    fn truncation_examples() {
        let c = CutoffProfile::standard();
        let b = field("smooth_bump(R=1)");
        let t = truncate(&b, 1.5, &c).unwrap();
        for x in [-0.9, -0.3, 0.0, 0.42, 0.99] {
            assert_eq!(t.eval(&[x]), b.eval(&[x]));
        }
        let p = field("polynomial_tail(gamma=2)");
        let t = truncate(&p, 1.0, &c).unwrap();
        assert_eq!(t.eval(&[3.0]), 0.0);
        assert_eq!(t.eval(&[0.0, 3.0]), 0.0);
        assert_eq!(t.support_radius(), 2.0);
        assert_eq!(t.eval(&[0.7]), p.eval(&[0.7]));
        for i in 0..200 {
            let x = [i as f64 * 0.02];
            assert!((p.eval(&x) - t.eval(&x)).abs() <= 2.0 * p.eval(&x).abs());
            assert!(t.eval(&x).abs() <= t.sup_bound().unwrap());
        }
        assert!(truncate(&p, 0.0, &c).is_err());
    }

    #[test]
    fn remainder_is_exact_complement() {
        let c = CutoffProfile::standard();
        let p = field("polynomial_tail(gamma=3)");
        let r = truncation_remainder(&p, 2.0, &c).unwrap();
        let t = truncate(&p, 2.0, &c).unwrap();
        for i in 0..100 {
            let x = [i as f64 * 0.07 - 1.0];
            assert!((r.eval(&x) + t.eval(&x) - p.eval(&x)).abs() < 1e-15);
        }
        let b = field("smooth_bump(R=1)");
        let z = truncation_remainder(&b, 1.0, &c).unwrap();
        assert_eq!(z.support_radius(), 0.0);
    }

    #[test]
    fn convolution_reproduces_constants() {
        for n in 1..=3 {
            let prof = MollifierProfile::standard(n);
            let one = ScalarField::<f64>::constant(2.5);
            let x = vec![0.3; n];
            let v = convolve(&one, 0.2, &prof, &x).unwrap();
            assert!((v - 2.5).abs() < 2.5e-6, "n = {n}: {v}");
        }
        let prof = MollifierProfile::standard(1);
        assert_eq!(convolve(&ScalarField::<f64>::zero(), 0.2, &prof, &[0.1]).unwrap(), 0.0);
    }

    #[test]
    fn hat_convolution_at_origin() {
        let prof = MollifierProfile::standard(1);
        let hat = field("hat_1d");
        let v = convolve(&hat, 0.1, &prof, &[0.0]).unwrap();
        // 1 - eps * int |t| eta(t) dt
        let eta = mollifier_eta(&prof, 1.0, 1).unwrap();
        let first_moment = 2.0 * crate::quadrature::grid::simpson(|t| t * eta.at_radius(t), 0.0, 1.0, 20_000);
        let exact = 1.0 - 0.1 * first_moment;
        assert!(v > 1.0 - 0.1 && v <= 1.0);
        assert!((v - exact).abs() < 1e-6, "{v} vs {exact}");
    }

    #[test]
    fn exact_zero_outside_the_support() {
        let prof = MollifierProfile::standard(2);
        let b = field("smooth_bump(R=1)");
        assert_eq!(convolve(&b, 0.1, &prof, &[0.8, 0.9]).unwrap(), 0.0);
        let c = Convolver::new(&prof, 0.1, 2, &SmoothingConfig::default()).unwrap();
        let r = c.convolve(&b, &[1.2, 0.0]).unwrap();
        assert_eq!((r.value, r.evaluations), (0.0, 0));
        assert!(convolve(&b, 0.1, &prof, &[0.5]).is_ok());
    }

    #[test]
    fn star_of_constant_and_zero() {
        let prof = MollifierProfile::standard(2);
        let k = PairField::<f64>::from_fn("c", crate::field::PairMeta::unbounded(), |_, _| -1.5);
        let v = star_convolve(&k, &prof, 0.3, (&[0.2, 0.1], &[-1.0, 0.4])).unwrap();
        assert!((v + 1.5).abs() < 1.5e-6);
        let z = star_convolve(&PairField::<f64>::zero(), &prof, 0.3, (&[0.2, 0.1], &[1.0, 0.0])).unwrap();
        assert_eq!(z, 0.0);
    }

    #[test]
    fn commutation_with_the_lift() {
        let sp = SpaceParams::<f64>::new(1, 0.3, 2.0, 0.1).unwrap();
        let k = sp.kernel();
        let prof = MollifierProfile::standard(1);
        let c = Convolver::new(&prof, 0.25, 1, &SmoothingConfig::default()).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for id in ["hat_1d", "gaussian", "singular_spike(gamma=0.05)"] {
            let u: ScalarField<f64> = make_field(&FieldSpec::parse(id).unwrap(), Some(&sp)).unwrap();
            let v = lift_difference_quotient(&u, &k);
            let tol = scalar_tolerance(&u);
            for _ in 0..10 {
                let x: [f64; 1] = [rng.random_range(-1.5..1.5)];
                let y: [f64; 1] = [rng.random_range(-1.5..1.5)];
                let e = k.lift_exponent();
                let d = (x[0] - y[0]).abs().powf(-e);
                let cx = c.convolve(&u, &x).unwrap();
                let cy = c.convolve(&u, &y).unwrap();
                let s = c.star(&v, &x, &y).unwrap();
                let res = (s.value - (cx.value - cy.value) * d).abs();
                let scale = d * (cx.scale + cy.scale);
                assert!(res <= 2.0 * tol * scale, "{id} at {x:?},{y:?}: {res:e} vs {scale:e}");
            }
        }
    }

    #[test]
    fn pipeline_support_and_range() {
        let prof = SmoothingProfiles::standard(1);
        let b = field("smooth_bump(R=1)");
        let rho = pipeline_rho(&b, 10.0, 0.1, &prof).unwrap();
        assert!(rho.support_radius() <= 1.1 + 1e-12);
        assert_eq!(rho.smoothness(), Smoothness::Smooth);
        assert_eq!(rho.eval(&[1.1001]), 0.0);
        assert_eq!(rho.eval(&[-25.0]), 0.0);
        let s = b.sup_bound().unwrap();
        for i in 0..50 {
            let x = [-1.2 + i as f64 * 0.05];
            assert!(rho.eval(&x).abs() <= s * (1.0 + 1e-9));
        }
        let direct = convolve(&b, 0.1, &prof.mollifier, &[0.3]).unwrap();
        assert!((rho.eval(&[0.3]) - direct).abs() < 1e-6 * direct);
        let z = pipeline_rho(&ScalarField::<f64>::zero(), 1.0, 0.1, &prof).unwrap();
        assert_eq!(z.eval(&[0.0]), 0.0);
        let p = field("polynomial_tail(gamma=3)");
        let rho = pipeline_rho(&p, 2.0, 0.25, &prof).unwrap();
        assert_eq!(rho.support_radius(), 4.25);
        assert_eq!(rho.eval(&[4.2501]), 0.0);
        assert!(rho.eval(&[4.2]) >= 0.0);
    }

    #[test]
    fn pipeline_in_two_dimensions() {
        let prof = SmoothingProfiles::standard(2);
        let g = field("gaussian");
        let rho = pipeline_rho(&g, 1.0, 0.2, &prof).unwrap();
        let a = rho.eval(&[0.1, -0.2]);
        let b = convolve(&truncate(&g, 1.0, &prof.cutoff).unwrap(), 0.2, &prof.mollifier, &[0.1, -0.2]).unwrap();
        assert!((a - b).abs() < 1e-6, "{a} vs {b}");
        assert_eq!(rho.eval(&[2.2, 0.1]), 0.0);
        assert!(rho.eval(&[2.0, 0.1]) > 0.0);
    }

    #[test]
    fn monte_carlo_above_three_dimensions() {
        let prof = MollifierProfile::standard(4);
        let c = Convolver::new(&prof, 0.5, 4, &SmoothingConfig::default()).unwrap();
        let one = ScalarField::<f64>::constant(1.0);
        let r = c.convolve(&one, &[0.0; 4]).unwrap();
        assert_eq!(r.value, 1.0);
        let g = field("gaussian");
        let r = c.convolve(&g, &[0.1, 0.0, 0.0, 0.0]).unwrap();
        assert!(r.error.unwrap() > 0.0 && r.value > 0.5 && r.value < 1.0);
    }

    #[test]
    fn f32_pipeline() {
        let prof = SmoothingProfiles::standard(1);
        let b: ScalarField<f32> = make_field(&FieldSpec::parse("smooth_bump").unwrap(), None).unwrap();
        let rho = pipeline_rho(&b, 1.0, 0.1, &prof).unwrap();
        let v = rho.eval(&[0.0f32]);
        assert!(v > 0.3 && v < 0.37);
    }
}
