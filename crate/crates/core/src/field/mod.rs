//! Scalar fields on `R^n`, pair fields on `R^(2n)` and the operations that
//! connect them (difference-quotient lift, level clipping).

mod catalog;
mod profiles;

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use smallvec::SmallVec;

use crate::error::{Error, Result};
use crate::scalar::{dist, norm, pow_abs, Real};
use crate::space::Kernel;

pub use catalog::{make_field, FieldSpec, CATALOG_IDS};
pub use profiles::{
    cutoff_tau_j, eta_derivative_identity_check, mollifier_eta, CutoffProfile, IdentityResidual,
    MollifierProfile, ScaledMollifier,
};

pub type ScalarFn<T> = Arc<dyn Fn(&[T]) -> T + Send + Sync>;
pub type PairFn<T> = Arc<dyn Fn(&[T], &[T]) -> T + Send + Sync>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Smoothness {
    MeasurableOnly,
    Continuous,
    Smooth,
}

/// Decay of `|u(x)|` away from the origin.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Decay<T> {
    /// Vanishes outside the support radius.
    Compact,
    /// `|u(x)| <= c |x|^(-gamma)` for `|x| >= 1`.
    Power { c: T, gamma: T },
    /// `|u(x)| <= c exp(-rate |x|^2)`.
    Gaussian { c: T, rate: T },
    Unknown,
}

impl<T: Real> Decay<T> {
    fn combine(self, other: Self) -> Self {
        use Decay::*;
        match (self, other) {
            (Compact, d) | (d, Compact) => match d {
                Compact => Compact,
                // the compact part only adds mass inside its radius
                _ => Unknown,
            },
            (Power { c: c1, gamma: g1 }, Power { c: c2, gamma: g2 }) => Power {
                c: c1 + c2,
                gamma: g1.min(g2),
            },
            (Gaussian { c: c1, rate: r1 }, Gaussian { c: c2, rate: r2 }) => Gaussian {
                c: c1 + c2,
                rate: r1.min(r2),
            },
            _ => Unknown,
        }
    }

    pub fn to_f64(self) -> Decay<f64> {
        match self {
            Decay::Compact => Decay::Compact,
            Decay::Power { c, gamma } => Decay::Power {
                c: c.as_f64(),
                gamma: gamma.as_f64(),
            },
            Decay::Gaussian { c, rate } => Decay::Gaussian {
                c: c.as_f64(),
                rate: rate.as_f64(),
            },
            Decay::Unknown => Decay::Unknown,
        }
    }

    fn scaled(self, lambda: T) -> Self {
        match self {
            Decay::Power { c, gamma } => Decay::Power {
                c: c * lambda.abs(),
                gamma,
            },
            Decay::Gaussian { c, rate } => Decay::Gaussian {
                c: c * lambda.abs(),
                rate,
            },
            d => d,
        }
    }
}

/// Analytic metadata carried by every scalar field.
#[derive(Debug, Clone, PartialEq)]
pub struct FieldMeta<T> {
    /// `u(x) = 0` for `|x| > support_radius`; `+inf` when unbounded.
    pub support_radius: T,
    pub smoothness: Smoothness,
    pub lipschitz_bound: Option<T>,
    pub sup_bound: Option<T>,
    pub decay: Decay<T>,
    /// `|u(x)| <= C |x|^(-gamma)` near the origin, the only admitted singularity.
    pub singular_exponent: Option<T>,
    /// Radii at which the radial profile is not smooth.
    pub kink_radii: Vec<T>,
}

impl<T: Real> FieldMeta<T> {
    pub fn smooth_compact(radius: T) -> Self {
        Self {
            support_radius: radius,
            smoothness: Smoothness::Smooth,
            lipschitz_bound: None,
            sup_bound: None,
            decay: Decay::Compact,
            singular_exponent: None,
            kink_radii: Vec::new(),
        }
    }

    pub fn has_finite_support(&self) -> bool {
        self.support_radius.is_finite()
    }

    /// Radius beyond which the field is negligible in double precision:
    /// the support radius when finite, the `10^-16` level of a Gaussian
    /// envelope, and 1 otherwise.
    pub fn effective_radius(&self) -> T {
        if self.support_radius.is_finite() {
            return self.support_radius;
        }
        match self.decay {
            // amplitude-free, so scaling a field leaves its sampling unchanged
            Decay::Gaussian { rate, .. } => (T::lit(36.85) / rate).sqrt(),
            _ => T::one(),
        }
    }
}

/// A real function on `R^n` with trusted metadata.
#[derive(Clone)]
pub struct ScalarField<T: Real = f64> {
    id: String,
    eval: ScalarFn<T>,
    meta: FieldMeta<T>,
}

impl<T: Real> fmt::Debug for ScalarField<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ScalarField")
            .field("id", &self.id)
            .field("meta", &self.meta)
            .finish()
    }
}

impl<T: Real> ScalarField<T> {
    pub fn new(id: impl Into<String>, meta: FieldMeta<T>, eval: ScalarFn<T>) -> Self {
        Self {
            id: id.into(),
            eval,
            meta,
        }
    }

    pub fn from_fn<F>(id: impl Into<String>, meta: FieldMeta<T>, f: F) -> Self
    where
        F: Fn(&[T]) -> T + Send + Sync + 'static,
    {
        Self::new(id, meta, Arc::new(f))
    }

    pub fn zero() -> Self {
        Self::from_fn(
            "zero",
            FieldMeta {
                support_radius: T::zero(),
                smoothness: Smoothness::Smooth,
                lipschitz_bound: Some(T::zero()),
                sup_bound: Some(T::zero()),
                decay: Decay::Compact,
                singular_exponent: None,
                kink_radii: Vec::new(),
            },
            |_| T::zero(),
        )
    }

    /// The constant `c` on all of `R^n`. Not a member of the space, but its
    /// seminorm is defined and vanishes.
    pub fn constant(c: T) -> Self {
        Self::from_fn(
            format!("constant({c})"),
            FieldMeta {
                support_radius: T::infinity(),
                smoothness: Smoothness::Smooth,
                lipschitz_bound: Some(T::zero()),
                sup_bound: Some(c.abs()),
                decay: Decay::Unknown,
                singular_exponent: None,
                kink_radii: Vec::new(),
            },
            move |_| c,
        )
    }

    #[inline]
    pub fn eval(&self, x: &[T]) -> T {
        (self.eval)(x)
    }

    pub fn evaluator(&self) -> &ScalarFn<T> {
        &self.eval
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn meta(&self) -> &FieldMeta<T> {
        &self.meta
    }

    pub fn support_radius(&self) -> T {
        self.meta.support_radius
    }

    pub fn smoothness(&self) -> Smoothness {
        self.meta.smoothness
    }

    pub fn sup_bound(&self) -> Option<T> {
        self.meta.sup_bound
    }

    pub fn lipschitz_bound(&self) -> Option<T> {
        self.meta.lipschitz_bound
    }

    pub fn with_id(mut self, id: impl Into<String>) -> Self {
        self.id = id.into();
        self
    }

    /// `lambda * u`.
    pub fn scaled(&self, lambda: T) -> Self {
        let f = self.eval.clone();
        let l = lambda.abs();
        let meta = FieldMeta {
            lipschitz_bound: self.meta.lipschitz_bound.map(|v| v * l),
            sup_bound: self.meta.sup_bound.map(|v| v * l),
            decay: self.meta.decay.scaled(lambda),
            ..self.meta.clone()
        };
        Self::from_fn(format!("{lambda}*{}", self.id), meta, move |x| lambda * f(x))
    }

    /// `u - w`.
    pub fn sub(&self, other: &ScalarField<T>) -> Self {
        let (f, g) = (self.eval.clone(), other.eval.clone());
        let (m, o) = (&self.meta, &other.meta);
        let mut kinks = m.kink_radii.clone();
        kinks.extend(o.kink_radii.iter().copied());
        kinks.sort_by(|a, b| a.partial_cmp(b).unwrap());
        kinks.dedup();
        let singular = match (m.singular_exponent, o.singular_exponent) {
            (Some(a), Some(b)) => Some(a.max(b)),
            (a, b) => a.or(b),
        };
        let meta = FieldMeta {
            support_radius: m.support_radius.max(o.support_radius),
            smoothness: m.smoothness.min(o.smoothness),
            lipschitz_bound: m.lipschitz_bound.zip(o.lipschitz_bound).map(|(a, b)| a + b),
            sup_bound: m.sup_bound.zip(o.sup_bound).map(|(a, b)| a + b),
            decay: m.decay.combine(o.decay),
            singular_exponent: singular,
            kink_radii: kinks,
        };
        Self::from_fn(format!("({})-({})", self.id, other.id), meta, move |x| {
            f(x) - g(x)
        })
    }

    /// `x -> u(lambda x)` for `lambda > 0`.
    pub fn rescaled_argument(&self, lambda: T) -> Result<Self> {
        if !(lambda > T::zero()) || !lambda.is_finite() {
            return Err(Error::ParameterOutOfRange(format!(
                "rescaling factor must be positive, got {lambda}"
            )));
        }
        let f = self.eval.clone();
        let m = &self.meta;
        let decay = match m.decay {
            Decay::Compact => Decay::Compact,
            Decay::Gaussian { c, rate } => Decay::Gaussian {
                c,
                rate: rate * lambda * lambda,
            },
            Decay::Power { c, gamma } if lambda >= T::one() => Decay::Power {
                c: c * lambda.powf(-gamma),
                gamma,
            },
            _ => Decay::Unknown,
        };
        let meta = FieldMeta {
            support_radius: m.support_radius / lambda,
            lipschitz_bound: m.lipschitz_bound.map(|l| l * lambda),
            decay,
            kink_radii: m.kink_radii.iter().map(|&r| r / lambda).collect(),
            ..m.clone()
        };
        Ok(Self::from_fn(
            format!("{}(x*{lambda})", self.id),
            meta,
            move |x| {
                let mut buf = smallbuf(x.len());
                for (b, &v) in buf.iter_mut().zip(x) {
                    *b = v * lambda;
                }
                f(&buf)
            },
        ))
    }

    /// `x -> u(-x)`.
    pub fn reflected(&self) -> Self {
        let f = self.eval.clone();
        Self::from_fn(format!("{}(-x)", self.id), self.meta.clone(), move |x| {
            let mut buf = smallbuf(x.len());
            for (b, &v) in buf.iter_mut().zip(x) {
                *b = -v;
            }
            f(&buf)
        })
    }
}

/// Stack buffer for points of small dimension.
pub(crate) type PointBuf<T> = SmallVec<[T; 8]>;

pub(crate) fn smallbuf<T: Real>(n: usize) -> PointBuf<T> {
    smallvec::smallvec![T::zero(); n]
}

/// Bookkeeping kept by a lift so that tail bounds can be derived later.
#[derive(Debug, Clone, PartialEq)]
pub struct LiftSource<T> {
    pub lift_exponent: T,
    pub lipschitz_bound: Option<T>,
    pub decay: Decay<T>,
    pub support_radius: T,
}

/// Metadata of a function on `R^(2n) = R^n x R^n`.
#[derive(Debug, Clone, PartialEq)]
pub struct PairMeta<T> {
    /// Radius in `R^(2n)` outside of which the field vanishes.
    pub support_radius: T,
    /// `v(x, y) = 0` whenever `min(|x|, |y|) > reach`.
    pub reach: T,
    /// Inner sampling radius when the reach is unbounded.
    pub effective_radius: T,
    pub sup_bound: Option<T>,
    /// `|v| <~ |x|^(-gamma)` at the origin; under the diagonal shift this is
    /// a singularity at `z = x` and `z = y`.
    pub origin_exponent: Option<T>,
    /// One-dimensional coordinates where `v` is not smooth in either argument.
    pub kink_points: Vec<T>,
    pub source: Option<LiftSource<T>>,
}

impl<T: Real> PairMeta<T> {
    pub fn unbounded() -> Self {
        Self {
            support_radius: T::infinity(),
            reach: T::infinity(),
            effective_radius: T::one(),
            sup_bound: None,
            origin_exponent: None,
            kink_points: Vec::new(),
            source: None,
        }
    }

    pub fn singular_shift(&self) -> bool {
        self.origin_exponent.is_some()
    }
}

fn merge_points<T: Real>(a: &[T], b: &[T]) -> Vec<T> {
    let mut v: Vec<T> = a.iter().chain(b).copied().collect();
    v.sort_by(|x, y| x.partial_cmp(y).unwrap());
    v.dedup();
    v
}

/// A real function on `R^n x R^n`.
#[derive(Clone)]
pub struct PairField<T: Real = f64> {
    id: String,
    eval: PairFn<T>,
    meta: PairMeta<T>,
}

impl<T: Real> fmt::Debug for PairField<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("PairField")
            .field("id", &self.id)
            .field("meta", &self.meta)
            .finish()
    }
}

impl<T: Real> PairField<T> {
    pub fn new(id: impl Into<String>, meta: PairMeta<T>, eval: PairFn<T>) -> Self {
        Self {
            id: id.into(),
            eval,
            meta,
        }
    }

    pub fn from_fn<F>(id: impl Into<String>, meta: PairMeta<T>, f: F) -> Self
    where
        F: Fn(&[T], &[T]) -> T + Send + Sync + 'static,
    {
        Self::new(id, meta, Arc::new(f))
    }

    pub fn zero() -> Self {
        Self::from_fn(
            "zero",
            PairMeta {
                support_radius: T::zero(),
                reach: T::zero(),
                effective_radius: T::zero(),
                sup_bound: Some(T::zero()),
                ..PairMeta::unbounded()
            },
            |_, _| T::zero(),
        )
    }

    #[inline]
    pub fn eval(&self, x: &[T], y: &[T]) -> T {
        (self.eval)(x, y)
    }

    pub fn evaluator(&self) -> &PairFn<T> {
        &self.eval
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn meta(&self) -> &PairMeta<T> {
        &self.meta
    }

    pub fn sup_bound(&self) -> Option<T> {
        self.meta.sup_bound
    }

    pub fn scaled(&self, lambda: T) -> Self {
        let f = self.eval.clone();
        let l = lambda.abs();
        let meta = PairMeta {
            sup_bound: self.meta.sup_bound.map(|s| s * l),
            source: self.meta.source.clone().map(|s| LiftSource {
                lipschitz_bound: s.lipschitz_bound.map(|v| v * l),
                decay: s.decay.scaled(lambda),
                ..s
            }),
            ..self.meta.clone()
        };
        Self::from_fn(format!("{lambda}*{}", self.id), meta, move |x, y| {
            lambda * f(x, y)
        })
    }

    pub fn sub(&self, other: &PairField<T>) -> Self {
        let (f, g) = (self.eval.clone(), other.eval.clone());
        let (m, o) = (&self.meta, &other.meta);
        let meta = PairMeta {
            support_radius: m.support_radius.max(o.support_radius),
            reach: m.reach.max(o.reach),
            effective_radius: m.effective_radius.max(o.effective_radius),
            sup_bound: m.sup_bound.zip(o.sup_bound).map(|(a, b)| a + b),
            origin_exponent: match (m.origin_exponent, o.origin_exponent) {
                (Some(a), Some(b)) => Some(a.max(b)),
                (a, b) => a.or(b),
            },
            kink_points: merge_points(&m.kink_points, &o.kink_points),
            source: None,
        };
        Self::from_fn(format!("({})-({})", self.id, other.id), meta, move |x, y| {
            f(x, y) - g(x, y)
        })
    }
}

/// `v(x, y) = (u(x) - u(y)) |x - y|^(-(n/p + s))`, with `v(x, x) := 0`.
pub fn lift_difference_quotient<T: Real>(u: &ScalarField<T>, kernel: &Kernel<T>) -> PairField<T> {
    let e = kernel.lift_exponent();
    let f = u.eval.clone();
    let m = u.meta();
    let sup_bound = if e <= T::one() {
        m.lipschitz_bound
            .zip(m.sup_bound)
            .map(|(l, s)| l.max(T::two() * s))
    } else {
        None
    };
    let support = if m.support_radius == T::zero() {
        T::zero()
    } else {
        T::infinity()
    };
    let mut kinks = Vec::new();
    for &r in &m.kink_radii {
        kinks.push(-r);
        kinks.push(r);
    }
    let meta = PairMeta {
        support_radius: support,
        reach: m.support_radius,
        effective_radius: m.effective_radius(),
        sup_bound,
        origin_exponent: m.singular_exponent,
        kink_points: merge_points(&kinks, &[]),
        source: Some(LiftSource {
            lift_exponent: e,
            lipschitz_bound: m.lipschitz_bound,
            decay: m.decay,
            support_radius: m.support_radius,
        }),
    };
    PairField::from_fn(format!("lift({})", u.id()), meta, move |x, y| {
        let d = dist(x, y);
        if d == T::zero() {
            return T::zero();
        }
        let diff = f(x) - f(y);
        if diff == T::zero() {
            return T::zero();
        }
        diff * pow_abs(d, -e)
    })
}

/// Clamps `v` to `[-level, level]`.
pub fn clip_to_level<T: Real>(v: &PairField<T>, level: T) -> Result<PairField<T>> {
    if !(level > T::zero()) {
        return Err(Error::ParameterOutOfRange(format!(
            "clip level must be positive, got {level}"
        )));
    }
    let f = v.eval.clone();
    let meta = PairMeta {
        sup_bound: Some(v.meta.sup_bound.map_or(level, |s| s.min(level))),
        ..v.meta.clone()
    };
    Ok(PairField::from_fn(
        format!("clip({}, {level})", v.id()),
        meta,
        move |x, y| f(x, y).max(-level).min(level),
    ))
}

/// Radius of `(x, y)` in `R^(2n)`.
pub fn pair_radius<T: Real>(x: &[T], y: &[T]) -> T {
    let a = norm(x);
    let b = norm(y);
    (a * a + b * b).sqrt()
}
