//! Closed-form catalog fields addressed by strings such as
//! `polynomial_tail(gamma=2.0)`.

use std::fmt;

use crate::error::{Error, Result};
use crate::scalar::{inv_pow, norm, Real};
use crate::space::SpaceParams;

use super::{Decay, FieldMeta, ScalarField, Smoothness};

pub const CATALOG_IDS: [&str; 6] = [
    "gaussian",
    "smooth_bump",
    "hat_1d",
    "polynomial_tail",
    "singular_spike",
    "zero",
];

/// Upper bound on `max |d/dt exp(-1/(1-t^2))|`, attained near `t = 0.7598`.
const BUMP_LIPSCHITZ: f64 = 0.798_43;

/// Parsed `identifier(key=value, ...)`.
#[derive(Debug, Clone, PartialEq)]
pub struct FieldSpec {
    pub name: String,
    pub args: Vec<(Option<String>, f64)>,
}

impl fmt::Display for FieldSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.name)?;
        if self.args.is_empty() {
            return Ok(());
        }
        f.write_str("(")?;
        for (i, (k, v)) in self.args.iter().enumerate() {
            if i > 0 {
                f.write_str(", ")?;
            }
            match k {
                Some(k) => write!(f, "{k}={v}")?,
                None => write!(f, "{v}")?,
            }
        }
        f.write_str(")")
    }
}

impl FieldSpec {
    pub fn new(name: &str) -> Self {
        Self {
            name: name.to_string(),
            args: Vec::new(),
        }
    }

    pub fn with(mut self, key: &str, value: f64) -> Self {
        self.args.push((Some(key.to_string()), value));
        self
    }

    pub fn parse(text: &str) -> Result<Self> {
        let bad = || Error::MalformedFieldSpec(text.to_string());
        let t = text.trim();
        let (name, rest) = match t.find('(') {
            Some(i) => (&t[..i], Some(&t[i + 1..])),
            None => (t, None),
        };
        let name = name.trim();
        if name.is_empty()
            || !name
                .chars()
                .all(|c| c.is_ascii_alphanumeric() || c == '_')
            || name.starts_with(|c: char| c.is_ascii_digit())
        {
            return Err(bad());
        }
        let mut args = Vec::new();
        if let Some(rest) = rest {
            let inner = rest.strip_suffix(')').ok_or_else(bad)?;
            if inner.contains('(') || inner.contains(')') {
                return Err(bad());
            }
            if !inner.trim().is_empty() {
                for part in inner.split(',') {
                    let part = part.trim();
                    let (key, val) = match part.split_once('=') {
                        Some((k, v)) => {
                            let k = k.trim();
                            if k.is_empty() || !k.chars().all(|c| c.is_ascii_alphanumeric() || c == '_') {
                                return Err(bad());
                            }
                            (Some(k.to_string()), v.trim())
                        }
                        None => (None, part),
                    };
                    let v: f64 = val.parse().map_err(|_| bad())?;
                    if !v.is_finite() {
                        return Err(bad());
                    }
                    args.push((key, v));
                }
            }
        }
        Ok(Self {
            name: name.to_string(),
            args,
        })
    }

    /// Binds arguments to the entry's parameter names, in order.
    fn bind(&self, names: &[&str]) -> Result<Vec<Option<f64>>> {
        let mut out = vec![None; names.len()];
        let mut next = 0;
        for (k, v) in &self.args {
            let slot = match k {
                Some(k) => {
                    let key = match k.as_str() {
                        "g" | "γ" => "gamma",
                        "r" | "radius" => "R",
                        other => other,
                    };
                    names.iter().position(|n| *n == key).ok_or_else(|| {
                        Error::MalformedFieldSpec(format!(
                            "{}: unknown parameter `{k}`",
                            self.name
                        ))
                    })?
                }
                None => {
                    while next < names.len() && out[next].is_some() {
                        next += 1;
                    }
                    next
                }
            };
            if slot >= names.len() {
                return Err(Error::MalformedFieldSpec(format!(
                    "{}: too many arguments",
                    self.name
                )));
            }
            if out[slot].is_some() {
                return Err(Error::MalformedFieldSpec(format!(
                    "{}: parameter `{}` given twice",
                    self.name, names[slot]
                )));
            }
            out[slot] = Some(*v);
        }
        Ok(out)
    }
}

fn positive(name: &str, key: &str, v: f64) -> Result<f64> {
    if v > 0.0 && v.is_finite() {
        Ok(v)
    } else {
        Err(Error::ParameterOutOfRange(format!(
            "{name}: {key} must be positive, got {v}"
        )))
    }
}

fn required(name: &str, key: &str, v: Option<f64>) -> Result<f64> {
    v.ok_or_else(|| Error::ParameterOutOfRange(format!("{name}: missing parameter `{key}`")))
}

#[inline]
fn bump_shape<T: Real>(t2: T) -> T {
    if t2 < T::one() {
        (-T::one() / (T::one() - t2)).exp()
    } else {
        T::zero()
    }
}

/// Builds a catalog field. `params` is needed only by `singular_spike`,
/// whose exponent is capped by the space parameters.
pub fn make_field<T: Real>(spec: &FieldSpec, params: Option<&SpaceParams<T>>) -> Result<ScalarField<T>> {
    let name = spec.name.as_str();
    let id = spec.to_string();
    match name {
        "zero" => {
            spec.bind(&[])?;
            Ok(ScalarField::zero())
        }
        "gaussian" => {
            spec.bind(&[])?;
            let meta = FieldMeta {
                support_radius: T::infinity(),
                smoothness: Smoothness::Smooth,
                lipschitz_bound: Some(T::lit(2f64.sqrt() * (-0.5f64).exp())),
                sup_bound: Some(T::one()),
                decay: Decay::Gaussian {
                    c: T::one(),
                    rate: T::one(),
                },
                singular_exponent: None,
                kink_radii: Vec::new(),
            };
            Ok(ScalarField::from_fn(id, meta, |x: &[T]| {
                let r = norm(x);
                (-(r * r)).exp()
            }))
        }
        "smooth_bump" => {
            let v = spec.bind(&["R"])?;
            let r = positive(name, "R", v[0].unwrap_or(1.0))?;
            let rt = T::lit(r);
            let meta = FieldMeta {
                lipschitz_bound: Some(T::lit(BUMP_LIPSCHITZ / r)),
                sup_bound: Some(T::lit((-1f64).exp())),
                ..FieldMeta::smooth_compact(rt)
            };
            Ok(ScalarField::from_fn(id, meta, move |x: &[T]| {
                let t = norm(x) / rt;
                bump_shape(t * t)
            }))
        }
        "hat_1d" => {
            spec.bind(&[])?;
            let meta = FieldMeta {
                support_radius: T::one(),
                smoothness: Smoothness::Continuous,
                lipschitz_bound: Some(T::one()),
                sup_bound: Some(T::one()),
                decay: Decay::Compact,
                singular_exponent: None,
                kink_radii: vec![T::zero(), T::one()],
            };
            Ok(ScalarField::from_fn(id, meta, |x: &[T]| {
                (T::one() - norm(x)).max(T::zero())
            }))
        }
        "polynomial_tail" => {
            let v = spec.bind(&["gamma"])?;
            let g = positive(name, "gamma", required(name, "gamma", v[0])?)?;
            let lip = g / (g + 1.0).sqrt() * ((g + 2.0) / (g + 1.0)).powf(-g / 2.0 - 1.0);
            let gt = T::lit(g);
            let meta = FieldMeta {
                support_radius: T::infinity(),
                smoothness: Smoothness::Smooth,
                lipschitz_bound: Some(T::lit(lip)),
                sup_bound: Some(T::one()),
                decay: Decay::Power {
                    c: T::one(),
                    gamma: gt,
                },
                singular_exponent: None,
                kink_radii: Vec::new(),
            };
            let e = -gt / T::two();
            Ok(ScalarField::from_fn(id, meta, move |x: &[T]| {
                let r = norm(x);
                (T::one() + r * r).powf(e)
            }))
        }
        "singular_spike" => {
            let v = spec.bind(&["gamma", "R"])?;
            let g = positive(name, "gamma", required(name, "gamma", v[0])?)?;
            let r = positive(name, "R", v[1].unwrap_or(1.0))?;
            let params = params.ok_or_else(|| {
                Error::ParameterOutOfRange(format!(
                    "{name}: space parameters are required to check the exponent cap"
                ))
            })?;
            let cap = params.spike_exponent_cap().as_f64();
            if !(g < cap) {
                return Err(Error::ParameterOutOfRange(format!(
                    "{name}: gamma = {g} must lie below (n - s*p - 2a)/p = {cap}"
                )));
            }
            let (gt, rt) = (T::lit(g), T::lit(r));
            let meta = FieldMeta {
                support_radius: rt,
                smoothness: Smoothness::MeasurableOnly,
                lipschitz_bound: None,
                sup_bound: None,
                decay: Decay::Compact,
                singular_exponent: Some(gt),
                kink_radii: vec![T::zero()],
            };
            let e = T::E();
            Ok(ScalarField::from_fn(id, meta, move |x: &[T]| {
                let d = norm(x);
                let t = d / rt;
                let b = bump_shape(t * t);
                if b == T::zero() {
                    return T::zero();
                }
                inv_pow(d, gt) * e * b
            }))
        }
        _ => Err(Error::UnknownCatalogId(spec.name.clone())),
    }
}
