//! Mollifier and cutoff profiles.

use std::fmt;
use std::sync::{Arc, OnceLock};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quadrature::grid::{simpson, simpson_adaptive};
use crate::scalar::{norm, sphere_area, Real};

use super::{Decay, FieldMeta, ScalarField, Smoothness};

pub type RadialFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

fn bump(r: f64) -> f64 {
    if r.abs() < 1.0 {
        (-1.0 / (1.0 - r * r)).exp()
    } else {
        0.0
    }
}

fn bump_derivative(r: f64) -> f64 {
    if r.abs() < 1.0 {
        let q = 1.0 - r * r;
        -2.0 * r / (q * q) * (-1.0 / q).exp()
    } else {
        0.0
    }
}

/// Radial mollifier `eta(x) = c_n * shape(|x|)` supported in the unit ball,
/// with `c_n` chosen so that `eta` has unit mass in `R^n`.
#[derive(Clone)]
pub struct MollifierProfile {
    id: String,
    n: usize,
    shape: RadialFn,
    shape_derivative: RadialFn,
    normalization: f64,
}

impl fmt::Debug for MollifierProfile {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("MollifierProfile")
            .field("id", &self.id)
            .field("n", &self.n)
            .field("normalization", &self.normalization)
            .finish()
    }
}

impl MollifierProfile {
    /// `exp(-1/(1-r^2))` on `[0, 1)`.
    pub fn standard(n: usize) -> Self {
        Self::custom("exp_bump", n, Arc::new(bump), Arc::new(bump_derivative))
            .expect("the exponential bump is normalizable")
    }

    /// The normalized indicator of the unit ball; convolving with its
    /// rescaling takes ball averages.
    pub fn flat(n: usize) -> Self {
        Self::custom(
            "flat",
            n,
            Arc::new(|r: f64| if r.abs() <= 1.0 { 1.0 } else { 0.0 }),
            Arc::new(|_| 0.0),
        )
        .expect("the indicator is normalizable")
    }

    /// A profile from a shape and its derivative. Only non-negativity and
    /// support in `[0, 1]` are assumed; monotonicity is reported by
    /// [`MollifierProfile::is_radially_decreasing`] and not enforced, so
    /// non-monotone controls can be built.
    pub fn custom(id: &str, n: usize, shape: RadialFn, shape_derivative: RadialFn) -> Result<Self> {
        if n == 0 {
            return Err(Error::ParameterOutOfRange("dimension must be positive".into()));
        }
        let nn = n as i32;
        let s = shape.clone();
        let radial_mass = simpson_adaptive(move |r| r.powi(nn - 1) * s(r), 0.0, 1.0, 1e-12)?;
        let mass = sphere_area::<f64>(n) * radial_mass;
        if !(mass > 0.0) || !mass.is_finite() {
            return Err(Error::ParameterOutOfRange(format!(
                "mollifier shape `{id}` has mass {mass}"
            )));
        }
        Ok(Self {
            id: id.to_string(),
            n,
            shape,
            shape_derivative,
            normalization: 1.0 / mass,
        })
    }

    /// The same shape normalized in another dimension.
    pub fn for_dimension(&self, n: usize) -> Result<Self> {
        if n == self.n {
            return Ok(self.clone());
        }
        Self::custom(&self.id, n, self.shape.clone(), self.shape_derivative.clone())
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn normalization_constant(&self) -> f64 {
        self.normalization
    }

    /// `eta` as a function of the radius.
    #[inline]
    pub fn radial(&self, r: f64) -> f64 {
        if r >= 1.0 {
            0.0
        } else {
            self.normalization * (self.shape)(r)
        }
    }

    #[inline]
    pub fn derivative(&self, r: f64) -> f64 {
        if r >= 1.0 {
            0.0
        } else {
            self.normalization * (self.shape_derivative)(r)
        }
    }

    pub fn is_radially_decreasing(&self, samples: usize) -> bool {
        let m = samples.max(2);
        (0..m).all(|i| {
            let r0 = i as f64 / m as f64;
            let r1 = (i + 1) as f64 / m as f64;
            self.radial(r1) <= self.radial(r0)
        })
    }

    /// `int_{B_1} eta` by radial quadrature.
    pub fn mass(&self) -> f64 {
        let nn = self.n as i32;
        sphere_area::<f64>(self.n) * simpson(|r| r.powi(nn - 1) * self.radial(r), 0.0, 1.0, 4096)
    }
}

/// `eta_eps(x) = eps^(-n) eta(x / eps)`.
#[derive(Debug, Clone)]
pub struct ScaledMollifier {
    profile: Arc<MollifierProfile>,
    epsilon: f64,
    scale: f64,
}

impl ScaledMollifier {
    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn n(&self) -> usize {
        self.profile.n
    }

    pub fn profile(&self) -> &MollifierProfile {
        &self.profile
    }

    /// Value at radius `r = |z|`.
    #[inline]
    pub fn at_radius(&self, r: f64) -> f64 {
        self.scale * self.profile.radial(r / self.epsilon)
    }

    #[inline]
    pub fn eval<T: Real>(&self, z: &[T]) -> T {
        T::lit(self.at_radius(norm(z).as_f64()))
    }

    pub fn to_field<T: Real>(&self) -> ScalarField<T> {
        let me = self.clone();
        let meta = FieldMeta {
            sup_bound: Some(T::lit(self.at_radius(0.0))),
            ..FieldMeta::smooth_compact(T::lit(self.epsilon))
        };
        ScalarField::from_fn(
            format!("eta_{}({})", self.epsilon, self.profile.id),
            meta,
            move |z: &[T]| me.eval(z),
        )
    }
}

/// The rescaled mollifier; renormalizes the profile if `n` differs from the
/// dimension it was built for.
pub fn mollifier_eta(profile: &MollifierProfile, epsilon: f64, n: usize) -> Result<ScaledMollifier> {
    if !(epsilon > 0.0) || !epsilon.is_finite() {
        return Err(Error::ParameterOutOfRange(format!(
            "epsilon must be positive, got {epsilon}"
        )));
    }
    let profile = profile.for_dimension(n)?;
    Ok(ScaledMollifier {
        profile: Arc::new(profile),
        epsilon,
        scale: epsilon.powi(-(n as i32)),
    })
}

const CUTOFF_TABLE: usize = 10_000;

struct CutoffTable {
    values: Vec<f64>,
    slopes: Vec<f64>,
    lipschitz: f64,
}

fn transition(t: f64) -> f64 {
    if t <= 0.0 || t >= 1.0 {
        0.0
    } else {
        (-1.0 / (t * (1.0 - t))).exp()
    }
}

fn cutoff_table() -> &'static CutoffTable {
    static TABLE: OnceLock<CutoffTable> = OnceLock::new();
    TABLE.get_or_init(|| {
        let h = 1.0 / CUTOFF_TABLE as f64;
        let mut cumulative = Vec::with_capacity(CUTOFF_TABLE + 1);
        cumulative.push(0.0);
        let mut acc = 0.0;
        for i in 0..CUTOFF_TABLE {
            let a = i as f64 * h;
            acc += simpson(transition, a, a + h, 8);
            cumulative.push(acc);
        }
        let total = acc;
        let values = cumulative.iter().map(|c| 1.0 - c / total).collect();
        let values: Vec<f64> = values;
        // Fritsch-Carlson limiting keeps the interpolant monotone
        let secant = |i: usize| (values[i + 1] - values[i]) / h;
        let slopes = (0..=CUTOFF_TABLE)
            .map(|i| {
                let m: f64 = -transition(i as f64 * h) / total;
                let mut cap = f64::INFINITY;
                if i > 0 {
                    cap = cap.min(3.0 * secant(i - 1).abs());
                }
                if i < CUTOFF_TABLE {
                    cap = cap.min(3.0 * secant(i).abs());
                }
                -m.abs().min(cap)
            })
            .collect();
        CutoffTable {
            values,
            slopes,
            lipschitz: transition(0.5) / total,
        }
    })
}

/// Smoothstep cutoff: 1 on `B_1`, 0 outside `B_2`, built from the integral
/// of the bump `exp(-1/(t(1-t)))` and tabulated on `10^4` cells with cubic
/// Hermite interpolation.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CutoffProfile;

impl CutoffProfile {
    pub fn standard() -> Self {
        CutoffProfile
    }

    /// Profile value at radius `r`.
    pub fn at_radius(&self, r: f64) -> f64 {
        if r <= 1.0 {
            return 1.0;
        }
        if r >= 2.0 {
            return 0.0;
        }
        let tab = cutoff_table();
        let h = 1.0 / CUTOFF_TABLE as f64;
        let t = r - 1.0;
        let i = ((t / h) as usize).min(CUTOFF_TABLE - 1);
        let u = (t - i as f64 * h) / h;
        let (y0, y1) = (tab.values[i], tab.values[i + 1]);
        let (m0, m1) = (tab.slopes[i] * h, tab.slopes[i + 1] * h);
        let u2 = u * u;
        let u3 = u2 * u;
        let v = (2.0 * u3 - 3.0 * u2 + 1.0) * y0
            + (u3 - 2.0 * u2 + u) * m0
            + (-2.0 * u3 + 3.0 * u2) * y1
            + (u3 - u2) * m1;
        v.clamp(0.0, 1.0)
    }

    pub fn base<T: Real>(&self, x: &[T]) -> T {
        T::lit(self.at_radius(norm(x).as_f64()))
    }

    /// Bound on the radial slope.
    pub fn lipschitz(&self) -> f64 {
        cutoff_table().lipschitz
    }
}

/// `tau_j(x) = tau(x / j)`.
pub fn cutoff_tau_j<T: Real>(profile: &CutoffProfile, j: f64) -> Result<ScalarField<T>> {
    if !(j > 0.0) || !j.is_finite() {
        return Err(Error::ParameterOutOfRange(format!(
            "cutoff scale j must be positive, got {j}"
        )));
    }
    let prof = *profile;
    let meta = FieldMeta {
        support_radius: T::lit(2.0 * j),
        smoothness: Smoothness::Smooth,
        lipschitz_bound: Some(T::lit(prof.lipschitz() * 1.001 / j)),
        sup_bound: Some(T::one()),
        decay: Decay::Compact,
        singular_exponent: None,
        kink_radii: Vec::new(),
    };
    Ok(ScalarField::from_fn(format!("tau_{j}"), meta, move |x: &[T]| {
        T::lit(prof.at_radius(norm(x).as_f64() / j))
    }))
}

/// Both sides of `int_0^1 r^n |eta'| dr = n int_0^1 r^(n-1) eta dr`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IdentityResidual {
    pub lhs: f64,
    pub rhs: f64,
    /// `|lhs - rhs|`, with the absolute value of the derivative.
    pub residual: f64,
    /// `|int r^n eta' + n int r^(n-1) eta|`, which needs only `eta(1) = 0`.
    pub by_parts_residual: f64,
}

/// Evaluates the radial identity with composite Simpson at `resolution`
/// cells, failing when halving the resolution moves either side by more
/// than `10^-6` relative.
pub fn eta_derivative_identity_check(
    profile: &MollifierProfile,
    n: usize,
    resolution: usize,
) -> Result<IdentityResidual> {
    if n == 0 || resolution < 4 {
        return Err(Error::ParameterOutOfRange(format!(
            "identity check needs n >= 1 and resolution >= 4 (n = {n}, resolution = {resolution})"
        )));
    }
    let k = n as i32;
    let lhs_f = |r: f64| r.powi(k) * profile.derivative(r).abs();
    let rhs_f = |r: f64| n as f64 * r.powi(k - 1) * profile.radial(r);
    let signed_f = |r: f64| r.powi(k) * profile.derivative(r);
    let lhs = simpson(lhs_f, 0.0, 1.0, resolution);
    let rhs = simpson(rhs_f, 0.0, 1.0, resolution);
    let signed = simpson(signed_f, 0.0, 1.0, resolution);
    let lhs_c = simpson(lhs_f, 0.0, 1.0, resolution / 2);
    let rhs_c = simpson(rhs_f, 0.0, 1.0, resolution / 2);
    let scale = lhs.abs().max(rhs.abs()).max(1e-300);
    let drift = (lhs - lhs_c).abs().max((rhs - rhs_c).abs());
    if drift > 1e-6 * scale {
        return Err(Error::QuadratureFailure(format!(
            "radial integrals moved by {drift:.3e} between {} and {resolution} cells",
            resolution / 2
        )));
    }
    Ok(IdentityResidual {
        lhs,
        rhs,
        residual: (lhs - rhs).abs(),
        by_parts_residual: (signed + rhs).abs(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    /// Vanishes at 1 but oscillates on the way.
    fn wavy() -> MollifierProfile {
        MollifierProfile::custom(
            "wavy",
            1,
            Arc::new(|r: f64| if r < 1.0 { (1.0 - r * r).powi(2) * (1.0 + 0.8 * (6.0 * r).cos()) } else { 0.0 }),
            Arc::new(|r: f64| {
                if r < 1.0 {
                    let q = 1.0 - r * r;
                    -4.0 * r * q * (1.0 + 0.8 * (6.0 * r).cos()) - q * q * 4.8 * (6.0 * r).sin()
                } else {
                    0.0
                }
            }),
        )
        .unwrap()
    }

    #[test]
    fn standard_profile_has_unit_mass() {
        for n in 1..=4 {
            let p = MollifierProfile::standard(n);
            assert_relative_eq!(p.mass(), 1.0, max_relative = 1e-8);
            assert!(p.is_radially_decreasing(1000));
            assert_eq!(p.radial(1.0), 0.0);
        }
        let p = MollifierProfile::standard(1);
        assert_relative_eq!(p.normalization_constant(), 1.0 / 0.443_993_816_168_078_65, max_relative = 1e-10);
    }

    #[test]
    fn scaled_mollifier() {
        let p = MollifierProfile::standard(2);
        let e1 = mollifier_eta(&p, 1.0, 2).unwrap();
        assert_eq!(e1.at_radius(0.3), p.radial(0.3));
        let e = mollifier_eta(&p, 0.25, 2).unwrap();
        assert_eq!(e.eval(&[0.2, 0.16]), 0.0);
        let mass = sphere_area::<f64>(2) * simpson(|r| r * e.at_radius(r), 0.0, 0.25, 4096);
        assert_relative_eq!(mass, 1.0, max_relative = 1e-8);
        assert!(mollifier_eta(&p, 0.0, 2).is_err());
        let e3 = mollifier_eta(&p, 0.5, 3).unwrap();
        assert_eq!(e3.n(), 3);
    }

    #[test]
    fn cutoff_shape() {
        let c = CutoffProfile::standard();
        assert_eq!(c.at_radius(0.0), 1.0);
        assert_eq!(c.at_radius(1.0), 1.0);
        assert_eq!(c.at_radius(2.0), 0.0);
        assert_relative_eq!(c.at_radius(1.5), 0.5, epsilon = 1e-12);
        let mut prev = 1.0;
        for i in 0..=2000 {
            let v = c.at_radius(1.0 + i as f64 / 2000.0);
            assert!((0.0..=1.0).contains(&v));
            assert!(v <= prev);
            prev = v;
        }
        let tau = cutoff_tau_j::<f64>(&c, 2.0).unwrap();
        assert_eq!(tau.eval(&[1.9]), 1.0);
        assert_eq!(tau.eval(&[-4.0]), 0.0);
        let mid = tau.eval(&[3.0]);
        assert!(mid > 0.0 && mid < 1.0);
        assert!(cutoff_tau_j::<f64>(&c, -1.0).is_err());
    }

    #[test]
    fn cutoff_is_lipschitz() {
        let c = CutoffProfile::standard();
        let l = c.lipschitz();
        for i in 0..5000 {
            let r = 1.0 + i as f64 / 5000.0;
            let h = 1e-5;
            assert!((c.at_radius(r + h) - c.at_radius(r)).abs() <= l * h * 1.001);
        }
    }

    #[test]
    fn derivative_identity() {
        for n in [1, 2] {
            let p = MollifierProfile::standard(n);
            let r = eta_derivative_identity_check(&p, n, 10_000).unwrap();
            assert!(r.residual < 1e-6, "n = {n}: {r:?}");
            assert!(r.by_parts_residual < 1e-6);
        }
    }

    #[test]
    fn derivative_identity_negative_control() {
        let w = wavy();
        assert!(!w.is_radially_decreasing(1000));
        let r = eta_derivative_identity_check(&w, 1, 10_000).unwrap();
        assert!(r.by_parts_residual < 1e-6, "{r:?}");
        assert!(r.residual > 1e-2, "{r:?}");
        assert!(matches!(
            eta_derivative_identity_check(&w, 1, 8),
            Err(Error::QuadratureFailure(_))
        ));
    }
}
