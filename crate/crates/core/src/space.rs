//! Space parameters, admissible ranges and the power weights.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::{inv_pow, norm, pow_abs, Real};

/// Validated `(n, s, p, a)` together with the critical exponent `p*_s` and
/// the point-weight exponent `b = 2 a p*_s / p`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpaceParams<T = f64> {
    n: usize,
    s: T,
    p: T,
    a: T,
    p_star: T,
    b: T,
}

impl<T: Real> SpaceParams<T> {
    /// Checks the admissible range and derives `p*_s` and `b`.
    ///
    /// All comparisons are strict where the range is open; boundary values
    /// are rejected.
    pub fn new(n: usize, s: T, p: T, a: T) -> Result<Self> {
        if n == 0 {
            return Err(Error::range("n >= 1", "dimension must be positive"));
        }
        check_order_and_exponent(s, p)?;
        let nt = T::lit(n as f64);
        let sp = s * p;
        if !(sp < nt) {
            return Err(Error::range(
                "s*p < n",
                format!("s*p = {} is not below n = {n}; p*_s = np/(n-sp) is undefined", sp),
            ));
        }
        let upper = (nt - sp) / T::two();
        if !(a >= T::zero() && a < upper) {
            return Err(Error::range(
                "0 <= a < (n - s*p)/2",
                format!("a = {a} lies outside [0, {upper})"),
            ));
        }
        let p_star = nt * p / (nt - sp);
        let b = T::two() * a * nt / (nt - sp);
        Ok(Self {
            n,
            s,
            p,
            a,
            p_star,
            b,
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }
    pub fn s(&self) -> T {
        self.s
    }
    pub fn p(&self) -> T {
        self.p
    }
    pub fn a(&self) -> T {
        self.a
    }
    /// Critical exponent `np / (n - sp)`.
    pub fn p_star(&self) -> T {
        self.p_star
    }
    /// Exponent of the point weight `|x|^b`.
    pub fn b(&self) -> T {
        self.b
    }

    /// The seminorm kernel with equal weights `alpha = beta = a`.
    pub fn kernel(&self) -> Kernel<T> {
        Kernel {
            n: self.n,
            s: self.s,
            p: self.p,
            alpha: self.a,
            beta: self.a,
        }
    }

    /// Re-validates the raw values; used to check idempotence.
    pub fn revalidate(&self) -> Result<Self> {
        Self::new(self.n, self.s, self.p, self.a)
    }

    /// Exponent of the largest power singularity an admissible
    /// `singular_spike` may carry: `(n - sp - 2a) / p`.
    pub fn spike_exponent_cap(&self) -> T {
        (T::lit(self.n as f64) - self.s * self.p - T::two() * self.a) / self.p
    }
}

fn check_order_and_exponent<T: Real>(s: T, p: T) -> Result<()> {
    if !(s > T::zero() && s < T::one()) {
        return Err(Error::range("0 < s < 1", format!("s = {s}")));
    }
    if !(p > T::one()) || !p.is_finite() {
        return Err(Error::range("1 < p < inf", format!("p = {p}")));
    }
    Ok(())
}

/// Two-weight exponents `(alpha, beta)` with `-sp < alpha, beta < n` and
/// `alpha + beta < n`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GeneralWeightParams<T = f64> {
    pub alpha: T,
    pub beta: T,
}

impl<T: Real> GeneralWeightParams<T> {
    pub fn new(params: &SpaceParams<T>, alpha: T, beta: T) -> Result<Self> {
        check_general(params.n, params.s, params.p, alpha, beta)?;
        Ok(Self { alpha, beta })
    }
}

fn check_general<T: Real>(n: usize, s: T, p: T, alpha: T, beta: T) -> Result<()> {
    let nt = T::lit(n as f64);
    let lo = -(s * p);
    if !(alpha > lo && alpha < nt) {
        return Err(Error::range(
            "-s*p < alpha < n",
            format!("alpha = {alpha} outside ({lo}, {nt})"),
        ));
    }
    if !(beta > lo && beta < nt) {
        return Err(Error::range(
            "-s*p < beta < n",
            format!("beta = {beta} outside ({lo}, {nt})"),
        ));
    }
    if !(alpha + beta < nt) {
        return Err(Error::range(
            "alpha + beta < n",
            format!("alpha + beta = {} is not below n = {nt}", alpha + beta),
        ));
    }
    Ok(())
}

/// Parameters of the two-weight Gagliardo energy
/// `|u(x)-u(y)|^p |x-y|^(-n-sp) |x|^(-alpha) |y|^(-beta)`.
///
/// Only the order, the integrability exponent and the two-weight condition
/// are required here; the critical exponent plays no role, so kernels exist
/// for `s*p >= n` as well.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Kernel<T = f64> {
    n: usize,
    s: T,
    p: T,
    alpha: T,
    beta: T,
}

impl<T: Real> Kernel<T> {
    pub fn new(n: usize, s: T, p: T, alpha: T, beta: T) -> Result<Self> {
        if n == 0 {
            return Err(Error::range("n >= 1", "dimension must be positive"));
        }
        check_order_and_exponent(s, p)?;
        check_general(n, s, p, alpha, beta)?;
        Ok(Self {
            n,
            s,
            p,
            alpha,
            beta,
        })
    }

    /// Kernel for validated space parameters and validated general weights.
    pub fn general(params: &SpaceParams<T>, weights: &GeneralWeightParams<T>) -> Self {
        Self {
            n: params.n,
            s: params.s,
            p: params.p,
            alpha: weights.alpha,
            beta: weights.beta,
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }
    pub fn s(&self) -> T {
        self.s
    }
    pub fn p(&self) -> T {
        self.p
    }
    pub fn alpha(&self) -> T {
        self.alpha
    }
    pub fn beta(&self) -> T {
        self.beta
    }
    pub fn is_symmetric(&self) -> bool {
        self.alpha == self.beta
    }

    /// Exponent `n/p + s` of the difference-quotient lift.
    pub fn lift_exponent(&self) -> T {
        T::lit(self.n as f64) / self.p + self.s
    }

    /// Default near-diagonal radial index `p (1 - s)`.
    pub fn default_near_exponent(&self) -> T {
        self.p * (T::one() - self.s)
    }

    /// Default far-field Pareto index `s p`.
    pub fn default_tail_exponent(&self) -> T {
        self.s * self.p
    }

    /// Measure density `|x|^(-alpha) |y|^(-beta)`.
    #[inline]
    pub fn inverse_weight(&self, x: &[T], y: &[T]) -> T {
        inv_pow(norm(x), self.alpha) * inv_pow(norm(y), self.beta)
    }
}

/// The two instantiations of the abstract weight `Theta`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum WeightKind {
    /// `Theta(x, y) = |x|^a |y|^a` on `R^(2n)`, shift `z -> (z, z)`.
    PairWeight,
    /// `Theta(x) = |x|^b` on `R^n`, shift `z -> z`.
    PointWeight,
}

impl WeightKind {
    /// Dimension `N` of the space the weight lives on.
    pub fn ambient_dim(self, n: usize) -> usize {
        match self {
            WeightKind::PairWeight => 2 * n,
            WeightKind::PointWeight => n,
        }
    }

    /// Exponent carried by each weighted block.
    pub fn block_exponent<T: Real>(self, params: &SpaceParams<T>) -> T {
        match self {
            WeightKind::PairWeight => params.a(),
            WeightKind::PointWeight => params.b(),
        }
    }

    /// Homogeneity degree of `Theta` under `X -> lambda X`.
    pub fn total_exponent<T: Real>(self, params: &SpaceParams<T>) -> T {
        match self {
            WeightKind::PairWeight => T::two() * params.a(),
            WeightKind::PointWeight => params.b(),
        }
    }

    /// Writes `X + shift(z)` into `out`.
    pub fn shifted<T: Real>(self, point: &[T], z: &[T], out: &mut [T]) {
        let n = z.len();
        for (i, o) in out.iter_mut().enumerate() {
            *o = point[i] + z[i % n];
        }
    }
}

/// `Theta` at a point of `R^N`. Zero-exponent weights are identically one.
pub fn weight_value<T: Real>(kind: WeightKind, params: &SpaceParams<T>, point: &[T]) -> T {
    let n = params.n();
    debug_assert_eq!(point.len(), kind.ambient_dim(n));
    let e = kind.block_exponent(params);
    match kind {
        WeightKind::PairWeight => pow_abs(norm(&point[..n]), e) * pow_abs(norm(&point[n..]), e),
        WeightKind::PointWeight => pow_abs(norm(point), e),
    }
}

/// `1 / Theta` at a point, `+inf` on the singular set when the exponent is
/// positive.
pub fn inverse_weight_value<T: Real>(kind: WeightKind, params: &SpaceParams<T>, point: &[T]) -> T {
    let n = params.n();
    let e = kind.block_exponent(params);
    match kind {
        WeightKind::PairWeight => inv_pow(norm(&point[..n]), e) * inv_pow(norm(&point[n..]), e),
        WeightKind::PointWeight => inv_pow(norm(point), e),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn accepts_interior_point() {
        let sp = SpaceParams::<f64>::new(2, 0.5, 2.0, 0.3).unwrap();
        assert_eq!(sp.p_star(), 4.0);
        assert!((sp.b() - 1.2).abs() < 1e-15);
    }

    #[test]
    fn rejects_critical_order() {
        let err = SpaceParams::new(1, 0.5, 2.0, 0.0).unwrap_err();
        assert!(matches!(err, Error::RangeViolation { constraint: "s*p < n", .. }));
    }

    #[test]
    fn rejects_weight_on_boundary() {
        let err = SpaceParams::new(3, 0.5, 2.0, 1.0).unwrap_err();
        assert!(matches!(
            err,
            Error::RangeViolation {
                constraint: "0 <= a < (n - s*p)/2",
                ..
            }
        ));
        assert!(SpaceParams::new(3, 0.5, 2.0, 0.999).is_ok());
        assert!(SpaceParams::new(2, 0.5, 2.0, -0.1).is_err());
        assert!(SpaceParams::new(2, 1.0, 1.5, 0.0).is_err());
        assert!(SpaceParams::new(2, 0.5, 1.0, 0.0).is_err());
        assert!(SpaceParams::new(2, f64::NAN, 2.0, 0.0).is_err());
    }

    #[test]
    fn general_weights() {
        let sp = SpaceParams::new(2, 0.5, 2.0, 0.3).unwrap();
        assert!(GeneralWeightParams::new(&sp, 0.3, 0.3).is_ok());
        let err = GeneralWeightParams::new(&sp, 1.5, 1.0).unwrap_err();
        assert!(matches!(err, Error::RangeViolation { constraint: "alpha + beta < n", .. }));
        assert!(GeneralWeightParams::new(&sp, -1.0, 0.0).is_err());
        assert!(GeneralWeightParams::new(&sp, 0.0, 2.0).is_err());
    }

    #[test]
    fn kernel_exists_beyond_critical_order() {
        // The seminorm needs only the two-weight condition.
        let k = Kernel::new(1, 0.5, 2.0, 0.2, 0.2).unwrap();
        assert_eq!(k.lift_exponent(), 1.0);
        assert!(Kernel::new(1, 0.5, 2.0, 0.6, 0.6).is_err());
    }

    #[test]
    fn weight_examples() {
        let sp = SpaceParams::new(2, 0.5, 2.0, 0.0).unwrap();
        assert_eq!(weight_value(WeightKind::PairWeight, &sp, &[0.3, -1.0, 0.0, 0.0]), 1.0);
        let sp = SpaceParams::new(2, 0.5, 2.0, 0.3).unwrap();
        assert_eq!(weight_value(WeightKind::PointWeight, &sp, &[1.0, 0.0]), 1.0);
        let w = weight_value(WeightKind::PairWeight, &sp, &[2.0, 0.0, 0.0, 2.0]);
        assert!((w - 2f64.powf(0.6)).abs() < 1e-14);
        assert_eq!(
            inverse_weight_value(WeightKind::PointWeight, &sp, &[0.0, 0.0]),
            f64::INFINITY
        );
    }

    #[test]
    fn single_precision_params() {
        let sp = SpaceParams::<f32>::new(2, 0.5, 2.0, 0.3).unwrap();
        assert_eq!(sp.p_star(), 4.0f32);
    }

    fn valid_params() -> impl Strategy<Value = SpaceParams<f64>> {
        (1usize..5, 0.01f64..0.99, 1.01f64..6.0, 0.0f64..1.0).prop_filter_map(
            "admissible",
            |(n, s, p, t)| {
                let nt = n as f64;
                if s * p >= nt {
                    return None;
                }
                SpaceParams::new(n, s, p, t * (nt - s * p) / 2.0).ok()
            },
        )
    }

    proptest! {
        #[test]
        fn derived_exponents_ordered(sp in valid_params()) {
            prop_assert!(sp.p() < sp.p_star());
            prop_assert!(sp.b() < sp.n() as f64);
            prop_assert!(2.0 * sp.a() < sp.n() as f64 - sp.s() * sp.p());
        }

        #[test]
        fn validation_idempotent(sp in valid_params()) {
            prop_assert_eq!(sp.revalidate().unwrap(), sp);
        }

        #[test]
        fn weights_homogeneous(sp in valid_params(), lambda in 0.1f64..10.0,
                               raw in proptest::collection::vec(-3.0f64..3.0, 8)) {
            let n = sp.n();
            let x: Vec<f64> = raw.iter().cycle().take(2 * n).copied().collect();
            prop_assume!(norm(&x[..n]) > 1e-3 && norm(&x[n..]) > 1e-3);
            for kind in [WeightKind::PairWeight, WeightKind::PointWeight] {
                let pt = &x[..kind.ambient_dim(n)];
                let scaled: Vec<f64> = pt.iter().map(|v| v * lambda).collect();
                let lhs = weight_value(kind, &sp, &scaled);
                let rhs = lambda.powf(kind.total_exponent(&sp)) * weight_value(kind, &sp, pt);
                prop_assert!((lhs - rhs).abs() <= 1e-10 * rhs.abs().max(1.0));
            }
        }
    }
}
