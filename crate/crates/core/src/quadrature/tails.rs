//! Analytic bounds on the mass discarded beyond the truncation radius.

use crate::field::Decay;
use crate::scalar::sphere_area;

/// Upper bound for `int_R^inf r^m exp(-k r^2) dr`.
fn gaussian_radial_tail(m: f64, k: f64, r: f64) -> Option<f64> {
    let denom = 2.0 * k - (m - 1.0).max(0.0) / (r * r);
    if !(denom > 0.0) {
        return None;
    }
    Some(r.powf(m - 1.0) * (-k * r * r).exp() / denom)
}

/// Bound on `int_{|x| > R} |u|^q |x|^(-c) dx` from the decay class of `u`.
/// `support` is the support radius (`inf` when unbounded).
pub fn point_tail_bound(n: usize, decay: Decay<f64>, support: f64, q: f64, c: f64, r: f64) -> Option<f64> {
    if support <= r {
        return Some(0.0);
    }
    let area = sphere_area::<f64>(n);
    let nf = n as f64;
    match decay {
        Decay::Compact => None,
        Decay::Power { c: k, gamma } => {
            let e = gamma * q + c - nf;
            (e > 0.0 && r >= 1.0).then(|| area * k.powf(q) * r.powf(-e) / e)
        }
        Decay::Gaussian { c: k, rate } => {
            gaussian_radial_tail(nf - 1.0 - c, q * rate, r).map(|g| area * k.powf(q) * g)
        }
        Decay::Unknown => None,
    }
}

/// Bound on the part of `int int |u(x)-u(y)|^p |x-y|^(-n-sigma) |x|^(-alpha) |y|^(-beta)`
/// where both points lie beyond `R`, using `|u(x)-u(y)| <= min(L |x-y|, 2 M(|x|))`
/// for `|y| >= |x|`, with `M` the decay envelope. Needs `alpha, beta >= 0`.
#[allow(clippy::too_many_arguments)]
pub fn pair_tail_bound(
    n: usize,
    decay: Decay<f64>,
    support: f64,
    lipschitz: Option<f64>,
    p: f64,
    sigma: f64,
    alpha: f64,
    beta: f64,
    r: f64,
) -> Option<f64> {
    if support <= r {
        return Some(0.0);
    }
    let l = lipschitz?;
    if alpha < 0.0 || beta < 0.0 || !(sigma > 0.0 && sigma < p) {
        return None;
    }
    let area = sphere_area::<f64>(n);
    let nf = n as f64;
    let inner = area * l.powf(sigma) * (1.0 / (p - sigma) + 1.0 / sigma);
    let q = p - sigma;
    let radial = match decay {
        Decay::Power { c: k, gamma } => {
            let e = gamma * q + alpha + beta - nf;
            if !(e > 0.0 && r >= 1.0) {
                return None;
            }
            (2.0 * k).powf(q) * r.powf(-e) / e
        }
        Decay::Gaussian { c: k, rate } => {
            (2.0 * k).powf(q) * gaussian_radial_tail(nf - 1.0 - alpha - beta, q * rate, r)?
        }
        _ => return None,
    };
    Some(2.0 * inner * area * radial)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quadrature::grid::simpson;

    #[test]
    fn gaussian_tail_dominates() {
        for (m, k, r) in [(0.0, 1.0, 2.0), (2.0, 0.5, 3.0), (-0.5, 2.0, 1.5)] {
            let exact = simpson(|t: f64| t.powf(m) * (-k * t * t).exp(), r, r + 30.0, 200_000);
            let b = gaussian_radial_tail(m, k, r).unwrap();
            assert!(b >= exact && b < 3.0 * exact, "{m} {k} {r}: {b} vs {exact}");
        }
    }

    #[test]
    fn power_tail_closed_form() {
        // int_{|x|>10} (|x|^-3)^2 dx in n = 1 is 2 * 10^-5 / 5
        let b = point_tail_bound(1, Decay::Power { c: 1.0, gamma: 3.0 }, f64::INFINITY, 2.0, 0.0, 10.0).unwrap();
        assert!((b - 2.0 * 1e-5 / 5.0).abs() < 1e-18);
        assert_eq!(point_tail_bound(1, Decay::Compact, 1.0, 2.0, 0.0, 10.0), Some(0.0));
        assert_eq!(point_tail_bound(1, Decay::Power { c: 1.0, gamma: 0.2 }, f64::INFINITY, 2.0, 0.0, 10.0), None);
    }
}
