//! Deterministic one-dimensional rules: composite Simpson, geometrically
//! graded cell lists and Gauss-Legendre nodes.

use crate::error::{Error, Result};

/// Composite Simpson rule on `[a, b]` with `m` (rounded up to even) cells.
pub fn simpson<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, m: usize) -> f64 {
    let m = (m.max(2) + 1) & !1;
    let h = (b - a) / m as f64;
    let mut acc = f(a) + f(b);
    for i in 1..m {
        let w = if i % 2 == 1 { 4.0 } else { 2.0 };
        acc += w * f(a + i as f64 * h);
    }
    acc * h / 3.0
}

/// Simpson with cell doubling until the relative change drops below `rtol`.
pub fn simpson_adaptive<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, rtol: f64) -> Result<f64> {
    let mut m = 64;
    let mut prev = simpson(&f, a, b, m);
    while m < 1 << 22 {
        m *= 2;
        let cur = simpson(&f, a, b, m);
        if (cur - prev).abs() <= rtol * cur.abs().max(f64::MIN_POSITIVE) {
            return Ok(cur);
        }
        prev = cur;
    }
    Err(Error::QuadratureFailure(format!(
        "Simpson refinement on [{a}, {b}] did not reach relative {rtol}"
    )))
}

/// Offsets `0 = t_0 < ... < t_k = len` whose steps start at `h_min` and grow
/// by `ratio` up to `h_max`.
fn march(len: f64, h_min: f64, h_max: f64, ratio: f64) -> Vec<f64> {
    let mut pts = vec![0.0];
    if len <= 0.0 {
        return pts;
    }
    let mut h = h_min.min(h_max).min(len);
    let mut x = 0.0;
    loop {
        if x + h >= len - 0.5 * h {
            pts.push(len);
            return pts;
        }
        x += h;
        pts.push(x);
        h = (h * ratio).min(h_max);
    }
}

/// Breakpoints of a cell partition of `[a, b]`, graded geometrically toward
/// whichever endpoints are flagged.
pub fn graded_points(
    a: f64,
    b: f64,
    grade_a: bool,
    grade_b: bool,
    h_max: f64,
    ratio: f64,
    h_min: f64,
) -> Vec<f64> {
    if !(b > a) {
        return vec![a];
    }
    let len = b - a;
    let uniform = |l: f64| march(l, h_max, h_max, 1.0);
    match (grade_a, grade_b) {
        (false, false) => uniform(len).into_iter().map(|t| a + t).collect(),
        (true, false) => march(len, h_min, h_max, ratio)
            .into_iter()
            .map(|t| a + t)
            .collect(),
        (false, true) => {
            let mut v: Vec<f64> = march(len, h_min, h_max, ratio)
                .into_iter()
                .map(|t| b - t)
                .collect();
            v.reverse();
            v
        }
        (true, true) => {
            let m = 0.5 * len;
            let left = march(m, h_min, h_max, ratio);
            let mut pts: Vec<f64> = left.iter().map(|t| a + t).collect();
            let right = march(len - m, h_min, h_max, ratio);
            pts.pop();
            pts.extend(right.iter().rev().map(|t| b - t));
            pts
        }
    }
}

/// Gauss-Legendre nodes and weights on `[-1, 1]`, by Newton iteration on
/// the Legendre recurrence.
pub fn gauss_legendre(m: usize) -> Vec<(f64, f64)> {
    let m = m.max(1);
    let mut out = Vec::with_capacity(m);
    for i in 0..m {
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (m as f64 + 0.5)).cos();
        let mut dp = 1.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, x);
            for k in 2..=m {
                let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            dp = m as f64 * (x * p1 - p0) / (x * x - 1.0);
            let dx = p1 / dp;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        out.push((x, 2.0 / ((1.0 - x * x) * dp * dp)));
    }
    out.reverse();
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn simpson_is_exact_on_cubics() {
        let v = simpson(|x| x * x * x - x, 0.0, 2.0, 2);
        assert_relative_eq!(v, 2.0, epsilon = 1e-14);
    }

    #[test]
    fn adaptive_integrates_bump() {
        let v = simpson_adaptive(
            |t| if t.abs() < 1.0 { (-1.0 / (1.0 - t * t)).exp() } else { 0.0 },
            -1.0,
            1.0,
            1e-12,
        )
        .unwrap();
        assert_relative_eq!(v, 0.443_993_816_168_078_65, max_relative = 1e-10);
    }

    #[test]
    fn graded_partition_covers_interval() {
        for (ga, gb) in [(false, false), (true, false), (false, true), (true, true)] {
            let p = graded_points(-1.0, 2.0, ga, gb, 0.05, 1.15, 1e-8);
            assert_eq!(p[0], -1.0);
            assert_eq!(*p.last().unwrap(), 2.0);
            assert!(p.windows(2).all(|w| w[1] > w[0]));
            assert!(p.windows(2).all(|w| w[1] - w[0] <= 0.05 * 1.5 + 1e-12));
            if ga {
                assert!((p[1] - p[0] - 1e-8).abs() < 1e-15);
            }
            if gb {
                assert!((p[p.len() - 1] - p[p.len() - 2] - 1e-8).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn gauss_legendre_weights_sum_to_two() {
        let r = gauss_legendre(8);
        let s: f64 = r.iter().map(|(_, w)| w).sum();
        assert_relative_eq!(s, 2.0, epsilon = 1e-13);
        let m: f64 = r.iter().map(|(x, w)| w * x.powi(14)).sum();
        assert_relative_eq!(m, 2.0 / 15.0, epsilon = 1e-13);
    }
}
