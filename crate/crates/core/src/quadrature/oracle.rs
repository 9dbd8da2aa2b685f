//! Deterministic ground truth in one dimension.
//!
//! Pair integrals are written in the diagonal coordinates `(x, z)` with
//! `y = x + z`, `z > 0`:
//!
//! `int int G = int_0^inf dz int dx [G(x, x+z) + G(x+z, x)]`.
//!
//! The `z` axis is graded geometrically toward the diagonal up to a cutoff
//! `Z`; beyond it the substitution `w = z^(-sigma)` turns the kernel tail
//! `z^(-1-sigma)` into a bounded integrand. Each inner `x` integral is split
//! at every breakpoint of the integrand and graded toward the weight
//! singularities. All cells use the midpoint rule.

use rayon::prelude::*;

use super::grid::graded_points;
use super::{Estimate, QuadratureSpec};
use crate::error::{Error, Result};

pub const ORACLE_GRADING_RATIO: f64 = 1.15;
pub const ORACLE_SMALLEST_CELL: f64 = 1e-8;

/// Integrands the oracle understands.
pub enum OracleIntegrand<'a> {
    /// `int_R f(x) |x|^(-c) dx`, with `f = 0` outside `[-half_width, half_width]`.
    Point {
        f: &'a (dyn Fn(f64) -> f64 + Sync),
        c: f64,
        half_width: f64,
        /// Points where `f` is not smooth.
        breakpoints: Vec<f64>,
        /// Bound on the mass beyond `half_width`, if it was truncated.
        tail_bound: Option<f64>,
    },
    /// `int int g(x, y) |x|^(-alpha) |y|^(-beta) dx dy`, with `g(x, y) = 0`
    /// when both `|x|` and `|y|` exceed `half_width`.
    Pair {
        g: &'a (dyn Fn(f64, f64) -> f64 + Sync),
        alpha: f64,
        beta: f64,
        half_width: f64,
        /// Points where `g` is not smooth in either argument.
        breakpoints: Vec<f64>,
        /// `z^(1 + sigma) int dx g(x, x+z)` stays bounded as `z -> inf`.
        far_exponent: f64,
        /// Grade toward the weight singularities even when the weights are flat.
        singular_origin: bool,
        tail_bound: Option<f64>,
    },
}

fn midpoint_graded<F: Fn(f64) -> f64>(f: &F, pts: &[f64]) -> f64 {
    pts.windows(2)
        .map(|w| {
            let h = w[1] - w[0];
            h * f(0.5 * (w[0] + w[1]))
        })
        .sum()
}

fn sorted_breaks(mut v: Vec<f64>) -> Vec<f64> {
    v.retain(|x| x.is_finite());
    v.sort_by(|a, b| a.partial_cmp(b).unwrap());
    v.dedup_by(|a, b| (*a - *b).abs() <= 1e-14 * (1.0 + a.abs()));
    v
}

fn point_integral(f: &(dyn Fn(f64) -> f64 + Sync), c: f64, l: f64, breaks: &[f64], m: usize) -> f64 {
    let h = 2.0 * l / m as f64;
    let mut pts = vec![-l, 0.0, l];
    pts.extend(breaks.iter().copied().filter(|b| b.abs() < l));
    let pts = sorted_breaks(pts);
    let graded = c > 0.0;
    let wf = |x: f64| {
        let v = f(x);
        if v == 0.0 {
            0.0
        } else if c == 0.0 {
            v
        } else {
            v * x.abs().powf(-c)
        }
    };
    pts.windows(2)
        .map(|w| {
            let cells = graded_points(
                w[0],
                w[1],
                graded && w[0] == 0.0,
                graded && w[1] == 0.0,
                h,
                ORACLE_GRADING_RATIO,
                ORACLE_SMALLEST_CELL,
            );
            midpoint_graded(&wf, &cells)
        })
        .sum()
}

struct PairSetup<'a> {
    g: &'a (dyn Fn(f64, f64) -> f64 + Sync),
    alpha: f64,
    beta: f64,
    l: f64,
    breaks: &'a [f64],
    grade: bool,
}

impl PairSetup<'_> {
    #[inline]
    fn weighted(&self, x: f64, y: f64) -> f64 {
        let v = (self.g)(x, y);
        if v == 0.0 {
            return 0.0;
        }
        let mut w = v;
        if self.alpha != 0.0 {
            w *= x.abs().powf(-self.alpha);
        }
        if self.beta != 0.0 {
            w *= y.abs().powf(-self.beta);
        }
        w
    }

    /// `int dx [G(x, x+z) + G(x+z, x)]` on a grid of nominal step `h`.
    fn x_integral(&self, z: f64, h: f64) -> f64 {
        let l = self.l;
        let active = |x: f64| x.abs() <= l || (x + z).abs() <= l;
        let mut pts = vec![-l, l, -l - z, l - z, 0.0, -z];
        for &b in self.breaks {
            pts.push(b);
            pts.push(b - z);
        }
        let pts = sorted_breaks(pts);
        let lo = -l - z;
        let hi = l;
        let f = |x: f64| self.weighted(x, x + z) + self.weighted(x + z, x);
        let is_sing = |x: f64| self.grade && (x == 0.0 || x == -z);
        pts.windows(2)
            .filter(|w| w[0] >= lo && w[1] <= hi && active(0.5 * (w[0] + w[1])))
            .map(|w| {
                let cells = graded_points(
                    w[0],
                    w[1],
                    is_sing(w[0]),
                    is_sing(w[1]),
                    h,
                    ORACLE_GRADING_RATIO,
                    ORACLE_SMALLEST_CELL,
                );
                midpoint_graded(&f, &cells)
            })
            .sum()
    }

    fn integral(&self, sigma: f64, m: usize) -> f64 {
        let l = self.l;
        let zc = 2.0 * l + 1.0;
        let hz = zc / m as f64;
        let hx = 2.0 * l / m as f64;
        let zpts = graded_points(0.0, zc, true, false, hz, ORACLE_GRADING_RATIO, ORACLE_SMALLEST_CELL);
        let near: f64 = zpts
            .par_windows(2)
            .map(|w| (w[1] - w[0]) * self.x_integral(0.5 * (w[0] + w[1]), hx))
            .sum();
        // tail: int_{zc}^inf H(z) dz = (1/sigma) int_0^{zc^-sigma} z^(1+sigma) H(z) dw
        let wmax = zc.powf(-sigma);
        let mw = (m / 4).max(16);
        let hw = wmax / mw as f64;
        let far: f64 = (0..mw)
            .into_par_iter()
            .map(|i| {
                let w = (i as f64 + 0.5) * hw;
                let z = w.powf(-1.0 / sigma);
                z.powf(1.0 + sigma) * self.x_integral(z, hx)
            })
            .sum::<f64>()
            * hw
            / sigma;
        near + far
    }
}

/// Deterministic `n = 1` quadrature. The error bar is `|I_m - I_{m/2}|`;
/// the result fails when the `m/4 -> m/2 -> m` differences do not shrink.
pub fn tensor_oracle_1d(n: usize, integrand: &OracleIntegrand<'_>, spec: &QuadratureSpec) -> Result<Estimate<f64>> {
    if n != 1 {
        return Err(Error::OracleUnavailable(format!(
            "the tensor oracle covers n = 1 only, got n = {n}"
        )));
    }
    let m = spec.grid_points;
    if m < 64 {
        return Err(Error::InvalidSpec(format!(
            "oracle needs at least 64 grid points, got {m}"
        )));
    }
    let (run, tail): (Box<dyn Fn(usize) -> f64 + Sync + '_>, Option<f64>) = match integrand {
        OracleIntegrand::Point {
            f,
            c,
            half_width,
            breakpoints,
            tail_bound,
        } => {
            if *half_width == 0.0 {
                return Ok(Estimate::exact_zero(spec));
            }
            let b = breakpoints.clone();
            (
                Box::new(move |k| point_integral(*f, *c, *half_width, &b, k)),
                *tail_bound,
            )
        }
        OracleIntegrand::Pair {
            g,
            alpha,
            beta,
            half_width,
            breakpoints,
            far_exponent,
            singular_origin,
            tail_bound,
        } => {
            if *half_width == 0.0 {
                return Ok(Estimate::exact_zero(spec));
            }
            if !(*far_exponent > 0.0) {
                return Err(Error::QuadratureFailure(format!(
                    "far exponent must be positive, got {far_exponent}"
                )));
            }
            let setup = PairSetup {
                g: *g,
                alpha: *alpha,
                beta: *beta,
                l: *half_width,
                breaks: breakpoints,
                grade: *alpha > 0.0 || *beta > 0.0 || *singular_origin,
            };
            let sigma = *far_exponent;
            (Box::new(move |k| setup.integral(sigma, k)), *tail_bound)
        }
    };
    let fine = run(m);
    let mid = run(m / 2);
    let coarse = run(m / 4);
    if !fine.is_finite() {
        return Err(Error::QuadratureFailure(format!("oracle produced {fine}")));
    }
    let e1 = (fine - mid).abs();
    let e0 = (mid - coarse).abs();
    let floor = 1e-12 * fine.abs().max(1e-300);
    if e1 > e0 && e1 > floor {
        return Err(Error::QuadratureFailure(format!(
            "refinement error grew from {e0:.3e} to {e1:.3e}"
        )));
    }
    let mut est = Estimate::from_parts(fine, e1, m as u64, spec);
    est.tail_truncation_bound = tail.or(Some(0.0));
    Ok(est)
}
