//! Exact radial power-law samplers and their mixtures.

use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::scalar::sphere_area;

/// Density proportional to `|x - center|^(-c)` on the shell `r0 <= |x| <= r1`
/// of `R^n`, sampled by inverting the radial distribution function.
#[derive(Debug, Clone, PartialEq)]
pub struct RadialLaw {
    n: usize,
    c: f64,
    r0: f64,
    r1: f64,
    k: f64,
    /// `int_{shell} |x|^(-c) dx`.
    mass: f64,
}

impl RadialLaw {
    pub fn new(n: usize, c: f64, r0: f64, r1: f64) -> Result<Self> {
        let bad = |why: &str| {
            Err(Error::NonNormalizableDensity(format!(
                "|x|^(-{c}) on {r0} <= |x| <= {r1} in dimension {n}: {why}"
            )))
        };
        if !(r0 >= 0.0 && r1 > r0) || !c.is_finite() {
            return bad("empty or malformed shell");
        }
        let k = n as f64 - c;
        let radial = if k > 0.0 {
            if !r1.is_finite() {
                return bad("mass diverges at infinity");
            }
            (r1.powf(k) - r0.powf(k)) / k
        } else if k < 0.0 {
            if r0 == 0.0 {
                return bad("mass diverges at the origin");
            }
            let top = if r1.is_finite() { r1.powf(k) } else { 0.0 };
            (r0.powf(k) - top) / -k
        } else {
            if r0 == 0.0 || !r1.is_finite() {
                return bad("logarithmic divergence");
            }
            (r1 / r0).ln()
        };
        if !(radial > 0.0 && radial.is_finite()) {
            return bad("degenerate mass");
        }
        Ok(Self {
            n,
            c,
            r0,
            r1,
            k,
            mass: sphere_area::<f64>(n) * radial,
        })
    }

    pub fn exponent(&self) -> f64 {
        self.c
    }

    pub fn inner_radius(&self) -> f64 {
        self.r0
    }

    pub fn outer_radius(&self) -> f64 {
        self.r1
    }

    /// Radius from a uniform `u` in `(0, 1]`; never returns `0` or `+inf`.
    #[inline]
    pub fn radius(&self, u: f64) -> f64 {
        let k = self.k;
        if k > 0.0 {
            let a = self.r0.powf(k);
            (a + u * (self.r1.powf(k) - a)).powf(1.0 / k)
        } else if k < 0.0 {
            let top = if self.r1.is_finite() { self.r1.powf(k) } else { 0.0 };
            (top + u * (self.r0.powf(k) - top)).powf(1.0 / k)
        } else {
            self.r0 * (self.r1 / self.r0).powf(u)
        }
    }

    /// Density in `R^n` at distance `r` from the center.
    #[inline]
    pub fn density(&self, r: f64) -> f64 {
        if r < self.r0 || r > self.r1 || r == 0.0 {
            return 0.0;
        }
        r.powf(-self.c) / self.mass
    }
}

#[derive(Debug, Clone, PartialEq)]
struct Component {
    weight: f64,
    law: RadialLaw,
    center: Option<Vec<f64>>,
}

/// Finite mixture of radial laws with optional centers.
#[derive(Debug, Clone, PartialEq)]
pub struct RadialMixture {
    n: usize,
    components: Vec<Component>,
    cumulative: Vec<f64>,
}

impl RadialMixture {
    pub fn new(n: usize) -> Self {
        Self {
            n,
            components: Vec::new(),
            cumulative: Vec::new(),
        }
    }

    pub fn single(law: RadialLaw) -> Self {
        let n = law.n;
        Self::new(n).with(1.0, law, None)
    }

    /// Adds a component; weights are renormalized on every insertion.
    pub fn with(mut self, weight: f64, law: RadialLaw, center: Option<Vec<f64>>) -> Self {
        debug_assert_eq!(law.n, self.n);
        self.components.push(Component {
            weight,
            law,
            center,
        });
        let total: f64 = self.components.iter().map(|c| c.weight).sum();
        let mut acc = 0.0;
        self.cumulative = self
            .components
            .iter()
            .map(|c| {
                acc += c.weight / total;
                acc
            })
            .collect();
        *self.cumulative.last_mut().unwrap() = 1.0;
        self
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn len(&self) -> usize {
        self.components.len()
    }

    pub fn is_empty(&self) -> bool {
        self.components.is_empty()
    }

    fn weight(&self, i: usize) -> f64 {
        if i == 0 {
            self.cumulative[0]
        } else {
            self.cumulative[i] - self.cumulative[i - 1]
        }
    }

    /// Writes a draw into `out`.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R, out: &mut [f64]) {
        let pick: f64 = rng.random();
        let i = self
            .cumulative
            .iter()
            .position(|&c| pick < c)
            .unwrap_or(self.components.len() - 1);
        let comp = &self.components[i];
        let u = 1.0 - rng.random::<f64>();
        let r = comp.law.radius(u);
        unit_direction(rng, out);
        for v in out.iter_mut() {
            *v *= r;
        }
        if let Some(c) = &comp.center {
            for (v, cv) in out.iter_mut().zip(c) {
                *v += cv;
            }
        }
    }

    pub fn density(&self, x: &[f64]) -> f64 {
        let mut d = 0.0;
        for (i, comp) in self.components.iter().enumerate() {
            let r = match &comp.center {
                None => norm(x),
                Some(c) => x
                    .iter()
                    .zip(c)
                    .map(|(a, b)| (a - b) * (a - b))
                    .sum::<f64>()
                    .sqrt(),
            };
            d += self.weight(i) * comp.law.density(r);
        }
        d
    }
}

fn norm(x: &[f64]) -> f64 {
    crate::scalar::norm(x)
}

/// Uniform direction on `S^(n-1)`.
pub(crate) fn unit_direction<R: Rng + ?Sized>(rng: &mut R, out: &mut [f64]) {
    if out.len() == 1 {
        out[0] = if rng.random::<bool>() { 1.0 } else { -1.0 };
        return;
    }
    loop {
        let mut s = 0.0;
        for v in out.iter_mut() {
            *v = rng.sample(StandardNormal);
            s += *v * *v;
        }
        if s > 1e-300 {
            let inv = 1.0 / s.sqrt();
            for v in out.iter_mut() {
                *v *= inv;
            }
            return;
        }
    }
}
