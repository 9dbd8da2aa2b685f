//! Bound checks: averaged weights, maximal averages, diagonal-shift
//! convolution, the commutation identity, finiteness on smooth fields and
//! the Sobolev quotient.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{ratio_with_error, BoundEntry, BoundReport, BoundVerdict, Thresholds, Witness};
use crate::error::{Error, Result};
use crate::field::{lift_difference_quotient, smallbuf, MollifierProfile, PairField, ScalarField, Smoothness};
use crate::norms::{pair_lp_integral, point_lq_integral, seminorm_general, norm_lpstar_a, seminorm_wspa};
use crate::quadrature::{ball_average, BallHint, Estimate, QuadratureSpec};
use crate::scalar::{norm, unit_ball_volume};
use crate::smoothing::{mollify, scalar_tolerance, star_mollify, Convolver, SmoothingConfig};
use crate::space::{inverse_weight_value, weight_value, GeneralWeightParams, Kernel, SpaceParams, WeightKind};

/// Draws per ball average in [`check_averaged_weight_bound`].
pub const AVERAGE_SAMPLES_PER_TRIAL: u64 = 4096;
const LOG_RANGE: (f64, f64) = (-3.0, 3.0);

fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

fn statement_for(kind: WeightKind) -> &'static str {
    match kind {
        WeightKind::PairWeight => "averaged-pair-weight",
        WeightKind::PointWeight => "averaged-point-weight",
    }
}

/// `Theta(X) r^(-n) int_{B_r} dz / Theta(X + shift(z))` at one `(X, r)`.
pub fn averaged_weight_product(
    kind: WeightKind,
    params: &SpaceParams<f64>,
    point: &[f64],
    r: f64,
    spec: &QuadratureSpec,
) -> Result<Estimate<f64>> {
    let n = params.n();
    let big_n = kind.ambient_dim(n);
    if point.len() != big_n {
        return Err(Error::ParameterOutOfRange(format!(
            "point has dimension {}, expected {big_n}",
            point.len()
        )));
    }
    let theta = weight_value(kind, params, point);
    let e = kind.block_exponent(params);
    let mut hints = Vec::new();
    if e > 0.0 {
        for block in point.chunks(n) {
            if norm(block) <= 2.0 * r {
                hints.push(BallHint {
                    center: block.iter().map(|v| -v).collect(),
                    exponent: e,
                });
            }
        }
    }
    let f = |z: &[f64]| {
        let mut buf = smallbuf::<f64>(big_n);
        kind.shifted(point, z, &mut buf);
        inverse_weight_value(kind, params, &buf)
    };
    let mut est = ball_average(&f, n, r, &hints, spec)?;
    est.value *= theta;
    est.stderr *= theta;
    Ok(est)
}

/// Log-uniform trials over six decades with the default per-trial budget.
pub fn check_averaged_weight_bound(kind: WeightKind, params: &SpaceParams<f64>, trials: u64, seed: u64) -> Result<BoundReport> {
    let spec = QuadratureSpec::monte_carlo(AVERAGE_SAMPLES_PER_TRIAL, seed);
    check_averaged_weight_bound_with(kind, params, trials, &spec)
}

/// Samples `|x|, |y|, r` log-uniformly in `[10^-3, 10^3]` with uniform
/// directions, and reports the largest product. Stable when the second
/// half of the trials raises the running max by at most the slack.
pub fn check_averaged_weight_bound_with(
    kind: WeightKind,
    params: &SpaceParams<f64>,
    trials: u64,
    spec: &QuadratureSpec,
) -> Result<BoundReport> {
    if trials == 0 {
        return Err(Error::InvalidSpec("at least one trial is needed".into()));
    }
    let th = Thresholds::default();
    let n = params.n();
    let big_n = kind.ambient_dim(n);
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let window_start = ((1.0 - th.stabilization_window) * trials as f64).floor() as u64;
    let mut best = (f64::NEG_INFINITY, 0.0, Vec::new());
    let mut first_max = f64::NEG_INFINITY;
    let mut second_max = f64::NEG_INFINITY;
    let mut sum = 0.0;
    let mut finite = true;
    let mut point = vec![0.0; big_n];
    for t in 0..trials {
        for block in point.chunks_mut(n) {
            let radius = 10f64.powf(rng.random_range(LOG_RANGE.0..LOG_RANGE.1));
            let mut norm2: f64 = 0.0;
            for v in block.iter_mut() {
                *v = rand_distr::Distribution::sample(&rand_distr::StandardNormal, &mut rng);
                norm2 += *v * *v;
            }
            let scale = radius / norm2.sqrt();
            for v in block.iter_mut() {
                *v *= scale;
            }
        }
        let r = 10f64.powf(rng.random_range(LOG_RANGE.0..LOG_RANGE.1));
        let trial_spec = spec.clone().with_seed(splitmix(spec.seed ^ splitmix(t)));
        let e = averaged_weight_product(kind, params, &point, r, &trial_spec)?;
        if !e.value.is_finite() {
            finite = false;
        }
        sum += e.value;
        if t < window_start {
            first_max = first_max.max(e.value);
        } else {
            second_max = second_max.max(e.value);
        }
        if e.value > best.0 {
            let mut w = point.clone();
            w.push(r);
            best = (e.value, e.stderr, w);
        }
    }
    let settled = trials < 2 || second_max <= (1.0 + th.new_max_slack) * first_max;
    let verdict = if finite && settled {
        BoundVerdict::BoundedStable
    } else {
        BoundVerdict::Unstable
    };
    Ok(BoundReport {
        statement_id: statement_for(kind).into(),
        measured_constant: best.0,
        measured_stderr: best.1,
        witness: Witness {
            label: match kind {
                WeightKind::PairWeight => "(x, y, r)".into(),
                WeightKind::PointWeight => "(x, r)".into(),
            },
            point: best.2,
        },
        trials,
        verdict,
        params: Some(*params),
        seed: spec.seed,
        entries: vec![
            BoundEntry {
                label: "max before window".into(),
                value: first_max,
                stderr: 0.0,
            },
            BoundEntry {
                label: "max inside window".into(),
                value: second_max,
                stderr: 0.0,
            },
            BoundEntry {
                label: "mean product".into(),
                value: sum / trials as f64,
                stderr: 0.0,
            },
            BoundEntry {
                label: "unit ball volume".into(),
                value: unit_ball_volume::<f64>(n),
                stderr: 0.0,
            },
        ],
        thresholds: th,
        notes: vec![format!(
            "{AVERAGE_SAMPLES_PER_TRIAL} draws per ball average by default; trial k reseeds the stream from (seed, k)"
        )],
    })
}

/// Function whose ball averages enter the maximal estimate.
#[derive(Debug, Clone)]
pub enum MaximalTarget {
    /// `V` on `R^n` against `|x|^(-b)`.
    Point { u: ScalarField<f64>, params: SpaceParams<f64> },
    /// `V` on `R^(2n)` against `|x|^(-alpha) |y|^(-beta)` of `kernel`.
    Pair { v: PairField<f64>, kernel: Kernel<f64> },
}

fn abs_scalar(u: &ScalarField<f64>) -> ScalarField<f64> {
    let f = u.evaluator().clone();
    ScalarField::from_fn(format!("|{}|", u.id()), u.meta().clone(), move |x| f(x).abs())
}

fn abs_pair(v: &PairField<f64>) -> PairField<f64> {
    let f = v.evaluator().clone();
    PairField::from_fn(format!("|{}|", v.id()), v.meta().clone(), move |x, y| f(x, y).abs())
}

/// `max_r LHS(r) / RHS` with `LHS(r) = int [r^(-n) int_{B_r} |V(X - shift(z))| dz]^q / Theta`
/// and `RHS = int |V|^q / Theta`. A vanishing pair reports 0.
pub fn check_maximal_bound(target: &MaximalTarget, q: f64, r_ladder: &[f64], spec: &QuadratureSpec) -> Result<BoundReport> {
    if !(q > 1.0) {
        return Err(Error::ParameterOutOfRange(format!("q must exceed 1, got {q}")));
    }
    super::check_ladder(r_ladder)?;
    let th = Thresholds::default();
    let cfg = SmoothingConfig::default();
    let (n, params) = match target {
        MaximalTarget::Point { params, .. } => (params.n(), Some(*params)),
        MaximalTarget::Pair { kernel, .. } => (kernel.n(), None),
    };
    let flat = MollifierProfile::flat(n);
    let vol = unit_ball_volume::<f64>(n);
    let integral = |r: Option<f64>| -> Result<Estimate<f64>> {
        match target {
            MaximalTarget::Point { u, params } => {
                let w = match r {
                    None => u.clone(),
                    Some(r) => mollify(&abs_scalar(u), r, &flat, &cfg)?.scaled(vol),
                };
                point_lq_integral(&w, n, q, params.b(), spec)
            }
            MaximalTarget::Pair { v, kernel } => {
                let kq = Kernel::new(n, kernel.s(), q, kernel.alpha(), kernel.beta())?;
                let w = match r {
                    None => v.clone(),
                    Some(r) => star_mollify(&abs_pair(v), r, &flat, &cfg)?.scaled(vol),
                };
                pair_lp_integral(&w, &kq, spec)
            }
        }
    };
    let rhs = integral(None)?;
    let mut entries = vec![BoundEntry {
        label: "rhs".into(),
        value: rhs.value,
        stderr: rhs.stderr,
    }];
    let mut best = (0.0f64, 0.0, r_ladder[0]);
    let mut stable = true;
    for &r in r_ladder {
        let lhs = integral(Some(r))?;
        let (ratio, se) = if rhs.value == 0.0 && lhs.value == 0.0 {
            (0.0, 0.0)
        } else if rhs.value == 0.0 {
            return Err(Error::DegenerateDenominator(format!(
                "right-hand side vanishes while the average at r = {r} does not"
            )));
        } else {
            ratio_with_error(lhs.value, lhs.stderr, rhs.value, rhs.stderr)
        };
        if !ratio.is_finite() || (ratio > 0.0 && se >= th.stderr_fraction * ratio) {
            stable = false;
        }
        entries.push(BoundEntry {
            label: format!("ratio at r = {r}"),
            value: ratio,
            stderr: se,
        });
        if ratio > best.0 || entries.len() == 2 {
            best = (ratio, se, r);
        }
    }
    Ok(BoundReport {
        statement_id: "maximal".into(),
        measured_constant: best.0,
        measured_stderr: best.1,
        witness: Witness {
            label: "r".into(),
            point: vec![best.2],
        },
        trials: r_ladder.len() as u64,
        verdict: if stable {
            BoundVerdict::BoundedStable
        } else {
            BoundVerdict::Unstable
        },
        params,
        seed: spec.seed,
        entries,
        thresholds: th,
        notes: vec![format!("q = {q}; ball averages by the fixed Gauss-Legendre ray rule")],
    })
}

/// Quantity whose norm is compared before and after convolution.
#[derive(Debug, Clone)]
pub enum StarTarget {
    /// `||v star eta||^p / ||v||^p` in `L^p_{alpha, beta}(R^(2n))`.
    Pair { v: PairField<f64>, kernel: Kernel<f64> },
    /// `||u * eta||^(p*) / ||u||^(p*)` in `L^(p*)_b(R^n)`.
    Point { u: ScalarField<f64>, params: SpaceParams<f64> },
}

/// Convolution ratios over an `eps` ladder with common random numbers;
/// stable when their relative spread stays below the variation threshold.
pub fn check_star_convolution_bound(
    target: &StarTarget,
    profile: &MollifierProfile,
    eps_ladder: &[f64],
    spec: &QuadratureSpec,
) -> Result<BoundReport> {
    super::check_ladder(eps_ladder)?;
    let th = Thresholds::default();
    let cfg = SmoothingConfig::default();
    let (statement, params) = match target {
        StarTarget::Pair { .. } => ("star-pair", None),
        StarTarget::Point { params, .. } => ("star-point", Some(*params)),
    };
    let run = |eps: Option<f64>| -> Result<Estimate<f64>> {
        match target {
            StarTarget::Pair { v, kernel } => {
                let prof = profile.for_dimension(kernel.n())?;
                let w = match eps {
                    None => v.clone(),
                    Some(e) => star_mollify(v, e, &prof, &cfg)?,
                };
                pair_lp_integral(&w, kernel, spec)
            }
            StarTarget::Point { u, params } => {
                let prof = profile.for_dimension(params.n())?;
                let w = match eps {
                    None => u.clone(),
                    Some(e) => mollify(u, e, &prof, &cfg)?,
                };
                point_lq_integral(&w, params.n(), params.p_star(), params.b(), spec)
            }
        }
    };
    let den = run(None)?;
    if den.value == 0.0 {
        return Err(Error::DegenerateDenominator(
            "the unconvolved norm estimate is zero".into(),
        ));
    }
    let mut entries = vec![BoundEntry {
        label: "denominator".into(),
        value: den.value,
        stderr: den.stderr,
    }];
    let mut ratios = Vec::new();
    for &e in eps_ladder {
        let num = run(Some(e))?;
        let (r, se) = ratio_with_error(num.value, num.stderr, den.value, den.stderr);
        entries.push(BoundEntry {
            label: format!("ratio at eps = {e}"),
            value: r,
            stderr: se,
        });
        ratios.push((r, se, e));
    }
    let max = ratios.iter().cloned().fold((f64::NEG_INFINITY, 0.0, 0.0), |a, b| if b.0 > a.0 { b } else { a });
    let min = ratios.iter().map(|r| r.0).fold(f64::INFINITY, f64::min);
    let spread = if max.0 > 0.0 { (max.0 - min) / max.0 } else { 0.0 };
    let finite = ratios.iter().all(|r| r.0.is_finite());
    Ok(BoundReport {
        statement_id: statement.into(),
        measured_constant: max.0,
        measured_stderr: max.1,
        witness: Witness {
            label: "eps".into(),
            point: vec![max.2],
        },
        trials: eps_ladder.len() as u64,
        verdict: if finite && spread < th.variation {
            BoundVerdict::BoundedStable
        } else {
            BoundVerdict::Unstable
        },
        params,
        seed: spec.seed,
        entries,
        thresholds: th,
        notes: vec![format!("relative spread of the ratios across eps: {spread:.4}")],
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CommutationReport {
    pub field_id: String,
    pub epsilon: f64,
    pub points: u64,
    pub seed: u64,
    pub max_abs_residual: f64,
    /// Residual over `|x - y|^(-n/p - s) (int |u(x - .)| eta + int |u(y - .)| eta)`.
    pub max_relative_residual: f64,
    /// Convolution tolerance; the check passes at twice this value.
    pub tolerance: f64,
    pub passed: bool,
    pub witness: Witness,
}

/// Compares `lift(u) star eta_eps` with `lift(u * eta_eps)` at random
/// off-diagonal pairs, both by the refined ray rule.
pub fn check_commutation_identity(
    u: &ScalarField<f64>,
    kernel: &Kernel<f64>,
    epsilon: f64,
    points: u64,
    seed: u64,
) -> Result<CommutationReport> {
    let n = kernel.n();
    let conv = Convolver::new(&MollifierProfile::standard(n), epsilon, n, &SmoothingConfig::default())?;
    let v = lift_difference_quotient(u, kernel);
    let e = kernel.lift_exponent();
    let tol = scalar_tolerance(u);
    let half = u.meta().effective_radius().min(3.0) + 2.0 * epsilon;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst_abs: f64 = 0.0;
    let mut worst = (0.0f64, Vec::new());
    let (mut x, mut y) = (vec![0.0; n], vec![0.0; n]);
    for _ in 0..points {
        loop {
            for i in 0..n {
                x[i] = rng.random_range(-half..half);
                y[i] = rng.random_range(-half..half);
            }
            if crate::scalar::dist(&x, &y) > 1e-9 {
                break;
            }
        }
        let d = crate::scalar::dist(&x, &y).powf(-e);
        let cx = conv.convolve(u, &x)?;
        let cy = conv.convolve(u, &y)?;
        let s = conv.star(&v, &x, &y)?;
        let res = (s.value - (cx.value - cy.value) * d).abs();
        let scale = d * (cx.scale + cy.scale);
        let rel = if scale > 0.0 { res / scale } else { res };
        worst_abs = worst_abs.max(res);
        if rel > worst.0 || worst.1.is_empty() {
            let mut w = x.clone();
            w.extend_from_slice(&y);
            worst = (rel, w);
        }
    }
    Ok(CommutationReport {
        field_id: u.id().to_string(),
        epsilon,
        points,
        seed,
        max_abs_residual: worst_abs,
        max_relative_residual: worst.0,
        tolerance: tol,
        passed: worst.0 <= 2.0 * tol,
        witness: Witness {
            label: "(x, y)".into(),
            point: worst.1,
        },
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FinitenessEntry {
    pub alpha: f64,
    pub beta: f64,
    pub energy: Estimate<f64>,
    pub unstable: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FinitenessReport {
    pub field_id: String,
    pub params: SpaceParams<f64>,
    pub entries: Vec<FinitenessEntry>,
    pub unstable_count: usize,
    pub verdict: BoundVerdict,
    pub thresholds: Thresholds,
}

/// `k x k` admissible two-weight exponents: `alpha, beta` evenly spaced in
/// `[-0.8 s p, 0.45 n]`, so that `alpha + beta <= 0.9 n`.
pub fn admissible_weight_grid(params: &SpaceParams<f64>, k: usize) -> Result<Vec<GeneralWeightParams<f64>>> {
    let lo = -0.8 * params.s() * params.p();
    let hi = 0.45 * params.n() as f64;
    let pts: Vec<f64> = if k <= 1 {
        vec![0.0]
    } else {
        (0..k).map(|i| lo + (hi - lo) * i as f64 / (k - 1) as f64).collect()
    };
    let mut out = Vec::with_capacity(k * k);
    for &a in &pts {
        for &b in &pts {
            out.push(GeneralWeightParams::new(params, a, b)?);
        }
    }
    Ok(out)
}

/// The raw two-weight energy of a smooth compactly supported field over a
/// grid of admissible exponents; an entry is unstable when its estimate is
/// not finite or its standard error reaches the threshold fraction.
pub fn check_finiteness_smooth(
    u: &ScalarField<f64>,
    params: &SpaceParams<f64>,
    gw_grid: &[GeneralWeightParams<f64>],
    spec: &QuadratureSpec,
) -> Result<FinitenessReport> {
    if u.smoothness() != Smoothness::Smooth || !u.meta().has_finite_support() {
        return Err(Error::ParameterOutOfRange(format!(
            "{} must be smooth with compact support",
            u.id()
        )));
    }
    let th = Thresholds::default();
    let mut entries = Vec::with_capacity(gw_grid.len());
    for gw in gw_grid {
        let energy = seminorm_general(u, params, gw, spec)?;
        let unstable = !energy.value.is_finite()
            || energy.unstable
            || (energy.value > 0.0 && energy.stderr >= th.stderr_fraction * energy.value);
        entries.push(FinitenessEntry {
            alpha: gw.alpha,
            beta: gw.beta,
            energy,
            unstable,
        });
    }
    let unstable_count = entries.iter().filter(|e| e.unstable).count();
    Ok(FinitenessReport {
        field_id: u.id().to_string(),
        params: *params,
        entries,
        unstable_count,
        verdict: if unstable_count == 0 {
            BoundVerdict::BoundedStable
        } else {
            BoundVerdict::Unstable
        },
        thresholds: th,
    })
}

/// Dilations added to the field set.
pub const SOBOLEV_DILATIONS: [f64; 3] = [0.5, 1.0, 2.0];

/// `max ||u||_{L^(p*)_b} / [u]` over the fields and their dilations
/// `u(lambda x)`. Stable when the dilations raise the max by less than the
/// variation threshold.
pub fn check_sobolev_inequality(fields: &[ScalarField<f64>], params: &SpaceParams<f64>, spec: &QuadratureSpec) -> Result<BoundReport> {
    if fields.is_empty() {
        return Err(Error::InvalidSpec("the field set is empty".into()));
    }
    let th = Thresholds::default();
    let mut entries = Vec::new();
    let mut base_max: f64 = 0.0;
    let mut best = (f64::NEG_INFINITY, 0.0, String::new(), 1.0);
    for u in fields {
        if u.smoothness() != Smoothness::Smooth || !u.meta().has_finite_support() {
            return Err(Error::ParameterOutOfRange(format!(
                "{} must be smooth with compact support",
                u.id()
            )));
        }
        for &lambda in &SOBOLEV_DILATIONS {
            let w = u.rescaled_argument(lambda)?;
            let semi = seminorm_wspa(&w, params, spec)?;
            if semi.value == 0.0 {
                return Err(Error::DegenerateDenominator(format!(
                    "seminorm of {} vanishes",
                    w.id()
                )));
            }
            let l = norm_lpstar_a(&w, params, spec)?;
            let (r, se) = ratio_with_error(l.value, l.stderr, semi.value, semi.stderr);
            if lambda == 1.0 {
                base_max = base_max.max(r);
            }
            if r > best.0 {
                best = (r, se, u.id().to_string(), lambda);
            }
            entries.push(BoundEntry {
                label: format!("{} at lambda = {lambda}", u.id()),
                value: r,
                stderr: se,
            });
        }
    }
    let finite = entries.iter().all(|e| e.value.is_finite());
    let stable = finite && best.0 <= (1.0 + th.variation) * base_max;
    Ok(BoundReport {
        statement_id: "sobolev-inequality".into(),
        measured_constant: best.0,
        measured_stderr: best.1,
        witness: Witness {
            label: format!("{} dilated by lambda", best.2),
            point: vec![best.3],
        },
        trials: entries.len() as u64,
        verdict: if stable {
            BoundVerdict::BoundedStable
        } else {
            BoundVerdict::Unstable
        },
        params: Some(*params),
        seed: spec.seed,
        entries,
        thresholds: th,
        notes: Vec::new(),
    })
}
