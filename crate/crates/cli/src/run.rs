//! Command dispatch.

use rayon::prelude::*;
use sobolev_wlab::field::{lift_difference_quotient, make_field, FieldSpec, MollifierProfile, ScalarField};
use sobolev_wlab::quadrature::{Estimate, QuadratureSpec};
use sobolev_wlab::verification::{
    admissible_weight_grid, check_averaged_weight_bound_with, check_commutation_identity,
    check_finiteness_smooth, check_maximal_bound, check_sobolev_inequality,
    check_star_convolution_bound, run_clipping_convergence, run_density_experiment,
    run_mollification_convergence, run_truncation_convergence, MaximalTarget, StarTarget,
};
use sobolev_wlab::{
    norm_full, pipeline_rho, truncate, truncation_remainder, CutoffProfile, Kernel, SmoothingProfiles,
    SpaceParams, WeightKind,
};

use crate::config::{Command, RunConfig};
use crate::error::CliError;
use crate::record::{ApproxReport, CatalogEntry, Output, ResultRecord, Verdict, SCHEMA_VERSION};

pub const TRUNCATION_LADDER: [f64; 5] = [1.0, 2.0, 4.0, 8.0, 16.0];
pub const MOLLIFICATION_LADDER: [f64; 5] = [1.0, 0.5, 0.25, 0.1, 0.05];
pub const CLIPPING_LADDER: [f64; 4] = [1.0, 4.0, 16.0, 64.0];
pub const MAXIMAL_LADDER: [f64; 3] = [0.1, 1.0, 10.0];
pub const STAR_LADDER: [f64; 3] = [1.0, 0.5, 0.1];

const CATALOG_NOTE: &str =
    "checks run on catalog instances only; existence statements for arbitrary members of the space are not testable numerically";

fn ladder(cfg: &RunConfig, default: &[f64]) -> Vec<f64> {
    let mut l = cfg.ladder.clone().unwrap_or_else(|| default.to_vec());
    if cfg.self_test {
        l.reverse();
    }
    l
}

fn field(text: &str, params: Option<&SpaceParams<f64>>) -> Result<ScalarField<f64>, CliError> {
    Ok(make_field(&FieldSpec::parse(text)?, params)?)
}

fn full_estimate(u: &ScalarField<f64>, params: &SpaceParams<f64>, spec: &QuadratureSpec) -> Result<Estimate<f64>, CliError> {
    let r = norm_full(u, params, spec)?;
    let mut e = r.seminorm.clone();
    e.value = r.full;
    e.stderr = r.full_stderr;
    e.samples_used += r.lpstar.samples_used;
    e.unstable = r.seminorm.unstable || r.lpstar.unstable;
    e.unreliable = r.seminorm.unreliable || r.lpstar.unreliable;
    e.tail_truncation_bound = None;
    Ok(e)
}

fn stable(label: &str, e: &Estimate<f64>) -> Verdict {
    Verdict {
        check: label.into(),
        passed: !e.unstable && e.value.is_finite(),
        detail: format!("{:.6e} +- {:.2e}", e.value, e.stderr),
    }
}

/// Catalog entries with example specs.
pub fn catalog_entries() -> Vec<CatalogEntry> {
    let rows = [
        ("gaussian", "gaussian", "exp(-|x|^2)"),
        ("smooth_bump", "smooth_bump(R=1)", "exp(-1/(1-|x/R|^2)) inside B_R"),
        ("hat_1d", "hat_1d", "max(1-|x|, 0), Lipschitz"),
        ("polynomial_tail", "polynomial_tail(gamma=3)", "(1+|x|^2)^(-gamma/2)"),
        ("singular_spike", "singular_spike(gamma=0.05, R=1)", "|x|^(-gamma) e bump(|x|/R); gamma below (n-sp-2a)/p"),
        ("zero", "zero", "identically 0"),
    ];
    rows.iter()
        .map(|(id, ex, d)| CatalogEntry {
            id: (*id).into(),
            example: (*ex).into(),
            description: (*d).into(),
        })
        .collect()
}

fn record(cfg: &RunConfig, outputs: Vec<Output>, verdicts: Vec<Verdict>, notes: Vec<String>) -> ResultRecord {
    ResultRecord {
        schema_version: SCHEMA_VERSION,
        timestamp: chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Millis, true),
        command: cfg.command.to_string(),
        config: cfg.clone(),
        outputs,
        verdicts,
        notes,
    }
}

/// Runs one non-sweep command.
pub fn run_command(cfg: &RunConfig) -> Result<ResultRecord, CliError> {
    cfg.validate()?;
    let spec = cfg.spec();
    match &cfg.command {
        Command::CatalogList => Ok(record(cfg, vec![Output::Catalog(catalog_entries())], Vec::new(), Vec::new())),
        Command::Sweep => Err(CliError::Usage("sweep produces several records; use run_sweep".into())),
        Command::Norm => {
            let params = cfg.params()?;
            let u = field(&cfg.field, Some(&params))?;
            let r = norm_full(&u, &params, &spec)?;
            let verdicts = vec![stable("seminorm", &r.seminorm), stable("lpstar", &r.lpstar)];
            Ok(record(cfg, vec![Output::Norm(r)], verdicts, Vec::new()))
        }
        Command::Approx => {
            let params = cfg.params()?;
            let u = field(&cfg.field, Some(&params))?;
            let cutoff = CutoffProfile::standard();
            let tail_spec = if u.meta().has_finite_support() || spec.core_radius.is_some() {
                spec.clone()
            } else {
                spec.clone().with_core_radius(2.0 * cfg.j)
            };
            let truncation_error = full_estimate(&truncation_remainder(&u, cfg.j, &cutoff)?, &params, &tail_spec)?;
            let t = truncate(&u, cfg.j, &cutoff)?;
            let rho = pipeline_rho(&u, cfg.j, cfg.epsilon, &SmoothingProfiles::standard(params.n()))?;
            let mollification_error = full_estimate(&t.sub(&rho), &params, &spec)?;
            let total = norm_full(&u.sub(&rho), &params, &spec)?;
            let verdicts = vec![
                stable("truncation error", &truncation_error),
                stable("mollification error", &mollification_error),
                stable("total seminorm", &total.seminorm),
                stable("total lpstar", &total.lpstar),
            ];
            let rep = ApproxReport {
                field_id: u.id().to_string(),
                j: cfg.j,
                epsilon: cfg.epsilon,
                truncation_error,
                mollification_error,
                rho_support_radius: rho.support_radius(),
                total,
            };
            Ok(record(cfg, vec![Output::Approx(rep)], verdicts, Vec::new()))
        }
        Command::Verify(id) => verify(cfg, id, &spec),
    }
}

fn verify(cfg: &RunConfig, id: &str, spec: &QuadratureSpec) -> Result<ResultRecord, CliError> {
    let n = cfg.n;
    let kernel = || -> Result<Kernel<f64>, CliError> { Ok(cfg.kernel()?) };
    let params = || -> Result<SpaceParams<f64>, CliError> { Ok(cfg.params()?) };
    let params_opt = cfg.params().ok();
    let mut notes = Vec::new();
    let (output, verdict) = match id {
        "finiteness" => {
            let p = params()?;
            let grid = admissible_weight_grid(&p, cfg.weight_grid)?;
            let r = check_finiteness_smooth(&field(&cfg.field, Some(&p))?, &p, &grid, spec)?;
            let v = Verdict {
                check: id.into(),
                passed: r.unstable_count == 0,
                detail: format!("{} of {} weight pairs unstable", r.unstable_count, r.entries.len()),
            };
            (Output::Finiteness(r), v)
        }
        "truncation" | "mollification" => {
            let p = params()?;
            let u = field(&cfg.field, Some(&p))?;
            let r = if id == "truncation" {
                run_truncation_convergence(&u, &p, &ladder(cfg, &TRUNCATION_LADDER), spec)?
            } else {
                run_mollification_convergence(&u, &p, &MollifierProfile::standard(n), &ladder(cfg, &MOLLIFICATION_LADDER), spec)?
            };
            let v = Verdict {
                check: id.into(),
                passed: r.passed(),
                detail: format!("{:?}, final/initial {:.4e}", r.verdict, r.final_over_initial),
            };
            (Output::Convergence(r), v)
        }
        "clipping" => {
            let k = kernel()?;
            let v = lift_difference_quotient(&field(&cfg.field, params_opt.as_ref())?, &k);
            let r = run_clipping_convergence(&v, &k, &ladder(cfg, &CLIPPING_LADDER), spec)?;
            let v = Verdict {
                check: id.into(),
                passed: r.passed(),
                detail: format!("{:?}, final/initial {:.4e}", r.verdict, r.final_over_initial),
            };
            (Output::Convergence(r), v)
        }
        "averaged-pair-weight" | "averaged-point-weight" => {
            let p = params()?;
            let kind = if id == "averaged-pair-weight" {
                WeightKind::PairWeight
            } else {
                WeightKind::PointWeight
            };
            let s = QuadratureSpec::monte_carlo(cfg.trial_samples, cfg.seed);
            let r = check_averaged_weight_bound_with(kind, &p, cfg.trials, &s)?;
            bound(id, r)
        }
        "maximal" => {
            let q = cfg.q.unwrap_or(cfg.p);
            let target = if cfg.kind == "pair" {
                let k = kernel()?;
                MaximalTarget::Pair {
                    v: lift_difference_quotient(&field(&cfg.field, params_opt.as_ref())?, &k),
                    kernel: k,
                }
            } else {
                let p = params()?;
                MaximalTarget::Point {
                    u: field(&cfg.field, Some(&p))?,
                    params: p,
                }
            };
            bound(id, check_maximal_bound(&target, q, &ladder(cfg, &MAXIMAL_LADDER), spec)?)
        }
        "star-pair" | "star-point" => {
            let target = if id == "star-pair" {
                let k = kernel()?;
                StarTarget::Pair {
                    v: lift_difference_quotient(&field(&cfg.field, params_opt.as_ref())?, &k),
                    kernel: k,
                }
            } else {
                let p = params()?;
                StarTarget::Point {
                    u: field(&cfg.field, Some(&p))?,
                    params: p,
                }
            };
            let prof = MollifierProfile::standard(n);
            bound(id, check_star_convolution_bound(&target, &prof, &ladder(cfg, &STAR_LADDER), spec)?)
        }
        "commutation" => {
            let k = kernel()?;
            let u = field(&cfg.field, params_opt.as_ref())?;
            let r = check_commutation_identity(&u, &k, cfg.epsilon, cfg.points, cfg.seed)?;
            let v = Verdict {
                check: id.into(),
                passed: r.passed,
                detail: format!(
                    "max relative residual {:.3e} against tolerance 2 x {:.0e}",
                    r.max_relative_residual, r.tolerance
                ),
            };
            (Output::Commutation(r), v)
        }
        "density" => {
            let p = params()?;
            let u = field(&cfg.field, Some(&p))?;
            let delta = match cfg.delta {
                Some(d) => d,
                None => cfg.delta_fraction * norm_full(&u, &p, spec)?.full,
            };
            let r = run_density_experiment(&u, &p, delta, spec)?;
            notes.push(CATALOG_NOTE.to_string());
            let v = Verdict {
                check: id.into(),
                passed: r.achieved,
                detail: format!(
                    "j = {}, eps = {}, total error {:.4e} against delta {:.4e}",
                    r.j, r.epsilon, r.total_error.value, delta
                ),
            };
            (Output::Density(r), v)
        }
        "sobolev-inequality" => {
            let p = params()?;
            let fields = cfg
                .fields
                .iter()
                .map(|f| field(f, Some(&p)))
                .collect::<Result<Vec<_>, _>>()?;
            bound(id, check_sobolev_inequality(&fields, &p, spec)?)
        }
        other => return Err(CliError::Usage(format!("unknown check `{other}`"))),
    };
    Ok(record(cfg, vec![output], vec![verdict], notes))
}

fn bound(id: &str, r: sobolev_wlab::BoundReport) -> (Output, Verdict) {
    let v = Verdict {
        check: id.into(),
        passed: r.passed(),
        detail: format!("{:?}, measured constant {:.6e} +- {:.2e}", r.verdict, r.measured_constant, r.measured_stderr),
    };
    (Output::Bound(r), v)
}

/// Parses a `sweep_of` value into the command it runs.
pub fn sweep_target(name: &str) -> Command {
    match name {
        "norm" => Command::Norm,
        "approx" => Command::Approx,
        id => Command::Verify(id.to_string()),
    }
}

/// One record per value of `a`, computed on `parallelism` workers and
/// returned in sweep order with the file stem of each point.
pub fn run_sweep(cfg: &RunConfig) -> Result<Vec<(String, Result<ResultRecord, CliError>)>, CliError> {
    cfg.validate()?;
    let points: Vec<(usize, RunConfig)> = cfg
        .sweep_a
        .iter()
        .enumerate()
        .map(|(i, &a)| {
            let mut c = cfg.clone();
            c.a = a;
            c.command = sweep_target(&cfg.sweep_of);
            (i, c)
        })
        .collect();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.parallelism)
        .build()
        .map_err(|e| CliError::Usage(format!("cannot start {} workers: {e}", cfg.parallelism)))?;
    let results = pool.install(|| {
        points
            .par_iter()
            .map(|(i, c)| (format!("sweep-{i:02}-a{}", c.a), run_command(c)))
            .collect()
    });
    Ok(results)
}

/// File stem of a command's record.
pub fn stem(command: &Command) -> String {
    match command {
        Command::Verify(id) => format!("verify-{id}"),
        Command::CatalogList => "catalog".into(),
        other => other.to_string(),
    }
}

/// Re-executes the config stored in a record.
pub fn rerun(record: &ResultRecord) -> Result<ResultRecord, CliError> {
    run_command(&record.config)
}

/// Exit status of a finished record: 0 when every verdict passed, else 1.
pub fn exit_code(record: &ResultRecord) -> i32 {
    if record.passed() {
        0
    } else {
        1
    }
}
