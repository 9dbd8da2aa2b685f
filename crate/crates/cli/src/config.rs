//! Run configuration: built-in defaults, then a `key = value` file, then
//! command-line flags, then `SOBOLEV_WLAB_SEED`.

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sobolev_wlab::{Error as CoreError, FieldSpec, Kernel, Method, QuadratureSpec, SpaceParams, STATEMENT_IDS};

use crate::error::CliError;

pub const SEED_ENV: &str = "SOBOLEV_WLAB_SEED";

/// Recognized keys with their defaults and help text. Flags use the same
/// names with `-` for `_`.
pub const KEYS: &[(&str, &str, &str)] = &[
    ("field", "smooth_bump(R=1)", "catalog field, e.g. \"polynomial_tail(gamma=3)\""),
    ("fields", "smooth_bump(R=1), smooth_bump(R=3)", "field set for sobolev-inequality"),
    ("n", "1", "dimension"),
    ("s", "0.3", "smoothness order in (0, 1)"),
    ("p", "2", "integrability exponent > 1"),
    ("a", "0.1", "weight exponent"),
    ("method", "mc", "mc or oracle (n = 1 only)"),
    ("samples", "100000", "Monte Carlo draws per integral"),
    ("grid_points", "1024", "tensor oracle grid size"),
    ("seed", "1", "base seed"),
    ("outer_radius", "", "truncation radius of the norm integrals"),
    ("out", "results", "output directory"),
    ("format", "json", "comma-separated subset of json, csv, svg"),
    ("j", "1", "cutoff scale for approx"),
    ("epsilon", "0.1", "mollification scale for approx and commutation"),
    ("delta", "", "absolute density target; overrides delta_fraction"),
    ("delta_fraction", "0.2", "density target as a fraction of the full norm"),
    ("ladder", "", "knob ladder; each check has its own default"),
    ("trials", "10000", "trials of the averaged weight checks"),
    ("trial_samples", "4096", "draws per ball average"),
    ("points", "100", "random pairs of the commutation check"),
    ("q", "", "exponent of the maximal check; defaults to p"),
    ("kind", "pair", "pair or point, for the maximal check"),
    ("weight_grid", "5", "side of the finiteness weight grid"),
    ("sweep_a", "0, 0.05, 0.1, 0.15", "values of a visited by sweep"),
    ("sweep_of", "norm", "command run at each sweep point: norm, approx or a check id"),
    ("parallelism", "1", "sweep worker count"),
    ("self_test", "false", "reverse the ladder (negative control)"),
];

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "name", content = "target", rename_all = "snake_case")]
pub enum Command {
    Norm,
    Approx,
    Verify(String),
    Sweep,
    CatalogList,
}

impl fmt::Display for Command {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Command::Norm => f.write_str("norm"),
            Command::Approx => f.write_str("approx"),
            Command::Verify(id) => write!(f, "verify {id}"),
            Command::Sweep => f.write_str("sweep"),
            Command::CatalogList => f.write_str("catalog list"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Json,
    Csv,
    Svg,
}

/// Fully resolved and typed settings. Everything a run depends on is here,
/// so a record's copy reproduces it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub command: Command,
    pub field: String,
    pub fields: Vec<String>,
    pub n: usize,
    pub s: f64,
    pub p: f64,
    pub a: f64,
    pub method: Method,
    pub samples: u64,
    pub grid_points: usize,
    pub seed: u64,
    pub outer_radius: Option<f64>,
    pub out: PathBuf,
    pub formats: Vec<Format>,
    pub j: f64,
    pub epsilon: f64,
    pub delta: Option<f64>,
    pub delta_fraction: f64,
    pub ladder: Option<Vec<f64>>,
    pub trials: u64,
    pub trial_samples: u64,
    pub points: u64,
    pub q: Option<f64>,
    pub kind: String,
    pub weight_grid: usize,
    pub sweep_a: Vec<f64>,
    pub sweep_of: String,
    pub parallelism: usize,
    pub self_test: bool,
}

impl RunConfig {
    /// Space parameters; `s p >= n` and other range failures are errors.
    pub fn params(&self) -> Result<SpaceParams<f64>, CoreError> {
        SpaceParams::new(self.n, self.s, self.p, self.a)
    }

    /// Seminorm kernel with `alpha = beta = a`; exists for `s p >= n` too.
    pub fn kernel(&self) -> Result<Kernel<f64>, CoreError> {
        Kernel::new(self.n, self.s, self.p, self.a, self.a)
    }

    pub fn spec(&self) -> QuadratureSpec {
        let mut spec = match self.method {
            Method::MonteCarlo => QuadratureSpec::monte_carlo(self.samples, self.seed),
            Method::TensorOracle1D => QuadratureSpec::oracle(self.grid_points).with_seed(self.seed),
        };
        spec.outer_radius = self.outer_radius;
        spec
    }

    /// Checks everything that can fail before computing.
    pub fn validate(&self) -> Result<(), CliError> {
        match self.params() {
            Ok(_) => {}
            Err(CoreError::RangeViolation { constraint: "s*p < n", .. }) => {
                self.kernel()?;
            }
            Err(e) => return Err(e.into()),
        }
        self.spec().validate()?;
        FieldSpec::parse(&self.field)?;
        for f in &self.fields {
            FieldSpec::parse(f)?;
        }
        if let Command::Verify(id) = &self.command {
            if !STATEMENT_IDS.contains(&id.as_str()) {
                return Err(CliError::Usage(format!(
                    "unknown check `{id}`; expected one of {}",
                    STATEMENT_IDS.join(", ")
                )));
            }
        }
        if self.kind != "pair" && self.kind != "point" {
            return Err(CliError::Usage(format!("kind must be pair or point, got `{}`", self.kind)));
        }
        let sweepable = self.sweep_of == "norm" || self.sweep_of == "approx" || STATEMENT_IDS.contains(&self.sweep_of.as_str());
        if !sweepable {
            return Err(CliError::Usage(format!("cannot sweep `{}`", self.sweep_of)));
        }
        if self.parallelism == 0 {
            return Err(CliError::Usage("parallelism must be at least 1".into()));
        }
        Ok(())
    }

    /// `key = value` lines that resolve back to this config.
    pub fn to_config_lines(&self) -> String {
        let list = |v: &[f64]| v.iter().map(|x| format!("{x:?}")).collect::<Vec<_>>().join(", ");
        let opt = |v: Option<f64>| v.map_or(String::new(), |x| format!("{x:?}"));
        let formats: Vec<&str> = self
            .formats
            .iter()
            .map(|f| match f {
                Format::Json => "json",
                Format::Csv => "csv",
                Format::Svg => "svg",
            })
            .collect();
        let lines = [
            ("field", self.field.clone()),
            ("fields", self.fields.join(", ")),
            ("n", self.n.to_string()),
            ("s", format!("{:?}", self.s)),
            ("p", format!("{:?}", self.p)),
            ("a", format!("{:?}", self.a)),
            (
                "method",
                match self.method {
                    Method::MonteCarlo => "mc".into(),
                    Method::TensorOracle1D => "oracle".into(),
                },
            ),
            ("samples", self.samples.to_string()),
            ("grid_points", self.grid_points.to_string()),
            ("seed", self.seed.to_string()),
            ("outer_radius", opt(self.outer_radius)),
            ("out", self.out.display().to_string()),
            ("format", formats.join(", ")),
            ("j", format!("{:?}", self.j)),
            ("epsilon", format!("{:?}", self.epsilon)),
            ("delta", opt(self.delta)),
            ("delta_fraction", format!("{:?}", self.delta_fraction)),
            ("ladder", self.ladder.as_deref().map_or(String::new(), list)),
            ("trials", self.trials.to_string()),
            ("trial_samples", self.trial_samples.to_string()),
            ("points", self.points.to_string()),
            ("q", opt(self.q)),
            ("kind", self.kind.clone()),
            ("weight_grid", self.weight_grid.to_string()),
            ("sweep_a", list(&self.sweep_a)),
            ("sweep_of", self.sweep_of.clone()),
            ("parallelism", self.parallelism.to_string()),
            ("self_test", self.self_test.to_string()),
        ];
        let mut s = String::new();
        for (k, v) in lines {
            s.push_str(k);
            s.push_str(" = ");
            s.push_str(&v);
            s.push('\n');
        }
        s
    }
}

/// Parses `key = value` lines; `#` starts a comment, blank lines are skipped.
pub fn parse_config_text(text: &str, origin: &str) -> Result<BTreeMap<String, String>, CliError> {
    let mut out = BTreeMap::new();
    for (i, raw) in text.lines().enumerate() {
        let line = match raw.find('#') {
            Some(c) => &raw[..c],
            None => raw,
        }
        .trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| CliError::Usage(format!("{origin}:{}: expected `key = value`", i + 1)))?;
        let k = k.trim();
        if !KEYS.iter().any(|(name, _, _)| *name == k) {
            return Err(CliError::Usage(format!("{origin}:{}: unknown key `{k}`", i + 1)));
        }
        out.insert(k.to_string(), v.trim().to_string());
    }
    Ok(out)
}

pub fn read_config_file(path: &Path) -> Result<BTreeMap<String, String>, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::Io {
        path: path.to_path_buf(),
        source: e,
    })?;
    parse_config_text(&text, &path.display().to_string())
}

/// Splits on commas outside parentheses.
pub fn split_list(s: &str) -> Vec<String> {
    let mut out = Vec::new();
    let mut depth = 0i32;
    let mut cur = String::new();
    for c in s.chars() {
        match c {
            '(' => depth += 1,
            ')' => depth -= 1,
            _ => {}
        }
        if c == ',' && depth == 0 {
            out.push(cur.trim().to_string());
            cur.clear();
        } else {
            cur.push(c);
        }
    }
    if !cur.trim().is_empty() {
        out.push(cur.trim().to_string());
    }
    out
}

fn num<T: std::str::FromStr>(key: &str, v: &str) -> Result<T, CliError> {
    v.trim()
        .parse()
        .map_err(|_| CliError::Usage(format!("`{key}`: cannot parse `{v}`")))
}

fn opt_num(key: &str, v: &str) -> Result<Option<f64>, CliError> {
    if v.trim().is_empty() {
        Ok(None)
    } else {
        num(key, v).map(Some)
    }
}

fn num_list(key: &str, v: &str) -> Result<Vec<f64>, CliError> {
    split_list(v).iter().map(|x| num(key, x)).collect()
}

/// Merges the layers and types the result. `env_seed` is the value of
/// [`SEED_ENV`], if set.
pub fn resolve(
    command: Command,
    file: &BTreeMap<String, String>,
    flags: &BTreeMap<String, String>,
    env_seed: Option<&str>,
) -> Result<RunConfig, CliError> {
    let mut m: BTreeMap<String, String> = KEYS.iter().map(|(k, d, _)| (k.to_string(), d.to_string())).collect();
    for layer in [file, flags] {
        for (k, v) in layer {
            if !m.contains_key(k) {
                return Err(CliError::Usage(format!("unknown key `{k}`")));
            }
            m.insert(k.clone(), v.clone());
        }
    }
    if let Some(seed) = env_seed {
        m.insert("seed".into(), seed.to_string());
    }
    let g = |k: &str| m[k].as_str();
    let method = match g("method") {
        "mc" => Method::MonteCarlo,
        "oracle" => Method::TensorOracle1D,
        other => return Err(CliError::Usage(format!("method must be mc or oracle, got `{other}`"))),
    };
    let mut formats = Vec::new();
    for f in split_list(g("format")) {
        let f = match f.as_str() {
            "json" => Format::Json,
            "csv" => Format::Csv,
            "svg" => Format::Svg,
            other => return Err(CliError::Usage(format!("unknown format `{other}`"))),
        };
        if !formats.contains(&f) {
            formats.push(f);
        }
    }
    let ladder = if g("ladder").trim().is_empty() {
        None
    } else {
        Some(num_list("ladder", g("ladder"))?)
    };
    let cfg = RunConfig {
        command,
        field: g("field").to_string(),
        fields: split_list(g("fields")),
        n: num("n", g("n"))?,
        s: num("s", g("s"))?,
        p: num("p", g("p"))?,
        a: num("a", g("a"))?,
        method,
        samples: num("samples", g("samples"))?,
        grid_points: num("grid_points", g("grid_points"))?,
        seed: num(if env_seed.is_some() { SEED_ENV } else { "seed" }, g("seed"))?,
        outer_radius: opt_num("outer_radius", g("outer_radius"))?,
        out: PathBuf::from(g("out")),
        formats,
        j: num("j", g("j"))?,
        epsilon: num("epsilon", g("epsilon"))?,
        delta: opt_num("delta", g("delta"))?,
        delta_fraction: num("delta_fraction", g("delta_fraction"))?,
        ladder,
        trials: num("trials", g("trials"))?,
        trial_samples: num("trial_samples", g("trial_samples"))?,
        points: num("points", g("points"))?,
        q: opt_num("q", g("q"))?,
        kind: g("kind").to_string(),
        weight_grid: num("weight_grid", g("weight_grid"))?,
        sweep_a: num_list("sweep_a", g("sweep_a"))?,
        sweep_of: g("sweep_of").to_string(),
        parallelism: num("parallelism", g("parallelism"))?,
        self_test: num("self_test", g("self_test"))?,
    };
    cfg.validate()?;
    Ok(cfg)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn flags(pairs: &[(&str, &str)]) -> BTreeMap<String, String> {
        pairs.iter().map(|(k, v)| (k.to_string(), v.to_string())).collect()
    }

    #[test]
    fn defaults_resolve() {
        let c = resolve(Command::Norm, &BTreeMap::new(), &BTreeMap::new(), None).unwrap();
        assert_eq!((c.n, c.s, c.p, c.a, c.seed), (1, 0.3, 2.0, 0.1, 1));
        assert_eq!(c.formats, vec![Format::Json]);
        assert_eq!(c.sweep_a, vec![0.0, 0.05, 0.1, 0.15]);
    }

    #[test]
    fn flags_beat_file_and_env_beats_flags() {
        let file = parse_config_text("seed = 7 # from file\n\nn = 2\n", "test").unwrap();
        let c = resolve(Command::Norm, &file, &flags(&[("seed", "42")]), None).unwrap();
        assert_eq!((c.seed, c.n), (42, 2));
        let c = resolve(Command::Norm, &file, &flags(&[("seed", "42")]), Some("5")).unwrap();
        assert_eq!(c.seed, 5);
    }

    #[test]
    fn unknown_keys_are_usage_errors() {
        assert!(matches!(parse_config_text("colour = red\n", "f"), Err(CliError::Usage(_))));
        assert!(matches!(parse_config_text("no equals sign\n", "f"), Err(CliError::Usage(_))));
        assert!(resolve(Command::Norm, &BTreeMap::new(), &flags(&[("bogus", "1")]), None).is_err());
    }

    #[test]
    fn range_errors_surface() {
        let e = resolve(Command::Norm, &BTreeMap::new(), &flags(&[("n", "1"), ("s", "0.5"), ("p", "2"), ("a", "0.9")]), None)
            .unwrap_err();
        assert_eq!(e.exit_code(), 2);
        // s p = n still resolves: pair-only checks run on the kernel
        let c = resolve(Command::Norm, &BTreeMap::new(), &flags(&[("s", "0.5"), ("a", "0.2")]), None).unwrap();
        assert!(c.params().is_err() && c.kernel().is_ok());
    }

    #[test]
    fn lists_respect_parentheses() {
        assert_eq!(
            split_list("smooth_bump(R=1), singular_spike(gamma=0.1, c=2)"),
            vec!["smooth_bump(R=1)", "singular_spike(gamma=0.1, c=2)"]
        );
        assert_eq!(split_list(" 1, 2 ,4"), vec!["1", "2", "4"]);
    }

    #[test]
    fn config_lines_round_trip() {
        let c = resolve(
            Command::Verify("truncation".into()),
            &BTreeMap::new(),
            &flags(&[("ladder", "1, 2, 4"), ("delta", "0.3"), ("format", "json, csv")]),
            None,
        )
        .unwrap();
        let back = resolve(c.command.clone(), &parse_config_text(&c.to_config_lines(), "x").unwrap(), &BTreeMap::new(), None).unwrap();
        assert_eq!(back, c);
    }
}
