use std::collections::BTreeMap;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Arg, ArgMatches};
use sobolev_wlab::STATEMENT_IDS;
use sobolev_wlab_cli::config::read_config_file;
use sobolev_wlab_cli::record::Output;
use sobolev_wlab_cli::run::{exit_code, run_sweep, stem};
use sobolev_wlab_cli::{resolve, run_command, write_outputs, CliError, Command, ResultRecord, KEYS, SEED_ENV};

fn cli() -> clap::Command {
    let mut globals: Vec<Arg> = KEYS
        .iter()
        .map(|(key, default, help)| {
            let help = if default.is_empty() {
                help.to_string()
            } else {
                format!("{help} [default: {default}]")
            };
            Arg::new(*key)
                .long(key.replace('_', "-"))
                .value_name("VALUE")
                .help(help)
                .global(true)
        })
        .collect();
    globals.push(
        Arg::new("config")
            .long("config")
            .value_name("FILE")
            .help("key = value file; flags override its entries")
            .global(true),
    );
    clap::Command::new("sobolev-wlab")
        .about("Weighted fractional Sobolev norms, approximation pipelines and numerical checks")
        .after_help(format!("{SEED_ENV} overrides --seed. Exit codes: 0 pass, 1 verdict failure, 2 usage or range error, 3 I/O error."))
        .subcommand_required(true)
        .args(globals)
        .subcommand(clap::Command::new("norm").about("Seminorm and critical weighted norm of --field"))
        .subcommand(clap::Command::new("approx").about("Errors of the truncate-then-mollify approximation at --j and --epsilon"))
        .subcommand(
            clap::Command::new("verify")
                .about("Run one numerical check")
                .arg(
                    Arg::new("id")
                        .required(true)
                        .value_parser(clap::builder::PossibleValuesParser::new(STATEMENT_IDS)),
                ),
        )
        .subcommand(clap::Command::new("sweep").about("Repeat --sweep-of for every value in --sweep-a"))
        .subcommand(
            clap::Command::new("catalog")
                .about("Field catalog")
                .subcommand_required(true)
                .subcommand(clap::Command::new("list").about("List the catalog fields")),
        )
}

fn flags(m: &ArgMatches) -> BTreeMap<String, String> {
    KEYS.iter()
        .filter_map(|(k, _, _)| m.get_one::<String>(k).map(|v| (k.to_string(), v.clone())))
        .collect()
}

fn report(record: &ResultRecord) {
    for v in &record.verdicts {
        println!("{}: {} ({})", v.check, if v.passed { "PASS" } else { "FAIL" }, v.detail);
    }
}

fn finish(record: &ResultRecord, stem: &str) -> Result<i32, CliError> {
    report(record);
    for path in write_outputs(record, stem)? {
        println!("wrote {}", path.display());
    }
    Ok(exit_code(record))
}

fn main_inner() -> Result<i32, CliError> {
    let matches = match cli().try_get_matches() {
        Ok(m) => m,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return Ok(code);
        }
    };
    let (command, sub) = match matches.subcommand() {
        Some(("norm", s)) => (Command::Norm, s),
        Some(("approx", s)) => (Command::Approx, s),
        Some(("verify", s)) => (Command::Verify(s.get_one::<String>("id").cloned().unwrap_or_default()), s),
        Some(("sweep", s)) => (Command::Sweep, s),
        Some(("catalog", s)) => (Command::CatalogList, s.subcommand().map_or(s, |(_, l)| l)),
        _ => return Err(CliError::Usage("missing command".into())),
    };
    let file = match sub.get_one::<String>("config") {
        Some(path) => read_config_file(&PathBuf::from(path))?,
        None => BTreeMap::new(),
    };
    let env_seed = std::env::var(SEED_ENV).ok();
    let cfg = resolve(command, &file, &flags(sub), env_seed.as_deref())?;
    match &cfg.command {
        Command::CatalogList => {
            let rec = run_command(&cfg)?;
            if let Some(Output::Catalog(entries)) = rec.outputs.first() {
                for e in entries {
                    println!("{:<16} {:<34} {}", e.id, e.example, e.description);
                }
            }
            Ok(0)
        }
        Command::Sweep => {
            let mut worst = 0;
            for (stem, res) in run_sweep(&cfg)? {
                let code = match res {
                    Ok(rec) => finish(&rec, &stem)?,
                    Err(e) => {
                        eprintln!("{stem}: {e}");
                        e.exit_code()
                    }
                };
                worst = worst.max(code);
            }
            Ok(worst)
        }
        c => {
            let rec = run_command(&cfg)?;
            finish(&rec, &stem(c))
        }
    }
}

fn main() -> ExitCode {
    let code = match main_inner() {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    };
    ExitCode::from(code as u8)
}
