use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use sobolev_wlab_cli::record::Output as RecordOutput;
use sobolev_wlab_cli::ResultRecord;

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_sobolev-wlab"));
    c.env_remove("SOBOLEV_WLAB_SEED");
    c
}

fn run(dir: &Path, args: &[&str]) -> Output {
    bin().current_dir(dir).args(args).output().expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exited normally")
}

fn read_record(path: &Path) -> ResultRecord {
    ResultRecord::from_json(&fs::read_to_string(path).unwrap()).unwrap()
}

fn without_timestamp(text: &str) -> String {
    text.lines()
        .filter(|l| !l.trim_start().starts_with("\"timestamp\""))
        .collect::<Vec<_>>()
        .join("\n")
}

#[test]
fn catalog_lists_every_field() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(dir.path(), &["catalog", "list"]);
    assert_eq!(code(&o), 0);
    let text = String::from_utf8(o.stdout).unwrap();
    for id in sobolev_wlab::field::CATALOG_IDS {
        assert!(text.contains(id), "{id} missing from\n{text}");
    }
}

#[test]
fn usage_and_range_errors_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let o = run(d, &["norm", "--a", "0.9", "--n", "1", "--s", "0.5", "--p", "2"]);
    assert_eq!(code(&o), 2);
    assert!(String::from_utf8_lossy(&o.stderr).contains("range violation"));
    assert_eq!(code(&run(d, &["norm", "--no-such-flag", "1"])), 2);
    assert_eq!(code(&run(d, &["verify", "not-a-check"])), 2);
    assert_eq!(code(&run(d, &["norm", "--field", "unknown_field"])), 2);
    fs::write(d.join("bad.conf"), "colour = red\n").unwrap();
    let o = run(d, &["norm", "--config", "bad.conf"]);
    assert_eq!(code(&o), 2);
    assert!(String::from_utf8_lossy(&o.stderr).contains("colour"));
    // s p = n: the critical norm is undefined
    assert_eq!(code(&run(d, &["norm", "--s", "0.5", "--a", "0.2"])), 2);
}

#[test]
fn unwritable_output_exits_3() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("blocker"), "").unwrap();
    let o = run(dir.path(), &["norm", "--samples", "2000", "--out", "blocker/sub"]);
    assert_eq!(code(&o), 3);
}

#[test]
fn commutation_passes_and_reversed_ladder_fails() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let o = run(d, &["verify", "commutation", "--field", "smooth_bump(R=1)", "--points", "30"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stdout));
    let args = ["verify", "truncation", "--field", "polynomial_tail(gamma=3)", "--samples", "4000"];
    assert_eq!(code(&run(d, &args)), 0);
    let mut rev = args.to_vec();
    rev.extend(["--self-test", "true"]);
    assert_eq!(code(&run(d, &rev)), 1);
}

#[test]
fn flags_override_file_and_env_overrides_flags() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    fs::write(d.join("run.conf"), "# test config\nseed = 7\nsamples = 2000\n").unwrap();
    assert_eq!(code(&run(d, &["norm", "--config", "run.conf", "--seed", "42"])), 0);
    assert_eq!(read_record(&d.join("results/norm.json")).config.seed, 42);
    assert_eq!(code(&run(d, &["norm", "--config", "run.conf"])), 0);
    assert_eq!(read_record(&d.join("results/norm.json")).config.seed, 7);
    let o = bin()
        .current_dir(d)
        .env("SOBOLEV_WLAB_SEED", "9")
        .args(["norm", "--config", "run.conf", "--seed", "42"])
        .output()
        .unwrap();
    assert_eq!(code(&o), 0);
    assert_eq!(read_record(&d.join("results/norm.json")).config.seed, 9);
}

#[test]
fn sweep_writes_one_record_per_point() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let o = run(d, &["sweep", "--n", "2", "--s", "0.5", "--sweep-a", "0, 0.1, 0.2", "--samples", "2000", "--parallelism", "2"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let mut names: Vec<String> = fs::read_dir(d.join("results"))
        .unwrap()
        .map(|e| e.unwrap().file_name().into_string().unwrap())
        .collect();
    names.sort();
    assert_eq!(names, ["sweep-00-a0.json", "sweep-01-a0.1.json", "sweep-02-a0.2.json"]);
    for (name, a) in names.iter().zip([0.0, 0.1, 0.2]) {
        let r = read_record(&d.join("results").join(name));
        assert_eq!(r.config.a, a);
        assert_eq!(r.command, "norm");
    }
}

#[test]
fn records_reproduce_byte_for_byte() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let args = [
        "verify",
        "mollification",
        "--field",
        "hat_1d",
        "--samples",
        "4000",
        "--ladder",
        "1, 0.5, 0.25, 0.1, 0.05",
        "--format",
        "json,csv,svg",
    ];
    assert_eq!(code(&run(d, &args)), 0);
    let first = fs::read_to_string(d.join("results/verify-mollification.json")).unwrap();
    assert_eq!(code(&run(d, &args)), 0);
    let second = fs::read_to_string(d.join("results/verify-mollification.json")).unwrap();
    assert_eq!(without_timestamp(&first), without_timestamp(&second));
    assert!(first.ends_with('\n'));

    let rec = ResultRecord::from_json(&first).unwrap();
    assert_eq!(rec.to_canonical_json(), first);
    let again = sobolev_wlab_cli::rerun(&rec).unwrap();
    assert_eq!(without_timestamp(&again.to_canonical_json()), without_timestamp(&first));

    let csv = fs::read_to_string(d.join("results/verify-mollification.csv")).unwrap();
    assert_eq!(csv.lines().count(), 6);
    assert_eq!(csv.lines().next(), Some("knob,value,error,stderr"));
    let svg = fs::read_to_string(d.join("results/verify-mollification.svg")).unwrap();
    assert_eq!(svg.matches("<polyline").count(), 1);
    assert!(matches!(rec.outputs[0], RecordOutput::Convergence(_)));
}

#[test]
fn density_reports_the_catalog_limitation() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let o = run(d, &["verify", "density", "--field", "smooth_bump(R=1)", "--delta-fraction", "0.5", "--samples", "4000"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stdout));
    let r = read_record(&d.join("results/verify-density.json"));
    assert!(r.notes.iter().any(|n| n.contains("catalog")));
}
