use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use forced_kepler::report::ScenarioReport;
use forced_kepler::store::{load_report, verify, RowStatus, CACHE_ENV};

fn manifest() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
}

fn scenario_path(name: &str) -> PathBuf {
    manifest().join("scenarios").join(format!("{name}.json"))
}

fn cli(cache: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_forced-kepler"))
        .args(args)
        .env(CACHE_ENV, cache)
        .output()
        .unwrap()
}

fn run(cache: &Path, scenario: &Path, out: &Path, extra: &[&str]) -> Output {
    let mut args = vec!["run", scenario.to_str().unwrap(), "--out", out.to_str().unwrap()];
    args.extend(extra);
    cli(cache, &args)
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

#[test]
fn run_writes_report_and_map_then_serves_cache() {
    let tmp = tempfile::tempdir().unwrap();
    let cache = tmp.path().join("cache");
    let out = tmp.path().join("out");
    let first = run(&cache, &scenario_path("arc"), &out, &[]);
    assert!(first.status.success(), "{}", stderr(&first));
    assert!(!stdout(&first).contains("from cache"));
    let a = load_report(&out.join("report.json")).unwrap();
    assert!(a.digest_ok());
    assert!(out.join("map.svg").exists());
    assert_eq!(fs::read_dir(&cache).unwrap().count(), 1);

    let second = run(&cache, &scenario_path("arc"), &out, &[]);
    assert!(second.status.success());
    assert!(stdout(&second).contains("from cache"));
    assert_eq!(load_report(&out.join("report.json")).unwrap(), a);

    let fresh = run(&cache, &scenario_path("arc"), &tmp.path().join("fresh"), &["--no-cache"]);
    assert!(!stdout(&fresh).contains("from cache"));
    let b = load_report(&tmp.path().join("fresh/report.json")).unwrap();
    // identical up to the timing block
    assert_eq!(
        serde_json::to_string(&a.deterministic()).unwrap(),
        serde_json::to_string(&b.deterministic()).unwrap()
    );
}

#[test]
fn seed_flag_overrides_scenario_seed() {
    let tmp = tempfile::tempdir().unwrap();
    let o = run(tmp.path(), &scenario_path("arc"), &tmp.path().join("o"), &["--seed", "42", "--no-cache"]);
    assert!(o.status.success());
    let r = load_report(&tmp.path().join("o/report.json")).unwrap();
    assert_eq!((r.provenance.seed, r.scenario.solver.seed), (42, 42));
}

#[test]
fn tampered_cache_entry_is_recomputed() {
    let tmp = tempfile::tempdir().unwrap();
    let cache = tmp.path().join("cache");
    assert!(run(&cache, &scenario_path("arc"), &tmp.path().join("a"), &[]).status.success());
    let entry = fs::read_dir(&cache).unwrap().next().unwrap().unwrap().path();
    let text = fs::read_to_string(&entry).unwrap().replace("\"r\": 0", "\"r\": 7");
    fs::write(&entry, text).unwrap();
    let again = run(&cache, &scenario_path("arc"), &tmp.path().join("b"), &[]);
    assert!(again.status.success());
    assert!(!stdout(&again).contains("from cache"));
    assert!(load_report(&tmp.path().join("b/report.json")).unwrap().digest_ok());
}

#[test]
fn unknown_task_is_a_validation_error() {
    let tmp = tempfile::tempdir().unwrap();
    let bad = tmp.path().join("bad.json");
    fs::write(
        &bad,
        r#"{"name": "bad", "dimension": 2, "curve": {"catalog": "circle"}, "tasks": ["analyze2d", "fly"]}"#,
    )
    .unwrap();
    let o = run(tmp.path(), &bad, &tmp.path().join("o"), &[]);
    assert!(!o.status.success());
    assert!(stderr(&o).contains("tasks[1]"), "{}", stderr(&o));
    assert!(!tmp.path().join("o/report.json").exists());
}

#[test]
fn prerequisite_violation_names_the_task() {
    let tmp = tempfile::tempdir().unwrap();
    let bad = tmp.path().join("bad.json");
    fs::write(&bad, r#"{"name": "bad", "dimension": 3, "curve": {"catalog": "unknot"}, "tasks": ["analyze2d"]}"#).unwrap();
    let o = run(tmp.path(), &bad, &tmp.path().join("o"), &[]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("tasks[0]"));
}

#[test]
fn verify_flags_a_tampered_report() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("o");
    assert!(run(tmp.path(), &scenario_path("arc"), &out, &["--no-cache"]).status.success());
    let path = out.join("report.json");
    let ok = cli(tmp.path(), &["verify", path.to_str().unwrap()]);
    assert!(ok.status.success(), "{}", stdout(&ok));
    assert!(stdout(&ok).contains("report.digest"));

    let mut r: ScenarioReport = load_report(&path).unwrap();
    r.analyze2d.as_mut().unwrap().summary.r = 3;
    fs::write(&path, serde_json::to_string_pretty(&r).unwrap()).unwrap();
    let summary = verify(&path).unwrap();
    assert!(!summary.passed());
    assert_eq!(summary.row("report.digest").unwrap().status, RowStatus::Fail);
    assert_eq!(summary.row("report.reproduced").unwrap().status, RowStatus::Fail);
    let bad = cli(tmp.path(), &["verify", path.to_str().unwrap()]);
    assert_eq!(bad.status.code(), Some(1));
    assert!(stdout(&bad).contains("FAIL"));
}

#[test]
fn verify_marks_orbit_checks_not_applicable_without_orbit_task() {
    let summary = verify(&scenario_path("arc")).unwrap();
    assert!(summary.passed());
    assert_eq!(summary.row("orbits").unwrap().status, RowStatus::NotApplicable);
}

#[test]
fn plots_from_reports() {
    let tmp = tempfile::tempdir().unwrap();
    let epi = tmp.path().join("epi");
    let o = run(tmp.path(), &scenario_path("epicycloid_forcing"), &epi, &["--no-cache"]);
    assert!(o.status.success());
    let map = fs::read_to_string(epi.join("map.svg")).unwrap();
    assert!(map.starts_with("<svg"));
    for w in [1, 2, 3] {
        assert!(map.contains(&format!("winding {w}")));
        assert!(map.contains(forced_kepler::plot::winding_color(w)));
    }
    assert!(map.contains("r = 5, s = 3"));

    let report = epi.join("report.json").to_str().unwrap().to_string();
    let proj = cli(tmp.path(), &["plot", &report, "--kind", "projections"]);
    assert_eq!(proj.status.code(), Some(2));
    let orbits = cli(tmp.path(), &["plot", &report, "--kind", "orbits"]);
    assert!(stderr(&orbits).contains("no orbits output"));

    let unknot = tmp.path().join("unknot");
    assert!(run(tmp.path(), &scenario_path("unknot"), &unknot, &["--no-cache"]).status.success());
    let svg = fs::read_to_string(unknot.join("projections.svg")).unwrap();
    // the single central critical point is marked in each of the three projections
    assert_eq!(svg.matches("fill=\"gold\"").count(), 3);

    // segment: no orbits found, the map still renders without overlays
    let seg = tmp.path().join("seg");
    assert!(run(tmp.path(), &scenario_path("segment"), &seg, &["--no-cache"]).status.success());
    let out = seg.join("again.svg");
    let p = cli(
        tmp.path(),
        &["plot", seg.join("report.json").to_str().unwrap(), "--kind", "map", "--out", out.to_str().unwrap()],
    );
    assert!(p.status.success(), "{}", stderr(&p));
    assert!(!fs::read_to_string(out).unwrap().contains("orbit(s)"));
}

fn validator(name: &str) -> jsonschema::Validator {
    let dir = manifest().join("schemas");
    let load = |f: &str| serde_json::from_str::<serde_json::Value>(&fs::read_to_string(dir.join(f)).unwrap()).unwrap();
    jsonschema::options()
        .with_resource(
            "forced-kepler/scenario.schema.json",
            jsonschema::Resource::from_contents(load("scenario.schema.json")).unwrap(),
        )
        .build(&load(name))
        .unwrap()
}

#[test]
fn shipped_files_validate_against_schemas() {
    let scenario = validator("scenario.schema.json");
    for entry in fs::read_dir(manifest().join("scenarios")).unwrap() {
        let path = entry.unwrap().path();
        let v: serde_json::Value = serde_json::from_str(&fs::read_to_string(&path).unwrap()).unwrap();
        assert!(scenario.is_valid(&v), "{}", path.display());
    }
    let tmp = tempfile::tempdir().unwrap();
    assert!(run(tmp.path(), &scenario_path("segment"), &tmp.path().join("o"), &["--no-cache"]).status.success());
    let v: serde_json::Value = serde_json::from_str(&fs::read_to_string(tmp.path().join("o/report.json")).unwrap()).unwrap();
    let report = validator("report.schema.json");
    let errors: Vec<String> = report.iter_errors(&v).map(|e| e.to_string()).collect();
    assert!(errors.is_empty(), "{errors:?}");
}
