use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../core/fixtures").join(name)
}

fn program() -> PathBuf {
    fixture("example_program.json")
}

fn domain() -> PathBuf {
    fixture("example_domain_product.json")
}

fn ogre(args: &[&dyn AsRef<std::ffi::OsStr>]) -> Output {
    let mut c = Command::new(env!("CARGO_BIN_EXE_ogre"));
    for a in args {
        c.arg(a);
    }
    c.output().expect("binary runs")
}

fn json(o: &Output) -> Value {
    serde_json::from_slice(&o.stdout).unwrap_or_else(|e| panic!("{e}: {}", String::from_utf8_lossy(&o.stdout)))
}

fn solver_ok() -> bool {
    let ok = ogre_core::solver::solver_available(&ogre_core::SolverConfig::resolve(None, None));
    if !ok {
        eprintln!("solver unavailable; skipping");
    }
    ok
}

#[test]
fn check_and_reach() {
    let o = ogre(&[&"--json", &"check", &program()]);
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(json(&o)["ok"], true);

    let o = ogre(&[&"--json", &"reach", &program(), &"--co"]);
    assert_eq!(o.status.code(), Some(0));
    let v = json(&o);
    assert_eq!(v["count"], 17);
    assert_eq!(v["markings"][0], serde_json::json!(["p0"]));
    assert!(v["co_related"].as_array().unwrap().contains(&serde_json::json!(["p1", "p5"])));
    assert!(!v["co_related"].as_array().unwrap().contains(&serde_json::json!(["p1", "p2"])));
}

#[test]
fn unsafe_program_exits_one() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("double.json");
    std::fs::write(
        &path,
        r#"{"variables":[],"places":["a","b","c"],"error_places":[],"initial_marking":["a"],
            "transitions":[{"id":"t","pre":["a"],"succ":["a","b"],"assume":"true","assign":{},"havoc":[]}]}"#,
    )
    .unwrap();
    assert_eq!(ogre(&[&"check", &path]).status.code(), Some(1));
    assert_eq!(ogre(&[&"reach", &path]).status.code(), Some(1));
}

#[test]
fn usage_and_io_errors_exit_two() {
    assert_eq!(ogre(&[&"reach", &"/nonexistent/program.json"]).status.code(), Some(2));
    assert_eq!(ogre(&[&"frobnicate"]).status.code(), Some(2));
    let o = ogre(&[&"--json", &"stats", &domain(), &"--program", &program()]);
    assert_eq!(o.status.code(), Some(2));
    assert_eq!(json(&o)["exit_code"], 2);
}

#[test]
fn annotate_stats_validate() {
    if !solver_ok() {
        return;
    }
    let dir = tempfile::tempdir().unwrap();
    let mut updates = Vec::new();
    for style in ["naive", "imperial", "imperial-focused"] {
        let og = dir.path().join(style).join("og.json");
        let o = ogre(&[&"annotate", &program(), &domain(), &"--style", &style, &"-o", &og]);
        assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
        let files: Vec<&str> = match style {
            "naive" => vec!["og.json"],
            "imperial" => vec!["empire.json", "og.json"],
            _ => vec!["empire.json", "focus.json", "og.json"],
        };
        let mut have: Vec<String> = std::fs::read_dir(dir.path().join(style))
            .unwrap()
            .map(|e| e.unwrap().file_name().into_string().unwrap())
            .collect();
        have.sort();
        assert_eq!(have, files);

        let o = ogre(&[&"--json", &"stats", &og, &"--program", &program()]);
        updates.push(json(&o)["ghost_updates"].as_u64().unwrap());

        let o = ogre(&[&"--json", &"validate", &program(), &og]);
        assert_eq!(o.status.code(), Some(0));
        assert_eq!(json(&o)["verdict"], "valid");
    }
    assert_eq!(updates, [10, 3, 3]);

    let empire: Value = serde_json::from_str(&std::fs::read_to_string(dir.path().join("imperial/empire.json")).unwrap()).unwrap();
    assert_eq!(empire["states"].as_array().unwrap().len(), 7);
    assert_eq!(empire["ghost_values"].as_array().unwrap().len(), 7);
}

#[test]
fn weakened_certificate_is_invalid() {
    if !solver_ok() {
        return;
    }
    let dir = tempfile::tempdir().unwrap();
    let og = dir.path().join("og.json");
    assert_eq!(ogre(&[&"annotate", &program(), &domain(), &"--style", &"imperial", &"-o", &og]).status.code(), Some(0));
    let mut raw: Value = serde_json::from_str(&std::fs::read_to_string(&og).unwrap()).unwrap();
    for entry in raw["omega"].as_array_mut().unwrap() {
        if entry["place"] == "e2" {
            entry["formula"] = "true".into();
        }
    }
    let bad = dir.path().join("bad.json");
    std::fs::write(&bad, serde_json::to_string(&raw).unwrap()).unwrap();
    let prog = program();
    for extra in [vec![], vec!["--oracle-bound", "3"]] {
        let mut args: Vec<&dyn AsRef<std::ffi::OsStr>> = vec![&"--json", &"validate", &prog, &bad];
        for e in &extra {
            args.push(e);
        }
        let o = ogre(&args);
        assert_eq!(o.status.code(), Some(1));
        let v = json(&o);
        assert_eq!(v["verdict"], "invalid");
        let failed: Vec<&str> = v["vcs"]
            .as_array()
            .unwrap()
            .iter()
            .filter(|x| x["status"] == "sat")
            .map(|x| x["name"].as_str().unwrap())
            .collect();
        assert_eq!(failed, ["vc_safe_e2"]);
    }
}

#[test]
fn missing_solver_is_unknown() {
    let dir = tempfile::tempdir().unwrap();
    let og = dir.path().join("og.json");
    std::fs::write(
        &og,
        r#"{"ghosts":[],"rho":{},"gamma":[],"omega":[
            {"place":"p0","formula":"true"},{"place":"p1","formula":"true"},{"place":"p2","formula":"true"},
            {"place":"p3","formula":"true"},{"place":"p4","formula":"true"},{"place":"p5","formula":"true"},
            {"place":"p6","formula":"true"},{"place":"p7","formula":"true"},{"place":"e1","formula":"false"},
            {"place":"e2","formula":"false"}]}"#,
    )
    .unwrap();
    let o = ogre(&[&"--json", &"validate", &program(), &og, &"--solver", &"/nonexistent/solver"]);
    assert_eq!(o.status.code(), Some(3), "{}", String::from_utf8_lossy(&o.stdout));
    assert_eq!(json(&o)["verdict"], "unknown");
    let o = ogre(&[&"domain-check", &program(), &domain(), &"--solver", &"/nonexistent/solver"]);
    assert_eq!(o.status.code(), Some(3));
}

#[test]
fn dump_and_parallel_validation() {
    if !solver_ok() {
        return;
    }
    let dir = tempfile::tempdir().unwrap();
    let og = dir.path().join("og.json");
    assert_eq!(ogre(&[&"annotate", &program(), &domain(), &"-o", &og]).status.code(), Some(0));
    let vcs = dir.path().join("vcs");
    let strip = |o: &Output| {
        let mut v = json(o);
        v.as_object_mut().unwrap().remove("timing_ms");
        v
    };
    let one = ogre(&[&"--json", &"validate", &program(), &og, &"--dump-vcs", &vcs]);
    let three = ogre(&[&"--json", &"validate", &program(), &og, &"--jobs", &"3"]);
    assert_eq!(strip(&one), strip(&three));
    let count = json(&one)["vcs"].as_array().unwrap().len();
    let files: Vec<_> = std::fs::read_dir(&vcs).unwrap().map(|e| e.unwrap().path()).collect();
    assert_eq!(files.len(), count);
    for f in files {
        let text = std::fs::read_to_string(&f).unwrap();
        assert!(text.trim_end().ends_with("(check-sat)"), "{}", f.display());
        assert!(f.file_name().unwrap().to_str().unwrap().starts_with("vc_"));
    }
}

#[test]
fn manifest_records_hashes() {
    let dir = tempfile::tempdir().unwrap();
    let m = dir.path().join("m.json");
    assert_eq!(ogre(&[&"reach", &program(), &"--manifest", &m]).status.code(), Some(0));
    let v: Value = serde_json::from_str(&std::fs::read_to_string(&m).unwrap()).unwrap();
    assert_eq!(v["command"], "reach");
    assert_eq!(v["modes"]["co"], "false");
    let hash = v["inputs"][0]["sha256"].as_str().unwrap();
    assert_eq!(hash.len(), 64);
    assert!(v["outputs"].as_array().unwrap().is_empty());
    assert_eq!(v["exit_code"], 0);
}
