mod common;

use std::path::Path;
use std::process::Command;

use common::*;

fn bin() -> Command {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_stepcheck"));
    cmd.env_remove("STEPCHECK_CACHE_DIR").env("HOME", "/nonexistent");
    cmd
}

fn scripted() -> String {
    format!("scripted:{}", path_str(&hermetic("scripts.json")))
}

fn files_under(dir: &Path) -> Vec<String> {
    let mut names: Vec<String> = walk(dir)
        .into_iter()
        .map(|p| p.strip_prefix(dir).unwrap().display().to_string())
        .collect();
    names.sort();
    names
}

fn walk(dir: &Path) -> Vec<std::path::PathBuf> {
    let mut out = Vec::new();
    for entry in std::fs::read_dir(dir).unwrap() {
        let path = entry.unwrap().path();
        if path.is_dir() {
            out.extend(walk(&path));
        } else {
            out.push(path);
        }
    }
    out
}

#[test]
fn binary_verifies_a_scripted_claim() {
    let cache = tempfile::tempdir().unwrap();
    seed_cache(cache.path());
    let out = tempfile::tempdir().unwrap();
    let trace = out.path().join("t.jsonl");
    let o = bin()
        .args(["--config", "/dev/null", "--cache-dir", path_str(cache.path())])
        .args(["--search", "offline", "--backend", &scripted()])
        .args(["verify", "Honey can cure a common cold.", "--id", "hfc-honey", "--out", path_str(&trace)])
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let stdout = String::from_utf8(o.stdout).unwrap();
    assert!(stdout.starts_with("CLAIM: Honey can cure a common cold.\nQ1: Can honey cure the common cold?\n"));
    assert!(stdout.contains("\nVERDICT: REFUTED\nEXPLANATION: "));
    let record = std::fs::read_to_string(&trace).unwrap();
    assert_eq!(record.lines().count(), 1);
    let v: serde_json::Value = serde_json::from_str(&record).unwrap();
    assert_eq!(v["verdict"], "Refuted");
}

#[test]
fn binary_usage_errors_exit_2() {
    let cases: &[&[&str]] = &[
        &["verify", ""],
        &["verify", "   "],
        &["--config", "/dev/null", "--max-questions", "0", "verify", "x"],
        &["--config", "/dev/null", "run", "--dataset", "/no/such/file.jsonl", "--format", "generic", "--out", "/tmp/x"],
        &["--config", "/dev/null", "run", "--dataset", "/dev/null", "--format", "fever", "--out", "/tmp/x"],
        &["--config", "/no/such/config.toml", "verify", "x"],
        &["verify"],
    ];
    for args in cases {
        let o = bin().args(*args).output().unwrap();
        assert_eq!(o.status.code(), Some(2), "{args:?}: {}", String::from_utf8_lossy(&o.stderr));
        assert!(!o.stderr.is_empty(), "{args:?}");
    }
    let help = bin().arg("--help").output().unwrap();
    assert_eq!(help.status.code(), Some(0));
}

#[test]
fn aborted_verify_exits_1_with_reason() {
    let dir = tempfile::tempdir().unwrap();
    let script = dir.path().join("script.json");
    std::fs::write(&script, r#"{"bad": ["I would rather not ask anything."]}"#).unwrap();
    let backend = format!("scripted:{}", path_str(&script));
    let r = cli(&[
        "--config",
        "/dev/null",
        "--cache-dir",
        path_str(dir.path()),
        "--search",
        "offline",
        "--backend",
        &backend,
        "verify",
        "Garlic lowers blood pressure.",
        "--id",
        "bad",
        "--out",
        path_str(&dir.path().join("t.jsonl")),
    ]);
    assert_eq!(r.code, 1);
    assert!(r.stdout.is_empty());
    assert!(r.stderr.contains("bad"), "{}", r.stderr);
    assert!(r.stderr.to_lowercase().contains("question"), "{}", r.stderr);
    assert!(!dir.path().join("t.jsonl").exists());
}

#[test]
fn limited_run_prints_metrics() {
    let cache = tempfile::tempdir().unwrap();
    seed_cache(cache.path());
    let out = tempfile::tempdir().unwrap();
    let r = cli(&[
        "--config",
        "/dev/null",
        "--cache-dir",
        path_str(cache.path()),
        "--search",
        "offline",
        "--backend",
        &scripted(),
        "run",
        "--dataset",
        path_str(&hermetic("claims.jsonl")),
        "--format",
        "generic",
        "--limit",
        "3",
        "--out",
        path_str(out.path()),
    ]);
    assert_eq!(r.code, 0, "{}", r.stderr);
    // first three fixture claims: one true positive, two true negatives
    assert!(r.stdout.starts_with("loaded 10 claims (4 supported, 6 refuted; 0 of 10 records dropped)\n"));
    assert!(r.stdout.contains("precision=1.0000 recall=1.0000 f1=1.0000 (completed 3/3, failed 0, forced 0)"));
    let traces = std::fs::read_to_string(out.path().join("traces.jsonl")).unwrap();
    assert_eq!(traces.lines().count(), 3);
}

#[test]
fn full_run_is_idempotent_and_leaves_no_temp_files() {
    let cache = tempfile::tempdir().unwrap();
    seed_cache(cache.path());
    let cache_files = files_under(cache.path());
    assert_eq!(cache_files.len(), 20);
    assert!(cache_files.iter().all(|f| f.ends_with(".json")));

    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let ra = hermetic_run(cache.path(), a.path());
    let rb = hermetic_run(cache.path(), b.path());
    assert_eq!(ra.code, 0, "{}", ra.stderr);
    assert!(ra.stdout.contains("precision=0.7500 recall=0.7500 f1=0.7500 (completed 10/10, failed 0, forced 1)"));
    assert_eq!(ra.stdout.replace(path_str(a.path()), "OUT"), rb.stdout.replace(path_str(b.path()), "OUT"));

    let names = files_under(a.path());
    assert_eq!(names, ["manifest.json", "report.csv", "report.txt", "traces.jsonl"]);
    assert_eq!(names, files_under(b.path()));
    for name in &names {
        let x = std::fs::read(a.path().join(name)).unwrap();
        let y = std::fs::read(b.path().join(name)).unwrap();
        assert!(x == y, "{name} differs between runs");
    }
    // Running into the same directory again overwrites in place.
    let again = hermetic_run(cache.path(), a.path());
    assert_eq!(again.code, 0);
    assert_eq!(files_under(a.path()), names);
    // Replays never touch the cache.
    assert_eq!(files_under(cache.path()), cache_files);
}

#[test]
fn manifest_records_configuration() {
    let cache = tempfile::tempdir().unwrap();
    seed_cache(cache.path());
    let out = tempfile::tempdir().unwrap();
    assert_eq!(hermetic_run(cache.path(), out.path()).code, 0);
    let m: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out.path().join("manifest.json")).unwrap()).unwrap();
    assert_eq!(m["schema"], "stepcheck-run/1");
    assert_eq!(m["evidence_source"], "whole web");
    assert_eq!(m["config"]["max_questions"], 5);
    assert_eq!(m["confusion"], serde_json::json!({"tp": 3, "fp": 1, "fn": 1, "tn": 5}));
    assert_eq!(m["config_fingerprint"].as_str().unwrap().len(), 64);
    assert_eq!(m["counts"]["forced"], 1);
}

#[test]
fn report_combines_runs_with_baselines() {
    let cache = tempfile::tempdir().unwrap();
    seed_cache(cache.path());
    let run = tempfile::tempdir().unwrap();
    assert_eq!(hermetic_run(cache.path(), run.path()).code, 0);
    let out = tempfile::tempdir().unwrap();

    let r = cli(&["report", "--run", path_str(run.path()), "--out", path_str(out.path())]);
    assert_eq!(r.code, 0, "{}", r.stderr);
    // header line, column line, the run and every baseline
    assert_eq!(r.stdout.lines().count(), 2 + 1 + 33);
    let csv = std::fs::read_to_string(out.path().join("report.csv")).unwrap();
    assert!(csv.contains("\nThree-part pipeline,Wikipedia,HealthFC,65.2,92.6,76.5,false,true\n"));
    assert!(csv.contains("\ngpt-4o-mini-2024-07-18,whole web,generic,75.0,75.0,75.0,true,false\n"));

    let r = cli(&["report", "--run", path_str(run.path()), "--no-baselines", "--out", path_str(out.path())]);
    assert_eq!(r.code, 0);
    assert_eq!(r.stdout.lines().count(), 3);

    let missing = cli(&["report", "--run", "/no/such/run", "--out", path_str(out.path())]);
    assert_eq!(missing.code, 2);
}

#[test]
fn cache_warm_then_clear() {
    let cache = tempfile::tempdir().unwrap();
    let search = format!("fixture:{}", path_str(&hermetic("search.json")));
    let warm = |cache: &Path| {
        cli(&[
            "--config",
            "/dev/null",
            "--cache-dir",
            path_str(cache),
            "--search",
            &search,
            "cache-warm",
            "--questions",
            path_str(&hermetic("questions.txt")),
        ])
    };
    let first = warm(cache.path());
    assert_eq!(first.code, 0, "{}", first.stderr);
    assert_eq!(first.stdout, "cached 20 questions (0 already present)\n");
    assert_eq!(warm(cache.path()).stdout, "cached 0 questions (20 already present)\n");

    let clear = cli(&["--config", "/dev/null", "--cache-dir", path_str(cache.path()), "cache-clear"]);
    assert_eq!(clear.code, 0);
    assert_eq!(clear.stdout, format!("removed 20 cache entries from {}\n", cache.path().display()));
    assert!(files_under(cache.path()).is_empty());
}

#[test]
fn cache_dir_from_environment() {
    let cache = tempfile::tempdir().unwrap();
    let o = bin()
        .env("STEPCHECK_CACHE_DIR", cache.path())
        .args(["--config", "/dev/null", "cache-clear"])
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(
        String::from_utf8(o.stdout).unwrap(),
        format!("removed 0 cache entries from {}\n", cache.path().display())
    );
}

#[test]
fn config_file_is_read() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("config.toml");
    std::fs::write(&config, "max_questions = 0\n").unwrap();
    let r = cli(&["--config", path_str(&config), "verify", "x"]);
    assert_eq!(r.code, 2);
    assert!(r.stderr.contains("max_questions"), "{}", r.stderr);
}
