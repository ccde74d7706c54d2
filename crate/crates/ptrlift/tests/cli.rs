//! Black-box checks of the command-line surface: scan listings, usage
//! errors and exit codes, replay determinism, and report re-rendering.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> Command {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_ptrlift"));
    // keep the environment from supplying a live API key
    cmd.env_remove("OPENAI_API_KEY");
    cmd
}

fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("tests/fixtures")
        .join(name)
}

fn scripts(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("tests/scripts")
        .join(name)
}

fn stdout_of(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

fn stderr_of(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

#[test]
fn scan_lists_sites_with_locations_and_eligibility() {
    let out = bin()
        .args(["scan", "--crate"])
        .arg(fixture("subject"))
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", stderr_of(&out));
    let stdout = stdout_of(&out);
    assert!(stdout.contains("src/lib.rs:5"), "{stdout}");
    assert!(stdout.contains("let b: *mut i32 = Box::into_raw(Box::new(seed));"));
    assert!(stdout.contains("in boxed_total()  [eligible]"));
    assert!(stdout.contains("src/lib.rs:16"));
    assert!(stdout.contains("src/lib.rs:31"));
    assert!(stdout.contains("3 eligible of 3 raw pointer site(s)"));
}

#[test]
fn scan_explains_why_sites_are_skipped() {
    let out = bin()
        .args(["scan", "--crate"])
        .arg(fixture("clean_subject"))
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", stderr_of(&out));
    let stdout = stdout_of(&out);
    assert!(stdout.contains("[skipped:"), "{stdout}");
    assert!(stdout.contains("0 eligible of"), "{stdout}");
}

#[test]
fn run_without_config_or_crate_is_a_usage_error() {
    let out = bin().arg("run").output().unwrap();
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr_of(&out).contains("--config"), "{}", stderr_of(&out));
}

#[test]
fn run_without_api_key_points_at_the_env_var_and_replay() {
    let dir = tempfile::tempdir().unwrap();
    let config_path = dir.path().join("run.toml");
    fs::write(
        &config_path,
        format!(
            "crate_root = {:?}\n[model]\napi_key_env = \"PTRLIFT_TEST_UNSET_KEY\"\n",
            fixture("clean_subject")
        ),
    )
    .unwrap();
    let out = bin()
        .args(["run", "--config"])
        .arg(&config_path)
        .env_remove("PTRLIFT_TEST_UNSET_KEY")
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2), "{}", stderr_of(&out));
    let stderr = stderr_of(&out);
    assert!(stderr.contains("PTRLIFT_TEST_UNSET_KEY"), "{stderr}");
    assert!(stderr.contains("--replay"), "{stderr}");
}

#[test]
fn replay_without_a_script_directory_is_a_usage_error() {
    let out = bin()
        .args(["replay", "--crate"])
        .arg(fixture("clean_subject"))
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr_of(&out).contains("--replay"), "{}", stderr_of(&out));
}

#[test]
fn replay_runs_are_byte_identical_and_reports_re_render() {
    let dir = tempfile::tempdir().unwrap();
    let empty_scripts = dir.path().join("scripts");
    fs::create_dir_all(&empty_scripts).unwrap();

    let run = |report: &Path| {
        bin()
            .args(["replay", "--crate"])
            .arg(fixture("clean_subject"))
            .arg("--replay")
            .arg(&empty_scripts)
            .arg("--report")
            .arg(report)
            .output()
            .unwrap()
    };
    let report_a = dir.path().join("a.json");
    let report_b = dir.path().join("b.json");
    let out = run(&report_a);
    assert!(out.status.success(), "{}", stderr_of(&out));
    let stdout = stdout_of(&out);
    assert!(stdout.contains("final state: verified"), "{stdout}");
    assert!(stdout.contains("eliminated: 0 raw pointer(s)"), "{stdout}");
    assert!(run(&report_b).status.success());

    let json_a = fs::read_to_string(&report_a).unwrap();
    let json_b = fs::read_to_string(&report_b).unwrap();
    assert_eq!(json_a, json_b, "replayed reports are byte-identical");
    assert!(dir.path().join("a.csv").exists(), "csv written alongside json");

    // The report subcommand re-renders a saved JSON report.
    let rendered = bin()
        .args(["report", "--report"])
        .arg(&report_a)
        .arg("--format")
        .arg("csv")
        .arg("--out")
        .arg(dir.path().join("again.csv"))
        .output()
        .unwrap();
    assert!(rendered.status.success(), "{}", stderr_of(&rendered));
    assert!(stdout_of(&rendered).contains("project: clean_subject"));
    assert_eq!(
        fs::read_to_string(dir.path().join("again.csv")).unwrap(),
        fs::read_to_string(dir.path().join("a.csv")).unwrap()
    );
}

#[test]
fn budget_flag_overrides_the_configured_limit() {
    let dir = tempfile::tempdir().unwrap();
    let report_path = dir.path().join("r.json");
    let out = bin()
        .args(["replay", "--crate"])
        .arg(fixture("budget_subject"))
        .arg("--replay")
        .arg(scripts("budget"))
        .arg("--report")
        .arg(&report_path)
        .args(["--budget", "2", "--format", "json"])
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", stderr_of(&out));
    let report: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(&report_path).unwrap()).unwrap();
    let record = &report["pointers"][0];
    assert_eq!(record["outcome"], "gave_up");
    assert_eq!(record["budget_used"], 2, "the lowered budget is enforced");
    assert_eq!(record["detail"], "repair budget exhausted");
}
