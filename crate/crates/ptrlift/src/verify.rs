//! Compiler and test-suite verification of the working tree.
//!
//! Type checking runs the toolchain with machine-readable diagnostics and
//! collects error-level records; the test runner parses the harness's
//! per-test result lines. Both run under a wall-clock timeout and report how
//! long they took.

use crate::source_index::FunctionRecord;
use serde::{Deserialize, Serialize};
use std::collections::BTreeSet;
use std::io::Read;
use std::path::{Path, PathBuf};
use std::process::{Command, Stdio};
use std::time::{Duration, Instant};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum VerifyError {
    #[error("toolchain command is empty")]
    EmptyCommand,
    #[error("failed to launch {command}: {source}")]
    Launch {
        command: String,
        #[source]
        source: std::io::Error,
    },
    #[error("i/o error while running {command}: {source}")]
    Io {
        command: String,
        #[source]
        source: std::io::Error,
    },
}

/// One error-level compiler diagnostic with its primary location.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Diagnostic {
    pub code: String,
    pub message: String,
    pub file_path: PathBuf,
    pub line: usize,
    pub column: usize,
    pub rendered: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TestStatus {
    Pass,
    Fail,
    NotRun,
}

/// One test's result, with failure output and backtrace when present.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TestOutcome {
    pub test_name: String,
    pub status: TestStatus,
    pub output: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub backtrace: Option<String>,
}

/// Result of one verification step.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerifyResult {
    pub compiled: bool,
    pub diagnostics: Vec<Diagnostic>,
    pub tests: Vec<TestOutcome>,
    pub wall_time_s: f64,
    pub raw_output: String,
    pub timed_out: bool,
}

impl VerifyResult {
    /// Names of tests that passed, as a set for baseline comparison.
    pub fn pass_set(&self) -> BTreeSet<String> {
        self.tests
            .iter()
            .filter(|t| t.status == TestStatus::Pass)
            .map(|t| t.test_name.clone())
            .collect()
    }
}

/// The commands used to verify a workspace, with per-step timeouts.
#[derive(Debug, Clone)]
pub struct Toolchain {
    pub check_command: Vec<String>,
    pub test_command: Vec<String>,
    pub check_timeout: Duration,
    pub test_timeout: Duration,
}

impl Default for Toolchain {
    fn default() -> Self {
        Toolchain {
            check_command: vec![
                "cargo".to_string(),
                "check".to_string(),
                "--message-format=json".to_string(),
            ],
            test_command: vec!["cargo".to_string(), "test".to_string()],
            check_timeout: Duration::from_secs(600),
            test_timeout: Duration::from_secs(600),
        }
    }
}

struct RunOutput {
    status: Option<i32>,
    stdout: String,
    stderr: String,
    timed_out: bool,
    wall: f64,
}

/// Kill the child and everything it spawned. Tools like test harnesses fork
/// worker binaries that inherit our pipes; killing only the direct child
/// would leave them running and the pipe readers blocked forever.
fn kill_tree(child: &mut std::process::Child) {
    #[cfg(unix)]
    unsafe {
        libc::killpg(child.id() as i32, libc::SIGKILL);
    }
    let _ = child.kill();
    let _ = child.wait();
}

fn run_with_timeout(
    command: &[String],
    cwd: &Path,
    envs: &[(&str, &str)],
    timeout: Duration,
) -> Result<RunOutput, VerifyError> {
    let (program, args) = command.split_first().ok_or(VerifyError::EmptyCommand)?;
    let display = command.join(" ");
    let started = Instant::now();
    let mut builder = Command::new(program);
    builder
        .args(args)
        .current_dir(cwd)
        .envs(envs.iter().copied())
        .stdin(Stdio::null())
        .stdout(Stdio::piped())
        .stderr(Stdio::piped());
    #[cfg(unix)]
    {
        use std::os::unix::process::CommandExt;
        // own process group so the whole tree can be killed on timeout
        builder.process_group(0);
    }
    let mut child = builder.spawn().map_err(|source| VerifyError::Launch {
        command: display.clone(),
        source,
    })?;

    // drain pipes on threads so a chatty child cannot deadlock against us
    let mut stdout_pipe = child.stdout.take().expect("stdout piped");
    let mut stderr_pipe = child.stderr.take().expect("stderr piped");
    let out_handle = std::thread::spawn(move || {
        let mut buf = Vec::new();
        let _ = stdout_pipe.read_to_end(&mut buf);
        buf
    });
    let err_handle = std::thread::spawn(move || {
        let mut buf = Vec::new();
        let _ = stderr_pipe.read_to_end(&mut buf);
        buf
    });

    let mut timed_out = false;
    let status = loop {
        match child.try_wait().map_err(|source| VerifyError::Io {
            command: display.clone(),
            source,
        })? {
            Some(status) => break Some(status),
            None => {
                if started.elapsed() >= timeout {
                    timed_out = true;
                    kill_tree(&mut child);
                    break None;
                }
                std::thread::sleep(Duration::from_millis(25));
            }
        }
    };

    let stdout = String::from_utf8_lossy(&out_handle.join().unwrap_or_default()).into_owned();
    let stderr = String::from_utf8_lossy(&err_handle.join().unwrap_or_default()).into_owned();
    Ok(RunOutput {
        status: status.and_then(|s| s.code()),
        stdout,
        stderr,
        timed_out,
        wall: started.elapsed().as_secs_f64(),
    })
}

fn relative_to(path: &str, root: &Path) -> PathBuf {
    let p = Path::new(path);
    if let Ok(stripped) = p.strip_prefix(root) {
        return stripped.to_path_buf();
    }
    PathBuf::from(path.strip_prefix("./").unwrap_or(path))
}

fn parse_compiler_messages(stdout: &str, root: &Path) -> (Vec<Diagnostic>, bool) {
    let mut diagnostics = Vec::new();
    let mut parsed_any = false;
    for line in stdout.lines() {
        let line = line.trim();
        if line.is_empty() || !line.starts_with('{') {
            continue;
        }
        let Ok(value) = serde_json::from_str::<serde_json::Value>(line) else {
            continue;
        };
        parsed_any = true;
        if value["reason"].as_str() != Some("compiler-message") {
            continue;
        }
        let message = &value["message"];
        let level = message["level"].as_str().unwrap_or("");
        // "error" and hard variants like "error: internal compiler error"
        if !level.starts_with("error") {
            continue;
        }
        let spans = message["spans"].as_array().cloned().unwrap_or_default();
        let primary = spans
            .iter()
            .find(|s| s["is_primary"].as_bool() == Some(true))
            .or_else(|| spans.first());
        let (file_path, line_no, column) = match primary {
            Some(span) => (
                relative_to(span["file_name"].as_str().unwrap_or(""), root),
                span["line_start"].as_u64().unwrap_or(1) as usize,
                span["column_start"].as_u64().unwrap_or(1) as usize,
            ),
            None => (PathBuf::new(), 1, 1),
        };
        diagnostics.push(Diagnostic {
            code: message["code"]["code"].as_str().unwrap_or("").to_string(),
            message: message["message"].as_str().unwrap_or("").to_string(),
            file_path,
            line: line_no,
            column,
            rendered: message["rendered"].as_str().unwrap_or("").to_string(),
        });
    }
    (diagnostics, parsed_any)
}

fn tail(text: &str, max: usize) -> String {
    if text.len() <= max {
        return text.to_string();
    }
    let mut start = text.len() - max;
    while !text.is_char_boundary(start) {
        start += 1;
    }
    text[start..].to_string()
}

impl Toolchain {
    /// Type-check the workspace. `compiled` is true exactly when no
    /// error-level diagnostics were produced; when the command fails without
    /// producing any parseable diagnostics, one synthetic diagnostic holding
    /// the raw output is attached.
    pub fn compile_check(&self, root: &Path) -> Result<VerifyResult, VerifyError> {
        let run = run_with_timeout(&self.check_command, root, &[], self.check_timeout)?;
        let (mut diagnostics, _parsed_any) = parse_compiler_messages(&run.stdout, root);
        let failed = run.timed_out || run.status != Some(0);
        if diagnostics.is_empty() && failed {
            diagnostics.push(Diagnostic {
                code: String::new(),
                message: if run.timed_out {
                    format!("type check timed out after {}s", self.check_timeout.as_secs())
                } else {
                    "type check failed without machine-readable diagnostics".to_string()
                },
                file_path: PathBuf::new(),
                line: 1,
                column: 1,
                rendered: tail(&format!("{}\n{}", run.stderr, run.stdout), 8192),
            });
        }
        Ok(VerifyResult {
            compiled: diagnostics.is_empty(),
            diagnostics,
            tests: Vec::new(),
            wall_time_s: run.wall,
            raw_output: format!("{}\n{}", run.stdout, run.stderr),
            timed_out: run.timed_out,
        })
    }

    /// Run the test suite and parse per-test outcomes. Failure output blocks
    /// and backtraces are attached to their tests.
    pub fn run_tests(&self, root: &Path, enable_backtrace: bool) -> Result<VerifyResult, VerifyError> {
        let envs: &[(&str, &str)] = if enable_backtrace {
            &[("RUST_BACKTRACE", "1")]
        } else {
            &[]
        };
        let run = run_with_timeout(&self.test_command, root, envs, self.test_timeout)?;
        let mut tests = parse_test_lines(&run.stdout);
        attach_failure_blocks(&run.stdout, &mut tests);
        if run.timed_out {
            tests.push(TestOutcome {
                test_name: "<suite>".to_string(),
                status: TestStatus::NotRun,
                output: format!("test run timed out after {}s", self.test_timeout.as_secs()),
                backtrace: None,
            });
        }
        Ok(VerifyResult {
            compiled: true,
            diagnostics: Vec::new(),
            tests,
            wall_time_s: run.wall,
            raw_output: format!("{}\n{}", run.stdout, run.stderr),
            timed_out: run.timed_out,
        })
    }
}

fn parse_test_lines(stdout: &str) -> Vec<TestOutcome> {
    let mut tests = Vec::new();
    for line in stdout.lines() {
        let line = line.trim();
        let Some(rest) = line.strip_prefix("test ") else {
            continue;
        };
        // e.g. "test module::name ... ok", "test x ... FAILED",
        //      "test y ... ignored, reason"
        let Some((name_part, status_part)) = rest.split_once(" ... ") else {
            continue;
        };
        if name_part.starts_with("result:") {
            continue;
        }
        let name = name_part.trim_end_matches(" - should panic").trim().to_string();
        if name.is_empty() || name.contains(' ') {
            continue;
        }
        let status_word = status_part.split_whitespace().next().unwrap_or("");
        let status = match status_word.trim_end_matches(',') {
            "ok" => TestStatus::Pass,
            "FAILED" => TestStatus::Fail,
            "ignored" => TestStatus::NotRun,
            _ => continue,
        };
        tests.push(TestOutcome {
            test_name: name,
            status,
            output: String::new(),
            backtrace: None,
        });
    }
    tests
}

fn attach_failure_blocks(stdout: &str, tests: &mut [TestOutcome]) {
    for test in tests.iter_mut() {
        if test.status != TestStatus::Fail {
            continue;
        }
        let header = format!("---- {} stdout ----", test.test_name);
        if let Some(start) = stdout.find(&header) {
            let body = &stdout[start..];
            let end = body[header.len()..]
                .find("\n---- ")
                .map(|i| header.len() + i)
                .or_else(|| body.find("\nfailures:"))
                .unwrap_or(body.len());
            let block = body[..end].trim_end().to_string();
            test.backtrace = block
                .find("stack backtrace:")
                .map(|i| block[i..].trim_end().to_string());
            test.output = block;
        } else {
            test.output = format!("test {} ... FAILED", test.test_name);
        }
    }
}

/// Choose the diagnostic to repair: the first (by line) error inside the
/// rewritten function, falling back to the first error anywhere.
pub fn select_target_error<'a>(
    diagnostics: &'a [Diagnostic],
    function: &FunctionRecord,
) -> Option<&'a Diagnostic> {
    diagnostics
        .iter()
        .filter(|d| {
            d.file_path == function.file_path
                && d.line >= function.start_line
                && d.line <= function.end_line
        })
        .min_by_key(|d| (d.line, d.column))
        .or_else(|| diagnostics.first())
}
