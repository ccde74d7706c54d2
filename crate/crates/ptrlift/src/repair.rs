//! Fixing failed rewrites: line-level change analysis between the original
//! and current function, focused error snippets, the shared repair budget,
//! and the compile-fix / test-fix conversation loops.

use crate::gateway::{Clock, Conversation, Gateway, GatewayError, Phase};
use crate::refactor::{
    extract_code_block, strip_leading_attrs, validate_rewrite, ExtractError, Patch, PatchError,
    Workspace,
};
use crate::report::LedgerEvent;
use crate::source_index::{find_function, FunctionRecord, IndexError, RawPointerSite};
use crate::templates::{fill, PromptTemplates};
use crate::verify::{select_target_error, Diagnostic, Toolchain, VerifyError, VerifyResult};
use serde::{Deserialize, Serialize};
use std::collections::BTreeSet;
use std::fmt::Write as FmtWrite;
use std::path::PathBuf;
use thiserror::Error;

// ---------------------------------------------------------------------------
// Line-level change analysis
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HunkKind {
    Added,
    Deleted,
    Modified,
}

/// One contiguous change. Line numbers are 1-based. For `Added` hunks,
/// `old_start` is the old line before which the new lines are inserted
/// (`old_line_count + 1` appends at the end); for `Deleted` hunks,
/// `new_start` is the corresponding position in the new text.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Hunk {
    pub kind: HunkKind,
    pub old_start: usize,
    pub old_lines: Vec<String>,
    pub new_start: usize,
    pub new_lines: Vec<String>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChangeSet {
    pub hunks: Vec<Hunk>,
}

impl ChangeSet {
    pub fn is_empty(&self) -> bool {
        self.hunks.is_empty()
    }
}

/// Line diff of two texts based on a longest-common-subsequence alignment.
/// A run of deletions immediately followed by additions coalesces into one
/// `Modified` hunk.
pub fn compute_change_set(before: &str, after: &str) -> ChangeSet {
    let old: Vec<&str> = before.split('\n').collect();
    let new: Vec<&str> = after.split('\n').collect();
    let n = old.len();
    let m = new.len();

    // dp[i][j] = LCS length of old[i..] and new[j..]
    let mut dp = vec![vec![0u32; m + 1]; n + 1];
    for i in (0..n).rev() {
        for j in (0..m).rev() {
            dp[i][j] = if old[i] == new[j] {
                dp[i + 1][j + 1] + 1
            } else {
                dp[i + 1][j].max(dp[i][j + 1])
            };
        }
    }

    #[derive(PartialEq)]
    enum Op {
        Keep,
        Del(usize),
        Add(usize),
    }
    let mut ops = Vec::new();
    let (mut i, mut j) = (0usize, 0usize);
    while i < n || j < m {
        if i < n && j < m && old[i] == new[j] {
            ops.push(Op::Keep);
            i += 1;
            j += 1;
        } else if j == m || (i < n && dp[i + 1][j] >= dp[i][j + 1]) {
            // prefer deletions so mixed regions group as del*-add*
            ops.push(Op::Del(i));
            i += 1;
        } else {
            ops.push(Op::Add(j));
            j += 1;
        }
    }

    let mut hunks = Vec::new();
    let mut idx = 0;
    let mut old_cursor = 0usize; // old lines consumed
    let mut new_cursor = 0usize;
    while idx < ops.len() {
        match ops[idx] {
            Op::Keep => {
                old_cursor += 1;
                new_cursor += 1;
                idx += 1;
            }
            _ => {
                let group_old_start = old_cursor + 1;
                let group_new_start = new_cursor + 1;
                let mut old_lines = Vec::new();
                let mut new_lines = Vec::new();
                while idx < ops.len() {
                    match ops[idx] {
                        Op::Keep => break,
                        Op::Del(k) => {
                            old_lines.push(old[k].to_string());
                            old_cursor += 1;
                            idx += 1;
                        }
                        Op::Add(k) => {
                            new_lines.push(new[k].to_string());
                            new_cursor += 1;
                            idx += 1;
                        }
                    }
                }
                let kind = match (old_lines.is_empty(), new_lines.is_empty()) {
                    (false, false) => HunkKind::Modified,
                    (false, true) => HunkKind::Deleted,
                    (true, false) => HunkKind::Added,
                    (true, true) => unreachable!("empty change group"),
                };
                hunks.push(Hunk {
                    kind,
                    old_start: group_old_start,
                    old_lines,
                    new_start: group_new_start,
                    new_lines,
                });
            }
        }
    }
    ChangeSet { hunks }
}

/// Re-apply a change set to the text it was computed from.
pub fn apply_change_set(before: &str, changes: &ChangeSet) -> String {
    let old: Vec<&str> = before.split('\n').collect();
    let mut out: Vec<String> = Vec::new();
    let mut cursor = 0usize; // 0-based index into old
    for hunk in &changes.hunks {
        let insert_at = hunk.old_start - 1;
        while cursor < insert_at {
            out.push(old[cursor].to_string());
            cursor += 1;
        }
        out.extend(hunk.new_lines.iter().cloned());
        cursor += hunk.old_lines.len();
    }
    while cursor < old.len() {
        out.push(old[cursor].to_string());
        cursor += 1;
    }
    out.join("\n")
}

/// Unified-diff-style rendering with function-relative line numbers; the
/// empty change set renders as "no changes".
pub fn render_unified(changes: &ChangeSet) -> String {
    if changes.is_empty() {
        return "no changes".to_string();
    }
    let mut out = String::new();
    for hunk in &changes.hunks {
        let (old_start, old_len) = range_for(hunk.old_start, hunk.old_lines.len());
        let (new_start, new_len) = range_for(hunk.new_start, hunk.new_lines.len());
        let _ = writeln!(out, "@@ -{old_start},{old_len} +{new_start},{new_len} @@");
        for line in &hunk.old_lines {
            let _ = writeln!(out, "-{line}");
        }
        for line in &hunk.new_lines {
            let _ = writeln!(out, "+{line}");
        }
    }
    out.trim_end_matches('\n').to_string()
}

fn range_for(start: usize, len: usize) -> (usize, usize) {
    if len == 0 {
        // unified convention anchors empty ranges to the preceding line
        (start.saturating_sub(1), 0)
    } else {
        (start, len)
    }
}

// ---------------------------------------------------------------------------
// Focus snippets
// ---------------------------------------------------------------------------

/// A window of function lines around an error location. Lines are 1-based
/// and relative to the function text.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FocusSnippet {
    pub start_line: usize,
    pub end_line: usize,
    pub text: String,
}

/// Cut `radius` lines either side of `center_line` out of `function_text`,
/// clipped to the function bounds.
pub fn focus_snippet(function_text: &str, center_line: usize, radius: usize) -> FocusSnippet {
    let lines: Vec<&str> = function_text.split('\n').collect();
    let total = lines.len();
    let center = center_line.clamp(1, total);
    let start = center.saturating_sub(radius).max(1);
    let end = (center + radius).min(total);
    FocusSnippet {
        start_line: start,
        end_line: end,
        text: lines[start - 1..end].join("\n"),
    }
}

/// Replace the snippet's line span inside `function_text` with `replacement`.
pub fn splice_snippet(function_text: &str, snippet: &FocusSnippet, replacement: &str) -> String {
    let lines: Vec<&str> = function_text.split('\n').collect();
    let mut out: Vec<&str> = Vec::new();
    out.extend(&lines[..snippet.start_line - 1]);
    let mut text = out.join("\n");
    if !text.is_empty() {
        text.push('\n');
    }
    text.push_str(replacement);
    if snippet.end_line < lines.len() {
        text.push('\n');
        text.push_str(&lines[snippet.end_line..].join("\n"));
    }
    text
}

// ---------------------------------------------------------------------------
// Repair budget
// ---------------------------------------------------------------------------

/// Bounded number of fix attempts shared by the compile-fix and test-fix
/// phases of one lift. An attempt is granted only while `used < limit`, so a
/// lift is abandoned exactly when an attempt is requested at `used == limit`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RepairBudget {
    pub limit: u32,
    pub used: u32,
}

impl RepairBudget {
    pub fn new(limit: u32) -> Self {
        RepairBudget { limit, used: 0 }
    }

    /// Grant one attempt if any budget remains.
    pub fn try_consume(&mut self) -> bool {
        if self.used < self.limit {
            self.used += 1;
            true
        } else {
            false
        }
    }

    pub fn exhausted(&self) -> bool {
        self.used >= self.limit
    }
}

// ---------------------------------------------------------------------------
// Fix prompts
// ---------------------------------------------------------------------------

/// Compile-fix prompt: the diagnostic, its location, a focused snippet, and
/// the changes made so far.
pub fn build_compile_fix_prompt(
    templates: &PromptTemplates,
    diagnostic: &Diagnostic,
    snippet: &FocusSnippet,
    changes: &ChangeSet,
) -> String {
    let description = if diagnostic.code.is_empty() {
        diagnostic.message.clone()
    } else {
        format!("{}: {}", diagnostic.code, diagnostic.message)
    };
    let site = format!(
        "{}:{}:{}",
        diagnostic.file_path.display(),
        diagnostic.line,
        diagnostic.column
    );
    fill(
        &templates.compile_fix,
        &[
            ("ERROR_DESCRIPTION", description.as_str()),
            ("ERROR_SITE", site.as_str()),
            ("FOCUS_SNIPPET", snippet.text.as_str()),
            ("CODE_CHANGES", render_unified(changes).as_str()),
        ],
    )
}

/// Test-fix prompt: failing test output with backtraces, the current and
/// original function texts, and their diff.
pub fn build_test_fix_prompt(
    templates: &PromptTemplates,
    exec_log: &str,
    current: &FunctionRecord,
    original: &FunctionRecord,
    changes: &ChangeSet,
) -> String {
    fill(
        &templates.test_fix,
        &[
            ("EXEC_LOG", exec_log),
            ("START_LINE", current.start_line.to_string().as_str()),
            ("REWRITTEN_CODE", current.source_text.as_str()),
            ("ORIGINAL_CODE", original.source_text.as_str()),
            ("DIFF_LOG", render_unified(changes).as_str()),
        ],
    )
}

/// Condensed failing-test output for the test-fix prompt: per-test failure
/// blocks with backtraces when present, the raw harness output otherwise.
pub fn exec_log_from(result: &VerifyResult) -> String {
    let blocks: Vec<&str> = result
        .tests
        .iter()
        .filter(|t| t.status == crate::verify::TestStatus::Fail)
        .map(|t| t.output.as_str())
        .filter(|o| !o.is_empty())
        .collect();
    if blocks.is_empty() {
        result.raw_output.clone()
    } else {
        blocks.join("\n\n")
    }
}

// ---------------------------------------------------------------------------
// Fix loops
// ---------------------------------------------------------------------------

#[derive(Debug, Error)]
pub enum RepairError {
    #[error(transparent)]
    Gateway(#[from] GatewayError),
    #[error(transparent)]
    Verify(#[from] VerifyError),
    #[error(transparent)]
    Patch(#[from] PatchError),
    #[error(transparent)]
    Index(#[from] IndexError),
    #[error("function {name} disappeared from {file}")]
    FunctionLost { file: PathBuf, name: String },
}

/// Why a fix loop stopped without success.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GiveUpReason {
    BudgetExhausted,
    ModelDeclined,
    TimeCapExceeded,
}

impl std::fmt::Display for GiveUpReason {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            GiveUpReason::BudgetExhausted => write!(f, "repair budget exhausted"),
            GiveUpReason::ModelDeclined => write!(f, "model declined with CANNOT_FIX"),
            GiveUpReason::TimeCapExceeded => write!(f, "per-pointer time cap exceeded"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum FixOutcome {
    Fixed,
    GaveUp(GiveUpReason),
}

/// Everything the fix loops need about one in-flight lift.
pub struct RepairSession<'a> {
    pub workspace: &'a Workspace,
    pub toolchain: &'a Toolchain,
    pub gateway: &'a mut Gateway,
    pub conversation: &'a mut Conversation,
    pub templates: &'a PromptTemplates,
    pub clock: &'a Clock,
    /// The function before the lift, for diffs and validation.
    pub original: &'a FunctionRecord,
    pub site: &'a RawPointerSite,
    pub fn_occurrence: usize,
    pub budget: &'a mut RepairBudget,
    pub snippet_radius: usize,
    pub baseline: &'a BTreeSet<String>,
    pub enable_backtrace: bool,
    /// Absolute clock reading after which the lift is abandoned.
    pub deadline_s: Option<f64>,
    pub events: &'a mut Vec<LedgerEvent>,
}

impl<'a> RepairSession<'a> {
    pub fn past_deadline(&self) -> bool {
        self.deadline_s.is_some_and(|d| self.clock.now_s() >= d)
    }

    /// Re-index the subject file and locate the lifted function as it
    /// currently stands.
    pub fn current_function(&self) -> Result<FunctionRecord, RepairError> {
        let functions = self.workspace.index_file(&self.original.file_path)?;
        find_function(
            &functions,
            &self.original.file_path,
            &self.original.name,
            self.fn_occurrence,
        )
        .cloned()
        .ok_or_else(|| RepairError::FunctionLost {
            file: self.original.file_path.clone(),
            name: self.original.name.clone(),
        })
    }

    fn patch_function(
        &mut self,
        current: &FunctionRecord,
        new_text: &str,
        origin: &str,
    ) -> Result<(), RepairError> {
        let patch = Patch {
            file_path: current.file_path.clone(),
            start_line: current.start_line,
            end_line: current.end_line,
            old_text: current.source_text.clone(),
            new_text: strip_leading_attrs(new_text),
        };
        self.workspace.apply_patch(&patch)?;
        self.events.push(LedgerEvent::RewriteApplied {
            origin: origin.to_string(),
        });
        Ok(())
    }

    /// Drive compile fixing until the tree type-checks or the attempt is
    /// abandoned. `last` is the failing verification that got us here.
    pub fn compile_fix_loop(&mut self, mut last: VerifyResult) -> Result<FixOutcome, RepairError> {
        loop {
            if last.compiled {
                return Ok(FixOutcome::Fixed);
            }
            if self.past_deadline() {
                return Ok(FixOutcome::GaveUp(GiveUpReason::TimeCapExceeded));
            }
            let current = self.current_function()?;
            let Some(diagnostic) = select_target_error(&last.diagnostics, &current) else {
                // cannot happen: !compiled guarantees diagnostics
                return Ok(FixOutcome::GaveUp(GiveUpReason::BudgetExhausted));
            };
            let center = if diagnostic.file_path == current.file_path
                && diagnostic.line >= current.start_line
                && diagnostic.line <= current.end_line
            {
                diagnostic.line - current.start_line + 1
            } else {
                1
            };
            let snippet = focus_snippet(&current.source_text, center, self.snippet_radius);
            let changes = compute_change_set(&self.original.source_text, &current.source_text);
            let prompt = build_compile_fix_prompt(self.templates, diagnostic, &snippet, &changes);

            if !self.budget.try_consume() {
                return Ok(FixOutcome::GaveUp(GiveUpReason::BudgetExhausted));
            }
            self.events.push(LedgerEvent::FixRequested {
                phase: "compile_fix".to_string(),
                used: self.budget.used,
            });
            let reply = self
                .gateway
                .submit(self.conversation, prompt, Phase::CompileFix, self.clock)?;

            let snippet_reply = match extract_code_block(&reply) {
                Ok(code) => code,
                Err(ExtractError::Declined) => {
                    self.events.push(LedgerEvent::ModelDeclined);
                    return Ok(FixOutcome::GaveUp(GiveUpReason::ModelDeclined));
                }
                // fix replies are often emitted bare, without fences
                Err(ExtractError::NoCodeBlock) => reply.trim().to_string(),
            };

            let candidate = splice_snippet(&current.source_text, &snippet, &snippet_reply);
            let verdict = validate_rewrite(self.original, self.site, &candidate);
            if !verdict.ok() {
                // leave the workspace at its last parseable state
                self.events.push(LedgerEvent::RewriteRejected {
                    reasons: verdict.violations.iter().map(|v| v.to_string()).collect(),
                });
                continue;
            }
            self.patch_function(&current, &candidate, "compile_fix")?;

            last = self.toolchain.compile_check(self.workspace.root())?;
            self.events.push(LedgerEvent::CompileChecked {
                compiled: last.compiled,
                errors: last.diagnostics.len(),
            });
        }
    }

    /// Drive test fixing until the baseline pass set is preserved or the
    /// attempt is abandoned. Fix candidates that fail to compile re-enter
    /// the compile-fix loop on the same budget.
    pub fn test_fix_loop(&mut self, mut last: VerifyResult) -> Result<FixOutcome, RepairError> {
        loop {
            if last.pass_set().is_superset(self.baseline) {
                return Ok(FixOutcome::Fixed);
            }
            if self.past_deadline() {
                return Ok(FixOutcome::GaveUp(GiveUpReason::TimeCapExceeded));
            }
            let current = self.current_function()?;
            let changes = compute_change_set(&self.original.source_text, &current.source_text);
            let exec_log = exec_log_from(&last);
            let prompt =
                build_test_fix_prompt(self.templates, &exec_log, &current, self.original, &changes);

            if !self.budget.try_consume() {
                return Ok(FixOutcome::GaveUp(GiveUpReason::BudgetExhausted));
            }
            self.events.push(LedgerEvent::FixRequested {
                phase: "test_fix".to_string(),
                used: self.budget.used,
            });
            let reply = self
                .gateway
                .submit(self.conversation, prompt, Phase::TestFix, self.clock)?;

            let candidate_text = match extract_code_block(&reply) {
                Ok(code) => code,
                Err(ExtractError::Declined) => {
                    self.events.push(LedgerEvent::ModelDeclined);
                    return Ok(FixOutcome::GaveUp(GiveUpReason::ModelDeclined));
                }
                Err(ExtractError::NoCodeBlock) => reply.trim().to_string(),
            };

            let verdict = validate_rewrite(self.original, self.site, &candidate_text);
            if !verdict.ok() {
                self.events.push(LedgerEvent::RewriteRejected {
                    reasons: verdict.violations.iter().map(|v| v.to_string()).collect(),
                });
                continue;
            }
            self.patch_function(&current, &candidate_text, "test_fix")?;

            let check = self.toolchain.compile_check(self.workspace.root())?;
            self.events.push(LedgerEvent::CompileChecked {
                compiled: check.compiled,
                errors: check.diagnostics.len(),
            });
            if !check.compiled {
                match self.compile_fix_loop(check)? {
                    FixOutcome::Fixed => {}
                    gave_up => return Ok(gave_up),
                }
            }

            last = self
                .toolchain
                .run_tests(self.workspace.root(), self.enable_backtrace)?;
            self.events.push(LedgerEvent::TestsChecked {
                baseline_preserved: last.pass_set().is_superset(self.baseline),
                failed: last
                    .tests
                    .iter()
                    .filter(|t| t.status == crate::verify::TestStatus::Fail)
                    .count(),
            });
        }
    }

}
