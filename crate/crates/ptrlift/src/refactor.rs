//! The statement-refactoring step: ask for the rewritten function, extract
//! the code block from the reply, validate it against the original function,
//! and patch it into the working tree.
//!
//! Validation is structural only (signature preserved, no stray `use` items,
//! lifted pointer gone, no new raw-pointer locals); whether the rewrite is
//! actually correct is decided later by the compiler and the test suite.

use crate::lifting::LiftKind;
use crate::source_index::{
    enumerate_raw_pointers, index_source, FunctionRecord, LineMap, PromptContext, RawPointerSite,
};
use crate::templates::{fill, PromptTemplates};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::fmt;
use std::io::Write as IoWrite;
use std::path::{Path, PathBuf};
use thiserror::Error;

/// Build the rewrite request for one lifted pointer. `examples` come from the
/// template set for the decided leaf; missing context sections are rendered
/// as explicit "none" rather than left empty.
pub fn build_refactor_prompt(
    templates: &PromptTemplates,
    site: &RawPointerSite,
    kind: LiftKind,
    context: &PromptContext,
) -> String {
    let structs = if context.struct_definitions.is_empty() {
        "(none)".to_string()
    } else {
        context.struct_definitions.join("\n\n")
    };
    let statics = if context.static_declarations.is_empty() {
        "(none)".to_string()
    } else {
        context.static_declarations.join("\n\n")
    };
    fill(
        &templates.statement_refactoring,
        &[
            ("FUNCTION_CONTEXT", &site.function.source_text),
            ("POINTER_DECLARATION", &site.decl_text),
            ("EXAMPLES", templates.examples_for(kind)),
            ("STRUCTS_USED", &structs),
            ("STATICS_USED", &statics),
        ],
    )
}

/// Follow-up prompt after a rejected rewrite, naming the rejection reason.
pub fn build_retry_prompt(templates: &PromptTemplates, reason: &str) -> String {
    fill(&templates.retry_rewrite, &[("REJECT_REASON", reason)])
}

#[derive(Debug, PartialEq, Eq, Error)]
pub enum ExtractError {
    #[error("reply declines with CANNOT_FIX")]
    Declined,
    #[error("reply contains no rust code block")]
    NoCodeBlock,
}

/// Pull the first rust-tagged fenced code block out of a reply. An unclosed
/// fence swallows the rest of the reply; the result never contains fence
/// delimiters. `CANNOT_FIX` anywhere in the reply wins over any code.
pub fn extract_code_block(reply: &str) -> Result<String, ExtractError> {
    if reply.contains("CANNOT_FIX") {
        return Err(ExtractError::Declined);
    }
    let mut search_from = 0;
    while let Some(rel) = reply[search_from..].find("```") {
        let fence_start = search_from + rel;
        let after = &reply[fence_start + 3..];
        let tag_end = after.find('\n').unwrap_or(after.len());
        let tag = after[..tag_end].trim();
        if tag.eq_ignore_ascii_case("rust") || tag.eq_ignore_ascii_case("rs") {
            let body_start = fence_start + 3 + tag_end;
            let body = reply[body_start..].strip_prefix('\n').unwrap_or(&reply[body_start..]);
            let body_end = body.find("```").unwrap_or(body.len());
            let code = body[..body_end].trim_matches('\n');
            return Ok(code.to_string());
        }
        // skip past this fence (some other language, or a bare closer)
        search_from = fence_start + 3 + tag_end;
    }
    Err(ExtractError::NoCodeBlock)
}

/// One structural defect found in a candidate rewrite.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum Violation {
    Unparseable(String),
    SignatureChanged { expected: String, found: String },
    UseOutsideFunction,
    LiftedPointerStillPresent { name: String },
    NewRawPointers { original: usize, rewritten: usize },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::Unparseable(msg) => write!(f, "response does not parse as a single function: {msg}"),
            Violation::SignatureChanged { expected, found } => {
                write!(f, "function signature changed (expected `{expected}`, found `{found}`)")
            }
            Violation::UseOutsideFunction => write!(f, "'use' statement outside the function"),
            Violation::LiftedPointerStillPresent { name } => {
                write!(f, "raw pointer declaration of `{name}` is still present")
            }
            Violation::NewRawPointers { original, rewritten } => write!(
                f,
                "raw-pointer locals did not decrease ({original} before, {rewritten} after)"
            ),
        }
    }
}

/// Validation verdict; empty `violations` means the candidate is acceptable.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Verdict {
    pub violations: Vec<Violation>,
}

impl Verdict {
    pub fn ok(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn describe(&self) -> String {
        self.violations
            .iter()
            .map(|v| v.to_string())
            .collect::<Vec<_>>()
            .join("; ")
    }
}

struct CandidateFile {
    functions: Vec<syn::Signature>,
    function_count: usize,
    use_count: usize,
    other_items: usize,
}

fn scan_candidate(text: &str) -> Result<CandidateFile, String> {
    let file: syn::File = match syn::parse_str(text) {
        Ok(f) => f,
        Err(first) => {
            // a lone method with a receiver only parses inside an impl block
            let wrapped = format!("impl __PtrliftWrap {{\n{text}\n}}");
            match syn::parse_str::<syn::ItemImpl>(&wrapped) {
                Ok(imp) => {
                    let mut functions = Vec::new();
                    for item in imp.items {
                        if let syn::ImplItem::Fn(m) = item {
                            functions.push(m.sig);
                        }
                    }
                    let count = functions.len();
                    if count == 0 {
                        return Err(first.to_string());
                    }
                    return Ok(CandidateFile {
                        functions,
                        function_count: count,
                        use_count: 0,
                        other_items: 0,
                    });
                }
                Err(_) => return Err(first.to_string()),
            }
        }
    };
    let mut out = CandidateFile {
        functions: Vec::new(),
        function_count: 0,
        use_count: 0,
        other_items: 0,
    };
    for item in file.items {
        match item {
            syn::Item::Fn(f) => {
                out.functions.push(f.sig);
                out.function_count += 1;
            }
            syn::Item::Use(_) => out.use_count += 1,
            _ => out.other_items += 1,
        }
    }
    Ok(out)
}

/// Token-level signature rendering from the `fn` keyword onward; qualifiers
/// before `fn` (visibility, `unsafe`, ABI) are deliberately not compared.
fn canonical_signature(sig: &syn::Signature) -> String {
    use quote::ToTokens;
    let mut sig = sig.clone();
    sig.constness = None;
    sig.asyncness = None;
    sig.unsafety = None;
    sig.abi = None;
    sig.to_token_stream().to_string()
}

fn signature_of_record(record: &FunctionRecord) -> Option<String> {
    let parsed = scan_candidate(&record.source_text).ok()?;
    parsed.functions.first().map(canonical_signature)
}

fn count_raw_locals(record: &FunctionRecord) -> usize {
    enumerate_raw_pointers(record)
        .map(|sites| sites.iter().filter(|s| !s.is_parameter).count())
        .unwrap_or(0)
}

fn synthetic_record(text: &str, original: &FunctionRecord) -> FunctionRecord {
    FunctionRecord {
        file_path: original.file_path.clone(),
        name: original.name.clone(),
        start_line: 1,
        end_line: text.lines().count().max(1),
        source_text: text.to_string(),
        signature_text: String::new(),
    }
}

/// Check a candidate rewrite of `original` that was supposed to eliminate
/// `site`. All applicable violations are reported, not just the first.
pub fn validate_rewrite(
    original: &FunctionRecord,
    site: &RawPointerSite,
    candidate_text: &str,
) -> Verdict {
    let mut verdict = Verdict::default();

    let candidate = match scan_candidate(candidate_text) {
        Ok(c) => c,
        Err(msg) => {
            verdict.violations.push(Violation::Unparseable(msg));
            return verdict;
        }
    };
    if candidate.use_count > 0 {
        verdict.violations.push(Violation::UseOutsideFunction);
    }
    if candidate.function_count != 1 || candidate.other_items > 0 {
        verdict.violations.push(Violation::Unparseable(format!(
            "expected exactly one function, found {} functions and {} other items",
            candidate.function_count, candidate.other_items
        )));
        return verdict;
    }

    let found_sig = canonical_signature(&candidate.functions[0]);
    match signature_of_record(original) {
        Some(expected_sig) if expected_sig != found_sig => {
            verdict.violations.push(Violation::SignatureChanged {
                expected: expected_sig,
                found: found_sig,
            });
        }
        _ => {}
    }

    let candidate_record = synthetic_record(candidate_text, original);
    if let Ok(sites) = enumerate_raw_pointers(&candidate_record) {
        if sites.iter().any(|s| !s.is_parameter && s.name == site.name) {
            verdict.violations.push(Violation::LiftedPointerStillPresent {
                name: site.name.clone(),
            });
        }
    }

    let original_count = count_raw_locals(original);
    let rewritten_count = count_raw_locals(&candidate_record);
    if rewritten_count + 1 > original_count {
        verdict.violations.push(Violation::NewRawPointers {
            original: original_count,
            rewritten: rewritten_count,
        });
    }

    verdict
}

/// Strip outer attributes (including doc comments) from a candidate function
/// so that attribute lines kept in the file above the patched span are not
/// duplicated. Returns the text unchanged when nothing is stripped.
pub fn strip_leading_attrs(text: &str) -> String {
    let mut lines: Vec<&str> = text.lines().collect();
    let mut start = 0;
    for (i, line) in lines.iter().enumerate() {
        let t = line.trim_start();
        if t.starts_with("#[") || t.starts_with("///") || t.starts_with("//!") || t.is_empty() {
            start = i + 1;
        } else {
            break;
        }
    }
    if start == 0 {
        return text.to_string();
    }
    lines.drain(..start);
    lines.join("\n")
}

/// A full-line replacement in one file: lines `start_line..=end_line` of
/// `file_path` (1-based, inclusive) holding exactly `old_text` become
/// `new_text`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Patch {
    pub file_path: PathBuf,
    pub start_line: usize,
    pub end_line: usize,
    pub old_text: String,
    pub new_text: String,
}

impl Patch {
    /// The patch that undoes this one once applied.
    pub fn inverse(&self) -> Patch {
        Patch {
            file_path: self.file_path.clone(),
            start_line: self.start_line,
            end_line: self.start_line + line_count(&self.new_text) - 1,
            old_text: self.new_text.clone(),
            new_text: self.old_text.clone(),
        }
    }
}

fn line_count(text: &str) -> usize {
    text.split('\n').count()
}

#[derive(Debug, Error)]
pub enum PatchError {
    #[error("line span {start}..={end} out of range for {path} ({lines} lines)")]
    SpanOutOfRange {
        path: PathBuf,
        start: usize,
        end: usize,
        lines: usize,
    },
    #[error("stale patch: {path}:{start} does not hold the expected text")]
    Stale {
        path: PathBuf,
        start: usize,
    },
    #[error("failed to access {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

/// A working copy of the subject crate. Patches are applied here, never to
/// the user's original tree; an optional journal records every applied patch
/// as a JSONL line.
#[derive(Debug, Clone)]
pub struct Workspace {
    root: PathBuf,
    journal: Option<PathBuf>,
}

impl Workspace {
    pub fn new(root: impl Into<PathBuf>) -> Self {
        Workspace {
            root: root.into(),
            journal: None,
        }
    }

    pub fn with_journal(root: impl Into<PathBuf>, journal: impl Into<PathBuf>) -> Self {
        Workspace {
            root: root.into(),
            journal: Some(journal.into()),
        }
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn read_file(&self, rel: &Path) -> Result<String, PatchError> {
        let path = self.root.join(rel);
        std::fs::read_to_string(&path).map_err(|source| PatchError::Io { path, source })
    }

    /// Apply a patch and return the new end line of the replaced span.
    pub fn apply_patch(&self, patch: &Patch) -> Result<usize, PatchError> {
        let abs = self.root.join(&patch.file_path);
        let content = std::fs::read_to_string(&abs).map_err(|source| PatchError::Io {
            path: abs.clone(),
            source,
        })?;
        let map = LineMap::new(&content);
        let lines = map.line_count();
        if patch.start_line == 0 || patch.start_line > patch.end_line || patch.end_line > lines {
            return Err(PatchError::SpanOutOfRange {
                path: patch.file_path.clone(),
                start: patch.start_line,
                end: patch.end_line,
                lines,
            });
        }
        let (a, b) = map.line_span(&content, patch.start_line, patch.end_line);
        if content[a..b] != patch.old_text {
            return Err(PatchError::Stale {
                path: patch.file_path.clone(),
                start: patch.start_line,
            });
        }
        let rebuilt = format!("{}{}{}", &content[..a], patch.new_text, &content[b..]);
        std::fs::write(&abs, &rebuilt).map_err(|source| PatchError::Io {
            path: abs.clone(),
            source,
        })?;

        let new_end = patch.start_line + line_count(&patch.new_text) - 1;
        if let Some(journal) = &self.journal {
            let entry = serde_json::json!({
                "file": patch.file_path,
                "start_line": patch.start_line,
                "end_line": patch.end_line,
                "new_end_line": new_end,
                "old_sha256": hex_sha256(&patch.old_text),
                "new_sha256": hex_sha256(&patch.new_text),
            });
            let mut f = std::fs::OpenOptions::new()
                .create(true)
                .append(true)
                .open(journal)
                .map_err(|source| PatchError::Io {
                    path: journal.clone(),
                    source,
                })?;
            writeln!(f, "{entry}").map_err(|source| PatchError::Io {
                path: journal.clone(),
                source,
            })?;
        }
        Ok(new_end)
    }

    /// Re-index one file of the workspace and return its function records.
    pub fn index_file(&self, rel: &Path) -> Result<Vec<FunctionRecord>, crate::source_index::IndexError> {
        let content = self.read_file(rel).map_err(|e| match e {
            PatchError::Io { path, source } => crate::source_index::IndexError::Io { path, source },
            other => crate::source_index::IndexError::Io {
                path: rel.to_path_buf(),
                source: std::io::Error::other(other.to_string()),
            },
        })?;
        Ok(index_source(rel, &content)?.functions)
    }
}

pub fn hex_sha256(text: &str) -> String {
    let mut hasher = Sha256::new();
    hasher.update(text.as_bytes());
    let digest = hasher.finalize();
    digest.iter().map(|b| format!("{b:02x}")).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::source_index::index_source;
    use std::path::Path;

    const FUNC: &str = "pub fn take(len: usize) -> i32 {\n    let p: *mut i32 = std::ptr::null_mut();\n    let q: *const u8 = std::ptr::null();\n    let _ = (p, q, len);\n    0\n}\n";

    fn record_and_site() -> (FunctionRecord, RawPointerSite) {
        let idx = index_source(Path::new("src/lib.rs"), FUNC).unwrap();
        let rec = idx.functions.into_iter().next().unwrap();
        let site = enumerate_raw_pointers(&rec).unwrap().remove(0);
        assert_eq!(site.name, "p");
        (rec, site)
    }

    #[test]
    fn refactor_prompt_includes_all_sections() {
        let (_, site) = record_and_site();
        let templates = PromptTemplates::default();
        let ctx = PromptContext {
            struct_definitions: vec!["pub struct Node { pub v: i32 }".to_string()],
            static_declarations: vec![],
        };
        let prompt = build_refactor_prompt(&templates, &site, LiftKind::OwnedSingleton, &ctx);
        assert!(prompt.contains(&site.function.source_text));
        assert!(prompt.contains(&site.decl_text));
        assert!(prompt.contains("pub struct Node"));
        assert!(prompt.contains("Statics: (none)"));
        assert!(prompt.contains("Option<Box<"), "leaf examples are present");
        for name in crate::templates::ALL_PLACEHOLDERS {
            assert!(!prompt.contains(&format!("#{name}#")), "{name} survived");
        }
    }

    #[test]
    fn extracts_first_rust_block() {
        let reply = "Here you go:\n```rust\nfn a() {}\n```\nand also\n```rust\nfn b() {}\n```";
        assert_eq!(extract_code_block(reply).unwrap(), "fn a() {}");
    }

    #[test]
    fn skips_non_rust_blocks() {
        let reply = "```python\nprint(1)\n```\n```rust\nfn a() {}\n```";
        assert_eq!(extract_code_block(reply).unwrap(), "fn a() {}");
    }

    #[test]
    fn unclosed_fence_takes_rest_of_reply() {
        let reply = "```rust\nfn a() {\n    1;\n}";
        let code = extract_code_block(reply).unwrap();
        assert_eq!(code, "fn a() {\n    1;\n}");
        assert!(!code.contains("```"));
    }

    #[test]
    fn cannot_fix_wins_over_code() {
        let reply = "CANNOT_FIX\n```rust\nfn a() {}\n```";
        assert_eq!(extract_code_block(reply).unwrap_err(), ExtractError::Declined);
    }

    #[test]
    fn missing_block_is_an_error() {
        assert_eq!(
            extract_code_block("no code here").unwrap_err(),
            ExtractError::NoCodeBlock
        );
    }

    #[test]
    fn valid_rewrite_passes() {
        let (rec, site) = record_and_site();
        let candidate = "pub fn take(len: usize) -> i32 {\n    let p: Option<Box<i32>> = None;\n    let q: *const u8 = std::ptr::null();\n    let _ = (p, q, len);\n    0\n}";
        let verdict = validate_rewrite(&rec, &site, candidate);
        assert!(verdict.ok(), "{:?}", verdict.violations);
    }

    #[test]
    fn signature_change_detected() {
        let (rec, site) = record_and_site();
        let candidate = "pub fn take(len: u64) -> i32 {\n    let _ = len;\n    0\n}";
        let verdict = validate_rewrite(&rec, &site, candidate);
        assert!(verdict
            .violations
            .iter()
            .any(|v| matches!(v, Violation::SignatureChanged { .. })));
    }

    #[test]
    fn qualifier_change_is_not_a_signature_change() {
        let content = "pub unsafe extern \"C\" fn f(x: i32) -> i32 {\n    let p: *mut i32 = std::ptr::null_mut();\n    let _ = p;\n    x\n}\n";
        let idx = index_source(Path::new("src/lib.rs"), content).unwrap();
        let rec = idx.functions.into_iter().next().unwrap();
        let site = enumerate_raw_pointers(&rec).unwrap().remove(0);
        let candidate = "pub fn f(x: i32) -> i32 {\n    let p: Option<Box<i32>> = None;\n    let _ = p;\n    x\n}";
        let verdict = validate_rewrite(&rec, &site, candidate);
        assert!(verdict.ok(), "{:?}", verdict.violations);
    }

    #[test]
    fn use_statement_outside_function_detected() {
        let (rec, site) = record_and_site();
        let candidate = "use std::ptr;\n\npub fn take(len: usize) -> i32 {\n    let q: *const u8 = ptr::null();\n    let _ = (q, len);\n    0\n}";
        let verdict = validate_rewrite(&rec, &site, candidate);
        assert!(verdict.violations.contains(&Violation::UseOutsideFunction));
    }

    #[test]
    fn surviving_lifted_pointer_detected() {
        let (rec, site) = record_and_site();
        let candidate = "pub fn take(len: usize) -> i32 {\n    let p: *mut i32 = std::ptr::null_mut();\n    let _ = (p, len);\n    0\n}";
        let verdict = validate_rewrite(&rec, &site, candidate);
        assert!(verdict
            .violations
            .iter()
            .any(|v| matches!(v, Violation::LiftedPointerStillPresent { .. })));
    }

    #[test]
    fn new_raw_pointer_detected() {
        let (rec, site) = record_and_site();
        // p is gone but r appeared: count stays at 2, must be at most 1
        let candidate = "pub fn take(len: usize) -> i32 {\n    let r: *mut u8 = std::ptr::null_mut();\n    let q: *const u8 = std::ptr::null();\n    let _ = (r, q, len);\n    0\n}";
        let verdict = validate_rewrite(&rec, &site, candidate);
        assert!(verdict
            .violations
            .iter()
            .any(|v| matches!(v, Violation::NewRawPointers { original: 2, rewritten: 2 })));
    }

    #[test]
    fn unparseable_candidate_detected() {
        let (rec, site) = record_and_site();
        let verdict = validate_rewrite(&rec, &site, "fn broken( {");
        assert!(matches!(verdict.violations[0], Violation::Unparseable(_)));
    }

    #[test]
    fn original_against_itself_has_no_signature_or_use_violations() {
        let (rec, site) = record_and_site();
        let verdict = validate_rewrite(&rec, &site, &rec.source_text);
        for v in &verdict.violations {
            assert!(
                !matches!(v, Violation::SignatureChanged { .. } | Violation::UseOutsideFunction),
                "unexpected {v:?}"
            );
        }
        // it does of course still contain the lifted pointer
        assert!(verdict
            .violations
            .iter()
            .any(|v| matches!(v, Violation::LiftedPointerStillPresent { .. })));
    }

    #[test]
    fn strip_leading_attrs_removes_doc_and_attrs_only() {
        let text = "#[inline]\n/// docs\nfn f() {}\n";
        assert_eq!(strip_leading_attrs(text), "fn f() {}");
        assert_eq!(strip_leading_attrs("fn g() {}"), "fn g() {}");
    }

    fn temp_workspace(content: &str) -> (tempfile::TempDir, Workspace) {
        let dir = tempfile::tempdir().unwrap();
        std::fs::create_dir_all(dir.path().join("src")).unwrap();
        std::fs::write(dir.path().join("src/lib.rs"), content).unwrap();
        let ws = Workspace::new(dir.path());
        (dir, ws)
    }

    #[test]
    fn apply_patch_replaces_exact_line_span() {
        let content = "line one\nline two\nline three\n";
        let (_dir, ws) = temp_workspace(content);
        let patch = Patch {
            file_path: PathBuf::from("src/lib.rs"),
            start_line: 2,
            end_line: 2,
            old_text: "line two".to_string(),
            new_text: "LINE 2a\nLINE 2b".to_string(),
        };
        let new_end = ws.apply_patch(&patch).unwrap();
        assert_eq!(new_end, 3);
        assert_eq!(
            ws.read_file(Path::new("src/lib.rs")).unwrap(),
            "line one\nLINE 2a\nLINE 2b\nline three\n"
        );
    }

    #[test]
    fn patch_then_inverse_is_identity() {
        let content = "a\nb\nc\nd\n";
        let (_dir, ws) = temp_workspace(content);
        let patch = Patch {
            file_path: PathBuf::from("src/lib.rs"),
            start_line: 2,
            end_line: 3,
            old_text: "b\nc".to_string(),
            new_text: "x\ny\nz".to_string(),
        };
        ws.apply_patch(&patch).unwrap();
        ws.apply_patch(&patch.inverse()).unwrap();
        assert_eq!(ws.read_file(Path::new("src/lib.rs")).unwrap(), content);
    }

    #[test]
    fn stale_patch_rejected_and_file_untouched() {
        let content = "a\nb\nc\n";
        let (_dir, ws) = temp_workspace(content);
        let patch = Patch {
            file_path: PathBuf::from("src/lib.rs"),
            start_line: 2,
            end_line: 2,
            old_text: "WRONG".to_string(),
            new_text: "x".to_string(),
        };
        assert!(matches!(ws.apply_patch(&patch), Err(PatchError::Stale { .. })));
        assert_eq!(ws.read_file(Path::new("src/lib.rs")).unwrap(), content);
    }

    #[test]
    fn out_of_range_span_rejected() {
        let (_dir, ws) = temp_workspace("a\nb\n");
        let patch = Patch {
            file_path: PathBuf::from("src/lib.rs"),
            start_line: 2,
            end_line: 9,
            old_text: "b".to_string(),
            new_text: "x".to_string(),
        };
        assert!(matches!(
            ws.apply_patch(&patch),
            Err(PatchError::SpanOutOfRange { .. })
        ));
    }

    #[test]
    fn journal_records_applied_patches() {
        let dir = tempfile::tempdir().unwrap();
        std::fs::create_dir_all(dir.path().join("src")).unwrap();
        std::fs::write(dir.path().join("src/lib.rs"), "a\nb\n").unwrap();
        let journal = dir.path().join("journal.jsonl");
        let ws = Workspace::with_journal(dir.path(), &journal);
        let patch = Patch {
            file_path: PathBuf::from("src/lib.rs"),
            start_line: 1,
            end_line: 1,
            old_text: "a".to_string(),
            new_text: "A".to_string(),
        };
        ws.apply_patch(&patch).unwrap();
        ws.apply_patch(&patch.inverse()).unwrap();
        let lines: Vec<String> = std::fs::read_to_string(&journal)
            .unwrap()
            .lines()
            .map(String::from)
            .collect();
        assert_eq!(lines.len(), 2);
        let first: serde_json::Value = serde_json::from_str(&lines[0]).unwrap();
        assert_eq!(first["file"], "src/lib.rs");
        assert_eq!(first["old_sha256"], hex_sha256("a").as_str());
        assert_eq!(first["new_sha256"], hex_sha256("A").as_str());
    }
}
