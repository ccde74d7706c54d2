//! Prompt templates with `#PLACEHOLDER#` substitution.
//!
//! Defaults are compiled into the binary; a `templates_dir` in the project
//! config overrides individual templates by file name.

use crate::lifting::LiftKind;
use std::collections::BTreeMap;
use std::path::Path;
use thiserror::Error;

pub const POINTER_LIFTING: &str = include_str!("../templates/pointer_lifting.txt");
pub const STATEMENT_REFACTORING: &str = include_str!("../templates/statement_refactoring.txt");
pub const COMPILE_FIX: &str = include_str!("../templates/compile_fix.txt");
pub const TEST_FIX: &str = include_str!("../templates/test_fix.txt");
pub const RETRY_REWRITE: &str = include_str!("../templates/retry_rewrite.txt");

const EXAMPLES_OWNED_SINGLETON: &str = include_str!("../templates/examples_owned_singleton.txt");
const EXAMPLES_OWNED_ARRAY: &str = include_str!("../templates/examples_owned_array.txt");
const EXAMPLES_BORROWED_MUT_SINGLETON: &str =
    include_str!("../templates/examples_borrowed_mut_singleton.txt");
const EXAMPLES_BORROWED_SINGLETON: &str = include_str!("../templates/examples_borrowed_singleton.txt");
const EXAMPLES_BORROWED_MUT_SLICE: &str = include_str!("../templates/examples_borrowed_mut_slice.txt");
const EXAMPLES_BORROWED_SLICE: &str = include_str!("../templates/examples_borrowed_slice.txt");

#[derive(Debug, Error)]
pub enum TemplateError {
    #[error("failed to read template override {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

/// The full set of prompt templates used by a run.
#[derive(Debug, Clone)]
pub struct PromptTemplates {
    pub pointer_lifting: String,
    pub statement_refactoring: String,
    pub compile_fix: String,
    pub test_fix: String,
    pub retry_rewrite: String,
    examples: BTreeMap<LiftKind, String>,
}

impl Default for PromptTemplates {
    fn default() -> Self {
        let mut examples = BTreeMap::new();
        examples.insert(LiftKind::OwnedSingleton, EXAMPLES_OWNED_SINGLETON.to_string());
        examples.insert(LiftKind::OwnedArray, EXAMPLES_OWNED_ARRAY.to_string());
        examples.insert(
            LiftKind::BorrowedMutSingleton,
            EXAMPLES_BORROWED_MUT_SINGLETON.to_string(),
        );
        examples.insert(LiftKind::BorrowedSingleton, EXAMPLES_BORROWED_SINGLETON.to_string());
        examples.insert(LiftKind::BorrowedMutSlice, EXAMPLES_BORROWED_MUT_SLICE.to_string());
        examples.insert(LiftKind::BorrowedSlice, EXAMPLES_BORROWED_SLICE.to_string());
        PromptTemplates {
            pointer_lifting: POINTER_LIFTING.to_string(),
            statement_refactoring: STATEMENT_REFACTORING.to_string(),
            compile_fix: COMPILE_FIX.to_string(),
            test_fix: TEST_FIX.to_string(),
            retry_rewrite: RETRY_REWRITE.to_string(),
            examples,
        }
    }
}

impl PromptTemplates {
    /// Load defaults, then replace any template that has an override file in
    /// `dir` (matched by the embedded file names).
    pub fn load(dir: Option<&Path>) -> Result<Self, TemplateError> {
        let mut t = PromptTemplates::default();
        let Some(dir) = dir else { return Ok(t) };
        let overrides: [(&str, &mut String); 5] = [
            ("pointer_lifting.txt", &mut t.pointer_lifting),
            ("statement_refactoring.txt", &mut t.statement_refactoring),
            ("compile_fix.txt", &mut t.compile_fix),
            ("test_fix.txt", &mut t.test_fix),
            ("retry_rewrite.txt", &mut t.retry_rewrite),
        ];
        for (name, slot) in overrides {
            let path = dir.join(name);
            if path.is_file() {
                *slot = std::fs::read_to_string(&path).map_err(|source| TemplateError::Io {
                    path: path.display().to_string(),
                    source,
                })?;
            }
        }
        for kind in LiftKind::ALL {
            let path = dir.join(format!("examples_{}.txt", kind.slug()));
            if path.is_file() {
                let text = std::fs::read_to_string(&path).map_err(|source| TemplateError::Io {
                    path: path.display().to_string(),
                    source,
                })?;
                t.examples.insert(kind, text);
            }
        }
        Ok(t)
    }

    /// Worked rewrite examples for one target shape.
    pub fn examples_for(&self, kind: LiftKind) -> &str {
        self.examples.get(&kind).map(String::as_str).unwrap_or("")
    }
}

/// Replace each `#NAME#` placeholder with its value. The template is scanned
/// once, so placeholder-like text inside substituted values is left alone.
/// Unknown placeholders survive untouched.
pub fn fill(template: &str, values: &[(&str, &str)]) -> String {
    let mut out = String::with_capacity(template.len());
    let bytes = template.as_bytes();
    let mut i = 0;
    'outer: while i < bytes.len() {
        if bytes[i] == b'#' {
            for (name, value) in values {
                let token_len = name.len() + 2;
                if i + token_len <= bytes.len()
                    && &template[i + 1..i + 1 + name.len()] == *name
                    && bytes[i + token_len - 1] == b'#'
                {
                    out.push_str(value);
                    i += token_len;
                    continue 'outer;
                }
            }
        }
        // advance one char (template is valid UTF-8)
        let ch_len = template[i..].chars().next().map(char::len_utf8).unwrap_or(1);
        out.push_str(&template[i..i + ch_len]);
        i += ch_len;
    }
    out
}

/// Placeholder names recognized across all templates; used by tests to check
/// that instantiated prompts carry no leftovers.
pub const ALL_PLACEHOLDERS: &[&str] = &[
    "FUNCTION_CONTEXT",
    "POINTER_DECLARATION",
    "EXAMPLES",
    "STRUCTS_USED",
    "STATICS_USED",
    "ERROR_DESCRIPTION",
    "ERROR_SITE",
    "FOCUS_SNIPPET",
    "CODE_CHANGES",
    "EXEC_LOG",
    "START_LINE",
    "REWRITTEN_CODE",
    "ORIGINAL_CODE",
    "DIFF_LOG",
    "REJECT_REASON",
];
