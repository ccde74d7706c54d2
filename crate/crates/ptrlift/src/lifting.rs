//! The pointer-lifting step: a decision-tree prompt asks for one of six safe
//! target shapes (or a refusal), and the reply is parsed into a typed
//! decision.
//!
//! The tree has three predicates — ownership of the referenced memory, buffer
//! shape (single object vs. array), and whether the function writes through
//! the pointer — and every predicate combination maps to exactly one leaf.

use crate::source_index::RawPointerSite;
use crate::templates::{fill, PromptTemplates};
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// The six safe target shapes a raw pointer can be lifted to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum LiftKind {
    OwnedSingleton,
    OwnedArray,
    BorrowedMutSingleton,
    BorrowedSingleton,
    BorrowedMutSlice,
    BorrowedSlice,
}

impl LiftKind {
    pub const ALL: [LiftKind; 6] = [
        LiftKind::OwnedSingleton,
        LiftKind::OwnedArray,
        LiftKind::BorrowedMutSingleton,
        LiftKind::BorrowedSingleton,
        LiftKind::BorrowedMutSlice,
        LiftKind::BorrowedSlice,
    ];

    /// Render the target type for a concrete pointee type.
    pub fn render(&self, pointee: &str) -> String {
        match self {
            LiftKind::OwnedSingleton => format!("Option<Box<{pointee}>>"),
            LiftKind::OwnedArray => format!("Option<Vec<{pointee}>>"),
            LiftKind::BorrowedMutSingleton => format!("Option<&mut {pointee}>"),
            LiftKind::BorrowedSingleton => format!("Option<&{pointee}>"),
            LiftKind::BorrowedMutSlice => format!("&mut [{pointee}]"),
            LiftKind::BorrowedSlice => format!("&[{pointee}]"),
        }
    }

    /// Stable lowercase identifier used in reports and file names.
    pub fn slug(&self) -> &'static str {
        match self {
            LiftKind::OwnedSingleton => "owned_singleton",
            LiftKind::OwnedArray => "owned_array",
            LiftKind::BorrowedMutSingleton => "borrowed_mut_singleton",
            LiftKind::BorrowedSingleton => "borrowed_singleton",
            LiftKind::BorrowedMutSlice => "borrowed_mut_slice",
            LiftKind::BorrowedSlice => "borrowed_slice",
        }
    }
}

/// Outcome of the lifting step for one pointer.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum LiftDecision {
    /// Lift to `kind`, with the concrete target type rendered for the site's
    /// pointee (e.g. `Option<Box<Node>>`).
    Rewrite {
        kind: LiftKind,
        target_type_text: String,
    },
    /// The tree's case 0: void pointee or nested pointers.
    CannotRewrite,
}

/// The three predicate answers of the decision tree.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TreePredicateTrace {
    pub owning: bool,
    pub array: bool,
    pub written: bool,
}

impl TreePredicateTrace {
    pub const ALL: [TreePredicateTrace; 8] = {
        let mut all = [TreePredicateTrace {
            owning: false,
            array: false,
            written: false,
        }; 8];
        let mut i = 0;
        while i < 8 {
            all[i] = TreePredicateTrace {
                owning: i & 4 != 0,
                array: i & 2 != 0,
                written: i & 1 != 0,
            };
            i += 1;
        }
        all
    };
}

/// Leaf selected by a full predicate trace. For owning pointers the write
/// predicate is never consulted, so both of its values land on the same leaf.
pub fn leaf_from_trace(trace: TreePredicateTrace) -> LiftKind {
    match (trace.owning, trace.array, trace.written) {
        (true, false, _) => LiftKind::OwnedSingleton,
        (true, true, _) => LiftKind::OwnedArray,
        (false, false, true) => LiftKind::BorrowedMutSingleton,
        (false, false, false) => LiftKind::BorrowedSingleton,
        (false, true, true) => LiftKind::BorrowedMutSlice,
        (false, true, false) => LiftKind::BorrowedSlice,
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum LiftError {
    #[error("reply names no candidate type: {0:?}")]
    NoCandidate(String),
}

/// Build the decision-tree prompt for one pointer.
pub fn build_lifting_prompt(templates: &PromptTemplates, site: &RawPointerSite) -> String {
    fill(
        &templates.pointer_lifting,
        &[
            ("FUNCTION_CONTEXT", &site.function.source_text),
            ("POINTER_DECLARATION", &site.decl_text),
        ],
    )
}

fn strip_whitespace(s: &str) -> String {
    s.chars().filter(|c| !c.is_whitespace()).collect()
}

/// Parse a model reply to the lifting prompt.
///
/// Matching is whitespace-insensitive and first-occurrence-wins: the
/// candidate whose (instantiated or generic) rendering appears earliest in
/// the reply is chosen, with longer matches preferred on position ties so
/// that `Option<&mut T>` is never mistaken for `Option<&T>`, and
/// `CANNOT_REWRITE` anywhere short-circuits to a refusal.
pub fn parse_decision(reply: &str, site: &RawPointerSite) -> Result<LiftDecision, LiftError> {
    let haystack = strip_whitespace(reply);
    let pointee = site.pointee_type.trim();

    let mut best: Option<(usize, usize, Option<LiftKind>)> = None; // (pos, len, kind)
    let mut consider = |pattern: String, kind: Option<LiftKind>| {
        if pattern.is_empty() {
            return;
        }
        if let Some(pos) = haystack.find(&pattern) {
            let better = match best {
                None => true,
                Some((bpos, blen, _)) => pos < bpos || (pos == bpos && pattern.len() > blen),
            };
            if better {
                best = Some((pos, pattern.len(), kind));
            }
        }
    };

    consider("CANNOT_REWRITE".to_string(), None);
    for kind in LiftKind::ALL {
        consider(strip_whitespace(&kind.render(pointee)), Some(kind));
        consider(strip_whitespace(&kind.render("ORIG_TY")), Some(kind));
    }

    match best {
        Some((_, _, Some(kind))) => Ok(LiftDecision::Rewrite {
            target_type_text: kind.render(pointee),
            kind,
        }),
        Some((_, _, None)) => Ok(LiftDecision::CannotRewrite),
        None => Err(LiftError::NoCandidate(truncate_for_error(reply))),
    }
}

fn truncate_for_error(reply: &str) -> String {
    const LIMIT: usize = 160;
    if reply.len() <= LIMIT {
        reply.to_string()
    } else {
        let mut end = LIMIT;
        while !reply.is_char_boundary(end) {
            end -= 1;
        }
        format!("{}…", &reply[..end])
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::source_index::{enumerate_raw_pointers, index_source};
    use std::path::Path;

    fn site_with_pointee(pointee: &str) -> RawPointerSite {
        let content = format!(
            "fn f() {{\n    let p: *mut {pointee} = std::ptr::null_mut();\n    let _ = p;\n}}\n"
        );
        let idx = index_source(Path::new("src/lib.rs"), &content).unwrap();
        enumerate_raw_pointers(&idx.functions[0]).unwrap().remove(0)
    }

    #[test]
    fn trace_mapping_is_total_and_owning_ignores_write() {
        use LiftKind::*;
        let mut counts = std::collections::BTreeMap::new();
        for trace in TreePredicateTrace::ALL {
            let leaf = leaf_from_trace(trace);
            *counts.entry(leaf).or_insert(0) += 1;
            let expected = match (trace.owning, trace.array, trace.written) {
                (true, false, _) => OwnedSingleton,
                (true, true, _) => OwnedArray,
                (false, false, true) => BorrowedMutSingleton,
                (false, false, false) => BorrowedSingleton,
                (false, true, true) => BorrowedMutSlice,
                (false, true, false) => BorrowedSlice,
            };
            assert_eq!(leaf, expected, "{trace:?}");
        }
        assert_eq!(counts.len(), 6, "all six leaves reachable");
        assert_eq!(counts[&OwnedSingleton], 2);
        assert_eq!(counts[&OwnedArray], 2);
        for k in [BorrowedMutSingleton, BorrowedSingleton, BorrowedMutSlice, BorrowedSlice] {
            assert_eq!(counts[&k], 1, "{k:?}");
        }
    }

    #[test]
    fn prompt_contains_function_and_decl() {
        let site = site_with_pointee("i32");
        let t = PromptTemplates::default();
        let prompt = build_lifting_prompt(&t, &site);
        assert!(prompt.contains(&site.function.source_text));
        assert!(prompt.contains(&site.decl_text));
        for name in crate::templates::ALL_PLACEHOLDERS {
            assert!(
                !prompt.contains(&format!("#{name}#")),
                "placeholder {name} survived"
            );
        }
    }

    #[test]
    fn parses_exact_instantiated_candidate() {
        let site = site_with_pointee("i32");
        let d = parse_decision("Option<Box<i32>>", &site).unwrap();
        assert_eq!(
            d,
            LiftDecision::Rewrite {
                kind: LiftKind::OwnedSingleton,
                target_type_text: "Option<Box<i32>>".to_string()
            }
        );
    }

    #[test]
    fn parses_candidate_with_whitespace_noise() {
        let site = site_with_pointee("i32");
        let d = parse_decision(
            "The pointer should become Option< Box< i32 > > here.",
            &site,
        )
        .unwrap();
        assert!(matches!(d, LiftDecision::Rewrite { kind: LiftKind::OwnedSingleton, .. }));
    }

    #[test]
    fn generic_rendering_resolves_to_site_pointee() {
        let site = site_with_pointee("Node");
        let d = parse_decision("use Option<Vec<ORIG_TY>> for this one", &site).unwrap();
        assert_eq!(
            d,
            LiftDecision::Rewrite {
                kind: LiftKind::OwnedArray,
                target_type_text: "Option<Vec<Node>>".to_string()
            }
        );
    }

    #[test]
    fn first_occurrence_wins_when_multiple_candidates_present() {
        let site = site_with_pointee("u8");
        let d = parse_decision("&[u8] is better than Option<Box<u8>>", &site).unwrap();
        assert!(matches!(d, LiftDecision::Rewrite { kind: LiftKind::BorrowedSlice, .. }));
    }

    #[test]
    fn mut_reference_not_mistaken_for_shared() {
        let site = site_with_pointee("i32");
        // `Option<&mut i32>` contains `Option<&` but must parse as the mut leaf
        let d = parse_decision("Option<&mut i32>", &site).unwrap();
        assert!(matches!(d, LiftDecision::Rewrite { kind: LiftKind::BorrowedMutSingleton, .. }));
        // same for the slice pair
        let d = parse_decision("&mut [i32]", &site).unwrap();
        assert!(matches!(d, LiftDecision::Rewrite { kind: LiftKind::BorrowedMutSlice, .. }));
    }

    #[test]
    fn cannot_rewrite_short_circuits() {
        let site = site_with_pointee("i32");
        let d = parse_decision("CANNOT_REWRITE", &site).unwrap();
        assert_eq!(d, LiftDecision::CannotRewrite);
        // earlier than a candidate mention
        let d = parse_decision("CANNOT_REWRITE, not Option<&i32>", &site).unwrap();
        assert_eq!(d, LiftDecision::CannotRewrite);
    }

    #[test]
    fn garbage_reply_is_a_parse_error() {
        let site = site_with_pointee("i32");
        let err = parse_decision("I am not sure about this pointer.", &site).unwrap_err();
        assert!(matches!(err, LiftError::NoCandidate(_)));
    }

    #[test]
    fn every_leaf_parses_from_its_own_rendering() {
        let site = site_with_pointee("Node");
        for kind in LiftKind::ALL {
            let reply = kind.render("Node");
            let d = parse_decision(&reply, &site).unwrap();
            assert_eq!(
                d,
                LiftDecision::Rewrite {
                    kind,
                    target_type_text: kind.render("Node")
                },
                "kind {kind:?}"
            );
        }
    }

    #[test]
    fn target_type_is_rendered_not_echoed() {
        let site = site_with_pointee("Node");
        // messy spacing in the reply; target text still canonical
        let d = parse_decision("Option < Box < Node > >", &site).unwrap();
        assert_eq!(
            d,
            LiftDecision::Rewrite {
                kind: LiftKind::OwnedSingleton,
                target_type_text: "Option<Box<Node>>".to_string()
            }
        );
    }
}
