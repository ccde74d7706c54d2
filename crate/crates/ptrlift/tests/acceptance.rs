//! End-to-end acceptance checks, one test per criterion. Each prints a
//! single `ACn …: pass` line once its assertions hold, so a run with
//! `--nocapture` reads as a checklist of the pipeline's externally
//! visible guarantees.

use ptrlift::config::ProjectConfig;
use ptrlift::gateway::{cost, PriceSheet, UsageRecord};
use ptrlift::lifting::{leaf_from_trace, parse_decision, LiftDecision, LiftKind, TreePredicateTrace};
use ptrlift::pipeline::run_project;
use ptrlift::repair::{apply_change_set, compute_change_set, HunkKind};
use ptrlift::report::{LedgerEvent, PointerOutcome, RunReport};
use ptrlift::snapshot::workspace_digest;
use ptrlift::source_index::{
    ineligibility_reason, is_eligible, FunctionRecord, PointerMutability, RawPointerSite,
};
use ptrlift::verify::Toolchain;
use rand::{Rng, SeedableRng};
use std::fs;
use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

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

fn replay_config(fixture_name: &str, scripts_dir: &Path) -> ProjectConfig {
    ProjectConfig {
        crate_root: fixture(fixture_name),
        replay_dir: Some(scripts_dir.to_path_buf()),
        ..ProjectConfig::default()
    }
}

// ---------------------------------------------------------------------------
// AC1 — token cost arithmetic reproduces published run totals
// ---------------------------------------------------------------------------

#[test]
fn ac1_cost_arithmetic_matches_published_runs() {
    let prices = PriceSheet::default();
    let rows = [
        (46_068u64, 13_336u64, 0.015f64),
        (81_371u64, 27_257u64, 0.029f64),
    ];
    for (input, output, expected) in rows {
        let usage = UsageRecord {
            input_tokens: input,
            output_tokens: output,
            rounds: 0,
        };
        let got = cost(&usage, &prices);
        assert!(
            (got - expected).abs() <= 0.0005,
            "{input} in / {output} out priced at {got:.6}, expected {expected} ± 0.0005"
        );
    }
    println!("AC1 cost arithmetic: pass");
}

// ---------------------------------------------------------------------------
// AC2 — the decision tree is total and its leaves round-trip through the
// reply parser
// ---------------------------------------------------------------------------

fn site_with_pointee(pointee: &str) -> RawPointerSite {
    let decl = format!("let p: *mut {pointee} = todo!();");
    RawPointerSite {
        function: FunctionRecord {
            file_path: PathBuf::from("src/lib.rs"),
            name: "f".to_string(),
            start_line: 1,
            end_line: 3,
            source_text: format!("fn f() {{\n    {decl}\n}}"),
            signature_text: "fn f()".to_string(),
        },
        name: "p".to_string(),
        decl_line: 2,
        decl_text: decl,
        pointee_type: pointee.to_string(),
        mutability: PointerMutability::Mut,
        pointer_depth: 1,
        is_void_pointee: false,
        is_parameter: false,
    }
}

#[test]
fn ac2_decision_tree_is_total_and_round_trips() {
    // Totality: all eight predicate traces land on a leaf, the write
    // predicate is ignored for owning pointers, and every leaf is reachable.
    let mut reached = std::collections::BTreeSet::new();
    for trace in TreePredicateTrace::ALL {
        let leaf = leaf_from_trace(trace);
        assert!(LiftKind::ALL.contains(&leaf));
        reached.insert(leaf);
        if trace.owning {
            let flipped = TreePredicateTrace {
                written: !trace.written,
                ..trace
            };
            assert_eq!(leaf_from_trace(flipped), leaf);
        }
    }
    assert_eq!(reached.len(), LiftKind::ALL.len(), "every leaf is reachable");

    // Round trip: for a spread of pointee types, rendering a leaf and
    // parsing the rendered text recovers the same leaf.
    let pointees = [
        "i8", "i16", "i32", "i64", "u8", "u16", "u32", "u64", "f32", "f64",
        "usize", "isize", "bool", "char", "c_char", "c_int", "wchar_t",
        "String", "Vec<u8>", "node_t", "sockaddr_in", "[u8; 16]",
    ];
    assert!(pointees.len() >= 20);
    for pointee in pointees {
        let site = site_with_pointee(pointee);
        for kind in LiftKind::ALL {
            let reply = format!("The pointer should become {}", kind.render(pointee));
            match parse_decision(&reply, &site) {
                Ok(LiftDecision::Rewrite { kind: parsed, target_type_text }) => {
                    assert_eq!(parsed, kind, "round trip for {pointee}");
                    assert_eq!(target_type_text, kind.render(pointee));
                }
                other => panic!("render∘parse failed for {kind:?} over {pointee}: {other:?}"),
            }
        }
        assert_eq!(
            parse_decision("CANNOT_REWRITE", &site),
            Ok(LiftDecision::CannotRewrite)
        );
    }
    println!("AC2 decision-tree totality and reply round-trip: pass");
}

// ---------------------------------------------------------------------------
// AC3 — eligibility over every flag combination
// ---------------------------------------------------------------------------

#[test]
fn ac3_eligibility_over_all_flag_combinations() {
    let mut eligible_count = 0;
    for void in [false, true] {
        for deep in [false, true] {
            for param in [false, true] {
                let mut site = site_with_pointee("i32");
                site.is_void_pointee = void;
                site.pointer_depth = if deep { 2 } else { 1 };
                site.is_parameter = param;
                let expected = !void && !deep && !param;
                assert_eq!(
                    is_eligible(&site),
                    expected,
                    "void={void} deep={deep} param={param}"
                );
                assert_eq!(ineligibility_reason(&site).is_none(), expected);
                if is_eligible(&site) {
                    eligible_count += 1;
                }
            }
        }
    }
    assert_eq!(eligible_count, 1, "exactly one combination is eligible");
    println!("AC3 eligibility flag combinations: pass");
}

// ---------------------------------------------------------------------------
// AC4 — the line diff agrees with an independent LCS oracle and its hunks
// replay exactly
// ---------------------------------------------------------------------------

/// Reference LCS length, memoized bottom-up, written against the textbook
/// recurrence rather than the diff implementation under test.
fn oracle_lcs_len(a: &[&str], b: &[&str]) -> usize {
    let mut prev = vec![0usize; b.len() + 1];
    for i in 1..=a.len() {
        let mut row = vec![0usize; b.len() + 1];
        for j in 1..=b.len() {
            row[j] = if a[i - 1] == b[j - 1] {
                prev[j - 1] + 1
            } else {
                prev[j].max(row[j - 1])
            };
        }
        prev = row;
    }
    prev[b.len()]
}

fn check_diff_against_oracle(before: &str, after: &str) {
    let changes = compute_change_set(before, after);

    // Replaying the hunks over `before` must reconstruct `after` exactly.
    assert_eq!(apply_change_set(before, &changes), after);

    // Edit economy: the diff must not touch more lines than the LCS allows.
    let a: Vec<&str> = before.split('\n').collect();
    let b: Vec<&str> = after.split('\n').collect();
    let lcs = oracle_lcs_len(&a, &b);
    let (mut deleted, mut added) = (0usize, 0usize);
    for h in &changes.hunks {
        match h.kind {
            HunkKind::Added => added += h.new_lines.len(),
            HunkKind::Deleted => deleted += h.old_lines.len(),
            HunkKind::Modified => {
                deleted += h.old_lines.len();
                added += h.new_lines.len();
            }
        }
    }
    assert_eq!(deleted, a.len() - lcs, "deleted lines vs LCS");
    assert_eq!(added, b.len() - lcs, "added lines vs LCS");

    // Hunks are ordered, in-bounds, and non-overlapping on the old side.
    let mut last_old_end = 0usize;
    for h in &changes.hunks {
        match h.kind {
            HunkKind::Added => {
                assert!(h.old_start >= last_old_end);
                last_old_end = h.old_start;
            }
            _ => {
                assert!(h.old_start > last_old_end);
                assert!(h.old_start + h.old_lines.len() - 1 <= a.len());
                last_old_end = h.old_start + h.old_lines.len() - 1;
            }
        }
    }
}

#[test]
fn ac4_diff_oracle_exhaustive_and_random() {
    // Exhaustive deletion family over a twelve-line text: every subset of
    // lines kept, diffed in both directions against the full text.
    let base: Vec<String> = (1..=12).map(|i| format!("line {i}")).collect();
    let full = base.join("\n");
    for mask in 0u32..(1 << 12) {
        let subset: Vec<&str> = base
            .iter()
            .enumerate()
            .filter(|(i, _)| mask & (1 << i) != 0)
            .map(|(_, s)| s.as_str())
            .collect();
        let text = subset.join("\n");
        check_diff_against_oracle(&full, &text);
        check_diff_against_oracle(&text, &full);
    }

    // Every pair of subsets of a six-line text, exercising mixed
    // delete/insert/replace shapes.
    let short: Vec<String> = (1..=6).map(|i| format!("stmt {i};")).collect();
    let subsets: Vec<String> = (0u32..(1 << 6))
        .map(|mask| {
            short
                .iter()
                .enumerate()
                .filter(|(i, _)| mask & (1 << i) != 0)
                .map(|(_, s)| s.as_str())
                .collect::<Vec<_>>()
                .join("\n")
        })
        .collect();
    for before in &subsets {
        for after in &subsets {
            check_diff_against_oracle(before, after);
        }
    }

    // A thousand random pairs over a small line vocabulary, so repeats and
    // shuffles show up (the hard cases for hunk grouping).
    let vocab = ["a", "b", "c", "x = 1;", "}", "{", "return x;"];
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(0xacce_97ed);
    for _ in 0..1000 {
        let make = |rng: &mut rand_chacha::ChaCha8Rng| {
            let len = rng.gen_range(0..24);
            (0..len)
                .map(|_| vocab[rng.gen_range(0..vocab.len())])
                .collect::<Vec<_>>()
                .join("\n")
        };
        let before = make(&mut rng);
        let after = make(&mut rng);
        check_diff_against_oracle(&before, &after);
    }
    println!("AC4 diff oracle (exhaustive + random): pass");
}

// ---------------------------------------------------------------------------
// AC5 — scripted end-to-end run: two lifts commit, one rolls back, and the
// whole run replays byte-identically
// ---------------------------------------------------------------------------

fn record_for<'r>(report: &'r RunReport, key: &str) -> &'r ptrlift::report::PointerRecord {
    report
        .pointers
        .iter()
        .find(|p| p.key == key)
        .unwrap_or_else(|| panic!("no record for {key}"))
}

#[test]
fn ac5_replay_run_commits_two_rolls_back_one_and_is_deterministic() {
    let started = Instant::now();
    let config = replay_config("subject", &scripts("e2e"));

    let first = run_project(&config).expect("first replay");
    let second = run_project(&config).expect("second replay");

    let report = &first.report;
    assert!(report.setup_error.is_none());
    assert_eq!(report.pointers_found, 3);
    assert_eq!(report.pointers_eligible, 3);
    assert_eq!(report.eliminated_pointers, 2, "two lifts commit");
    assert_eq!(report.affected_functions, 2);
    assert!(report.final_state_ok, "final workspace verifies");

    let boxed = record_for(report, "ptr_0000");
    assert_eq!(boxed.outcome, PointerOutcome::Committed);
    assert_eq!(boxed.lift_kind, Some(LiftKind::OwnedSingleton));
    let slice = record_for(report, "ptr_0001");
    assert_eq!(slice.outcome, PointerOutcome::Committed);
    assert_eq!(slice.lift_kind, Some(LiftKind::BorrowedSlice));

    // The third pointer's rewrite never compiles and the model declines the
    // fix, so it must roll back within the attempt bound.
    let failed = record_for(report, "ptr_0002");
    assert_eq!(failed.outcome, PointerOutcome::GaveUp);
    assert!(failed.budget_used <= 5, "attempts stay within the budget");
    assert!(failed.events.contains(&LedgerEvent::RolledBack));

    // The committed rewrites are present in the final workspace and the
    // rolled-back function is untouched.
    let final_lib = fs::read_to_string(first.workspace.join("src/lib.rs")).unwrap();
    assert!(final_lib.contains("let b: Option<Box<i32>> = Some(Box::new(seed));"));
    assert!(final_lib.contains("let q: &[u8] = data;"));
    assert!(final_lib.contains("let v: *mut i32 = values.as_mut_ptr();"));

    // Determinism: both replays produce byte-identical reports and
    // byte-identical workspaces.
    let json_a = serde_json::to_string_pretty(&first.report).unwrap();
    let json_b = serde_json::to_string_pretty(&second.report).unwrap();
    assert_eq!(json_a, json_b, "reports are byte-identical across replays");
    assert_eq!(
        workspace_digest(&first.workspace).unwrap(),
        workspace_digest(&second.workspace).unwrap(),
        "workspaces are byte-identical across replays"
    );

    assert!(
        started.elapsed() < Duration::from_secs(120),
        "both replays finish inside two minutes"
    );
    println!("AC5 end-to-end replay (2 commits, 1 rollback, deterministic): pass");
}

// ---------------------------------------------------------------------------
// AC6 — budget exhaustion: five failed fixes, then a clean rollback
// ---------------------------------------------------------------------------

#[test]
fn ac6_budget_exhaustion_rolls_back_cleanly() {
    let started = Instant::now();
    let config = replay_config("budget_subject", &scripts("budget"));

    let outcome = run_project(&config).expect("budget replay");
    let report = &outcome.report;
    assert!(report.final_state_ok);
    assert_eq!(report.eliminated_pointers, 0);

    let record = record_for(report, "ptr_0000");
    assert_eq!(record.outcome, PointerOutcome::GaveUp);
    assert_eq!(record.budget_used, 5, "all five attempts were consumed");
    assert_eq!(record.detail.as_deref(), Some("repair budget exhausted"));
    assert!(record.events.contains(&LedgerEvent::RolledBack));
    let fix_requests = record
        .events
        .iter()
        .filter(|e| matches!(e, LedgerEvent::FixRequested { phase, .. } if phase == "compile_fix"))
        .count();
    assert_eq!(fix_requests, 5);

    // The restored sources are byte-identical to the input crate.
    for rel in ["src/lib.rs", "Cargo.toml"] {
        assert_eq!(
            fs::read_to_string(outcome.workspace.join(rel)).unwrap(),
            fs::read_to_string(fixture("budget_subject").join(rel)).unwrap(),
            "{rel} restored byte-identically"
        );
    }

    // And a second replay lands on the identical workspace digest.
    let again = run_project(&config).expect("second budget replay");
    assert_eq!(
        workspace_digest(&outcome.workspace).unwrap(),
        workspace_digest(&again.workspace).unwrap()
    );

    assert!(started.elapsed() < Duration::from_secs(120));
    println!("AC6 budget exhaustion and rollback: pass");
}

// ---------------------------------------------------------------------------
// AC7 — corrupted replay scripts never corrupt the workspace
// ---------------------------------------------------------------------------

/// Rewrite each script in `src` with `mutate(stem, assistant_text)` applied
/// to every assistant turn, writing the result into `dst`.
fn corrupt_scripts(src: &Path, dst: &Path, mutate: &dyn Fn(&str, usize, &str) -> Option<String>) {
    fs::create_dir_all(dst).unwrap();
    for entry in fs::read_dir(src).unwrap() {
        let path = entry.unwrap().path();
        if path.extension().is_none_or(|e| e != "jsonl") {
            continue;
        }
        let stem = path.file_stem().unwrap().to_string_lossy().into_owned();
        let mut out = String::new();
        for (i, line) in fs::read_to_string(&path).unwrap().lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let mut value: serde_json::Value = serde_json::from_str(line).unwrap();
            if value["role"].as_str() == Some("assistant") {
                let text = value["text"].as_str().unwrap_or_default().to_string();
                match mutate(&stem, i, &text) {
                    Some(new_text) => value["text"] = serde_json::Value::String(new_text),
                    None => continue, // drop the turn entirely
                }
            }
            out.push_str(&value.to_string());
            out.push('\n');
        }
        fs::write(dst.join(format!("{stem}.jsonl")), out).unwrap();
    }
}

#[test]
fn ac7_corrupted_scripts_always_terminate_without_corrupting_the_crate() {
    let started = Instant::now();
    let pristine_lib =
        fs::read_to_string(fixture("subject").join("src/lib.rs")).unwrap();

    type Corruption = (&'static str, Box<dyn Fn(&str, usize, &str) -> Option<String>>);
    let corruptions: Vec<Corruption> = vec![
        (
            // a bare function body would still be accepted, so bury the
            // defenced code in chatter the way unfenced replies arrive
            "fences stripped from every reply",
            Box::new(|_, i, text: &str| {
                let defenced = text.replace("```rust\n", "").replace("```", "");
                Some(if i == 0 {
                    defenced
                } else {
                    format!("Sure, here is what I would change and why.\n{defenced}")
                })
            }),
        ),
        (
            "rewrites change the function signature",
            Box::new(|_, _, text: &str| Some(text.replace("-> i32 {", "-> i64 {"))),
        ),
        (
            "rewrites keep the raw pointer",
            Box::new(|_, _, text: &str| {
                Some(
                    text.replace(
                        "let b: Option<Box<i32>> = Some(Box::new(seed));",
                        "let b: *mut i32 = Box::into_raw(Box::new(seed));",
                    )
                    .replace("let q: &[u8] = data;", "let q: *const u8 = data.as_ptr();")
                    .replace(
                        "let v: &mut [i32] = &mut values;",
                        "let v: *mut i32 = values.as_mut_ptr();",
                    ),
                )
            }),
        ),
        (
            "scripts truncated to the lift reply",
            Box::new(|_, i, text: &str| (i == 0).then(|| text.to_string())),
        ),
        (
            "lift replies name no candidate",
            Box::new(|_, i, text: &str| {
                Some(if i == 0 {
                    "The decision tree does not apply here.".to_string()
                } else {
                    text.to_string()
                })
            }),
        ),
        (
            "scripts emptied entirely",
            Box::new(|_, _, _: &str| None),
        ),
    ];

    for (label, mutate) in &corruptions {
        let dir = tempfile::tempdir().unwrap();
        corrupt_scripts(&scripts("e2e"), dir.path(), mutate.as_ref());

        let config = replay_config("subject", dir.path());
        let outcome = run_project(&config)
            .unwrap_or_else(|e| panic!("run with {label} did not terminate cleanly: {e}"));
        let report = &outcome.report;

        assert!(report.setup_error.is_none(), "{label}: setup untouched");
        assert!(report.final_state_ok, "{label}: final verification holds");
        assert_eq!(report.eliminated_pointers, 0, "{label}: nothing committed");
        for p in &report.pointers {
            assert_ne!(p.outcome, PointerOutcome::Committed, "{label}: {}", p.key);
        }
        // Every attempt rolled back: the working copy matches the input.
        assert_eq!(
            fs::read_to_string(outcome.workspace.join("src/lib.rs")).unwrap(),
            pristine_lib,
            "{label}: workspace restored"
        );
    }

    assert!(started.elapsed() < Duration::from_secs(300));
    println!("AC7 corrupted-script fuzzing (6 corruption shapes): pass");
}

// ---------------------------------------------------------------------------
// AC8 — a borrow conflict is reported at the conflicting line, and the
// hoisted fix compiles
// ---------------------------------------------------------------------------

#[test]
fn ac8_borrow_conflict_is_located_and_hoisted_fix_compiles() {
    let started = Instant::now();
    let dir = tempfile::tempdir().unwrap();
    for rel in ["Cargo.toml", "src/lib.rs"] {
        let dst = dir.path().join(rel);
        fs::create_dir_all(dst.parent().unwrap()).unwrap();
        fs::copy(fixture("borrowfix").join(rel), dst).unwrap();
    }

    let toolchain = Toolchain::default();
    let broken = toolchain.compile_check(dir.path()).unwrap();
    assert!(!broken.compiled);
    let conflict = broken
        .diagnostics
        .iter()
        .find(|d| d.code == "E0502")
        .expect("borrow conflict diagnostic");
    // line 23 is `let n = self.len();` — the immutable use inside the
    // mutable borrow's live range
    assert_eq!(conflict.line, 23, "diagnostic points at the conflicting use");
    assert!(conflict.file_path.ends_with("src/lib.rs"));

    // Hoisting the length read above the mutable borrow resolves it.
    let workspace = ptrlift::refactor::Workspace::new(dir.path());
    let functions = workspace.index_file(Path::new("src/lib.rs")).unwrap();
    let method = functions
        .iter()
        .find(|f| f.name == "bump_and_len")
        .expect("bump_and_len indexed");
    let fixed = "    pub fn bump_and_len(&mut self) -> usize {\n        let n = self.len();\n        let first: &mut u8 = &mut self.data[0];\n        *first += 1;\n        n\n    }";
    workspace
        .apply_patch(&ptrlift::refactor::Patch {
            file_path: method.file_path.clone(),
            start_line: method.start_line,
            end_line: method.end_line,
            old_text: method.source_text.clone(),
            new_text: fixed.to_string(),
        })
        .unwrap();

    let repaired = toolchain.compile_check(dir.path()).unwrap();
    assert!(repaired.compiled, "hoisted fix compiles: {:?}", repaired.diagnostics);

    assert!(started.elapsed() < Duration::from_secs(60));
    println!("AC8 borrow-conflict location and hoisted fix: pass");
}
