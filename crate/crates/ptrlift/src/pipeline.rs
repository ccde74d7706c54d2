//! Whole-project orchestration: copy the subject crate into a working
//! directory, record the compile/test baseline, then walk every raw pointer
//! in a fixed order, lifting, verifying, repairing, and committing or
//! rolling back each one. Produces the run report.

use crate::config::{ConfigError, ProjectConfig};
use crate::gateway::{
    Clock, Conversation, Gateway, GatewayError, LiveBackend, LiveConfig, Phase, ReplayBackend,
};
use crate::lifting::{build_lifting_prompt, parse_decision, LiftDecision, LiftKind};
use crate::refactor::{
    build_refactor_prompt, build_retry_prompt, extract_code_block, strip_leading_attrs,
    validate_rewrite, ExtractError, Patch, PatchError, Workspace,
};
use crate::repair::{FixOutcome, GiveUpReason, RepairBudget, RepairError, RepairSession};
use crate::report::{LedgerEvent, PointerOutcome, PointerRecord, RunReport};
use crate::snapshot::{SnapshotError, SnapshotStore};
use crate::source_index::{
    self, collect_context, enumerate_raw_pointers, find_function, index_crate, CrateIndex,
    FunctionRecord, IndexError, RawPointerSite,
};
use crate::templates::{PromptTemplates, TemplateError};
use crate::verify::{Toolchain, VerifyError, VerifyResult};
use std::collections::BTreeSet;
use std::path::{Path, PathBuf};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Template(#[from] TemplateError),
    #[error(transparent)]
    Gateway(#[from] GatewayError),
    #[error(transparent)]
    Snapshot(#[from] SnapshotError),
    #[error(transparent)]
    Verify(#[from] VerifyError),
    #[error(transparent)]
    Patch(#[from] PatchError),
    #[error(transparent)]
    Index(#[from] IndexError),
    #[error("workspace setup failed at {path}: {source}")]
    WorkspaceSetup {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

/// The finished run: its report plus where the rewritten workspace lives.
/// When no work_dir was configured the backing temp directory stays alive
/// for as long as this value does.
pub struct RunOutcome {
    pub report: RunReport,
    pub workspace: PathBuf,
    _temp_guard: Option<tempfile::TempDir>,
}

/// Pick the model backend: recorded transcripts when `replay_dir` is set,
/// the live API otherwise. Replay runs use a virtual clock driven by the
/// scripted turn durations so repeated runs produce identical timings.
pub fn build_gateway(config: &ProjectConfig) -> Result<(Gateway, Clock), PipelineError> {
    if let Some(dir) = &config.replay_dir {
        let backend = ReplayBackend::load(dir)?;
        let gateway = Gateway::new(Box::new(backend), config.record_dir.clone());
        return Ok((gateway, Clock::virtual_clock()));
    }
    let key = std::env::var(&config.model.api_key_env)
        .map_err(|_| GatewayError::MissingApiKey(config.model.api_key_env.clone()))?;
    let backend = LiveBackend::new(LiveConfig {
        base_url: config.model.base_url.clone(),
        api_key: key,
        request_timeout: std::time::Duration::from_secs(config.model.request_timeout_s),
        retries: config.model.retries,
        retry_backoff_ms: config.model.retry_backoff_ms,
    })?;
    Ok((
        Gateway::new(Box::new(backend), config.record_dir.clone()),
        Clock::monotonic(),
    ))
}

pub fn run_project(config: &ProjectConfig) -> Result<RunOutcome, PipelineError> {
    let (mut gateway, clock) = build_gateway(config)?;
    run_with_gateway(config, &mut gateway, &clock)
}

/// Identity of one pointer fixed at enumeration time, stable across the
/// rewrites earlier pointers commit (occurrence counts, not line numbers).
struct PlannedSite {
    key: String,
    file: PathBuf,
    fn_name: String,
    fn_occurrence: usize,
    ptr_name: String,
    ptr_occurrence: usize,
    decl_line: usize,
    eligible: bool,
    skip_reason: Option<String>,
}

#[derive(Default)]
struct PointerTimers {
    rewrite_s: f64,
    compile_fix_s: f64,
    test_fix_s: f64,
}

pub fn run_with_gateway(
    config: &ProjectConfig,
    gateway: &mut Gateway,
    clock: &Clock,
) -> Result<RunOutcome, PipelineError> {
    let templates = PromptTemplates::load(config.templates_dir.as_deref())?;
    let project = config.project_name();

    let (work_root, temp_guard) = match &config.work_dir {
        Some(dir) => (dir.clone(), None),
        None => {
            let temp = tempfile::Builder::new()
                .prefix("ptrlift-")
                .tempdir()
                .map_err(|source| PipelineError::WorkspaceSetup {
                    path: std::env::temp_dir(),
                    source,
                })?;
            (temp.path().to_path_buf(), Some(temp))
        }
    };
    let workspace_dir = work_root.join("workspace");
    copy_crate(&config.crate_root, &workspace_dir)?;
    if let Some(dir) = &config.record_dir {
        std::fs::create_dir_all(dir).map_err(|source| PipelineError::WorkspaceSetup {
            path: dir.clone(),
            source,
        })?;
    }

    let toolchain = Toolchain {
        check_command: config.type_check_command.clone(),
        test_command: config.test_command.clone(),
        check_timeout: config.check_timeout(),
        test_timeout: config.test_timeout(),
    };
    let workspace = Workspace::with_journal(workspace_dir.clone(), work_root.join("patches.jsonl"));
    let mut store = SnapshotStore::new(work_root.join("snapshots"));

    let run_start = clock.now_s();
    let mut report = RunReport::empty(&project);
    let finish_setup_error = |mut report: RunReport, message: String| RunOutcome {
        report: {
            report.setup_error = Some(message);
            report.final_state_ok = false;
            report
        },
        workspace: workspace_dir.clone(),
        _temp_guard: None,
    };

    // Baseline: the pristine copy must type-check, and the tests must at
    // least run; their passing subset is the bar every commit must clear.
    let baseline_check = match toolchain.compile_check(&workspace_dir) {
        Ok(result) => result,
        Err(VerifyError::Launch { command, .. }) => {
            return Ok(finish_setup_error(
                report,
                format!("type-check command {command:?} failed to launch"),
            ));
        }
        Err(e) => return Err(e.into()),
    };
    if !baseline_check.compiled {
        let first = baseline_check
            .diagnostics
            .first()
            .map(|d| d.message.clone())
            .unwrap_or_default();
        return Ok(finish_setup_error(
            report,
            format!(
                "pristine crate fails to type-check ({} errors; first: {first})",
                baseline_check.diagnostics.len()
            ),
        ));
    }
    let baseline_run = match toolchain.run_tests(&workspace_dir, config.enable_backtrace) {
        Ok(result) => result,
        Err(VerifyError::Launch { command, .. }) => {
            return Ok(finish_setup_error(
                report,
                format!("test command {command:?} failed to launch"),
            ));
        }
        Err(e) => return Err(e.into()),
    };
    if baseline_run.timed_out {
        return Ok(finish_setup_error(
            report,
            format!("baseline test run timed out after {}s", config.test_timeout_s),
        ));
    }
    let baseline: BTreeSet<String> = baseline_run.pass_set();

    // Enumerate every pointer up front in a fixed order so runs are
    // reproducible and conversation keys are stable.
    let planned = match plan_sites(&workspace_dir) {
        Ok(sites) => sites,
        Err(IndexError::Parse { path, line, message }) => {
            return Ok(finish_setup_error(
                report,
                format!("cannot index {}:{line}: {message}", path.display()),
            ));
        }
        Err(e) => return Err(e.into()),
    };
    report.pointers_found = planned.len();
    report.pointers_eligible = planned.iter().filter(|s| s.eligible).count();

    for site in &planned {
        if !site.eligible {
            let reason = site
                .skip_reason
                .clone()
                .unwrap_or_else(|| "ineligible".to_string());
            report.pointers.push(PointerRecord {
                key: site.key.clone(),
                file: site.file.clone(),
                function: site.fn_name.clone(),
                pointer: site.ptr_name.clone(),
                decl_line: site.decl_line,
                outcome: PointerOutcome::Ineligible,
                lift_kind: None,
                target_type: None,
                budget_used: 0,
                detail: Some(reason.clone()),
                events: vec![LedgerEvent::Skipped { reason }],
            });
            continue;
        }
        let mut timers = PointerTimers::default();
        let record = process_pointer(
            site, config, &templates, &workspace, &toolchain, &mut store, gateway, clock,
            &baseline, &mut timers,
        )?;
        report.rewrite_time_s += timers.rewrite_s;
        report.compile_fix_time_s += timers.compile_fix_s;
        report.test_fix_time_s += timers.test_fix_s;
        report.pointers.push(record);
    }

    // Run-end safety net: the workspace that leaves this function must
    // compile and keep the baseline green, whatever the per-pointer path.
    let final_check = toolchain.compile_check(&workspace_dir)?;
    let final_tests = toolchain.run_tests(&workspace_dir, config.enable_backtrace)?;
    report.final_state_ok = final_check.compiled && final_tests.pass_set().is_superset(&baseline);

    report.fill_aggregates();
    report.fill_usage(&gateway.ledger, &config.prices);
    report.total_time_s = clock.now_s() - run_start;

    Ok(RunOutcome {
        report,
        workspace: workspace_dir,
        _temp_guard: temp_guard,
    })
}

/// Copy the subject crate, skipping build artifacts and VCS metadata. The
/// destination is recreated from scratch.
pub fn copy_crate(src: &Path, dst: &Path) -> Result<(), PipelineError> {
    let io_err = |path: &Path| {
        let path = path.to_path_buf();
        move |source: std::io::Error| PipelineError::WorkspaceSetup { path, source }
    };
    if dst.exists() {
        std::fs::remove_dir_all(dst).map_err(io_err(dst))?;
    }
    std::fs::create_dir_all(dst).map_err(io_err(dst))?;
    for entry in walkdir::WalkDir::new(src).min_depth(1) {
        let entry = entry.map_err(|e| PipelineError::WorkspaceSetup {
            path: src.to_path_buf(),
            source: e.into_io_error().unwrap_or_else(|| std::io::Error::other("walk failed")),
        })?;
        let rel = entry.path().strip_prefix(src).expect("walker stays under src");
        if rel.components().any(|c| c.as_os_str() == "target" || c.as_os_str() == ".git") {
            continue;
        }
        let to = dst.join(rel);
        if entry.file_type().is_dir() {
            std::fs::create_dir_all(&to).map_err(io_err(&to))?;
        } else if entry.file_type().is_file() {
            if let Some(parent) = to.parent() {
                std::fs::create_dir_all(parent).map_err(io_err(parent))?;
            }
            std::fs::copy(entry.path(), &to).map_err(io_err(&to))?;
        }
    }
    Ok(())
}

/// Enumerate all raw-pointer sites in (file, function start, declaration
/// line) order and fix their identities.
fn plan_sites(workspace_dir: &Path) -> Result<Vec<PlannedSite>, IndexError> {
    let index = index_crate(workspace_dir)?;
    let mut functions = index.functions.clone();
    functions.sort_by(|a, b| (&a.file_path, a.start_line).cmp(&(&b.file_path, b.start_line)));

    let mut planned = Vec::new();
    let mut counter = 0usize;
    for (pos, function) in functions.iter().enumerate() {
        let fn_occurrence = functions[..pos]
            .iter()
            .filter(|f| f.file_path == function.file_path && f.name == function.name)
            .count();
        let sites = enumerate_raw_pointers(function)?;
        let mut seen_names: Vec<String> = Vec::new();
        for site in &sites {
            let ptr_occurrence = seen_names.iter().filter(|n| **n == site.name).count();
            seen_names.push(site.name.clone());
            planned.push(PlannedSite {
                key: format!("ptr_{counter:04}"),
                file: function.file_path.clone(),
                fn_name: function.name.clone(),
                fn_occurrence,
                ptr_name: site.name.clone(),
                ptr_occurrence,
                decl_line: site.decl_line,
                eligible: source_index::is_eligible(site),
                skip_reason: source_index::ineligibility_reason(site),
            });
            counter += 1;
        }
    }
    Ok(planned)
}

/// Find the planned pointer in the current workspace text. Earlier commits
/// may have moved or removed it.
fn refresh_site(
    workspace_dir: &Path,
    planned: &PlannedSite,
) -> Result<Option<(RawPointerSite, FunctionRecord, CrateIndex)>, IndexError> {
    let index = index_crate(workspace_dir)?;
    let Some(function) = find_function(
        &index.functions,
        &planned.file,
        &planned.fn_name,
        planned.fn_occurrence,
    )
    .cloned() else {
        return Ok(None);
    };
    let sites = enumerate_raw_pointers(&function)?;
    let site = sites
        .into_iter()
        .filter(|s| s.name == planned.ptr_name)
        .nth(planned.ptr_occurrence);
    Ok(site.map(|s| (s, function, index)))
}

enum PointerEnd {
    Committed { kind: LiftKind, target: String },
    GaveUp { detail: String },
    Ineligible { detail: String },
    ParseFailed { detail: String },
}

#[allow(clippy::too_many_arguments)]
fn process_pointer(
    planned: &PlannedSite,
    config: &ProjectConfig,
    templates: &PromptTemplates,
    workspace: &Workspace,
    toolchain: &Toolchain,
    store: &mut SnapshotStore,
    gateway: &mut Gateway,
    clock: &Clock,
    baseline: &BTreeSet<String>,
    timers: &mut PointerTimers,
) -> Result<PointerRecord, PipelineError> {
    let mut events: Vec<LedgerEvent> = Vec::new();
    let mut budget = RepairBudget::new(config.budget_limit);
    let deadline_s = (config.pointer_time_cap_s > 0)
        .then(|| clock.now_s() + config.pointer_time_cap_s as f64);
    let snapshot = store.take(workspace.root())?;

    let end = drive_pointer(
        planned, config, templates, workspace, toolchain, gateway, clock, baseline, timers,
        &mut events, &mut budget, deadline_s,
    );

    let end = match end {
        Ok(end) => end,
        Err(e) => {
            // infrastructure failure: put the workspace back before bailing
            store.restore(workspace.root(), &snapshot)?;
            return Err(e);
        }
    };

    let applied = events
        .iter()
        .any(|e| matches!(e, LedgerEvent::RewriteApplied { .. }));
    let (outcome, lift_kind, target_type, detail) = match end {
        PointerEnd::Committed { kind, target } => {
            events.push(LedgerEvent::Committed);
            (PointerOutcome::Committed, Some(kind), Some(target), None)
        }
        PointerEnd::GaveUp { detail } => {
            store.restore(workspace.root(), &snapshot)?;
            if applied {
                events.push(LedgerEvent::RolledBack);
            }
            (PointerOutcome::GaveUp, None, None, Some(detail))
        }
        PointerEnd::Ineligible { detail } => {
            store.restore(workspace.root(), &snapshot)?;
            (PointerOutcome::Ineligible, None, None, Some(detail))
        }
        PointerEnd::ParseFailed { detail } => {
            store.restore(workspace.root(), &snapshot)?;
            (PointerOutcome::ParseFailed, None, None, Some(detail))
        }
    };

    Ok(PointerRecord {
        key: planned.key.clone(),
        file: planned.file.clone(),
        function: planned.fn_name.clone(),
        pointer: planned.ptr_name.clone(),
        decl_line: planned.decl_line,
        outcome,
        lift_kind,
        target_type,
        budget_used: budget.used,
        detail,
        events,
    })
}

/// The per-pointer state machine: lift, refactor (with validation retries),
/// verify, and repair. Returns how the pointer ended; the caller commits or
/// rolls back.
#[allow(clippy::too_many_arguments)]
fn drive_pointer(
    planned: &PlannedSite,
    config: &ProjectConfig,
    templates: &PromptTemplates,
    workspace: &Workspace,
    toolchain: &Toolchain,
    gateway: &mut Gateway,
    clock: &Clock,
    baseline: &BTreeSet<String>,
    timers: &mut PointerTimers,
    events: &mut Vec<LedgerEvent>,
    budget: &mut RepairBudget,
    deadline_s: Option<f64>,
) -> Result<PointerEnd, PipelineError> {
    let past_deadline = |clock: &Clock| deadline_s.is_some_and(|d| clock.now_s() >= d);

    let Some((site, function, index)) = refresh_site(workspace.root(), planned)? else {
        return Ok(PointerEnd::Ineligible {
            detail: "declaration no longer present after earlier rewrites".to_string(),
        });
    };
    if !source_index::is_eligible(&site) {
        return Ok(PointerEnd::Ineligible {
            detail: source_index::ineligibility_reason(&site)
                .unwrap_or_else(|| "ineligible".to_string()),
        });
    }

    let mut conversation = Conversation::new(
        planned.key.clone(),
        config.model.model_id.clone(),
        config.model.temperature,
    );

    // Phase 1a: classify the pointer.
    let rt_start = clock.now_s();
    let lift_prompt = build_lifting_prompt(templates, &site);
    let reply = match gateway.submit(&mut conversation, lift_prompt, Phase::Rewrite, clock) {
        Ok(text) => text,
        Err(e) => {
            events.push(LedgerEvent::GatewayFailed { reason: e.to_string() });
            timers.rewrite_s += clock.now_s() - rt_start;
            return Ok(PointerEnd::GaveUp { detail: e.to_string() });
        }
    };
    let (kind, target) = match parse_decision(&reply, &site) {
        Ok(LiftDecision::Rewrite { kind, target_type_text }) => {
            events.push(LedgerEvent::LiftDecided {
                decision: target_type_text.clone(),
            });
            (kind, target_type_text)
        }
        Ok(LiftDecision::CannotRewrite) => {
            events.push(LedgerEvent::LiftDecided {
                decision: "CANNOT_REWRITE".to_string(),
            });
            timers.rewrite_s += clock.now_s() - rt_start;
            return Ok(PointerEnd::Ineligible {
                detail: "model chose CANNOT_REWRITE".to_string(),
            });
        }
        Err(e) => {
            events.push(LedgerEvent::LiftRejected { reason: e.to_string() });
            timers.rewrite_s += clock.now_s() - rt_start;
            return Ok(PointerEnd::ParseFailed { detail: e.to_string() });
        }
    };

    // Phase 1b: rewrite the function, retrying while the reply violates the
    // rewrite rules and budget remains.
    let context = collect_context(&function, &index);
    let refactor_prompt = build_refactor_prompt(templates, &site, kind, &context);
    let mut reply = match gateway.submit(&mut conversation, refactor_prompt, Phase::Rewrite, clock)
    {
        Ok(text) => text,
        Err(e) => {
            events.push(LedgerEvent::GatewayFailed { reason: e.to_string() });
            timers.rewrite_s += clock.now_s() - rt_start;
            return Ok(PointerEnd::GaveUp { detail: e.to_string() });
        }
    };
    loop {
        let candidate = match extract_code_block(&reply) {
            Ok(code) => code,
            Err(ExtractError::Declined) => {
                events.push(LedgerEvent::ModelDeclined);
                timers.rewrite_s += clock.now_s() - rt_start;
                return Ok(PointerEnd::GaveUp {
                    detail: GiveUpReason::ModelDeclined.to_string(),
                });
            }
            Err(ExtractError::NoCodeBlock) => reply.trim().to_string(),
        };
        let verdict = validate_rewrite(&function, &site, &candidate);
        if verdict.ok() {
            workspace.apply_patch(&Patch {
                file_path: function.file_path.clone(),
                start_line: function.start_line,
                end_line: function.end_line,
                old_text: function.source_text.clone(),
                new_text: strip_leading_attrs(&candidate),
            })?;
            events.push(LedgerEvent::RewriteApplied {
                origin: "rewrite".to_string(),
            });
            break;
        }
        let reasons: Vec<String> = verdict.violations.iter().map(|v| v.to_string()).collect();
        events.push(LedgerEvent::RewriteRejected { reasons: reasons.clone() });
        if past_deadline(clock) {
            timers.rewrite_s += clock.now_s() - rt_start;
            return Ok(PointerEnd::GaveUp {
                detail: GiveUpReason::TimeCapExceeded.to_string(),
            });
        }
        if !budget.try_consume() {
            timers.rewrite_s += clock.now_s() - rt_start;
            return Ok(PointerEnd::GaveUp {
                detail: GiveUpReason::BudgetExhausted.to_string(),
            });
        }
        events.push(LedgerEvent::FixRequested {
            phase: "rewrite_retry".to_string(),
            used: budget.used,
        });
        let retry_prompt = build_retry_prompt(templates, &reasons.join("; "));
        reply = match gateway.submit(&mut conversation, retry_prompt, Phase::Rewrite, clock) {
            Ok(text) => text,
            Err(e) => {
                events.push(LedgerEvent::GatewayFailed { reason: e.to_string() });
                timers.rewrite_s += clock.now_s() - rt_start;
                return Ok(PointerEnd::GaveUp { detail: e.to_string() });
            }
        };
    }

    // Initial verification of the applied rewrite.
    let check = toolchain.compile_check(workspace.root())?;
    events.push(LedgerEvent::CompileChecked {
        compiled: check.compiled,
        errors: check.diagnostics.len(),
    });
    timers.rewrite_s += clock.now_s() - rt_start;

    // Phase 2a: compile fixing.
    if !check.compiled {
        let cft_start = clock.now_s();
        let outcome = run_fix_loop(
            FixPhase::Compile(check), planned, config, templates, workspace, toolchain,
            gateway, clock, baseline, &mut conversation, events, budget, deadline_s,
            &function, &site,
        );
        timers.compile_fix_s += clock.now_s() - cft_start;
        match outcome? {
            FixResult::Fixed => {}
            FixResult::GaveUp(detail) => return Ok(PointerEnd::GaveUp { detail }),
        }
    }

    // Initial test verification.
    let t = clock.now_s();
    let tests = toolchain.run_tests(workspace.root(), config.enable_backtrace)?;
    let preserved = tests.pass_set().is_superset(baseline);
    events.push(LedgerEvent::TestsChecked {
        baseline_preserved: preserved,
        failed: tests
            .tests
            .iter()
            .filter(|t| t.status == crate::verify::TestStatus::Fail)
            .count(),
    });
    timers.rewrite_s += clock.now_s() - t;

    // Phase 2b: test fixing.
    if !preserved {
        let tft_start = clock.now_s();
        let outcome = run_fix_loop(
            FixPhase::Test(tests), planned, config, templates, workspace, toolchain,
            gateway, clock, baseline, &mut conversation, events, budget, deadline_s,
            &function, &site,
        );
        timers.test_fix_s += clock.now_s() - tft_start;
        match outcome? {
            FixResult::Fixed => {}
            FixResult::GaveUp(detail) => return Ok(PointerEnd::GaveUp { detail }),
        }
    }

    Ok(PointerEnd::Committed { kind, target })
}

enum FixPhase {
    Compile(VerifyResult),
    Test(VerifyResult),
}

enum FixResult {
    Fixed,
    GaveUp(String),
}

/// Run one of the repair loops against the lifted function, translating
/// repair-level errors into pointer outcomes: gateway trouble abandons the
/// pointer, toolchain trouble aborts the run.
#[allow(clippy::too_many_arguments)]
fn run_fix_loop(
    phase: FixPhase,
    planned: &PlannedSite,
    config: &ProjectConfig,
    templates: &PromptTemplates,
    workspace: &Workspace,
    toolchain: &Toolchain,
    gateway: &mut Gateway,
    clock: &Clock,
    baseline: &BTreeSet<String>,
    conversation: &mut Conversation,
    events: &mut Vec<LedgerEvent>,
    budget: &mut RepairBudget,
    deadline_s: Option<f64>,
    original: &FunctionRecord,
    site: &RawPointerSite,
) -> Result<FixResult, PipelineError> {
    let mut session = RepairSession {
        workspace,
        toolchain,
        gateway: &mut *gateway,
        conversation: &mut *conversation,
        templates,
        clock,
        original,
        site,
        fn_occurrence: planned.fn_occurrence,
        budget: &mut *budget,
        snippet_radius: config.snippet_radius,
        baseline,
        enable_backtrace: config.enable_backtrace,
        deadline_s,
        events: &mut *events,
    };
    let result = match phase {
        FixPhase::Compile(last) => session.compile_fix_loop(last),
        FixPhase::Test(last) => session.test_fix_loop(last),
    };
    match result {
        Ok(FixOutcome::Fixed) => Ok(FixResult::Fixed),
        Ok(FixOutcome::GaveUp(reason)) => Ok(FixResult::GaveUp(reason.to_string())),
        Err(RepairError::Gateway(e)) => {
            events.push(LedgerEvent::GatewayFailed { reason: e.to_string() });
            Ok(FixResult::GaveUp(e.to_string()))
        }
        Err(RepairError::FunctionLost { file, name }) => Ok(FixResult::GaveUp(format!(
            "function {name} disappeared from {}",
            file.display()
        ))),
        Err(RepairError::Verify(e)) => Err(e.into()),
        Err(RepairError::Patch(e)) => Err(e.into()),
        Err(RepairError::Index(e)) => Err(e.into()),
    }
}
