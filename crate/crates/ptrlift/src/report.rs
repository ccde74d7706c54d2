//! Run reports: per-pointer event ledgers, aggregate counters, timing and
//! cost totals, and the JSON/CSV/table emitters.
//!
//! Reports are deliberately free of absolute paths and wall-clock timestamps
//! so that two replays of the same scripts produce byte-identical files.

use crate::gateway::{cost, PriceSheet, UsageLedger};
use crate::lifting::LiftKind;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::fmt::Write as FmtWrite;
use std::path::{Path, PathBuf};

pub const SCHEMA_VERSION: u32 = 1;

/// Everything that happened to one pointer, in order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "event", rename_all = "snake_case")]
pub enum LedgerEvent {
    LiftDecided {
        decision: String,
    },
    LiftRejected {
        reason: String,
    },
    RewriteApplied {
        origin: String,
    },
    RewriteRejected {
        reasons: Vec<String>,
    },
    CompileChecked {
        compiled: bool,
        errors: usize,
    },
    TestsChecked {
        baseline_preserved: bool,
        failed: usize,
    },
    FixRequested {
        phase: String,
        used: u32,
    },
    ModelDeclined,
    GatewayFailed {
        reason: String,
    },
    Committed,
    RolledBack,
    Skipped {
        reason: String,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PointerOutcome {
    Committed,
    GaveUp,
    Ineligible,
    ParseFailed,
}

/// Final record for one enumerated pointer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PointerRecord {
    pub key: String,
    pub file: PathBuf,
    pub function: String,
    pub pointer: String,
    pub decl_line: usize,
    pub outcome: PointerOutcome,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lift_kind: Option<LiftKind>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub target_type: Option<String>,
    pub budget_used: u32,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub detail: Option<String>,
    pub events: Vec<LedgerEvent>,
}

/// Share of one target shape among committed lifts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LeafShare {
    pub kind: String,
    pub count: usize,
    pub percent: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct PhaseTokens {
    pub input_tokens: u64,
    pub output_tokens: u64,
    pub rounds: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub schema_version: u32,
    pub project: String,
    /// Raw pointers enumerated across the crate (eligible or not).
    pub pointers_found: usize,
    pub pointers_eligible: usize,
    /// Committed lifts — raw pointers eliminated from the crate.
    pub eliminated_pointers: usize,
    /// Distinct functions among the committed lifts.
    pub affected_functions: usize,
    pub rewrite_time_s: f64,
    pub compile_fix_time_s: f64,
    pub test_fix_time_s: f64,
    pub total_time_s: f64,
    pub input_tokens: u64,
    pub output_tokens: u64,
    pub prompt_rounds: u64,
    pub cost_usd: f64,
    /// True when any token count was estimated instead of backend-reported.
    pub tokens_estimated: bool,
    pub phase_tokens: BTreeMap<String, PhaseTokens>,
    pub leaf_distribution: Vec<LeafShare>,
    pub pointers: Vec<PointerRecord>,
    /// True when the final workspace passed the closing verification.
    pub final_state_ok: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub setup_error: Option<String>,
}

impl RunReport {
    pub fn empty(project: &str) -> Self {
        RunReport {
            schema_version: SCHEMA_VERSION,
            project: project.to_string(),
            pointers_found: 0,
            pointers_eligible: 0,
            eliminated_pointers: 0,
            affected_functions: 0,
            rewrite_time_s: 0.0,
            compile_fix_time_s: 0.0,
            test_fix_time_s: 0.0,
            total_time_s: 0.0,
            input_tokens: 0,
            output_tokens: 0,
            prompt_rounds: 0,
            cost_usd: 0.0,
            tokens_estimated: false,
            phase_tokens: BTreeMap::new(),
            leaf_distribution: Vec::new(),
            pointers: Vec::new(),
            final_state_ok: false,
            setup_error: None,
        }
    }

    /// A stub report for runs that failed before processing any pointer.
    pub fn setup_failure(project: &str, error: String) -> Self {
        let mut report = RunReport::empty(project);
        report.setup_error = Some(error);
        report
    }

    pub fn fill_usage(&mut self, ledger: &UsageLedger, prices: &PriceSheet) {
        self.input_tokens = ledger.total.input_tokens;
        self.output_tokens = ledger.total.output_tokens;
        self.prompt_rounds = ledger.total.rounds;
        self.cost_usd = cost(&ledger.total, prices);
        self.tokens_estimated = ledger.estimated;
        self.phase_tokens = BTreeMap::from([
            (
                "rewrite".to_string(),
                PhaseTokens {
                    input_tokens: ledger.rewrite.input_tokens,
                    output_tokens: ledger.rewrite.output_tokens,
                    rounds: ledger.rewrite.rounds,
                },
            ),
            (
                "compile_fix".to_string(),
                PhaseTokens {
                    input_tokens: ledger.compile_fix.input_tokens,
                    output_tokens: ledger.compile_fix.output_tokens,
                    rounds: ledger.compile_fix.rounds,
                },
            ),
            (
                "test_fix".to_string(),
                PhaseTokens {
                    input_tokens: ledger.test_fix.input_tokens,
                    output_tokens: ledger.test_fix.output_tokens,
                    rounds: ledger.test_fix.rounds,
                },
            ),
        ]);
    }

    /// Recompute the committed counts and the leaf distribution from the
    /// per-pointer records.
    pub fn fill_aggregates(&mut self) {
        let committed: Vec<&PointerRecord> = self
            .pointers
            .iter()
            .filter(|p| p.outcome == PointerOutcome::Committed)
            .collect();
        self.eliminated_pointers = committed.len();
        let functions: std::collections::BTreeSet<(PathBuf, String)> = committed
            .iter()
            .map(|p| (p.file.clone(), p.function.clone()))
            .collect();
        self.affected_functions = functions.len();

        let mut counts: BTreeMap<String, usize> = BTreeMap::new();
        for p in &committed {
            if let Some(kind) = p.lift_kind {
                *counts.entry(kind.slug().to_string()).or_insert(0) += 1;
            }
        }
        let total: usize = counts.values().sum();
        self.leaf_distribution = counts
            .into_iter()
            .map(|(kind, count)| LeafShare {
                kind,
                count,
                percent: if total == 0 {
                    0.0
                } else {
                    round1(count as f64 * 100.0 / total as f64)
                },
            })
            .collect();
    }
}

fn round1(x: f64) -> f64 {
    (x * 10.0).round() / 10.0
}

pub fn render_json(report: &RunReport) -> String {
    let mut s = serde_json::to_string_pretty(report).expect("report serializes");
    s.push('\n');
    s
}

/// One row of summary-table columns as CSV.
pub fn render_csv(report: &RunReport) -> String {
    let mut out = String::new();
    out.push_str("project,erp,af,rt_s,cft_s,tft_s,total_t_s,input_tokens,output_tokens,prompt_rounds,cost_usd\n");
    let _ = writeln!(
        out,
        "{},{},{},{:.2},{:.2},{:.2},{:.2},{},{},{},{:.3}",
        csv_field(&report.project),
        report.eliminated_pointers,
        report.affected_functions,
        report.rewrite_time_s,
        report.compile_fix_time_s,
        report.test_fix_time_s,
        report.total_time_s,
        report.input_tokens,
        report.output_tokens,
        report.prompt_rounds,
        report.cost_usd,
    );
    out
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

/// Human-readable summary printed at the end of every run.
pub fn render_table(report: &RunReport) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "project: {}", report.project);
    if let Some(err) = &report.setup_error {
        let _ = writeln!(out, "setup error: {err}");
        return out;
    }
    let _ = writeln!(
        out,
        "pointers: {} found, {} eligible",
        report.pointers_found, report.pointers_eligible
    );
    let _ = writeln!(
        out,
        "eliminated: {} raw pointer(s) across {} function(s)",
        report.eliminated_pointers, report.affected_functions
    );
    let _ = writeln!(
        out,
        "time: rewrite {:.2}s, compile-fix {:.2}s, test-fix {:.2}s, total {:.2}s",
        report.rewrite_time_s, report.compile_fix_time_s, report.test_fix_time_s, report.total_time_s
    );
    let _ = writeln!(
        out,
        "tokens: {} in, {} out over {} round(s){}",
        report.input_tokens,
        report.output_tokens,
        report.prompt_rounds,
        if report.tokens_estimated { " (estimated)" } else { "" }
    );
    let _ = writeln!(out, "cost: ${:.3}", report.cost_usd);
    if !report.leaf_distribution.is_empty() {
        let _ = writeln!(out, "target shapes among committed lifts:");
        for share in &report.leaf_distribution {
            let _ = writeln!(out, "  {:<24} {:>3}  {:>5.1}%", share.kind, share.count, share.percent);
        }
    }
    for p in &report.pointers {
        let outcome = match p.outcome {
            PointerOutcome::Committed => "committed",
            PointerOutcome::GaveUp => "gave up",
            PointerOutcome::Ineligible => "ineligible",
            PointerOutcome::ParseFailed => "parse failed",
        };
        let _ = writeln!(
            out,
            "  {} {}:{} {} in {}(): {}{}",
            p.key,
            p.file.display(),
            p.decl_line,
            p.pointer,
            p.function,
            outcome,
            p.detail
                .as_deref()
                .map(|d| format!(" ({d})"))
                .unwrap_or_default()
        );
    }
    let _ = writeln!(
        out,
        "final state: {}",
        if report.final_state_ok { "verified" } else { "NOT VERIFIED" }
    );
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ReportFormat {
    Json,
    Csv,
    Both,
}

impl std::str::FromStr for ReportFormat {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "json" => Ok(ReportFormat::Json),
            "csv" => Ok(ReportFormat::Csv),
            "both" => Ok(ReportFormat::Both),
            other => Err(format!("unknown report format `{other}` (expected json, csv, or both)")),
        }
    }
}

/// Write the report in the requested format(s) next to `base_path` (the
/// `.json` / `.csv` extension is applied here). Returns the written paths.
pub fn emit_report(
    report: &RunReport,
    base_path: &Path,
    format: ReportFormat,
) -> std::io::Result<Vec<PathBuf>> {
    if let Some(parent) = base_path.parent() {
        if !parent.as_os_str().is_empty() {
            std::fs::create_dir_all(parent)?;
        }
    }
    let mut written = Vec::new();
    let base = base_path.with_extension("");
    if matches!(format, ReportFormat::Json | ReportFormat::Both) {
        let path = base.with_extension("json");
        std::fs::write(&path, render_json(report))?;
        written.push(path);
    }
    if matches!(format, ReportFormat::Csv | ReportFormat::Both) {
        let path = base.with_extension("csv");
        std::fs::write(&path, render_csv(report))?;
        written.push(path);
    }
    Ok(written)
}
