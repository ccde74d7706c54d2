use clap::{Args, Parser, Subcommand};
use ptrlift::config::ProjectConfig;
use ptrlift::gateway::GatewayError;
use ptrlift::pipeline::{run_project, PipelineError};
use ptrlift::report::{emit_report, render_json, render_table, ReportFormat, RunReport};
use ptrlift::source_index::{self, index_crate, enumerate_raw_pointers};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::str::FromStr;

const EXIT_OK: u8 = 0;
const EXIT_FAILURE: u8 = 1;
const EXIT_USAGE: u8 = 2;

#[derive(Parser)]
#[command(
    name = "ptrlift",
    version,
    about = "Lift local raw pointers in transpiled Rust crates to safe container and reference types"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Index a crate and list its raw-pointer sites; no model calls
    Scan(CommonArgs),
    /// Run the full pipeline (live model unless --replay is given)
    Run(CommonArgs),
    /// Run the pipeline against recorded transcripts
    Replay(CommonArgs),
    /// Re-render a previously saved JSON report
    Report(ReportArgs),
}

#[derive(Args)]
struct CommonArgs {
    /// TOML run configuration
    #[arg(long, value_name = "PATH")]
    config: Option<PathBuf>,
    /// Subject crate directory (overrides the config's crate_root)
    #[arg(long = "crate", value_name = "DIR")]
    crate_dir: Option<PathBuf>,
    /// Fix attempts allowed per pointer
    #[arg(long, value_name = "N")]
    budget: Option<u32>,
    /// Directory of recorded transcripts to replay
    #[arg(long, value_name = "DIR")]
    replay: Option<PathBuf>,
    /// Record transcripts of every conversation here
    #[arg(long, value_name = "DIR")]
    record: Option<PathBuf>,
    /// Report output path (extension is replaced per format)
    #[arg(long, value_name = "PATH")]
    report: Option<PathBuf>,
    /// Report format: json, csv, or both
    #[arg(long, value_name = "FMT")]
    format: Option<String>,
    /// Type-check timeout in seconds
    #[arg(long, value_name = "S")]
    timeout_compile: Option<u64>,
    /// Test-run timeout in seconds
    #[arg(long, value_name = "S")]
    timeout_test: Option<u64>,
    /// Working directory for the crate copy, snapshots, and journal
    #[arg(long, value_name = "DIR")]
    work_dir: Option<PathBuf>,
    /// Directory of prompt template overrides
    #[arg(long, value_name = "DIR")]
    templates: Option<PathBuf>,
}

#[derive(Args)]
struct ReportArgs {
    /// Saved JSON report to re-render
    #[arg(long, value_name = "PATH")]
    report: PathBuf,
    /// Output format: json, csv, or both
    #[arg(long, value_name = "FMT", default_value = "both")]
    format: String,
    /// Where to write the rendering (defaults to next to the input)
    #[arg(long, value_name = "PATH")]
    out: Option<PathBuf>,
}

fn main() -> ExitCode {
    // die quietly when stdout closes early (`ptrlift report | head`), the
    // way other unix tools do, instead of panicking mid-print
    #[cfg(unix)]
    unsafe {
        libc::signal(libc::SIGPIPE, libc::SIG_DFL);
    }
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let code = match cli.command {
        Command::Scan(args) => cmd_scan(&args),
        Command::Run(args) => cmd_run(&args, false),
        Command::Replay(args) => cmd_run(&args, true),
        Command::Report(args) => cmd_report(&args),
    };
    ExitCode::from(code)
}

/// Merge the config file (if any) with command-line overrides.
fn build_config(args: &CommonArgs) -> Result<ProjectConfig, u8> {
    if args.config.is_none() && args.crate_dir.is_none() {
        eprintln!("error: provide --config <path> or --crate <dir>");
        return Err(EXIT_USAGE);
    }
    let mut config = match &args.config {
        Some(path) => ProjectConfig::load(path).map_err(|e| {
            eprintln!("error: {e}");
            EXIT_USAGE
        })?,
        None => ProjectConfig::default(),
    };
    let cwd = std::env::current_dir().unwrap_or_else(|_| PathBuf::from("."));
    let anchor = |p: &Path| {
        if p.is_relative() {
            cwd.join(p)
        } else {
            p.to_path_buf()
        }
    };
    if let Some(dir) = &args.crate_dir {
        config.crate_root = anchor(dir);
    }
    if let Some(n) = args.budget {
        config.budget_limit = n;
    }
    if let Some(dir) = &args.replay {
        config.replay_dir = Some(anchor(dir));
    }
    if let Some(dir) = &args.record {
        config.record_dir = Some(anchor(dir));
    }
    if let Some(path) = &args.report {
        config.report_path = anchor(path);
    }
    if let Some(fmt) = &args.format {
        config.report_format = fmt.clone();
    }
    if let Some(s) = args.timeout_compile {
        config.check_timeout_s = s;
    }
    if let Some(s) = args.timeout_test {
        config.test_timeout_s = s;
    }
    if let Some(dir) = &args.work_dir {
        config.work_dir = Some(anchor(dir));
    }
    if let Some(dir) = &args.templates {
        config.templates_dir = Some(anchor(dir));
    }
    config.validate().map_err(|e| {
        eprintln!("error: {e}");
        EXIT_USAGE
    })?;
    Ok(config)
}

fn cmd_scan(args: &CommonArgs) -> u8 {
    let config = match build_config(args) {
        Ok(c) => c,
        Err(code) => return code,
    };
    let index = match index_crate(&config.crate_root) {
        Ok(index) => index,
        Err(e) => {
            eprintln!("error: {e}");
            return EXIT_FAILURE;
        }
    };
    let mut functions = index.functions.clone();
    functions.sort_by(|a, b| (&a.file_path, a.start_line).cmp(&(&b.file_path, b.start_line)));
    let mut eligible = 0usize;
    let mut total = 0usize;
    for function in &functions {
        let sites = match enumerate_raw_pointers(function) {
            Ok(sites) => sites,
            Err(e) => {
                eprintln!("error: {e}");
                return EXIT_FAILURE;
            }
        };
        for site in sites {
            total += 1;
            match source_index::ineligibility_reason(&site) {
                None => {
                    eligible += 1;
                    println!(
                        "{}:{}  {}  in {}()  [eligible]",
                        function.file_path.display(),
                        site.decl_line,
                        site.decl_text.trim(),
                        function.name,
                    );
                }
                Some(reason) => {
                    println!(
                        "{}:{}  {}  in {}()  [skipped: {}]",
                        function.file_path.display(),
                        site.decl_line,
                        site.decl_text.trim(),
                        function.name,
                        reason,
                    );
                }
            }
        }
    }
    for skipped in &index.skipped_decls {
        println!(
            "{}:{}  [skipped: {}]",
            skipped.file_path.display(),
            skipped.line,
            skipped.reason
        );
    }
    println!("{eligible} eligible of {total} raw pointer site(s)");
    EXIT_OK
}

fn cmd_run(args: &CommonArgs, replay_required: bool) -> u8 {
    let config = match build_config(args) {
        Ok(c) => c,
        Err(code) => return code,
    };
    if replay_required && config.replay_dir.is_none() {
        eprintln!("error: replay requires --replay <dir> (or replay_dir in the config)");
        return EXIT_USAGE;
    }
    let outcome = match run_project(&config) {
        Ok(outcome) => outcome,
        Err(PipelineError::Gateway(GatewayError::MissingApiKey(var))) => {
            eprintln!(
                "error: no model access: set {var} for live runs or pass --replay <dir> \
                 to use recorded transcripts"
            );
            return EXIT_USAGE;
        }
        Err(PipelineError::Gateway(GatewayError::ScriptLoad { path, message })) => {
            eprintln!("error: cannot load replay scripts from {}: {message}", path.display());
            return EXIT_USAGE;
        }
        Err(PipelineError::Config(e)) => {
            eprintln!("error: {e}");
            return EXIT_USAGE;
        }
        Err(e) => {
            eprintln!("error: {e}");
            return EXIT_FAILURE;
        }
    };

    let report = &outcome.report;
    print!("{}", render_table(report));
    let format = match ReportFormat::from_str(&config.report_format) {
        Ok(f) => f,
        Err(e) => {
            eprintln!("error: {e}");
            return EXIT_USAGE;
        }
    };
    match emit_report(report, &config.report_path, format) {
        Ok(paths) => {
            for path in paths {
                println!("wrote {}", path.display());
            }
        }
        Err(e) => {
            // keep the data recoverable even when the report path is bad
            eprintln!("error: cannot write report to {}: {e}", config.report_path.display());
            print!("{}", render_json(report));
            return EXIT_FAILURE;
        }
    }

    if report.setup_error.is_some() {
        return EXIT_FAILURE;
    }
    if !report.final_state_ok {
        eprintln!("error: final workspace failed verification");
        return EXIT_FAILURE;
    }
    println!("workspace: {}", outcome.workspace.display());
    EXIT_OK
}

fn cmd_report(args: &ReportArgs) -> u8 {
    let text = match std::fs::read_to_string(&args.report) {
        Ok(text) => text,
        Err(e) => {
            eprintln!("error: cannot read {}: {e}", args.report.display());
            return EXIT_FAILURE;
        }
    };
    let report: RunReport = match serde_json::from_str(&text) {
        Ok(report) => report,
        Err(e) => {
            eprintln!("error: {} is not a saved report: {e}", args.report.display());
            return EXIT_FAILURE;
        }
    };
    let format = match ReportFormat::from_str(&args.format) {
        Ok(f) => f,
        Err(e) => {
            eprintln!("error: {e}");
            return EXIT_USAGE;
        }
    };
    print!("{}", render_table(&report));
    let base = args.out.clone().unwrap_or_else(|| args.report.clone());
    match emit_report(&report, &base, format) {
        Ok(paths) => {
            for path in paths {
                println!("wrote {}", path.display());
            }
            EXIT_OK
        }
        Err(e) => {
            eprintln!("error: cannot write report: {e}");
            EXIT_FAILURE
        }
    }
}
