//! Run configuration: where the subject crate lives, how to drive its
//! toolchain, repair limits, model settings, and report output.

use crate::gateway::PriceSheet;
use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};
use std::time::Duration;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read config {path}: {source}")]
    Read {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("cannot parse config {path}: {message}")]
    Parse { path: PathBuf, message: String },
    #[error("invalid config: {0}")]
    Invalid(String),
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelConfig {
    pub base_url: String,
    pub model_id: String,
    pub temperature: f64,
    /// Environment variable holding the API key; never the key itself.
    pub api_key_env: String,
    pub request_timeout_s: u64,
    pub retries: u32,
    pub retry_backoff_ms: u64,
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig {
            base_url: "https://api.openai.com/v1".to_string(),
            model_id: "gpt-4o-mini".to_string(),
            temperature: 0.0,
            api_key_env: "OPENAI_API_KEY".to_string(),
            request_timeout_s: 120,
            retries: 3,
            retry_backoff_ms: 500,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ProjectConfig {
    /// Crate to rewrite. The run works on a copy, never on this tree.
    pub crate_root: PathBuf,
    /// Name used in reports; defaults to the crate_root directory name.
    pub project_name: Option<String>,
    /// Where the working copy, snapshots, and patch journal live. A
    /// temporary directory is created when unset.
    pub work_dir: Option<PathBuf>,
    pub type_check_command: Vec<String>,
    pub test_command: Vec<String>,
    /// Fix attempts allowed per pointer across compile-fix and test-fix.
    pub budget_limit: u32,
    /// Lines of context either side of an error line in fix prompts.
    pub snippet_radius: usize,
    pub check_timeout_s: u64,
    pub test_timeout_s: u64,
    /// Wall-clock cap per pointer; 0 disables the cap.
    pub pointer_time_cap_s: u64,
    pub enable_backtrace: bool,
    pub model: ModelConfig,
    pub prices: PriceSheet,
    /// Serve recorded transcripts instead of calling a live model.
    pub replay_dir: Option<PathBuf>,
    /// Record transcripts of every conversation here.
    pub record_dir: Option<PathBuf>,
    /// Override the built-in prompt templates from this directory.
    pub templates_dir: Option<PathBuf>,
    pub report_path: PathBuf,
    pub report_format: String,
}

impl Default for ProjectConfig {
    fn default() -> Self {
        ProjectConfig {
            crate_root: PathBuf::from("."),
            project_name: None,
            work_dir: None,
            type_check_command: vec![
                "cargo".into(),
                "check".into(),
                "--message-format=json".into(),
            ],
            test_command: vec!["cargo".into(), "test".into()],
            budget_limit: 5,
            snippet_radius: 5,
            check_timeout_s: 600,
            test_timeout_s: 600,
            pointer_time_cap_s: 900,
            enable_backtrace: true,
            model: ModelConfig::default(),
            prices: PriceSheet::default(),
            replay_dir: None,
            record_dir: None,
            templates_dir: None,
            report_path: PathBuf::from("ptrlift-report.json"),
            report_format: "both".to_string(),
        }
    }
}

impl ProjectConfig {
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Read {
            path: path.to_path_buf(),
            source,
        })?;
        let mut config: ProjectConfig =
            toml::from_str(&text).map_err(|e| ConfigError::Parse {
                path: path.to_path_buf(),
                message: e.to_string(),
            })?;
        let base = path.parent().unwrap_or(Path::new("."));
        config.resolve_paths(base);
        config.validate()?;
        Ok(config)
    }

    /// Anchor relative paths to `base` (the config file's directory).
    pub fn resolve_paths(&mut self, base: &Path) {
        let anchor = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&p);
            }
        };
        anchor(&mut self.crate_root);
        anchor(&mut self.report_path);
        for p in [
            &mut self.work_dir,
            &mut self.replay_dir,
            &mut self.record_dir,
            &mut self.templates_dir,
        ]
        .into_iter()
        .flatten()
        {
            anchor(p);
        }
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.budget_limit < 1 {
            return Err(ConfigError::Invalid("budget_limit must be at least 1".into()));
        }
        if self.type_check_command.is_empty() {
            return Err(ConfigError::Invalid("type_check_command must not be empty".into()));
        }
        if self.test_command.is_empty() {
            return Err(ConfigError::Invalid("test_command must not be empty".into()));
        }
        if !matches!(self.report_format.as_str(), "json" | "csv" | "both") {
            return Err(ConfigError::Invalid(format!(
                "report_format must be json, csv, or both (got {:?})",
                self.report_format
            )));
        }
        if self.model.model_id.is_empty() {
            return Err(ConfigError::Invalid("model.model_id must not be empty".into()));
        }
        Ok(())
    }

    pub fn project_name(&self) -> String {
        self.project_name.clone().unwrap_or_else(|| {
            self.crate_root
                .file_name()
                .map(|n| n.to_string_lossy().into_owned())
                .unwrap_or_else(|| "project".to_string())
        })
    }

    pub fn check_timeout(&self) -> Duration {
        Duration::from_secs(self.check_timeout_s)
    }

    pub fn test_timeout(&self) -> Duration {
        Duration::from_secs(self.test_timeout_s)
    }
}
