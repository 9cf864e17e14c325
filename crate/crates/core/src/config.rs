//! Bot configuration. Everything project-specific lives here rather than in workflow code.

use std::collections::BTreeMap;
use std::path::Path;

use globset::Glob;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::action::MirrorTarget;
use crate::model::RepoRef;
use crate::workflows::backport::BackportSettings;
use crate::workflows::ci::CiSettings;
use crate::workflows::lifecycle::{MergePolicy, StaleSettings};

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read config {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("cannot parse config: {0}")]
    Parse(String),
    #[error("invalid config:\n  - {}", .0.join("\n  - "))]
    Invalid(Vec<String>),
}

fn default_port() -> u16 {
    8080
}

fn default_scan_hour() -> u32 {
    3
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BotConfig {
    /// Login of the bot account and the name used in `@<bot_name>:` commands.
    pub bot_name: String,
    #[serde(default = "default_port")]
    pub server_port: u16,
    /// UTC hour at which the daily scheduled tick fires.
    #[serde(default = "default_scan_hour")]
    pub scan_hour: u32,
    #[serde(default)]
    pub repos: BTreeMap<RepoRef, RepoConfig>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RepoConfig {
    pub mirror: MirrorTarget,
    pub merge_policy: MergePolicy,
    #[serde(default)]
    pub stale: StaleSettings,
    #[serde(default)]
    pub ci: CiSettings,
    #[serde(default)]
    pub backport: BackportSettings,
}

impl BotConfig {
    pub fn minimal(bot_name: &str, repo: RepoRef, merge_team: &str) -> Self {
        let repo_config = RepoConfig {
            mirror: MirrorTarget::new(repo.clone()),
            merge_policy: MergePolicy::new(merge_team),
            stale: StaleSettings::default(),
            ci: CiSettings::default(),
            backport: BackportSettings::default(),
        };
        BotConfig {
            bot_name: bot_name.to_string(),
            server_port: default_port(),
            scan_hour: default_scan_hour(),
            repos: BTreeMap::from([(repo, repo_config)]),
        }
    }

    pub fn from_toml(text: &str) -> Result<Self, ConfigError> {
        let config: BotConfig = toml::from_str(text).map_err(|e| ConfigError::Parse(e.to_string()))?;
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, ConfigError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::from_toml(&text)
    }

    pub fn render(&self) -> String {
        toml::to_string_pretty(self).expect("config is always representable as TOML")
    }

    pub fn repo(&self, repo: &RepoRef) -> Option<&RepoConfig> {
        self.repos.get(repo)
    }

    /// Origin repository whose PRs are mirrored into `ci_repo`.
    pub fn origin_of(&self, ci_repo: &RepoRef) -> Option<&RepoRef> {
        self.repos
            .iter()
            .find(|(_, rc)| &rc.mirror.ci_repo == ci_repo)
            .map(|(repo, _)| repo)
    }

    /// Collects every semantic problem instead of stopping at the first.
    pub fn validate(&self) -> Result<(), ConfigError> {
        let mut errors = Vec::new();
        if self.bot_name.is_empty() || self.bot_name.chars().any(char::is_whitespace) {
            errors.push(format!("bot_name must be a non-empty login, got {:?}", self.bot_name));
        }
        if self.scan_hour > 23 {
            errors.push(format!("scan_hour must be in 0..=23, got {}", self.scan_hour));
        }
        for (repo, rc) in &self.repos {
            let at = |field: &str| format!("repos.\"{repo}\".{field}");
            if rc.mirror.branch_prefix.is_empty() {
                errors.push(format!("{} must not be empty", at("mirror.branch_prefix")));
            }
            let policy = &rc.merge_policy;
            if policy.merge_team.is_empty() {
                errors.push(format!("{} must not be empty", at("merge_policy.merge_team")));
            }
            if policy.allowed_base_branches.iter().any(String::is_empty) {
                errors.push(format!("{} contains an empty branch name", at("merge_policy.allowed_base_branches")));
            }
            if rc.stale.trigger_label.is_empty() {
                errors.push(format!("{} must not be empty", at("stale.trigger_label")));
            }
            if rc.stale.warn_after_days == 0 {
                errors.push(format!("{} must be greater than 0", at("stale.warn_after_days")));
            }
            if rc.stale.close_after_warning_days == 0 {
                errors.push(format!("{} must be greater than 0", at("stale.close_after_warning_days")));
            }
            for (i, pattern) in rc.ci.error_patterns.iter().enumerate() {
                if let Err(e) = regex::Regex::new(&pattern.pattern) {
                    errors.push(format!("{}[{i}] does not compile: {e}", at("ci.error_patterns")));
                }
            }
            if rc.ci.reverse_dep_prefix.is_empty() {
                errors.push(format!("{} must not be empty", at("ci.reverse_dep_prefix")));
            }
            if rc.ci.always_report_jobs.iter().any(String::is_empty) {
                errors.push(format!("{} contains an empty job name", at("ci.always_report_jobs")));
            }
            for (job, glob) in &rc.ci.doc_artifacts {
                if job.is_empty() {
                    errors.push(format!("{} has an empty job name", at("ci.doc_artifacts")));
                }
                if let Err(e) = Glob::new(glob) {
                    errors.push(format!("{}.{job} is not a valid glob: {e}", at("ci.doc_artifacts")));
                }
            }
            for branch in &rc.backport.release_branches {
                if branch.is_empty() {
                    errors.push(format!("{} contains an empty branch name", at("backport.release_branches")));
                }
            }
            if matches!(&rc.backport.default_rejection_milestone, Some(m) if m.is_empty()) {
                errors.push(format!("{} must not be empty when set", at("backport.default_rejection_milestone")));
            }
        }
        if errors.is_empty() {
            Ok(())
        } else {
            Err(ConfigError::Invalid(errors))
        }
    }
}
