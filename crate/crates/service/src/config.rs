use std::net::{IpAddr, Ipv4Addr, SocketAddr};
use std::path::{Path, PathBuf};

use audit_core::learners::{ModelKind, Severity};
use serde::{Deserialize, Serialize};

use crate::ServiceError;

/// Service settings, read from TOML (or JSON when the file ends in `.json`).
/// Relative paths are resolved against the config file's directory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Config {
    pub bind: IpAddr,
    pub port: u16,
    pub corpus: PathBuf,
    /// Serving model; the service starts without a ranking when absent.
    pub model: PathBuf,
    /// Directory holding the decision log and snapshot.
    pub store: PathBuf,
    /// Decisions recorded since the last training needed before a retrain.
    pub retrain_min_decisions: usize,
    pub retrain_folds: usize,
    pub retrain_seed: u64,
    /// Model kind for retraining when no model is loaded yet.
    pub retrain_kind: ModelKind,
    pub severity: Severity,
    /// Optional `channel_id,count` CSV of known disturbing-video counts.
    pub disturbing_counts: Option<PathBuf>,
    /// Write a snapshot after this many logged decisions.
    pub snapshot_every: usize,
    /// When set, every /v1 request needs `Authorization: Bearer <token>`.
    pub token: Option<String>,
}

impl Default for Config {
    fn default() -> Self {
        Config {
            bind: IpAddr::V4(Ipv4Addr::LOCALHOST),
            port: 8080,
            corpus: "corpus.jsonl".into(),
            model: "model.json".into(),
            store: "decisions".into(),
            retrain_min_decisions: 1,
            retrain_folds: 10,
            retrain_seed: 7,
            retrain_kind: ModelKind::RandomForest,
            severity: Severity::Prob,
            disturbing_counts: None,
            snapshot_every: 100,
            token: None,
        }
    }
}

impl Config {
    pub fn load(path: &Path) -> Result<Self, ServiceError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| ServiceError::Config(format!("{}: {e}", path.display())))?;
        let mut cfg: Config = if path.extension().is_some_and(|e| e == "json") {
            serde_json::from_str(&text).map_err(|e| ServiceError::Config(e.to_string()))?
        } else {
            toml::from_str(&text).map_err(|e| ServiceError::Config(e.to_string()))?
        };
        if let Some(dir) = path.parent() {
            cfg.resolve(dir);
        }
        cfg.validate()?;
        Ok(cfg)
    }

    fn resolve(&mut self, dir: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = dir.join(&*p);
            }
        };
        fix(&mut self.corpus);
        fix(&mut self.model);
        fix(&mut self.store);
        if let Some(p) = &mut self.disturbing_counts {
            fix(p);
        }
    }

    pub fn validate(&self) -> Result<(), ServiceError> {
        if self.retrain_folds < 2 {
            return Err(ServiceError::Config("retrain_folds must be at least 2".into()));
        }
        if self.snapshot_every == 0 {
            return Err(ServiceError::Config("snapshot_every must be positive".into()));
        }
        Ok(())
    }

    pub fn addr(&self) -> SocketAddr {
        SocketAddr::new(self.bind, self.port)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn toml_with_relative_paths() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("audit.toml");
        std::fs::write(
            &path,
            "port = 9000\ncorpus = \"data/c.jsonl\"\nretrain_kind = \"logistic_regression\"\nseverity = \"prob_times_count\"\n",
        )
        .unwrap();
        let cfg = Config::load(&path).unwrap();
        assert_eq!(cfg.port, 9000);
        assert_eq!(cfg.corpus, dir.path().join("data/c.jsonl"));
        assert_eq!(cfg.model, dir.path().join("model.json"));
        assert_eq!(cfg.retrain_kind, ModelKind::LogisticRegression);
        assert_eq!(cfg.severity, Severity::ProbTimesCount);
    }

    #[test]
    fn unknown_keys_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("audit.toml");
        std::fs::write(&path, "prot = 1\n").unwrap();
        assert!(Config::load(&path).is_err());
    }
}
