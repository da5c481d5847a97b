//! Experiment configuration (JSON).

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use stgia_core::privdef::{DefensePlan, ImportanceParams};
use stgia_core::stgia::AttackConfig;

use crate::CliError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum NetworkSource {
    Grid {
        rows: usize,
        cols: usize,
        spacing: f64,
    },
    /// Road network JSON: `{"nodes": [[x, y], …], "edges": [[a, b], …]}`.
    File { path: PathBuf },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum DataSource {
    /// Random walks on the network.
    Synthetic { users: usize, step_budget: f64 },
    /// Check-in CSV (`user_id,timestamp,lat,lon`), projected around `origin`.
    Csv {
        path: PathBuf,
        origin: (f64, f64),
        #[serde(default)]
        max_users: Option<usize>,
    },
    /// Trajectories as written by `gen-data`.
    Jsonl { path: PathBuf },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelConfig {
    #[serde(rename = "k")]
    pub window_len: usize,
    #[serde(rename = "H")]
    pub hidden_units: usize,
    /// The output cells are a `cell_cols × cell_rows` grid over the network's bounding box.
    pub cell_cols: usize,
    pub cell_rows: usize,
    /// Defaults to the bounding-box diagonal.
    pub coordinate_scale: Option<f64>,
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig {
            window_len: 6,
            hidden_units: 16,
            cell_cols: 5,
            cell_rows: 5,
            coordinate_scale: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainingConfig {
    #[serde(rename = "T")]
    pub rounds: usize,
    pub local_rate: f64,
    /// Trailing fraction of every trajectory's windows kept for evaluation.
    pub holdout_fraction: f64,
}

impl Default for TrainingConfig {
    fn default() -> Self {
        TrainingConfig {
            rounds: 20,
            local_rate: 2.0,
            holdout_fraction: 0.2,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mechanism {
    Dpsgd,
    Geoi,
    Geogi,
    PgemAdaptive,
}

impl Mechanism {
    pub fn name(self) -> &'static str {
        match self {
            Mechanism::Dpsgd => "dpsgd",
            Mechanism::Geoi => "geoi",
            Mechanism::Geogi => "geogi",
            Mechanism::PgemAdaptive => "pgem_adaptive",
        }
    }
}

/// Sweep of defenses over a common ε axis. The axis is interpreted per
/// mechanism: the per-round (ε, δ) of the Gaussian mechanism for dpsgd, ε
/// per kilometer for geoi and geogi, and the total budget for pgem_adaptive.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TradeoffConfig {
    pub mechanisms: Vec<Mechanism>,
    pub epsilons: Vec<f64>,
    /// Results are averaged over seeds `seed, seed + 1, …`.
    pub seeds: usize,
    pub delta: f64,
    pub clip: f64,
    pub domain_radius: f64,
    pub importance: ImportanceParams,
}

impl Default for TradeoffConfig {
    fn default() -> Self {
        TradeoffConfig {
            mechanisms: vec![
                Mechanism::Dpsgd,
                Mechanism::Geoi,
                Mechanism::Geogi,
                Mechanism::PgemAdaptive,
            ],
            epsilons: vec![1.0, 5.0, 10.0, 20.0, 50.0],
            seeds: 1,
            delta: 1e-5,
            clip: 1.0,
            domain_radius: 500.0,
            importance: ImportanceParams::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AuditTarget {
    Pgem,
    Geogi,
    Geoi,
}

impl AuditTarget {
    pub fn name(self) -> &'static str {
        match self {
            AuditTarget::Pgem => "pgem",
            AuditTarget::Geogi => "geogi",
            AuditTarget::Geoi => "geoi",
        }
    }
}

/// Ratio-bound audit on random networks. PGEM's ε is per domain diameter;
/// GeoGI and GeoI take ε per kilometer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AuditConfig {
    pub mechanisms: Vec<AuditTarget>,
    pub domain_size: usize,
    pub epsilons: Vec<f64>,
    pub seeds: usize,
}

impl Default for AuditConfig {
    fn default() -> Self {
        AuditConfig {
            mechanisms: vec![AuditTarget::Pgem, AuditTarget::Geogi, AuditTarget::Geoi],
            domain_size: 25,
            epsilons: vec![0.5, 1.0, 2.0],
            seeds: 20,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub seed: u64,
    pub out_dir: PathBuf,
    pub network: NetworkSource,
    pub data: DataSource,
    pub model: ModelConfig,
    pub training: TrainingConfig,
    /// `seed` inside this block is ignored; attacks use the run seed.
    pub attack: AttackConfig,
    pub defense: DefensePlan,
    pub tradeoff: TradeoffConfig,
    pub audit: AuditConfig,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            seed: 0,
            out_dir: PathBuf::from("out"),
            network: NetworkSource::Grid {
                rows: 10,
                cols: 10,
                spacing: 250.0,
            },
            data: DataSource::Synthetic {
                users: 20,
                step_budget: 300.0,
            },
            model: ModelConfig::default(),
            training: TrainingConfig::default(),
            attack: AttackConfig {
                attack_rate: 0.05,
                ..AttackConfig::default()
            },
            defense: DefensePlan::None,
            tradeoff: TradeoffConfig::default(),
            audit: AuditConfig::default(),
        }
    }
}

fn invalid(field: &str, msg: impl std::fmt::Display) -> CliError {
    CliError::Config(format!("{field}: {msg}"))
}

impl ExperimentConfig {
    /// Reads a config file; relative paths inside it resolve against the file's directory.
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        let mut cfg: ExperimentConfig = serde_json::from_str(&text)
            .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new("."));
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        if let NetworkSource::File { path } = &mut cfg.network {
            fix(path);
        }
        match &mut cfg.data {
            DataSource::Csv { path, .. } | DataSource::Jsonl { path } => fix(path),
            DataSource::Synthetic { .. } => {}
        }
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), CliError> {
        match &self.network {
            NetworkSource::Grid {
                rows,
                cols,
                spacing,
            } => {
                if *rows < 2 || *cols < 2 {
                    return Err(invalid(
                        "network.rows/cols",
                        "grid needs at least 2×2 nodes",
                    ));
                }
                if !(*spacing > 0.0) {
                    return Err(invalid("network.spacing", "must be positive"));
                }
            }
            NetworkSource::File { path } => {
                if !path.is_file() {
                    return Err(invalid(
                        "network.path",
                        format!("{} does not exist", path.display()),
                    ));
                }
            }
        }
        match &self.data {
            DataSource::Synthetic { users, step_budget } => {
                if *users == 0 {
                    return Err(invalid("data.users", "must be >= 1"));
                }
                if !(*step_budget > 0.0) {
                    return Err(invalid("data.step_budget", "must be positive"));
                }
            }
            DataSource::Csv { path, .. } | DataSource::Jsonl { path } => {
                if !path.is_file() {
                    return Err(invalid(
                        "data.path",
                        format!("{} does not exist", path.display()),
                    ));
                }
            }
        }
        let m = &self.model;
        if m.window_len < 1 {
            return Err(invalid("model.k", "must be >= 1"));
        }
        if m.hidden_units < 1 {
            return Err(invalid("model.H", "must be >= 1"));
        }
        if m.cell_cols < 1 || m.cell_rows < 1 || m.cell_cols * m.cell_rows < 2 {
            return Err(invalid(
                "model.cell_cols/cell_rows",
                "need at least 2 cells",
            ));
        }
        if let Some(s) = m.coordinate_scale {
            if !(s > 0.0) {
                return Err(invalid("model.coordinate_scale", "must be positive"));
            }
        }
        let t = &self.training;
        if t.rounds < 1 {
            return Err(invalid("training.T", "must be >= 1"));
        }
        if !(t.local_rate > 0.0) {
            return Err(invalid("training.local_rate", "must be positive"));
        }
        if !(t.holdout_fraction > 0.0 && t.holdout_fraction < 1.0) {
            return Err(invalid("training.holdout_fraction", "must be in (0, 1)"));
        }
        self.attack.validate().map_err(|e| invalid("attack", e))?;
        self.defense.validate().map_err(|e| invalid("defense", e))?;
        let tr = &self.tradeoff;
        if tr.epsilons.iter().any(|e| !(*e > 0.0)) {
            return Err(invalid("tradeoff.epsilons", "must all be positive"));
        }
        if tr.seeds < 1 {
            return Err(invalid("tradeoff.seeds", "must be >= 1"));
        }
        if !(tr.delta > 0.0 && tr.delta < 1.0) {
            return Err(invalid("tradeoff.delta", "must be in (0, 1)"));
        }
        if !(tr.clip > 0.0) {
            return Err(invalid("tradeoff.clip", "must be positive"));
        }
        if !(tr.domain_radius >= 0.0) {
            return Err(invalid("tradeoff.domain_radius", "must be >= 0"));
        }
        tr.importance
            .validate()
            .map_err(|e| invalid("tradeoff.importance", e))?;
        let a = &self.audit;
        if a.domain_size < 1 {
            return Err(invalid("audit.domain_size", "must be >= 1"));
        }
        if a.epsilons.iter().any(|e| !(*e > 0.0)) {
            return Err(invalid("audit.epsilons", "must all be positive"));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_round_trip_and_validate() {
        let cfg = ExperimentConfig::default();
        cfg.validate().unwrap();
        let text = serde_json::to_string_pretty(&cfg).unwrap();
        let back: ExperimentConfig = serde_json::from_str(&text).unwrap();
        assert_eq!(back, cfg);
    }

    #[test]
    fn partial_config_fills_defaults() {
        let cfg: ExperimentConfig = serde_json::from_str(
            r#"{"seed": 3, "training": {"T": 5}, "defense": {"mechanism": "geoi", "epsilon": 0.01}}"#,
        )
        .unwrap();
        assert_eq!(cfg.seed, 3);
        assert_eq!(cfg.training.rounds, 5);
        assert_eq!(cfg.training.local_rate, 2.0);
        cfg.validate().unwrap();
    }

    #[test]
    fn errors_name_the_field() {
        let mut cfg = ExperimentConfig::default();
        cfg.training.local_rate = 0.0;
        let msg = cfg.validate().unwrap_err().to_string();
        assert!(msg.contains("training.local_rate"), "{msg}");
        let bad: Result<ExperimentConfig, _> = serde_json::from_str(r#"{"trainign": {}}"#);
        assert!(bad.is_err());
    }
}
