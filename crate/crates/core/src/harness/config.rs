use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nn::{Activation, TrainConfig};
use crate::oracle::dataset::hex_digest;
use crate::oracle::GeneratorConfig;
use crate::penet::CompositeLossConfig;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Method {
    #[serde(rename = "PE-NET")]
    PeNet,
    /// ES-NET left at random init (no theory pre-exploration).
    #[serde(rename = "PE-NET-WMA")]
    PeNetWma,
    /// SP-NET left at random init (no pretraining).
    #[serde(rename = "PE-NET-WSP")]
    PeNetWsp,
    /// PE-NET architecture trained on Dataset2 only.
    #[serde(rename = "BL-NET")]
    BlNet,
    /// One-hidden-layer regressor trained on Dataset2 only.
    #[serde(rename = "BP-NET")]
    BpNet,
}

impl Method {
    pub const ALL: [Method; 5] = [Method::PeNet, Method::PeNetWma, Method::PeNetWsp, Method::BlNet, Method::BpNet];

    pub fn name(self) -> &'static str {
        match self {
            Method::PeNet => "PE-NET",
            Method::PeNetWma => "PE-NET-WMA",
            Method::PeNetWsp => "PE-NET-WSP",
            Method::BlNet => "BL-NET",
            Method::BpNet => "BP-NET",
        }
    }

    pub fn parse(s: &str) -> Result<Method> {
        Method::ALL
            .into_iter()
            .find(|m| m.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::Config(format!("unknown method {s:?}")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PreExploreSettings {
    pub n_theory: usize,
    /// Fraction of theory points held out to measure the fit.
    pub holdout_frac: f64,
    pub train: TrainConfig,
}

impl Default for PreExploreSettings {
    fn default() -> Self {
        PreExploreSettings {
            n_theory: 500,
            holdout_frac: 0.2,
            train: TrainConfig::stage1_explore(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExperimentConfig {
    pub generator: GeneratorConfig,
    /// Seed for dataset generation (shared by every run).
    pub data_seed: u64,
    /// Run `i` uses `master_seed + i` for its splits and initializations.
    pub master_seed: u64,
    pub n_runs: usize,
    pub train_frac: f64,
    pub activation: Activation,
    pub pre_explore: PreExploreSettings,
    pub pretrain: TrainConfig,
    /// Stage-2 settings; also used for BL-NET and BP-NET.
    pub finetune: TrainConfig,
    pub loss: CompositeLossConfig,
    pub methods: Vec<Method>,
    /// Worker threads for independent runs; 0 uses every core. Not part of
    /// the hash or the report, since results do not depend on it.
    #[serde(skip_serializing)]
    pub jobs: usize,
    /// Read `dataset1.csv` / `dataset2.csv` from here instead of generating.
    pub dataset_dir: Option<PathBuf>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            generator: GeneratorConfig::default(),
            data_seed: 20_240_601,
            master_seed: 1,
            n_runs: 10,
            train_frac: 0.8,
            activation: Activation::Tanh,
            pre_explore: PreExploreSettings::default(),
            pretrain: TrainConfig::stage1_pretrain(),
            finetune: TrainConfig::stage2(),
            loss: CompositeLossConfig::default(),
            methods: Method::ALL.to_vec(),
            jobs: 1,
            dataset_dir: None,
        }
    }
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_runs == 0 {
            return Err(Error::Config("n_runs must be at least 1".into()));
        }
        if !(self.train_frac > 0.0 && self.train_frac < 1.0) {
            return Err(Error::Config(format!("train_frac must lie in (0, 1), got {}", self.train_frac)));
        }
        self.generator.validate()?;
        self.pre_explore.train.validate()?;
        self.pretrain.validate()?;
        self.finetune.validate()?;
        self.loss.validate()
    }

    pub fn load(path: &Path) -> Result<ExperimentConfig> {
        let cfg: ExperimentConfig = crate::penet::load_json(path)?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// SHA-256 of the canonical JSON form.
    pub fn hash(&self) -> String {
        hex_digest(serde_json::to_string(self).expect("config serializes").as_bytes())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_json_gives_defaults() {
        let cfg: ExperimentConfig = serde_json::from_str("{}").unwrap();
        assert_eq!(cfg, ExperimentConfig::default());
        assert_eq!(cfg.n_runs, 10);
        assert_eq!(cfg.finetune.minibatch_size, 2);
    }

    #[test]
    fn method_names_round_trip() {
        for m in Method::ALL {
            let json = serde_json::to_string(&m).unwrap();
            assert_eq!(json, format!("\"{}\"", m.name()));
            assert_eq!(Method::parse(m.name()).unwrap(), m);
        }
        assert!(Method::parse("GP").is_err());
    }

    #[test]
    fn zero_runs_rejected() {
        let cfg = ExperimentConfig {
            n_runs: 0,
            ..ExperimentConfig::default()
        };
        assert!(cfg.validate().is_err());
    }
}
