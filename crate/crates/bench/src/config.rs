//! Experiment configuration, read from TOML.
//!
//! ```toml
//! tm_list_ns = [800.0, 1600.0, 3200.0, 6400.0]
//! methods = ["gmm", "pretrann"]
//! repeats = 5
//! shots_per_state = 2000
//! states = [0, 1]
//!
//! [sim]
//! noise_sigma = 3.0
//!
//! [train]
//! batch_size = 32
//! ```

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use qubit_readout::classifiers::GmmConfig;
use qubit_readout::nn::{MonitorSource, TrainConfig};
use qubit_readout::sim::SimConfig;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{BenchError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Gmm,
    Ffnn,
    Pretrann,
}

impl Method {
    pub const ALL: [Method; 3] = [Method::Gmm, Method::Ffnn, Method::Pretrann];

    pub fn name(self) -> &'static str {
        match self {
            Method::Gmm => "gmm",
            Method::Ffnn => "ffnn",
            Method::Pretrann => "pretrann",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Method {
    type Err = BenchError;

    fn from_str(s: &str) -> Result<Self> {
        Method::ALL
            .into_iter()
            .find(|m| m.name() == s.trim().to_ascii_lowercase())
            .ok_or_else(|| BenchError::Usage(format!("unknown method {s:?} (expected gmm, ffnn or pretrann)")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub master_seed: u64,
    pub tm_list_ns: Vec<f64>,
    pub methods: Vec<Method>,
    pub repeats: usize,
    /// Fraction of each dataset used for training.
    pub split_fraction: f64,
    pub shots_per_state: usize,
    pub states: Vec<usize>,
    pub out_dir: PathBuf,
    /// Hann smoothing window in slices (clamped to the trajectory length).
    pub smoothing_window: usize,
    /// Simulate new shots for every repeat instead of resplitting one dataset.
    pub fresh_data: bool,
    pub save_raw: bool,
    pub save_models: bool,
    /// Batch sizes for the inference timing columns.
    pub timing_batches: Vec<usize>,
    pub latent_fractions: Vec<f64>,
    pub latent_tm_ns: f64,
    pub dataset_sizes: Vec<usize>,
    pub dataset_tm_ns: f64,
    pub sim: SimConfig,
    pub train: TrainConfig,
    pub monitor: MonitorSource,
    pub gmm: GmmConfig,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            master_seed: SimConfig::default().master_seed,
            tm_list_ns: (1..=10).map(|k| 800.0 * k as f64).collect(),
            methods: Method::ALL.to_vec(),
            repeats: 10,
            split_fraction: 0.75,
            shots_per_state: 8000,
            states: vec![0, 1],
            out_dir: PathBuf::from("out"),
            smoothing_window: 50,
            fresh_data: false,
            save_raw: true,
            save_models: false,
            timing_batches: vec![1, 100, 10_000],
            latent_fractions: vec![1.0, 1.0 / 1.3, 0.5, 0.25, 1.0 / 6.0, 0.125, 0.1],
            latent_tm_ns: 2400.0,
            dataset_sizes: vec![3000, 6000, 12_000, 24_000, 48_000, 60_000],
            dataset_tm_ns: 2400.0,
            sim: SimConfig::default(),
            train: TrainConfig::default(),
            monitor: MonitorSource::default(),
            gmm: GmmConfig::default(),
        }
    }
}

impl ExperimentConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: ExperimentConfig =
            toml::from_str(text).map_err(|e| BenchError::Usage(format!("config: {}", e.message())))?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(BenchError::io(path))?;
        Self::from_toml_str(&text)
    }

    /// Simulator configuration with the experiment's master seed.
    pub fn sim_config(&self) -> SimConfig {
        SimConfig {
            master_seed: self.master_seed,
            ..self.sim.clone()
        }
    }

    pub fn max_tm_ns(&self) -> f64 {
        self.tm_list_ns.iter().copied().fold(0.0, f64::max)
    }

    pub fn validate(&self) -> Result<()> {
        let usage = |m: String| Err(BenchError::Usage(m));
        self.sim_config().validate()?;
        if self.tm_list_ns.is_empty() {
            return usage("tm_list_ns is empty".into());
        }
        for &tm in self.tm_list_ns.iter().chain([&self.latent_tm_ns, &self.dataset_tm_ns]) {
            let slices = tm / self.sim.slice_ns;
            if tm.is_nan() || tm <= 0.0 || (slices - slices.round()).abs() > 1e-9 {
                return usage(format!("T_m = {tm} ns is not a positive multiple of {} ns", self.sim.slice_ns));
            }
        }
        if self.methods.is_empty() {
            return usage("no methods selected".into());
        }
        if self.repeats == 0 {
            return usage("repeats must be >= 1".into());
        }
        if !(self.split_fraction > 0.0 && self.split_fraction < 1.0) {
            return usage(format!("split_fraction {} not in (0, 1)", self.split_fraction));
        }
        if self.states.len() < 2 {
            return usage("need at least two states".into());
        }
        let mut sorted = self.states.clone();
        sorted.sort_unstable();
        sorted.dedup();
        if sorted.len() != self.states.len() || sorted != (0..sorted.len()).collect::<Vec<_>>() {
            return usage(format!("states must be 0..n without repeats, got {:?}", self.states));
        }
        if sorted.len() > qubit_readout::sim::MAX_STATES {
            return usage(format!("at most {} states", qubit_readout::sim::MAX_STATES));
        }
        if self.shots_per_state < 4 {
            return usage("shots_per_state must be >= 4".into());
        }
        if self.smoothing_window == 0 {
            return usage("smoothing_window must be >= 1".into());
        }
        if self.timing_batches.contains(&0) {
            return usage("timing batch sizes must be >= 1".into());
        }
        if self.latent_fractions.iter().any(|f| !(*f > 0.0 && *f <= 1.0)) {
            return usage("latent fractions must lie in (0, 1]".into());
        }
        if self.dataset_sizes.iter().any(|&s| s < self.states.len()) {
            return usage("dataset sizes must be at least the number of states".into());
        }
        Ok(())
    }

    pub fn n_states(&self) -> usize {
        self.states.len()
    }

    /// Short hash of everything that influences results (not `out_dir`).
    pub fn config_hash(&self) -> String {
        let canonical = ExperimentConfig {
            out_dir: PathBuf::new(),
            save_raw: false,
            save_models: false,
            ..self.clone()
        };
        let text = toml::to_string(&canonical).expect("config serializes");
        let digest = Sha256::digest(text.as_bytes());
        digest.iter().take(8).map(|b| format!("{b:02x}")).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_are_valid() {
        let cfg = ExperimentConfig::default();
        cfg.validate().unwrap();
        assert_eq!(cfg.tm_list_ns.len(), 10);
        assert_eq!(cfg.tm_list_ns[9], 8000.0);
        assert_eq!(cfg.latent_fractions.len(), 7);
    }

    #[test]
    fn parses_partial_toml() {
        let cfg = ExperimentConfig::from_toml_str(
            "repeats = 3\nmethods = [\"gmm\"]\n[sim]\nnoise_sigma = 2.0\n[train]\npatience = 3\n",
        )
        .unwrap();
        assert_eq!(cfg.repeats, 3);
        assert_eq!(cfg.methods, vec![Method::Gmm]);
        assert_eq!(cfg.sim.noise_sigma, 2.0);
        assert_eq!(cfg.train.patience, 3);
        assert!(ExperimentConfig::from_toml_str("bogus = 1").is_err());
    }

    #[test]
    fn rejects_off_grid_windows() {
        let cfg = ExperimentConfig {
            tm_list_ns: vec![810.0],
            ..ExperimentConfig::default()
        };
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn hash_ignores_output_location() {
        let a = ExperimentConfig::default();
        let b = ExperimentConfig {
            out_dir: "elsewhere".into(),
            ..a.clone()
        };
        assert_eq!(a.config_hash(), b.config_hash());
        let c = ExperimentConfig { repeats: 2, ..a.clone() };
        assert_ne!(a.config_hash(), c.config_hash());
    }

    #[test]
    fn method_names_round_trip() {
        for m in Method::ALL {
            assert_eq!(m.name().parse::<Method>().unwrap(), m);
        }
        assert!("svm".parse::<Method>().is_err());
    }
}
