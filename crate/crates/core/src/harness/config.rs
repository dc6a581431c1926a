use std::path::{Path, PathBuf};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::extraction::MergePolicy;
use crate::languages::LanguageId;
use crate::rnn::{AdamWConfig, TrainConfig};

/// Environment variable overriding [`ExperimentConfig::seed`].
pub const SEED_ENV: &str = "STATEMERGE_SEED";
/// Environment variable overriding [`ExperimentConfig::threads`].
pub const THREADS_ENV: &str = "STATEMERGE_THREADS";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainingSetup {
    pub embed_dim: usize,
    pub hidden_dim: usize,
    pub train_count: usize,
    pub train_length: usize,
    pub dev_count: usize,
    pub dev_length: usize,
    pub epochs: usize,
    pub batch_size: usize,
    pub optimizer: AdamWConfig,
}

impl TrainingSetup {
    pub fn train_config(&self) -> TrainConfig {
        TrainConfig {
            epochs: self.epochs,
            batch_size: self.batch_size,
            optimizer: self.optimizer,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExtractionSetup {
    /// Similarity tolerance: states merge when `cos > 1 − κ`.
    pub kappa: f64,
    /// `1 − κ`, written out so the convention is explicit in every config.
    #[serde(default)]
    pub cosine_threshold: Option<f64>,
    pub data_count: usize,
    pub string_length: usize,
    pub eval_count: usize,
    pub eval_max_length: usize,
    pub eval_seed: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSetup {
    pub data_counts: Vec<usize>,
    pub data_string_length: usize,
    pub kappa_language: u8,
    pub kappas: Vec<f64>,
    /// Checkpoint epochs for the size-per-epoch sweep; empty means all.
    pub epochs: Vec<usize>,
    pub early_epoch: usize,
    pub late_epoch: usize,
    pub epoch_data_counts: Vec<usize>,
    /// Data seeds used by the epoch sweep.
    pub epoch_seeds: Vec<u64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BaselineSetup {
    pub k: usize,
}

/// Everything a run depends on. A config file alone reproduces a run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub languages: Vec<u8>,
    /// Seeds model initialization, training data and minibatch order.
    pub seed: u64,
    /// Seeds for sampling the extraction strings, one run per seed.
    pub data_seeds: Vec<u64>,
    pub training: TrainingSetup,
    pub extraction: ExtractionSetup,
    pub sweeps: SweepSetup,
    pub baseline: BaselineSetup,
    pub out_dir: PathBuf,
    /// Worker threads; 0 means one per available core.
    pub threads: usize,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Preset {
    /// 20,000 strings of length 50, 10 epochs.
    Scaled,
    /// 100,000 strings of length 50, 22 epochs.
    Long,
    /// 100,000 strings of length 100, 22 epochs.
    Full,
}

impl std::str::FromStr for Preset {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "scaled" => Ok(Preset::Scaled),
            "long" => Ok(Preset::Long),
            "full" => Ok(Preset::Full),
            _ => Err(Error::InvalidArgument(format!(
                "unknown preset {s:?} (expected scaled, long or full)"
            ))),
        }
    }
}

impl ExperimentConfig {
    pub fn preset(preset: Preset) -> Self {
        let (train_count, train_length, epochs) = match preset {
            Preset::Scaled => (20_000, 50, 10),
            Preset::Long => (100_000, 50, 22),
            Preset::Full => (100_000, 100, 22),
        };
        let mut config = ExperimentConfig {
            languages: (1..=7).collect(),
            seed: 0,
            data_seeds: (0..5).collect(),
            training: TrainingSetup {
                embed_dim: 10,
                hidden_dim: 100,
                train_count,
                train_length,
                dev_count: 1000,
                dev_length: 2 * train_length,
                epochs,
                batch_size: 64,
                optimizer: AdamWConfig::default(),
            },
            extraction: ExtractionSetup {
                kappa: 0.01,
                cosine_threshold: None,
                data_count: 300,
                string_length: 10,
                eval_count: 1000,
                eval_max_length: 50,
                eval_seed: 1000,
            },
            sweeps: SweepSetup {
                data_counts: vec![
                    5, 10, 15, 20, 25, 30, 40, 50, 75, 100, 135, 150, 200, 250, 300,
                ],
                data_string_length: 15,
                kappa_language: 2,
                kappas: vec![0.5, 0.4, 0.01],
                epochs: Vec::new(),
                early_epoch: 2,
                late_epoch: epochs.min(20),
                epoch_data_counts: vec![5, 10, 15, 20, 25, 30, 40, 50, 75, 100, 150, 200, 300],
                epoch_seeds: (0..3).collect(),
            },
            baseline: BaselineSetup { k: 20 },
            out_dir: PathBuf::from("statemerge-out"),
            threads: 0,
        };
        config.resolve().expect("presets are valid");
        config
    }

    pub fn load(path: &Path) -> Result<Self> {
        let mut config: ExperimentConfig = serde_json::from_str(&std::fs::read_to_string(path)?)?;
        config.resolve()?;
        Ok(config)
    }

    /// Validates ranges and fills in derived fields.
    pub fn resolve(&mut self) -> Result<()> {
        let policy = MergePolicy::new(self.extraction.kappa)?;
        match self.extraction.cosine_threshold {
            Some(t) if (t - policy.threshold()).abs() > 1e-12 => {
                return Err(Error::InvalidArgument(format!(
                    "cosine_threshold {t} disagrees with kappa {} (expected {})",
                    self.extraction.kappa,
                    policy.threshold()
                )))
            }
            _ => self.extraction.cosine_threshold = Some(policy.threshold()),
        }
        if self.languages.is_empty() {
            return Err(Error::InvalidArgument("no languages configured".into()));
        }
        for &l in self.languages.iter().chain([&self.sweeps.kappa_language]) {
            LanguageId::new(l)?;
        }
        for &k in &self.sweeps.kappas {
            MergePolicy::new(k)?;
        }
        let t = &self.training;
        if t.embed_dim == 0 || t.hidden_dim == 0 || t.epochs == 0 || t.batch_size == 0 {
            return Err(Error::InvalidArgument(
                "training dimensions, epochs and batch size must be positive".into(),
            ));
        }
        if t.train_count == 0 || t.dev_count == 0 {
            return Err(Error::InvalidArgument(
                "training and dev sets must be nonempty".into(),
            ));
        }
        if self.extraction.data_count == 0 || self.extraction.eval_count == 0 {
            return Err(Error::InvalidArgument(
                "extraction and eval sets must be nonempty".into(),
            ));
        }
        if self.data_seeds.is_empty() {
            return Err(Error::InvalidArgument("no data seeds configured".into()));
        }
        if self.baseline.k == 0 {
            return Err(Error::InvalidArgument("k must be positive".into()));
        }
        Ok(())
    }

    /// Applies `STATEMERGE_SEED` and `STATEMERGE_THREADS` when set.
    pub fn apply_env(&mut self) -> Result<()> {
        if let Ok(v) = std::env::var(SEED_ENV) {
            self.seed = v.parse().map_err(|_| {
                Error::InvalidArgument(format!("{SEED_ENV}={v:?} is not an integer"))
            })?;
        }
        if let Ok(v) = std::env::var(THREADS_ENV) {
            self.threads = v.parse().map_err(|_| {
                Error::InvalidArgument(format!("{THREADS_ENV}={v:?} is not an integer"))
            })?;
        }
        Ok(())
    }

    pub fn policy(&self) -> MergePolicy {
        MergePolicy::new(self.extraction.kappa).expect("validated")
    }

    pub fn language_ids(&self) -> Vec<LanguageId> {
        self.languages
            .iter()
            .map(|&l| LanguageId::new(l).expect("validated"))
            .collect()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    /// Writes the resolved config as `config.json` inside `dir`.
    pub fn save_in(&self, dir: &Path) -> Result<PathBuf> {
        std::fs::create_dir_all(dir)?;
        let path = dir.join("config.json");
        std::fs::write(&path, self.to_json())?;
        Ok(path)
    }
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig::preset(Preset::Scaled)
    }
}

/// Random stream purposes.
#[derive(Clone, Copy, Debug)]
#[repr(u64)]
pub enum Stream {
    TrainData = 1,
    DevData = 2,
    Init = 3,
    Shuffle = 4,
    Extraction = 5,
    Eval = 6,
    KMeans = 7,
}

fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Independent generator for one purpose of one job.
pub fn rng_for(seed: u64, stream: Stream, parts: &[u64]) -> ChaCha8Rng {
    let mut h = splitmix(seed ^ splitmix(stream as u64));
    for &p in parts {
        h = splitmix(h ^ p);
    }
    ChaCha8Rng::seed_from_u64(h)
}
