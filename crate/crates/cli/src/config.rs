//! Experiment configuration: a TOML file, then command-line overrides.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use spikeguard::attack::{AttackConfig, ClipBound, FrameMask, NoiseKind};
use spikeguard::dataset::{Binning, SyntheticSpec};
use spikeguard::defense::{SearchGrid, ThreatModel};
use spikeguard::filter::FilterParams;
use spikeguard::seed;
use spikeguard::snn::{Architecture, NeuronParams, SurrogateConfig, TrainConfig};

use crate::error::CliError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub seed: u64,
    pub dataset: DatasetConfig,
    pub binning: Binning,
    pub network: NetworkConfig,
    pub train: TrainSection,
    pub attack: AttackSection,
    pub filter: FilterSection,
    pub search: SearchSection,
    pub noise: NoiseSection,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            seed: 1,
            dataset: DatasetConfig::default(),
            binning: Binning::default(),
            network: NetworkConfig::default(),
            train: TrainSection::default(),
            attack: AttackSection::default(),
            filter: FilterSection::default(),
            search: SearchSection::default(),
            noise: NoiseSection::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Source {
    Synthetic,
    Nmnist,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DatasetConfig {
    pub source: Source,
    /// N-MNIST root holding `Train/` and `Test/`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub path: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub train_subset: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub test_subset: Option<usize>,
    pub synthetic: SyntheticSpec,
}

impl Default for DatasetConfig {
    fn default() -> Self {
        Self {
            source: Source::Synthetic,
            path: None,
            train_subset: None,
            test_subset: None,
            synthetic: SyntheticSpec::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NetworkConfig {
    pub architecture: Architecture,
    pub threshold: f64,
    pub leak: f64,
    pub init_gain: f64,
}

impl Default for NetworkConfig {
    fn default() -> Self {
        let n = NeuronParams::default();
        Self {
            architecture: Architecture::default_mlp(),
            threshold: n.threshold,
            leak: n.leak,
            init_gain: 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainSection {
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub surrogate_slope: f64,
}

impl Default for TrainSection {
    fn default() -> Self {
        let t = TrainConfig::default();
        Self {
            epochs: t.epochs,
            batch_size: t.batch_size,
            learning_rate: t.learning_rate,
            surrogate_slope: t.surrogate.slope,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AttackSection {
    pub max_iterations: usize,
    pub step_size: f64,
    /// `all` or a comma-separated list of bin indices.
    pub mask: String,
    /// Fixed clip bound; the per-sample maximum count when absent.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub clip_max: Option<f64>,
    pub surrogate_slope: f64,
}

impl Default for AttackSection {
    fn default() -> Self {
        let a = AttackConfig::with_defaults(0);
        Self {
            max_iterations: a.max_iterations,
            step_size: a.step_size,
            mask: "all".into(),
            clip_max: None,
            surrogate_slope: a.surrogate.slope,
        }
    }
}

/// Filter used by `attack` for the filtered evaluation and the noise study.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FilterSection {
    pub s: u32,
    pub t_ms: f64,
}

impl Default for FilterSection {
    fn default() -> Self {
        Self { s: 1, t_ms: 5.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SearchSection {
    pub models: Vec<ThreatModel>,
    pub spatial: Vec<u32>,
    pub temporal_ms: Vec<f64>,
}

impl Default for SearchSection {
    fn default() -> Self {
        let g = SearchGrid::default();
        Self {
            models: vec![ThreatModel::A, ThreatModel::B, ThreatModel::C],
            spatial: g.spatial,
            temporal_ms: g.temporal_ms,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NoiseSection {
    pub kinds: Vec<NoiseKind>,
    pub magnitudes: Vec<f64>,
}

impl Default for NoiseSection {
    fn default() -> Self {
        Self {
            kinds: vec![NoiseKind::Uniform, NoiseKind::Normal],
            magnitudes: vec![0.0, 0.15, 0.25, 0.4, 0.55, 0.7, 0.85, 1.0],
        }
    }
}

/// Flag values that take precedence over the file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub data: Option<PathBuf>,
    pub epochs: Option<usize>,
    pub batch: Option<usize>,
    pub lr: Option<f64>,
    pub attack_iters: Option<usize>,
    pub attack_step: Option<f64>,
    pub mask: Option<String>,
    pub filter_s: Option<u32>,
    pub filter_t_ms: Option<f64>,
    pub noise: Option<NoiseKind>,
    pub noise_magnitude: Option<f64>,
}

impl ExperimentConfig {
    pub fn load(path: Option<&Path>) -> Result<Self, CliError> {
        let Some(path) = path else {
            return Ok(Self::default());
        };
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        toml::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
    }

    pub fn apply(&mut self, o: &Overrides) {
        if let Some(v) = o.seed {
            self.seed = v;
        }
        if let Some(p) = &o.data {
            self.dataset.source = Source::Nmnist;
            self.dataset.path = Some(p.clone());
        }
        if let Some(v) = o.epochs {
            self.train.epochs = v;
        }
        if let Some(v) = o.batch {
            self.train.batch_size = v;
        }
        if let Some(v) = o.lr {
            self.train.learning_rate = v;
        }
        if let Some(v) = o.attack_iters {
            self.attack.max_iterations = v;
        }
        if let Some(v) = o.attack_step {
            self.attack.step_size = v;
        }
        if let Some(v) = &o.mask {
            self.attack.mask = v.clone();
        }
        if let Some(v) = o.filter_s {
            self.filter.s = v;
            self.search.spatial = vec![v];
        }
        if let Some(v) = o.filter_t_ms {
            self.filter.t_ms = v;
            self.search.temporal_ms = vec![v];
        }
        if let Some(k) = o.noise {
            self.noise.kinds = vec![k];
        }
        if let Some(m) = o.noise_magnitude {
            self.noise.magnitudes = vec![m];
        }
    }

    /// Checks everything that can be checked before any data is loaded.
    pub fn validate(&self) -> Result<(), CliError> {
        if i64::try_from(self.seed).is_err() {
            return Err(CliError::Config(format!(
                "seed {} does not fit in 63 bits",
                self.seed
            )));
        }
        if self.dataset.source == Source::Nmnist && self.dataset.path.is_none() {
            return Err(CliError::Config(
                "N-MNIST source needs dataset.path or --data".into(),
            ));
        }
        if self.binning.num_bins == 0 || self.binning.bin_width_us == 0 {
            return Err(CliError::Config(
                "binning needs at least one bin of positive width".into(),
            ));
        }
        if self.train.epochs == 0 || self.train.batch_size == 0 {
            return Err(CliError::Config(
                "epochs and batch size must be at least 1".into(),
            ));
        }
        if !(self.train.learning_rate > 0.0 && self.train.learning_rate.is_finite()) {
            return Err(CliError::Config(format!(
                "learning rate must be positive, got {}",
                self.train.learning_rate
            )));
        }
        self.neuron().validate()?;
        self.train_config().surrogate.validate()?;
        self.attack_config()?.validate()?;
        self.filter_params()?;
        self.search_grid().validate()?;
        if let Some(m) = self
            .noise
            .magnitudes
            .iter()
            .find(|m| !(**m >= 0.0 && m.is_finite()))
        {
            return Err(CliError::Config(format!(
                "noise magnitude {m} must be >= 0"
            )));
        }
        Ok(())
    }

    pub fn neuron(&self) -> NeuronParams {
        NeuronParams {
            threshold: self.network.threshold,
            leak: self.network.leak,
        }
    }

    pub fn train_config(&self) -> TrainConfig {
        TrainConfig {
            epochs: self.train.epochs,
            batch_size: self.train.batch_size,
            learning_rate: self.train.learning_rate,
            seed: self.stage_seed("train"),
            surrogate: SurrogateConfig {
                slope: self.train.surrogate_slope,
            },
        }
    }

    pub fn attack_config(&self) -> Result<AttackConfig, CliError> {
        Ok(AttackConfig {
            mask: FrameMask::parse(&self.attack.mask, self.binning.num_bins)?,
            max_iterations: self.attack.max_iterations,
            step_size: self.attack.step_size,
            clip: self
                .attack
                .clip_max
                .map_or(ClipBound::SampleMax, ClipBound::Fixed),
            surrogate: SurrogateConfig {
                slope: self.attack.surrogate_slope,
            },
        })
    }

    pub fn filter_params(&self) -> Result<FilterParams, CliError> {
        Ok(FilterParams::new(self.filter.s, self.filter.t_ms)?)
    }

    pub fn search_grid(&self) -> SearchGrid {
        SearchGrid {
            spatial: self.search.spatial.clone(),
            temporal_ms: self.search.temporal_ms.clone(),
        }
    }

    /// Per-stage seed derived from the master seed and a stage tag, so each
    /// stage can be rerun on its own.
    pub fn stage_seed(&self, stage: &str) -> u64 {
        seed::derive(self.seed, stage)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes to TOML")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_survive_a_toml_round_trip() {
        let c = ExperimentConfig::default();
        let back: ExperimentConfig = toml::from_str(&c.to_toml()).unwrap();
        assert_eq!(back, c);
        c.validate().unwrap();
    }

    #[test]
    fn partial_file_keeps_defaults() {
        let c: ExperimentConfig = toml::from_str("seed = 9\n[train]\nepochs = 2\n").unwrap();
        assert_eq!(c.seed, 9);
        assert_eq!(c.train.epochs, 2);
        assert_eq!(c.train.batch_size, 4);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        assert!(toml::from_str::<ExperimentConfig>("[train]\nepoch = 2\n").is_err());
    }

    #[test]
    fn filter_flags_pin_the_search_grid() {
        let mut c = ExperimentConfig::default();
        c.apply(&Overrides {
            filter_s: Some(2),
            filter_t_ms: Some(20.0),
            ..Overrides::default()
        });
        assert_eq!(c.search.spatial, vec![2]);
        assert_eq!(c.search.temporal_ms, vec![20.0]);
        assert_eq!(
            c.filter_params().unwrap(),
            FilterParams { s: 2, t_ms: 20.0 }
        );
    }

    #[test]
    fn bad_mask_is_a_config_error() {
        let mut c = ExperimentConfig::default();
        c.attack.mask = "0,99".into();
        assert_eq!(c.validate().unwrap_err().exit_code(), 1);
    }
}
