//! Experiment configuration: TOML parsing with strict unknown-key rejection,
//! documented defaults, validation, and a resolved echo that reproduces the
//! run when fed back in.

use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::federation::{AggregationScheme, AttackType, VerificationConfig};
use crate::dataset::PartitionMode;
use crate::quality::ReferenceMode;
use crate::seeding;

/// A per-client parameter: either one shared value or a uniform range
/// sampled per client from the section seed.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Spread {
    Fixed(f64),
    Range { min: f64, max: f64 },
}

impl Spread {
    pub fn sample(&self, rng: &mut impl Rng) -> f64 {
        match *self {
            Spread::Fixed(v) => v,
            Spread::Range { min, max } => {
                if max > min {
                    rng.gen_range(min..max)
                } else {
                    min
                }
            }
        }
    }

    fn validate(&self, name: &str) -> Result<()> {
        let ok = match *self {
            Spread::Fixed(v) => v > 0.0,
            Spread::Range { min, max } => min > 0.0 && max >= min,
        };
        if ok {
            Ok(())
        } else {
            Err(Error::Config(format!("{} must be strictly positive", name)))
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DataSource {
    Synthetic,
    Csv,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DatasetConfig {
    pub source: DataSource,
    /// CSV source only.
    pub csv_path: Option<String>,
    pub label_column: String,
    /// Synthetic source only: cluster spec.
    pub dimension: usize,
    pub num_classes: usize,
    pub samples_per_class: usize,
    pub cluster_spread: f64,
    /// Train share of the holdout split.
    pub holdout_fraction: f64,
    /// Cap on total samples after loading (0 = unlimited), for desk-scale
    /// subsampling of large CSV corpora.
    pub subsample_max: usize,
    pub seed: u64,
}

impl Default for DatasetConfig {
    fn default() -> Self {
        Self {
            source: DataSource::Synthetic,
            csv_path: None,
            label_column: "label".into(),
            dimension: 8,
            num_classes: 5,
            samples_per_class: 120,
            cluster_spread: 0.08,
            holdout_fraction: 0.8,
            subsample_max: 0,
            seed: 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PartitionConfig {
    pub num_clients: usize,
    pub mode: PartitionMode,
    pub max_classes_per_client: usize,
    pub seed: u64,
}

impl Default for PartitionConfig {
    fn default() -> Self {
        Self {
            num_clients: 8,
            mode: PartitionMode::NonIid,
            max_classes_per_client: 2,
            seed: 2,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct QualityConfig {
    /// Trapezoid grid size K.
    pub grid_points: usize,
    pub reference_mode: ReferenceMode,
    /// Uniform reference mode only: number of reference points.
    pub reference_size: usize,
    /// Number of quality types M; 0 means one type per client.
    pub num_types: usize,
    pub seed: u64,
}

impl Default for QualityConfig {
    fn default() -> Self {
        Self {
            grid_points: 64,
            reference_mode: ReferenceMode::Pooled,
            reference_size: 512,
            num_types: 0,
            seed: 3,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LearnerConfig {
    /// Empty means the default stack [d, ceil(d/2), ceil(d/4)].
    pub hidden_sizes: Vec<usize>,
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    /// Halve the learning rate every this many rounds (0 = constant).
    pub lr_decay_every_rounds: usize,
    /// Precision used to derive the model size in bits for the cost model.
    pub bits_per_value: usize,
    pub seed: u64,
}

impl Default for LearnerConfig {
    fn default() -> Self {
        Self {
            hidden_sizes: vec![],
            epochs: 10,
            batch_size: 32,
            learning_rate: 0.01,
            lr_decay_every_rounds: 0,
            bits_per_value: 32,
            seed: 4,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ChannelConfig {
    pub bandwidth_share: Spread,
    pub transmit_power: Spread,
    pub channel_gain_sq: Spread,
    pub noise_power: Spread,
    pub upload_power: Spread,
    pub seed: u64,
}

impl Default for ChannelConfig {
    fn default() -> Self {
        Self {
            bandwidth_share: Spread::Fixed(1e6),
            transmit_power: Spread::Fixed(0.5),
            channel_gain_sq: Spread::Fixed(1.0),
            noise_power: Spread::Fixed(1e-3),
            upload_power: Spread::Fixed(0.1),
            seed: 5,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ComputeConfig {
    pub cycles_per_sample: Spread,
    pub cpu_frequency: Spread,
    pub chip_coefficient: Spread,
    pub deploy_cost: f64,
    pub seed: u64,
}

impl Default for ComputeConfig {
    fn default() -> Self {
        Self {
            cycles_per_sample: Spread::Fixed(1e3),
            cpu_frequency: Spread::Fixed(1e9),
            chip_coefficient: Spread::Fixed(1e-28),
            deploy_cost: 0.1,
            seed: 7,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FederationSettings {
    pub rounds: usize,
    /// Total budget over all rounds.
    pub budget: f64,
    /// Per-round budget; unset means budget / rounds.
    pub budget_per_round: Option<f64>,
    pub scheme: AggregationScheme,
    pub malicious_fraction: f64,
    pub attack: AttackType,
    /// Round deadline T_max, seconds.
    pub deadline: f64,
    /// Lower bound on offered rewards (the IR floor applies on top).
    pub reward_floor: f64,
    pub reward_multiplier: f64,
    /// Exclude screened-out uploads from the reward softmax.
    pub strict_rewards: bool,
    /// Run a paired all-honest trajectory and report per-round deviation.
    pub shadow_run: bool,
    pub seed: u64,
}

impl Default for FederationSettings {
    fn default() -> Self {
        Self {
            rounds: 30,
            budget: 300.0,
            budget_per_round: None,
            scheme: AggregationScheme::UntrustBased,
            malicious_fraction: 0.0,
            attack: AttackType::RandomParams,
            deadline: 1e9,
            reward_floor: 0.0,
            reward_multiplier: 1.0,
            strict_rewards: false,
            shadow_run: false,
            seed: 6,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputConfig {
    pub dir: String,
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self { dir: "out".into() }
    }
}

/// Optional per-client overrides applied after the seeded defaults.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SpsOverride {
    pub id: usize,
    pub honest: Option<bool>,
    pub attack: Option<AttackType>,
    pub claimed_phi: Option<f64>,
    pub bandwidth_share: Option<f64>,
    pub transmit_power: Option<f64>,
    pub channel_gain_sq: Option<f64>,
    pub noise_power: Option<f64>,
    pub upload_power: Option<f64>,
    pub cycles_per_sample: Option<f64>,
    pub cpu_frequency: Option<f64>,
    pub chip_coefficient: Option<f64>,
    pub deploy_cost: Option<f64>,
}

/// Full experiment configuration with defaults for every field.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentConfig {
    pub dataset: DatasetConfig,
    pub partition: PartitionConfig,
    pub quality: QualityConfig,
    pub learner: LearnerConfig,
    pub channel: ChannelConfig,
    pub compute: ComputeConfig,
    pub federation: FederationSettings,
    pub verification: VerificationConfig,
    pub output: OutputConfig,
    pub sps: Vec<SpsOverride>,
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        let d = &self.dataset;
        match d.source {
            DataSource::Csv => {
                if d.csv_path.is_none() {
                    return Err(Error::Config("dataset.csv_path required for csv source".into()));
                }
            }
            DataSource::Synthetic => {
                if d.dimension == 0 || d.num_classes < 2 || d.samples_per_class == 0 {
                    return Err(Error::Config(
                        "dataset: synthetic spec needs dimension >= 1, num_classes >= 2, samples_per_class >= 1".into(),
                    ));
                }
            }
        }
        if !(d.holdout_fraction > 0.0 && d.holdout_fraction < 1.0) {
            return Err(Error::Config("dataset.holdout_fraction must lie in (0,1)".into()));
        }
        if self.partition.num_clients == 0 {
            return Err(Error::Config("partition.num_clients must be >= 1".into()));
        }
        if self.partition.mode == PartitionMode::NonIid && self.partition.max_classes_per_client == 0
        {
            return Err(Error::Config(
                "partition.max_classes_per_client must be >= 1 in non_iid mode".into(),
            ));
        }
        if self.quality.grid_points < 2 {
            return Err(Error::Config("quality.grid_points must be >= 2".into()));
        }
        if self.quality.reference_mode == ReferenceMode::UniformReference
            && self.quality.reference_size == 0
        {
            return Err(Error::Config("quality.reference_size must be >= 1".into()));
        }
        if self.learner.epochs == 0 || self.learner.batch_size == 0 {
            return Err(Error::Config("learner.epochs and learner.batch_size must be >= 1".into()));
        }
        if !(self.learner.learning_rate > 0.0) {
            return Err(Error::Config("learner.learning_rate must be > 0".into()));
        }
        if self.learner.bits_per_value == 0 {
            return Err(Error::Config("learner.bits_per_value must be >= 1".into()));
        }
        self.channel.bandwidth_share.validate("channel.bandwidth_share")?;
        self.channel.transmit_power.validate("channel.transmit_power")?;
        self.channel.channel_gain_sq.validate("channel.channel_gain_sq")?;
        self.channel.noise_power.validate("channel.noise_power")?;
        self.channel.upload_power.validate("channel.upload_power")?;
        self.compute.cycles_per_sample.validate("compute.cycles_per_sample")?;
        self.compute.cpu_frequency.validate("compute.cpu_frequency")?;
        self.compute.chip_coefficient.validate("compute.chip_coefficient")?;
        if self.compute.deploy_cost < 0.0 {
            return Err(Error::Config("compute.deploy_cost must be >= 0".into()));
        }
        let f = &self.federation;
        if !(0.0..=1.0).contains(&f.malicious_fraction) {
            return Err(Error::Config("federation.malicious_fraction must lie in [0,1]".into()));
        }
        if f.budget < 0.0 {
            return Err(Error::Config("federation.budget must be >= 0".into()));
        }
        if let Some(b) = f.budget_per_round {
            if b < 0.0 || b * f.rounds as f64 > f.budget + 1e-9 {
                return Err(Error::Config(
                    "federation.budget_per_round must be >= 0 and fit the total budget".into(),
                ));
            }
        }
        if !(f.deadline > 0.0) {
            return Err(Error::Config("federation.deadline must be > 0".into()));
        }
        if f.reward_floor < 0.0 || !(f.reward_multiplier > 0.0) {
            return Err(Error::Config(
                "federation.reward_floor must be >= 0 and reward_multiplier > 0".into(),
            ));
        }
        if let AttackType::GaussianPerturb(sigma) = f.attack {
            if sigma < 0.0 {
                return Err(Error::Config("federation.attack: sigma must be >= 0".into()));
            }
        }
        self.verification.validate()?;
        for o in &self.sps {
            if o.id >= self.partition.num_clients {
                return Err(Error::Config(format!(
                    "sps override id {} out of range for {} clients",
                    o.id, self.partition.num_clients
                )));
            }
        }
        Ok(())
    }

    /// Number of quality types: the configured value, or one per client.
    pub fn effective_num_types(&self) -> usize {
        if self.quality.num_types == 0 {
            self.partition.num_clients
        } else {
            self.quality.num_types
        }
    }

    /// Per-round budget under the configured policy.
    pub fn budget_per_round(&self) -> f64 {
        match self.federation.budget_per_round {
            Some(b) => b,
            None if self.federation.rounds > 0 => {
                self.federation.budget / self.federation.rounds as f64
            }
            None => 0.0,
        }
    }

    /// Replace every section seed with one derived from `master`, so a
    /// single CLI seed controls the whole run. Derived seeds are kept in
    /// the non-negative 63-bit range so the resolved config stays
    /// serializable as TOML integers.
    pub fn reseed(&mut self, master: u64) {
        let derive = |label: u64| seeding::mix(master, label, 0) & (i64::MAX as u64);
        self.dataset.seed = derive(20);
        self.partition.seed = derive(21);
        self.quality.seed = derive(22);
        self.learner.seed = derive(23);
        self.channel.seed = derive(24);
        self.federation.seed = derive(25);
        self.compute.seed = derive(26);
    }

    /// Serialize the fully resolved config (all defaults filled).
    pub fn resolved_toml(&self) -> Result<String> {
        toml::to_string_pretty(self).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn from_toml_str(text: &str) -> Result<Self> {
        let config: ExperimentConfig =
            toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        config.validate()?;
        Ok(config)
    }
}

/// Parse and validate an experiment config file.
pub fn parse_config(path: &Path) -> Result<ExperimentConfig> {
    let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.display().to_string(),
        source,
    })?;
    ExperimentConfig::from_toml_str(&text)
}

/// Sample per-client channel values from the channel section.
pub fn sample_channel(cfg: &ChannelConfig, client: usize, model_size: f64) -> crate::radio_cost::ChannelSpec {
    let mut rng = ChaCha8Rng::seed_from_u64(seeding::mix(cfg.seed, 30, client as u64));
    crate::radio_cost::ChannelSpec {
        bandwidth_share: cfg.bandwidth_share.sample(&mut rng),
        transmit_power: cfg.transmit_power.sample(&mut rng),
        channel_gain_sq: cfg.channel_gain_sq.sample(&mut rng),
        noise_power: cfg.noise_power.sample(&mut rng),
        upload_power: cfg.upload_power.sample(&mut rng),
        model_size,
    }
}

/// Sample per-client compute values from the compute section.
pub fn sample_compute(
    cfg: &ComputeConfig,
    client: usize,
    local_epochs: usize,
    sample_count: usize,
) -> crate::radio_cost::ComputeSpec {
    let mut rng = ChaCha8Rng::seed_from_u64(seeding::mix(cfg.seed, 31, client as u64));
    crate::radio_cost::ComputeSpec {
        cycles_per_sample: cfg.cycles_per_sample.sample(&mut rng),
        cpu_frequency: cfg.cpu_frequency.sample(&mut rng),
        chip_coefficient: cfg.chip_coefficient.sample(&mut rng),
        local_epochs,
        sample_count,
        deploy_cost: cfg.deploy_cost,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_config_fills_defaults() {
        let cfg = ExperimentConfig::from_toml_str(
            "[dataset]\nsource = \"synthetic\"\n[partition]\nnum_clients = 9\n",
        )
        .unwrap();
        assert_eq!(cfg.partition.num_clients, 9);
        assert_eq!(cfg.learner.epochs, 10);
        assert_eq!(cfg.learner.batch_size, 32);
        assert_eq!(cfg.quality.grid_points, 64);
    }

    #[test]
    fn unknown_key_is_rejected_with_path() {
        let err = ExperimentConfig::from_toml_str("[learner]\nepochz = 3\n").unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("epochz"), "message should name the key: {}", msg);
    }

    #[test]
    fn invariant_violation_is_rejected() {
        let err = ExperimentConfig::from_toml_str("[federation]\nmalicious_fraction = 1.5\n")
            .unwrap_err();
        assert!(err.to_string().contains("malicious_fraction"));
    }

    #[test]
    fn resolved_echo_round_trips() {
        let mut cfg = ExperimentConfig::default();
        cfg.federation.malicious_fraction = 0.25;
        cfg.channel.transmit_power = Spread::Range { min: 0.2, max: 0.8 };
        let echo = cfg.resolved_toml().unwrap();
        let back = ExperimentConfig::from_toml_str(&echo).unwrap();
        assert_eq!(cfg, back);
    }

    #[test]
    fn budget_policy() {
        let mut cfg = ExperimentConfig::default();
        cfg.federation.budget = 300.0;
        cfg.federation.rounds = 30;
        assert_eq!(cfg.budget_per_round(), 10.0);
        cfg.federation.budget_per_round = Some(5.0);
        assert_eq!(cfg.budget_per_round(), 5.0);
    }

    #[test]
    fn reseed_is_deterministic_and_changes_seeds() {
        let mut a = ExperimentConfig::default();
        let mut b = ExperimentConfig::default();
        a.reseed(99);
        b.reseed(99);
        assert_eq!(a, b);
        let mut c = ExperimentConfig::default();
        c.reseed(100);
        assert_ne!(a.learner.seed, c.learner.seed);
    }
}
