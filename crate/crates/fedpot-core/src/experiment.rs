//! Config-driven experiment assembly and the outer round loop.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::config::{sample_channel, sample_compute, DataSource, ExperimentConfig};
use crate::dataset::{
    generate_synthetic, holdout_split, load_csv, normalize_minmax, partition, LabeledDataset,
    PartitionPlan, SyntheticSpec,
};
use crate::error::{Error, Result};
use crate::federation::{
    profile_costs, AttackType, FederationRun, RoundReport, SpsProfile,
};
use crate::learner::{evaluate, init_params, EvalMetrics, MlpArchitecture};
use crate::quality::{assign_type, uniform_reference, vdd_quality, ReferenceMode};
use crate::seeding;

/// Final aggregates of one experiment.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Summary {
    pub rounds: usize,
    pub final_metrics: EvalMetrics,
    pub final_fairness: Option<f64>,
    pub total_spent: f64,
    pub budget_total: f64,
    pub total_tpr_utility: f64,
}

/// Round reports plus the summary.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExperimentOutcome {
    pub reports: Vec<RoundReport>,
    pub summary: Summary,
}

fn load_source(config: &ExperimentConfig) -> Result<LabeledDataset> {
    let d = &config.dataset;
    let raw = match d.source {
        DataSource::Synthetic => generate_synthetic(&SyntheticSpec {
            dimension: d.dimension,
            num_classes: d.num_classes,
            samples_per_class: d.samples_per_class,
            cluster_spread: d.cluster_spread,
            seed: d.seed,
        })?,
        DataSource::Csv => {
            let path = d
                .csv_path
                .as_ref()
                .ok_or_else(|| Error::Config("dataset.csv_path required".into()))?;
            load_csv(std::path::Path::new(path), &d.label_column)?
        }
    };
    Ok(if d.subsample_max > 0 {
        raw.subsample(d.subsample_max, d.seed)
    } else {
        raw
    })
}

/// Assemble a run from the config. `force_honest` produces the paired
/// all-honest variant that shares every seed with the main run.
pub fn build_run(config: &ExperimentConfig, force_honest: bool) -> Result<FederationRun> {
    config.validate()?;

    let raw = load_source(config)?;
    let (train_raw, test_raw) =
        holdout_split(&raw, config.dataset.holdout_fraction, config.dataset.seed)?;
    let (train, scaler) = normalize_minmax(&train_raw)?;
    let test = scaler.apply(&test_raw)?;

    let plan = PartitionPlan {
        num_clients: config.partition.num_clients,
        mode: config.partition.mode,
        max_classes_per_client: config.partition.max_classes_per_client,
        seed: config.partition.seed,
    };
    let locals = partition(&train, &plan)?;

    let arch = MlpArchitecture {
        input_dim: train.dimension(),
        hidden_sizes: if config.learner.hidden_sizes.is_empty() {
            MlpArchitecture::default_hidden(train.dimension())
        } else {
            config.learner.hidden_sizes.clone()
        },
        num_classes: train.num_classes(),
    };
    let global = init_params(&arch, config.learner.seed)?;
    let model_size = global.size_bits(config.learner.bits_per_value);

    let reference = match config.quality.reference_mode {
        ReferenceMode::Pooled => train.clone(),
        ReferenceMode::UniformReference => uniform_reference(
            train.dimension(),
            config.quality.reference_size,
            config.quality.seed,
        )?,
    };
    let num_types = config.effective_num_types();

    // Malicious set: seeded shuffle, round(fraction * M) clients.
    let m = config.partition.num_clients;
    let mut ids: Vec<usize> = (0..m).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seeding::mix(config.federation.seed, 7, 0));
    ids.shuffle(&mut rng);
    let n_malicious = if force_honest {
        0
    } else {
        (config.federation.malicious_fraction * m as f64).round() as usize
    };
    let malicious: Vec<usize> = ids.into_iter().take(n_malicious).collect();

    let mut profiles = Vec::with_capacity(m);
    for (id, local) in locals.into_iter().enumerate() {
        let true_phi = if local.is_empty() {
            0.0
        } else {
            vdd_quality(
                &local,
                &reference,
                config.quality.grid_points,
                config.quality.reference_mode,
            )?
            .phi
        };
        let honest = !malicious.contains(&id);
        let attack = if honest {
            AttackType::None
        } else {
            config.federation.attack
        };
        // Adversaries claim the top quality bracket.
        let claimed_phi = if honest {
            true_phi
        } else {
            let mut prng =
                ChaCha8Rng::seed_from_u64(seeding::mix(config.federation.seed, 8, id as u64));
            let lo = (num_types as f64 - 1.0) / num_types as f64;
            lo + prng.gen::<f64>() * (1.0 - lo)
        };

        let channel = sample_channel(&config.channel, id, model_size);
        let compute = sample_compute(&config.compute, id, config.learner.epochs, local.len());
        let mut profile = SpsProfile {
            id,
            channel,
            compute,
            local_data: local,
            honest,
            claimed_phi,
            attack,
        };

        if !force_honest {
            if let Some(o) = config.sps.iter().find(|o| o.id == id) {
                if let Some(h) = o.honest {
                    profile.honest = h;
                    if h {
                        profile.attack = AttackType::None;
                        profile.claimed_phi = true_phi;
                    }
                }
                if let Some(a) = o.attack {
                    profile.attack = a;
                    profile.honest = a == AttackType::None;
                    if profile.honest {
                        profile.claimed_phi = true_phi;
                    }
                }
                if let Some(p) = o.claimed_phi {
                    if !profile.honest {
                        profile.claimed_phi = p.clamp(0.0, 1.0);
                    }
                }
                if let Some(v) = o.bandwidth_share {
                    profile.channel.bandwidth_share = v;
                }
                if let Some(v) = o.transmit_power {
                    profile.channel.transmit_power = v;
                }
                if let Some(v) = o.channel_gain_sq {
                    profile.channel.channel_gain_sq = v;
                }
                if let Some(v) = o.noise_power {
                    profile.channel.noise_power = v;
                }
                if let Some(v) = o.upload_power {
                    profile.channel.upload_power = v;
                }
                if let Some(v) = o.cycles_per_sample {
                    profile.compute.cycles_per_sample = v;
                }
                if let Some(v) = o.cpu_frequency {
                    profile.compute.cpu_frequency = v;
                }
                if let Some(v) = o.chip_coefficient {
                    profile.compute.chip_coefficient = v;
                }
                if let Some(v) = o.deploy_cost {
                    profile.compute.deploy_cost = v;
                }
            }
        }
        profiles.push(profile);
    }

    let costs = profile_costs(&profiles)?;
    let thetas = profiles
        .iter()
        .map(|p| assign_type(p.claimed_phi, num_types).map(|t| t as f64))
        .collect::<Result<Vec<_>>>()?;
    let positive_labels: Vec<usize> = (1..train.num_classes()).collect();

    Ok(FederationRun {
        global,
        profiles,
        costs,
        thetas,
        test,
        positive_labels,
        scheme: config.federation.scheme,
        verification: config.verification.clone(),
        rounds_total: config.federation.rounds,
        budget_total: config.federation.budget,
        budget_round: config.budget_per_round(),
        deadline: config.federation.deadline,
        reward_floor: config.federation.reward_floor,
        reward_multiplier: config.federation.reward_multiplier,
        strict_rewards: config.federation.strict_rewards,
        epochs: config.learner.epochs,
        batch_size: config.learner.batch_size,
        learning_rate: config.learner.learning_rate,
        lr_decay_every_rounds: config.learner.lr_decay_every_rounds,
        learner_seed: config.learner.seed,
        attack_seed: seeding::mix(config.federation.seed, 9, 0),
        next_round: 1,
        shadow: None,
    })
}

/// Run all rounds of an already-built run, returning reports and the
/// per-round global models.
pub fn run_to_completion(
    run: &mut FederationRun,
) -> Result<(Vec<RoundReport>, Vec<crate::learner::ParameterVector>)> {
    let mut reports = Vec::with_capacity(run.rounds_total);
    let mut globals = Vec::with_capacity(run.rounds_total);
    for _ in 0..run.rounds_total {
        reports.push(run.run_round()?);
        globals.push(run.global.clone());
    }
    Ok((reports, globals))
}

/// Execute the configured experiment: optional all-honest shadow run, the
/// main round loop, and summary aggregation.
pub fn run_experiment(config: &ExperimentConfig) -> Result<ExperimentOutcome> {
    let shadow = if config.federation.shadow_run {
        let mut honest = build_run(config, true)?;
        let (_, globals) = run_to_completion(&mut honest)?;
        Some(globals)
    } else {
        None
    };

    let mut run = build_run(config, false)?;
    run.shadow = shadow;
    let (reports, _) = run_to_completion(&mut run)?;

    let final_metrics = match reports.last() {
        Some(r) => r.metrics.clone(),
        None => evaluate(&run.global, &run.test, &run.positive_labels)?,
    };
    let summary = Summary {
        rounds: reports.len(),
        final_metrics,
        final_fairness: reports.last().and_then(|r| r.fairness),
        total_spent: reports.iter().map(|r| r.budget_spent).sum(),
        budget_total: config.federation.budget,
        total_tpr_utility: reports.iter().filter_map(|r| r.tpr_utility).sum(),
    };
    Ok(ExperimentOutcome { reports, summary })
}
