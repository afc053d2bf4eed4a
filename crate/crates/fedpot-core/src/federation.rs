//! Round orchestration: quality-based selection, local training with
//! optional adversarial uploads, trust / untrust / conventional weighting,
//! screening, budget-exact softmax rewards, and per-round reporting.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::contract::{min_feasible_reward, select_participants, Candidate};
use crate::dataset::LabeledDataset;
use crate::error::{Error, Result};
use crate::learner::{
    evaluate, init_params, local_train, param_distance, softmax, EvalMetrics, MlpArchitecture,
    ParameterVector, TrainingConfig,
};
use crate::radio_cost::{cost_breakdown, sps_utility, tpr_utility, ChannelSpec, ComputeSpec, CostBreakdown};
use crate::seeding;

/// How a malicious client corrupts its upload.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AttackType {
    None,
    /// Discard training and upload freshly initialized parameters.
    RandomParams,
    /// Add zero-mean Gaussian noise of the given scale to the trained model.
    GaussianPerturb(f64),
}

/// One simulated supplier.
#[derive(Debug, Clone)]
pub struct SpsProfile {
    pub id: usize,
    pub channel: ChannelSpec,
    pub compute: ComputeSpec,
    pub local_data: LabeledDataset,
    pub honest: bool,
    /// Equals the true quality for honest clients; adversary-inflated
    /// otherwise.
    pub claimed_phi: f64,
    pub attack: AttackType,
}

/// Aggregation weighting scheme.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum AggregationScheme {
    #[serde(rename = "conventional")]
    ConventionalFedAvg,
    #[serde(rename = "trust")]
    TrustBased,
    #[serde(rename = "untrust")]
    UntrustBased,
}

/// Upload verification for the untrust scheme.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VerificationMethod {
    /// Evaluate every upload on the generalization test set.
    TestSet,
    /// Reject uploads far from the previous global model.
    EuclideanScreen,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct VerificationConfig {
    pub method: VerificationMethod,
    /// Screen threshold as a multiple of the median distance.
    pub screen_multiplier: f64,
    /// Accuracy floor ψ subtracted from revenues before clamping at 0.
    pub accuracy_floor: f64,
}

impl Default for VerificationConfig {
    fn default() -> Self {
        Self {
            method: VerificationMethod::TestSet,
            screen_multiplier: 3.0,
            accuracy_floor: 0.0,
        }
    }
}

impl VerificationConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.screen_multiplier > 0.0) {
            return Err(Error::Config(
                "verification.screen_multiplier must be > 0".into(),
            ));
        }
        if !(0.0..=1.0).contains(&self.accuracy_floor) {
            return Err(Error::Config(
                "verification.accuracy_floor must lie in [0,1]".into(),
            ));
        }
        Ok(())
    }
}

/// Per-client record inside a round report (selected clients only).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ClientRoundRecord {
    pub id: usize,
    pub theta: f64,
    pub claimed_phi: f64,
    pub weight: f64,
    /// Raw test accuracy of the uploaded model.
    pub test_accuracy: f64,
    /// Revenue after the accuracy floor, clamped at 0.
    pub revenue: f64,
    pub reward: f64,
    /// False when the Euclidean screen rejected this upload.
    pub accepted: bool,
    pub cost: CostBreakdown,
    pub utility: f64,
}

/// Everything recorded about one round.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RoundReport {
    pub round: usize,
    pub selected: Vec<usize>,
    pub clients: Vec<ClientRoundRecord>,
    pub metrics: EvalMetrics,
    pub fairness: Option<f64>,
    /// Distance to the paired all-honest run's global model, when a shadow
    /// trajectory is available.
    pub deviation: Option<f64>,
    pub budget_round: f64,
    pub budget_spent: f64,
    /// Deadline the selection was run against.
    pub deadline_config: f64,
    /// Latency of the slowest selected client (the post-hoc deadline).
    pub deadline_observed: Option<f64>,
    pub tpr_utility: Option<f64>,
    /// Set when degenerate revenues forced uniform weights.
    pub degenerate_weights: bool,
}

/// Weights proportional to claimed quality: v_m = φ_m / Σ φ.
pub fn trust_weights(claimed_phis: &[f64]) -> Result<Vec<f64>> {
    if claimed_phis.is_empty() {
        return Err(Error::invalid("trust_weights: empty input"));
    }
    if claimed_phis.iter().any(|&p| p < 0.0) {
        return Err(Error::invalid("trust_weights: phis must be >= 0"));
    }
    let sum: f64 = claimed_phis.iter().sum();
    if sum <= 0.0 {
        return Err(Error::invalid("trust_weights: all-zero phis"));
    }
    Ok(claimed_phis.iter().map(|&p| p / sum).collect())
}

/// Revenue-based weights from test-set evaluation.
///
/// Returns (weights, revenues, degenerate). Revenues are raw accuracies
/// minus `accuracy_floor`, clamped at 0; when every revenue is 0 the
/// weights fall back to uniform and the degenerate flag is set.
pub fn untrust_weights(
    models: &[ParameterVector],
    test: &LabeledDataset,
    accuracy_floor: f64,
) -> Result<(Vec<f64>, Vec<f64>, bool)> {
    if models.is_empty() {
        return Err(Error::invalid("untrust_weights: no models"));
    }
    if test.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let positives: Vec<usize> = (1..test.num_classes()).collect();
    let revenues: Vec<f64> = models
        .par_iter()
        .map(|m| {
            evaluate(m, test, &positives).map(|e| (e.accuracy - accuracy_floor).max(0.0))
        })
        .collect::<Result<Vec<_>>>()?;
    let sum: f64 = revenues.iter().sum();
    if sum > 0.0 {
        Ok((revenues.iter().map(|&g| g / sum).collect(), revenues, false))
    } else {
        let n = models.len() as f64;
        Ok((vec![1.0 / n; models.len()], revenues, true))
    }
}

/// Accept/reject flags for uploads by distance to the previous global model:
/// reject when the distance exceeds `tau` times the median distance. With two
/// or fewer uploads everything is accepted.
pub fn euclidean_screen(
    previous_global: &ParameterVector,
    uploads: &[ParameterVector],
    tau: f64,
) -> Result<Vec<bool>> {
    let dists = uploads
        .iter()
        .map(|u| param_distance(u, previous_global))
        .collect::<Result<Vec<_>>>()?;
    if uploads.len() <= 2 {
        return Ok(vec![true; uploads.len()]);
    }
    let mut sorted = dists.clone();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let n = sorted.len();
    let median = if n % 2 == 1 {
        sorted[n / 2]
    } else {
        0.5 * (sorted[n / 2 - 1] + sorted[n / 2])
    };
    Ok(dists.iter().map(|&d| d <= tau * median).collect())
}

/// Element-wise weighted sum of equally shaped models; weights must sum to 1.
pub fn aggregate(models: &[ParameterVector], weights: &[f64]) -> Result<ParameterVector> {
    if models.is_empty() || models.len() != weights.len() {
        return Err(Error::invalid("aggregate: models/weights length mismatch"));
    }
    if models.iter().any(|m| !m.same_layout(&models[0])) {
        return Err(Error::LayoutMismatch);
    }
    let sum: f64 = weights.iter().sum();
    if (sum - 1.0).abs() > 1e-9 {
        return Err(Error::invalid(format!(
            "aggregate: weights sum to {}, expected 1",
            sum
        )));
    }
    let mut out = models[0].clone();
    for v in out.values_mut() {
        *v = 0.0;
    }
    for (model, &w) in models.iter().zip(weights) {
        for (o, &v) in out.values_mut().iter_mut().zip(model.values()) {
            *o += w * v;
        }
    }
    Ok(out)
}

/// Conventional FedAvg weights: local data size over total.
pub fn conventional_weights(data_sizes: &[usize]) -> Result<Vec<f64>> {
    if data_sizes.is_empty() {
        return Err(Error::invalid("conventional_weights: empty input"));
    }
    if data_sizes.iter().any(|&s| s == 0) {
        return Err(Error::invalid("conventional_weights: sizes must be positive"));
    }
    let total: usize = data_sizes.iter().sum();
    Ok(data_sizes
        .iter()
        .map(|&s| s as f64 / total as f64)
        .collect())
}

/// Budget-exact softmax payments: R_m = softmax(weights)_m · budget.
/// Every reward is strictly positive and the rewards sum to the budget.
pub fn softmax_rewards(weights: &[f64], budget: f64) -> Result<Vec<f64>> {
    if weights.is_empty() {
        return Err(Error::invalid("softmax_rewards: empty weights"));
    }
    if budget < 0.0 {
        return Err(Error::invalid("softmax_rewards: budget must be >= 0"));
    }
    Ok(softmax(weights).into_iter().map(|s| s * budget).collect())
}

/// Jain's index of the reward-share / contribution-share ratios.
///
/// A client with zero contribution share but a positive reward counts as a
/// maximal-unfairness term: its ratio is set to ten times the largest
/// observed ratio.
pub fn fairness_index(rewards: &[f64], contributions: &[f64]) -> Result<f64> {
    if rewards.len() != contributions.len() {
        return Err(Error::invalid("fairness_index: length mismatch"));
    }
    if rewards.is_empty() {
        return Err(Error::invalid("fairness_index: empty input"));
    }
    if contributions.iter().any(|&c| c < 0.0) {
        return Err(Error::invalid("fairness_index: contributions must be >= 0"));
    }
    let reward_sum: f64 = rewards.iter().sum();
    let contribution_sum: f64 = contributions.iter().sum();
    if contribution_sum <= 0.0 {
        return Err(Error::invalid("fairness_index: contributions must have positive sum"));
    }
    let mut ratios = Vec::with_capacity(rewards.len());
    let mut pending_max = Vec::new(); // indices with zero contribution but positive reward
    for (i, (&r, &c)) in rewards.iter().zip(contributions).enumerate() {
        let reward_share = if reward_sum > 0.0 { r / reward_sum } else { 0.0 };
        let contribution_share = c / contribution_sum;
        if contribution_share > 0.0 {
            ratios.push(reward_share / contribution_share);
        } else if reward_share > 0.0 {
            ratios.push(f64::NAN);
            pending_max.push(i);
        } else {
            ratios.push(0.0);
        }
    }
    let max_ratio = ratios
        .iter()
        .filter(|r| r.is_finite())
        .cloned()
        .fold(0.0f64, f64::max);
    for i in pending_max {
        ratios[i] = max_ratio * 10.0;
    }
    let sum: f64 = ratios.iter().sum();
    let sum_sq: f64 = ratios.iter().map(|r| r * r).sum();
    if sum_sq == 0.0 {
        return Ok(1.0); // all ratios zero: degenerate but uniform
    }
    Ok(sum * sum / (ratios.len() as f64 * sum_sq))
}

fn arch_from_layout(layout: &[(usize, usize)]) -> MlpArchitecture {
    MlpArchitecture {
        input_dim: layout.first().map(|&(i, _)| i).unwrap_or(1),
        hidden_sizes: layout[..layout.len().saturating_sub(1)]
            .iter()
            .map(|&(_, o)| o)
            .collect(),
        num_classes: layout.last().map(|&(_, o)| o).unwrap_or(1),
    }
}

/// Apply the profile's attack to a trained upload.
pub fn adversarial_upload(
    profile: &SpsProfile,
    trained: &ParameterVector,
    seed: u64,
) -> Result<ParameterVector> {
    match profile.attack {
        AttackType::None => Err(Error::invalid(
            "adversarial_upload called on an honest profile",
        )),
        AttackType::RandomParams => init_params(&arch_from_layout(trained.layout()), seed),
        AttackType::GaussianPerturb(sigma) => {
            if sigma == 0.0 {
                return Ok(trained.clone());
            }
            let normal = Normal::new(0.0, sigma).map_err(|e| Error::invalid(e.to_string()))?;
            let mut rng = ChaCha8Rng::seed_from_u64(seeding::mix(seed, 10, 0));
            let mut out = trained.clone();
            for v in out.values_mut() {
                *v += normal.sample(&mut rng);
            }
            Ok(out)
        }
    }
}

/// Distance between the running global model and a reference trajectory's
/// model for the same round.
pub fn model_deviation(
    current_global: &ParameterVector,
    reference_global: &ParameterVector,
) -> Result<f64> {
    param_distance(current_global, reference_global)
}

/// Mutable state of one experiment run.
pub struct FederationRun {
    pub global: ParameterVector,
    pub profiles: Vec<SpsProfile>,
    pub costs: Vec<CostBreakdown>,
    pub thetas: Vec<f64>,
    pub test: LabeledDataset,
    pub positive_labels: Vec<usize>,
    pub scheme: AggregationScheme,
    pub verification: VerificationConfig,
    pub rounds_total: usize,
    pub budget_total: f64,
    pub budget_round: f64,
    pub deadline: f64,
    pub reward_floor: f64,
    pub reward_multiplier: f64,
    pub strict_rewards: bool,
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub lr_decay_every_rounds: usize,
    pub learner_seed: u64,
    pub attack_seed: u64,
    /// 1-based index of the next round to run.
    pub next_round: usize,
    /// Paired all-honest per-round globals, for deviation reporting.
    pub shadow: Option<Vec<ParameterVector>>,
}

impl FederationRun {
    fn effective_learning_rate(&self, round: usize) -> f64 {
        if self.lr_decay_every_rounds == 0 {
            self.learning_rate
        } else {
            let halvings = (round - 1) / self.lr_decay_every_rounds;
            self.learning_rate * 0.5f64.powi(halvings as i32)
        }
    }

    /// Execute one round and advance the state.
    /// Distance between the current global model and the paired all-honest
    /// trajectory's global after the same round.
    fn deviation_at(&self, z: usize) -> Result<Option<f64>> {
        self.shadow
            .as_ref()
            .and_then(|s| s.get(z - 1))
            .map(|reference| model_deviation(&self.global, reference))
            .transpose()
    }

    pub fn run_round(&mut self) -> Result<RoundReport> {
        let z = self.next_round;
        self.next_round += 1;
        let budget_z = self.budget_round;

        // Candidate list: IR-floor rewards on claimed types.
        let candidates: Vec<Candidate> = self
            .profiles
            .iter()
            .map(|p| {
                let floor = min_feasible_reward(self.thetas[p.id], self.costs[p.id].c_total)?;
                Ok(Candidate {
                    id: p.id,
                    phi: p.claimed_phi,
                    reward: self.reward_multiplier * floor.max(self.reward_floor),
                    t_total: self.costs[p.id].t_total,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        let selection = select_participants(&candidates, budget_z, self.deadline)?;

        if selection.selected.is_empty() {
            // Pass-through round: nothing trained, nothing spent.
            let deviation = self.deviation_at(z)?;
            let metrics = evaluate(&self.global, &self.test, &self.positive_labels)?;
            return Ok(RoundReport {
                round: z,
                selected: vec![],
                clients: vec![],
                metrics,
                fairness: None,
                deviation,
                budget_round: budget_z,
                budget_spent: 0.0,
                deadline_config: self.deadline,
                deadline_observed: None,
                tpr_utility: None,
                degenerate_weights: false,
            });
        }

        let lr = self.effective_learning_rate(z);
        let uploads: Vec<ParameterVector> = selection
            .selected
            .par_iter()
            .map(|&id| {
                let profile = &self.profiles[id];
                let cfg = TrainingConfig {
                    epochs: self.epochs,
                    batch_size: self.batch_size,
                    learning_rate: lr,
                    seed: seeding::mix(self.learner_seed, z as u64, id as u64),
                };
                let (trained, _) = local_train(&self.global, &profile.local_data, &cfg)?;
                if profile.attack == AttackType::None {
                    Ok(trained)
                } else {
                    adversarial_upload(
                        profile,
                        &trained,
                        seeding::mix(self.attack_seed, z as u64, id as u64),
                    )
                }
            })
            .collect::<Result<Vec<_>>>()?;

        // Revenues on the generalization test set, for reporting, fairness,
        // and the untrust scheme.
        let raw_accuracies: Vec<f64> = uploads
            .par_iter()
            .map(|m| evaluate(m, &self.test, &self.positive_labels).map(|e| e.accuracy))
            .collect::<Result<Vec<_>>>()?;
        let revenues: Vec<f64> = raw_accuracies
            .iter()
            .map(|&a| (a - self.verification.accuracy_floor).max(0.0))
            .collect();
        let revenue_sum: f64 = revenues.iter().sum();
        let degenerate = revenue_sum <= 0.0;
        let revenue_weights: Vec<f64> = if degenerate {
            vec![1.0 / revenues.len() as f64; revenues.len()]
        } else {
            revenues.iter().map(|&g| g / revenue_sum).collect()
        };

        let mut accepted = vec![true; uploads.len()];
        let weights: Vec<f64> = match self.scheme {
            AggregationScheme::ConventionalFedAvg => {
                let sizes: Vec<usize> = selection
                    .selected
                    .iter()
                    .map(|&id| self.profiles[id].local_data.len())
                    .collect();
                conventional_weights(&sizes)?
            }
            AggregationScheme::TrustBased => {
                let phis: Vec<f64> = selection
                    .selected
                    .iter()
                    .map(|&id| self.profiles[id].claimed_phi)
                    .collect();
                match trust_weights(&phis) {
                    Ok(w) => w,
                    // all-zero claims: fall back to uniform
                    Err(_) => vec![1.0 / phis.len() as f64; phis.len()],
                }
            }
            AggregationScheme::UntrustBased => match self.verification.method {
                VerificationMethod::TestSet => revenue_weights,
                VerificationMethod::EuclideanScreen => {
                    accepted =
                        euclidean_screen(&self.global, &uploads, self.verification.screen_multiplier)?;
                    let mass: f64 = revenues
                        .iter()
                        .zip(&accepted)
                        .filter(|(_, &a)| a)
                        .map(|(&g, _)| g)
                        .sum();
                    let n_accepted = accepted.iter().filter(|&&a| a).count();
                    revenues
                        .iter()
                        .zip(&accepted)
                        .map(|(&g, &a)| {
                            if !a {
                                0.0
                            } else if mass > 0.0 {
                                g / mass
                            } else {
                                1.0 / n_accepted as f64
                            }
                        })
                        .collect()
                }
            },
        };

        self.global = aggregate(&uploads, &weights)?;
        let deviation = self.deviation_at(z)?;

        // Softmax payments. Default: every participant (even weight 0) gets a
        // positive share; strict mode excludes screened-out uploads.
        let rewards: Vec<f64> = if self.strict_rewards && accepted.iter().any(|&a| !a) {
            let kept: Vec<f64> = weights
                .iter()
                .zip(&accepted)
                .filter(|(_, &a)| a)
                .map(|(&w, _)| w)
                .collect();
            let paid = softmax_rewards(&kept, budget_z)?;
            let mut it = paid.into_iter();
            accepted
                .iter()
                .map(|&a| if a { it.next().unwrap() } else { 0.0 })
                .collect()
        } else {
            softmax_rewards(&weights, budget_z)?
        };
        let budget_spent: f64 = rewards.iter().sum();

        let metrics = evaluate(&self.global, &self.test, &self.positive_labels)?;
        let fairness = if revenues.iter().sum::<f64>() > 0.0 {
            Some(fairness_index(&rewards, &revenues)?)
        } else {
            None
        };

        let mut clients = Vec::with_capacity(selection.selected.len());
        let mut tpr_entries = Vec::with_capacity(selection.selected.len());
        for (k, &id) in selection.selected.iter().enumerate() {
            let theta = self.thetas[id];
            let cost = self.costs[id].clone();
            let utility = if rewards[k] > 0.0 {
                sps_utility(theta, rewards[k], cost.c_total)?
            } else {
                -cost.c_total
            };
            tpr_entries.push((theta, revenues[k], rewards[k]));
            clients.push(ClientRoundRecord {
                id,
                theta,
                claimed_phi: self.profiles[id].claimed_phi,
                weight: weights[k],
                test_accuracy: raw_accuracies[k],
                revenue: revenues[k],
                reward: rewards[k],
                accepted: accepted[k],
                cost,
                utility,
            });
        }

        Ok(RoundReport {
            round: z,
            selected: selection.selected.clone(),
            clients,
            metrics,
            fairness,
            deviation,
            budget_round: budget_z,
            budget_spent,
            deadline_config: self.deadline,
            deadline_observed: Some(selection.deadline_used),
            tpr_utility: Some(tpr_utility(&tpr_entries)),
            degenerate_weights: degenerate && self.scheme == AggregationScheme::UntrustBased,
        })
    }
}

/// Build cost breakdowns and type indices for a set of profiles.
pub fn profile_costs(profiles: &[SpsProfile]) -> Result<Vec<CostBreakdown>> {
    profiles
        .iter()
        .map(|p| cost_breakdown(&p.channel, &p.compute))
        .collect()
}
