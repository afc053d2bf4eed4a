//! Labeled intrusion-log datasets: CSV loading, min-max normalization,
//! IID / non-IID partitioning across clients, holdout splits, and synthetic
//! cluster data for desk-scale runs.
//!
//! All operations are deterministic functions of their inputs and seeds.
//! Class id 0 is treated as the benign class by convention: labels are
//! factorized in first-appearance order, so a CSV whose first row is benign
//! traffic (the common layout) maps benign to 0. Non-IID partitioning
//! restricts only attack classes; benign samples are shared across all
//! clients.

use std::collections::HashMap;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::seeding;

/// One feature vector with its dense class label.
#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub features: Vec<f64>,
    pub label: usize,
}

/// An ordered collection of samples sharing one feature dimension.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledDataset {
    samples: Vec<Sample>,
    num_classes: usize,
    dimension: usize,
}

impl LabeledDataset {
    /// Build a dataset, checking that every sample has dimension `dimension`
    /// and a label below `num_classes`.
    pub fn new(samples: Vec<Sample>, num_classes: usize, dimension: usize) -> Result<Self> {
        for s in &samples {
            if s.features.len() != dimension {
                return Err(Error::DimensionMismatch {
                    expected: dimension,
                    actual: s.features.len(),
                });
            }
            if s.label >= num_classes {
                return Err(Error::invalid(format!(
                    "label {} out of range for {} classes",
                    s.label, num_classes
                )));
            }
        }
        Ok(Self {
            samples,
            num_classes,
            dimension,
        })
    }

    pub fn samples(&self) -> &[Sample] {
        &self.samples
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn num_classes(&self) -> usize {
        self.num_classes
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    /// Per-class sample counts, indexed by label.
    pub fn label_histogram(&self) -> Vec<usize> {
        let mut hist = vec![0usize; self.num_classes];
        for s in &self.samples {
            hist[s.label] += 1;
        }
        hist
    }

    /// Union of several datasets sharing dimension and class count.
    pub fn pooled(parts: &[LabeledDataset]) -> Result<LabeledDataset> {
        let first = parts
            .first()
            .ok_or_else(|| Error::invalid("pooled: no datasets given"))?;
        let mut samples = Vec::new();
        for p in parts {
            if p.dimension != first.dimension {
                return Err(Error::DimensionMismatch {
                    expected: first.dimension,
                    actual: p.dimension,
                });
            }
            samples.extend(p.samples.iter().cloned());
        }
        LabeledDataset::new(samples, first.num_classes, first.dimension)
    }

    /// Deterministic subsample of at most `max` samples (stratified by label,
    /// shuffled per class from `seed`). Used for desk-scale subsampling of
    /// large CSV corpora.
    pub fn subsample(&self, max: usize, seed: u64) -> LabeledDataset {
        if self.len() <= max {
            return self.clone();
        }
        let mut by_class: Vec<Vec<usize>> = vec![Vec::new(); self.num_classes];
        for (i, s) in self.samples.iter().enumerate() {
            by_class[s.label].push(i);
        }
        let mut picked: Vec<usize> = Vec::with_capacity(max);
        for (c, idxs) in by_class.iter_mut().enumerate() {
            let mut rng = ChaCha8Rng::seed_from_u64(seeding::mix(seed, c as u64, 0));
            idxs.shuffle(&mut rng);
            let share = (max as f64 * idxs.len() as f64 / self.len() as f64).round() as usize;
            picked.extend(idxs.iter().take(share.max(1).min(idxs.len())));
        }
        picked.sort_unstable();
        picked.truncate(max);
        let samples = picked.into_iter().map(|i| self.samples[i].clone()).collect();
        LabeledDataset {
            samples,
            num_classes: self.num_classes,
            dimension: self.dimension,
        }
    }
}

/// How source data is distributed over clients.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PartitionMode {
    Iid,
    NonIid,
}

/// Partition of one dataset into per-client local datasets.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PartitionPlan {
    pub num_clients: usize,
    pub mode: PartitionMode,
    /// Non-IID only: maximum number of distinct attack classes per client.
    pub max_classes_per_client: usize,
    pub seed: u64,
}

/// Per-feature min/max record from `normalize_minmax`, reusable on held-out
/// data.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FeatureScaler {
    pub mins: Vec<f64>,
    pub maxs: Vec<f64>,
}

impl FeatureScaler {
    /// Apply the recorded affine map; outputs are clamped to [0,1] so
    /// held-out values outside the fitted range stay in the unit cube.
    pub fn apply(&self, ds: &LabeledDataset) -> Result<LabeledDataset> {
        if ds.dimension() != self.mins.len() {
            return Err(Error::DimensionMismatch {
                expected: self.mins.len(),
                actual: ds.dimension(),
            });
        }
        let samples = ds
            .samples()
            .iter()
            .map(|s| {
                let features = s
                    .features
                    .iter()
                    .enumerate()
                    .map(|(j, &v)| {
                        let span = self.maxs[j] - self.mins[j];
                        if span > 0.0 {
                            ((v - self.mins[j]) / span).clamp(0.0, 1.0)
                        } else {
                            0.0
                        }
                    })
                    .collect();
                Sample {
                    features,
                    label: s.label,
                }
            })
            .collect();
        LabeledDataset::new(samples, ds.num_classes(), ds.dimension())
    }
}

/// Load a feature CSV: header row, one label column (factorized to dense ids
/// in first-appearance order), all other columns numeric.
pub fn load_csv(path: &Path, label_column: &str) -> Result<LabeledDataset> {
    let path_str = path.display().to_string();
    let mut reader = csv::Reader::from_path(path).map_err(|e| match e.kind() {
        csv::ErrorKind::Io(_) => Error::Io {
            path: path_str.clone(),
            source: std::io::Error::new(std::io::ErrorKind::NotFound, e.to_string()),
        },
        _ => Error::Csv {
            path: path_str.clone(),
            msg: e.to_string(),
        },
    })?;

    let headers: Vec<String> = reader
        .headers()
        .map_err(|e| Error::Csv {
            path: path_str.clone(),
            msg: e.to_string(),
        })?
        .iter()
        .map(|h| h.to_string())
        .collect();
    let label_idx = headers
        .iter()
        .position(|h| h == label_column)
        .ok_or_else(|| Error::MissingLabelColumn(label_column.to_string()))?;

    let mut label_ids: HashMap<String, usize> = HashMap::new();
    let mut samples = Vec::new();
    let dimension = headers.len() - 1;

    for (row, record) in reader.records().enumerate() {
        let record = record.map_err(|e| Error::Csv {
            path: path_str.clone(),
            msg: format!("row {}: {}", row, e),
        })?;
        let mut features = Vec::with_capacity(dimension);
        let mut label = None;
        for (col, field) in record.iter().enumerate() {
            if col == label_idx {
                let next_id = label_ids.len();
                label = Some(*label_ids.entry(field.to_string()).or_insert(next_id));
            } else {
                let v: f64 = field.trim().parse().map_err(|_| Error::NonNumericFeature {
                    row,
                    column: headers[col].clone(),
                })?;
                features.push(v);
            }
        }
        samples.push(Sample {
            features,
            label: label.expect("label column present"),
        });
    }

    LabeledDataset::new(samples, label_ids.len().max(1), dimension)
}

/// Affinely map every feature to [0,1]; constant features map to 0.
/// Returns the normalized dataset and the per-feature min/max record.
pub fn normalize_minmax(ds: &LabeledDataset) -> Result<(LabeledDataset, FeatureScaler)> {
    if ds.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let d = ds.dimension();
    let mut mins = vec![f64::INFINITY; d];
    let mut maxs = vec![f64::NEG_INFINITY; d];
    for s in ds.samples() {
        for (j, &v) in s.features.iter().enumerate() {
            mins[j] = mins[j].min(v);
            maxs[j] = maxs[j].max(v);
        }
    }
    let scaler = FeatureScaler { mins, maxs };
    let out = scaler.apply(ds)?;
    Ok((out, scaler))
}

/// Split `ds` into per-client local datasets according to `plan`.
///
/// IID: per-class round-robin dealing after a seeded per-class shuffle, so
/// each client's label histogram matches the global one within ±1 per class.
/// Non-IID: attack classes (ids ≥ 1) are cycled over clients with at most
/// `max_classes_per_client` distinct attack classes each; benign (id 0) is
/// dealt equally to all clients. The union of outputs equals the input.
pub fn partition(ds: &LabeledDataset, plan: &PartitionPlan) -> Result<Vec<LabeledDataset>> {
    let m = plan.num_clients;
    if m == 0 {
        return Err(Error::invalid("partition: num_clients must be >= 1"));
    }
    if m > ds.len() {
        return Err(Error::invalid(format!(
            "partition: {} clients exceed {} samples",
            m,
            ds.len()
        )));
    }

    let mut by_class: Vec<Vec<usize>> = vec![Vec::new(); ds.num_classes()];
    for (i, s) in ds.samples().iter().enumerate() {
        by_class[s.label].push(i);
    }

    let mut client_indices: Vec<Vec<usize>> = vec![Vec::new(); m];

    match plan.mode {
        PartitionMode::Iid => {
            for (c, idxs) in by_class.iter().enumerate() {
                let mut idxs = idxs.clone();
                let mut rng = ChaCha8Rng::seed_from_u64(seeding::mix(plan.seed, c as u64, 0));
                idxs.shuffle(&mut rng);
                // offset by class so the ±1 remainders rotate over clients
                for (i, idx) in idxs.into_iter().enumerate() {
                    client_indices[(i + c) % m].push(idx);
                }
            }
        }
        PartitionMode::NonIid => {
            let k = plan.max_classes_per_client;
            if k == 0 {
                return Err(Error::invalid(
                    "partition: non-IID requires max_classes_per_client >= 1",
                ));
            }
            let attack_classes: Vec<usize> =
                (1..ds.num_classes()).filter(|&c| !by_class[c].is_empty()).collect();
            if attack_classes.is_empty() {
                return Err(Error::invalid(
                    "partition: non-IID requires at least one attack class",
                ));
            }
            if attack_classes.len() > m * k {
                return Err(Error::invalid(format!(
                    "partition: {} attack classes cannot be covered by {} clients x {} classes",
                    attack_classes.len(),
                    m,
                    k
                )));
            }
            let mut order = attack_classes.clone();
            let mut rng = ChaCha8Rng::seed_from_u64(seeding::mix(plan.seed, 1, 0));
            order.shuffle(&mut rng);

            // Cycle classes over client slots; dedupe per client.
            let mut assigned: Vec<Vec<usize>> = vec![Vec::new(); m];
            let mut slot = 0usize;
            for round in 0..k {
                for client in 0..m {
                    // stop adding extra copies once every class has an owner
                    if round > 0 && slot >= order.len() {
                        continue;
                    }
                    let class = order[slot % order.len()];
                    if !assigned[client].contains(&class) {
                        assigned[client].push(class);
                    }
                    slot += 1;
                }
            }

            // Owners per class, then deal each class round-robin among them.
            for &class in &attack_classes {
                let owners: Vec<usize> = (0..m).filter(|&c| assigned[c].contains(&class)).collect();
                let mut idxs = by_class[class].clone();
                let mut crng = ChaCha8Rng::seed_from_u64(seeding::mix(plan.seed, 2, class as u64));
                idxs.shuffle(&mut crng);
                for (i, idx) in idxs.into_iter().enumerate() {
                    client_indices[owners[i % owners.len()]].push(idx);
                }
            }

            // Benign shared equally across all clients.
            let mut benign = by_class[0].clone();
            let mut brng = ChaCha8Rng::seed_from_u64(seeding::mix(plan.seed, 3, 0));
            benign.shuffle(&mut brng);
            for (i, idx) in benign.into_iter().enumerate() {
                client_indices[i % m].push(idx);
            }
        }
    }

    client_indices
        .into_iter()
        .map(|mut idxs| {
            idxs.sort_unstable(); // preserve source row order within each client
            let samples = idxs.into_iter().map(|i| ds.samples()[i].clone()).collect();
            LabeledDataset::new(samples, ds.num_classes(), ds.dimension())
        })
        .collect()
}

/// Stratified train/test split; `fraction` is the train share.
pub fn holdout_split(
    ds: &LabeledDataset,
    fraction: f64,
    seed: u64,
) -> Result<(LabeledDataset, LabeledDataset)> {
    if !(0.0..1.0).contains(&fraction) || fraction <= 0.0 {
        return Err(Error::invalid("holdout_split: fraction must lie in (0,1)"));
    }
    let mut by_class: Vec<Vec<usize>> = vec![Vec::new(); ds.num_classes()];
    for (i, s) in ds.samples().iter().enumerate() {
        by_class[s.label].push(i);
    }
    let mut train_idx = Vec::new();
    let mut test_idx = Vec::new();
    for (c, idxs) in by_class.iter().enumerate() {
        let mut idxs = idxs.clone();
        let mut rng = ChaCha8Rng::seed_from_u64(seeding::mix(seed, c as u64, 1));
        idxs.shuffle(&mut rng);
        let n_train = (fraction * idxs.len() as f64).round() as usize;
        train_idx.extend(idxs.iter().take(n_train));
        test_idx.extend(idxs.iter().skip(n_train));
    }
    if train_idx.is_empty() || test_idx.is_empty() {
        return Err(Error::invalid(
            "holdout_split: fraction yields an empty split",
        ));
    }
    train_idx.sort_unstable();
    test_idx.sort_unstable();
    let take = |idxs: Vec<usize>| {
        let samples = idxs.into_iter().map(|i| ds.samples()[i].clone()).collect();
        LabeledDataset::new(samples, ds.num_classes(), ds.dimension())
    };
    Ok((take(train_idx)?, take(test_idx)?))
}

/// Spec for synthetic Gaussian-cluster data in the unit cube.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SyntheticSpec {
    pub dimension: usize,
    pub num_classes: usize,
    pub samples_per_class: usize,
    pub cluster_spread: f64,
    pub seed: u64,
}

/// One Gaussian cluster per class, center drawn uniformly in [0,1]^d,
/// samples clipped back to the cube. Deterministic per seed.
pub fn generate_synthetic(spec: &SyntheticSpec) -> Result<LabeledDataset> {
    if spec.dimension == 0 {
        return Err(Error::invalid("generate_synthetic: dimension must be >= 1"));
    }
    if spec.num_classes < 2 {
        return Err(Error::invalid(
            "generate_synthetic: num_classes must be >= 2",
        ));
    }
    if spec.samples_per_class == 0 {
        return Err(Error::invalid(
            "generate_synthetic: samples_per_class must be >= 1",
        ));
    }
    if spec.cluster_spread < 0.0 {
        return Err(Error::invalid(
            "generate_synthetic: cluster_spread must be >= 0",
        ));
    }

    let mut samples = Vec::with_capacity(spec.num_classes * spec.samples_per_class);
    for c in 0..spec.num_classes {
        let mut rng = ChaCha8Rng::seed_from_u64(seeding::mix(spec.seed, c as u64, 2));
        let center: Vec<f64> = (0..spec.dimension).map(|_| rng.gen::<f64>()).collect();
        for _ in 0..spec.samples_per_class {
            let features = if spec.cluster_spread == 0.0 {
                center.clone()
            } else {
                let normal = Normal::new(0.0, spec.cluster_spread)
                    .map_err(|e| Error::invalid(e.to_string()))?;
                center
                    .iter()
                    .map(|&v| (v + normal.sample(&mut rng)).clamp(0.0, 1.0))
                    .collect()
            };
            samples.push(Sample {
                features,
                label: c,
            });
        }
    }
    LabeledDataset::new(samples, spec.num_classes, spec.dimension)
}
