//! Data-quality metric: δ-coverage of a reference set by a local dataset,
//! the integrated quality scalar φ in [0,1], and bracketing of φ into
//! quality types.
//!
//! Coverage at radius δ is the fraction of reference points within Euclidean
//! distance δ of some local point (closed balls). On min-max normalized data
//! the radius range is [0, √d], so the trapezoidal integral of the coverage
//! curve divided by √d is a dimensionless score in [0,1]. Nearest-neighbor
//! search is exact brute force; distances are clamped to √d so the curve
//! always closes at 1 for nonempty locals.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::dataset::{LabeledDataset, Sample};
use crate::error::{Error, Result};
use crate::seeding;

/// Which reference set φ is computed against.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReferenceMode {
    /// The pooled union of all local datasets (simulator oracle).
    Pooled,
    /// Uniform pseudo-random points in [0,1]^d from a shared seed.
    UniformReference,
}

/// Coverage fraction as a function of the radius grid.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CoverageCurve {
    pub deltas: Vec<f64>,
    pub coverage: Vec<f64>,
}

/// The quality scalar φ together with how it was computed.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct QualityEstimate {
    pub phi: f64,
    pub grid_points: usize,
    pub reference_mode: ReferenceMode,
    pub reference_size: usize,
}

/// Nearest local-point distance for every reference point, clamped to √d.
fn nearest_distances(local: &LabeledDataset, reference: &LabeledDataset) -> Result<Vec<f64>> {
    if !local.is_empty() && local.dimension() != reference.dimension() {
        return Err(Error::DimensionMismatch {
            expected: reference.dimension(),
            actual: local.dimension(),
        });
    }
    let sqrt_d = (reference.dimension() as f64).sqrt();
    let dists = reference
        .samples()
        .iter()
        .map(|r| {
            let mut best = f64::INFINITY;
            for l in local.samples() {
                let mut d2 = 0.0;
                for (a, b) in r.features.iter().zip(&l.features) {
                    let diff = a - b;
                    d2 += diff * diff;
                }
                if d2 < best {
                    best = d2;
                }
            }
            best.sqrt().min(sqrt_d)
        })
        .collect();
    Ok(dists)
}

/// Fraction of reference points within distance `delta` of some local point.
/// An empty local dataset covers nothing.
pub fn ball_coverage(
    local: &LabeledDataset,
    reference: &LabeledDataset,
    delta: f64,
) -> Result<f64> {
    if reference.is_empty() {
        return Err(Error::EmptyDataset);
    }
    if delta < 0.0 {
        return Err(Error::invalid("ball_coverage: delta must be >= 0"));
    }
    if local.is_empty() {
        return Ok(0.0);
    }
    let dists = nearest_distances(local, reference)?;
    let covered = dists.iter().filter(|&&d| d <= delta).count();
    Ok(covered as f64 / reference.len() as f64)
}

/// Coverage evaluated on `k` equally spaced radii from 0 to √d inclusive.
pub fn coverage_curve(
    local: &LabeledDataset,
    reference: &LabeledDataset,
    k: usize,
) -> Result<CoverageCurve> {
    if k < 2 {
        return Err(Error::invalid("coverage_curve: grid size must be >= 2"));
    }
    if reference.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let sqrt_d = (reference.dimension() as f64).sqrt();
    let deltas: Vec<f64> = (0..k)
        .map(|i| sqrt_d * i as f64 / (k - 1) as f64)
        .collect();

    let coverage = if local.is_empty() {
        vec![0.0; k]
    } else {
        let mut dists = nearest_distances(local, reference)?;
        dists.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let n = dists.len() as f64;
        deltas
            .iter()
            .map(|&delta| {
                let covered = dists.partition_point(|&d| d <= delta);
                covered as f64 / n
            })
            .collect()
    };
    Ok(CoverageCurve { deltas, coverage })
}

/// φ = trapezoidal integral of the coverage curve over [0, √d], divided by √d.
pub fn vdd_quality(
    local: &LabeledDataset,
    reference: &LabeledDataset,
    k: usize,
    mode: ReferenceMode,
) -> Result<QualityEstimate> {
    let curve = coverage_curve(local, reference, k)?;
    // trapezoid with step sqrt(d)/(k-1), then normalized by sqrt(d); the
    // sqrt(d) factors cancel exactly, so an all-ones curve yields phi = 1.0
    let sum: f64 = curve.coverage.iter().sum();
    let trapezoid = sum - 0.5 * (curve.coverage[0] + curve.coverage[k - 1]);
    let phi = (trapezoid / (k - 1) as f64).clamp(0.0, 1.0);
    Ok(QualityEstimate {
        phi,
        grid_points: k,
        reference_mode: mode,
        reference_size: reference.len(),
    })
}

/// Bracket φ ∈ [0,1] into a type in [1, M]: type m covers [(m-1)/M, m/M),
/// with φ = 1 mapping to M.
pub fn assign_type(phi: f64, num_types: usize) -> Result<usize> {
    if !(0.0..=1.0).contains(&phi) {
        return Err(Error::invalid(format!("assign_type: phi {} outside [0,1]", phi)));
    }
    if num_types == 0 {
        return Err(Error::invalid("assign_type: num_types must be >= 1"));
    }
    let m = (phi * num_types as f64).floor() as usize + 1;
    Ok(m.min(num_types))
}

/// Uniform pseudo-random reference points in [0,1]^d, shared via `seed`.
pub fn uniform_reference(dimension: usize, size: usize, seed: u64) -> Result<LabeledDataset> {
    if dimension == 0 || size == 0 {
        return Err(Error::invalid(
            "uniform_reference: dimension and size must be >= 1",
        ));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seeding::mix(seed, 4, 0));
    let samples = (0..size)
        .map(|_| Sample {
            features: (0..dimension).map(|_| rng.gen::<f64>()).collect(),
            label: 0,
        })
        .collect();
    LabeledDataset::new(samples, 1, dimension)
}
