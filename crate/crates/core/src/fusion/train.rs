//! Synthetic dataset and a full-batch gradient-descent trainer.

use ndarray::{Array1, Array2};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::Serialize;

use super::model::{backward_with_hits, forward, Sample};
use super::params::FusionParams;
use super::FusionConfig;
use crate::error::{Error, Result};
use crate::ingest::{EmbeddingMatrix, EmotionLabel};

/// Recipe for the synthetic four-class embedding dataset.
#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticSpec {
    pub samples: usize,
    pub dim: usize,
    /// Distance between any two class centroids, in units of the per-frame
    /// noise standard deviation.
    pub separation: f64,
    pub min_frames: usize,
    pub max_frames: usize,
    pub seed: u64,
}

impl Default for SyntheticSpec {
    fn default() -> Self {
        SyntheticSpec {
            samples: 200,
            dim: 8,
            separation: 4.0,
            min_frames: 1,
            max_frames: 5,
            seed: 7,
        }
    }
}

/// Orthogonal centroids scaled so every pair is `separation` apart.
fn centroids(rng: &mut ChaCha8Rng, dim: usize, separation: f64) -> Vec<Array1<f64>> {
    let mut basis: Vec<Array1<f64>> = Vec::with_capacity(EmotionLabel::COUNT);
    while basis.len() < EmotionLabel::COUNT {
        let mut v: Array1<f64> = Array1::from_shape_simple_fn(dim, || rng.sample(StandardNormal));
        for b in &basis {
            let proj = v.dot(b);
            v.scaled_add(-proj, b);
        }
        let norm = v.dot(&v).sqrt();
        if norm > 1e-6 {
            basis.push(v / norm);
        }
    }
    let radius = separation / std::f64::consts::SQRT_2;
    basis.into_iter().map(|b| b * radius).collect()
}

fn noisy_frames(rng: &mut ChaCha8Rng, centroid: &Array1<f64>, frames: usize) -> Result<EmbeddingMatrix> {
    let d = centroid.len();
    let noise: Array2<f64> = Array2::from_shape_simple_fn((frames, d), || rng.sample(StandardNormal));
    EmbeddingMatrix::new(noise + centroid)
}

/// Generate a balanced dataset from a seed. Both modalities get their own
/// centroids; frame counts are drawn uniformly from `min_frames..=max_frames`.
pub fn generate_dataset(spec: &SyntheticSpec) -> Result<Vec<Sample>> {
    if spec.dim < EmotionLabel::COUNT {
        return Err(Error::Precondition(format!(
            "synthetic data needs dim >= {}, got {}",
            EmotionLabel::COUNT,
            spec.dim
        )));
    }
    if spec.min_frames == 0 || spec.min_frames > spec.max_frames {
        return Err(Error::Precondition(format!(
            "invalid frame range [{}, {}]",
            spec.min_frames, spec.max_frames
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let text_centroids = centroids(&mut rng, spec.dim, spec.separation);
    let audio_centroids = centroids(&mut rng, spec.dim, spec.separation);

    let mut labels: Vec<EmotionLabel> = (0..spec.samples)
        .map(|i| EmotionLabel::ALL[i % EmotionLabel::COUNT])
        .collect();
    labels.shuffle(&mut rng);

    labels
        .into_iter()
        .map(|label| {
            let k = label.index();
            let t_text = rng.random_range(spec.min_frames..=spec.max_frames);
            let t_audio = rng.random_range(spec.min_frames..=spec.max_frames);
            Ok(Sample {
                text: noisy_frames(&mut rng, &text_centroids[k], t_text)?,
                audio: noisy_frames(&mut rng, &audio_centroids[k], t_audio)?,
                label,
            })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub steps: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            learning_rate: 0.05,
            steps: 500,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EpochStats {
    pub epoch: usize,
    /// Mean cross-entropy before this epoch's update.
    pub loss: f64,
    /// Training accuracy before this epoch's update.
    pub accuracy: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainOutcome {
    pub params: FusionParams,
    pub trace: Vec<EpochStats>,
    /// Training accuracy of the returned parameters.
    pub final_accuracy: f64,
}

pub fn evaluate_accuracy(data: &[Sample], params: &FusionParams, config: &FusionConfig) -> Result<f64> {
    if data.is_empty() {
        return Err(Error::DegenerateInput("empty dataset".into()));
    }
    let mut correct = 0;
    for s in data {
        if forward(&s.text, &s.audio, params, config)?.predicted == s.label {
            correct += 1;
        }
    }
    Ok(correct as f64 / data.len() as f64)
}

/// Full-batch gradient descent on mean cross-entropy, starting from the
/// seeded initialization in `config`.
pub fn train_toy(data: &[Sample], config: &FusionConfig, train: &TrainConfig) -> Result<TrainOutcome> {
    if data.is_empty() {
        return Err(Error::DegenerateInput("empty dataset".into()));
    }
    let mut params = FusionParams::init(config)?;
    let n = data.len() as f64;
    let mut trace = Vec::with_capacity(train.steps);
    for epoch in 0..train.steps {
        let (loss_sum, hits, grad) = backward_with_hits(data, &params, config)?;
        let loss = loss_sum / n;
        let accuracy = hits as f64 / n;
        if !loss.is_finite() {
            return Err(Error::Training { epoch, loss });
        }
        trace.push(EpochStats { epoch, loss, accuracy });
        params.add_scaled(-train.learning_rate / n, &grad);
        if !params.is_finite() {
            return Err(Error::Training { epoch, loss: f64::NAN });
        }
    }
    let final_accuracy = evaluate_accuracy(data, &params, config)?;
    Ok(TrainOutcome {
        params,
        trace,
        final_accuracy,
    })
}
