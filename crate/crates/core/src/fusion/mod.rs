//! Gated bimodal cross-attention classifier.
//!
//! Text and audio embedding sequences are mean-pooled to one vector each.
//! Each modality then attends to the other, a forget gate blends each pooled
//! vector with its attended counterpart, a single transformer encoder layer
//! mixes the two gated vectors as a two-token sequence, and a linear
//! classifier with softmax predicts one of the four emotions.
//!
//! Everything is computed in `f64`. [`backward`] is analytic and checked
//! against central finite differences in the test suite.

mod layers;
mod model;
mod params;
mod train;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ingest::EmotionLabel;

pub use layers::normalize_rows;
pub use model::{
    backward, batch_loss, classify, cross_attention, forget_gate, forward, fusion_layer, mean_pool,
    Direction, FusionOutput, Sample,
};
pub use params::{
    parse_checkpoint, write_checkpoint, AttentionParams, ClassifierParams, EncoderParams, FusionParams,
    GateParams, TensorGroup,
};
pub use train::{evaluate_accuracy, generate_dataset, train_toy, EpochStats, SyntheticSpec, TrainConfig, TrainOutcome};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FusionConfig {
    /// Embedding dimension of both modalities.
    pub dim: usize,
    /// Attention heads; must divide `dim`.
    pub heads: usize,
    /// Number of output classes; fixed to the four emotion labels.
    pub classes: usize,
    /// Hidden width of the encoder feed-forward block, as a multiple of `dim`.
    pub ffn_multiplier: usize,
    /// Seed for parameter initialization.
    pub seed: u64,
}

impl Default for FusionConfig {
    fn default() -> Self {
        FusionConfig {
            dim: 768,
            heads: 1,
            classes: EmotionLabel::COUNT,
            ffn_multiplier: 4,
            seed: 0,
        }
    }
}

impl FusionConfig {
    pub fn validate(&self) -> Result<()> {
        if self.dim < 2 {
            return Err(Error::Precondition(format!("dim must be >= 2, got {}", self.dim)));
        }
        if self.heads == 0 || !self.dim.is_multiple_of(self.heads) {
            return Err(Error::Precondition(format!(
                "heads ({}) must be >= 1 and divide dim ({})",
                self.heads, self.dim
            )));
        }
        if self.classes != EmotionLabel::COUNT {
            return Err(Error::Precondition(format!(
                "classes must be {}, got {}",
                EmotionLabel::COUNT,
                self.classes
            )));
        }
        if self.ffn_multiplier == 0 {
            return Err(Error::Precondition("ffn_multiplier must be >= 1".into()));
        }
        Ok(())
    }
}
