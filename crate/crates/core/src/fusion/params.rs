//! Parameter tensors, initialization, and checkpoint files.

use ndarray::{Array1, Array2, ArrayViewD, ArrayViewMutD};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::FusionConfig;
use crate::error::{Error, Result};
use crate::ingest::{to_json_string, FloatStyle};

/// Walks every tensor of a parameter group in a fixed order.
pub trait TensorGroup {
    fn visit<'a>(&'a self, prefix: &str, out: &mut Vec<(String, ArrayViewD<'a, f64>)>);
    fn visit_mut<'a>(&'a mut self, prefix: &str, out: &mut Vec<(String, ArrayViewMutD<'a, f64>)>);
}

macro_rules! tensor_group {
    ($ty:ident { $($field:ident),* $(,)? }) => {
        impl TensorGroup for $ty {
            fn visit<'a>(&'a self, prefix: &str, out: &mut Vec<(String, ArrayViewD<'a, f64>)>) {
                $( out.push((format!("{prefix}.{}", stringify!($field)), self.$field.view().into_dyn())); )*
            }
            fn visit_mut<'a>(&'a mut self, prefix: &str, out: &mut Vec<(String, ArrayViewMutD<'a, f64>)>) {
                let $ty { $($field),* } = self;
                $( out.push((format!("{prefix}.{}", stringify!($field)), $field.view_mut().into_dyn())); )*
            }
        }
    };
}

/// Projections of one multi-head attention block.
#[derive(Debug, Clone, PartialEq)]
pub struct AttentionParams {
    pub wq: Array2<f64>,
    pub bq: Array1<f64>,
    pub wk: Array2<f64>,
    pub bk: Array1<f64>,
    pub wv: Array2<f64>,
    pub bv: Array1<f64>,
    pub wo: Array2<f64>,
    pub bo: Array1<f64>,
}
tensor_group!(AttentionParams { wq, bq, wk, bk, wv, bv, wo, bo });

/// Forget gate over `[original; attended]`.
#[derive(Debug, Clone, PartialEq)]
pub struct GateParams {
    /// `d × 2d`
    pub w: Array2<f64>,
    pub b: Array1<f64>,
}
tensor_group!(GateParams { w, b });

/// One post-norm transformer encoder layer.
#[derive(Debug, Clone, PartialEq)]
pub struct EncoderParams {
    pub attn: AttentionParams,
    pub ln1_gain: Array1<f64>,
    pub ln1_bias: Array1<f64>,
    /// `ffn·d × d`
    pub ffn_w1: Array2<f64>,
    pub ffn_b1: Array1<f64>,
    /// `d × ffn·d`
    pub ffn_w2: Array2<f64>,
    pub ffn_b2: Array1<f64>,
    pub ln2_gain: Array1<f64>,
    pub ln2_bias: Array1<f64>,
}

impl TensorGroup for EncoderParams {
    fn visit<'a>(&'a self, prefix: &str, out: &mut Vec<(String, ArrayViewD<'a, f64>)>) {
        self.attn.visit(&format!("{prefix}.attn"), out);
        for (name, t) in [
            ("ln1_gain", self.ln1_gain.view().into_dyn()),
            ("ln1_bias", self.ln1_bias.view().into_dyn()),
            ("ffn_w1", self.ffn_w1.view().into_dyn()),
            ("ffn_b1", self.ffn_b1.view().into_dyn()),
            ("ffn_w2", self.ffn_w2.view().into_dyn()),
            ("ffn_b2", self.ffn_b2.view().into_dyn()),
            ("ln2_gain", self.ln2_gain.view().into_dyn()),
            ("ln2_bias", self.ln2_bias.view().into_dyn()),
        ] {
            out.push((format!("{prefix}.{name}"), t));
        }
    }

    fn visit_mut<'a>(&'a mut self, prefix: &str, out: &mut Vec<(String, ArrayViewMutD<'a, f64>)>) {
        let EncoderParams {
            attn,
            ln1_gain,
            ln1_bias,
            ffn_w1,
            ffn_b1,
            ffn_w2,
            ffn_b2,
            ln2_gain,
            ln2_bias,
        } = self;
        attn.visit_mut(&format!("{prefix}.attn"), out);
        for (name, t) in [
            ("ln1_gain", ln1_gain.view_mut().into_dyn()),
            ("ln1_bias", ln1_bias.view_mut().into_dyn()),
            ("ffn_w1", ffn_w1.view_mut().into_dyn()),
            ("ffn_b1", ffn_b1.view_mut().into_dyn()),
            ("ffn_w2", ffn_w2.view_mut().into_dyn()),
            ("ffn_b2", ffn_b2.view_mut().into_dyn()),
            ("ln2_gain", ln2_gain.view_mut().into_dyn()),
            ("ln2_bias", ln2_bias.view_mut().into_dyn()),
        ] {
            out.push((format!("{prefix}.{name}"), t));
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClassifierParams {
    /// `classes × d`
    pub w: Array2<f64>,
    pub b: Array1<f64>,
}
tensor_group!(ClassifierParams { w, b });

/// Every trainable tensor of the fusion network.
///
/// Gradients use the same type, one tensor per parameter.
#[derive(Debug, Clone, PartialEq)]
pub struct FusionParams {
    /// Text queries attending to audio; produces `a(t,a)`.
    pub text_to_audio: AttentionParams,
    /// Audio queries attending to text; produces `a(a,t)`.
    pub audio_to_text: AttentionParams,
    /// Gate blending the text embedding with `a(t,a)`.
    pub gate_text: GateParams,
    /// Gate blending the audio embedding with `a(a,t)`.
    pub gate_audio: GateParams,
    pub encoder: EncoderParams,
    pub classifier: ClassifierParams,
}

fn uniform_matrix(rng: &mut ChaCha8Rng, rows: usize, cols: usize, bound: f64) -> Array2<f64> {
    Array2::from_shape_simple_fn((rows, cols), || rng.random_range(-bound..=bound))
}

impl AttentionParams {
    fn init(rng: &mut ChaCha8Rng, d: usize, bound: f64) -> Self {
        AttentionParams {
            wq: uniform_matrix(rng, d, d, bound),
            bq: Array1::zeros(d),
            wk: uniform_matrix(rng, d, d, bound),
            bk: Array1::zeros(d),
            wv: uniform_matrix(rng, d, d, bound),
            bv: Array1::zeros(d),
            wo: uniform_matrix(rng, d, d, bound),
            bo: Array1::zeros(d),
        }
    }

    /// Identity projections with zero biases.
    pub fn identity(d: usize) -> Self {
        AttentionParams {
            wq: Array2::eye(d),
            bq: Array1::zeros(d),
            wk: Array2::eye(d),
            bk: Array1::zeros(d),
            wv: Array2::eye(d),
            bv: Array1::zeros(d),
            wo: Array2::eye(d),
            bo: Array1::zeros(d),
        }
    }
}

impl FusionParams {
    /// Weights uniform in `[−1/√d, 1/√d]`, biases zero, layer-norm gains one.
    pub fn init(config: &FusionConfig) -> Result<Self> {
        config.validate()?;
        let d = config.dim;
        let hidden = config.ffn_multiplier * d;
        let bound = 1.0 / (d as f64).sqrt();
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        Ok(FusionParams {
            text_to_audio: AttentionParams::init(&mut rng, d, bound),
            audio_to_text: AttentionParams::init(&mut rng, d, bound),
            gate_text: GateParams {
                w: uniform_matrix(&mut rng, d, 2 * d, bound),
                b: Array1::zeros(d),
            },
            gate_audio: GateParams {
                w: uniform_matrix(&mut rng, d, 2 * d, bound),
                b: Array1::zeros(d),
            },
            encoder: EncoderParams {
                attn: AttentionParams::init(&mut rng, d, bound),
                ln1_gain: Array1::ones(d),
                ln1_bias: Array1::zeros(d),
                ffn_w1: uniform_matrix(&mut rng, hidden, d, bound),
                ffn_b1: Array1::zeros(hidden),
                ffn_w2: uniform_matrix(&mut rng, d, hidden, bound),
                ffn_b2: Array1::zeros(d),
                ln2_gain: Array1::ones(d),
                ln2_bias: Array1::zeros(d),
            },
            classifier: ClassifierParams {
                w: uniform_matrix(&mut rng, config.classes, d, bound),
                b: Array1::zeros(config.classes),
            },
        })
    }

    pub fn dim(&self) -> usize {
        self.classifier.w.ncols()
    }

    pub fn tensors(&self) -> Vec<(String, ArrayViewD<'_, f64>)> {
        let mut out = Vec::new();
        self.text_to_audio.visit("text_to_audio", &mut out);
        self.audio_to_text.visit("audio_to_text", &mut out);
        self.gate_text.visit("gate_text", &mut out);
        self.gate_audio.visit("gate_audio", &mut out);
        self.encoder.visit("encoder", &mut out);
        self.classifier.visit("classifier", &mut out);
        out
    }

    pub fn tensors_mut(&mut self) -> Vec<(String, ArrayViewMutD<'_, f64>)> {
        let mut out = Vec::new();
        self.text_to_audio.visit_mut("text_to_audio", &mut out);
        self.audio_to_text.visit_mut("audio_to_text", &mut out);
        self.gate_text.visit_mut("gate_text", &mut out);
        self.gate_audio.visit_mut("gate_audio", &mut out);
        self.encoder.visit_mut("encoder", &mut out);
        self.classifier.visit_mut("classifier", &mut out);
        out
    }

    pub fn zeros_like(&self) -> Self {
        let mut z = self.clone();
        for (_, mut t) in z.tensors_mut() {
            t.fill(0.0);
        }
        z
    }

    /// `self += alpha · other`, tensor by tensor.
    pub fn add_scaled(&mut self, alpha: f64, other: &FusionParams) {
        for ((_, mut a), (_, b)) in self.tensors_mut().into_iter().zip(other.tensors()) {
            a.scaled_add(alpha, &b);
        }
    }

    pub fn scale(&mut self, factor: f64) {
        for (_, mut t) in self.tensors_mut() {
            t.mapv_inplace(|v| v * factor);
        }
    }

    pub fn parameter_count(&self) -> usize {
        self.tensors().iter().map(|(_, t)| t.len()).sum()
    }

    pub fn is_finite(&self) -> bool {
        self.tensors().iter().all(|(_, t)| t.iter().all(|v| v.is_finite()))
    }
}

#[derive(Serialize, Deserialize)]
struct CheckpointDoc {
    config: FusionConfig,
    tensors: Vec<TensorRecord>,
}

#[derive(Serialize, Deserialize)]
struct TensorRecord {
    name: String,
    shape: Vec<usize>,
    values: Vec<f64>,
}

/// Serialize config and parameters. Values are printed with 17 significant
/// digits, which reproduces every `f64` exactly.
pub fn write_checkpoint(config: &FusionConfig, params: &FusionParams) -> Result<String> {
    if !params.is_finite() {
        return Err(Error::validation("cannot checkpoint non-finite parameters"));
    }
    let doc = CheckpointDoc {
        config: config.clone(),
        tensors: params
            .tensors()
            .into_iter()
            .map(|(name, t)| TensorRecord {
                name,
                shape: t.shape().to_vec(),
                values: t.iter().copied().collect(),
            })
            .collect(),
    };
    Ok(to_json_string(&doc, FloatStyle::Scientific, false))
}

/// Parse a checkpoint. Tensor names, order and shapes must match the
/// architecture implied by the stored config.
pub fn parse_checkpoint(input: &str) -> Result<(FusionConfig, FusionParams)> {
    let doc: CheckpointDoc = serde_json::from_str(input)?;
    let mut params = FusionParams::init(&doc.config)?;
    let mut slots = params.tensors_mut();
    if slots.len() != doc.tensors.len() {
        return Err(Error::validation(format!(
            "checkpoint has {} tensors, architecture needs {}",
            doc.tensors.len(),
            slots.len()
        )));
    }
    for ((name, slot), record) in slots.iter_mut().zip(doc.tensors) {
        if *name != record.name {
            return Err(Error::validation(format!(
                "expected tensor {name}, found {}",
                record.name
            )));
        }
        if slot.shape() != record.shape.as_slice() {
            return Err(Error::validation(format!(
                "tensor {name}: shape {:?} does not match {:?}",
                record.shape,
                slot.shape()
            )));
        }
        if record.values.len() != slot.len() {
            return Err(Error::validation(format!(
                "tensor {name}: {} values for shape {:?}",
                record.values.len(),
                record.shape
            )));
        }
        if record.values.iter().any(|v| !v.is_finite()) {
            return Err(Error::validation(format!("tensor {name} has non-finite values")));
        }
        for (dst, src) in slot.iter_mut().zip(record.values) {
            *dst = src;
        }
    }
    drop(slots);
    Ok((doc.config, params))
}
