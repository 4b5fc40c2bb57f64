use ndarray::{stack, Array1, Array2, ArrayView1, ArrayView2, Axis};

use super::layers::{
    attention_backward, attention_forward, gate_backward, gate_forward, layer_norm_backward,
    layer_norm_forward, linear, outer, softmax, AttentionCache, GateCache, LayerNormCache,
};
use super::params::{AttentionParams, FusionParams, GateParams};
use super::FusionConfig;
use crate::error::{Error, Result};
use crate::ingest::{EmbeddingMatrix, EmotionLabel};

/// Which modality supplies the query.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    /// Text queries, audio keys/values: `a(t,a)`.
    TextToAudio,
    /// Audio queries, text keys/values: `a(a,t)`.
    AudioToText,
}

impl Direction {
    fn attention(self, p: &FusionParams) -> &AttentionParams {
        match self {
            Direction::TextToAudio => &p.text_to_audio,
            Direction::AudioToText => &p.audio_to_text,
        }
    }

    fn gate(self, p: &FusionParams) -> &GateParams {
        match self {
            Direction::TextToAudio => &p.gate_text,
            Direction::AudioToText => &p.gate_audio,
        }
    }
}

/// Forward result with every intermediate exposed.
#[derive(Debug, Clone, PartialEq)]
pub struct FusionOutput {
    pub probabilities: Array1<f64>,
    pub predicted: EmotionLabel,
    pub logits: Array1<f64>,
    pub fused: Array1<f64>,
    pub z_text: Array1<f64>,
    pub z_audio: Array1<f64>,
    /// `a(t,a)`
    pub attended_text: Array1<f64>,
    /// `a(a,t)`
    pub attended_audio: Array1<f64>,
    pub gate_text: Array1<f64>,
    pub gate_audio: Array1<f64>,
    /// `h(t,a)`
    pub gated_text: Array1<f64>,
    /// `h(a,t)`
    pub gated_audio: Array1<f64>,
}

/// One training example.
#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub text: EmbeddingMatrix,
    pub audio: EmbeddingMatrix,
    pub label: EmotionLabel,
}

fn check_params(params: &FusionParams, config: &FusionConfig) -> Result<()> {
    config.validate()?;
    if params.dim() != config.dim {
        return Err(Error::Precondition(format!(
            "parameters have dim {}, config says {}",
            params.dim(),
            config.dim
        )));
    }
    Ok(())
}

fn check_len(v: ArrayView1<f64>, d: usize, what: &str) -> Result<()> {
    if v.len() != d {
        return Err(Error::Precondition(format!(
            "{what} has length {}, expected {d}",
            v.len()
        )));
    }
    Ok(())
}

/// Column-wise mean over the time axis.
pub fn mean_pool(m: ArrayView2<f64>) -> Result<Array1<f64>> {
    m.mean_axis(Axis(0))
        .ok_or_else(|| Error::DegenerateInput("cannot mean-pool a sequence with no frames".into()))
}

fn as_row(v: ArrayView1<f64>) -> ArrayView2<f64> {
    v.insert_axis(Axis(0))
}

/// Multi-head attention with a single query and a single key/value token.
///
/// The softmax over one key always yields weight 1, so the result depends on
/// `keyvalue` only.
pub fn cross_attention(
    query: ArrayView1<f64>,
    keyvalue: ArrayView1<f64>,
    params: &FusionParams,
    config: &FusionConfig,
    direction: Direction,
) -> Result<Array1<f64>> {
    check_params(params, config)?;
    check_len(query, config.dim, "query")?;
    check_len(keyvalue, config.dim, "key/value")?;
    let (out, _) = attention_forward(as_row(query), as_row(keyvalue), direction.attention(params), config.heads);
    Ok(out.row(0).to_owned())
}

/// Forget-gate blend of `original` with `attended`.
pub fn forget_gate(
    original: ArrayView1<f64>,
    attended: ArrayView1<f64>,
    params: &FusionParams,
    direction: Direction,
) -> Result<Array1<f64>> {
    let d = params.dim();
    check_len(original, d, "original")?;
    check_len(attended, d, "attended")?;
    Ok(gate_forward(original, attended, direction.gate(params)).0)
}

struct EncoderCache {
    attn: AttentionCache,
    ln1: LayerNormCache,
    y1: Array2<f64>,
    pre_relu: Array2<f64>,
    hidden: Array2<f64>,
    ln2: LayerNormCache,
}

fn encoder_forward(tokens: ArrayView2<f64>, params: &FusionParams, heads: usize) -> (Array1<f64>, EncoderCache) {
    let enc = &params.encoder;
    let (attn_out, attn) = attention_forward(tokens, tokens, &enc.attn, heads);
    let (y1, ln1) = layer_norm_forward((&tokens + &attn_out).view(), &enc.ln1_gain, &enc.ln1_bias);
    let pre_relu = linear(y1.view(), &enc.ffn_w1, &enc.ffn_b1);
    let hidden = pre_relu.mapv(|v| v.max(0.0));
    let ffn = linear(hidden.view(), &enc.ffn_w2, &enc.ffn_b2);
    let (y2, ln2) = layer_norm_forward((&y1 + &ffn).view(), &enc.ln2_gain, &enc.ln2_bias);
    let pooled = y2.mean_axis(Axis(0)).expect("two tokens");
    (
        pooled,
        EncoderCache {
            attn,
            ln1,
            y1,
            pre_relu,
            hidden,
            ln2,
        },
    )
}

/// One encoder layer over the two-token sequence `[h_ta; h_at]`, mean-pooled.
///
/// No positional encoding is applied, so swapping the inputs leaves the
/// result unchanged.
pub fn fusion_layer(
    h_ta: ArrayView1<f64>,
    h_at: ArrayView1<f64>,
    params: &FusionParams,
    config: &FusionConfig,
) -> Result<Array1<f64>> {
    check_params(params, config)?;
    check_len(h_ta, config.dim, "h(t,a)")?;
    check_len(h_at, config.dim, "h(a,t)")?;
    let tokens = stack![Axis(0), h_ta, h_at];
    Ok(encoder_forward(tokens.view(), params, config.heads).0)
}

fn argmax(values: ArrayView1<f64>) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate() {
        if v > values[best] {
            best = i;
        }
    }
    best
}

/// Linear classifier with softmax; ties in the argmax go to the lower class
/// index.
pub fn classify(fused: ArrayView1<f64>, params: &FusionParams) -> Result<(Array1<f64>, EmotionLabel, Array1<f64>)> {
    check_len(fused, params.dim(), "fused embedding")?;
    let logits = params.classifier.w.dot(&fused) + &params.classifier.b;
    let probabilities = softmax(logits.view());
    let predicted = EmotionLabel::from_index(argmax(probabilities.view())).expect("four classes");
    Ok((probabilities, predicted, logits))
}

struct Trace {
    output: FusionOutput,
    attn_text: AttentionCache,
    attn_audio: AttentionCache,
    gate_text: GateCache,
    gate_audio: GateCache,
    encoder: EncoderCache,
}

fn forward_trace(
    text: &EmbeddingMatrix,
    audio: &EmbeddingMatrix,
    params: &FusionParams,
    config: &FusionConfig,
) -> Result<Trace> {
    check_params(params, config)?;
    for (m, what) in [(text, "text"), (audio, "audio")] {
        if m.dim() != config.dim {
            return Err(Error::Precondition(format!(
                "{what} embeddings have {} columns, expected {}",
                m.dim(),
                config.dim
            )));
        }
    }
    let z_text = mean_pool(text.view())?;
    let z_audio = mean_pool(audio.view())?;

    let (attended_text, attn_text) =
        attention_forward(as_row(z_text.view()), as_row(z_audio.view()), &params.text_to_audio, config.heads);
    let (attended_audio, attn_audio) =
        attention_forward(as_row(z_audio.view()), as_row(z_text.view()), &params.audio_to_text, config.heads);
    let attended_text = attended_text.row(0).to_owned();
    let attended_audio = attended_audio.row(0).to_owned();

    let (gated_text, gate_text) = gate_forward(z_text.view(), attended_text.view(), &params.gate_text);
    let (gated_audio, gate_audio) = gate_forward(z_audio.view(), attended_audio.view(), &params.gate_audio);

    let tokens = stack![Axis(0), gated_text, gated_audio];
    let (fused, encoder) = encoder_forward(tokens.view(), params, config.heads);
    let (probabilities, predicted, logits) = classify(fused.view(), params)?;

    Ok(Trace {
        output: FusionOutput {
            probabilities,
            predicted,
            logits,
            fused,
            z_text,
            z_audio,
            attended_text,
            attended_audio,
            gate_text: gate_text.gate.clone(),
            gate_audio: gate_audio.gate.clone(),
            gated_text,
            gated_audio,
        },
        attn_text,
        attn_audio,
        gate_text,
        gate_audio,
        encoder,
    })
}

pub fn forward(
    text: &EmbeddingMatrix,
    audio: &EmbeddingMatrix,
    params: &FusionParams,
    config: &FusionConfig,
) -> Result<FusionOutput> {
    Ok(forward_trace(text, audio, params, config)?.output)
}

fn cross_entropy(logits: ArrayView1<f64>, label: EmotionLabel) -> f64 {
    let max = logits.fold(f64::NEG_INFINITY, |m, &v| m.max(v));
    let lse = max + logits.mapv(|v| (v - max).exp()).sum().ln();
    lse - logits[label.index()]
}

/// Summed cross-entropy over the batch.
pub fn batch_loss(batch: &[Sample], params: &FusionParams, config: &FusionConfig) -> Result<f64> {
    batch.iter().try_fold(0.0, |acc, s| {
        let out = forward(&s.text, &s.audio, params, config)?;
        Ok(acc + cross_entropy(out.logits.view(), s.label))
    })
}

/// Summed cross-entropy over the batch and its gradient with respect to
/// every parameter. Gradients add across samples (sum reduction).
pub fn backward(batch: &[Sample], params: &FusionParams, config: &FusionConfig) -> Result<(f64, FusionParams)> {
    let (loss, _, grad) = backward_with_hits(batch, params, config)?;
    Ok((loss, grad))
}

/// [`backward`] plus the number of samples the current parameters classify
/// correctly.
pub(crate) fn backward_with_hits(
    batch: &[Sample],
    params: &FusionParams,
    config: &FusionConfig,
) -> Result<(f64, usize, FusionParams)> {
    let mut grad = params.zeros_like();
    let mut loss = 0.0;
    let mut hits = 0;
    for sample in batch {
        let trace = forward_trace(&sample.text, &sample.audio, params, config)?;
        loss += cross_entropy(trace.output.logits.view(), sample.label);
        hits += usize::from(trace.output.predicted == sample.label);
        sample_backward(&trace, sample.label, params, &mut grad);
    }
    Ok((loss, hits, grad))
}

fn sample_backward(trace: &Trace, label: EmotionLabel, params: &FusionParams, grad: &mut FusionParams) {
    let out = &trace.output;
    let mut dlogits = out.probabilities.clone();
    dlogits[label.index()] -= 1.0;

    grad.classifier.w += &outer(dlogits.view(), out.fused.view());
    grad.classifier.b += &dlogits;
    let dfused = params.classifier.w.t().dot(&dlogits);

    // Mean over the two output tokens.
    let dy2 = stack![Axis(0), dfused, dfused] * 0.5;

    let enc = &params.encoder;
    let cache = &trace.encoder;
    let g = &mut grad.encoder;
    let du2 = layer_norm_backward(dy2.view(), &cache.ln2, &enc.ln2_gain, &mut g.ln2_gain, &mut g.ln2_bias);

    g.ffn_w2 += &du2.t().dot(&cache.hidden);
    g.ffn_b2 += &du2.sum_axis(Axis(0));
    let dhidden = du2.dot(&enc.ffn_w2);
    let dpre = &dhidden * &cache.pre_relu.mapv(|v| if v > 0.0 { 1.0 } else { 0.0 });
    g.ffn_w1 += &dpre.t().dot(&cache.y1);
    g.ffn_b1 += &dpre.sum_axis(Axis(0));
    let dy1 = &du2 + &dpre.dot(&enc.ffn_w1);

    let du1 = layer_norm_backward(dy1.view(), &cache.ln1, &enc.ln1_gain, &mut g.ln1_gain, &mut g.ln1_bias);
    let (dq, dkv) = attention_backward(du1.view(), &cache.attn, &enc.attn, &mut g.attn);
    let dtokens = &du1 + &dq + &dkv;

    let (_, dattended_text) = gate_backward(dtokens.row(0), &trace.gate_text, &params.gate_text, &mut grad.gate_text);
    let (_, dattended_audio) =
        gate_backward(dtokens.row(1), &trace.gate_audio, &params.gate_audio, &mut grad.gate_audio);

    attention_backward(
        as_row(dattended_text.view()),
        &trace.attn_text,
        &params.text_to_audio,
        &mut grad.text_to_audio,
    );
    attention_backward(
        as_row(dattended_audio.view()),
        &trace.attn_audio,
        &params.audio_to_text,
        &mut grad.audio_to_text,
    );
}
