//! Forward and backward passes of the individual building blocks.
//!
//! Sequences are `L × d` matrices, one token per row. Weight matrices are
//! stored `out × in`, so a linear layer computes `x · Wᵀ + b` row-wise.

use ndarray::{s, Array1, Array2, ArrayView1, ArrayView2, Axis};

use super::params::{AttentionParams, GateParams};

pub(crate) const LAYER_NORM_EPS: f64 = 1e-5;

pub(crate) fn linear(x: ArrayView2<f64>, w: &Array2<f64>, b: &Array1<f64>) -> Array2<f64> {
    x.dot(&w.t()) + b
}

pub(crate) fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

pub(crate) fn softmax(logits: ArrayView1<f64>) -> Array1<f64> {
    let max = logits.fold(f64::NEG_INFINITY, |m, &v| m.max(v));
    let exp = logits.mapv(|v| (v - max).exp());
    let sum = exp.sum();
    exp / sum
}

fn softmax_rows(scores: &Array2<f64>) -> Array2<f64> {
    let mut out = scores.clone();
    for mut row in out.rows_mut() {
        let sm = softmax(row.view());
        row.assign(&sm);
    }
    out
}

/// Cached activations of one attention call.
pub(crate) struct AttentionCache {
    xq: Array2<f64>,
    xkv: Array2<f64>,
    q: Array2<f64>,
    k: Array2<f64>,
    v: Array2<f64>,
    weights: Vec<Array2<f64>>,
    concat: Array2<f64>,
}

/// Scaled dot-product multi-head attention of `xq` over `xkv`.
pub(crate) fn attention_forward(
    xq: ArrayView2<f64>,
    xkv: ArrayView2<f64>,
    p: &AttentionParams,
    heads: usize,
) -> (Array2<f64>, AttentionCache) {
    let d = p.wq.nrows();
    let dh = d / heads;
    let scale = 1.0 / (dh as f64).sqrt();
    let q = linear(xq, &p.wq, &p.bq);
    let k = linear(xkv, &p.wk, &p.bk);
    let v = linear(xkv, &p.wv, &p.bv);
    let mut concat = Array2::zeros((xq.nrows(), d));
    let mut weights = Vec::with_capacity(heads);
    for h in 0..heads {
        let cols = s![.., h * dh..(h + 1) * dh];
        let scores = q.slice(cols).dot(&k.slice(cols).t()) * scale;
        let a = softmax_rows(&scores);
        concat.slice_mut(cols).assign(&a.dot(&v.slice(cols)));
        weights.push(a);
    }
    let out = linear(concat.view(), &p.wo, &p.bo);
    let cache = AttentionCache {
        xq: xq.to_owned(),
        xkv: xkv.to_owned(),
        q,
        k,
        v,
        weights,
        concat,
    };
    (out, cache)
}

/// Accumulates parameter gradients into `grad`; returns the gradients with
/// respect to the query and key/value inputs.
pub(crate) fn attention_backward(
    dout: ArrayView2<f64>,
    cache: &AttentionCache,
    p: &AttentionParams,
    grad: &mut AttentionParams,
) -> (Array2<f64>, Array2<f64>) {
    let heads = cache.weights.len();
    let d = p.wq.nrows();
    let dh = d / heads;
    let scale = 1.0 / (dh as f64).sqrt();

    grad.wo += &dout.t().dot(&cache.concat);
    grad.bo += &dout.sum_axis(Axis(0));
    let dconcat = dout.dot(&p.wo);

    let mut dq = Array2::zeros(cache.q.raw_dim());
    let mut dk = Array2::zeros(cache.k.raw_dim());
    let mut dv = Array2::zeros(cache.v.raw_dim());
    for (h, a) in cache.weights.iter().enumerate() {
        let cols = s![.., h * dh..(h + 1) * dh];
        let dout_h = dconcat.slice(cols);
        let da = dout_h.dot(&cache.v.slice(cols).t());
        dv.slice_mut(cols).assign(&a.t().dot(&dout_h));
        let row_dot = (&da * a).sum_axis(Axis(1)).insert_axis(Axis(1));
        let ds = a * &(&da - &row_dot) * scale;
        dq.slice_mut(cols).assign(&ds.dot(&cache.k.slice(cols)));
        dk.slice_mut(cols).assign(&ds.t().dot(&cache.q.slice(cols)));
    }

    grad.wq += &dq.t().dot(&cache.xq);
    grad.bq += &dq.sum_axis(Axis(0));
    grad.wk += &dk.t().dot(&cache.xkv);
    grad.bk += &dk.sum_axis(Axis(0));
    grad.wv += &dv.t().dot(&cache.xkv);
    grad.bv += &dv.sum_axis(Axis(0));

    let dxq = dq.dot(&p.wq);
    let dxkv = dk.dot(&p.wk) + dv.dot(&p.wv);
    (dxq, dxkv)
}

pub(crate) struct LayerNormCache {
    normalized: Array2<f64>,
    inv_std: Array1<f64>,
}

impl LayerNormCache {
    #[cfg(test)]
    pub(crate) fn normalized_output(&self, gain: &Array1<f64>, bias: &Array1<f64>) -> Array2<f64> {
        &self.normalized * gain + bias
    }
}

/// Row-wise layer normalization followed by gain and bias.
pub(crate) fn layer_norm_forward(
    x: ArrayView2<f64>,
    gain: &Array1<f64>,
    bias: &Array1<f64>,
) -> (Array2<f64>, LayerNormCache) {
    let n = x.ncols() as f64;
    let mut normalized = x.to_owned();
    let mut inv_std = Array1::zeros(x.nrows());
    for (mut row, istd) in normalized.rows_mut().into_iter().zip(inv_std.iter_mut()) {
        let mean = row.sum() / n;
        row.mapv_inplace(|v| v - mean);
        let var = row.mapv(|v| v * v).sum() / n;
        *istd = 1.0 / (var + LAYER_NORM_EPS).sqrt();
        let s = *istd;
        row.mapv_inplace(|v| v * s);
    }
    let out = &normalized * gain + bias;
    (out, LayerNormCache { normalized, inv_std })
}

/// Plain normalization without gain/bias, used by tests and diagnostics.
pub fn normalize_rows(x: ArrayView2<f64>) -> Array2<f64> {
    let d = x.ncols();
    let (out, _) = layer_norm_forward(x, &Array1::ones(d), &Array1::zeros(d));
    out
}

pub(crate) fn layer_norm_backward(
    dout: ArrayView2<f64>,
    cache: &LayerNormCache,
    gain: &Array1<f64>,
    dgain: &mut Array1<f64>,
    dbias: &mut Array1<f64>,
) -> Array2<f64> {
    *dgain += &(&dout * &cache.normalized).sum_axis(Axis(0));
    *dbias += &dout.sum_axis(Axis(0));
    let dn = &dout * gain;
    let n = dn.ncols() as f64;
    let mut dx = Array2::zeros(dn.raw_dim());
    for (i, mut row) in dx.rows_mut().into_iter().enumerate() {
        let dn_i = dn.row(i);
        let xn = cache.normalized.row(i);
        let mean_dn = dn_i.sum() / n;
        let mean_dn_xn = (&dn_i * &xn).sum() / n;
        let istd = cache.inv_std[i];
        row.assign(&((&dn_i - mean_dn - &xn * mean_dn_xn) * istd));
    }
    dx
}

pub(crate) struct GateCache {
    input: Array1<f64>,
    pub(crate) gate: Array1<f64>,
    original: Array1<f64>,
    attended: Array1<f64>,
}

/// `g = σ(W [original; attended] + b)`, `h = g ⊙ attended + (1 − g) ⊙ original`.
pub(crate) fn gate_forward(
    original: ArrayView1<f64>,
    attended: ArrayView1<f64>,
    p: &GateParams,
) -> (Array1<f64>, GateCache) {
    let d = original.len();
    let mut input = Array1::zeros(2 * d);
    input.slice_mut(s![..d]).assign(&original);
    input.slice_mut(s![d..]).assign(&attended);
    let gate = (p.w.dot(&input) + &p.b).mapv(sigmoid);
    let out = &gate * &attended + &(1.0 - &gate) * &original;
    let cache = GateCache {
        input,
        gate,
        original: original.to_owned(),
        attended: attended.to_owned(),
    };
    (out, cache)
}

/// Returns gradients with respect to `(original, attended)`.
pub(crate) fn gate_backward(
    dout: ArrayView1<f64>,
    cache: &GateCache,
    p: &GateParams,
    grad: &mut GateParams,
) -> (Array1<f64>, Array1<f64>) {
    let d = cache.original.len();
    let g = &cache.gate;
    let dgate = &dout * &(&cache.attended - &cache.original);
    let dpre = &dgate * &(g * &(1.0 - g));
    grad.w += &outer(dpre.view(), cache.input.view());
    grad.b += &dpre;
    let dinput = p.w.t().dot(&dpre);
    let doriginal = &dout * &(1.0 - g) + dinput.slice(s![..d]);
    let dattended = &dout * g + dinput.slice(s![d..]);
    (doriginal, dattended)
}

pub(crate) fn outer(a: ArrayView1<f64>, b: ArrayView1<f64>) -> Array2<f64> {
    let col = a.insert_axis(Axis(1));
    let row = b.insert_axis(Axis(0));
    col.dot(&row)
}
