//! Small bidirectional transformer encoder with a hand-written backward
//! pass.
//!
//! Layout follows the usual post-norm BERT block: summed token, segment and
//! learned position embeddings, layer norm, then per layer multi-head
//! self-attention and a GELU feed-forward network, each wrapped in a
//! residual connection and layer norm. Padding positions are excluded from
//! attention as keys. Everything is `f64` so gradients can be checked
//! against finite differences.

use std::collections::BTreeMap;

use ndarray::{s, Array1, Array2, ArrayView1, ArrayViewD, ArrayViewMutD, Axis, Zip};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::tokenizer::Feature;
use crate::{Error, Result};

const LN_EPS: f64 = 1e-12;
const INIT_STD: f64 = 0.02;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct EncoderConfig {
    pub vocab_size: usize,
    pub hidden: usize,
    pub layers: usize,
    pub heads: usize,
    pub ffn: usize,
    pub max_positions: usize,
}

impl EncoderConfig {
    /// Desk-scale defaults: H = 64, two layers, two heads.
    pub fn small(vocab_size: usize, max_positions: usize) -> Self {
        EncoderConfig {
            vocab_size,
            hidden: 64,
            layers: 2,
            heads: 2,
            ffn: 256,
            max_positions,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.hidden == 0 || self.heads == 0 || !self.hidden.is_multiple_of(self.heads) {
            return Err(Error::Shape(format!(
                "hidden size {} not divisible by {} heads",
                self.hidden, self.heads
            )));
        }
        if self.vocab_size == 0 || self.max_positions == 0 || self.ffn == 0 {
            return Err(Error::Shape("vocab, positions and ffn sizes must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LayerNorm {
    pub gamma: Array1<f64>,
    pub beta: Array1<f64>,
}

impl LayerNorm {
    fn new(h: usize) -> Self {
        LayerNorm {
            gamma: Array1::ones(h),
            beta: Array1::zeros(h),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EncoderLayer {
    pub wq: Array2<f64>,
    pub bq: Array1<f64>,
    pub wk: Array2<f64>,
    pub bk: Array1<f64>,
    pub wv: Array2<f64>,
    pub bv: Array1<f64>,
    pub wo: Array2<f64>,
    pub bo: Array1<f64>,
    pub ln_attn: LayerNorm,
    pub w_in: Array2<f64>,
    pub b_in: Array1<f64>,
    pub w_out: Array2<f64>,
    pub b_out: Array1<f64>,
    pub ln_ffn: LayerNorm,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EncoderParams {
    pub config: EncoderConfig,
    pub token_emb: Array2<f64>,
    pub segment_emb: Array2<f64>,
    pub position_emb: Array2<f64>,
    pub ln_emb: LayerNorm,
    pub layers: Vec<EncoderLayer>,
}

/// Truncated normal at two standard deviations.
pub(crate) fn trunc_normal<R: Rng>(rng: &mut R, shape: (usize, usize)) -> Array2<f64> {
    let normal = Normal::new(0.0, INIT_STD).expect("valid std");
    Array2::from_shape_simple_fn(shape, || loop {
        let v: f64 = normal.sample(rng);
        if v.abs() <= 2.0 * INIT_STD {
            break v;
        }
    })
}

impl EncoderParams {
    /// Random initialisation: truncated normal (σ = 0.02) weights, zero
    /// biases, unit layer-norm gains.
    pub fn init(config: EncoderConfig, seed: u64) -> Result<Self> {
        config.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Ok(Self::init_with(config, &mut rng))
    }

    pub(crate) fn init_with<R: Rng>(config: EncoderConfig, rng: &mut R) -> Self {
        let (h, f) = (config.hidden, config.ffn);
        let token_emb = trunc_normal(rng, (config.vocab_size, h));
        let segment_emb = trunc_normal(rng, (2, h));
        let position_emb = trunc_normal(rng, (config.max_positions, h));
        let layers = (0..config.layers)
            .map(|_| EncoderLayer {
                wq: trunc_normal(rng, (h, h)),
                bq: Array1::zeros(h),
                wk: trunc_normal(rng, (h, h)),
                bk: Array1::zeros(h),
                wv: trunc_normal(rng, (h, h)),
                bv: Array1::zeros(h),
                wo: trunc_normal(rng, (h, h)),
                bo: Array1::zeros(h),
                ln_attn: LayerNorm::new(h),
                w_in: trunc_normal(rng, (h, f)),
                b_in: Array1::zeros(f),
                w_out: trunc_normal(rng, (f, h)),
                b_out: Array1::zeros(h),
                ln_ffn: LayerNorm::new(h),
            })
            .collect();
        EncoderParams {
            config,
            token_emb,
            segment_emb,
            position_emb,
            ln_emb: LayerNorm::new(h),
            layers,
        }
    }

    /// Same shapes, all zeros. Used as a gradient accumulator.
    pub fn zeros_like(&self) -> Self {
        let mut z = self.clone();
        for (_, mut t) in z.tensors_mut() {
            t.fill(0.0);
        }
        z
    }

    /// Every parameter tensor with a stable dotted name.
    pub fn tensors(&self) -> Vec<(String, ArrayViewD<'_, f64>)> {
        let mut out = vec![
            ("embeddings.token".to_string(), self.token_emb.view().into_dyn()),
            ("embeddings.segment".into(), self.segment_emb.view().into_dyn()),
            ("embeddings.position".into(), self.position_emb.view().into_dyn()),
            ("embeddings.ln.gamma".into(), self.ln_emb.gamma.view().into_dyn()),
            ("embeddings.ln.beta".into(), self.ln_emb.beta.view().into_dyn()),
        ];
        for (i, l) in self.layers.iter().enumerate() {
            let p = |n: &str| format!("layer{i}.{n}");
            out.extend([
                (p("attn.wq"), l.wq.view().into_dyn()),
                (p("attn.bq"), l.bq.view().into_dyn()),
                (p("attn.wk"), l.wk.view().into_dyn()),
                (p("attn.bk"), l.bk.view().into_dyn()),
                (p("attn.wv"), l.wv.view().into_dyn()),
                (p("attn.bv"), l.bv.view().into_dyn()),
                (p("attn.wo"), l.wo.view().into_dyn()),
                (p("attn.bo"), l.bo.view().into_dyn()),
                (p("attn.ln.gamma"), l.ln_attn.gamma.view().into_dyn()),
                (p("attn.ln.beta"), l.ln_attn.beta.view().into_dyn()),
                (p("ffn.w_in"), l.w_in.view().into_dyn()),
                (p("ffn.b_in"), l.b_in.view().into_dyn()),
                (p("ffn.w_out"), l.w_out.view().into_dyn()),
                (p("ffn.b_out"), l.b_out.view().into_dyn()),
                (p("ffn.ln.gamma"), l.ln_ffn.gamma.view().into_dyn()),
                (p("ffn.ln.beta"), l.ln_ffn.beta.view().into_dyn()),
            ]);
        }
        out
    }

    /// Mutable counterpart of [`EncoderParams::tensors`], same order.
    pub fn tensors_mut(&mut self) -> Vec<(String, ArrayViewMutD<'_, f64>)> {
        let mut out = vec![
            ("embeddings.token".to_string(), self.token_emb.view_mut().into_dyn()),
            ("embeddings.segment".into(), self.segment_emb.view_mut().into_dyn()),
            ("embeddings.position".into(), self.position_emb.view_mut().into_dyn()),
            ("embeddings.ln.gamma".into(), self.ln_emb.gamma.view_mut().into_dyn()),
            ("embeddings.ln.beta".into(), self.ln_emb.beta.view_mut().into_dyn()),
        ];
        for (i, l) in self.layers.iter_mut().enumerate() {
            let p = |n: &str| format!("layer{i}.{n}");
            out.extend([
                (p("attn.wq"), l.wq.view_mut().into_dyn()),
                (p("attn.bq"), l.bq.view_mut().into_dyn()),
                (p("attn.wk"), l.wk.view_mut().into_dyn()),
                (p("attn.bk"), l.bk.view_mut().into_dyn()),
                (p("attn.wv"), l.wv.view_mut().into_dyn()),
                (p("attn.bv"), l.bv.view_mut().into_dyn()),
                (p("attn.wo"), l.wo.view_mut().into_dyn()),
                (p("attn.bo"), l.bo.view_mut().into_dyn()),
                (p("attn.ln.gamma"), l.ln_attn.gamma.view_mut().into_dyn()),
                (p("attn.ln.beta"), l.ln_attn.beta.view_mut().into_dyn()),
                (p("ffn.w_in"), l.w_in.view_mut().into_dyn()),
                (p("ffn.b_in"), l.b_in.view_mut().into_dyn()),
                (p("ffn.w_out"), l.w_out.view_mut().into_dyn()),
                (p("ffn.b_out"), l.b_out.view_mut().into_dyn()),
                (p("ffn.ln.gamma"), l.ln_ffn.gamma.view_mut().into_dyn()),
                (p("ffn.ln.beta"), l.ln_ffn.beta.view_mut().into_dyn()),
            ]);
        }
        out
    }

    /// Arrays by name for checkpointing.
    pub fn to_arrays(&self) -> BTreeMap<String, NamedArray> {
        self.tensors()
            .into_iter()
            .map(|(n, t)| (n, NamedArray::from_view(&t)))
            .collect()
    }

    /// Rebuilds parameters from checkpoint arrays; every tensor must be
    /// present with its expected shape.
    pub fn from_arrays(config: EncoderConfig, arrays: &BTreeMap<String, NamedArray>) -> Result<Self> {
        config.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let mut params = Self::init_with(config, &mut rng);
        for (name, mut t) in params.tensors_mut() {
            let a = arrays
                .get(&name)
                .ok_or_else(|| Error::Shape(format!("checkpoint lacks {name}")))?;
            a.copy_into(&name, &mut t)?;
        }
        Ok(params)
    }
}

/// A flat array with its shape, as stored in checkpoints.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NamedArray {
    pub shape: Vec<usize>,
    pub data: Vec<f64>,
}

impl NamedArray {
    pub fn from_view(t: &ArrayViewD<'_, f64>) -> Self {
        NamedArray {
            shape: t.shape().to_vec(),
            data: t.iter().copied().collect(),
        }
    }

    pub fn copy_into(&self, name: &str, t: &mut ArrayViewMutD<'_, f64>) -> Result<()> {
        if self.shape != t.shape() || self.data.len() != t.len() {
            return Err(Error::Shape(format!(
                "{name}: checkpoint shape {:?}, expected {:?}",
                self.shape,
                t.shape()
            )));
        }
        t.iter_mut().zip(&self.data).for_each(|(d, &v)| *d = v);
        Ok(())
    }
}

/// Per-token representations; row 0 is the `[CLS]` vector.
#[derive(Debug, Clone, PartialEq)]
pub struct EncoderOutput {
    pub token_reps: Array2<f64>,
}

impl EncoderOutput {
    pub fn cls_rep(&self) -> ArrayView1<'_, f64> {
        self.token_reps.row(0)
    }

    pub fn len(&self) -> usize {
        self.token_reps.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.token_reps.nrows() == 0
    }
}

struct LnCache {
    xhat: Array2<f64>,
    inv_std: Array1<f64>,
}

fn layer_norm(x: &Array2<f64>, ln: &LayerNorm) -> (Array2<f64>, LnCache) {
    let h = x.ncols() as f64;
    let mut xhat = x.clone();
    let mut inv_std = Array1::zeros(x.nrows());
    for (mut row, inv) in xhat.rows_mut().into_iter().zip(inv_std.iter_mut()) {
        let mean = row.sum() / h;
        row.mapv_inplace(|v| v - mean);
        let var = row.iter().map(|v| v * v).sum::<f64>() / h;
        *inv = 1.0 / (var + LN_EPS).sqrt();
        let k = *inv;
        row.mapv_inplace(|v| v * k);
    }
    let y = &xhat * &ln.gamma + &ln.beta;
    (y, LnCache { xhat, inv_std })
}

fn layer_norm_backward(dy: &Array2<f64>, ln: &LayerNorm, cache: &LnCache, grad: &mut LayerNorm) -> Array2<f64> {
    let h = dy.ncols() as f64;
    grad.gamma += &(dy * &cache.xhat).sum_axis(Axis(0));
    grad.beta += &dy.sum_axis(Axis(0));
    let dxhat = dy * &ln.gamma;
    let mut dx = Array2::zeros(dy.raw_dim());
    for i in 0..dy.nrows() {
        let dxh = dxhat.row(i);
        let xh = cache.xhat.row(i);
        let mean_d = dxh.sum() / h;
        let mean_dx = dxh.dot(&xh) / h;
        let inv = cache.inv_std[i];
        Zip::from(dx.row_mut(i))
            .and(&dxh)
            .and(&xh)
            .for_each(|o, &d, &x| *o = inv * (d - mean_d - x * mean_dx));
    }
    dx
}

const GELU_C: f64 = 0.797_884_560_802_865_4; // sqrt(2/pi)

fn gelu(x: f64) -> f64 {
    0.5 * x * (1.0 + (GELU_C * (x + 0.044715 * x * x * x)).tanh())
}

fn gelu_grad(x: f64) -> f64 {
    let t = (GELU_C * (x + 0.044715 * x * x * x)).tanh();
    0.5 * (1.0 + t) + 0.5 * x * (1.0 - t * t) * GELU_C * (1.0 + 3.0 * 0.044715 * x * x)
}

struct LayerCache {
    input: Array2<f64>,
    q: Array2<f64>,
    k: Array2<f64>,
    v: Array2<f64>,
    /// attention weights per head, `L x n_valid`
    probs: Vec<Array2<f64>>,
    context: Array2<f64>,
    ln_attn: LnCache,
    attn_norm: Array2<f64>,
    pre_act: Array2<f64>,
    act: Array2<f64>,
    ln_ffn: LnCache,
}

/// Activations kept from the forward pass for [`backward`].
pub struct ForwardCache {
    input_ids: Vec<usize>,
    segment_ids: Vec<u8>,
    n_valid: usize,
    ln_emb: LnCache,
    layers: Vec<LayerCache>,
}

fn add_bias(mut x: Array2<f64>, b: &Array1<f64>) -> Array2<f64> {
    x += b;
    x
}

/// Forward pass over raw ids. Positions `n_valid..` are padding and are
/// never attended to.
pub fn forward_ids(
    params: &EncoderParams,
    input_ids: &[usize],
    segment_ids: &[u8],
    n_valid: usize,
) -> Result<(EncoderOutput, ForwardCache)> {
    let cfg = &params.config;
    let l = input_ids.len();
    if segment_ids.len() != l {
        return Err(Error::Shape(format!("{} ids but {} segment ids", l, segment_ids.len())));
    }
    if l > cfg.max_positions {
        return Err(Error::Shape(format!("sequence of {l} exceeds {} positions", cfg.max_positions)));
    }
    if n_valid == 0 || n_valid > l {
        return Err(Error::Shape(format!("{n_valid} valid positions for length {l}")));
    }
    if let Some(&id) = input_ids.iter().find(|&&id| id >= cfg.vocab_size) {
        return Err(Error::TokenOutOfRange {
            id,
            vocab_size: cfg.vocab_size,
        });
    }
    if let Some(&seg) = segment_ids.iter().find(|&&s| s > 1) {
        return Err(Error::Shape(format!("segment id {seg} out of range")));
    }
    let h = cfg.hidden;
    let mut x = Array2::zeros((l, h));
    for (i, mut row) in x.rows_mut().into_iter().enumerate() {
        row.assign(&params.token_emb.row(input_ids[i]));
        row += &params.segment_emb.row(segment_ids[i] as usize);
        row += &params.position_emb.row(i);
    }
    let (mut hidden, ln_emb) = layer_norm(&x, &params.ln_emb);

    let dh = h / cfg.heads;
    let scale = 1.0 / (dh as f64).sqrt();
    let mut caches = Vec::with_capacity(params.layers.len());
    for layer in &params.layers {
        let q = add_bias(hidden.dot(&layer.wq), &layer.bq);
        let k = add_bias(hidden.dot(&layer.wk), &layer.bk);
        let v = add_bias(hidden.dot(&layer.wv), &layer.bv);
        let mut context = Array2::zeros((l, h));
        let mut probs = Vec::with_capacity(cfg.heads);
        for a in 0..cfg.heads {
            let cols = s![.., a * dh..(a + 1) * dh];
            let qa = q.slice(cols);
            let ka = k.slice(s![..n_valid, a * dh..(a + 1) * dh]);
            let va = v.slice(s![..n_valid, a * dh..(a + 1) * dh]);
            let mut p = qa.dot(&ka.t()) * scale;
            for mut row in p.rows_mut() {
                let m = row.fold(f64::NEG_INFINITY, |m, &v| m.max(v));
                row.mapv_inplace(|v| (v - m).exp());
                let z = row.sum();
                row.mapv_inplace(|v| v / z);
            }
            context.slice_mut(cols).assign(&p.dot(&va));
            probs.push(p);
        }
        let attn_out = add_bias(context.dot(&layer.wo), &layer.bo);
        let (attn_norm, ln_attn) = layer_norm(&(&hidden + &attn_out), &layer.ln_attn);
        let pre_act = add_bias(attn_norm.dot(&layer.w_in), &layer.b_in);
        let act = pre_act.mapv(gelu);
        let ffn_out = add_bias(act.dot(&layer.w_out), &layer.b_out);
        let (out, ln_ffn) = layer_norm(&(&attn_norm + &ffn_out), &layer.ln_ffn);
        caches.push(LayerCache {
            input: std::mem::replace(&mut hidden, out),
            q,
            k,
            v,
            probs,
            context,
            ln_attn,
            attn_norm,
            pre_act,
            act,
            ln_ffn,
        });
    }
    if hidden.iter().any(|v| !v.is_finite()) {
        return Err(Error::Shape("non-finite encoder output".into()));
    }
    Ok((
        EncoderOutput { token_reps: hidden },
        ForwardCache {
            input_ids: input_ids.to_vec(),
            segment_ids: segment_ids.to_vec(),
            n_valid,
            ln_emb,
            layers: caches,
        },
    ))
}

/// Encodes one feature.
pub fn forward(feature: &Feature, params: &EncoderParams) -> Result<EncoderOutput> {
    forward_ids(params, &feature.input_ids, &feature.segment_ids, feature.seq_len).map(|(o, _)| o)
}

/// Accumulates into `grads` the gradient of a scalar loss given its
/// gradient `d_out` with respect to the encoder output.
pub fn backward(params: &EncoderParams, cache: &ForwardCache, d_out: &Array2<f64>, grads: &mut EncoderParams) {
    let cfg = &params.config;
    let h = cfg.hidden;
    let dh = h / cfg.heads;
    let scale = 1.0 / (dh as f64).sqrt();
    let n = cache.n_valid;
    let mut d_hidden = d_out.clone();
    for ((layer, lc), g) in params
        .layers
        .iter()
        .zip(&cache.layers)
        .zip(grads.layers.iter_mut())
        .rev()
    {
        // feed-forward block
        let d_res2 = layer_norm_backward(&d_hidden, &layer.ln_ffn, &lc.ln_ffn, &mut g.ln_ffn);
        g.w_out += &lc.act.t().dot(&d_res2);
        g.b_out += &d_res2.sum_axis(Axis(0));
        let mut d_pre = d_res2.dot(&layer.w_out.t());
        Zip::from(&mut d_pre).and(&lc.pre_act).for_each(|d, &x| *d *= gelu_grad(x));
        g.w_in += &lc.attn_norm.t().dot(&d_pre);
        g.b_in += &d_pre.sum_axis(Axis(0));
        let d_attn_norm = d_res2 + d_pre.dot(&layer.w_in.t());

        // attention block
        let d_res1 = layer_norm_backward(&d_attn_norm, &layer.ln_attn, &lc.ln_attn, &mut g.ln_attn);
        g.wo += &lc.context.t().dot(&d_res1);
        g.bo += &d_res1.sum_axis(Axis(0));
        let d_context = d_res1.dot(&layer.wo.t());
        let l = d_context.nrows();
        let mut dq = Array2::zeros((l, h));
        let mut dk = Array2::zeros((l, h));
        let mut dv = Array2::zeros((l, h));
        for a in 0..cfg.heads {
            let cols = s![.., a * dh..(a + 1) * dh];
            let valid = s![..n, a * dh..(a + 1) * dh];
            let p = &lc.probs[a];
            let dctx = d_context.slice(cols);
            let dp = dctx.dot(&lc.v.slice(valid).t());
            dv.slice_mut(valid).assign(&p.t().dot(&dctx));
            let mut ds = p * &dp;
            for (mut row, prow) in ds.rows_mut().into_iter().zip(p.rows()) {
                let dot = row.sum();
                Zip::from(&mut row).and(&prow).for_each(|d, &pv| *d -= pv * dot);
            }
            ds *= scale;
            dq.slice_mut(cols).assign(&ds.dot(&lc.k.slice(valid)));
            dk.slice_mut(valid).assign(&ds.t().dot(&lc.q.slice(cols)));
        }
        g.wq += &lc.input.t().dot(&dq);
        g.bq += &dq.sum_axis(Axis(0));
        g.wk += &lc.input.t().dot(&dk);
        g.bk += &dk.sum_axis(Axis(0));
        g.wv += &lc.input.t().dot(&dv);
        g.bv += &dv.sum_axis(Axis(0));
        d_hidden = d_res1 + dq.dot(&layer.wq.t()) + dk.dot(&layer.wk.t()) + dv.dot(&layer.wv.t());
    }
    let dx = layer_norm_backward(&d_hidden, &params.ln_emb, &cache.ln_emb, &mut grads.ln_emb);
    for (i, row) in dx.rows().into_iter().enumerate() {
        let mut t = grads.token_emb.row_mut(cache.input_ids[i]);
        t += &row;
        let mut sg = grads.segment_emb.row_mut(cache.segment_ids[i] as usize);
        sg += &row;
        let mut p = grads.position_emb.row_mut(i);
        p += &row;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny(h: usize, layers: usize, seed: u64) -> EncoderParams {
        EncoderParams::init(
            EncoderConfig {
                vocab_size: 20,
                hidden: h,
                layers,
                heads: 2,
                ffn: 2 * h,
                max_positions: 16,
            },
            seed,
        )
        .unwrap()
    }

    #[test]
    fn config_validation() {
        let mut c = EncoderConfig::small(10, 8);
        assert!(c.validate().is_ok());
        c.heads = 3;
        assert!(c.validate().is_err());
    }

    #[test]
    fn init_is_seeded_and_truncated() {
        let a = tiny(8, 1, 5);
        assert_eq!(a, tiny(8, 1, 5));
        assert_ne!(a, tiny(8, 1, 6));
        assert!(a.token_emb.iter().all(|v| v.abs() <= 0.04));
        assert!(a.layers[0].bq.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn padding_length_does_not_change_real_rows() {
        let p = tiny(8, 2, 1);
        let ids = [2, 5, 6, 3, 7, 8, 3];
        let segs = [0, 0, 0, 0, 1, 1, 1];
        let (short, _) = forward_ids(&p, &ids, &segs, 7).unwrap();
        let mut long_ids = ids.to_vec();
        let mut long_segs = segs.to_vec();
        long_ids.extend([0; 5]);
        long_segs.extend([0; 5]);
        let (long, _) = forward_ids(&p, &long_ids, &long_segs, 7).unwrap();
        assert_eq!(short.token_reps, long.token_reps.slice(s![..7, ..]));
        // different pad token ids in the tail: same real rows
        let mut other = long_ids.clone();
        other[8] = 9;
        other[10] = 4;
        let (alt, _) = forward_ids(&p, &other, &long_segs, 7).unwrap();
        assert_eq!(alt.token_reps.slice(s![..7, ..]), long.token_reps.slice(s![..7, ..]));
    }

    #[test]
    fn deterministic_and_finite() {
        let p = tiny(8, 2, 3);
        let ids = [2, 4, 3, 5, 3];
        let segs = [0, 0, 0, 1, 1];
        let (a, _) = forward_ids(&p, &ids, &segs, 5).unwrap();
        let (b, _) = forward_ids(&p, &ids, &segs, 5).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.token_reps.dim(), (5, 8));
        assert!(a.token_reps.iter().all(|v| v.is_finite()));
        assert_eq!(a.cls_rep(), a.token_reps.row(0));
    }

    #[test]
    fn rejects_bad_inputs() {
        let p = tiny(8, 1, 3);
        assert!(matches!(
            forward_ids(&p, &[2, 99], &[0, 0], 2),
            Err(Error::TokenOutOfRange { id: 99, .. })
        ));
        assert!(forward_ids(&p, &[2; 17], &[0; 17], 17).is_err());
        assert!(forward_ids(&p, &[2, 3], &[0], 2).is_err());
    }

    #[test]
    fn arrays_round_trip() {
        let p = tiny(8, 2, 9);
        let arrays = p.to_arrays();
        assert_eq!(EncoderParams::from_arrays(p.config, &arrays).unwrap(), p);
        let mut broken = arrays.clone();
        broken.get_mut("layer1.attn.wq").unwrap().shape = vec![4, 16];
        assert!(EncoderParams::from_arrays(p.config, &broken).is_err());
    }
}
