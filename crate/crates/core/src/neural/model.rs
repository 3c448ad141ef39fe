use ndarray::{Array2, Axis};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::features::{build_ps, embed_positions, fourier_width, point_features, split_labels};
use super::params::{Linear, Norm, ParamStore};
use super::tape::{Tape, Var};
use crate::error::{Error, Result};
use crate::geom::Vec3;
use crate::sampler::SurfacePointCloud;

/// Architecture of the occupancy VAE.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct EncoderConfig {
    pub width: usize,
    pub heads: usize,
    pub encoder_layers: usize,
    pub decoder_layers: usize,
    pub frequencies: usize,
    pub include_normals: bool,
    pub latent_width: usize,
}

impl Default for EncoderConfig {
    fn default() -> Self {
        Self {
            width: 64,
            heads: 4,
            encoder_layers: 2,
            decoder_layers: 2,
            frequencies: 8,
            include_normals: true,
            latent_width: 8,
        }
    }
}

impl EncoderConfig {
    pub fn validate(&self) -> Result<()> {
        let counts = [
            ("width", self.width),
            ("heads", self.heads),
            ("encoder_layers", self.encoder_layers),
            ("decoder_layers", self.decoder_layers),
            ("frequencies", self.frequencies),
            ("latent_width", self.latent_width),
        ];
        if let Some((name, _)) = counts.iter().find(|(_, v)| *v == 0) {
            return Err(Error::InvalidArgument(format!("{name} must be at least 1")));
        }
        if self.width % self.heads != 0 {
            return Err(Error::InvalidArgument(format!(
                "width {} is not divisible by {} heads",
                self.width, self.heads
            )));
        }
        Ok(())
    }

    /// Width of one encoder input row.
    pub fn point_feature_width(&self) -> usize {
        fourier_width(self.frequencies) + if self.include_normals { 3 } else { 0 }
    }
}

/// Multi-head attention with pre-normalization. Self-attention blocks have
/// no separate key/value norm.
#[derive(Debug, Clone, Copy)]
pub struct AttentionBlock {
    pub norm_q: Norm,
    pub norm_kv: Option<Norm>,
    pub q: Linear,
    pub k: Linear,
    pub v: Linear,
    pub o: Linear,
}

#[derive(Debug, Clone, Copy)]
pub struct FeedForward {
    pub norm: Norm,
    pub fc1: Linear,
    pub fc2: Linear,
}

#[derive(Debug, Clone, Copy)]
pub struct SelfLayer {
    pub attn: AttentionBlock,
    pub ff: FeedForward,
}

/// Slot handles of every tensor of a [`Model`].
#[derive(Debug, Clone)]
pub struct Layout {
    pub point_embed: Linear,
    pub query_embed: Linear,
    pub uniform_attn: AttentionBlock,
    pub enc_ff: FeedForward,
    pub enc_layers: Vec<SelfLayer>,
    pub latent_norm: Norm,
    pub mean_head: Linear,
    pub logvar_head: Linear,
    pub dec_in: Linear,
    pub dec_layers: Vec<SelfLayer>,
    pub dec_attn: AttentionBlock,
    pub dec_ff: FeedForward,
    pub out_norm: Norm,
    pub out: Linear,
    /// Present only for the dual-path encoder; always allocated last.
    pub salient_attn: Option<AttentionBlock>,
}

/// Name prefix of the salient cross-attention tensors.
pub const SALIENT_PREFIX: &str = "enc.salient_attn.";

const MLP_RATIO: usize = 4;

fn attention_block(store: &mut ParamStore, name: &str, d: usize, cross: bool, rng: &mut ChaCha8Rng) -> AttentionBlock {
    let norm_q = store.norm(&format!("{name}.norm_q"), d);
    let norm_kv = cross.then(|| store.norm(&format!("{name}.norm_kv"), d));
    AttentionBlock {
        norm_q,
        norm_kv,
        q: store.linear(&format!("{name}.q"), d, d, rng),
        k: store.linear(&format!("{name}.k"), d, d, rng),
        v: store.linear(&format!("{name}.v"), d, d, rng),
        o: store.linear(&format!("{name}.o"), d, d, rng),
    }
}

fn feed_forward(store: &mut ParamStore, name: &str, d: usize, rng: &mut ChaCha8Rng) -> FeedForward {
    FeedForward {
        norm: store.norm(&format!("{name}.norm"), d),
        fc1: store.linear(&format!("{name}.fc1"), d, MLP_RATIO * d, rng),
        fc2: store.linear(&format!("{name}.fc2"), MLP_RATIO * d, d, rng),
    }
}

fn self_layer(store: &mut ParamStore, name: &str, d: usize, rng: &mut ChaCha8Rng) -> SelfLayer {
    SelfLayer {
        attn: attention_block(store, &format!("{name}.attn"), d, false, rng),
        ff: feed_forward(store, &format!("{name}.ff"), d, rng),
    }
}

/// The VAE latent: `n_s` rows of `latent_width` channels.
#[derive(Debug, Clone, PartialEq)]
pub struct LatentCode {
    pub z: Array2<f64>,
    pub mean: Array2<f64>,
    pub logvar: Array2<f64>,
}

impl LatentCode {
    pub fn len(&self) -> usize {
        self.z.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.z.nrows() == 0
    }

    /// Mean over entries of the per-entry KL to the unit Gaussian.
    pub fn kl(&self) -> f64 {
        kl_divergence(&self.mean, &self.logvar)
    }
}

/// `mean_rows( Σ_c ½(μ² + e^{lv} − 1 − lv) )`.
pub fn kl_divergence(mean: &Array2<f64>, logvar: &Array2<f64>) -> f64 {
    let per_elem = ndarray::Zip::from(mean)
        .and(logvar)
        .map_collect(|&m, &lv| 0.5 * (m * m + lv.exp() - 1.0 - lv));
    per_elem.sum_axis(Axis(1)).mean().unwrap_or(0.0)
}

/// Encoder inputs after sampling: query rows `P_s` and key/value rows for
/// each attention path, already featurized.
#[derive(Debug, Clone)]
pub struct EncoderInput {
    pub queries: Array2<f64>,
    pub uniform: Array2<f64>,
    /// `None` on the single-path encoder; zero rows when `P_a` is empty.
    pub salient: Option<Array2<f64>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossParts {
    pub total: f64,
    pub mse: f64,
    pub kl: f64,
    /// Fraction of queries whose prediction falls on the labelled side of 0.5.
    pub accuracy: f64,
}

/// Dual cross-attention occupancy VAE.
#[derive(Debug, Clone)]
pub struct Model {
    pub config: EncoderConfig,
    pub params: ParamStore,
    pub layout: Layout,
}

pub(crate) struct ForwardVars {
    pub occupancy: Var,
    pub mean: Var,
    pub logvar: Var,
}

fn linear(t: &mut Tape, p: &ParamStore, l: Linear, x: Var) -> Var {
    let w = t.param(l.w, p.get(l.w));
    let b = t.param(l.b, p.get(l.b));
    let y = t.matmul(x, w);
    t.add_row(y, b)
}

fn norm(t: &mut Tape, p: &ParamStore, n: Norm, x: Var) -> Var {
    let g = t.param(n.gamma, p.get(n.gamma));
    let b = t.param(n.beta, p.get(n.beta));
    t.layer_norm(x, g, b)
}

fn attention(t: &mut Tape, p: &ParamStore, blk: &AttentionBlock, heads: usize, xq: Var, xkv: Var) -> Var {
    let q_in = norm(t, p, blk.norm_q, xq);
    let kv_in = match blk.norm_kv {
        Some(n) => norm(t, p, n, xkv),
        None => q_in,
    };
    let q = linear(t, p, blk.q, q_in);
    let k = linear(t, p, blk.k, kv_in);
    let v = linear(t, p, blk.v, kv_in);
    let d = t.value(q).ncols();
    let dh = d / heads;
    let scale = 1.0 / (dh as f64).sqrt();
    let mut outs = Vec::with_capacity(heads);
    for h in 0..heads {
        let (qh, kh, vh) = if heads == 1 {
            (q, k, v)
        } else {
            (t.slice_cols(q, h * dh, dh), t.slice_cols(k, h * dh, dh), t.slice_cols(v, h * dh, dh))
        };
        let s = t.matmul_t(qh, kh);
        let s = t.scale(s, scale);
        let a = t.softmax_rows(s);
        outs.push(t.matmul(a, vh));
    }
    let cat = if heads == 1 { outs[0] } else { t.concat_cols(&outs) };
    linear(t, p, blk.o, cat)
}

fn feed_forward_residual(t: &mut Tape, p: &ParamStore, ff: &FeedForward, x: Var) -> Var {
    let h = norm(t, p, ff.norm, x);
    let h = linear(t, p, ff.fc1, h);
    let h = t.gelu(h);
    let h = linear(t, p, ff.fc2, h);
    t.add(x, h)
}

fn self_layer_residual(t: &mut Tape, p: &ParamStore, layer: &SelfLayer, heads: usize, x: Var) -> Var {
    let a = attention(t, p, &layer.attn, heads, x, x);
    let x = t.add(x, a);
    feed_forward_residual(t, p, &layer.ff, x)
}

impl Model {
    /// Fresh parameters from `seed`. The single-path model (`dual = false`)
    /// shares every tensor of the dual one except the trailing salient block.
    pub fn new(config: EncoderConfig, dual: bool, seed: u64) -> Result<Self> {
        config.validate()?;
        let d = config.width;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut s = ParamStore::new();
        let point_embed = s.linear("enc.point_embed", config.point_feature_width(), d, &mut rng);
        let query_embed = s.linear("dec.query_embed", fourier_width(config.frequencies), d, &mut rng);
        let uniform_attn = attention_block(&mut s, "enc.uniform_attn", d, true, &mut rng);
        let enc_ff = feed_forward(&mut s, "enc.ff", d, &mut rng);
        let enc_layers = (0..config.encoder_layers)
            .map(|i| self_layer(&mut s, &format!("enc.layer{i}"), d, &mut rng))
            .collect();
        let latent_norm = s.norm("enc.latent_norm", d);
        let mean_head = s.linear("enc.mean", d, config.latent_width, &mut rng);
        let logvar_head = s.zero_linear("enc.logvar", d, config.latent_width);
        let dec_in = s.linear("dec.input", config.latent_width, d, &mut rng);
        let dec_layers = (0..config.decoder_layers)
            .map(|i| self_layer(&mut s, &format!("dec.layer{i}"), d, &mut rng))
            .collect();
        let dec_attn = attention_block(&mut s, "dec.cross_attn", d, true, &mut rng);
        let dec_ff = feed_forward(&mut s, "dec.ff", d, &mut rng);
        let out_norm = s.norm("dec.out_norm", d);
        let out = s.linear("dec.out", d, 1, &mut rng);
        let salient_attn = dual.then(|| attention_block(&mut s, SALIENT_PREFIX.trim_end_matches('.'), d, true, &mut rng));
        Ok(Self {
            config,
            params: s,
            layout: Layout {
                point_embed,
                query_embed,
                uniform_attn,
                enc_ff,
                enc_layers,
                latent_norm,
                mean_head,
                logvar_head,
                dec_in,
                dec_layers,
                dec_attn,
                dec_ff,
                out_norm,
                out,
                salient_attn,
            },
        })
    }

    pub fn is_dual(&self) -> bool {
        self.layout.salient_attn.is_some()
    }

    /// The single-path model obtained by dropping the salient block.
    pub fn without_salient_path(&self) -> Self {
        let mut single = Self::new(self.config, false, 0).expect("config already validated");
        let n = single.params.len();
        single
            .params
            .load_values(self.params.values()[..n].to_vec())
            .expect("shared prefix has identical layout");
        single
    }

    /// Scalar size of the salient cross-attention block.
    pub fn salient_block_size(&self) -> usize {
        self.params.scalar_count_with_prefix(SALIENT_PREFIX)
    }

    /// Featurize a sampled cloud: split it by label, pick `n_s` query points
    /// with [`build_ps`] (half from each side) and route the key/value rows to
    /// the attention paths this model has.
    pub fn prepare_input(&self, cloud: &SurfacePointCloud, n_s: usize, seed: u64) -> Result<EncoderInput> {
        let (p_u, p_a) = split_labels(cloud);
        if p_u.is_empty() {
            return Err(Error::InvalidArgument("encoder needs at least one uniform point".into()));
        }
        if n_s == 0 {
            return Err(Error::InvalidArgument("latent length must be at least 1".into()));
        }
        let n_s2 = n_s / 2;
        let ps = build_ps(&p_u, &p_a, n_s - n_s2, n_s2, seed)?;
        let f = self.config.frequencies;
        let normals = self.config.include_normals;
        let queries = point_features(&ps, f, normals);
        Ok(if self.is_dual() {
            EncoderInput {
                queries,
                uniform: point_features(&p_u, f, normals),
                salient: Some(point_features(&p_a, f, normals)),
            }
        } else {
            EncoderInput {
                queries,
                uniform: point_features(cloud, f, normals),
                salient: None,
            }
        })
    }

    fn check_width(&self, rows: &Array2<f64>, what: &str) -> Result<()> {
        let w = self.config.point_feature_width();
        if rows.ncols() != w {
            return Err(Error::DimensionMismatch(format!("{what} rows have width {}, expected {w}", rows.ncols())));
        }
        Ok(())
    }

    /// `C = CrossAttn_u(P_s, P_u) + CrossAttn_a(P_s, P_a)`, the salient term
    /// being absent when `P_a` is empty or the model is single-path.
    pub(crate) fn dual_encode_vars(&self, t: &mut Tape, input: &EncoderInput) -> (Var, Var) {
        let p = &self.params;
        let l = &self.layout;
        let heads = self.config.heads;
        let q_rows = t.input(input.queries.clone());
        let xs = linear(t, p, l.point_embed, q_rows);
        let u_rows = t.input(input.uniform.clone());
        let xu = linear(t, p, l.point_embed, u_rows);
        let c_u = attention(t, p, &l.uniform_attn, heads, xs, xu);
        let c = match (&l.salient_attn, &input.salient) {
            (Some(blk), Some(rows)) if rows.nrows() > 0 => {
                let a_rows = t.input(rows.clone());
                let xa = linear(t, p, l.point_embed, a_rows);
                let c_a = attention(t, p, blk, heads, xs, xa);
                t.add(c_u, c_a)
            }
            _ => c_u,
        };
        (xs, c)
    }

    /// The combined cross-attention feature `C` for already featurized rows.
    pub fn dual_encode(&self, input: &EncoderInput) -> Result<Array2<f64>> {
        self.validate_input(input)?;
        let mut t = Tape::new();
        let (_, c) = self.dual_encode_vars(&mut t, input);
        Ok(t.value(c).clone())
    }

    fn validate_input(&self, input: &EncoderInput) -> Result<()> {
        if input.queries.nrows() == 0 {
            return Err(Error::InvalidArgument("P_s is empty".into()));
        }
        if input.uniform.nrows() == 0 {
            return Err(Error::InvalidArgument("P_u is empty".into()));
        }
        self.check_width(&input.queries, "P_s")?;
        self.check_width(&input.uniform, "P_u")?;
        if let Some(a) = &input.salient {
            if a.nrows() > 0 {
                self.check_width(a, "P_a")?;
            }
        }
        Ok(())
    }

    fn encoder_vars(&self, t: &mut Tape, input: &EncoderInput) -> (Var, Var) {
        let p = &self.params;
        let l = &self.layout;
        let (xs, c) = self.dual_encode_vars(t, input);
        let mut h = t.add(xs, c);
        h = feed_forward_residual(t, p, &l.enc_ff, h);
        for layer in &l.enc_layers {
            h = self_layer_residual(t, p, layer, self.config.heads, h);
        }
        let h = norm(t, p, l.latent_norm, h);
        let mean = linear(t, p, l.mean_head, h);
        let logvar = linear(t, p, l.logvar_head, h);
        (mean, logvar)
    }

    fn decoder_vars(&self, t: &mut Tape, z: Var, queries: &[Vec3]) -> Var {
        let p = &self.params;
        let l = &self.layout;
        let mut y = linear(t, p, l.dec_in, z);
        for layer in &l.dec_layers {
            y = self_layer_residual(t, p, layer, self.config.heads, y);
        }
        let q_rows = t.input(embed_positions(queries, self.config.frequencies));
        let q = linear(t, p, l.query_embed, q_rows);
        let a = attention(t, p, &l.dec_attn, self.config.heads, q, y);
        let o = t.add(q, a);
        let o = feed_forward_residual(t, p, &l.dec_ff, o);
        let o = norm(t, p, l.out_norm, o);
        let o = linear(t, p, l.out, o);
        t.sigmoid(o)
    }

    /// Full forward pass. With `noise`, `z = mean + exp(½ logvar) ⊙ noise`;
    /// without, `z = mean`.
    pub(crate) fn forward_vars(&self, t: &mut Tape, input: &EncoderInput, queries: &[Vec3], noise: Option<&Array2<f64>>) -> ForwardVars {
        let (mean, logvar) = self.encoder_vars(t, input);
        let z = match noise {
            Some(eps) => {
                let half = t.scale(logvar, 0.5);
                let std = t.exp(half);
                let e = t.input(eps.clone());
                let jitter = t.mul(std, e);
                t.add(mean, jitter)
            }
            None => mean,
        };
        let occupancy = self.decoder_vars(t, z, queries);
        ForwardVars { occupancy, mean, logvar }
    }

    /// Latent code of prepared inputs. `noise_seed = None` returns `z = mean`.
    pub fn encode_input(&self, input: &EncoderInput, noise_seed: Option<u64>) -> Result<LatentCode> {
        self.validate_input(input)?;
        let mut t = Tape::new();
        let (mean, logvar) = self.encoder_vars(&mut t, input);
        let mean = t.value(mean).clone();
        let logvar = t.value(logvar).clone();
        if !mean.iter().chain(logvar.iter()).all(|v| v.is_finite()) {
            return Err(Error::NonFinite("encoder activations".into()));
        }
        let z = match noise_seed {
            Some(seed) => {
                let eps = standard_normal(mean.dim(), seed);
                &mean + &(logvar.mapv(|lv| (0.5 * lv).exp()) * eps)
            }
            None => mean.clone(),
        };
        Ok(LatentCode { z, mean, logvar })
    }

    /// Sample-to-latent: [`Self::prepare_input`] followed by the encoder.
    pub fn encode(&self, cloud: &SurfacePointCloud, n_s: usize, seed: u64, sample: bool) -> Result<LatentCode> {
        let input = self.prepare_input(cloud, n_s, seed)?;
        self.encode_input(&input, sample.then_some(seed))
    }

    /// Occupancy in `[0, 1]` for every query, evaluated in chunks.
    pub fn decode_occupancy(&self, z: &Array2<f64>, queries: &[Vec3]) -> Vec<f64> {
        const CHUNK: usize = 1024;
        let mut out = Vec::with_capacity(queries.len());
        for chunk in queries.chunks(CHUNK) {
            let mut t = Tape::new();
            let zv = t.input(z.clone());
            let o = self.decoder_vars(&mut t, zv, chunk);
            out.extend(t.value(o).iter().copied());
        }
        out
    }

    /// Loss `mean (Ô − O)² + kl_weight · KL` and its gradient for every slot.
    pub fn loss_and_grads(
        &self,
        input: &EncoderInput,
        queries: &[Vec3],
        labels: &[f64],
        kl_weight: f64,
        noise: Option<&Array2<f64>>,
    ) -> (LossParts, Vec<Array2<f64>>) {
        let mut t = Tape::new();
        let (total, parts) = self.loss_vars(&mut t, input, queries, labels, kl_weight, noise);
        let mut grads = self.params.zeros_like();
        for (id, g) in t.backward(total) {
            grads[id] = g;
        }
        (parts, grads)
    }

    /// Loss value alone, as used by finite differences.
    pub fn loss_value(&self, input: &EncoderInput, queries: &[Vec3], labels: &[f64], kl_weight: f64, noise: Option<&Array2<f64>>) -> LossParts {
        let mut t = Tape::new();
        self.loss_vars(&mut t, input, queries, labels, kl_weight, noise).1
    }

    fn loss_vars(
        &self,
        t: &mut Tape,
        input: &EncoderInput,
        queries: &[Vec3],
        labels: &[f64],
        kl_weight: f64,
        noise: Option<&Array2<f64>>,
    ) -> (Var, LossParts) {
        assert_eq!(queries.len(), labels.len(), "one label per query");
        let f = self.forward_vars(t, input, queries, noise);
        let target = t.input(Array2::from_shape_vec((labels.len(), 1), labels.to_vec()).expect("column"));
        let diff = t.sub(f.occupancy, target);
        let sq = t.square(diff);
        let mse = t.mean_all(sq);

        // Σ over channels, mean over entries == channels · mean over all.
        let mu2 = t.square(f.mean);
        let var = t.exp(f.logvar);
        let lv1 = t.add_scalar(f.logvar, 1.0);
        let s = t.add(mu2, var);
        let s = t.sub(s, lv1);
        let m = t.mean_all(s);
        let kl = t.scale(m, 0.5 * self.config.latent_width as f64);
        let weighted = t.scale(kl, kl_weight);
        let total = t.add(mse, weighted);

        let pred = t.value(f.occupancy);
        let correct = pred.iter().zip(labels).filter(|(p, l)| (**p > 0.5) == (**l > 0.5)).count();
        let parts = LossParts {
            total: t.scalar(total),
            mse: t.scalar(mse),
            kl: t.scalar(kl),
            accuracy: correct as f64 / labels.len().max(1) as f64,
        };
        (total, parts)
    }
}

/// Standard normal noise from a seeded stream.
pub fn standard_normal(dim: (usize, usize), seed: u64) -> Array2<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Array2::from_shape_simple_fn(dim, || StandardNormal.sample(&mut rng))
}

/// Standalone multi-head cross-attention with its own parameters.
#[derive(Debug, Clone)]
pub struct CrossAttention {
    pub heads: usize,
    pub params: ParamStore,
    pub block: AttentionBlock,
}

impl CrossAttention {
    pub fn new(width: usize, heads: usize, seed: u64) -> Result<Self> {
        if width == 0 || heads == 0 || width % heads != 0 {
            return Err(Error::InvalidArgument(format!("width {width} must be a positive multiple of heads {heads}")));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut params = ParamStore::new();
        let block = attention_block(&mut params, "attn", width, true, &mut rng);
        Ok(Self { heads, params, block })
    }

    pub fn width(&self) -> usize {
        self.params.get(self.block.q.w).nrows()
    }

    /// One output row per query row.
    pub fn forward(&self, queries: &Array2<f64>, keys_values: &Array2<f64>) -> Result<Array2<f64>> {
        let d = self.width();
        if queries.ncols() != d || keys_values.ncols() != d {
            return Err(Error::DimensionMismatch(format!(
                "attention width {d}, got queries {} and keys {}",
                queries.ncols(),
                keys_values.ncols()
            )));
        }
        if keys_values.nrows() == 0 {
            return Err(Error::DimensionMismatch("no key/value rows".into()));
        }
        let mut t = Tape::new();
        let q = t.input(queries.clone());
        let kv = t.input(keys_values.clone());
        let o = attention(&mut t, &self.params, &self.block, self.heads, q, kv);
        Ok(t.value(o).clone())
    }
}
