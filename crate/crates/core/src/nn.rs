//! Dense building blocks with explicit backward passes: layer norm, GELU,
//! a relation-aware transformer layer, and Adam.

use ndarray::{s, Array2, Axis, Zip};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type Mat = Array2<f64>;
/// Relation id for every ordered node pair.
pub type RelMatrix = Array2<usize>;

const LN_EPS: f64 = 1e-5;

/// A bundle of weight tensors exposed in a fixed order, so gradients
/// (which use the same type) and optimizer state line up tensor by tensor.
pub trait Parameters: Clone {
    fn tensors(&self) -> Vec<&Mat>;
    fn tensors_mut(&mut self) -> Vec<&mut Mat>;

    fn zeros_like(&self) -> Self {
        let mut z = self.clone();
        for t in z.tensors_mut() {
            t.fill(0.0);
        }
        z
    }

    fn accumulate(&mut self, other: &Self) {
        for (a, b) in self.tensors_mut().into_iter().zip(other.tensors()) {
            *a += b;
        }
    }

    fn scale(&mut self, c: f64) {
        for t in self.tensors_mut() {
            t.mapv_inplace(|x| x * c);
        }
    }

    fn all_finite(&self) -> bool {
        self.tensors().iter().all(|t| t.iter().all(|x| x.is_finite()))
    }

    fn param_count(&self) -> usize {
        self.tensors().iter().map(|t| t.len()).sum()
    }
}

pub fn uniform<R: Rng>(rng: &mut R, rows: usize, cols: usize, bound: f64) -> Mat {
    Array2::from_shape_simple_fn((rows, cols), || rng.random_range(-bound..bound))
}

pub fn gelu(u: f64) -> f64 {
    let k = (2.0 / std::f64::consts::PI).sqrt();
    0.5 * u * (1.0 + (k * (u + 0.044715 * u * u * u)).tanh())
}

pub fn gelu_grad(u: f64) -> f64 {
    let k = (2.0 / std::f64::consts::PI).sqrt();
    let t = (k * (u + 0.044715 * u * u * u)).tanh();
    0.5 * (1.0 + t) + 0.5 * u * (1.0 - t * t) * k * (1.0 + 3.0 * 0.044715 * u * u)
}

pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

fn softmax_rows(s: &mut Mat) {
    for mut row in s.rows_mut() {
        let max = row.fold(f64::NEG_INFINITY, |m, &x| m.max(x));
        row.mapv_inplace(|x| (x - max).exp());
        let sum = row.sum();
        row.mapv_inplace(|x| x / sum);
    }
}

#[derive(Clone, Debug)]
struct LnCache {
    xhat: Mat,
    inv_std: Vec<f64>,
}

fn layer_norm(x: &Mat, gain: &Mat, bias: &Mat) -> (Mat, LnCache) {
    let d = x.ncols() as f64;
    let mut xhat = x.clone();
    let mut inv_std = Vec::with_capacity(x.nrows());
    for mut row in xhat.rows_mut() {
        let mean = row.sum() / d;
        let var = row.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / d;
        let is = 1.0 / (var + LN_EPS).sqrt();
        row.mapv_inplace(|v| (v - mean) * is);
        inv_std.push(is);
    }
    let y = &xhat * &gain.row(0) + bias.row(0);
    (y, LnCache { xhat, inv_std })
}

fn layer_norm_backward(dy: &Mat, c: &LnCache, gain: &Mat, dgain: &mut Mat, dbias: &mut Mat) -> Mat {
    let d = dy.ncols() as f64;
    *dgain += &(dy * &c.xhat).sum_axis(Axis(0)).insert_axis(Axis(0));
    *dbias += &dy.sum_axis(Axis(0)).insert_axis(Axis(0));
    let dxhat = dy * &gain.row(0);
    let mut dx = Mat::zeros(dy.raw_dim());
    for i in 0..dy.nrows() {
        let g = dxhat.row(i);
        let xh = c.xhat.row(i);
        let mean_g = g.sum() / d;
        let mean_gx = g.dot(&xh) / d;
        let is = c.inv_std[i];
        Zip::from(dx.row_mut(i))
            .and(&g)
            .and(&xh)
            .for_each(|o, &gv, &xv| *o = is * (gv - mean_g - xv * mean_gx));
    }
    dx
}

/// Multi-head self-attention with relation-dependent key and value offsets,
/// followed by a GELU feed-forward block; both sublayers are residual and
/// post-normalized. Relation embeddings are shared by all heads.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Layer {
    pub wq: Mat,
    pub wk: Mat,
    pub wv: Mat,
    pub wo: Mat,
    pub w1: Mat,
    pub b1: Mat,
    pub w2: Mat,
    pub b2: Mat,
    pub ln1_gain: Mat,
    pub ln1_bias: Mat,
    pub ln2_gain: Mat,
    pub ln2_bias: Mat,
    /// `relations × d/heads`; empty when the layer is used without relations.
    pub rel_k: Mat,
    pub rel_v: Mat,
}

pub struct LayerCache {
    x: Mat,
    q: Mat,
    k: Mat,
    v: Mat,
    attn: Vec<Mat>,
    /// Per head, attention mass per relation id: `C[i, r] = Σ_j α_ij [rel_ij = r]`.
    rel_mass: Vec<Mat>,
    z: Mat,
    ln1: LnCache,
    h1: Mat,
    pre_act: Mat,
    act: Mat,
    ln2: LnCache,
}

impl LayerCache {
    /// Attention weights of one head, `N × N`.
    pub fn attention(&self, head: usize) -> &Mat {
        &self.attn[head]
    }
}

impl Layer {
    pub fn new<R: Rng>(rng: &mut R, d: usize, ff: usize, heads: usize, relations: usize, bound: f64) -> Self {
        let dh = d / heads;
        Layer {
            wq: uniform(rng, d, d, bound),
            wk: uniform(rng, d, d, bound),
            wv: uniform(rng, d, d, bound),
            wo: uniform(rng, d, d, bound),
            w1: uniform(rng, d, ff, bound),
            b1: Mat::zeros((1, ff)),
            w2: uniform(rng, ff, d, bound),
            b2: Mat::zeros((1, d)),
            ln1_gain: Mat::ones((1, d)),
            ln1_bias: Mat::zeros((1, d)),
            ln2_gain: Mat::ones((1, d)),
            ln2_bias: Mat::zeros((1, d)),
            rel_k: uniform(rng, relations, dh, bound),
            rel_v: uniform(rng, relations, dh, bound),
        }
    }

    pub fn dim(&self) -> usize {
        self.wq.nrows()
    }

    pub fn forward(&self, x: &Mat, rel: Option<&RelMatrix>, heads: usize) -> (Mat, LayerCache) {
        let n = x.nrows();
        let d = self.dim();
        let dh = d / heads;
        let scale = 1.0 / (dh as f64).sqrt();
        let q = x.dot(&self.wq);
        let k = x.dot(&self.wk);
        let v = x.dot(&self.wv);
        let mut z = Mat::zeros((n, d));
        let mut attn = Vec::with_capacity(heads);
        let mut rel_mass = Vec::new();
        for h in 0..heads {
            let cols = s![.., h * dh..(h + 1) * dh];
            let qh = q.slice(cols);
            let kh = k.slice(cols);
            let vh = v.slice(cols);
            let mut scores = qh.dot(&kh.t());
            if let Some(rel) = rel {
                let p = qh.dot(&self.rel_k.t());
                Zip::indexed(&mut scores).for_each(|(i, j), sc| *sc += p[[i, rel[[i, j]]]]);
            }
            scores.mapv_inplace(|x| x * scale);
            softmax_rows(&mut scores);
            let mut zh = scores.dot(&vh);
            if let Some(rel) = rel {
                let mut c = Mat::zeros((n, self.rel_v.nrows()));
                Zip::indexed(&scores).for_each(|(i, j), &a| c[[i, rel[[i, j]]]] += a);
                zh += &c.dot(&self.rel_v);
                rel_mass.push(c);
            }
            z.slice_mut(cols).assign(&zh);
            attn.push(scores);
        }
        let o = z.dot(&self.wo);
        let (h1, ln1) = layer_norm(&(x + &o), &self.ln1_gain, &self.ln1_bias);
        let pre_act = h1.dot(&self.w1) + self.b1.row(0);
        let act = pre_act.mapv(gelu);
        let f = act.dot(&self.w2) + self.b2.row(0);
        let (y, ln2) = layer_norm(&(&h1 + &f), &self.ln2_gain, &self.ln2_bias);
        let cache = LayerCache {
            x: x.clone(),
            q,
            k,
            v,
            attn,
            rel_mass,
            z,
            ln1,
            h1,
            pre_act,
            act,
            ln2,
        };
        (y, cache)
    }

    /// Accumulates parameter gradients into `grad` and returns the input gradient.
    pub fn backward(
        &self,
        dy: &Mat,
        cache: &LayerCache,
        rel: Option<&RelMatrix>,
        heads: usize,
        grad: &mut Layer,
    ) -> Mat {
        let d = self.dim();
        let dh = d / heads;
        let scale = 1.0 / (dh as f64).sqrt();

        let dsum2 = layer_norm_backward(dy, &cache.ln2, &self.ln2_gain, &mut grad.ln2_gain, &mut grad.ln2_bias);
        grad.w2 += &cache.act.t().dot(&dsum2);
        grad.b2 += &dsum2.sum_axis(Axis(0)).insert_axis(Axis(0));
        let dact = dsum2.dot(&self.w2.t());
        let dpre = &dact * &cache.pre_act.mapv(gelu_grad);
        grad.w1 += &cache.h1.t().dot(&dpre);
        grad.b1 += &dpre.sum_axis(Axis(0)).insert_axis(Axis(0));
        let dh1 = &dsum2 + &dpre.dot(&self.w1.t());

        let dsum1 = layer_norm_backward(&dh1, &cache.ln1, &self.ln1_gain, &mut grad.ln1_gain, &mut grad.ln1_bias);
        grad.wo += &cache.z.t().dot(&dsum1);
        let dz = dsum1.dot(&self.wo.t());

        let mut dq = Mat::zeros(cache.q.raw_dim());
        let mut dk = Mat::zeros(cache.k.raw_dim());
        let mut dv = Mat::zeros(cache.v.raw_dim());
        for h in 0..heads {
            let cols = s![.., h * dh..(h + 1) * dh];
            let a = &cache.attn[h];
            let dzh = dz.slice(cols);
            let mut da = dzh.dot(&cache.v.slice(cols).t());
            dv.slice_mut(cols).assign(&a.t().dot(&dzh));
            if let Some(rel) = rel {
                let c = &cache.rel_mass[h];
                grad.rel_v += &c.t().dot(&dzh);
                let dc = dzh.dot(&self.rel_v.t());
                Zip::indexed(&mut da).for_each(|(i, j), x| *x += dc[[i, rel[[i, j]]]]);
            }
            // softmax backward, with the score scale folded in
            let mut ds = a * &da;
            for (mut row, arow) in ds.rows_mut().into_iter().zip(a.rows()) {
                let dot = row.sum();
                Zip::from(&mut row)
                    .and(&arow)
                    .for_each(|x, &p| *x = (*x - p * dot) * scale);
            }
            let qh = cache.q.slice(cols);
            let mut dqh = ds.dot(&cache.k.slice(cols));
            dk.slice_mut(cols).assign(&ds.t().dot(&qh));
            if let Some(rel) = rel {
                let mut dp = Mat::zeros((ds.nrows(), self.rel_k.nrows()));
                Zip::indexed(&ds).for_each(|(i, j), &g| dp[[i, rel[[i, j]]]] += g);
                dqh += &dp.dot(&self.rel_k);
                grad.rel_k += &dp.t().dot(&qh);
            }
            dq.slice_mut(cols).assign(&dqh);
        }
        let x = &cache.x;
        grad.wq += &x.t().dot(&dq);
        grad.wk += &x.t().dot(&dk);
        grad.wv += &x.t().dot(&dv);
        dsum1 + dq.dot(&self.wq.t()) + dk.dot(&self.wk.t()) + dv.dot(&self.wv.t())
    }
}

impl Parameters for Layer {
    fn tensors(&self) -> Vec<&Mat> {
        vec![
            &self.wq,
            &self.wk,
            &self.wv,
            &self.wo,
            &self.w1,
            &self.b1,
            &self.w2,
            &self.b2,
            &self.ln1_gain,
            &self.ln1_bias,
            &self.ln2_gain,
            &self.ln2_bias,
            &self.rel_k,
            &self.rel_v,
        ]
    }

    fn tensors_mut(&mut self) -> Vec<&mut Mat> {
        vec![
            &mut self.wq,
            &mut self.wk,
            &mut self.wv,
            &mut self.wo,
            &mut self.w1,
            &mut self.b1,
            &mut self.w2,
            &mut self.b2,
            &mut self.ln1_gain,
            &mut self.ln1_bias,
            &mut self.ln2_gain,
            &mut self.ln2_bias,
            &mut self.rel_k,
            &mut self.rel_v,
        ]
    }
}

/// A stack of [`Layer`]s sharing a head count.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Stack {
    pub heads: usize,
    pub layers: Vec<Layer>,
}

impl Stack {
    pub fn new<R: Rng>(rng: &mut R, cfg: StackConfig, bound: f64) -> Self {
        Stack {
            heads: cfg.heads,
            layers: (0..cfg.layers)
                .map(|_| Layer::new(rng, cfg.dim, cfg.ff_dim, cfg.heads, cfg.relations, bound))
                .collect(),
        }
    }

    /// Runs every layer, failing on the first non-finite output.
    pub fn forward(&self, x: &Mat, rel: Option<&RelMatrix>) -> Result<(Mat, Vec<LayerCache>)> {
        let mut h = x.clone();
        let mut caches = Vec::with_capacity(self.layers.len());
        for (i, layer) in self.layers.iter().enumerate() {
            let (out, cache) = layer.forward(&h, rel, self.heads);
            if !out.iter().all(|v| v.is_finite()) {
                return Err(Error::NonFinite {
                    what: format!("output of layer {i}"),
                    step: i,
                });
            }
            caches.push(cache);
            h = out;
        }
        Ok((h, caches))
    }

    pub fn backward(&self, dy: &Mat, caches: &[LayerCache], rel: Option<&RelMatrix>, grad: &mut Stack) -> Mat {
        let mut d = dy.clone();
        for (i, layer) in self.layers.iter().enumerate().rev() {
            d = layer.backward(&d, &caches[i], rel, self.heads, &mut grad.layers[i]);
        }
        d
    }
}

impl Parameters for Stack {
    fn tensors(&self) -> Vec<&Mat> {
        self.layers.iter().flat_map(|l| l.tensors()).collect()
    }

    fn tensors_mut(&mut self) -> Vec<&mut Mat> {
        self.layers.iter_mut().flat_map(|l| l.tensors_mut()).collect()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct StackConfig {
    pub dim: usize,
    pub ff_dim: usize,
    pub heads: usize,
    pub layers: usize,
    pub relations: usize,
}

impl StackConfig {
    pub fn validate(&self) -> Result<()> {
        if self.dim == 0 || self.heads == 0 || !self.dim.is_multiple_of(self.heads) {
            return Err(Error::Dimension(format!(
                "model dimension {} must be a positive multiple of the head count {}",
                self.dim, self.heads
            )));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        AdamConfig {
            lr: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

pub struct Adam {
    cfg: AdamConfig,
    step: i32,
    m: Vec<Mat>,
    v: Vec<Mat>,
}

impl Adam {
    pub fn new<P: Parameters>(params: &P, cfg: AdamConfig) -> Self {
        let zeros: Vec<Mat> = params.tensors().iter().map(|t| Mat::zeros(t.raw_dim())).collect();
        Adam {
            cfg,
            step: 0,
            m: zeros.clone(),
            v: zeros,
        }
    }

    pub fn step<P: Parameters>(&mut self, params: &mut P, grad: &P) {
        self.step += 1;
        let AdamConfig { lr, beta1, beta2, eps } = self.cfg;
        let c1 = 1.0 - beta1.powi(self.step);
        let c2 = 1.0 - beta2.powi(self.step);
        for (((p, g), m), v) in params
            .tensors_mut()
            .into_iter()
            .zip(grad.tensors())
            .zip(&mut self.m)
            .zip(&mut self.v)
        {
            Zip::from(p).and(g).and(m).and(v).for_each(|p, &g, m, v| {
                *m = beta1 * *m + (1.0 - beta1) * g;
                *v = beta2 * *v + (1.0 - beta2) * g * g;
                *p -= lr * (*m / c1) / ((*v / c2).sqrt() + eps);
            });
        }
    }
}

/// Norm-wise relative difference between an analytic and a numeric gradient tensor.
pub fn relative_error(analytic: &Mat, numeric: &Mat) -> f64 {
    let diff = (analytic - numeric).mapv(|x| x * x).sum().sqrt();
    let scale = analytic
        .mapv(|x| x * x)
        .sum()
        .sqrt()
        .max(numeric.mapv(|x| x * x).sum().sqrt());
    if scale < 1e-12 {
        diff
    } else {
        diff / scale
    }
}
