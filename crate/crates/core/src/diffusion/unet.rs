//! Small convolutional U-Net noise predictor with hand-written backward
//! passes.
//!
//! Input is the noisy layout concatenated with the condition image (6
//! channels); output is the 3-channel noise estimate. Each resolution level
//! has a block of two 3×3 convolutions with SiLU, and a sinusoidal timestep
//! embedding is projected to a per-channel bias added after the first
//! convolution of every block. Downsampling is a 2×2 stride-2 convolution,
//! upsampling a 2×2 stride-2 transposed convolution, and skip connections
//! concatenate encoder features into the decoder.
//!
//! All parameters live in one flat vector so the optimizer, checkpoints and
//! gradient checks can treat the model as a single array.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::tensor::{col2im3, im2col3, patchify2, silu, silu_backward, unpatchify2, Scalar, Tensor};
use super::{Denoiser, DiffusionError};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct UNetConfig {
    /// Channel width per resolution level, finest first.
    pub widths: Vec<usize>,
    pub in_channels: usize,
    pub out_channels: usize,
    /// Size of the sinusoidal timestep encoding.
    pub time_dim: usize,
    /// Hidden width of the timestep MLP.
    pub time_hidden: usize,
}

impl Default for UNetConfig {
    fn default() -> Self {
        UNetConfig {
            widths: vec![16, 32, 64],
            in_channels: 6,
            out_channels: 3,
            time_dim: 32,
            time_hidden: 64,
        }
    }
}

impl UNetConfig {
    pub fn with_widths(widths: &[usize]) -> Self {
        UNetConfig {
            widths: widths.to_vec(),
            ..UNetConfig::default()
        }
    }

    /// Images must be divisible by this on both sides.
    pub fn size_multiple(&self) -> usize {
        1 << (self.widths.len().saturating_sub(1))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum ConvKind {
    K3,
    Down2,
    Up2,
}

#[derive(Debug, Clone, Copy)]
struct Conv {
    kind: ConvKind,
    cin: usize,
    cout: usize,
    w: usize,
    b: usize,
}

impl Conv {
    fn weight_len(&self) -> usize {
        match self.kind {
            ConvKind::K3 => self.cout * self.cin * 9,
            ConvKind::Down2 | ConvKind::Up2 => self.cout * self.cin * 4,
        }
    }

    fn fan_in(&self) -> usize {
        match self.kind {
            ConvKind::K3 => self.cin * 9,
            ConvKind::Down2 => self.cin * 4,
            ConvKind::Up2 => self.cin,
        }
    }
}

#[derive(Debug, Clone, Copy)]
struct Dense {
    din: usize,
    dout: usize,
    w: usize,
    b: usize,
}

#[derive(Debug, Clone, Copy)]
struct Block {
    conv1: Conv,
    conv2: Conv,
    temb: Dense,
}

#[derive(Debug, Clone)]
struct Layout {
    time1: Dense,
    enc: Vec<Block>,
    downs: Vec<Conv>,
    ups: Vec<Conv>,
    dec: Vec<Block>,
    out: Conv,
    total: usize,
}

struct Alloc(usize);

impl Alloc {
    fn take(&mut self, n: usize) -> usize {
        let o = self.0;
        self.0 += n;
        o
    }

    fn conv(&mut self, kind: ConvKind, cin: usize, cout: usize) -> Conv {
        let mut c = Conv { kind, cin, cout, w: 0, b: 0 };
        c.w = self.take(c.weight_len());
        c.b = self.take(cout);
        c
    }

    fn dense(&mut self, din: usize, dout: usize) -> Dense {
        let w = self.take(din * dout);
        let b = self.take(dout);
        Dense { din, dout, w, b }
    }

    fn block(&mut self, cin: usize, cout: usize, hidden: usize) -> Block {
        Block {
            conv1: self.conv(ConvKind::K3, cin, cout),
            conv2: self.conv(ConvKind::K3, cout, cout),
            temb: self.dense(hidden, cout),
        }
    }
}

impl Layout {
    fn new(cfg: &UNetConfig) -> Layout {
        let w = &cfg.widths;
        let levels = w.len();
        let mut a = Alloc(0);
        let time1 = a.dense(cfg.time_dim, cfg.time_hidden);
        let mut enc = Vec::with_capacity(levels);
        let mut downs = Vec::new();
        for l in 0..levels {
            if l > 0 {
                downs.push(a.conv(ConvKind::Down2, w[l - 1], w[l]));
            }
            let cin = if l == 0 { cfg.in_channels } else { w[l] };
            enc.push(a.block(cin, w[l], cfg.time_hidden));
        }
        let mut ups = Vec::new();
        let mut dec = Vec::new();
        for l in 0..levels.saturating_sub(1) {
            ups.push(a.conv(ConvKind::Up2, w[l + 1], w[l]));
            dec.push(a.block(2 * w[l], w[l], cfg.time_hidden));
        }
        let out = a.conv(ConvKind::K3, w[0], cfg.out_channels);
        Layout {
            time1,
            enc,
            downs,
            ups,
            dec,
            out,
            total: a.0,
        }
    }
}

/// Per-sample activations kept for the backward pass.
pub struct Cache<T: Scalar> {
    emb: Vec<T>,
    time_pre: Vec<T>,
    time_hidden: Vec<T>,
    enc: Vec<BlockCache<T>>,
    down: Vec<ConvCache<T>>,
    up: Vec<ConvCache<T>>,
    dec: Vec<BlockCache<T>>,
    out: ConvCache<T>,
}

struct ConvCache<T: Scalar> {
    /// Patch matrix of the input (or the raw input for transposed convs).
    col: Vec<T>,
    in_shape: (usize, usize, usize),
    /// Pre-activation output, kept where an activation follows.
    pre: Vec<T>,
}

struct BlockCache<T: Scalar> {
    c1: ConvCache<T>,
    c2: ConvCache<T>,
}

#[derive(Debug, Clone)]
pub struct TinyUNet<T: Scalar = f32> {
    config: UNetConfig,
    layout: Layout,
    params: Vec<T>,
}

impl<T: Scalar> TinyUNet<T> {
    /// He-initialized weights, zero biases; the output convolution starts
    /// scaled down so the initial noise estimate is near zero.
    pub fn new(config: UNetConfig, seed: u64) -> Self {
        assert!(!config.widths.is_empty(), "at least one level");
        let layout = Layout::new(&config);
        let mut params = vec![T::ZERO; layout.total];
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut fill = |off: usize, len: usize, std: f64, params: &mut Vec<T>| {
            let n = Normal::new(0.0, std).expect("positive std");
            for p in &mut params[off..off + len] {
                *p = T::from_f64(n.sample(&mut rng));
            }
        };
        let he = |fan_in: usize| (2.0 / fan_in as f64).sqrt();
        fill(layout.time1.w, layout.time1.din * layout.time1.dout, (1.0 / layout.time1.din as f64).sqrt(), &mut params);
        let blocks: Vec<Block> = layout.enc.iter().chain(&layout.dec).copied().collect();
        for b in &blocks {
            fill(b.conv1.w, b.conv1.weight_len(), he(b.conv1.fan_in()), &mut params);
            fill(b.conv2.w, b.conv2.weight_len(), he(b.conv2.fan_in()), &mut params);
            fill(b.temb.w, b.temb.din * b.temb.dout, (1.0 / b.temb.din as f64).sqrt(), &mut params);
        }
        for c in layout.downs.iter().chain(&layout.ups) {
            fill(c.w, c.weight_len(), he(c.fan_in()), &mut params);
        }
        let o = layout.out;
        fill(o.w, o.weight_len(), 0.1 * he(o.fan_in()), &mut params);
        TinyUNet { config, layout, params }
    }

    pub fn from_params(config: UNetConfig, params: Vec<T>) -> Result<Self, DiffusionError> {
        let layout = Layout::new(&config);
        if params.len() != layout.total {
            return Err(DiffusionError::Checkpoint(format!(
                "expected {} parameters, found {}",
                layout.total,
                params.len()
            )));
        }
        Ok(TinyUNet { config, layout, params })
    }

    pub fn config(&self) -> &UNetConfig {
        &self.config
    }

    pub fn num_params(&self) -> usize {
        self.params.len()
    }

    pub fn params(&self) -> &[T] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [T] {
        &mut self.params
    }

    pub fn cast<U: Scalar>(&self) -> TinyUNet<U> {
        TinyUNet {
            config: self.config.clone(),
            layout: self.layout.clone(),
            params: self.params.iter().map(|p| U::from_f64(p.to_f64())).collect(),
        }
    }

    fn check_input(&self, x_t: &Tensor<T>, cond: &Tensor<T>) -> Result<(), DiffusionError> {
        x_t.same_shape(cond)?;
        let m = self.config.size_multiple();
        if x_t.channels + cond.channels != self.config.in_channels
            || x_t.height % m != 0
            || x_t.width % m != 0
        {
            return Err(DiffusionError::Input(format!(
                "input {:?} incompatible with {} input channels and size multiple {m}",
                x_t.shape(),
                self.config.in_channels
            )));
        }
        Ok(())
    }

    pub fn forward(&self, x_t: &Tensor<T>, cond: &Tensor<T>, t: usize) -> Result<Tensor<T>, DiffusionError> {
        Ok(self.forward_cached(x_t, cond, t)?.0)
    }

    pub fn forward_cached(&self, x_t: &Tensor<T>, cond: &Tensor<T>, t: usize) -> Result<(Tensor<T>, Cache<T>), DiffusionError> {
        self.check_input(x_t, cond)?;
        let lay = &self.layout;
        let p = &self.params;
        let levels = lay.enc.len();

        let emb = timestep_embedding::<T>(t, self.config.time_dim);
        let time_pre = dense_fwd(p, lay.time1, &emb);
        let time_hidden = silu(&time_pre);

        let x = x_t.concat_channels(cond);
        let mut enc_caches = Vec::with_capacity(levels);
        let mut down_caches = Vec::with_capacity(levels);
        let mut skips: Vec<Tensor<T>> = Vec::with_capacity(levels);
        for l in 0..levels {
            let input = if l == 0 {
                x.clone()
            } else {
                let (pre, cc) = conv_fwd(p, lay.downs[l - 1], &skips[l - 1]);
                let act = Tensor::from_vec(pre.channels, pre.height, pre.width, silu(&pre.data));
                down_caches.push(ConvCache { pre: pre.data, ..cc });
                act
            };
            let bias = dense_fwd(p, lay.enc[l].temb, &time_hidden);
            let (out, bc) = block_fwd(p, lay.enc[l], &input, &bias);
            enc_caches.push(bc);
            skips.push(out);
        }

        let mut cur = skips[levels - 1].clone();
        let mut up_caches: Vec<Option<ConvCache<T>>> = (0..levels - 1).map(|_| None).collect();
        let mut dec_caches: Vec<Option<BlockCache<T>>> = (0..levels - 1).map(|_| None).collect();
        for l in (0..levels - 1).rev() {
            let (u, uc) = conv_fwd(p, lay.ups[l], &cur);
            up_caches[l] = Some(uc);
            let cat = u.concat_channels(&skips[l]);
            let bias = dense_fwd(p, lay.dec[l].temb, &time_hidden);
            let (out, bc) = block_fwd(p, lay.dec[l], &cat, &bias);
            dec_caches[l] = Some(bc);
            cur = out;
        }
        let (out, oc) = conv_fwd(p, lay.out, &cur);
        let cache = Cache {
            emb,
            time_pre,
            time_hidden,
            enc: enc_caches,
            down: down_caches,
            up: up_caches.into_iter().map(|c| c.expect("filled")).collect(),
            dec: dec_caches.into_iter().map(|c| c.expect("filled")).collect(),
            out: oc,
        };
        Ok((out, cache))
    }

    /// Accumulate parameter gradients of a scalar loss with output gradient
    /// `dout` into `grads`.
    pub fn backward(&self, cache: &Cache<T>, dout: &Tensor<T>, grads: &mut [T]) {
        assert_eq!(grads.len(), self.params.len());
        let lay = &self.layout;
        let p = &self.params;
        let levels = lay.enc.len();
        let mut dhidden = vec![T::ZERO; self.config.time_hidden];

        let mut d_cur = conv_bwd(p, lay.out, &cache.out, dout, grads);
        let mut dskip: Vec<Option<Tensor<T>>> = (0..levels).map(|_| None).collect();
        for l in 0..levels - 1 {
            let (d_cat, dbias) = block_bwd(p, lay.dec[l], &cache.dec[l], &d_cur, grads);
            dense_bwd(p, lay.dec[l].temb, &cache.time_hidden, &dbias, grads, &mut dhidden);
            let (du, ds) = d_cat.split_channels(lay.ups[l].cout);
            dskip[l] = Some(ds);
            d_cur = conv_bwd(p, lay.ups[l], &cache.up[l], &du, grads);
        }
        // d_cur now holds the gradient at the bottleneck output
        let mut from_down: Option<Tensor<T>> = Some(d_cur);
        for l in (0..levels).rev() {
            let mut g = from_down.take().expect("gradient from the level above");
            if l + 1 < levels {
                if let Some(ds) = &dskip[l] {
                    for (a, b) in g.data.iter_mut().zip(&ds.data) {
                        *a += *b;
                    }
                }
            }
            let (d_in, dbias) = block_bwd(p, lay.enc[l], &cache.enc[l], &g, grads);
            dense_bwd(p, lay.enc[l].temb, &cache.time_hidden, &dbias, grads, &mut dhidden);
            if l > 0 {
                let dc = &cache.down[l - 1];
                let d_pre = silu_backward(&dc.pre, &d_in.data);
                let d_pre = Tensor::from_vec(d_in.channels, d_in.height, d_in.width, d_pre);
                from_down = Some(conv_bwd(p, lay.downs[l - 1], dc, &d_pre, grads));
            }
        }
        let d_time_pre = silu_backward(&cache.time_pre, &dhidden);
        let mut sink = vec![T::ZERO; lay.time1.din];
        dense_bwd(p, lay.time1, &cache.emb, &d_time_pre, grads, &mut sink);
    }

    /// Mean squared error between the predicted and true noise; gradients
    /// are added to `grads`.
    pub fn loss_and_grad(
        &self,
        x_t: &Tensor<T>,
        cond: &Tensor<T>,
        t: usize,
        eps: &Tensor<T>,
        grads: &mut [T],
    ) -> Result<f64, DiffusionError> {
        let (pred, cache) = self.forward_cached(x_t, cond, t)?;
        pred.same_shape(eps)?;
        if !pred.all_finite() {
            return Err(DiffusionError::NonFinite(format!("denoiser output at t={t}")));
        }
        let n = pred.len() as f64;
        let scale = T::from_f64(2.0 / n);
        let mut dout = pred.clone();
        for (d, e) in dout.data.iter_mut().zip(&eps.data) {
            *d = (*d - *e) * scale;
        }
        let loss = pred.mse(eps);
        self.backward(&cache, &dout, grads);
        Ok(loss)
    }
}

impl Denoiser for TinyUNet<f32> {
    fn predict(&self, x_t: &Tensor<f32>, cond: &Tensor<f32>, t: usize) -> Result<Tensor<f32>, DiffusionError> {
        self.forward(x_t, cond, t)
    }
}

/// Sinusoidal encoding of the integer step.
pub fn timestep_embedding<T: Scalar>(t: usize, dim: usize) -> Vec<T> {
    let half = dim / 2;
    let mut e = vec![T::ZERO; dim];
    for i in 0..half {
        let freq = (-(10000f64.ln()) * i as f64 / half.max(1) as f64).exp();
        let a = t as f64 * freq;
        e[i] = T::from_f64(a.sin());
        e[i + half] = T::from_f64(a.cos());
    }
    e
}

fn dense_fwd<T: Scalar>(p: &[T], d: Dense, x: &[T]) -> Vec<T> {
    let mut y = p[d.b..d.b + d.dout].to_vec();
    T::gemm(d.dout, d.din, 1, T::ONE, &p[d.w..d.w + d.din * d.dout], d.din as isize, 1, x, 1, 1, T::ONE, &mut y, 1, 1);
    y
}

fn dense_bwd<T: Scalar>(p: &[T], d: Dense, x: &[T], dy: &[T], grads: &mut [T], dx: &mut [T]) {
    for (g, v) in grads[d.b..d.b + d.dout].iter_mut().zip(dy) {
        *g += *v;
    }
    // dW += dy ⊗ x
    T::gemm(d.dout, 1, d.din, T::ONE, dy, 1, 1, x, 1, 1, T::ONE, &mut grads[d.w..d.w + d.din * d.dout], d.din as isize, 1);
    // dx += Wᵀ dy
    T::gemm(d.din, d.dout, 1, T::ONE, &p[d.w..d.w + d.din * d.dout], 1, d.din as isize, dy, 1, 1, T::ONE, dx, 1, 1);
}

fn conv_fwd<T: Scalar>(p: &[T], c: Conv, x: &Tensor<T>) -> (Tensor<T>, ConvCache<T>) {
    assert_eq!(x.channels, c.cin, "conv input channels");
    let (h, w) = (x.height, x.width);
    let wts = &p[c.w..c.w + c.weight_len()];
    let bias = &p[c.b..c.b + c.cout];
    let (out, col) = match c.kind {
        ConvKind::K3 | ConvKind::Down2 => {
            let (col, k, oh, ow) = if c.kind == ConvKind::K3 {
                (im2col3(x), c.cin * 9, h, w)
            } else {
                (patchify2(x), c.cin * 4, h / 2, w / 2)
            };
            let n = oh * ow;
            let mut out = Tensor::zeros(c.cout, oh, ow);
            for (co, b) in bias.iter().enumerate() {
                out.data[co * n..(co + 1) * n].fill(*b);
            }
            T::gemm(c.cout, k, n, T::ONE, wts, k as isize, 1, &col, n as isize, 1, T::ONE, &mut out.data, n as isize, 1);
            (out, col)
        }
        ConvKind::Up2 => {
            let n = h * w;
            let mut outcol = vec![T::ZERO; c.cout * 4 * n];
            T::gemm(c.cout * 4, c.cin, n, T::ONE, wts, c.cin as isize, 1, &x.data, n as isize, 1, T::ZERO, &mut outcol, n as isize, 1);
            let mut out = unpatchify2(&outcol, c.cout, 2 * h, 2 * w);
            let plane = 4 * n;
            for (co, b) in bias.iter().enumerate() {
                for v in &mut out.data[co * plane..(co + 1) * plane] {
                    *v += *b;
                }
            }
            (out, x.data.clone())
        }
    };
    (
        out,
        ConvCache {
            col,
            in_shape: x.shape(),
            pre: Vec::new(),
        },
    )
}

fn conv_bwd<T: Scalar>(p: &[T], c: Conv, cache: &ConvCache<T>, dy: &Tensor<T>, grads: &mut [T]) -> Tensor<T> {
    let (cin, h, w) = cache.in_shape;
    let wlen = c.weight_len();
    let plane = dy.plane();
    for co in 0..c.cout {
        let s = dy.data[co * plane..(co + 1) * plane]
            .iter()
            .fold(T::ZERO, |a, &v| a + v);
        grads[c.b + co] += s;
    }
    let wts = &p[c.w..c.w + wlen];
    match c.kind {
        ConvKind::K3 | ConvKind::Down2 => {
            let k = if c.kind == ConvKind::K3 { cin * 9 } else { cin * 4 };
            let n = plane;
            // dW[cout, k] += dy[cout, n] · colᵀ[n, k]
            T::gemm(c.cout, n, k, T::ONE, &dy.data, n as isize, 1, &cache.col, 1, n as isize, T::ONE, &mut grads[c.w..c.w + wlen], k as isize, 1);
            // dcol[k, n] = Wᵀ[k, cout] · dy[cout, n]
            let mut dcol = vec![T::ZERO; k * n];
            T::gemm(k, c.cout, n, T::ONE, wts, 1, k as isize, &dy.data, n as isize, 1, T::ZERO, &mut dcol, n as isize, 1);
            if c.kind == ConvKind::K3 {
                col2im3(&dcol, cin, h, w)
            } else {
                unpatchify2(&dcol, cin, h, w)
            }
        }
        ConvKind::Up2 => {
            let n = h * w;
            let dcol = patchify2(dy);
            // dW[cout*4, cin] += dcol[cout*4, n] · xᵀ[n, cin]
            T::gemm(c.cout * 4, n, c.cin, T::ONE, &dcol, n as isize, 1, &cache.col, 1, n as isize, T::ONE, &mut grads[c.w..c.w + wlen], c.cin as isize, 1);
            let mut dx = Tensor::zeros(cin, h, w);
            T::gemm(c.cin, c.cout * 4, n, T::ONE, wts, 1, c.cin as isize, &dcol, n as isize, 1, T::ZERO, &mut dx.data, n as isize, 1);
            dx
        }
    }
}

fn block_fwd<T: Scalar>(p: &[T], b: Block, x: &Tensor<T>, bias: &[T]) -> (Tensor<T>, BlockCache<T>) {
    let (mut pre1, mut c1) = conv_fwd(p, b.conv1, x);
    let plane = pre1.plane();
    for (co, bv) in bias.iter().enumerate() {
        for v in &mut pre1.data[co * plane..(co + 1) * plane] {
            *v += *bv;
        }
    }
    let a1 = Tensor::from_vec(pre1.channels, pre1.height, pre1.width, silu(&pre1.data));
    c1.pre = pre1.data;
    let (pre2, mut c2) = conv_fwd(p, b.conv2, &a1);
    let a2 = Tensor::from_vec(pre2.channels, pre2.height, pre2.width, silu(&pre2.data));
    c2.pre = pre2.data;
    (a2, BlockCache { c1, c2 })
}

/// Returns the input gradient and the gradient of the timestep bias.
fn block_bwd<T: Scalar>(p: &[T], b: Block, cache: &BlockCache<T>, dy: &Tensor<T>, grads: &mut [T]) -> (Tensor<T>, Vec<T>) {
    let (c, h, w) = (b.conv2.cout, dy.height, dy.width);
    let d2 = Tensor::from_vec(c, h, w, silu_backward(&cache.c2.pre, &dy.data));
    let da1 = conv_bwd(p, b.conv2, &cache.c2, &d2, grads);
    let d1 = Tensor::from_vec(b.conv1.cout, h, w, silu_backward(&cache.c1.pre, &da1.data));
    let plane = h * w;
    let dbias: Vec<T> = (0..b.conv1.cout)
        .map(|co| d1.data[co * plane..(co + 1) * plane].iter().fold(T::ZERO, |a, &v| a + v))
        .collect();
    let dx = conv_bwd(p, b.conv1, &cache.c1, &d1, grads);
    (dx, dbias)
}
