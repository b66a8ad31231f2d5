//! Small residual conv net with one temporal mixing stage.
//!
//! ```text
//! x ─ conv_in ─┬─ block 0 ─ temporal ─ block 1 ─ … ─ silu ─ conv_out ─ eps
//!              │  block b: h + conv2(silu(conv1(silu(h)) + emb_b(e)))
//!              │  temporal: h + tconv(silu(h))
//! ```
//!
//! Spatial convolutions are 3x3 per frame with circular padding and
//! dilation `2^b` in block `b`. The temporal stage is a width-3 convolution
//! along frames (zero padded) applied at every pixel. `e` concatenates
//! sinusoidal timestep features with a one-hot class vector whose last slot
//! is the null class. Activations are stored channel-major,
//! `[channel][frame][row][col]`.

use serde::{Deserialize, Serialize};

use super::real::Real;
use crate::error::{Error, Result};
use crate::tensorio::{RngState, Shape, VideoTensor};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NetConfig {
    pub frames: usize,
    pub channels: usize,
    pub height: usize,
    pub width: usize,
    pub hidden: usize,
    pub res_blocks: usize,
    /// Length of the sinusoidal timestep embedding (even).
    pub time_features: usize,
    /// Number of real classes; one extra null class is always added.
    pub classes: usize,
    /// Largest accepted timestep `T`.
    pub timesteps: usize,
}

impl NetConfig {
    pub fn shape(&self) -> Shape {
        Shape {
            frames: self.frames,
            channels: self.channels,
            height: self.height,
            width: self.width,
        }
    }

    pub fn cond_features(&self) -> usize {
        self.time_features + self.classes + 1
    }

    pub fn validate(&self) -> Result<()> {
        self.shape().validate()?;
        if self.hidden == 0 || self.res_blocks == 0 {
            return Err(Error::param("model", "hidden width and block count must be positive"));
        }
        if self.time_features == 0 || !self.time_features.is_multiple_of(2) {
            return Err(Error::param("time_features", "must be a positive even number"));
        }
        let max_dilation = 1usize << (self.res_blocks - 1);
        if max_dilation >= self.height.max(2) || max_dilation >= self.width.max(2) {
            return Err(Error::param("res_blocks", "dilation would exceed the frame size"));
        }
        if self.timesteps == 0 {
            return Err(Error::param("timesteps", "must be positive"));
        }
        Ok(())
    }
}

/// Name, shape and offset of one parameter tensor in the flat vector.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ParamEntry {
    pub name: String,
    pub shape: Vec<usize>,
    pub offset: usize,
}

impl ParamEntry {
    pub fn len(&self) -> usize {
        self.shape.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Kernel {
    Spatial { dilation: usize },
    Temporal,
}

impl Kernel {
    fn taps(self) -> usize {
        match self {
            Kernel::Spatial { .. } => 9,
            Kernel::Temporal => 3,
        }
    }
}

#[derive(Debug, Clone, Copy)]
struct Conv {
    w: usize,
    b: usize,
    cin: usize,
    cout: usize,
    kernel: Kernel,
}

impl Conv {
    fn fan_in(&self) -> usize {
        self.cin * self.kernel.taps()
    }
}

#[derive(Debug, Clone, Copy)]
struct Linear {
    w: usize,
    b: usize,
    inputs: usize,
    outputs: usize,
}

#[derive(Debug, Clone, Copy)]
struct Block {
    conv1: Conv,
    emb: Linear,
    conv2: Conv,
}

#[derive(Debug, Clone)]
struct Layout {
    conv_in: Conv,
    blocks: Vec<Block>,
    temporal: Conv,
    conv_out: Conv,
    entries: Vec<ParamEntry>,
    total: usize,
}

impl Layout {
    fn new(cfg: &NetConfig) -> Self {
        let mut entries = Vec::new();
        let mut total = 0usize;
        let mut alloc = |name: String, shape: Vec<usize>| {
            let offset = total;
            total += shape.iter().product::<usize>();
            entries.push(ParamEntry { name, shape, offset });
            offset
        };
        let mut conv = |name: &str, cin: usize, cout: usize, kernel: Kernel| {
            let kshape = match kernel {
                Kernel::Spatial { .. } => vec![cout, cin, 3, 3],
                Kernel::Temporal => vec![cout, cin, 3],
            };
            let w = alloc(format!("{name}.weight"), kshape);
            let b = alloc(format!("{name}.bias"), vec![cout]);
            Conv { w, b, cin, cout, kernel }
        };
        let c = cfg.hidden;
        let conv_in = conv("conv_in", cfg.channels, c, Kernel::Spatial { dilation: 1 });
        let mut blocks = Vec::new();
        let mut temporal = None;
        for i in 0..cfg.res_blocks {
            let dilation = 1 << i;
            let conv1 = conv(&format!("block{i}.conv1"), c, c, Kernel::Spatial { dilation });
            let conv2 = conv(&format!("block{i}.conv2"), c, c, Kernel::Spatial { dilation });
            blocks.push((conv1, conv2));
            if i == 0 {
                temporal = Some(conv("temporal", c, c, Kernel::Temporal));
            }
        }
        let conv_out = conv("conv_out", c, cfg.channels, Kernel::Spatial { dilation: 1 });
        let blocks = blocks
            .into_iter()
            .enumerate()
            .map(|(i, (conv1, conv2))| {
                let e = cfg.cond_features();
                let w = alloc(format!("block{i}.emb.weight"), vec![c, e]);
                let b = alloc(format!("block{i}.emb.bias"), vec![c]);
                Block {
                    conv1,
                    emb: Linear {
                        w,
                        b,
                        inputs: e,
                        outputs: c,
                    },
                    conv2,
                }
            })
            .collect();
        Layout {
            conv_in,
            blocks,
            temporal: temporal.expect("at least one block"),
            conv_out,
            entries,
            total,
        }
    }
}

#[derive(Debug, Clone, Copy)]
struct Geo {
    frames: usize,
    height: usize,
    width: usize,
}

impl Geo {
    fn plane(&self) -> usize {
        self.height * self.width
    }

    fn positions(&self) -> usize {
        self.frames * self.plane()
    }
}

#[cfg(test)]
fn im2col<T: Real>(kernel: Kernel, x: &[T], cin: usize, g: Geo) -> Vec<T> {
    let mut col = Vec::new();
    im2col_into(kernel, x, cin, g, &mut col);
    col
}

/// Patch matrix `[cin * taps, positions]` written into a reused buffer.
fn im2col_into<T: Real>(kernel: Kernel, x: &[T], cin: usize, g: Geo, col: &mut Vec<T>) {
    let p = g.positions();
    col.clear();
    col.resize(cin * kernel.taps() * p, T::zero());
    match kernel {
        Kernel::Spatial { dilation } => {
            let d = dilation as isize;
            for ci in 0..cin {
                for ky in 0..3 {
                    let dy = (ky as isize - 1) * d;
                    for kx in 0..3 {
                        let shift = ((kx as isize - 1) * d).rem_euclid(g.width as isize) as usize;
                        let row = (ci * 9 + ky * 3 + kx) * p;
                        for f in 0..g.frames {
                            for h in 0..g.height {
                                let hs = (h as isize + dy).rem_euclid(g.height as isize) as usize;
                                let src = &x[ci * p + f * g.plane() + hs * g.width..][..g.width];
                                let dst = &mut col[row + f * g.plane() + h * g.width..][..g.width];
                                dst[..g.width - shift].copy_from_slice(&src[shift..]);
                                dst[g.width - shift..].copy_from_slice(&src[..shift]);
                            }
                        }
                    }
                }
            }
        }
        Kernel::Temporal => {
            let plane = g.plane();
            for ci in 0..cin {
                for k in 0..3 {
                    let row = (ci * 3 + k) * p;
                    for f in 0..g.frames {
                        let fs = f as isize + k as isize - 1;
                        if fs < 0 || fs >= g.frames as isize {
                            continue;
                        }
                        let src = &x[ci * p + fs as usize * plane..][..plane];
                        col[row + f * plane..][..plane].copy_from_slice(src);
                    }
                }
            }
        }
    }
}

/// Adjoint of [`im2col`].
fn col2im<T: Real>(kernel: Kernel, col: &[T], cin: usize, g: Geo) -> Vec<T> {
    let p = g.positions();
    let mut x = vec![T::zero(); cin * p];
    match kernel {
        Kernel::Spatial { dilation } => {
            let d = dilation as isize;
            for ci in 0..cin {
                for ky in 0..3 {
                    let dy = (ky as isize - 1) * d;
                    for kx in 0..3 {
                        let shift = ((kx as isize - 1) * d).rem_euclid(g.width as isize) as usize;
                        let row = (ci * 9 + ky * 3 + kx) * p;
                        for f in 0..g.frames {
                            for h in 0..g.height {
                                let hs = (h as isize + dy).rem_euclid(g.height as isize) as usize;
                                let src = &col[row + f * g.plane() + h * g.width..][..g.width];
                                let dst = &mut x[ci * p + f * g.plane() + hs * g.width..][..g.width];
                                for (a, &b) in dst[shift..].iter_mut().zip(&src[..g.width - shift]) {
                                    *a += b;
                                }
                                for (a, &b) in dst[..shift].iter_mut().zip(&src[g.width - shift..]) {
                                    *a += b;
                                }
                            }
                        }
                    }
                }
            }
        }
        Kernel::Temporal => {
            let plane = g.plane();
            for ci in 0..cin {
                for k in 0..3 {
                    let row = (ci * 3 + k) * p;
                    for f in 0..g.frames {
                        let fs = f as isize + k as isize - 1;
                        if fs < 0 || fs >= g.frames as isize {
                            continue;
                        }
                        let dst = &mut x[ci * p + fs as usize * plane..][..plane];
                        for (a, &b) in dst.iter_mut().zip(&col[row + f * plane..][..plane]) {
                            *a += b;
                        }
                    }
                }
            }
        }
    }
    x
}

fn sigmoid<T: Real>(x: T) -> T {
    T::one() / (T::one() + (-x).exp())
}

fn silu<T: Real>(x: &[T]) -> Vec<T> {
    x.iter().map(|&v| v * sigmoid(v)).collect()
}

/// `dy * silu'(x)` accumulated into `out`.
fn silu_backward_into<T: Real>(x: &[T], dy: &[T], out: &mut [T]) {
    for ((o, &v), &g) in out.iter_mut().zip(x).zip(dy) {
        let s = sigmoid(v);
        *o += g * s * (T::one() + v * (T::one() - s));
    }
}

#[derive(Debug, Default)]
struct BlockTape<T> {
    h_in: Vec<T>,
    col1: Vec<T>,
    c1: Vec<T>,
    col2: Vec<T>,
}

/// Intermediate values kept by a training forward pass.
#[derive(Debug, Default)]
pub struct Tape<T> {
    e: Vec<T>,
    col_in: Vec<T>,
    blocks: Vec<BlockTape<T>>,
    ht_in: Vec<T>,
    col_t: Vec<T>,
    h_final: Vec<T>,
    col_out: Vec<T>,
}

#[derive(Debug, Clone)]
pub struct Network<T: Real> {
    config: NetConfig,
    layout: Layout,
    params: Vec<T>,
}

impl<T: Real> PartialEq for Network<T> {
    fn eq(&self, other: &Self) -> bool {
        self.config == other.config && self.params == other.params
    }
}

/// Sinusoidal timestep features: `sin(t w_i)` then `cos(t w_i)` with
/// `w_i = 10000^(-i / (n/2))`.
pub fn timestep_features(t: usize, n: usize) -> Vec<f64> {
    let half = n / 2;
    let freqs: Vec<f64> = (0..half)
        .map(|i| (-(10000f64.ln()) * i as f64 / half as f64).exp())
        .collect();
    let mut out: Vec<f64> = freqs.iter().map(|w| (t as f64 * w).sin()).collect();
    out.extend(freqs.iter().map(|w| (t as f64 * w).cos()));
    out
}

impl<T: Real> Network<T> {
    /// Fresh network. Hidden layers use `N(0, 1/fan_in)` weights, the output
    /// convolution starts at zero.
    pub fn new(config: NetConfig, seed: u64) -> Result<Self> {
        config.validate()?;
        let layout = Layout::new(&config);
        let mut params = vec![T::zero(); layout.total];
        let mut rng = RngState::substream(seed, "init");
        let mut fill = |offset: usize, len: usize, std: f64| {
            for v in &mut params[offset..offset + len] {
                *v = T::of(rng.next_normal() * std);
            }
        };
        let mut convs = vec![layout.conv_in, layout.temporal];
        for b in &layout.blocks {
            convs.push(b.conv1);
            convs.push(b.conv2);
            fill(b.emb.w, b.emb.inputs * b.emb.outputs, (1.0 / b.emb.inputs as f64).sqrt());
        }
        for c in convs {
            fill(c.w, c.cout * c.fan_in(), (1.0 / c.fan_in() as f64).sqrt());
        }
        Ok(Network {
            config,
            layout,
            params,
        })
    }

    pub fn from_params(config: NetConfig, params: Vec<T>) -> Result<Self> {
        config.validate()?;
        let layout = Layout::new(&config);
        if params.len() != layout.total {
            return Err(Error::LengthMismatch {
                expected: layout.total,
                actual: params.len(),
            });
        }
        Ok(Network {
            config,
            layout,
            params,
        })
    }

    pub fn config(&self) -> &NetConfig {
        &self.config
    }

    pub fn entries(&self) -> &[ParamEntry] {
        &self.layout.entries
    }

    pub fn params(&self) -> &[T] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [T] {
        &mut self.params
    }

    pub fn num_params(&self) -> usize {
        self.params.len()
    }

    pub fn cast<U: Real>(&self) -> Network<U> {
        Network {
            config: self.config,
            layout: self.layout.clone(),
            params: self.params.iter().map(|v| U::of(v.as_f64())).collect(),
        }
    }

    fn geo(&self) -> Geo {
        Geo {
            frames: self.config.frames,
            height: self.config.height,
            width: self.config.width,
        }
    }

    /// Conditioning vector for timestep `t` and optional class.
    pub fn cond_vector(&self, t: usize, class: Option<usize>) -> Result<Vec<T>> {
        if t == 0 || t > self.config.timesteps {
            return Err(Error::TimestepOutOfRange {
                t,
                max: self.config.timesteps,
            });
        }
        let slot = match class {
            Some(c) if c >= self.config.classes => {
                return Err(Error::param(
                    "class",
                    format!("class {c} out of range 0..{}", self.config.classes),
                ))
            }
            Some(c) => c,
            None => self.config.classes,
        };
        let mut e: Vec<T> = timestep_features(t, self.config.time_features)
            .into_iter()
            .map(T::of)
            .collect();
        e.extend((0..=self.config.classes).map(|i| if i == slot { T::one() } else { T::zero() }));
        Ok(e)
    }

    fn conv(&self, c: &Conv, x: &[T], col: &mut Vec<T>) -> Vec<T> {
        let g = self.geo();
        let p = g.positions();
        im2col_into(c.kernel, x, c.cin, g, col);
        let mut y = vec![T::zero(); c.cout * p];
        for (o, row) in y.chunks_exact_mut(p).enumerate() {
            row.fill(self.params[c.b + o]);
        }
        let k = c.fan_in();
        T::gemm(c.cout, k, p, &self.params[c.w..c.w + c.cout * k], (k as isize, 1), col, (p as isize, 1), T::one(), &mut y);
        y
    }

    /// Accumulates weight and bias gradients and returns the input gradient.
    fn conv_backward(&self, c: &Conv, col: &[T], dy: &[T], grads: &mut [T], need_input: bool) -> Option<Vec<T>> {
        let g = self.geo();
        let p = g.positions();
        let k = c.fan_in();
        T::gemm(c.cout, p, k, dy, (p as isize, 1), col, (1, p as isize), T::one(), &mut grads[c.w..c.w + c.cout * k]);
        for (o, row) in dy.chunks_exact(p).enumerate() {
            grads[c.b + o] += row.iter().copied().sum::<T>();
        }
        if !need_input {
            return None;
        }
        let mut dcol = vec![T::zero(); k * p];
        T::gemm(k, c.cout, p, &self.params[c.w..c.w + c.cout * k], (1, k as isize), dy, (p as isize, 1), T::zero(), &mut dcol);
        Some(col2im(c.kernel, &dcol, c.cin, g))
    }

    fn emb(&self, l: &Linear, e: &[T]) -> Vec<T> {
        (0..l.outputs)
            .map(|o| {
                let w = &self.params[l.w + o * l.inputs..][..l.inputs];
                self.params[l.b + o] + w.iter().zip(e).map(|(&a, &b)| a * b).sum::<T>()
            })
            .collect()
    }

    fn run(&self, x: &[T], e: &[T], mut tape: Option<&mut Tape<T>>) -> Vec<T> {
        let p = self.geo().positions();
        let mut scratch = Vec::new();
        macro_rules! col {
            ($($field:tt)+) => {
                match tape.as_deref_mut() {
                    Some(tp) => &mut tp.$($field)+,
                    None => &mut scratch,
                }
            };
        }
        if let Some(tp) = tape.as_deref_mut() {
            tp.e.clear();
            tp.e.extend_from_slice(e);
            tp.blocks.resize_with(self.layout.blocks.len(), Default::default);
        }
        let mut h = self.conv(&self.layout.conv_in, x, col!(col_in));
        for (i, b) in self.layout.blocks.iter().enumerate() {
            let mut c1 = self.conv(&b.conv1, &silu(&h), col!(blocks[i].col1));
            for (row, v) in c1.chunks_exact_mut(p).zip(self.emb(&b.emb, e)) {
                row.iter_mut().for_each(|x| *x += v);
            }
            let c2 = self.conv(&b.conv2, &silu(&c1), col!(blocks[i].col2));
            if let Some(tp) = tape.as_deref_mut() {
                let bt = &mut tp.blocks[i];
                bt.h_in.clear();
                bt.h_in.extend_from_slice(&h);
                bt.c1 = c1;
            }
            for (a, d) in h.iter_mut().zip(&c2) {
                *a += *d;
            }
            if i == 0 {
                let ct = self.conv(&self.layout.temporal, &silu(&h), col!(col_t));
                if let Some(tp) = tape.as_deref_mut() {
                    tp.ht_in.clear();
                    tp.ht_in.extend_from_slice(&h);
                }
                for (a, d) in h.iter_mut().zip(&ct) {
                    *a += *d;
                }
            }
        }
        let out = self.conv(&self.layout.conv_out, &silu(&h), col!(col_out));
        if let Some(tp) = tape {
            tp.h_final = h;
        }
        out
    }

    /// Forward pass on a channel-major input.
    pub fn forward(&self, x: &[T], e: &[T]) -> Vec<T> {
        self.run(x, e, None)
    }

    /// Forward pass that records what [`Network::backward`] needs. The tape's
    /// buffers are reused across calls.
    pub fn forward_with_tape(&self, x: &[T], e: &[T], tape: &mut Tape<T>) -> Vec<T> {
        self.run(x, e, Some(tape))
    }

    /// Backpropagates `d_out` through the recorded pass, accumulating into
    /// `grads` (same layout as the parameters).
    pub fn backward(&self, tape: &Tape<T>, d_out: &[T], grads: &mut [T]) {
        assert_eq!(grads.len(), self.params.len());
        let p = self.geo().positions();
        let lay = &self.layout;
        let d_act = self.conv_backward(&lay.conv_out, &tape.col_out, d_out, grads, true).unwrap();
        let mut dh = vec![T::zero(); d_act.len()];
        silu_backward_into(&tape.h_final, &d_act, &mut dh);
        for (i, b) in lay.blocks.iter().enumerate().rev() {
            if i == 0 {
                let d_at = self.conv_backward(&lay.temporal, &tape.col_t, &dh, grads, true).unwrap();
                silu_backward_into(&tape.ht_in, &d_at, &mut dh);
            }
            let bt = &tape.blocks[i];
            let d_a2 = self.conv_backward(&b.conv2, &bt.col2, &dh, grads, true).unwrap();
            let mut d_c1 = vec![T::zero(); d_a2.len()];
            silu_backward_into(&bt.c1, &d_a2, &mut d_c1);
            for (o, row) in d_c1.chunks_exact(p).enumerate() {
                let g: T = row.iter().copied().sum();
                grads[b.emb.b + o] += g;
                let gw = &mut grads[b.emb.w + o * b.emb.inputs..][..b.emb.inputs];
                for (w, &ev) in gw.iter_mut().zip(&tape.e) {
                    *w += g * ev;
                }
            }
            let d_a1 = self.conv_backward(&b.conv1, &bt.col1, &d_c1, grads, true).unwrap();
            silu_backward_into(&bt.h_in, &d_a1, &mut dh);
        }
        self.conv_backward(&lay.conv_in, &tape.col_in, &dh, grads, false);
    }

    /// `[F, C, H, W]` tensor to channel-major scalars.
    pub fn to_channel_major(&self, v: &VideoTensor) -> Result<Vec<T>> {
        v.ensure_shape(self.config.shape())?;
        let s = v.shape();
        let plane = s.plane_len();
        let mut out = vec![T::zero(); s.numel()];
        for f in 0..s.frames {
            for c in 0..s.channels {
                let src = &v.data()[s.index(f, c, 0, 0)..][..plane];
                for (o, &x) in out[(c * s.frames + f) * plane..][..plane].iter_mut().zip(src) {
                    *o = T::of(f64::from(x));
                }
            }
        }
        Ok(out)
    }

    pub fn from_channel_major(&self, x: &[T]) -> Result<VideoTensor> {
        let s = self.config.shape();
        let plane = s.plane_len();
        let mut out = vec![0.0f32; s.numel()];
        for f in 0..s.frames {
            for c in 0..s.channels {
                let dst = &mut out[s.index(f, c, 0, 0)..][..plane];
                for (o, &v) in dst.iter_mut().zip(&x[(c * s.frames + f) * plane..][..plane]) {
                    *o = v.as_f64() as f32;
                }
            }
        }
        VideoTensor::new(s, out)
    }

    pub fn predict(&self, z_t: &VideoTensor, t: usize, cond: Option<usize>) -> Result<VideoTensor> {
        let e = self.cond_vector(t, cond)?;
        let x = self.to_channel_major(z_t)?;
        self.from_channel_major(&self.forward(&x, &e))
    }

    /// Mean squared error against `target` and its gradient, scaled by
    /// `scale`, accumulated into `grads`.
    pub fn loss_and_grad(&self, x: &[T], e: &[T], target: &[T], scale: f64, grads: &mut [T]) -> f64 {
        self.loss_and_grad_with(x, e, target, scale, grads, &mut Tape::default())
    }

    pub fn loss_and_grad_with(
        &self,
        x: &[T],
        e: &[T],
        target: &[T],
        scale: f64,
        grads: &mut [T],
        tape: &mut Tape<T>,
    ) -> f64 {
        let out = self.forward_with_tape(x, e, tape);
        let n = out.len() as f64;
        let mut loss = 0.0;
        let k = T::of(2.0 * scale / n);
        let d_out: Vec<T> = out
            .iter()
            .zip(target)
            .map(|(&o, &y)| {
                let d = o - y;
                loss += d.as_f64() * d.as_f64();
                k * d
            })
            .collect();
        self.backward(tape, &d_out, grads);
        loss / n
    }

    pub fn loss(&self, x: &[T], e: &[T], target: &[T]) -> f64 {
        let out = self.forward(x, e);
        out.iter()
            .zip(target)
            .map(|(&o, &y)| (o - y).as_f64().powi(2))
            .sum::<f64>()
            / out.len() as f64
    }
}

/// The epsilon-prediction network used for sampling.
pub type ToyDenoiser = Network<f32>;

impl crate::sampler::EpsModel for Network<f32> {
    fn shape(&self) -> Shape {
        self.config.shape()
    }

    fn predict_eps(&self, z_t: &VideoTensor, t: usize, cond: Option<usize>) -> Result<VideoTensor> {
        self.predict(z_t, t, cond)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) fn tiny_config() -> NetConfig {
        NetConfig {
            frames: 3,
            channels: 1,
            height: 6,
            width: 5,
            hidden: 4,
            res_blocks: 2,
            time_features: 4,
            classes: 2,
            timesteps: 100,
        }
    }

    #[test]
    fn im2col_and_col2im_are_adjoint() {
        let g = Geo {
            frames: 3,
            height: 5,
            width: 6,
        };
        let mut rng = RngState::new(1);
        for kernel in [Kernel::Spatial { dilation: 1 }, Kernel::Spatial { dilation: 2 }, Kernel::Temporal] {
            let cin = 2;
            let x: Vec<f64> = (0..cin * g.positions()).map(|_| rng.next_normal()).collect();
            let y: Vec<f64> = (0..cin * kernel.taps() * g.positions()).map(|_| rng.next_normal()).collect();
            let ax = im2col(kernel, &x, cin, g);
            let aty = col2im(kernel, &y, cin, g);
            let lhs: f64 = ax.iter().zip(&y).map(|(a, b)| a * b).sum();
            let rhs: f64 = x.iter().zip(&aty).map(|(a, b)| a * b).sum();
            assert!((lhs - rhs).abs() < 1e-9, "{kernel:?}: {lhs} vs {rhs}");
        }
    }

    #[test]
    fn spatial_im2col_wraps_around() {
        let g = Geo {
            frames: 1,
            height: 2,
            width: 3,
        };
        let x: Vec<f64> = (0..6).map(f64::from).collect();
        let col = im2col(Kernel::Spatial { dilation: 1 }, &x, 1, g);
        // tap (ky=1, kx=2) reads the right neighbour, wrapping at the edge
        let row = &col[5 * 6..6 * 6];
        assert_eq!(row, &[1.0, 2.0, 0.0, 4.0, 5.0, 3.0]);
    }

    #[test]
    fn zero_output_head_at_init() {
        let net = Network::<f32>::new(tiny_config(), 0).unwrap();
        let z = VideoTensor::filled(tiny_config().shape(), 0.3).unwrap();
        let out = net.predict(&z, 10, Some(1)).unwrap();
        assert!(out.data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn prediction_is_shape_preserving_and_deterministic() {
        let mut net = Network::<f32>::new(tiny_config(), 3).unwrap();
        let mut rng = RngState::new(4);
        for v in net.params_mut() {
            *v += 0.1 * rng.next_normal() as f32;
        }
        let z = crate::tensorio::gaussian_tensor(tiny_config().shape(), &mut rng).unwrap();
        let a = net.predict(&z, 50, None).unwrap();
        let b = net.predict(&z, 50, None).unwrap();
        assert_eq!(a.shape(), z.shape());
        assert_eq!(a, b);
        assert!(a.data().iter().all(|v| v.is_finite()));
    }

    #[test]
    fn rejects_bad_inputs() {
        let net = Network::<f32>::new(tiny_config(), 0).unwrap();
        let z = VideoTensor::zeros(tiny_config().shape()).unwrap();
        assert!(matches!(net.predict(&z, 0, None), Err(Error::TimestepOutOfRange { .. })));
        assert!(matches!(net.predict(&z, 101, None), Err(Error::TimestepOutOfRange { .. })));
        assert!(net.predict(&z, 1, Some(2)).is_err());
        let other = VideoTensor::zeros(Shape::new(3, 1, 6, 6).unwrap()).unwrap();
        assert!(matches!(net.predict(&other, 1, None), Err(Error::ShapeMismatch { .. })));
    }

    #[test]
    fn layout_covers_every_parameter_once() {
        let net = Network::<f32>::new(tiny_config(), 0).unwrap();
        let mut covered = vec![0u8; net.num_params()];
        for e in net.entries() {
            for v in &mut covered[e.offset..e.offset + e.len()] {
                *v += 1;
            }
        }
        assert!(covered.iter().all(|&c| c == 1));
    }

    #[test]
    fn timestep_features_layout() {
        let f = timestep_features(3, 4);
        assert_eq!(f.len(), 4);
        assert!((f[0] - 3f64.sin()).abs() < 1e-15);
        assert!((f[2] - 3f64.cos()).abs() < 1e-15);
        assert!((f[1] - (3.0 * 0.01f64).sin()).abs() < 1e-15);
    }

    #[test]
    fn analytic_gradients_match_finite_differences() {
        let cfg = tiny_config();
        let mut net = Network::<f64>::new(cfg, 11).unwrap();
        let mut rng = RngState::new(12);
        for v in net.params_mut() {
            *v += 0.2 * rng.next_normal();
        }
        let n = cfg.shape().numel();
        let x: Vec<f64> = (0..n).map(|_| rng.next_normal()).collect();
        let target: Vec<f64> = (0..n).map(|_| rng.next_normal()).collect();
        let e = net.cond_vector(37, Some(1)).unwrap();
        let mut grads = vec![0.0; net.num_params()];
        net.loss_and_grad(&x, &e, &target, 1.0, &mut grads);

        let picks = (net.num_params() / 100).max(40);
        let h = 1e-3;
        let mut worst = 0.0f64;
        for _ in 0..picks {
            let i = rng.next_below(net.num_params());
            let orig = net.params()[i];
            net.params_mut()[i] = orig + h;
            let up = net.loss(&x, &e, &target);
            net.params_mut()[i] = orig - h;
            let down = net.loss(&x, &e, &target);
            net.params_mut()[i] = orig;
            let numeric = (up - down) / (2.0 * h);
            let rel = (numeric - grads[i]).abs() / numeric.abs().max(grads[i].abs()).max(1e-6);
            worst = worst.max(rel);
        }
        assert!(worst <= 1e-2, "worst relative error {worst}");
    }
}
