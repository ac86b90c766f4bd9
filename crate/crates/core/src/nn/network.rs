//! Convolution + dense network with hand-written reverse-mode gradients.
//!
//! Batches are processed in fixed-size chunks. Each chunk runs its own GEMMs
//! and produces its own gradient set; chunk gradients are then summed in chunk
//! order, so results do not depend on how many threads ran the chunks.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nn::scalar::gemm;
use crate::nn::{ParamSet, Scalar, Tensor};
use crate::parallel;

/// Samples per chunk in batched forward/backward passes.
pub const CHUNK: usize = 32;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    Relu,
    Tanh,
}

impl Activation {
    #[inline]
    fn apply<T: Scalar>(self, x: T) -> T {
        match self {
            Activation::Relu => x.max(T::zero()),
            Activation::Tanh => x.tanh(),
        }
    }

    /// Derivative expressed through the activation output.
    #[inline]
    fn grad_from_output<T: Scalar>(self, y: T) -> T {
        match self {
            Activation::Relu => {
                if y > T::zero() {
                    T::one()
                } else {
                    T::zero()
                }
            }
            Activation::Tanh => T::one() - y * y,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Head {
    /// Emits `(mean, log_std)` for each action dimension.
    GaussianPolicy { action_dim: usize },
    /// Emits a single state-action value.
    QValue,
}

impl Head {
    pub fn output_width(&self) -> usize {
        match *self {
            Head::GaussianPolicy { action_dim } => 2 * action_dim,
            Head::QValue => 1,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConvSpec {
    pub out_channels: usize,
    pub kernel: usize,
    pub stride: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct InputShape {
    pub channels: usize,
    pub height: usize,
    pub width: usize,
}

impl InputShape {
    pub fn numel(&self) -> usize {
        self.channels * self.height * self.width
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct NetworkSpec {
    pub input: InputShape,
    /// Width of a vector concatenated after the convolutional features
    /// (the action, for critics).
    pub extra_inputs: usize,
    pub conv: Vec<ConvSpec>,
    /// Hidden dense widths; the output layer is appended from `head`.
    pub dense: Vec<usize>,
    pub activation: Activation,
    pub head: Head,
}

/// Number of action dimensions: steering and speed.
pub const ACTION_DIM: usize = 2;

impl NetworkSpec {
    /// Three stride-2 convolutions followed by three dense layers.
    pub fn policy(input: InputShape) -> Self {
        Self {
            input,
            extra_inputs: 0,
            conv: default_convs(),
            dense: vec![128, 64],
            activation: Activation::Relu,
            head: Head::GaussianPolicy {
                action_dim: ACTION_DIM,
            },
        }
    }

    pub fn critic(input: InputShape) -> Self {
        Self {
            input,
            extra_inputs: ACTION_DIM,
            conv: default_convs(),
            dense: vec![128, 64],
            activation: Activation::Relu,
            head: Head::QValue,
        }
    }

    pub fn output_width(&self) -> usize {
        self.head.output_width()
    }

    pub fn validate(&self) -> Result<Layout> {
        Layout::build(self)
    }
}

fn default_convs() -> Vec<ConvSpec> {
    [8, 16, 16]
        .into_iter()
        .map(|out_channels| ConvSpec {
            out_channels,
            kernel: 3,
            stride: 2,
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ConvGeom {
    pub in_c: usize,
    pub in_h: usize,
    pub in_w: usize,
    pub out_c: usize,
    pub out_h: usize,
    pub out_w: usize,
    pub kernel: usize,
    pub stride: usize,
    pub pad: usize,
}

impl ConvGeom {
    fn patch(&self) -> usize {
        self.in_c * self.kernel * self.kernel
    }

    fn out_plane(&self) -> usize {
        self.out_h * self.out_w
    }
}

/// Derived layer dimensions of a [`NetworkSpec`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Layout {
    pub convs: Vec<ConvGeom>,
    /// Flattened convolutional feature width (without extra inputs).
    pub features: usize,
    /// `(in, out)` for every dense layer including the output layer.
    pub dense: Vec<(usize, usize)>,
}

impl Layout {
    fn build(spec: &NetworkSpec) -> Result<Self> {
        let InputShape {
            channels,
            height,
            width,
        } = spec.input;
        if channels == 0 || height == 0 || width == 0 {
            return Err(Error::shape("input dimensions must be positive"));
        }
        let (mut c, mut h, mut w) = (channels, height, width);
        let mut convs = Vec::new();
        for (i, cs) in spec.conv.iter().enumerate() {
            if cs.kernel == 0 || cs.kernel % 2 == 0 || cs.stride == 0 || cs.out_channels == 0 {
                return Err(Error::param(format!(
                    "conv{i}: kernel must be odd and positive, stride and channels positive"
                )));
            }
            let pad = cs.kernel / 2;
            if h + 2 * pad < cs.kernel || w + 2 * pad < cs.kernel {
                return Err(Error::shape(format!("conv{i}: input {h}x{w} smaller than kernel")));
            }
            let out_h = (h + 2 * pad - cs.kernel) / cs.stride + 1;
            let out_w = (w + 2 * pad - cs.kernel) / cs.stride + 1;
            convs.push(ConvGeom {
                in_c: c,
                in_h: h,
                in_w: w,
                out_c: cs.out_channels,
                out_h,
                out_w,
                kernel: cs.kernel,
                stride: cs.stride,
                pad,
            });
            c = cs.out_channels;
            h = out_h;
            w = out_w;
        }
        let features = c * h * w;
        let mut dense = Vec::new();
        let mut prev = features + spec.extra_inputs;
        for (i, &width) in spec.dense.iter().enumerate() {
            if width == 0 {
                return Err(Error::param(format!("dense{i}: width must be positive")));
            }
            dense.push((prev, width));
            prev = width;
        }
        dense.push((prev, spec.output_width()));
        Ok(Self {
            convs,
            features,
            dense,
        })
    }
}

/// Network definition plus its parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct Network<T> {
    spec: NetworkSpec,
    layout: Layout,
    params: ParamSet<T>,
}

struct ChunkCache<T> {
    n: usize,
    conv_cols: Vec<Vec<T>>,
    conv_out: Vec<Vec<T>>,
    dense_in: Vec<Vec<T>>,
    dense_out: Vec<Vec<T>>,
}

/// Activations retained by [`Network::forward`] for a later backward pass.
pub struct ForwardCache<T> {
    batch: usize,
    chunks: Vec<ChunkCache<T>>,
}

impl<T> ForwardCache<T> {
    pub fn batch(&self) -> usize {
        self.batch
    }
}

/// Which gradients a backward pass should produce.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BackwardWants {
    pub params: bool,
    pub extra_input: bool,
}

impl BackwardWants {
    pub const PARAMS: Self = Self {
        params: true,
        extra_input: false,
    };
    pub const EXTRA_INPUT: Self = Self {
        params: false,
        extra_input: true,
    };
    pub const BOTH: Self = Self {
        params: true,
        extra_input: true,
    };
}

#[derive(Debug, Clone)]
pub struct Gradients<T> {
    pub params: Option<ParamSet<T>>,
    pub extra_input: Option<Tensor<T>>,
}

impl<T: Scalar> Network<T> {
    /// Fan-in scaled uniform initialization, `U(-1/sqrt(fan_in), 1/sqrt(fan_in))`.
    pub fn init<R: Rng + ?Sized>(spec: NetworkSpec, rng: &mut R) -> Result<Self> {
        let layout = spec.validate()?;
        let mut params = ParamSet::new();
        let mut uniform = |shape: Vec<usize>, fan_in: usize| {
            let bound = 1.0 / (fan_in as f64).sqrt();
            let n: usize = shape.iter().product();
            let values = (0..n)
                .map(|_| T::of(rng.random_range(-bound..bound)))
                .collect();
            Tensor::new(shape, values).expect("consistent shape")
        };
        for (i, g) in layout.convs.iter().enumerate() {
            let fan_in = g.patch();
            params.push(
                format!("conv{i}.weight"),
                uniform(vec![g.out_c, g.in_c, g.kernel, g.kernel], fan_in),
            );
            params.push(format!("conv{i}.bias"), uniform(vec![g.out_c], fan_in));
        }
        for (i, &(fan_in, out)) in layout.dense.iter().enumerate() {
            params.push(format!("dense{i}.weight"), uniform(vec![out, fan_in], fan_in));
            params.push(format!("dense{i}.bias"), uniform(vec![out], fan_in));
        }
        Ok(Self {
            spec,
            layout,
            params,
        })
    }

    /// Build from explicit parameters, checking names and shapes.
    pub fn from_params(spec: NetworkSpec, params: ParamSet<T>) -> Result<Self> {
        let layout = spec.validate()?;
        let template = Self::zeros(spec.clone())?;
        template.params.check_compatible(&params)?;
        Ok(Self {
            spec,
            layout,
            params,
        })
    }

    /// All-zero parameters.
    pub fn zeros(spec: NetworkSpec) -> Result<Self> {
        let layout = spec.validate()?;
        let mut params = ParamSet::new();
        for (i, g) in layout.convs.iter().enumerate() {
            params.push(
                format!("conv{i}.weight"),
                Tensor::zeros(vec![g.out_c, g.in_c, g.kernel, g.kernel]),
            );
            params.push(format!("conv{i}.bias"), Tensor::zeros(vec![g.out_c]));
        }
        for (i, &(fan_in, out)) in layout.dense.iter().enumerate() {
            params.push(format!("dense{i}.weight"), Tensor::zeros(vec![out, fan_in]));
            params.push(format!("dense{i}.bias"), Tensor::zeros(vec![out]));
        }
        Ok(Self {
            spec,
            layout,
            params,
        })
    }

    pub fn spec(&self) -> &NetworkSpec {
        &self.spec
    }

    pub fn layout(&self) -> &Layout {
        &self.layout
    }

    pub fn params(&self) -> &ParamSet<T> {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut ParamSet<T> {
        &mut self.params
    }

    pub fn cast<U: Scalar>(&self) -> Network<U> {
        Network {
            spec: self.spec.clone(),
            layout: self.layout.clone(),
            params: self.params.cast(),
        }
    }

    fn conv_weight(&self, i: usize) -> &[T] {
        self.params.tensors()[2 * i].values()
    }

    fn conv_bias(&self, i: usize) -> &[T] {
        self.params.tensors()[2 * i + 1].values()
    }

    fn dense_weight(&self, j: usize) -> &[T] {
        self.params.tensors()[2 * (self.layout.convs.len() + j)].values()
    }

    fn dense_bias(&self, j: usize) -> &[T] {
        self.params.tensors()[2 * (self.layout.convs.len() + j) + 1].values()
    }

    /// Forward pass over a `N×C×H×W` batch (plus an `N×E` extra input for
    /// critics). Returns the `N×out` head output and the activation cache.
    pub fn forward(
        &self,
        batch: &Tensor<T>,
        extra: Option<&Tensor<T>>,
    ) -> Result<(Tensor<T>, ForwardCache<T>)> {
        let n = batch.rows();
        if n == 0 {
            return Err(Error::shape("forward: empty batch"));
        }
        let inp = self.spec.input;
        batch.check_shape(&[n, inp.channels, inp.height, inp.width], "forward input")?;
        match (self.spec.extra_inputs, extra) {
            (0, None) => {}
            (0, Some(_)) => return Err(Error::shape("forward: network takes no extra input")),
            (e, Some(x)) => x.check_shape(&[n, e], "forward extra input")?,
            (e, None) => return Err(Error::shape(format!("forward: missing {e}-wide extra input"))),
        }
        let n_chunks = n.div_ceil(CHUNK);
        let chunks = parallel::map_range(n_chunks, |ci| {
            let lo = ci * CHUNK;
            let hi = (lo + CHUNK).min(n);
            self.forward_chunk(batch, extra, lo, hi)
        });
        let out_w = self.spec.output_width();
        let mut out = Vec::with_capacity(n * out_w);
        for c in &chunks {
            out.extend_from_slice(c.dense_out.last().expect("output layer"));
        }
        let output = Tensor::new(vec![n, out_w], out)?;
        if !output.all_finite() {
            return Err(Error::numeric("forward produced non-finite output"));
        }
        Ok((output, ForwardCache { batch: n, chunks }))
    }

    fn forward_chunk(
        &self,
        batch: &Tensor<T>,
        extra: Option<&Tensor<T>>,
        lo: usize,
        hi: usize,
    ) -> ChunkCache<T> {
        let n = hi - lo;
        let inp = self.spec.input;
        let plane = inp.height * inp.width;
        // Channel-major layout [C, n, H, W] inside a chunk.
        let mut x = vec![T::zero(); inp.channels * n * plane];
        for b in 0..n {
            let row = batch.row(lo + b);
            for c in 0..inp.channels {
                let dst = (c * n + b) * plane;
                x[dst..dst + plane].copy_from_slice(&row[c * plane..(c + 1) * plane]);
            }
        }
        let mut conv_cols = Vec::with_capacity(self.layout.convs.len());
        let mut conv_out: Vec<Vec<T>> = Vec::with_capacity(self.layout.convs.len());
        for (i, g) in self.layout.convs.iter().enumerate() {
            let input: &[T] = if i == 0 { &x } else { conv_out[i - 1].as_slice() };
            let cols = im2col(input, g, n);
            let np = n * g.out_plane();
            let mut y = vec![T::zero(); g.out_c * np];
            gemm(
                false,
                false,
                g.out_c,
                g.patch(),
                np,
                T::one(),
                self.conv_weight(i),
                &cols,
                T::zero(),
                &mut y,
            );
            let bias = self.conv_bias(i);
            for (oc, chunk) in y.chunks_mut(np).enumerate() {
                let b = bias[oc];
                for v in chunk {
                    *v = self.spec.activation.apply(*v + b);
                }
            }
            conv_cols.push(cols);
            conv_out.push(y);
        }
        let x: &[T] = conv_out.last().map_or(&x, |y| y.as_slice());
        // Flatten to [n, features + extra].
        let (c, plane) = match self.layout.convs.last() {
            Some(g) => (g.out_c, g.out_plane()),
            None => (inp.channels, plane),
        };
        let e = self.spec.extra_inputs;
        let width = self.layout.features + e;
        let mut h = vec![T::zero(); n * width];
        for b in 0..n {
            for ch in 0..c {
                let src = (ch * n + b) * plane;
                let dst = b * width + ch * plane;
                h[dst..dst + plane].copy_from_slice(&x[src..src + plane]);
            }
            if let Some(extra) = extra {
                h[b * width + self.layout.features..(b + 1) * width]
                    .copy_from_slice(extra.row(lo + b));
            }
        }
        let last = self.layout.dense.len() - 1;
        let mut dense_in = Vec::with_capacity(self.layout.dense.len());
        let mut dense_out = Vec::with_capacity(self.layout.dense.len());
        for (j, &(fin, fout)) in self.layout.dense.iter().enumerate() {
            let mut y = vec![T::zero(); n * fout];
            gemm(
                false,
                true,
                n,
                fin,
                fout,
                T::one(),
                &h,
                self.dense_weight(j),
                T::zero(),
                &mut y,
            );
            let bias = self.dense_bias(j);
            for row in y.chunks_mut(fout) {
                for (v, &b) in row.iter_mut().zip(bias) {
                    *v = *v + b;
                    if j != last {
                        *v = self.spec.activation.apply(*v);
                    }
                }
            }
            dense_in.push(h);
            h = y.clone();
            dense_out.push(y);
        }
        ChunkCache {
            n,
            conv_cols,
            conv_out,
            dense_in,
            dense_out,
        }
    }

    /// Reverse pass for `upstream = dLoss/dOutput` (`N×out`).
    pub fn backward(
        &self,
        cache: &ForwardCache<T>,
        upstream: &Tensor<T>,
        wants: BackwardWants,
    ) -> Result<Gradients<T>> {
        if cache.chunks.is_empty() {
            return Err(Error::State("backward called without a forward cache".into()));
        }
        if cache.chunks.iter().any(|c| c.dense_out.len() != self.layout.dense.len()) {
            return Err(Error::State("forward cache belongs to another network".into()));
        }
        upstream.check_shape(&[cache.batch, self.spec.output_width()], "backward upstream")?;
        if wants.extra_input && self.spec.extra_inputs == 0 {
            return Err(Error::shape("backward: network has no extra input"));
        }
        let parts = parallel::map_range(cache.chunks.len(), |ci| {
            self.backward_chunk(&cache.chunks[ci], upstream, ci * CHUNK, wants)
        });
        let mut grads = Vec::with_capacity(parts.len());
        let mut extra = Vec::new();
        for (g, e) in parts {
            if let Some(g) = g {
                grads.push(g);
            }
            if let Some(e) = e {
                extra.extend(e);
            }
        }
        let params = if wants.params {
            let g = ParamSet::sum_ordered(grads)?;
            if !g.all_finite() {
                return Err(Error::numeric("backward produced non-finite gradients"));
            }
            Some(g)
        } else {
            None
        };
        let extra_input = if wants.extra_input {
            Some(Tensor::new(vec![cache.batch, self.spec.extra_inputs], extra)?)
        } else {
            None
        };
        Ok(Gradients {
            params,
            extra_input,
        })
    }

    fn backward_chunk(
        &self,
        cc: &ChunkCache<T>,
        upstream: &Tensor<T>,
        lo: usize,
        wants: BackwardWants,
    ) -> (Option<ParamSet<T>>, Option<Vec<T>>) {
        let n = cc.n;
        let n_conv = self.layout.convs.len();
        let mut grads = if wants.params {
            Some(ParamSet::zeros_like(&self.params))
        } else {
            None
        };
        let last = self.layout.dense.len() - 1;
        let out_w = self.spec.output_width();
        let mut d = upstream.values()[lo * out_w..(lo + n) * out_w].to_vec();
        for j in (0..=last).rev() {
            let (fin, fout) = self.layout.dense[j];
            if j != last {
                for (g, &y) in d.iter_mut().zip(&cc.dense_out[j]) {
                    *g = *g * self.spec.activation.grad_from_output(y);
                }
            }
            if let Some(grads) = grads.as_mut() {
                let t = grads.tensors_mut();
                gemm(
                    true,
                    false,
                    fout,
                    n,
                    fin,
                    T::one(),
                    &d,
                    &cc.dense_in[j],
                    T::one(),
                    t[2 * (n_conv + j)].values_mut(),
                );
                let db = t[2 * (n_conv + j) + 1].values_mut();
                for row in d.chunks(fout) {
                    for (acc, &v) in db.iter_mut().zip(row) {
                        *acc = *acc + v;
                    }
                }
            }
            let need_input_grad = j > 0 || wants.extra_input || (wants.params && n_conv > 0);
            if !need_input_grad {
                d = Vec::new();
                break;
            }
            let mut dx = vec![T::zero(); n * fin];
            gemm(
                false,
                false,
                n,
                fout,
                fin,
                T::one(),
                &d,
                self.dense_weight(j),
                T::zero(),
                &mut dx,
            );
            d = dx;
        }
        let features = self.layout.features;
        let e = self.spec.extra_inputs;
        let extra = if wants.extra_input {
            let mut out = Vec::with_capacity(n * e);
            for b in 0..n {
                out.extend_from_slice(&d[b * (features + e) + features..(b + 1) * (features + e)]);
            }
            Some(out)
        } else {
            None
        };
        let Some(mut grads) = grads else {
            return (None, extra);
        };
        if n_conv == 0 {
            return (Some(grads), extra);
        }
        // Un-flatten into [C, n, H, W].
        let g_last = self.layout.convs[n_conv - 1];
        let plane = g_last.out_plane();
        let mut dy = vec![T::zero(); g_last.out_c * n * plane];
        for b in 0..n {
            for ch in 0..g_last.out_c {
                let src = b * (features + e) + ch * plane;
                let dst = (ch * n + b) * plane;
                dy[dst..dst + plane].copy_from_slice(&d[src..src + plane]);
            }
        }
        for i in (0..n_conv).rev() {
            let g = self.layout.convs[i];
            let np = n * g.out_plane();
            for (v, &y) in dy.iter_mut().zip(&cc.conv_out[i]) {
                *v = *v * self.spec.activation.grad_from_output(y);
            }
            let t = grads.tensors_mut();
            gemm(
                false,
                true,
                g.out_c,
                np,
                g.patch(),
                T::one(),
                &dy,
                &cc.conv_cols[i],
                T::one(),
                t[2 * i].values_mut(),
            );
            let db = t[2 * i + 1].values_mut();
            for (oc, row) in dy.chunks(np).enumerate() {
                db[oc] = db[oc] + row.iter().copied().sum::<T>();
            }
            if i == 0 {
                break;
            }
            let mut dcols = vec![T::zero(); g.patch() * np];
            gemm(
                true,
                false,
                g.patch(),
                g.out_c,
                np,
                T::one(),
                self.conv_weight(i),
                &dy,
                T::zero(),
                &mut dcols,
            );
            dy = col2im(&dcols, &g, n);
        }
        (Some(grads), extra)
    }
}

/// `[C, n, H, W]` → `[C·K·K, n·OH·OW]` with zero padding.
fn im2col<T: Scalar>(x: &[T], g: &ConvGeom, n: usize) -> Vec<T> {
    let k = g.kernel;
    let plane = g.in_h * g.in_w;
    let mut cols = Vec::with_capacity(g.patch() * n * g.out_plane());
    for c in 0..g.in_c {
        for ky in 0..k {
            for kx in 0..k {
                let (ox_lo, ox_hi) = valid_range(kx, g.stride, g.pad, g.in_w, g.out_w);
                for b in 0..n {
                    let src = &x[(c * n + b) * plane..(c * n + b + 1) * plane];
                    for oy in 0..g.out_h {
                        let iy = (oy * g.stride + ky) as isize - g.pad as isize;
                        if iy < 0 || iy >= g.in_h as isize {
                            cols.resize(cols.len() + g.out_w, T::zero());
                            continue;
                        }
                        let src_row = &src[iy as usize * g.in_w..(iy as usize + 1) * g.in_w];
                        cols.resize(cols.len() + ox_lo, T::zero());
                        let start = ox_lo * g.stride + kx - g.pad;
                        cols.extend((0..ox_hi - ox_lo).map(|j| src_row[start + j * g.stride]));
                        cols.resize(cols.len() + g.out_w - ox_hi, T::zero());
                    }
                }
            }
        }
    }
    cols
}

/// Output columns `[lo, hi)` whose input column `ox*stride + kx - pad` is in bounds.
fn valid_range(kx: usize, stride: usize, pad: usize, in_w: usize, out_w: usize) -> (usize, usize) {
    let lo = pad.saturating_sub(kx).div_ceil(stride).min(out_w);
    // ox*stride + kx - pad <= in_w - 1
    let hi = if in_w + pad < kx + 1 {
        lo
    } else {
        ((in_w + pad - kx - 1) / stride + 1).clamp(lo, out_w)
    };
    (lo, hi)
}

/// Adjoint of [`im2col`].
fn col2im<T: Scalar>(cols: &[T], g: &ConvGeom, n: usize) -> Vec<T> {
    let k = g.kernel;
    let np = n * g.out_plane();
    let plane = g.in_h * g.in_w;
    let mut x = vec![T::zero(); g.in_c * n * plane];
    for c in 0..g.in_c {
        for ky in 0..k {
            for kx in 0..k {
                let r = (c * k + ky) * k + kx;
                let (ox_lo, ox_hi) = valid_range(kx, g.stride, g.pad, g.in_w, g.out_w);
                if ox_lo == ox_hi {
                    continue;
                }
                let src_row = &cols[r * np..(r + 1) * np];
                for b in 0..n {
                    let dst = &mut x[(c * n + b) * plane..(c * n + b + 1) * plane];
                    for oy in 0..g.out_h {
                        let iy = (oy * g.stride + ky) as isize - g.pad as isize;
                        if iy < 0 || iy >= g.in_h as isize {
                            continue;
                        }
                        let base = (b * g.out_h + oy) * g.out_w;
                        let start = ox_lo * g.stride + kx - g.pad;
                        let dst_row = &mut dst[iy as usize * g.in_w..(iy as usize + 1) * g.in_w];
                        for (j, &v) in src_row[base + ox_lo..base + ox_hi].iter().enumerate() {
                            let d = &mut dst_row[start + j * g.stride];
                            *d = *d + v;
                        }
                    }
                }
            }
        }
    }
    x
}
