//! Layers with explicit forward/backward passes.
//!
//! Each layer caches what its backward pass needs during a training-mode
//! forward. Gradients accumulate into [`Param::g`] until `zero_grad`.
//! Convolutions run as im2col + GEMM, parallel over samples in the forward
//! and input-gradient passes and over output channels in the weight-gradient
//! pass; both schedules fix the accumulation order per output element.

use super::{axpy, gemm::gemm, Rng, Scalar, Tensor};
use rayon::prelude::*;

/// A weight vector with its gradient accumulator.
#[derive(Clone, Debug)]
pub struct Param<F> {
    pub w: Vec<F>,
    pub g: Vec<F>,
}

impl<F: Scalar> Param<F> {
    pub fn new(w: Vec<F>) -> Self {
        let g = vec![F::zero(); w.len()];
        Param { w, g }
    }

    pub fn zeros(n: usize) -> Self {
        Param::new(vec![F::zero(); n])
    }

    pub fn zero_grad(&mut self) {
        self.g.fill(F::zero());
    }
}

pub trait Layer<F: Scalar>: Send {
    fn forward(&mut self, x: &Tensor<F>, train: bool) -> Tensor<F>;
    fn backward(&mut self, dy: &Tensor<F>) -> Tensor<F>;
    fn visit_params(&mut self, f: &mut dyn FnMut(&mut Param<F>)) {
        let _ = f;
    }
    /// Non-trainable state that checkpoints must carry (e.g. running stats).
    fn visit_buffers(&mut self, f: &mut dyn FnMut(&mut Vec<F>)) {
        let _ = f;
    }
    fn zero_grad(&mut self) {
        self.visit_params(&mut |p| p.zero_grad());
    }
}

// ---------------------------------------------------------------------------
// Convolution
// ---------------------------------------------------------------------------

#[derive(Clone, Copy)]
struct ConvGeom {
    cin: usize,
    cout: usize,
    k: usize,
    stride: usize,
    pad: usize,
    h: usize,
    w: usize,
    oh: usize,
    ow: usize,
    n: usize,
    /// Samples per GEMM group, sized so a group's im2col block stays in L2.
    group: usize,
}

impl ConvGeom {
    fn kdim(&self) -> usize {
        self.cin * self.k * self.k
    }
    fn ohw(&self) -> usize {
        self.oh * self.ow
    }
    fn group_count(&self) -> usize {
        self.n.div_ceil(self.group)
    }
    /// (first sample, samples in group) for group `gi`.
    fn group_span(&self, gi: usize) -> (usize, usize) {
        let start = gi * self.group;
        (start, self.group.min(self.n - start))
    }
    /// Width in elements of one (kdim or cout) row inside a group block.
    fn block_width(&self) -> usize {
        self.group * self.ohw()
    }
}

/// Fill the im2col block of one sample group: `kdim` densely packed rows of
/// `g_len * oh * ow` values, local-sample-major inside each row.
fn im2col_group<F: Scalar>(g: ConvGeom, gi: usize, x: &Tensor<F>, block: &mut [F]) {
    let (k, s, p) = (g.k, g.stride, g.pad);
    let (h, w, oh, ow, ohw) = (g.h, g.w, g.oh, g.ow, g.ohw());
    let (start, g_len) = g.group_span(gi);
    let width = g_len * ohw;
    let plane_len = h * w;
    for ci in 0..g.cin {
        for kh in 0..k {
            for kw in 0..k {
                let row = &mut block[((ci * k + kh) * k + kw) * width..][..width];
                for local in 0..g_len {
                    let plane =
                        &x.sample(start + local)[ci * plane_len..(ci + 1) * plane_len];
                    let dst_all = &mut row[local * ohw..(local + 1) * ohw];
                    for o_h in 0..oh {
                        let ih = (o_h * s + kh) as isize - p as isize;
                        let dst = &mut dst_all[o_h * ow..(o_h + 1) * ow];
                        if ih < 0 || ih as usize >= h {
                            dst.fill(F::zero());
                            continue;
                        }
                        let src = &plane[ih as usize * w..(ih as usize + 1) * w];
                        for (o_w, d) in dst.iter_mut().enumerate() {
                            let iw = (o_w * s + kw) as isize - p as isize;
                            *d = if iw < 0 || iw as usize >= w {
                                F::zero()
                            } else {
                                src[iw as usize]
                            };
                        }
                    }
                }
            }
        }
    }
}

/// Scatter-add one group's column gradients back onto its input samples.
fn col2im_group<F: Scalar>(g: ConvGeom, gi: usize, dcols_block: &[F], dx: &mut [F]) {
    let (k, s, p) = (g.k, g.stride, g.pad);
    let (h, w, oh, ow, ohw) = (g.h, g.w, g.oh, g.ow, g.ohw());
    let (_, g_len) = g.group_span(gi);
    let width = g_len * ohw;
    let sample_len = g.cin * h * w;
    for local in 0..g_len {
        let dst_sample = &mut dx[local * sample_len..(local + 1) * sample_len];
        for ci in 0..g.cin {
            let plane = &mut dst_sample[ci * h * w..(ci + 1) * h * w];
            for kh in 0..k {
                for kw in 0..k {
                    let row =
                        &dcols_block[((ci * k + kh) * k + kw) * width + local * ohw..][..ohw];
                    for o_h in 0..oh {
                        let ih = (o_h * s + kh) as isize - p as isize;
                        if ih < 0 || ih as usize >= h {
                            continue;
                        }
                        let dst = &mut plane[ih as usize * w..(ih as usize + 1) * w];
                        for (o_w, &v) in row[o_h * ow..(o_h + 1) * ow].iter().enumerate() {
                            let iw = (o_w * s + kw) as isize - p as isize;
                            if iw >= 0 && (iw as usize) < w {
                                dst[iw as usize] += v;
                            }
                        }
                    }
                }
            }
        }
    }
}

pub struct Conv2d<F> {
    pub cin: usize,
    pub cout: usize,
    pub k: usize,
    pub stride: usize,
    pub pad: usize,
    pub w: Param<F>, // cout x (cin*k*k)
    pub b: Param<F>, // cout
    in_shape: [usize; 4],
    cols: Vec<F>, // persistent im2col scratch, grouped blocks
    has_cache: bool,
}

impl<F: Scalar> Conv2d<F> {
    pub fn new(cin: usize, cout: usize, k: usize, stride: usize, pad: usize, rng: &mut Rng) -> Self {
        let fan_in = cin * k * k;
        let std = (2.0 / fan_in as f64).sqrt();
        let w = (0..cout * fan_in).map(|_| F::from_f64(rng.normal() * std)).collect();
        Conv2d {
            cin,
            cout,
            k,
            stride,
            pad,
            w: Param::new(w),
            b: Param::zeros(cout),
            in_shape: [0; 4],
            cols: Vec::new(),
            has_cache: false,
        }
    }

    fn geom(&self, shape: [usize; 4]) -> ConvGeom {
        let [n, _, h, w] = shape;
        let oh = (h + 2 * self.pad - self.k) / self.stride + 1;
        let ow = (w + 2 * self.pad - self.k) / self.stride + 1;
        let kdim = self.cin * self.k * self.k;
        // keep one group's im2col block around 256 KB
        let budget = 262_144 / (std::mem::size_of::<F>() * kdim * oh * ow);
        let group = budget.clamp(1, n.max(1));
        ConvGeom { cin: self.cin, cout: self.cout, k: self.k, stride: self.stride, pad: self.pad, h, w, oh, ow, n, group }
    }
}

impl<F: Scalar> Layer<F> for Conv2d<F> {
    fn forward(&mut self, x: &Tensor<F>, train: bool) -> Tensor<F> {
        let [n, cin, _, _] = x.shape;
        assert_eq!(cin, self.cin, "conv input channels");
        let g = self.geom(x.shape);
        let (kdim, ohw, width) = (g.kdim(), g.ohw(), g.block_width());
        let block = kdim * width;

        // every live slot is overwritten, so stale scratch contents are fine
        self.cols.resize(g.group_count() * block, F::zero());

        let mut out = Tensor::zeros([n, self.cout, g.oh, g.ow]);
        let weights = &self.w.w;
        let bias = &self.b.w;
        let cout = self.cout;
        let out_block = g.group * cout * ohw;
        out.data
            .par_chunks_mut(out_block)
            .zip(self.cols.par_chunks_mut(block))
            .enumerate()
            .for_each(|(gi, (out_slice, cols_block))| {
                im2col_group(g, gi, x, cols_block);
                let (_, g_len) = g.group_span(gi);
                let mut gemm_block = vec![F::zero(); cout * g_len * ohw];
                gemm(cout, kdim, g_len * ohw, weights, &cols_block[..kdim * g_len * ohw], &mut gemm_block);
                // bias + permute [co][local][ohw] -> [local][co][ohw]
                for local in 0..g_len {
                    let y_n = &mut out_slice[local * cout * ohw..(local + 1) * cout * ohw];
                    for co in 0..cout {
                        let src = &gemm_block[co * g_len * ohw + local * ohw..][..ohw];
                        let b = bias[co];
                        for (d, &v) in y_n[co * ohw..(co + 1) * ohw].iter_mut().zip(src) {
                            *d = v + b;
                        }
                    }
                }
            });

        let _ = train;
        self.in_shape = x.shape;
        self.has_cache = true;
        out
    }

    fn backward(&mut self, dy: &Tensor<F>) -> Tensor<F> {
        let g = self.geom(self.in_shape);
        let [dn, cout, _, _] = dy.shape;
        assert_eq!(dn, g.n);
        assert_eq!(cout, self.cout);
        assert!(self.has_cache, "backward without cached training forward");
        let (kdim, ohw, width) = (g.kdim(), g.ohw(), g.block_width());
        let block = kdim * width;
        let groups = g.group_count();
        let cols = &self.cols;
        let weights = &self.w.w;
        let dy_data = &dy.data;

        // per-group partial gradients, then a fixed-order reduction
        let mut dx = Tensor::zeros(self.in_shape);
        let dx_block = g.group * g.cin * g.h * g.w;

        let partials: Vec<(Vec<F>, Vec<F>)> = dx
            .data
            .par_chunks_mut(dx_block)
            .enumerate()
            .map(|(gi, dx_slice)| {
                let (start, g_len) = g.group_span(gi);
                let gw = g_len * ohw;
                let cols_block = &cols[gi * block..][..kdim * gw];
                // dy permuted to [co][local][ohw]
                let mut dyp = vec![F::zero(); cout * gw];
                for local in 0..g_len {
                    let i = start + local;
                    for co in 0..cout {
                        dyp[co * gw + local * ohw..co * gw + (local + 1) * ohw]
                            .copy_from_slice(&dy_data[(i * cout + co) * ohw..][..ohw]);
                    }
                }
                // partial dW = dyp * cols^T, partial db = row sums
                let mut pw = vec![F::zero(); cout * kdim];
                let mut pb = vec![F::zero(); cout];
                for co in 0..cout {
                    let dy_row = &dyp[co * gw..(co + 1) * gw];
                    let prow = &mut pw[co * kdim..(co + 1) * kdim];
                    for (kk, slot) in prow.iter_mut().enumerate() {
                        *slot = super::dot(dy_row, &cols_block[kk * gw..(kk + 1) * gw]);
                    }
                    pb[co] = super::vsum(dy_row);
                }
                // dcols = W^T * dyp, then scatter back to dx
                let mut dcols = vec![F::zero(); kdim * gw];
                for co in 0..cout {
                    let dy_row = &dyp[co * gw..(co + 1) * gw];
                    for kk in 0..kdim {
                        let wv = weights[co * kdim + kk];
                        if wv != F::zero() {
                            axpy(wv, dy_row, &mut dcols[kk * gw..(kk + 1) * gw]);
                        }
                    }
                }
                col2im_group(g, gi, &dcols, dx_slice);
                (pw, pb)
            })
            .collect();

        for (pw, pb) in &partials {
            for (gslot, &v) in self.w.g.iter_mut().zip(pw) {
                *gslot += v;
            }
            for (gslot, &v) in self.b.g.iter_mut().zip(pb) {
                *gslot += v;
            }
        }
        dx
    }

    fn visit_params(&mut self, f: &mut dyn FnMut(&mut Param<F>)) {
        f(&mut self.w);
        f(&mut self.b);
    }
}

// ---------------------------------------------------------------------------
// Normalization
// ---------------------------------------------------------------------------

pub struct BatchNorm2d<F> {
    pub c: usize,
    pub gamma: Param<F>,
    pub beta: Param<F>,
    pub running_mean: Vec<F>,
    pub running_var: Vec<F>,
    pub momentum: f64,
    pub eps: f64,
    xhat: Vec<F>,
    inv_std: Vec<F>,
    last_shape: [usize; 4],
    last_train: bool,
}

impl<F: Scalar> BatchNorm2d<F> {
    pub fn new(c: usize) -> Self {
        BatchNorm2d {
            c,
            gamma: Param::new(vec![F::one(); c]),
            beta: Param::zeros(c),
            running_mean: vec![F::zero(); c],
            running_var: vec![F::one(); c],
            momentum: 0.1,
            eps: 1e-5,
            xhat: Vec::new(),
            inv_std: Vec::new(),
            last_shape: [0; 4],
            last_train: false,
        }
    }
}

impl<F: Scalar> Layer<F> for BatchNorm2d<F> {
    fn forward(&mut self, x: &Tensor<F>, train: bool) -> Tensor<F> {
        let [n, c, h, w] = x.shape;
        assert_eq!(c, self.c);
        let hw = h * w;
        let m = n * hw;
        let mut out = Tensor::zeros(x.shape);
        self.last_shape = x.shape;
        self.last_train = train;

        if train {
            let mut xhat = vec![F::zero(); x.numel()];
            let mut inv_std = vec![F::zero(); c];
            let mut means = vec![F::zero(); c];
            for ch in 0..c {
                let mut sum = F::zero();
                let mut sq = F::zero();
                for i in 0..n {
                    for &v in &x.data[(i * c + ch) * hw..][..hw] {
                        sum += v;
                        sq += v * v;
                    }
                }
                let mf = F::from_f64(m as f64);
                let mean = sum / mf;
                let var = (sq / mf - mean * mean).max(F::zero());
                let istd = F::one() / (var + F::from_f64(self.eps)).sqrt();
                means[ch] = mean;
                inv_std[ch] = istd;
                // unbiased variance for the running estimate
                let unbiased = if m > 1 {
                    var * F::from_f64(m as f64 / (m as f64 - 1.0))
                } else {
                    var
                };
                let mom = F::from_f64(self.momentum);
                self.running_mean[ch] = (F::one() - mom) * self.running_mean[ch] + mom * mean;
                self.running_var[ch] = (F::one() - mom) * self.running_var[ch] + mom * unbiased;
            }
            out.data
                .chunks_mut(hw)
                .zip(xhat.chunks_mut(hw))
                .zip(x.data.chunks(hw))
                .enumerate()
                .for_each(|(idx, ((y_b, xh_b), x_b))| {
                    let ch = idx % c;
                    let (mean, istd) = (means[ch], inv_std[ch]);
                    let (g, bta) = (self.gamma.w[ch], self.beta.w[ch]);
                    for ((y, xh), &xv) in y_b.iter_mut().zip(xh_b.iter_mut()).zip(x_b) {
                        let z = (xv - mean) * istd;
                        *xh = z;
                        *y = g * z + bta;
                    }
                });
            self.xhat = xhat;
            self.inv_std = inv_std;
        } else {
            let mut xhat = vec![F::zero(); x.numel()];
            let mut inv_std = vec![F::zero(); c];
            for ch in 0..c {
                inv_std[ch] = F::one() / (self.running_var[ch] + F::from_f64(self.eps)).sqrt();
            }
            out.data
                .chunks_mut(hw)
                .zip(xhat.chunks_mut(hw))
                .zip(x.data.chunks(hw))
                .enumerate()
                .for_each(|(idx, ((y_b, xh_b), x_b))| {
                    let ch = idx % c;
                    let (mean, istd) = (self.running_mean[ch], inv_std[ch]);
                    let (g, bta) = (self.gamma.w[ch], self.beta.w[ch]);
                    for ((y, xh), &xv) in y_b.iter_mut().zip(xh_b.iter_mut()).zip(x_b) {
                        let z = (xv - mean) * istd;
                        *xh = z;
                        *y = g * z + bta;
                    }
                });
            self.xhat = xhat;
            self.inv_std = inv_std;
        }
        out
    }

    fn backward(&mut self, dy: &Tensor<F>) -> Tensor<F> {
        let [n, c, h, w] = self.last_shape;
        let hw = h * w;
        let m = n * hw;
        let mut dx = Tensor::zeros(self.last_shape);
        let mut dgamma = vec![F::zero(); c];
        let mut dbeta = vec![F::zero(); c];
        for ch in 0..c {
            let mut dg = F::zero();
            let mut db = F::zero();
            for i in 0..n {
                let base = (i * c + ch) * hw;
                for (dv, xh) in dy.data[base..base + hw].iter().zip(&self.xhat[base..base + hw]) {
                    dg += *dv * *xh;
                    db += *dv;
                }
            }
            dgamma[ch] = dg;
            dbeta[ch] = db;
            self.gamma.g[ch] += dg;
            self.beta.g[ch] += db;
        }
        if self.last_train {
            let mf = F::from_f64(m as f64);
            for ch in 0..c {
                let scale = self.gamma.w[ch] * self.inv_std[ch] / mf;
                for i in 0..n {
                    let base = (i * c + ch) * hw;
                    for j in 0..hw {
                        let dv = dy.data[base + j];
                        let xh = self.xhat[base + j];
                        dx.data[base + j] = scale * (mf * dv - dbeta[ch] - xh * dgamma[ch]);
                    }
                }
            }
        } else {
            // statistics frozen: plain affine gradient
            for ch in 0..c {
                let scale = self.gamma.w[ch] * self.inv_std[ch];
                for i in 0..n {
                    let base = (i * c + ch) * hw;
                    for j in 0..hw {
                        dx.data[base + j] = scale * dy.data[base + j];
                    }
                }
            }
        }
        dx
    }

    fn visit_params(&mut self, f: &mut dyn FnMut(&mut Param<F>)) {
        f(&mut self.gamma);
        f(&mut self.beta);
    }

    fn visit_buffers(&mut self, f: &mut dyn FnMut(&mut Vec<F>)) {
        f(&mut self.running_mean);
        f(&mut self.running_var);
    }
}

pub struct InstanceNorm2d<F> {
    pub c: usize,
    pub gamma: Param<F>,
    pub beta: Param<F>,
    pub eps: f64,
    xhat: Vec<F>,
    inv_std: Vec<F>, // per (n, c)
    last_shape: [usize; 4],
}

impl<F: Scalar> InstanceNorm2d<F> {
    pub fn new(c: usize) -> Self {
        InstanceNorm2d {
            c,
            gamma: Param::new(vec![F::one(); c]),
            beta: Param::zeros(c),
            eps: 1e-5,
            xhat: Vec::new(),
            inv_std: Vec::new(),
            last_shape: [0; 4],
        }
    }
}

impl<F: Scalar> Layer<F> for InstanceNorm2d<F> {
    fn forward(&mut self, x: &Tensor<F>, _train: bool) -> Tensor<F> {
        let [n, c, h, w] = x.shape;
        assert_eq!(c, self.c);
        let hw = h * w;
        let mut out = Tensor::zeros(x.shape);
        let mut xhat = vec![F::zero(); x.numel()];
        let mut inv_std = vec![F::zero(); n * c];
        self.last_shape = x.shape;

        out.data
            .par_chunks_mut(hw)
            .zip(xhat.par_chunks_mut(hw))
            .zip(x.data.par_chunks(hw))
            .zip(inv_std.par_iter_mut())
            .enumerate()
            .for_each(|(idx, (((y_b, xh_b), x_b), istd_slot))| {
                let ch = idx % c;
                let mut sum = F::zero();
                let mut sq = F::zero();
                for &v in x_b {
                    sum += v;
                    sq += v * v;
                }
                let mf = F::from_f64(hw as f64);
                let mean = sum / mf;
                let var = (sq / mf - mean * mean).max(F::zero());
                let istd = F::one() / (var + F::from_f64(self.eps)).sqrt();
                *istd_slot = istd;
                let (g, bta) = (self.gamma.w[ch], self.beta.w[ch]);
                for ((y, xh), &xv) in y_b.iter_mut().zip(xh_b.iter_mut()).zip(x_b) {
                    let z = (xv - mean) * istd;
                    *xh = z;
                    *y = g * z + bta;
                }
            });
        self.xhat = xhat;
        self.inv_std = inv_std;
        out
    }

    fn backward(&mut self, dy: &Tensor<F>) -> Tensor<F> {
        let [n, c, h, w] = self.last_shape;
        let hw = h * w;
        let mf = F::from_f64(hw as f64);
        let mut dx = Tensor::zeros(self.last_shape);
        // channel-major accumulation keeps affine grads deterministic
        for ch in 0..c {
            let mut dg_total = F::zero();
            let mut db_total = F::zero();
            for i in 0..n {
                let base = (i * c + ch) * hw;
                let istd = self.inv_std[i * c + ch];
                let mut dg = F::zero();
                let mut db = F::zero();
                for (dv, xh) in dy.data[base..base + hw].iter().zip(&self.xhat[base..base + hw]) {
                    dg += *dv * *xh;
                    db += *dv;
                }
                dg_total += dg;
                db_total += db;
                let scale = self.gamma.w[ch] * istd / mf;
                for j in 0..hw {
                    let dv = dy.data[base + j];
                    let xh = self.xhat[base + j];
                    dx.data[base + j] = scale * (mf * dv - db - xh * dg);
                }
            }
            self.gamma.g[ch] += dg_total;
            self.beta.g[ch] += db_total;
        }
        dx
    }

    fn visit_params(&mut self, f: &mut dyn FnMut(&mut Param<F>)) {
        f(&mut self.gamma);
        f(&mut self.beta);
    }
}

// ---------------------------------------------------------------------------
// Activations
// ---------------------------------------------------------------------------

macro_rules! pointwise_layer {
    ($name:ident, $fwd:expr, $bwd:expr) => {
        #[derive(Default)]
        pub struct $name<F> {
            y: Vec<F>,
            shape: [usize; 4],
        }

        impl<F: Scalar> $name<F> {
            pub fn new() -> Self {
                $name { y: Vec::new(), shape: [0; 4] }
            }
        }

        impl<F: Scalar> Layer<F> for $name<F> {
            fn forward(&mut self, x: &Tensor<F>, train: bool) -> Tensor<F> {
                let _ = train;
                let fwd = $fwd;
                let data: Vec<F> = x.data.iter().map(|&v| fwd(v)).collect();
                self.y = data.clone();
                self.shape = x.shape;
                Tensor { shape: x.shape, data }
            }

            fn backward(&mut self, dy: &Tensor<F>) -> Tensor<F> {
                let bwd = $bwd;
                let data: Vec<F> =
                    dy.data.iter().zip(&self.y).map(|(&d, &y)| bwd(d, y)).collect();
                Tensor { shape: self.shape, data }
            }
        }
    };
}

pointwise_layer!(
    Relu,
    |v: F| if v > F::zero() { v } else { F::zero() },
    |d: F, y: F| if y > F::zero() { d } else { F::zero() }
);

pointwise_layer!(
    Sigmoid,
    |v: F| F::one() / (F::one() + (-v).exp()),
    |d: F, y: F| d * y * (F::one() - y)
);

pointwise_layer!(Tanh, |v: F| v.tanh(), |d: F, y: F| d * (F::one() - y * y));

pub struct LeakyRelu<F> {
    pub slope: f64,
    y: Vec<F>,
    shape: [usize; 4],
}

impl<F: Scalar> LeakyRelu<F> {
    pub fn new(slope: f64) -> Self {
        LeakyRelu { slope, y: Vec::new(), shape: [0; 4] }
    }
}

impl<F: Scalar> Layer<F> for LeakyRelu<F> {
    fn forward(&mut self, x: &Tensor<F>, train: bool) -> Tensor<F> {
        let _ = train;
        let s = F::from_f64(self.slope);
        let data: Vec<F> =
            x.data.iter().map(|&v| if v > F::zero() { v } else { s * v }).collect();
        self.y = data.clone();
        self.shape = x.shape;
        Tensor { shape: x.shape, data }
    }

    fn backward(&mut self, dy: &Tensor<F>) -> Tensor<F> {
        let s = F::from_f64(self.slope);
        let data: Vec<F> = dy
            .data
            .iter()
            .zip(&self.y)
            .map(|(&d, &y)| if y > F::zero() { d } else { s * d })
            .collect();
        Tensor { shape: self.shape, data }
    }
}

// ---------------------------------------------------------------------------
// Shape ops
// ---------------------------------------------------------------------------

#[derive(Default)]
pub struct UpsampleNearest2 {
    in_shape: [usize; 4],
}

impl UpsampleNearest2 {
    pub fn new() -> Self {
        UpsampleNearest2 { in_shape: [0; 4] }
    }
}

impl<F: Scalar> Layer<F> for UpsampleNearest2 {
    fn forward(&mut self, x: &Tensor<F>, _train: bool) -> Tensor<F> {
        let [n, c, h, w] = x.shape;
        self.in_shape = x.shape;
        let mut out = Tensor::zeros([n, c, 2 * h, 2 * w]);
        let ow = 2 * w;
        for idx in 0..n * c {
            let src = &x.data[idx * h * w..(idx + 1) * h * w];
            let dst = &mut out.data[idx * 4 * h * w..(idx + 1) * 4 * h * w];
            for ih in 0..h {
                for iw in 0..w {
                    let v = src[ih * w + iw];
                    let b = 2 * ih * ow + 2 * iw;
                    dst[b] = v;
                    dst[b + 1] = v;
                    dst[b + ow] = v;
                    dst[b + ow + 1] = v;
                }
            }
        }
        out
    }

    fn backward(&mut self, dy: &Tensor<F>) -> Tensor<F> {
        let [n, c, h, w] = self.in_shape;
        let ow = 2 * w;
        let mut dx = Tensor::zeros(self.in_shape);
        for idx in 0..n * c {
            let src = &dy.data[idx * 4 * h * w..(idx + 1) * 4 * h * w];
            let dst = &mut dx.data[idx * h * w..(idx + 1) * h * w];
            for ih in 0..h {
                for iw in 0..w {
                    let b = 2 * ih * ow + 2 * iw;
                    dst[ih * w + iw] = src[b] + src[b + 1] + src[b + ow] + src[b + ow + 1];
                }
            }
        }
        dx
    }
}

#[derive(Default)]
pub struct GlobalAvgPool {
    in_shape: [usize; 4],
}

impl GlobalAvgPool {
    pub fn new() -> Self {
        GlobalAvgPool { in_shape: [0; 4] }
    }
}

impl<F: Scalar> Layer<F> for GlobalAvgPool {
    fn forward(&mut self, x: &Tensor<F>, _train: bool) -> Tensor<F> {
        let [n, c, h, w] = x.shape;
        self.in_shape = x.shape;
        let hw = F::from_f64((h * w) as f64);
        let mut out = Tensor::zeros([n, c, 1, 1]);
        for (slot, block) in out.data.iter_mut().zip(x.data.chunks(h * w)) {
            *slot = block.iter().copied().sum::<F>() / hw;
        }
        out
    }

    fn backward(&mut self, dy: &Tensor<F>) -> Tensor<F> {
        let [n, c, h, w] = self.in_shape;
        let hw = F::from_f64((h * w) as f64);
        let mut dx = Tensor::zeros(self.in_shape);
        for (block, &d) in dx.data.chunks_mut(h * w).zip(dy.data.iter().take(n * c)) {
            let v = d / hw;
            block.fill(v);
        }
        dx
    }
}

pub struct Linear<F> {
    pub fan_in: usize,
    pub fan_out: usize,
    pub w: Param<F>, // out x in
    pub b: Param<F>,
    x: Vec<F>,
    n: usize,
}

impl<F: Scalar> Linear<F> {
    pub fn new(fan_in: usize, fan_out: usize, rng: &mut Rng) -> Self {
        let std = (2.0 / fan_in as f64).sqrt();
        let w = (0..fan_in * fan_out).map(|_| F::from_f64(rng.normal() * std)).collect();
        Linear { fan_in, fan_out, w: Param::new(w), b: Param::zeros(fan_out), x: Vec::new(), n: 0 }
    }
}

impl<F: Scalar> Layer<F> for Linear<F> {
    fn forward(&mut self, x: &Tensor<F>, train: bool) -> Tensor<F> {
        let n = x.batch();
        assert_eq!(x.sample_len(), self.fan_in, "linear input size");
        let mut out = Tensor::zeros([n, self.fan_out, 1, 1]);
        for i in 0..n {
            let xi = x.sample(i);
            let yi = out.sample_mut(i);
            for (o, slot) in yi.iter_mut().enumerate() {
                let wr = &self.w.w[o * self.fan_in..(o + 1) * self.fan_in];
                *slot = self.b.w[o] + super::dot(wr, xi);
            }
        }
        let _ = train;
        self.x = x.data.clone();
        self.n = n;
        out
    }

    fn backward(&mut self, dy: &Tensor<F>) -> Tensor<F> {
        let n = self.n;
        for o in 0..self.fan_out {
            let mut db = F::zero();
            for i in 0..n {
                let d = dy.data[i * self.fan_out + o];
                db += d;
                axpy(d, &self.x[i * self.fan_in..(i + 1) * self.fan_in], &mut self.w.g[o * self.fan_in..(o + 1) * self.fan_in]);
            }
            self.b.g[o] += db;
        }
        let mut dx = Tensor::zeros([n, self.fan_in, 1, 1]);
        for i in 0..n {
            let dxi = dx.sample_mut(i);
            for o in 0..self.fan_out {
                let d = dy.data[i * self.fan_out + o];
                if d != F::zero() {
                    axpy(d, &self.w.w[o * self.fan_in..(o + 1) * self.fan_in], dxi);
                }
            }
        }
        dx
    }

    fn visit_params(&mut self, f: &mut dyn FnMut(&mut Param<F>)) {
        f(&mut self.w);
        f(&mut self.b);
    }
}

// ---------------------------------------------------------------------------
// Composition
// ---------------------------------------------------------------------------

pub struct Sequential<F: Scalar> {
    pub layers: Vec<Box<dyn Layer<F>>>,
}

impl<F: Scalar> Sequential<F> {
    pub fn new(layers: Vec<Box<dyn Layer<F>>>) -> Self {
        Sequential { layers }
    }
}

impl<F: Scalar> Layer<F> for Sequential<F> {
    fn forward(&mut self, x: &Tensor<F>, train: bool) -> Tensor<F> {
        let mut cur = self.layers[0].forward(x, train);
        for layer in &mut self.layers[1..] {
            cur = layer.forward(&cur, train);
        }
        cur
    }

    fn backward(&mut self, dy: &Tensor<F>) -> Tensor<F> {
        let mut cur = self.layers.last_mut().unwrap().backward(dy);
        for layer in self.layers.iter_mut().rev().skip(1) {
            cur = layer.backward(&cur);
        }
        cur
    }

    fn visit_params(&mut self, f: &mut dyn FnMut(&mut Param<F>)) {
        for layer in &mut self.layers {
            layer.visit_params(f);
        }
    }

    fn visit_buffers(&mut self, f: &mut dyn FnMut(&mut Vec<F>)) {
        for layer in &mut self.layers {
            layer.visit_buffers(f);
        }
    }
}
