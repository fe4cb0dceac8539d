//! Disentangling VAE: encoder, reparameterized latent, reconstruction
//! decoder, and an auxiliary perturbation decoder driven by class-wise
//! embeddings.
//!
//! The training loss is
//! `distortion + aux_weight * recover + lambda * max(kld, kld_target)` where
//! `distortion = mean_b ||x - xhat||^2`, `recover = mean_b ||(x - xhat) - phat||^2`
//! with the residual treated as a constant target, and `kld` is the Gaussian
//! KL divergence in nats per latent dimension (per-sample sum over latent
//! dimensions, divided by their count, then averaged over the batch). The
//! hinge keeps the rate pinned near the target: once the batch KLD falls
//! below it, the rate term contributes no gradient.

mod checkpoint;
mod net;

pub use checkpoint::{load_dvae, save_dvae};

use crate::data::LabeledImageSet;
use crate::nn::{
    optim::Adam, Conv2d, Layer, Param, Rng, Scalar, Sequential, Tensor,
};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum DvaeError {
    #[error("invalid config: {0}")]
    InvalidConfig(String),
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("label {0} outside [0, {1})")]
    BadLabel(u16, usize),
    #[error("sigma must be positive everywhere")]
    NonpositiveSigma,
    #[error("training diverged: loss became non-finite at epoch {0}")]
    Divergence(usize),
    #[error("checkpoint error: {0}")]
    Checkpoint(String),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

/// Rate-constrained D-VAE hyperparameters.
///
/// `kld_target` is in nats per latent dimension. `lambda` defaults to the
/// latent dimension count at build time (see [`DVAEConfig::effective_lambda`]):
/// with the per-dimension KLD normalization, a unit rate weight would be too
/// weak by exactly that factor to pin the KLD at its target.
#[derive(Clone, Debug)]
pub struct DVAEConfig {
    pub latent_channels: usize,
    /// Spatial downsample factor: 1, 2, or 4.
    pub downsample: usize,
    pub kld_target: f64,
    /// Rate weight; `None` selects the latent-dimension-count default.
    pub lambda: Option<f64>,
    /// 1.0 for the full disentangling loss, 0.0 for the plain
    /// rate-constrained VAE.
    pub aux_weight: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub seed: u64,
}

impl Default for DVAEConfig {
    fn default() -> Self {
        DVAEConfig {
            latent_channels: 4,
            downsample: 2,
            kld_target: 1.0,
            lambda: None,
            aux_weight: 1.0,
            epochs: 12,
            batch_size: 128,
            learning_rate: 1e-3,
            seed: 0,
        }
    }
}

impl DVAEConfig {
    pub fn validate(&self) -> Result<(), DvaeError> {
        if self.kld_target < 0.0 {
            return Err(DvaeError::InvalidConfig("kld_target must be >= 0".into()));
        }
        if let Some(l) = self.lambda {
            if !(l > 0.0) {
                return Err(DvaeError::InvalidConfig("lambda must be > 0".into()));
            }
        }
        if self.epochs == 0 {
            return Err(DvaeError::InvalidConfig("epochs must be >= 1".into()));
        }
        if !(self.aux_weight == 0.0 || self.aux_weight == 1.0) {
            return Err(DvaeError::InvalidConfig("aux_weight must be 0 or 1".into()));
        }
        if !matches!(self.downsample, 1 | 2 | 4) {
            return Err(DvaeError::InvalidConfig("downsample must be 1, 2, or 4".into()));
        }
        if self.latent_channels == 0 || self.batch_size == 0 {
            return Err(DvaeError::InvalidConfig("latent_channels/batch_size must be >= 1".into()));
        }
        if !(self.learning_rate > 0.0) {
            return Err(DvaeError::InvalidConfig("learning_rate must be > 0".into()));
        }
        Ok(())
    }

    /// Rate weight actually applied for a given latent dimension count.
    pub fn effective_lambda(&self, latent_dims: usize) -> f64 {
        self.lambda.unwrap_or(latent_dims as f64)
    }
}

/// Posterior parameters and the reparameterized draw for one batch.
#[derive(Clone, Debug)]
pub struct LatentCode<F> {
    pub mu: Tensor<F>,
    pub sigma: Tensor<F>,
    pub z: Tensor<F>,
}

const LOGVAR_MIN: f64 = -12.0;
const LOGVAR_MAX: f64 = 6.0;

/// Trainable D-VAE state; `DVAEState` is the f32 production alias.
pub struct DVAEStateT<F: Scalar> {
    pub class_count: usize,
    pub channels: usize,
    pub height: usize,
    pub width: usize,
    pub latent_channels: usize,
    pub downsample: usize,
    pub epoch: usize,
    encoder: Sequential<F>,
    mu_head: Conv2d<F>,
    logvar_head: Conv2d<F>,
    dec_recon: Sequential<F>,
    dec_perturb: Sequential<F>,
    pub embeddings: Param<F>, // class_count x latent_len
}

pub type DVAEState = DVAEStateT<f32>;

impl<F: Scalar> DVAEStateT<F> {
    pub fn init(
        cfg: &DVAEConfig,
        class_count: usize,
        channels: usize,
        height: usize,
        width: usize,
    ) -> Result<Self, DvaeError> {
        cfg.validate()?;
        if height % cfg.downsample != 0 || width % cfg.downsample != 0 {
            return Err(DvaeError::InvalidConfig(format!(
                "downsample {} must divide image size {height}x{width}",
                cfg.downsample
            )));
        }
        let mut rng = Rng::new(cfg.seed);
        let encoder = net::build_encoder(channels, cfg.downsample, &mut rng);
        let mu_head = Conv2d::new(net::ENC_CH[2], cfg.latent_channels, 1, 1, 0, &mut rng);
        let logvar_head = Conv2d::new(net::ENC_CH[2], cfg.latent_channels, 1, 1, 0, &mut rng);
        let dec_recon = net::build_recon_decoder(cfg.latent_channels, channels, cfg.downsample, &mut rng);
        let dec_perturb =
            net::build_perturb_decoder(cfg.latent_channels, channels, cfg.downsample, &mut rng);
        let latent_len = cfg.latent_channels * (height / cfg.downsample) * (width / cfg.downsample);
        Ok(DVAEStateT {
            class_count,
            channels,
            height,
            width,
            latent_channels: cfg.latent_channels,
            downsample: cfg.downsample,
            epoch: 0,
            encoder,
            mu_head,
            logvar_head,
            dec_recon,
            dec_perturb,
            embeddings: Param::zeros(class_count * latent_len),
        })
    }

    pub fn latent_shape(&self) -> [usize; 3] {
        [
            self.latent_channels,
            self.height / self.downsample,
            self.width / self.downsample,
        ]
    }

    pub fn latent_len(&self) -> usize {
        let [c, h, w] = self.latent_shape();
        c * h * w
    }

    pub fn visit_params(&mut self, f: &mut dyn FnMut(&mut Param<F>)) {
        self.encoder.visit_params(f);
        self.mu_head.visit_params(f);
        self.logvar_head.visit_params(f);
        self.dec_recon.visit_params(f);
        self.dec_perturb.visit_params(f);
        f(&mut self.embeddings);
    }

    pub fn visit_buffers(&mut self, f: &mut dyn FnMut(&mut Vec<F>)) {
        self.encoder.visit_buffers(f);
        self.mu_head.visit_buffers(f);
        self.logvar_head.visit_buffers(f);
        self.dec_recon.visit_buffers(f);
        self.dec_perturb.visit_buffers(f);
    }

    pub fn zero_grad(&mut self) {
        self.visit_params(&mut |p| p.zero_grad());
    }

    pub fn param_count(&mut self) -> usize {
        let mut n = 0;
        self.visit_params(&mut |p| n += p.w.len());
        n
    }

    fn check_input(&self, x: &Tensor<F>) -> Result<(), DvaeError> {
        let [_, c, h, w] = x.shape;
        if c != self.channels || h != self.height || w != self.width {
            return Err(DvaeError::ShapeMismatch(format!(
                "input {c}x{h}x{w}, state expects {}x{}x{}",
                self.channels, self.height, self.width
            )));
        }
        Ok(())
    }

    fn check_latent(&self, z: &Tensor<F>) -> Result<(), DvaeError> {
        let [lc, lh, lw] = self.latent_shape();
        let [_, c, h, w] = z.shape;
        if c != lc || h != lh || w != lw {
            return Err(DvaeError::ShapeMismatch(format!(
                "latent {c}x{h}x{w}, state expects {lc}x{lh}x{lw}"
            )));
        }
        Ok(())
    }

    /// aux decoder input u_y + z.
    fn aux_input(&self, z: &Tensor<F>, labels: &[u16]) -> Result<Tensor<F>, DvaeError> {
        let latent_len = self.latent_len();
        let mut aux = z.clone();
        for (i, &y) in labels.iter().enumerate() {
            if y as usize >= self.class_count {
                return Err(DvaeError::BadLabel(y, self.class_count));
            }
            let row = &self.embeddings.w[y as usize * latent_len..(y as usize + 1) * latent_len];
            for (a, &u) in aux.sample_mut(i).iter_mut().zip(row) {
                *a += u;
            }
        }
        Ok(aux)
    }
}

fn clamp_logvar<F: Scalar>(raw: &Tensor<F>) -> (Tensor<F>, Vec<bool>) {
    let lo = F::from_f64(LOGVAR_MIN);
    let hi = F::from_f64(LOGVAR_MAX);
    let mut lv = raw.clone();
    let mut pass = vec![true; raw.numel()];
    for (v, m) in lv.data.iter_mut().zip(pass.iter_mut()) {
        if *v < lo {
            *v = lo;
            *m = false;
        } else if *v > hi {
            *v = hi;
            *m = false;
        }
    }
    (lv, pass)
}

/// Posterior parameters and z = mu + sigma * noise (pass zero noise for the
/// deterministic mode). Runs with frozen normalization statistics.
pub fn encode<F: Scalar>(
    state: &mut DVAEStateT<F>,
    x: &Tensor<F>,
    noise: &Tensor<F>,
) -> Result<LatentCode<F>, DvaeError> {
    state.check_input(x)?;
    let h = state.encoder.forward(x, false);
    let mu = state.mu_head.forward(&h, false);
    let (lv, _) = clamp_logvar(&state.logvar_head.forward(&h, false));
    if noise.shape != mu.shape {
        return Err(DvaeError::ShapeMismatch(format!(
            "noise shape {:?} vs latent {:?}",
            noise.shape, mu.shape
        )));
    }
    let half = F::from_f64(0.5);
    let sigma = Tensor {
        shape: lv.shape,
        data: lv.data.iter().map(|&v| (half * v).exp()).collect(),
    };
    let mut z = mu.clone();
    for ((z, &s), &e) in z.data.iter_mut().zip(&sigma.data).zip(&noise.data) {
        *z += s * e;
    }
    Ok(LatentCode { mu, sigma, z })
}

/// Reconstruction x̂ = D_c(z); output lies in [0, 1].
pub fn decode_recon<F: Scalar>(
    state: &mut DVAEStateT<F>,
    z: &Tensor<F>,
) -> Result<Tensor<F>, DvaeError> {
    state.check_latent(z)?;
    Ok(state.dec_recon.forward(z, false))
}

/// Perturbation estimate p̂ = D_p(u_y + z); output lies in [-1, 1].
pub fn decode_perturbation<F: Scalar>(
    state: &mut DVAEStateT<F>,
    z: &Tensor<F>,
    labels: &[u16],
) -> Result<Tensor<F>, DvaeError> {
    state.check_latent(z)?;
    if labels.len() != z.batch() {
        return Err(DvaeError::ShapeMismatch("labels/batch".into()));
    }
    let aux = state.aux_input(z, labels)?;
    Ok(state.dec_perturb.forward(&aux, false))
}

/// Gaussian KLD to N(0, I) in nats per latent dimension, batch mean.
pub fn kld_term<F: Scalar>(mu: &Tensor<F>, sigma: &Tensor<F>) -> Result<F, DvaeError> {
    if mu.shape != sigma.shape {
        return Err(DvaeError::ShapeMismatch("mu/sigma".into()));
    }
    if sigma.data.iter().any(|&s| !(s > F::zero())) {
        return Err(DvaeError::NonpositiveSigma);
    }
    let b = mu.batch();
    let j = mu.sample_len();
    let half = F::from_f64(0.5);
    let mut total = F::zero();
    for (&m, &s) in mu.data.iter().zip(&sigma.data) {
        let s2 = s * s;
        total += -half * (F::one() + s2.ln() - m * m - s2);
    }
    Ok(total / F::from_f64((b * j) as f64))
}

/// Loss pieces; `total = distortion + aux_weight * recover + rate`.
#[derive(Clone, Copy, Debug)]
pub struct LossParts<F> {
    pub total: F,
    pub distortion: F,
    pub recover: F,
    pub rate: F,
    /// Pre-hinge KLD in nats per latent dimension.
    pub kld: F,
}

/// Training-mode loss of one batch (no gradients).
pub fn dvae_loss<F: Scalar>(
    state: &mut DVAEStateT<F>,
    x: &Tensor<F>,
    labels: &[u16],
    noise: &Tensor<F>,
    cfg: &DVAEConfig,
) -> Result<LossParts<F>, DvaeError> {
    run_batch(state, x, labels, noise, cfg, false)
}

/// Training-mode loss with parameter gradients accumulated into the state.
pub fn dvae_loss_and_grad<F: Scalar>(
    state: &mut DVAEStateT<F>,
    x: &Tensor<F>,
    labels: &[u16],
    noise: &Tensor<F>,
    cfg: &DVAEConfig,
) -> Result<LossParts<F>, DvaeError> {
    run_batch(state, x, labels, noise, cfg, true)
}

fn run_batch<F: Scalar>(
    state: &mut DVAEStateT<F>,
    x: &Tensor<F>,
    labels: &[u16],
    noise: &Tensor<F>,
    cfg: &DVAEConfig,
    with_grad: bool,
) -> Result<LossParts<F>, DvaeError> {
    state.check_input(x)?;
    if labels.len() != x.batch() {
        return Err(DvaeError::ShapeMismatch("labels/batch".into()));
    }
    let b = x.batch();
    let bf = F::from_f64(b as f64);
    let j = state.latent_len();
    let lambda = F::from_f64(cfg.effective_lambda(j));
    let target = F::from_f64(cfg.kld_target);
    let aux_on = cfg.aux_weight != 0.0;
    let half = F::from_f64(0.5);

    // forward
    let h = state.encoder.forward(x, true);
    let mu = state.mu_head.forward(&h, true);
    let lv_raw = state.logvar_head.forward(&h, true);
    let (lv, lv_pass) = clamp_logvar(&lv_raw);
    if noise.shape != mu.shape {
        return Err(DvaeError::ShapeMismatch("noise/latent".into()));
    }
    let sigma: Vec<F> = lv.data.iter().map(|&v| (half * v).exp()).collect();
    let mut z = mu.clone();
    for ((zv, &s), &e) in z.data.iter_mut().zip(&sigma).zip(&noise.data) {
        *zv += s * e;
    }
    let xhat = state.dec_recon.forward(&z, true);
    let (aux_in, phat) = if aux_on {
        let aux_in = state.aux_input(&z, labels)?;
        let phat = state.dec_perturb.forward(&aux_in, true);
        (Some(aux_in), Some(phat))
    } else {
        // labels still validated in the plain-VAE mode
        for &y in labels {
            if y as usize >= state.class_count {
                return Err(DvaeError::BadLabel(y, state.class_count));
            }
        }
        (None, None)
    };

    // losses
    let mut distortion = F::zero();
    for (&xv, &rv) in x.data.iter().zip(&xhat.data) {
        let d = xv - rv;
        distortion += d * d;
    }
    distortion /= bf;

    let mut recover = F::zero();
    if let Some(phat) = &phat {
        for ((&xv, &rv), &pv) in x.data.iter().zip(&xhat.data).zip(&phat.data) {
            let d = (xv - rv) - pv;
            recover += d * d;
        }
        recover /= bf;
    }

    let mut kld = F::zero();
    for ((&m, &s), &l) in mu.data.iter().zip(&sigma).zip(&lv.data) {
        kld += -half * (F::one() + l - m * m - s * s);
    }
    kld /= F::from_f64((b * j) as f64);

    let hinge_active = kld > target;
    let rate = lambda * if hinge_active { kld } else { target };
    let total = distortion + F::from_f64(cfg.aux_weight) * recover + rate;

    if with_grad {
        // distortion -> xhat; the recover residual is a constant target
        let mut dxhat = Tensor::zeros(xhat.shape);
        let two = F::from_f64(2.0);
        for ((d, &xv), &rv) in dxhat.data.iter_mut().zip(&x.data).zip(&xhat.data) {
            *d = -two * (xv - rv) / bf;
        }
        let dz_recon = state.dec_recon.backward(&dxhat);

        let mut dz = dz_recon;
        if let (Some(_aux_in), Some(phat)) = (&aux_in, &phat) {
            let aw = F::from_f64(cfg.aux_weight);
            let mut dphat = Tensor::zeros(phat.shape);
            for (((d, &xv), &rv), &pv) in
                dphat.data.iter_mut().zip(&x.data).zip(&xhat.data).zip(&phat.data)
            {
                *d = -two * aw * ((xv - rv) - pv) / bf;
            }
            let daux = state.dec_perturb.backward(&dphat);
            let latent_len = state.latent_len();
            for (i, &y) in labels.iter().enumerate() {
                let grad_row =
                    &mut state.embeddings.g[y as usize * latent_len..(y as usize + 1) * latent_len];
                for (g, &d) in grad_row.iter_mut().zip(daux.sample(i)) {
                    *g += d;
                }
            }
            for (a, &d) in dz.data.iter_mut().zip(&daux.data) {
                *a += d;
            }
        }

        // z = mu + sigma (.) noise; rate gradients only when the hinge bites
        let rate_scale = if hinge_active {
            lambda / F::from_f64((b * j) as f64)
        } else {
            F::zero()
        };
        let mut dmu = Tensor::zeros(mu.shape);
        let mut dlv = Tensor::zeros(mu.shape);
        for i in 0..mu.numel() {
            let dzv = dz.data[i];
            let s = sigma[i];
            let m = mu.data[i];
            dmu.data[i] = dzv + rate_scale * m;
            let mut g = dzv * noise.data[i] * s * half + rate_scale * half * (s * s - F::one());
            if !lv_pass[i] {
                g = F::zero(); // saturated clamp
            }
            dlv.data[i] = g;
        }
        let dh_mu = state.mu_head.backward(&dmu);
        let dh_lv = state.logvar_head.backward(&dlv);
        let mut dh = dh_mu;
        for (a, &d) in dh.data.iter_mut().zip(&dh_lv.data) {
            *a += d;
        }
        state.encoder.backward(&dh);
    }

    Ok(LossParts { total, distortion, recover, rate, kld })
}

/// Per-epoch training trace.
#[derive(Clone, Debug, Default)]
pub struct TrainLog {
    pub distortion: Vec<f64>,
    pub recover: Vec<f64>,
    pub rate: Vec<f64>,
    pub kld: Vec<f64>,
    pub probe_psnr: Vec<f64>,
}

fn probe_indices(n: usize, want: usize) -> Vec<usize> {
    let take = want.min(n);
    let step = (n as f64 / take as f64).max(1.0);
    (0..take).map(|i| ((i as f64 * step) as usize).min(n - 1)).collect()
}

/// Train a D-VAE on the set with Adam; no input augmentation.
pub fn train_dvae(
    set: &LabeledImageSet,
    cfg: &DVAEConfig,
) -> Result<(DVAEState, TrainLog), DvaeError> {
    cfg.validate()?;
    let mut state =
        DVAEState::init(cfg, set.class_count, set.channels, set.height, set.width)?;
    let mut adam = Adam::new(cfg.learning_rate);
    let mut rng = Rng::new(cfg.seed ^ TRAIN_STREAM_SALT);
    let mut log = TrainLog::default();
    let latent_shape = state.latent_shape();
    let probe = probe_indices(set.len(), 256);
    let (probe_x, _) = set.batch_tensor(&probe);

    let mut order: Vec<usize> = (0..set.len()).collect();
    for epoch in 0..cfg.epochs {
        rng.shuffle(&mut order);
        let mut sums = [0f64; 4];
        let mut batches = 0usize;
        for chunk in order.chunks(cfg.batch_size) {
            let (x, labels) = set.batch_tensor(chunk);
            let noise_data: Vec<f32> = (0..chunk.len() * latent_shape.iter().product::<usize>())
                .map(|_| rng.normal() as f32)
                .collect();
            let noise = Tensor::from_vec(
                [chunk.len(), latent_shape[0], latent_shape[1], latent_shape[2]],
                noise_data,
            );
            state.zero_grad();
            let parts = dvae_loss_and_grad(&mut state, &x, &labels, &noise, cfg)?;
            if !parts.total.is_finite() {
                return Err(DvaeError::Divergence(epoch));
            }
            adam.step_visit(&mut |f| state.visit_params(f));
            sums[0] += parts.distortion as f64;
            sums[1] += parts.recover as f64;
            sums[2] += parts.rate as f64;
            sums[3] += parts.kld as f64;
            batches += 1;
        }
        let bf = batches as f64;
        log.distortion.push(sums[0] / bf);
        log.recover.push(sums[1] / bf);
        log.rate.push(sums[2] / bf);
        log.kld.push(sums[3] / bf);

        let zero_noise = Tensor::zeros([
            probe.len(),
            latent_shape[0],
            latent_shape[1],
            latent_shape[2],
        ]);
        let code = encode(&mut state, &probe_x, &zero_noise)?;
        let recon = decode_recon(&mut state, &code.z)?;
        let psnr = crate::data::psnr(&probe_x.data, &recon.data)
            .map_err(|e| DvaeError::ShapeMismatch(e.to_string()))?;
        log.probe_psnr.push(psnr);
        state.epoch = epoch + 1;
    }
    Ok((state, log))
}

fn infer_chunk(
    state: &mut DVAEState,
    set: &LabeledImageSet,
    chunk: &[usize],
) -> Result<(Tensor<f32>, Tensor<f32>), DvaeError> {
    let (x, labels) = set.batch_tensor(chunk);
    let [lc, lh, lw] = state.latent_shape();
    let zero_noise = Tensor::zeros([chunk.len(), lc, lh, lw]);
    let code = encode(state, &x, &zero_noise)?;
    let recon = decode_recon(state, &code.z)?;
    let phat = decode_perturbation(state, &code.z, &labels)?;
    Ok((recon, phat))
}

/// Estimated perturbations for a whole set; same layout as the images.
#[derive(Clone, Debug)]
pub struct PerturbationEstimate {
    pub deltas: Vec<f32>,
    pub channels: usize,
    pub height: usize,
    pub width: usize,
}

impl PerturbationEstimate {
    #[inline]
    pub fn sample_len(&self) -> usize {
        self.channels * self.height * self.width
    }

    #[inline]
    pub fn delta(&self, i: usize) -> &[f32] {
        &self.deltas[i * self.sample_len()..(i + 1) * self.sample_len()]
    }

    pub fn mean_l2(&self) -> f64 {
        let n = self.deltas.len() / self.sample_len();
        (0..n)
            .map(|i| self.delta(i).iter().map(|&v| (v as f64).powi(2)).sum::<f64>().sqrt())
            .sum::<f64>()
            / n as f64
    }
}

/// Deterministic inference (z = mu): reconstructions and per-sample p̂ via
/// each sample's own label.
pub fn infer_dvae(
    state: &mut DVAEState,
    set: &LabeledImageSet,
) -> Result<(LabeledImageSet, PerturbationEstimate), DvaeError> {
    if set.channels != state.channels || set.height != state.height || set.width != state.width {
        return Err(DvaeError::ShapeMismatch("set geometry vs state".into()));
    }
    let mut recon_images = vec![0f32; set.images.len()];
    let mut deltas = vec![0f32; set.images.len()];
    let sample_len = set.sample_len();
    let all: Vec<usize> = (0..set.len()).collect();
    for chunk in all.chunks(256) {
        let (recon, phat) = infer_chunk(state, set, chunk)?;
        for (local, &i) in chunk.iter().enumerate() {
            recon_images[i * sample_len..(i + 1) * sample_len]
                .copy_from_slice(recon.sample(local));
            deltas[i * sample_len..(i + 1) * sample_len].copy_from_slice(phat.sample(local));
        }
    }
    let recon_set = LabeledImageSet {
        images: recon_images,
        labels: set.labels.clone(),
        class_count: set.class_count,
        channels: set.channels,
        height: set.height,
        width: set.width,
    };
    let estimate = PerturbationEstimate {
        deltas,
        channels: set.channels,
        height: set.height,
        width: set.width,
    };
    Ok((recon_set, estimate))
}

// keeps the training stream disjoint from data-generation streams that may
// share the user-facing seed
const TRAIN_STREAM_SALT: u64 = 0xD7AE_5EED_0000_0001;
