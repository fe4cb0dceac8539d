//! D-VAE network pieces: encoder trunk, latent heads, and the two decoders.
//!
//! Encoder: five convolution stages with batch normalization; the spatial
//! downsample factor (1, 2, or 4) decides how many stages run at stride 2.
//! Each decoder: four convolution stages with instance normalization and the
//! matching number of x2 nearest-neighbor upsamples; the reconstruction
//! decoder squashes to [0, 1], the perturbation decoder to [-1, 1].

use crate::nn::{
    BatchNorm2d, Conv2d, InstanceNorm2d, Layer, Relu, Rng, Scalar, Sequential, Sigmoid, Tanh,
    UpsampleNearest2,
};

pub const ENC_CH: [usize; 3] = [12, 16, 24];
pub const DEC_CH: [usize; 2] = [24, 12];

/// Per-stage encoder strides realizing the requested spatial factor.
fn encoder_strides(factor: usize) -> [usize; 5] {
    match factor {
        1 => [1, 1, 1, 1, 1],
        2 => [1, 1, 2, 1, 1],
        4 => [1, 2, 1, 2, 1],
        _ => unreachable!("validated by DVAEConfig"),
    }
}

pub fn build_encoder<F: Scalar>(channels: usize, factor: usize, rng: &mut Rng) -> Sequential<F> {
    let [c1, c2, c3] = ENC_CH;
    let widths = [channels, c1, c2, c3, c3, c3];
    let strides = encoder_strides(factor);
    let mut layers: Vec<Box<dyn Layer<F>>> = Vec::new();
    for stage in 0..5 {
        layers.push(Box::new(Conv2d::new(widths[stage], widths[stage + 1], 3, strides[stage], 1, rng)));
        layers.push(Box::new(BatchNorm2d::new(widths[stage + 1])));
        layers.push(Box::new(Relu::new()));
    }
    Sequential::new(layers)
}

fn build_decoder<F: Scalar>(
    latent_channels: usize,
    out_channels: usize,
    factor: usize,
    squash: Box<dyn Layer<F>>,
    rng: &mut Rng,
) -> Sequential<F> {
    let [d1, d2] = DEC_CH;
    let widths = [latent_channels, d1, d2, d2];
    // upsample before the later conv stages so detail convs run at full size
    let ups_before: &[usize] = match factor {
        1 => &[],
        2 => &[2],
        4 => &[1, 2],
        _ => unreachable!("validated by DVAEConfig"),
    };
    let mut layers: Vec<Box<dyn Layer<F>>> = Vec::new();
    for stage in 0..3 {
        if ups_before.contains(&stage) {
            layers.push(Box::new(UpsampleNearest2::new()));
        }
        layers.push(Box::new(Conv2d::new(widths[stage], widths[stage + 1], 3, 1, 1, rng)));
        layers.push(Box::new(InstanceNorm2d::new(widths[stage + 1])));
        layers.push(Box::new(Relu::new()));
    }
    layers.push(Box::new(Conv2d::new(d2, out_channels, 3, 1, 1, rng)));
    layers.push(squash);
    Sequential::new(layers)
}

pub fn build_recon_decoder<F: Scalar>(
    latent_channels: usize,
    out_channels: usize,
    factor: usize,
    rng: &mut Rng,
) -> Sequential<F> {
    build_decoder(latent_channels, out_channels, factor, Box::new(Sigmoid::new()), rng)
}

pub fn build_perturb_decoder<F: Scalar>(
    latent_channels: usize,
    out_channels: usize,
    factor: usize,
    rng: &mut Rng,
) -> Sequential<F> {
    build_decoder(latent_channels, out_channels, factor, Box::new(Tanh::new()), rng)
}
