//! First-order optimizers.
//!
//! State rows align with the order parameters are visited, so the same
//! optimizer must always be stepped against the same network.

use super::{layers::Layer, Scalar};
use rayon::prelude::*;

pub struct Sgd<F> {
    pub lr: f64,
    pub momentum: f64,
    velocity: Vec<Vec<F>>,
}

impl<F: Scalar> Sgd<F> {
    pub fn new(lr: f64, momentum: f64) -> Self {
        Sgd { lr, momentum, velocity: Vec::new() }
    }

    pub fn step(&mut self, net: &mut dyn Layer<F>) {
        self.step_visit(&mut |f| net.visit_params(f));
    }

    pub fn step_visit(&mut self, visit: &mut dyn FnMut(&mut dyn FnMut(&mut super::layers::Param<F>))) {
        let mut idx = 0usize;
        let (lr, mom) = (F::from_f64(self.lr), F::from_f64(self.momentum));
        let velocity = &mut self.velocity;
        visit(&mut |p| {
            if velocity.len() == idx {
                velocity.push(vec![F::zero(); p.w.len()]);
            }
            let v = &mut velocity[idx];
            p.w.par_iter_mut()
                .zip(v.par_iter_mut())
                .zip(p.g.par_iter())
                .for_each(|((w, v), &g)| {
                    *v = mom * *v + g;
                    *w -= lr * *v;
                });
            idx += 1;
        });
    }
}

pub struct Adam<F> {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    t: u64,
    m: Vec<Vec<F>>,
    v: Vec<Vec<F>>,
}

impl<F: Scalar> Adam<F> {
    pub fn new(lr: f64) -> Self {
        Adam { lr, beta1: 0.9, beta2: 0.999, eps: 1e-8, t: 0, m: Vec::new(), v: Vec::new() }
    }

    pub fn step(&mut self, net: &mut dyn Layer<F>) {
        self.step_visit(&mut |f| net.visit_params(f));
    }

    pub fn step_visit(&mut self, visit: &mut dyn FnMut(&mut dyn FnMut(&mut super::layers::Param<F>))) {
        self.t += 1;
        let b1 = F::from_f64(self.beta1);
        let b2 = F::from_f64(self.beta2);
        let eps = F::from_f64(self.eps);
        let bc1 = F::from_f64(1.0 - self.beta1.powi(self.t as i32));
        let bc2 = F::from_f64(1.0 - self.beta2.powi(self.t as i32));
        let lr = F::from_f64(self.lr);
        let mut idx = 0usize;
        let (ms, vs) = (&mut self.m, &mut self.v);
        visit(&mut |p| {
            if ms.len() == idx {
                ms.push(vec![F::zero(); p.w.len()]);
                vs.push(vec![F::zero(); p.w.len()]);
            }
            let m = &mut ms[idx];
            let v = &mut vs[idx];
            p.w.par_iter_mut()
                .zip(m.par_iter_mut())
                .zip(v.par_iter_mut())
                .zip(p.g.par_iter())
                .for_each(|(((w, m), v), &g)| {
                    *m = b1 * *m + (F::one() - b1) * g;
                    *v = b2 * *v + (F::one() - b2) * g * g;
                    let mhat = *m / bc1;
                    let vhat = *v / bc2;
                    *w -= lr * mhat / (vhat.sqrt() + eps);
                });
            idx += 1;
        });
    }
}

/// Cosine-annealed learning rate over `total` epochs.
pub fn cosine_lr(base: f64, epoch: usize, total: usize) -> f64 {
    if total <= 1 {
        return base;
    }
    let t = epoch as f64 / total as f64;
    0.5 * base * (1.0 + (std::f64::consts::PI * t).cos())
}
