//! Classification loss.

use super::{Scalar, Tensor};

/// Mean softmax cross-entropy over the batch.
///
/// Returns the loss and the gradient with respect to the logits.
pub fn softmax_cross_entropy<F: Scalar>(logits: &Tensor<F>, labels: &[u16]) -> (F, Tensor<F>) {
    let n = logits.batch();
    let k = logits.sample_len();
    assert_eq!(labels.len(), n, "labels/batch mismatch");
    let mut dlogits = Tensor::zeros(logits.shape);
    let nf = F::from_f64(n as f64);
    let mut loss = F::zero();
    for i in 0..n {
        let row = logits.sample(i);
        let drow = dlogits.sample_mut(i);
        let max = row.iter().copied().fold(F::neg_infinity(), F::max);
        let mut denom = F::zero();
        for (&l, d) in row.iter().zip(drow.iter_mut()) {
            let e = (l - max).exp();
            *d = e;
            denom += e;
        }
        let y = labels[i] as usize;
        debug_assert!(y < k);
        loss += denom.ln() - (row[y] - max);
        for (j, d) in drow.iter_mut().enumerate() {
            let p = *d / denom;
            *d = (p - if j == y { F::one() } else { F::zero() }) / nf;
        }
    }
    (loss / nf, dlogits)
}

/// Argmax of each logit row.
pub fn predictions<F: Scalar>(logits: &Tensor<F>) -> Vec<u16> {
    (0..logits.batch())
        .map(|i| {
            let row = logits.sample(i);
            let mut best = 0usize;
            for (j, &v) in row.iter().enumerate() {
                if v > row[best] {
                    best = j;
                }
            }
            best as u16
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn uniform_logits_loss_is_ln_k() {
        let logits = Tensor::<f64>::zeros([2, 5, 1, 1]);
        let (loss, grad) = softmax_cross_entropy(&logits, &[0, 3]);
        assert!((loss - (5f64).ln()).abs() < 1e-12);
        // gradient rows sum to zero
        for i in 0..2 {
            let s: f64 = grad.sample(i).iter().sum();
            assert!(s.abs() < 1e-12);
        }
    }

    #[test]
    fn finite_difference_grad() {
        let mut logits = Tensor::<f64>::zeros([1, 4, 1, 1]);
        logits.data = vec![0.7, -1.2, 0.3, 2.0];
        let labels = [2u16];
        let (_, grad) = softmax_cross_entropy(&logits, &labels);
        let h = 1e-6;
        for j in 0..4 {
            let mut lp = logits.clone();
            lp.data[j] += h;
            let mut lm = logits.clone();
            lm.data[j] -= h;
            let (fp, _) = softmax_cross_entropy(&lp, &labels);
            let (fm, _) = softmax_cross_entropy(&lm, &labels);
            let fd = (fp - fm) / (2.0 * h);
            assert!((fd - grad.data[j]).abs() < 1e-6, "dim {j}");
        }
    }
}
