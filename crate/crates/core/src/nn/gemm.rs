//! Row-major matrix multiply kernels.
//!
//! Output rows are processed four at a time so each streamed row of `b` is
//! reused from registers; the innermost loop is contiguous in both `b` and
//! `c` and autovectorizes. Parallel variants split over disjoint output
//! rows, so the per-element accumulation order never depends on the thread
//! count.

use super::{axpy, Scalar};
use rayon::prelude::*;

/// c (r x n) += a_rows (r x k) * b (k x n) for a small row block.
fn gemm_rows<F: Scalar>(k: usize, n: usize, a_rows: &[F], b: &[F], c_rows: &mut [F]) {
    let r = c_rows.len() / n;
    debug_assert_eq!(a_rows.len(), r * k);
    let mut row = 0;
    while row + 4 <= r {
        let (c0, rest) = c_rows[row * n..].split_at_mut(n);
        let (c1, rest) = rest.split_at_mut(n);
        let (c2, rest) = rest.split_at_mut(n);
        let c3 = &mut rest[..n];
        let a_base = row * k;
        for kk in 0..k {
            let b_row = &b[kk * n..(kk + 1) * n];
            let a0 = a_rows[a_base + kk];
            let a1 = a_rows[a_base + k + kk];
            let a2 = a_rows[a_base + 2 * k + kk];
            let a3 = a_rows[a_base + 3 * k + kk];
            for j in 0..n {
                let bv = b_row[j];
                c0[j] += a0 * bv;
                c1[j] += a1 * bv;
                c2[j] += a2 * bv;
                c3[j] += a3 * bv;
            }
        }
        row += 4;
    }
    for i in row..r {
        let c_row = &mut c_rows[i * n..(i + 1) * n];
        let a_row = &a_rows[i * k..(i + 1) * k];
        for (kk, &aik) in a_row.iter().enumerate() {
            if aik != F::zero() {
                axpy(aik, &b[kk * n..(kk + 1) * n], c_row);
            }
        }
    }
}

/// c (m x n) = a (m x k) * b (k x n)
pub fn gemm<F: Scalar>(m: usize, k: usize, n: usize, a: &[F], b: &[F], c: &mut [F]) {
    debug_assert_eq!(a.len(), m * k);
    debug_assert_eq!(b.len(), k * n);
    debug_assert_eq!(c.len(), m * n);
    c.fill(F::zero());
    gemm_rows(k, n, a, b, c);
}

/// Parallel over blocks of four output rows: c (m x n) = a (m x k) * b (k x n)
pub fn gemm_par<F: Scalar>(m: usize, k: usize, n: usize, a: &[F], b: &[F], c: &mut [F]) {
    debug_assert_eq!(c.len(), m * n);
    c.par_chunks_mut(4 * n).enumerate().for_each(|(bi, c_rows)| {
        c_rows.fill(F::zero());
        let rows = c_rows.len() / n;
        let a_rows = &a[bi * 4 * k..bi * 4 * k + rows * k];
        gemm_rows(k, n, a_rows, b, c_rows);
    });
}

#[cfg(test)]
mod tests {
    use super::*;

    fn naive(m: usize, k: usize, n: usize, a: &[f64], b: &[f64]) -> Vec<f64> {
        let mut c = vec![0.0; m * n];
        for i in 0..m {
            for j in 0..n {
                for kk in 0..k {
                    c[i * n + j] += a[i * k + kk] * b[kk * n + j];
                }
            }
        }
        c
    }

    #[test]
    fn matches_naive() {
        for (m, k, n) in [(7, 13, 9), (4, 5, 6), (9, 3, 17), (1, 8, 4), (12, 27, 64)] {
            let a: Vec<f64> = (0..m * k).map(|i| ((i * 37 % 19) as f64) - 9.0).collect();
            let b: Vec<f64> = (0..k * n).map(|i| ((i * 53 % 23) as f64) * 0.25 - 2.0).collect();
            let want = naive(m, k, n, &a, &b);

            let mut c = vec![0.0; m * n];
            gemm(m, k, n, &a, &b, &mut c);
            assert_eq!(c, want, "gemm {m}x{k}x{n}");

            let mut cp = vec![0.0; m * n];
            gemm_par(m, k, n, &a, &b, &mut cp);
            assert_eq!(cp, want, "gemm_par {m}x{k}x{n}");
        }
    }
}
