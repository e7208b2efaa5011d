//! Square 2D FFTs on row-major buffers.

use std::sync::Arc;

use rustfft::num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

pub(crate) struct Fft2 {
    n: usize,
    fwd: Arc<dyn Fft<f64>>,
    inv: Arc<dyn Fft<f64>>,
}

impl Fft2 {
    pub(crate) fn new(n: usize) -> Self {
        let mut planner = FftPlanner::new();
        Fft2 {
            n,
            fwd: planner.plan_fft_forward(n),
            inv: planner.plan_fft_inverse(n),
        }
    }

    fn apply(&self, plan: &Arc<dyn Fft<f64>>, data: &mut [Complex64], scratch: &mut Vec<Complex64>) {
        let n = self.n;
        plan.process(data);
        transpose(data, n, scratch);
        plan.process(data);
        transpose(data, n, scratch);
    }

    /// Unnormalised forward transform.
    pub(crate) fn forward(&self, data: &mut [Complex64], scratch: &mut Vec<Complex64>) {
        self.apply(&self.fwd, data, scratch)
    }

    /// Inverse transform including the `1/N` factor.
    pub(crate) fn inverse(&self, data: &mut [Complex64], scratch: &mut Vec<Complex64>) {
        self.apply(&self.inv, data, scratch);
        let s = 1.0 / (self.n * self.n) as f64;
        data.iter_mut().for_each(|v| *v *= s);
    }

    pub(crate) fn forward_real(&self, data: &[f64]) -> Vec<Complex64> {
        let mut buf: Vec<Complex64> = data.iter().map(|&v| Complex64::new(v, 0.0)).collect();
        self.forward(&mut buf, &mut Vec::new());
        buf
    }
}

fn transpose(data: &mut [Complex64], n: usize, scratch: &mut Vec<Complex64>) {
    scratch.clear();
    scratch.extend_from_slice(data);
    for y in 0..n {
        for x in 0..n {
            data[x * n + y] = scratch[y * n + x];
        }
    }
}

/// Periodic circular convolution of two `n×n` real images.
pub(crate) fn convolve(a: &[f64], b: &[f64], n: usize) -> Vec<f64> {
    let f = Fft2::new(n);
    let fa = f.forward_real(a);
    let mut fb = f.forward_real(b);
    for (x, y) in fb.iter_mut().zip(&fa) {
        *x *= y;
    }
    f.inverse(&mut fb, &mut Vec::new());
    fb.iter().map(|c| c.re).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn roundtrip() {
        let n = 6;
        let f = Fft2::new(n);
        let x: Vec<f64> = (0..n * n).map(|i| (i as f64 * 0.37).sin()).collect();
        let mut c = f.forward_real(&x);
        f.inverse(&mut c, &mut Vec::new());
        for (a, b) in x.iter().zip(&c) {
            assert!((a - b.re).abs() < 1e-12 && b.im.abs() < 1e-12);
        }
    }

    #[test]
    fn convolution_matches_direct() {
        let n = 5;
        let a: Vec<f64> = (0..25).map(|i| (i % 7) as f64).collect();
        let b: Vec<f64> = (0..25).map(|i| ((i * 3) % 5) as f64 - 2.0).collect();
        let c = convolve(&a, &b, n);
        for y in 0..n {
            for x in 0..n {
                let mut s = 0.0;
                for v in 0..n {
                    for u in 0..n {
                        s += a[v * n + u] * b[((y + n - v) % n) * n + (x + n - u) % n];
                    }
                }
                assert!((s - c[y * n + x]).abs() < 1e-9);
            }
        }
    }
}
