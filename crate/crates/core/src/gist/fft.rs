use std::sync::Arc;

use rustfft::num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

/// Square 2-D FFT over row-major buffers of `n * n` complex values.
#[derive(Clone)]
pub struct Fft2d {
    n: usize,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
}

impl std::fmt::Debug for Fft2d {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Fft2d").field("n", &self.n).finish()
    }
}

impl Fft2d {
    pub fn new(n: usize) -> Self {
        let mut planner = FftPlanner::new();
        Fft2d {
            n,
            forward: planner.plan_fft_forward(n),
            inverse: planner.plan_fft_inverse(n),
        }
    }

    pub fn side(&self) -> usize {
        self.n
    }

    fn run(&self, fft: &Arc<dyn Fft<f64>>, data: &mut [Complex64]) {
        let n = self.n;
        assert_eq!(data.len(), n * n);
        let mut scratch = vec![Complex64::default(); fft.get_inplace_scratch_len()];
        fft.process_with_scratch(data, &mut scratch);
        transpose(data, n);
        fft.process_with_scratch(data, &mut scratch);
        transpose(data, n);
    }

    pub fn forward(&self, data: &mut [Complex64]) {
        self.run(&self.forward, data);
    }

    /// Inverse transform including the 1/n² normalization.
    pub fn inverse(&self, data: &mut [Complex64]) {
        self.run(&self.inverse, data);
        let s = 1.0 / (self.n * self.n) as f64;
        data.iter_mut().for_each(|v| *v *= s);
    }
}

fn transpose(data: &mut [Complex64], n: usize) {
    for r in 0..n {
        for c in r + 1..n {
            data.swap(r * n + c, c * n + r);
        }
    }
}

/// Signed frequency of FFT bin `k` in cycles per image.
#[inline]
pub fn bin_frequency(k: usize, n: usize) -> f64 {
    if k < n.div_ceil(2) {
        k as f64
    } else {
        k as f64 - n as f64
    }
}
