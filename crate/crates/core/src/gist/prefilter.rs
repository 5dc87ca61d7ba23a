use rustfft::num_complex::Complex64;

use super::fft::{bin_frequency, Fft2d};

/// Gaussian low-pass transfer function with half gain at `cutoff` cycles/image.
pub fn lowpass_gain(n: usize, cutoff: f64) -> Vec<f64> {
    let s2 = cutoff * cutoff / std::f64::consts::LN_2;
    let mut g = Vec::with_capacity(n * n);
    for r in 0..n {
        let fy = bin_frequency(r, n);
        for c in 0..n {
            let fx = bin_frequency(c, n);
            g.push((-(fx * fx + fy * fy) / s2).exp());
        }
    }
    g
}

fn lowpass(fft: &Fft2d, gain: &[f64], field: &[f64]) -> Vec<f64> {
    let mut buf: Vec<Complex64> = field.iter().map(|&v| Complex64::new(v, 0.0)).collect();
    fft.forward(&mut buf);
    buf.iter_mut().zip(gain).for_each(|(v, g)| *v *= *g);
    fft.inverse(&mut buf);
    buf.into_iter().map(|v| v.re).collect()
}

/// Local contrast normalization of the log image: whitening by subtracting a
/// Gaussian low-pass, then division by `0.2 + local RMS`. The result has zero mean.
pub(crate) fn prefilter_with(fft: &Fft2d, gain: &[f64], pixels: &[f64]) -> Vec<f64> {
    let log: Vec<f64> = pixels.iter().map(|&v| (1.0 + 255.0 * v).ln()).collect();
    let low = lowpass(fft, gain, &log);
    let residual: Vec<f64> = log.iter().zip(&low).map(|(a, b)| a - b).collect();
    let sq: Vec<f64> = residual.iter().map(|v| v * v).collect();
    let local = lowpass(fft, gain, &sq);
    let mut out: Vec<f64> = residual
        .iter()
        .zip(&local)
        .map(|(r, l)| r / (0.2 + l.abs().sqrt()))
        .collect();
    let mean = out.iter().sum::<f64>() / out.len() as f64;
    out.iter_mut().for_each(|v| *v -= mean);
    out
}
