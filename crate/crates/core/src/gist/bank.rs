use std::f64::consts::{LN_2, PI, TAU};

use super::fft::bin_frequency;
use super::GistParams;

/// Highest radial center frequency, in cycles per pixel.
pub const TOP_FREQUENCY: f64 = 0.25;

/// One frequency-domain filter of the bank, stored in unshifted FFT layout.
#[derive(Debug, Clone)]
pub struct GaborFilter {
    pub scale: usize,
    pub orientation: usize,
    /// Center orientation in radians, measured as the angle of the frequency
    /// vector `(fx, fy)` with x along columns and y along rows.
    pub angle: f64,
    /// Radial center frequency in cycles per pixel.
    pub frequency: f64,
    pub transfer: Vec<f64>,
}

fn wrap_pi(a: f64) -> f64 {
    let w = (a + PI).rem_euclid(TAU) - PI;
    if w == -PI {
        PI
    } else {
        w
    }
}

/// Builds the log-Gabor bank: one filter per (scale, orientation), scale-major.
///
/// Radial centers halve per scale starting at [`TOP_FREQUENCY`]; radial and
/// angular widths are chosen so neighbouring filters cross at half height.
/// Each filter is one-sided in angle, so filtering a real image yields an
/// analytic response whose magnitude is phase-insensitive.
pub fn gabor_bank(params: &GistParams) -> Vec<GaborFilter> {
    let n = params.image_side;
    let sigma_r = 0.5 * LN_2 / (2.0 * LN_2).sqrt();
    let mut polar = Vec::with_capacity(n * n);
    for r in 0..n {
        let fy = bin_frequency(r, n) / n as f64;
        for c in 0..n {
            let fx = bin_frequency(c, n) / n as f64;
            polar.push(((fx * fx + fy * fy).sqrt(), fy.atan2(fx)));
        }
    }
    let mut bank = Vec::new();
    for (scale, &n_orient) in params.orientations_per_scale.iter().enumerate() {
        let f0 = TOP_FREQUENCY / 2f64.powi(scale as i32);
        let sigma_t = (PI / (2.0 * n_orient as f64)) / (2.0 * LN_2).sqrt();
        for orientation in 0..n_orient {
            let angle = orientation as f64 * PI / n_orient as f64;
            let mut transfer: Vec<f64> = polar
                .iter()
                .map(|&(f, t)| {
                    if f == 0.0 {
                        return 0.0;
                    }
                    let lr = (f / f0).ln();
                    let dt = wrap_pi(t - angle);
                    (-lr * lr / (2.0 * sigma_r * sigma_r) - dt * dt / (2.0 * sigma_t * sigma_t))
                        .exp()
                })
                .collect();
            let peak = transfer.iter().cloned().fold(0.0, f64::max);
            if peak > 0.0 {
                transfer.iter_mut().for_each(|v| *v /= peak);
            }
            bank.push(GaborFilter {
                scale,
                orientation,
                angle,
                frequency: f0,
                transfer,
            });
        }
    }
    bank
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_bank_shape_and_peaks() {
        let bank = gabor_bank(&GistParams::default());
        assert_eq!(bank.len(), 32);
        for f in &bank {
            let max = f.transfer.iter().cloned().fold(f64::MIN, f64::max);
            assert!((max - 1.0).abs() < 1e-9);
            assert_eq!(f.transfer[0], 0.0, "DC must be rejected");
            assert!(f.transfer.iter().all(|&v| (0.0..=1.0).contains(&v)));
        }
        assert_eq!(bank[9].scale, 1);
        assert_eq!(bank[9].orientation, 1);
        assert_eq!(bank[8].frequency, 0.125);
    }

    #[test]
    fn adjacent_orientations_cross_near_half_height() {
        let p = GistParams::default();
        let bank = gabor_bank(&p);
        let n = p.image_side;
        // Bin at radius 32 (0.25 c/p) and angle π/16, halfway between orientations 0 and 1.
        let (fx, fy) = (32.0 * (PI / 16.0).cos(), 32.0 * (PI / 16.0).sin());
        let (c, r) = (fx.round() as usize, fy.round() as usize);
        let t = (r as f64).atan2(c as f64);
        assert!((t - PI / 16.0).abs() < 0.02);
        let a = bank[0].transfer[r * n + c];
        let b = bank[1].transfer[r * n + c];
        assert!((a - 0.5).abs() < 0.1 && (b - 0.5).abs() < 0.1, "{a} {b}");
    }
}
