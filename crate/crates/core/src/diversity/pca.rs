use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gist::DescriptorSet;
use crate::linalg::SymmetricEigen;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EigenSpectrum {
    /// Top-k covariance eigenvalues, descending, clamped at zero.
    pub eigenvalues: Vec<f64>,
    /// Trace of the covariance matrix.
    pub total_variance: f64,
}

fn centered(set: &DescriptorSet) -> Vec<f64> {
    let (n, dim) = (set.len(), set.dim);
    let mut mean = vec![0.0; dim];
    for i in 0..n {
        for (m, &v) in mean.iter_mut().zip(set.row(i)) {
            *m += v as f64;
        }
    }
    mean.iter_mut().for_each(|m| *m /= n as f64);
    let mut x = Vec::with_capacity(n * dim);
    for i in 0..n {
        x.extend(set.row(i).iter().zip(&mean).map(|(&v, m)| v as f64 - m));
    }
    x
}

/// Top-`k` eigenvalues of the population covariance (divisor n).
///
/// Works on whichever of the `dim × dim` covariance or the `n × n` Gram
/// matrix is smaller; both share their non-zero spectrum. Ranks beyond the
/// matrix rank are reported as zero.
pub fn pca_spectrum(set: &DescriptorSet, k: usize) -> Result<EigenSpectrum> {
    let (n, dim) = (set.len(), set.dim);
    if n < 2 {
        return Err(Error::Validation(format!("PCA needs at least 2 rows, got {n}")));
    }
    let x = centered(set);
    let inv_n = 1.0 / n as f64;
    let (m, gram) = if n > dim {
        let mut c = vec![0.0; dim * dim];
        for row in x.chunks_exact(dim) {
            for a in 0..dim {
                let ra = row[a];
                for b in 0..=a {
                    c[a * dim + b] += ra * row[b];
                }
            }
        }
        (dim, c)
    } else {
        let mut g = vec![0.0; n * n];
        for a in 0..n {
            let ra = &x[a * dim..(a + 1) * dim];
            for b in 0..=a {
                let rb = &x[b * dim..(b + 1) * dim];
                g[a * n + b] = ra.iter().zip(rb).map(|(p, q)| p * q).sum();
            }
        }
        (n, g)
    };
    let mut sym = gram;
    for a in 0..m {
        for b in 0..=a {
            let v = sym[a * m + b] * inv_n;
            sym[a * m + b] = v;
            sym[b * m + a] = v;
        }
    }
    let total_variance = (0..m).map(|i| sym[i * m + i]).sum();
    let eig = SymmetricEigen::new(&sym, m)?;
    let mut eigenvalues: Vec<f64> = eig.values.iter().take(k).map(|&v| v.max(0.0)).collect();
    eigenvalues.resize(k, 0.0);
    Ok(EigenSpectrum {
        eigenvalues,
        total_variance,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    fn set(rows: &[Vec<f64>]) -> DescriptorSet {
        let ids = (0..rows.len()).map(|i| format!("r{i}")).collect();
        DescriptorSet::from_rows(ids, rows, 1).unwrap()
    }

    #[test]
    fn one_dimensional_data() {
        let s = pca_spectrum(&set(&[vec![-1.0, 0.0], vec![1.0, 0.0]]), 2).unwrap();
        assert!((s.eigenvalues[0] - 1.0).abs() < 1e-12);
        assert!(s.eigenvalues[1].abs() < 1e-12);
        assert!((s.total_variance - 1.0).abs() < 1e-12);
    }

    #[test]
    fn cross_pattern() {
        let rows = [
            vec![1.0, 0.0],
            vec![-1.0, 0.0],
            vec![0.0, 1.0],
            vec![0.0, -1.0],
        ];
        let s = pca_spectrum(&set(&rows), 2).unwrap();
        // covariance diag(0.5, 0.5), checked against an independent solver
        let cov = nalgebra::DMatrix::from_row_slice(2, 2, &[0.5, 0.0, 0.0, 0.5]);
        let oracle = cov.symmetric_eigenvalues();
        for (a, b) in s.eigenvalues.iter().zip(oracle.iter()) {
            let (a, b): (&f64, &f64) = (a, b);
            assert!((a - b).abs() < 1e-12);
        }
        assert_eq!(s.eigenvalues, vec![0.5, 0.5]);
    }

    #[test]
    fn trace_identity_both_routes() {
        let mut r = crate::rng::stream(4, &[]);
        for (n, dim) in [(30, 6), (6, 30)] {
            let rows: Vec<Vec<f64>> = (0..n)
                .map(|_| (0..dim).map(|_| r.random_range(-2.0..2.0)).collect())
                .collect();
            let s = pca_spectrum(&set(&rows), dim).unwrap();
            let sum: f64 = s.eigenvalues.iter().sum();
            assert!((sum - s.total_variance).abs() <= 1e-9 * s.total_variance);
            assert_eq!(s.eigenvalues.len(), dim);
            assert!(s.eigenvalues.windows(2).all(|w| w[0] >= w[1]));
        }
    }

    #[test]
    fn low_rank_tail_vanishes() {
        // rank-2 data embedded in 5 dimensions
        let mut r = crate::rng::stream(5, &[]);
        let rows: Vec<Vec<f64>> = (0..40)
            .map(|_| {
                let (a, b): (f64, f64) = (r.random_range(-1.0..1.0), r.random_range(-1.0..1.0));
                vec![a, b, a + b, 0.5 * a - b, 0.25 * a]
            })
            .collect();
        let s = pca_spectrum(&set(&rows), 5).unwrap();
        assert!(s.eigenvalues[2] < 1e-9 * s.eigenvalues[0]);
    }
}
