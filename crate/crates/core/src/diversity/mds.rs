use serde::{Deserialize, Serialize};

use super::DistanceMatrix;
use crate::error::{Error, Result};
use crate::linalg::SymmetricEigen;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Embedding2D {
    pub ids: Vec<String>,
    pub coords: Vec<[f64; 2]>,
    /// sqrt(Σ(d̂ − d)² / Σd²) over all pairs.
    pub stress: f64,
}

/// Classical (Torgerson) MDS into two dimensions.
///
/// Columns are centered and signed so that each column's largest-magnitude
/// entry is positive.
pub fn mds_embed(dm: &DistanceMatrix) -> Result<Embedding2D> {
    let n = dm.n;
    if n < 3 {
        return Err(Error::Validation(format!("MDS needs at least 3 points, got {n}")));
    }
    let mut b = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..n {
            let d = dm.get(i, j);
            b[i * n + j] = d * d;
        }
    }
    let row_mean: Vec<f64> = (0..n)
        .map(|i| b[i * n..(i + 1) * n].iter().sum::<f64>() / n as f64)
        .collect();
    let grand = row_mean.iter().sum::<f64>() / n as f64;
    for i in 0..n {
        for j in 0..n {
            b[i * n + j] = -0.5 * (b[i * n + j] - row_mean[i] - row_mean[j] + grand);
        }
    }
    let eig = SymmetricEigen::new(&b, n)?;

    let mut coords = vec![[0.0; 2]; n];
    for axis in 0..2 {
        let lambda = eig.values.get(axis).copied().unwrap_or(0.0).max(0.0);
        let s = lambda.sqrt();
        for (i, c) in coords.iter_mut().enumerate() {
            c[axis] = eig.vectors[i * n + axis] * s;
        }
        let mean = coords.iter().map(|c| c[axis]).sum::<f64>() / n as f64;
        coords.iter_mut().for_each(|c| c[axis] -= mean);
        let mut pivot = 0;
        for i in 0..n {
            if coords[i][axis].abs() > coords[pivot][axis].abs() {
                pivot = i;
            }
        }
        if coords[pivot][axis] < 0.0 {
            coords.iter_mut().for_each(|c| c[axis] = -c[axis]);
        }
    }

    let (mut num, mut den) = (0.0, 0.0);
    for i in 0..n {
        for j in i + 1..n {
            let d = dm.get(i, j);
            let e = ((coords[i][0] - coords[j][0]).powi(2) + (coords[i][1] - coords[j][1]).powi(2))
                .sqrt();
            num += (e - d) * (e - d);
            den += d * d;
        }
    }
    let stress = if den > 0.0 { (num / den).sqrt() } else { 0.0 };
    Ok(Embedding2D {
        ids: dm.ids.clone(),
        coords,
        stress,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn from_points(points: &[Vec<f64>]) -> DistanceMatrix {
        let n = points.len();
        let mut c = Vec::new();
        for i in 0..n {
            for j in i + 1..n {
                let d: f64 = points[i]
                    .iter()
                    .zip(&points[j])
                    .map(|(a, b)| (a - b) * (a - b))
                    .sum::<f64>()
                    .sqrt();
                c.push(d);
            }
        }
        DistanceMatrix::from_condensed(n, c).unwrap()
    }

    fn embedded_distance(e: &Embedding2D, i: usize, j: usize) -> f64 {
        let (a, b) = (e.coords[i], e.coords[j]);
        ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)).sqrt()
    }

    #[test]
    fn equilateral_triangle() {
        let dm = DistanceMatrix::from_condensed(3, vec![1.0, 1.0, 1.0]).unwrap();
        let e = mds_embed(&dm).unwrap();
        for (i, j) in [(0, 1), (0, 2), (1, 2)] {
            assert!((embedded_distance(&e, i, j) - 1.0).abs() < 1e-9);
        }
        assert!(e.stress < 1e-9);
        for axis in 0..2 {
            let m: f64 = e.coords.iter().map(|c| c[axis]).sum::<f64>() / 3.0;
            assert!(m.abs() < 1e-6);
        }
    }

    #[test]
    fn unit_square() {
        let pts = vec![vec![0.0, 0.0], vec![1.0, 0.0], vec![1.0, 1.0], vec![0.0, 1.0]];
        let dm = from_points(&pts);
        let e = mds_embed(&dm).unwrap();
        for i in 0..4 {
            for j in i + 1..4 {
                assert!((embedded_distance(&e, i, j) - dm.get(i, j)).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn tetrahedron_has_stress() {
        let dm = DistanceMatrix::from_condensed(4, vec![1.0; 6]).unwrap();
        assert!(mds_embed(&dm).unwrap().stress > 0.0);
    }

    #[test]
    fn zero_distances() {
        let dm = DistanceMatrix::from_condensed(4, vec![0.0; 6]).unwrap();
        let e = mds_embed(&dm).unwrap();
        assert!(e.coords.iter().all(|c| c[0] == 0.0 && c[1] == 0.0));
        assert_eq!(e.stress, 0.0);
    }

    #[test]
    fn sign_convention() {
        let pts: Vec<Vec<f64>> = (0..7).map(|i| vec![i as f64 * 0.7, ((i * i) % 5) as f64]).collect();
        let e = mds_embed(&from_points(&pts)).unwrap();
        for axis in 0..2 {
            let pivot = e
                .coords
                .iter()
                .map(|c| c[axis])
                .fold(0.0f64, |m, x| if x.abs() > m.abs() { x } else { m });
            assert!(pivot > 0.0);
        }
    }

    #[test]
    fn too_few_points() {
        let dm = DistanceMatrix::from_condensed(2, vec![1.0]).unwrap();
        assert!(mds_embed(&dm).is_err());
    }
}
