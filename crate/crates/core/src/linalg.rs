//! Dense symmetric eigen-decomposition: Householder reduction to tridiagonal
//! form followed by the implicit QL algorithm with Wilkinson-style shifts.

use crate::error::{Error, Result};

/// Eigenvalues in descending order with matching unit eigenvectors.
#[derive(Debug, Clone)]
pub struct SymmetricEigen {
    pub n: usize,
    pub values: Vec<f64>,
    /// Row-major `n × n`; column `j` is the eigenvector of `values[j]`.
    pub vectors: Vec<f64>,
}

impl SymmetricEigen {
    /// Decomposes the symmetric row-major matrix `a` (`n × n`). Only the lower
    /// triangle is read.
    pub fn new(a: &[f64], n: usize) -> Result<Self> {
        assert_eq!(a.len(), n * n, "matrix must be n × n");
        if n == 0 {
            return Ok(SymmetricEigen {
                n,
                values: vec![],
                vectors: vec![],
            });
        }
        let mut z: Vec<Vec<f64>> = (0..n).map(|i| a[i * n..(i + 1) * n].to_vec()).collect();
        let mut d = vec![0.0; n];
        let mut e = vec![0.0; n];
        tridiagonalize(&mut z, &mut d, &mut e);
        ql_implicit(&mut z, &mut d, &mut e)?;

        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&i, &j| d[j].total_cmp(&d[i]));
        let values = order.iter().map(|&i| d[i]).collect();
        let mut vectors = vec![0.0; n * n];
        for (col, &src) in order.iter().enumerate() {
            let mut pivot = 0;
            for k in 0..n {
                if z[k][src].abs() > z[pivot][src].abs() {
                    pivot = k;
                }
            }
            let sign = if z[pivot][src] < 0.0 { -1.0 } else { 1.0 };
            for k in 0..n {
                vectors[k * n + col] = sign * z[k][src];
            }
        }
        Ok(SymmetricEigen { n, values, vectors })
    }

    pub fn vector(&self, j: usize) -> Vec<f64> {
        (0..self.n).map(|k| self.vectors[k * self.n + j]).collect()
    }
}

fn tridiagonalize(z: &mut [Vec<f64>], d: &mut [f64], e: &mut [f64]) {
    let n = d.len();
    for i in (1..n).rev() {
        let l = i - 1;
        let mut h = 0.0;
        if l > 0 {
            let scale: f64 = (0..i).map(|k| z[i][k].abs()).sum();
            if scale == 0.0 {
                e[i] = z[i][l];
            } else {
                for k in 0..i {
                    z[i][k] /= scale;
                    h += z[i][k] * z[i][k];
                }
                let f = z[i][l];
                let g = if f >= 0.0 { -h.sqrt() } else { h.sqrt() };
                e[i] = scale * g;
                h -= f * g;
                z[i][l] = f - g;
                let mut f = 0.0;
                for j in 0..i {
                    z[j][i] = z[i][j] / h;
                    let mut g = 0.0;
                    for k in 0..=j {
                        g += z[j][k] * z[i][k];
                    }
                    for k in j + 1..i {
                        g += z[k][j] * z[i][k];
                    }
                    e[j] = g / h;
                    f += e[j] * z[i][j];
                }
                let hh = f / (h + h);
                for j in 0..i {
                    let f = z[i][j];
                    let g = e[j] - hh * f;
                    e[j] = g;
                    for k in 0..=j {
                        z[j][k] -= f * e[k] + g * z[i][k];
                    }
                }
            }
        } else {
            e[i] = z[i][l];
        }
        d[i] = h;
    }
    d[0] = 0.0;
    e[0] = 0.0;
    for i in 0..n {
        if d[i] != 0.0 {
            for j in 0..i {
                let g: f64 = (0..i).map(|k| z[i][k] * z[k][j]).sum();
                for k in 0..i {
                    let zki = z[k][i];
                    z[k][j] -= g * zki;
                }
            }
        }
        d[i] = z[i][i];
        z[i][i] = 1.0;
        for j in 0..i {
            z[j][i] = 0.0;
            z[i][j] = 0.0;
        }
    }
}

fn ql_implicit(z: &mut [Vec<f64>], d: &mut [f64], e: &mut [f64]) -> Result<()> {
    let n = d.len();
    for i in 1..n {
        e[i - 1] = e[i];
    }
    e[n - 1] = 0.0;
    for l in 0..n {
        let mut iter = 0;
        loop {
            let mut m = l;
            while m < n - 1 {
                let dd = d[m].abs() + d[m + 1].abs();
                if e[m].abs() <= f64::EPSILON * dd {
                    break;
                }
                m += 1;
            }
            if m == l {
                break;
            }
            iter += 1;
            if iter > 100 {
                return Err(Error::Validation(
                    "symmetric eigensolver did not converge".into(),
                ));
            }
            let mut g = (d[l + 1] - d[l]) / (2.0 * e[l]);
            let mut r = g.hypot(1.0);
            g = d[m] - d[l] + e[l] / (g + r.copysign(g));
            let (mut s, mut c, mut p) = (1.0, 1.0, 0.0);
            let mut underflow = false;
            let mut i = m;
            while i > l {
                i -= 1;
                let f = s * e[i];
                let b = c * e[i];
                r = f.hypot(g);
                e[i + 1] = r;
                if r == 0.0 {
                    d[i + 1] -= p;
                    e[m] = 0.0;
                    underflow = true;
                    break;
                }
                s = f / r;
                c = g / r;
                g = d[i + 1] - p;
                r = (d[i] - g) * s + 2.0 * c * b;
                p = s * r;
                d[i + 1] = g + p;
                g = c * r - b;
                for row in z.iter_mut() {
                    let f = row[i + 1];
                    row[i + 1] = s * row[i] + c * f;
                    row[i] = c * row[i] - s * f;
                }
            }
            if underflow {
                continue;
            }
            d[l] -= p;
            e[l] = g;
            e[m] = 0.0;
        }
    }
    Ok(())
}
