//! Diversity statistics of descriptor sets: all-pairs distance histograms,
//! PCA eigen-spectra and classical MDS embeddings.

mod mds;
mod pca;

pub use mds::{mds_embed, Embedding2D};
pub use pca::{pca_spectrum, EigenSpectrum};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gist::DescriptorSet;
use crate::parallel;

/// Condensed upper-triangular Euclidean distances.
#[derive(Debug, Clone, PartialEq)]
pub struct DistanceMatrix {
    pub n: usize,
    pub ids: Vec<String>,
    /// Pair `(i, j)`, `i < j`, lives at [`DistanceMatrix::index`].
    pub condensed: Vec<f64>,
}

impl DistanceMatrix {
    pub fn from_condensed(n: usize, condensed: Vec<f64>) -> Result<Self> {
        if condensed.len() != n * n.saturating_sub(1) / 2 {
            return Err(Error::SizeMismatch {
                expected: n * n.saturating_sub(1) / 2,
                actual: condensed.len(),
            });
        }
        if condensed.iter().any(|d| !(d.is_finite() && *d >= 0.0)) {
            return Err(Error::Validation("distances must be finite and non-negative".into()));
        }
        Ok(DistanceMatrix {
            n,
            ids: (0..n).map(|i| i.to_string()).collect(),
            condensed,
        })
    }

    #[inline]
    pub fn index(n: usize, i: usize, j: usize) -> usize {
        debug_assert!(i < j && j < n);
        i * n - i * (i + 1) / 2 + (j - i - 1)
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        match i.cmp(&j) {
            std::cmp::Ordering::Equal => 0.0,
            std::cmp::Ordering::Less => self.condensed[Self::index(self.n, i, j)],
            std::cmp::Ordering::Greater => self.condensed[Self::index(self.n, j, i)],
        }
    }

    pub fn mean(&self) -> f64 {
        self.condensed.iter().sum::<f64>() / self.condensed.len() as f64
    }

    pub fn median(&self) -> f64 {
        let mut v = self.condensed.clone();
        v.sort_by(f64::total_cmp);
        let m = v.len();
        if m % 2 == 1 {
            v[m / 2]
        } else {
            0.5 * (v[m / 2 - 1] + v[m / 2])
        }
    }

    pub fn max(&self) -> f64 {
        self.condensed.iter().cloned().fold(0.0, f64::max)
    }
}

/// All-pairs Euclidean distances in double precision.
pub fn pairwise_distances(set: &DescriptorSet) -> Result<DistanceMatrix> {
    let n = set.len();
    if n < 2 {
        return Err(Error::Validation(format!(
            "pairwise distances need at least 2 rows, got {n}"
        )));
    }
    let rows = parallel::map_range(n - 1, |i| {
        let a = set.row(i);
        (i + 1..n)
            .map(|j| {
                a.iter()
                    .zip(set.row(j))
                    .map(|(&x, &y)| {
                        let d = x as f64 - y as f64;
                        d * d
                    })
                    .sum::<f64>()
                    .sqrt()
            })
            .collect::<Vec<f64>>()
    });
    Ok(DistanceMatrix {
        n,
        ids: set.ids.clone(),
        condensed: rows.concat(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Histogram {
    pub bin_edges: Vec<f64>,
    pub counts: Vec<u64>,
    pub total: u64,
}

/// Equal-width histogram of the condensed distances. Bins are right-open
/// except the last, which is closed. The default range is `[0, max]`;
/// values outside an explicit range are not counted.
pub fn distance_histogram(
    dm: &DistanceMatrix,
    bins: usize,
    range: Option<(f64, f64)>,
) -> Result<Histogram> {
    if bins == 0 {
        return Err(Error::Validation("histogram needs at least one bin".into()));
    }
    let (lo, hi) = match range {
        Some(r) => r,
        None => {
            let max = dm.max();
            (0.0, if max > 0.0 { max } else { 1.0 })
        }
    };
    if !(lo < hi) {
        return Err(Error::Validation(format!("histogram range [{lo}, {hi}] is empty")));
    }
    let width = hi - lo;
    let mut edges: Vec<f64> = (0..bins).map(|i| lo + width * i as f64 / bins as f64).collect();
    edges.push(hi);
    let mut counts = vec![0u64; bins];
    for &v in &dm.condensed {
        if v < lo || v > hi {
            continue;
        }
        let mut b = (((v - lo) / width) * bins as f64).floor() as usize;
        b = b.min(bins - 1);
        while b > 0 && v < edges[b] {
            b -= 1;
        }
        while b + 1 < bins && v >= edges[b + 1] {
            b += 1;
        }
        counts[b] += 1;
    }
    let total = counts.iter().sum();
    Ok(Histogram {
        bin_edges: edges,
        counts,
        total,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SetSummary {
    pub name: String,
    pub n: usize,
    pub mean_distance: f64,
    pub median_distance: f64,
    pub spectrum: EigenSpectrum,
    pub histogram: Histogram,
}

impl SetSummary {
    pub fn eigen_sum(&self) -> f64 {
        self.spectrum.eigenvalues.iter().sum()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiversityComparison {
    pub params_hash: u64,
    pub a: SetSummary,
    pub b: SetSummary,
    /// `a.eigenvalues[i] > b.eigenvalues[i]` per rank.
    pub dominance: Vec<bool>,
}

impl DiversityComparison {
    pub fn mean_distance_delta(&self) -> f64 {
        self.a.mean_distance - self.b.mean_distance
    }

    pub fn eigen_sum_delta(&self) -> f64 {
        self.a.eigen_sum() - self.b.eigen_sum()
    }
}

/// Compares two descriptor sets over a shared histogram range.
pub fn compare_sets(
    a: &DescriptorSet,
    b: &DescriptorSet,
    names: (&str, &str),
    bins: usize,
    k: usize,
) -> Result<DiversityComparison> {
    if a.params_hash != b.params_hash {
        return Err(Error::ParamsMismatch(a.params_hash, b.params_hash));
    }
    let da = pairwise_distances(a)?;
    let db = pairwise_distances(b)?;
    let hi = da.max().max(db.max());
    let range = (0.0, if hi > 0.0 { hi } else { 1.0 });
    let summary = |name: &str, set: &DescriptorSet, dm: &DistanceMatrix| -> Result<SetSummary> {
        Ok(SetSummary {
            name: name.to_string(),
            n: set.len(),
            mean_distance: dm.mean(),
            median_distance: dm.median(),
            spectrum: pca_spectrum(set, k)?,
            histogram: distance_histogram(dm, bins, Some(range))?,
        })
    };
    let sa = summary(names.0, a, &da)?;
    let sb = summary(names.1, b, &db)?;
    let dominance = sa
        .spectrum
        .eigenvalues
        .iter()
        .zip(&sb.spectrum.eigenvalues)
        .map(|(x, y)| x > y)
        .collect();
    Ok(DiversityComparison {
        params_hash: a.params_hash,
        a: sa,
        b: sb,
        dominance,
    })
}
