//! GIST descriptor: contrast prefiltering followed by oriented log-Gabor
//! energy pooled on a coarse spatial grid.

mod bank;
mod cache;
mod fft;
mod prefilter;

pub use bank::{gabor_bank, GaborFilter, TOP_FREQUENCY};
pub use cache::{batch_descriptors, read_cache, write_cache};
pub use fft::Fft2d;

use rustfft::num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::corpus::GrayImage;
use crate::error::{Error, Result};

fn default_side() -> usize {
    128
}
fn default_orientations() -> Vec<usize> {
    vec![8, 8, 8, 8]
}
fn default_blocks() -> usize {
    4
}
fn default_cutoff() -> f64 {
    4.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GistParams {
    #[serde(default = "default_side")]
    pub image_side: usize,
    #[serde(default = "default_orientations")]
    pub orientations_per_scale: Vec<usize>,
    #[serde(default = "default_blocks")]
    pub blocks: usize,
    /// Prefilter cutoff in cycles per image.
    #[serde(default = "default_cutoff")]
    pub prefilter_cutoff: f64,
}

impl Default for GistParams {
    fn default() -> Self {
        GistParams {
            image_side: default_side(),
            orientations_per_scale: default_orientations(),
            blocks: default_blocks(),
            prefilter_cutoff: default_cutoff(),
        }
    }
}

impl GistParams {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Validation(m));
        if self.blocks == 0 || self.image_side == 0 || self.image_side % self.blocks != 0 {
            return bad(format!(
                "image_side {} must be a positive multiple of blocks {}",
                self.image_side, self.blocks
            ));
        }
        if self.orientations_per_scale.is_empty() || self.orientations_per_scale.contains(&0) {
            return bad("every scale needs at least one orientation".into());
        }
        if !(self.prefilter_cutoff > 0.0 && self.prefilter_cutoff.is_finite()) {
            return bad(format!("prefilter_cutoff {} must be > 0", self.prefilter_cutoff));
        }
        Ok(())
    }

    pub fn n_filters(&self) -> usize {
        self.orientations_per_scale.iter().sum()
    }

    pub fn dim(&self) -> usize {
        self.blocks * self.blocks * self.n_filters()
    }

    /// FNV-1a over a canonical byte encoding of the parameters.
    pub fn params_hash(&self) -> u64 {
        let mut bytes = Vec::new();
        bytes.extend_from_slice(b"gist-v1");
        bytes.extend_from_slice(&(self.image_side as u64).to_le_bytes());
        bytes.extend_from_slice(&(self.orientations_per_scale.len() as u64).to_le_bytes());
        for &o in &self.orientations_per_scale {
            bytes.extend_from_slice(&(o as u64).to_le_bytes());
        }
        bytes.extend_from_slice(&(self.blocks as u64).to_le_bytes());
        bytes.extend_from_slice(&self.prefilter_cutoff.to_bits().to_le_bytes());
        fnv1a(&bytes)
    }
}

fn fnv1a(bytes: &[u8]) -> u64 {
    bytes.iter().fold(0xcbf2_9ce4_8422_2325u64, |h, &b| {
        (h ^ b as u64).wrapping_mul(0x0100_0000_01b3)
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct GistDescriptor {
    /// Pooled magnitudes in (scale, orientation, block-row, block-col) order.
    pub values: Vec<f64>,
    pub params_hash: u64,
}

/// Descriptors of many images, one row per id. Stored in single precision.
#[derive(Debug, Clone, PartialEq)]
pub struct DescriptorSet {
    pub ids: Vec<String>,
    pub dim: usize,
    pub data: Vec<f32>,
    pub params_hash: u64,
}

impl DescriptorSet {
    pub fn new(ids: Vec<String>, dim: usize, data: Vec<f32>, params_hash: u64) -> Result<Self> {
        if data.len() != ids.len() * dim {
            return Err(Error::SizeMismatch {
                expected: ids.len() * dim,
                actual: data.len(),
            });
        }
        Ok(DescriptorSet {
            ids,
            dim,
            data,
            params_hash,
        })
    }

    /// Builds a set from double-precision rows (rounded to `f32`).
    pub fn from_rows(ids: Vec<String>, rows: &[Vec<f64>], params_hash: u64) -> Result<Self> {
        let dim = rows.first().map_or(0, Vec::len);
        if let Some(r) = rows.iter().find(|r| r.len() != dim) {
            return Err(Error::SizeMismatch {
                expected: dim,
                actual: r.len(),
            });
        }
        let data = rows.iter().flatten().map(|&v| v as f32).collect();
        DescriptorSet::new(ids, dim, data, params_hash)
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn row(&self, i: usize) -> &[f32] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn index_of(&self, id: &str) -> Option<usize> {
        self.ids.iter().position(|x| x == id)
    }

    /// Rows at `indices`, in that order.
    pub fn select(&self, indices: &[usize]) -> DescriptorSet {
        let mut data = Vec::with_capacity(indices.len() * self.dim);
        for &i in indices {
            data.extend_from_slice(self.row(i));
        }
        DescriptorSet {
            ids: indices.iter().map(|&i| self.ids[i].clone()).collect(),
            dim: self.dim,
            data,
            params_hash: self.params_hash,
        }
    }

    /// Rows matching `ids` (by lookup), in the order given.
    pub fn select_ids<'a>(&self, ids: impl IntoIterator<Item = &'a str>) -> Result<DescriptorSet> {
        let lookup: std::collections::HashMap<&str, usize> = self
            .ids
            .iter()
            .enumerate()
            .map(|(i, id)| (id.as_str(), i))
            .collect();
        let idx = ids
            .into_iter()
            .map(|id| {
                lookup
                    .get(id)
                    .copied()
                    .ok_or_else(|| Error::Validation(format!("no descriptor for id `{id}`")))
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(self.select(&idx))
    }
}

/// Precomputed FFT plans, prefilter gain and filter bank for one parameter set.
/// Build once and share across threads.
#[derive(Debug, Clone)]
pub struct GistExtractor {
    params: GistParams,
    hash: u64,
    fft: Fft2d,
    lowpass: Vec<f64>,
    bank: Vec<GaborFilter>,
}

impl GistExtractor {
    pub fn new(params: &GistParams) -> Result<Self> {
        params.validate()?;
        let n = params.image_side;
        Ok(GistExtractor {
            params: params.clone(),
            hash: params.params_hash(),
            fft: Fft2d::new(n),
            lowpass: prefilter::lowpass_gain(n, params.prefilter_cutoff),
            bank: gabor_bank(params),
        })
    }

    pub fn params(&self) -> &GistParams {
        &self.params
    }

    pub fn bank(&self) -> &[GaborFilter] {
        &self.bank
    }

    pub fn prefilter(&self, img: &GrayImage) -> Result<Vec<f64>> {
        self.check_size(img)?;
        Ok(prefilter::prefilter_with(&self.fft, &self.lowpass, &img.pixels))
    }

    fn check_size(&self, img: &GrayImage) -> Result<()> {
        let n = self.params.image_side;
        if img.width != n || img.height != n {
            return Err(Error::SizeMismatch {
                expected: n * n,
                actual: img.width * img.height,
            });
        }
        Ok(())
    }

    pub fn describe(&self, img: &GrayImage) -> Result<GistDescriptor> {
        let field = self.prefilter(img)?;
        let n = self.params.image_side;
        let blocks = self.params.blocks;
        let cell = n / blocks;
        let norm = 1.0 / (cell * cell) as f64;

        let mut spectrum: Vec<Complex64> = field.iter().map(|&v| Complex64::new(v, 0.0)).collect();
        self.fft.forward(&mut spectrum);

        let mut values = Vec::with_capacity(self.params.dim());
        let mut buf = vec![Complex64::default(); n * n];
        for filter in &self.bank {
            for ((b, s), g) in buf.iter_mut().zip(&spectrum).zip(&filter.transfer) {
                *b = *s * *g;
            }
            self.fft.inverse(&mut buf);
            let mut pooled = vec![0.0; blocks * blocks];
            for r in 0..n {
                let row_off = (r / cell) * blocks;
                for c in 0..n {
                    pooled[row_off + c / cell] += buf[r * n + c].norm();
                }
            }
            values.extend(pooled.into_iter().map(|v| v * norm));
        }
        Ok(GistDescriptor {
            values,
            params_hash: self.hash,
        })
    }
}

/// Computes the GIST descriptor of a square image at `params.image_side`.
pub fn gist_descriptor(img: &GrayImage, params: &GistParams) -> Result<GistDescriptor> {
    GistExtractor::new(params)?.describe(img)
}

/// Prefilters a square image with the given cutoff (cycles/image).
pub fn prefilter(img: &GrayImage, cutoff: f64) -> Result<Vec<f64>> {
    if !img.is_square() {
        return Err(Error::Validation(format!(
            "prefilter needs a square image, got {}x{}",
            img.width, img.height
        )));
    }
    let n = img.width;
    Ok(prefilter::prefilter_with(
        &Fft2d::new(n),
        &prefilter::lowpass_gain(n, cutoff),
        &img.pixels,
    ))
}
