//! Descriptor cache file.
//!
//! Layout (little-endian): magic `GSTC`, version `u16`, params hash `u64`,
//! row count `u32`, dim `u32`, ids as `u32` length + UTF-8 bytes, row-major
//! `f32` values, CRC32 of the value block.

use std::fs;
use std::path::Path;

use super::{DescriptorSet, GistExtractor, GistParams};
use crate::corpus::{load_image, Manifest};
use crate::error::{Error, Result};
use crate::parallel;

const MAGIC: &[u8; 4] = b"GSTC";
const VERSION: u16 = 1;

pub fn write_cache(path: &Path, set: &DescriptorSet) -> Result<()> {
    let mut out = Vec::with_capacity(22 + set.data.len() * 4 + set.ids.len() * 16);
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.extend_from_slice(&set.params_hash.to_le_bytes());
    out.extend_from_slice(&(set.ids.len() as u32).to_le_bytes());
    out.extend_from_slice(&(set.dim as u32).to_le_bytes());
    for id in &set.ids {
        out.extend_from_slice(&(id.len() as u32).to_le_bytes());
        out.extend_from_slice(id.as_bytes());
    }
    let start = out.len();
    for v in &set.data {
        out.extend_from_slice(&v.to_le_bytes());
    }
    let crc = crc32fast::hash(&out[start..]);
    out.extend_from_slice(&crc.to_le_bytes());
    if let Some(dir) = path.parent() {
        if !dir.as_os_str().is_empty() {
            fs::create_dir_all(dir).map_err(|e| Error::io(dir.display().to_string(), e))?;
        }
    }
    fs::write(path, out).map_err(|e| Error::io(path.display().to_string(), e))
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.pos + n > self.buf.len() {
            return Err(corrupt("truncated"));
        }
        let s = &self.buf[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u16(&mut self) -> Result<u16> {
        Ok(u16::from_le_bytes(self.take(2)?.try_into().unwrap()))
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
}

fn corrupt(what: &str) -> Error {
    Error::Validation(format!("descriptor cache {what}"))
}

pub fn read_cache(path: &Path) -> Result<DescriptorSet> {
    let buf = fs::read(path).map_err(|e| Error::io(path.display().to_string(), e))?;
    let mut r = Reader { buf: &buf, pos: 0 };
    if r.take(4)? != MAGIC {
        return Err(corrupt("has bad magic"));
    }
    let version = r.u16()?;
    if version != VERSION {
        return Err(corrupt(&format!("version {version} is unsupported")));
    }
    let params_hash = r.u64()?;
    let rows = r.u32()? as usize;
    let dim = r.u32()? as usize;
    let mut ids = Vec::with_capacity(rows);
    for _ in 0..rows {
        let len = r.u32()? as usize;
        let s = std::str::from_utf8(r.take(len)?).map_err(|_| corrupt("has a non-UTF-8 id"))?;
        ids.push(s.to_string());
    }
    let block = r.take(rows * dim * 4)?;
    let crc = r.u32()?;
    if r.pos != buf.len() {
        return Err(corrupt("has trailing bytes"));
    }
    if crc32fast::hash(block) != crc {
        return Err(corrupt("checksum mismatch"));
    }
    let data = block
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
        .collect();
    DescriptorSet::new(ids, dim, data, params_hash)
}

/// Descriptors for every manifest record, in manifest order.
///
/// A cache at `cache_path` is used when its params hash and id list match;
/// otherwise descriptors are recomputed and the cache is (re)written.
pub fn batch_descriptors(
    manifest: &Manifest,
    params: &GistParams,
    cache_path: Option<&Path>,
) -> Result<DescriptorSet> {
    params.validate()?;
    let hash = params.params_hash();
    if let Some(path) = cache_path.filter(|p| p.exists()) {
        match read_cache(path) {
            Ok(set)
                if set.params_hash == hash
                    && set.ids.iter().eq(manifest.records.iter().map(|r| &r.id)) =>
            {
                log::info!("descriptor cache hit: {}", path.display());
                return Ok(set);
            }
            Ok(_) => log::warn!(
                "descriptor cache {} does not match params or records; recomputing",
                path.display()
            ),
            Err(e) => log::warn!("{}: {e}; recomputing", path.display()),
        }
    }

    let extractor = GistExtractor::new(params)?;
    log::info!("computing {} descriptors", manifest.records.len());
    let rows = parallel::map(&manifest.records, |rec| -> Result<Vec<f32>> {
        let img = load_image(rec, params.image_side)?;
        let d = extractor.describe(&img)?;
        Ok(d.values.into_iter().map(|v| v as f32).collect())
    });
    let mut data = Vec::with_capacity(manifest.records.len() * params.dim());
    for row in rows {
        data.extend(row?);
    }
    let ids = manifest.records.iter().map(|r| r.id.clone()).collect();
    let set = DescriptorSet::new(ids, params.dim(), data, hash)?;
    if let Some(path) = cache_path {
        write_cache(path, &set)?;
    }
    Ok(set)
}
