use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{cache_file, NamedEmbedding};
use crate::corpus::Manifest;
use crate::diversity::{
    compare_sets, distance_histogram, mds_embed, pairwise_distances, pca_spectrum,
    DiversityComparison, EigenSpectrum, Histogram, SetSummary,
};
use crate::error::{Error, Result};
use crate::gist::{batch_descriptors, DescriptorSet, GistParams};

fn default_bins() -> usize {
    50
}
fn default_top_k() -> usize {
    10
}
fn yes() -> bool {
    true
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DiversityOptions {
    #[serde(default = "default_bins")]
    pub bins: usize,
    #[serde(default = "default_top_k")]
    pub top_k: usize,
    /// Classical MDS of every set (and of the union when comparing).
    #[serde(default = "yes")]
    pub embed: bool,
}

impl Default for DiversityOptions {
    fn default() -> Self {
        DiversityOptions {
            bins: default_bins(),
            top_k: default_top_k(),
            embed: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiversityReport {
    pub summary: SetSummary,
    pub embedding: Option<NamedEmbedding>,
}

fn descriptors(m: &Manifest, params: &GistParams, cache_dir: Option<&Path>, tag: &str) -> Result<DescriptorSet> {
    if m.is_empty() {
        return Err(Error::Validation(format!("manifest `{tag}` has no records")));
    }
    if let Some(dir) = cache_dir {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir.display().to_string(), e))?;
    }
    let path = cache_dir.map(|d| cache_file(d, tag, m, params));
    batch_descriptors(m, params, path.as_deref())
}

fn embed(name: &str, records: &[&crate::corpus::ImageRecord], set: &DescriptorSet) -> Result<NamedEmbedding> {
    let embedding = mds_embed(&pairwise_distances(set)?)?;
    Ok(NamedEmbedding {
        name: name.to_string(),
        embedding,
        classes: records.iter().map(|r| r.class_label.clone()).collect(),
        size_fractions: records.iter().map(|r| r.size_fraction).collect(),
    })
}

/// Distances, histogram, spectrum and (optionally) MDS of one image set.
/// When `out_dir` is given, writes `histogram_<name>.csv`,
/// `spectrum_<name>.csv` and `embedding_<name>.csv` there.
pub fn run_diversity_report(
    manifest: &Manifest,
    name: &str,
    params: &GistParams,
    opts: &DiversityOptions,
    cache_dir: Option<&Path>,
    out_dir: Option<&Path>,
) -> Result<DiversityReport> {
    let set = descriptors(manifest, params, cache_dir, name)?;
    let dm = pairwise_distances(&set)?;
    let summary = SetSummary {
        name: name.to_string(),
        n: set.len(),
        mean_distance: dm.mean(),
        median_distance: dm.median(),
        spectrum: pca_spectrum(&set, opts.top_k)?,
        histogram: distance_histogram(&dm, opts.bins, None)?,
    };
    let embedding = if opts.embed && set.len() >= 3 {
        let recs: Vec<_> = manifest.records.iter().collect();
        Some(NamedEmbedding {
            name: name.to_string(),
            embedding: mds_embed(&dm)?,
            classes: recs.iter().map(|r| r.class_label.clone()).collect(),
            size_fractions: recs.iter().map(|r| r.size_fraction).collect(),
        })
    } else {
        None
    };
    if let Some(dir) = out_dir {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir.display().to_string(), e))?;
        write_summary_files(dir, &summary)?;
        if let Some(e) = &embedding {
            write_embedding_csv(&dir.join(format!("embedding_{name}.csv")), e, None)?;
        }
    }
    Ok(DiversityReport { summary, embedding })
}

/// Compares two image sets over a shared histogram range. With `out_dir`,
/// writes per-set histogram/spectrum/embedding CSVs, `embedding_combined.csv`
/// (both sets in one MDS space) and `comparison.json`.
pub fn run_diversity_comparison(
    a: &Manifest,
    b: &Manifest,
    names: (&str, &str),
    params: &GistParams,
    opts: &DiversityOptions,
    cache_dir: Option<&Path>,
    out_dir: Option<&Path>,
) -> Result<DiversityComparison> {
    if names.0 == names.1 {
        return Err(Error::Validation(format!("set names must differ, both are `{}`", names.0)));
    }
    let sa = descriptors(a, params, cache_dir, names.0)?;
    let sb = descriptors(b, params, cache_dir, names.1)?;
    let cmp = compare_sets(&sa, &sb, names, opts.bins, opts.top_k)?;
    let Some(dir) = out_dir else {
        return Ok(cmp);
    };
    fs::create_dir_all(dir).map_err(|e| Error::io(dir.display().to_string(), e))?;
    write_summary_files(dir, &cmp.a)?;
    write_summary_files(dir, &cmp.b)?;
    if opts.embed {
        let ra: Vec<_> = a.records.iter().collect();
        let rb: Vec<_> = b.records.iter().collect();
        for (name, recs, set) in [(names.0, &ra, &sa), (names.1, &rb, &sb)] {
            if set.len() >= 3 {
                let e = embed(name, recs, set)?;
                write_embedding_csv(&dir.join(format!("embedding_{name}.csv")), &e, None)?;
            }
        }
        let union = DescriptorSet::new(
            sa.ids.iter().chain(&sb.ids).cloned().collect(),
            sa.dim,
            sa.data.iter().chain(&sb.data).copied().collect(),
            sa.params_hash,
        )?;
        let recs: Vec<_> = ra.iter().chain(&rb).copied().collect();
        let e = embed("combined", &recs, &union)?;
        let sets: Vec<&str> = std::iter::repeat_n(names.0, sa.len())
            .chain(std::iter::repeat_n(names.1, sb.len()))
            .collect();
        write_embedding_csv(&dir.join("embedding_combined.csv"), &e, Some(&sets))?;
    }
    let path = dir.join("comparison.json");
    fs::write(&path, serde_json::to_string_pretty(&cmp)?)
        .map_err(|e| Error::io(path.display().to_string(), e))?;
    Ok(cmp)
}

fn write_summary_files(dir: &Path, s: &SetSummary) -> Result<()> {
    write_histogram_csv(&dir.join(format!("histogram_{}.csv", s.name)), &s.histogram)?;
    write_spectrum_csv(&dir.join(format!("spectrum_{}.csv", s.name)), &s.spectrum)
}

fn flush(mut w: csv::Writer<fs::File>, path: &Path) -> Result<()> {
    w.flush().map_err(|e| Error::io(path.display().to_string(), e))
}

/// `bin_lo,bin_hi,count`
pub fn write_histogram_csv(path: &Path, h: &Histogram) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["bin_lo", "bin_hi", "count"])?;
    for (i, c) in h.counts.iter().enumerate() {
        w.write_record([
            h.bin_edges[i].to_string(),
            h.bin_edges[i + 1].to_string(),
            c.to_string(),
        ])?;
    }
    flush(w, path)
}

/// `rank,eigenvalue` with 1-based ranks.
pub fn write_spectrum_csv(path: &Path, s: &EigenSpectrum) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["rank", "eigenvalue"])?;
    for (i, v) in s.eigenvalues.iter().enumerate() {
        w.write_record([(i + 1).to_string(), v.to_string()])?;
    }
    flush(w, path)
}

/// `id,x,y,size_fraction,class`, plus a trailing `set` column when `sets` is given.
pub fn write_embedding_csv(path: &Path, e: &NamedEmbedding, sets: Option<&[&str]>) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    let mut header = vec!["id", "x", "y", "size_fraction", "class"];
    if sets.is_some() {
        header.push("set");
    }
    w.write_record(&header)?;
    for (i, id) in e.embedding.ids.iter().enumerate() {
        let [x, y] = e.embedding.coords[i];
        let mut row = vec![
            id.clone(),
            x.to_string(),
            y.to_string(),
            e.size_fractions[i].map(|s| s.to_string()).unwrap_or_default(),
            e.classes[i].clone(),
        ];
        if let Some(s) = sets {
            row.push(s[i].to_string());
        }
        w.write_record(&row)?;
    }
    flush(w, path)
}
