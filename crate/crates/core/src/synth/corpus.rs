use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{render_view, sample_viewpoints, ObjectSpec, ViewDistribution};
use crate::corpus::{save_png, ImageRecord, Manifest, Split, CANONICAL_SIDE};
use crate::error::{Error, Result};
use crate::{parallel, rng};

/// An object given inline or by preset name (`"car"`, `"ball"`, ...).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ObjectEntry {
    Preset(String),
    Spec(ObjectSpec),
}

impl ObjectEntry {
    pub fn resolve(&self) -> Result<ObjectSpec> {
        match self {
            ObjectEntry::Preset(name) => ObjectSpec::preset(name).ok_or_else(|| {
                Error::Validation(format!(
                    "unknown object preset `{name}` (known: {})",
                    ObjectSpec::PRESETS.join(", ")
                ))
            }),
            ObjectEntry::Spec(s) => {
                s.validate()?;
                Ok(s.clone())
            }
        }
    }
}

/// A view distribution given inline or by preset name (`"child"`, `"parent"`, `"canonical"`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum DistributionEntry {
    Preset(String),
    Spec(ViewDistribution),
}

impl DistributionEntry {
    pub fn resolve(&self) -> Result<ViewDistribution> {
        let d = match self {
            DistributionEntry::Preset(name) => ViewDistribution::preset(name).ok_or_else(|| {
                Error::Validation(format!(
                    "unknown distribution preset `{name}` (known: child, parent, canonical)"
                ))
            })?,
            DistributionEntry::Spec(d) => d.clone(),
        };
        d.validate()?;
        Ok(d)
    }
}

fn default_side() -> usize {
    CANONICAL_SIDE
}

/// Corpus generation recipe; the JSON form of the `synth` config file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CorpusConfig {
    pub objects: Vec<ObjectEntry>,
    /// Splits without an entry use the canonical distribution (val/test) or fail (train).
    #[serde(default)]
    pub distributions: BTreeMap<Split, DistributionEntry>,
    pub counts: BTreeMap<Split, usize>,
    pub seed: u64,
    #[serde(default = "default_side")]
    pub side: usize,
    pub out_dir: PathBuf,
}

impl CorpusConfig {
    pub fn distribution(&self, split: Split) -> Result<ViewDistribution> {
        match self.distributions.get(&split) {
            Some(d) => d.resolve(),
            None if split == Split::Train => Err(Error::Validation(
                "distributions.train is required".into(),
            )),
            None => Ok(ViewDistribution::canonical()),
        }
    }
}

struct Job {
    class_idx: usize,
    split: Split,
    index: usize,
    view: super::Viewpoint,
}

/// Renders every (object, split, view) to PNG under `out_dir/images` and writes
/// `out_dir/manifest.jsonl`. Output is a pure function of the config.
pub fn generate_corpus(cfg: &CorpusConfig) -> Result<Manifest> {
    let objects = cfg
        .objects
        .iter()
        .map(ObjectEntry::resolve)
        .collect::<Result<Vec<_>>>()?;
    if objects.is_empty() {
        return Err(Error::Validation("no objects".into()));
    }
    if cfg.counts.get(&Split::Train).copied().unwrap_or(0) == 0 {
        return Err(Error::Validation("counts.train must be positive".into()));
    }
    let out_dir = &cfg.out_dir;
    let mut jobs = Vec::new();
    for (&split, &count) in &cfg.counts {
        let dist = cfg.distribution(split)?;
        for class_idx in 0..objects.len() {
            let seed = rng::derive_seed(cfg.seed, &[class_idx as u64, split as u64]);
            for (index, view) in sample_viewpoints(&dist, count, seed).into_iter().enumerate() {
                jobs.push(Job {
                    class_idx,
                    split,
                    index,
                    view,
                });
            }
        }
    }
    for obj in &objects {
        for split in cfg.counts.keys() {
            let d = out_dir.join("images").join(split.as_str()).join(&obj.name);
            fs::create_dir_all(&d).map_err(|e| Error::io(d.display().to_string(), e))?;
        }
    }
    log::info!("rendering {} views into {}", jobs.len(), out_dir.display());

    let records = parallel::map(&jobs, |job| -> Result<ImageRecord> {
        let obj = &objects[job.class_idx];
        let id = format!("{}_{}_{:05}", obj.name, job.split, job.index);
        let path = image_path(out_dir, job.split, &obj.name, &id);
        let img = render_view(obj, &job.view, cfg.side)?;
        save_png(&img, &path)?;
        Ok(ImageRecord {
            id,
            path,
            class_label: obj.name.clone(),
            split: job.split,
            bbox: None,
            size_fraction: Some(job.view.scale),
        })
    })
    .into_iter()
    .collect::<Result<Vec<_>>>()?;

    let classes = objects.iter().map(|o| o.name.clone()).collect();
    let manifest = Manifest::new(records, Some(classes))?;
    manifest.write_jsonl(&out_dir.join("manifest.jsonl"))?;
    Ok(manifest)
}

fn image_path(out_dir: &Path, split: Split, class: &str, id: &str) -> PathBuf {
    out_dir
        .join("images")
        .join(split.as_str())
        .join(class)
        .join(format!("{id}.png"))
}
