//! Per-class similar/diverse split by distance to the class medoid, and
//! class-balanced sampling of similar/diverse mixtures.

use std::collections::{BTreeMap, HashSet};
use std::fmt;
use std::path::Path;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::corpus::{Manifest, Split};
use crate::diversity::pairwise_distances;
use crate::error::{Error, Result};
use crate::gist::DescriptorSet;
use crate::rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Subset {
    Similar,
    Diverse,
}

impl fmt::Display for Subset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Subset::Similar => "similar",
            Subset::Diverse => "diverse",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PartitionEntry {
    pub id: String,
    pub class: String,
    pub subset: Subset,
    pub medoid_distance: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct PartitionLabels {
    /// Train records in manifest order.
    pub entries: Vec<PartitionEntry>,
    pub assignment: BTreeMap<String, Subset>,
    /// class → (n_similar, n_diverse)
    pub per_class_counts: BTreeMap<String, (usize, usize)>,
    /// class → id of its medoid
    pub medoids: BTreeMap<String, String>,
}

impl PartitionLabels {
    /// Ids of one class's pool, in manifest order.
    pub fn pool(&self, class: &str, subset: Subset) -> Vec<&str> {
        self.entries
            .iter()
            .filter(|e| e.class == class && e.subset == subset)
            .map(|e| e.id.as_str())
            .collect()
    }

    /// Writes `id,class,subset,medoid_distance`.
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        w.write_record(["id", "class", "subset", "medoid_distance"])?;
        for e in &self.entries {
            w.write_record([
                e.id.as_str(),
                e.class.as_str(),
                &e.subset.to_string(),
                &e.medoid_distance.to_string(),
            ])?;
        }
        w.flush().map_err(|e| Error::io(path.display().to_string(), e))
    }
}

/// Labels each class's train images: the ⌈m/2⌉ closest to the class medoid
/// are `similar`, the rest `diverse`. Ties (medoid choice and ranking) go to
/// the earlier manifest record.
pub fn split_similar_diverse(set: &DescriptorSet, manifest: &Manifest) -> Result<PartitionLabels> {
    let mut out = PartitionLabels::default();
    let mut entries: Vec<(usize, PartitionEntry)> = Vec::new();
    let index: BTreeMap<&str, usize> = set
        .ids
        .iter()
        .enumerate()
        .map(|(i, id)| (id.as_str(), i))
        .collect();
    for class in &manifest.classes {
        let members: Vec<(usize, &str)> = manifest
            .records
            .iter()
            .enumerate()
            .filter(|(_, r)| r.split == Split::Train && &r.class_label == class)
            .map(|(pos, r)| (pos, r.id.as_str()))
            .collect();
        let m = members.len();
        if m < 2 {
            return Err(Error::Validation(format!(
                "class `{class}` has {m} train images; at least 2 are needed to partition"
            )));
        }
        let rows = members
            .iter()
            .map(|(_, id)| {
                index
                    .get(id)
                    .copied()
                    .ok_or_else(|| Error::Validation(format!("no descriptor for id `{id}`")))
            })
            .collect::<Result<Vec<_>>>()?;
        let dm = pairwise_distances(&set.select(&rows))?;
        let mut medoid = 0;
        let mut best = f64::INFINITY;
        for i in 0..m {
            let total: f64 = (0..m).map(|j| dm.get(i, j)).sum();
            if total < best {
                best = total;
                medoid = i;
            }
        }
        let mut ranked: Vec<usize> = (0..m).collect();
        ranked.sort_by(|&a, &b| dm.get(medoid, a).total_cmp(&dm.get(medoid, b)).then(a.cmp(&b)));
        let n_similar = m.div_ceil(2);
        let mut subset = vec![Subset::Diverse; m];
        for &i in &ranked[..n_similar] {
            subset[i] = Subset::Similar;
        }
        for (i, &(pos, id)) in members.iter().enumerate() {
            entries.push((
                pos,
                PartitionEntry {
                    id: id.to_string(),
                    class: class.clone(),
                    subset: subset[i],
                    medoid_distance: dm.get(medoid, i),
                },
            ));
        }
        out.per_class_counts
            .insert(class.clone(), (n_similar, m - n_similar));
        out.medoids.insert(class.clone(), members[medoid].1.to_string());
    }
    entries.sort_by_key(|(pos, _)| *pos);
    for (_, e) in entries {
        out.assignment.insert(e.id.clone(), e.subset);
        out.entries.push(e);
    }
    Ok(out)
}

/// Recipe for a class-balanced similar/diverse mixture.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MixtureSpec {
    /// Fraction drawn from the similar pool.
    pub p: f64,
    pub n_per_class: usize,
    pub seed: u64,
}

impl MixtureSpec {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.p) {
            return Err(Error::Validation(format!("p = {} outside [0, 1]", self.p)));
        }
        if self.n_per_class == 0 {
            return Err(Error::Validation("n_per_class must be at least 1".into()));
        }
        Ok(())
    }

    /// Number of similar images per class: `p·n` rounded half up.
    pub fn similar_count(&self) -> usize {
        (self.p * self.n_per_class as f64 + 0.5).floor() as usize
    }
}

fn shuffled<'a>(pool: &[&'a str], seed: u64, keys: &[u64]) -> Vec<&'a str> {
    let mut v = pool.to_vec();
    v.shuffle(&mut rng::stream(seed, keys));
    v
}

fn check_pool(class: &str, pool: &'static str, needed: usize, available: usize) -> Result<()> {
    if available < needed {
        return Err(Error::InsufficientPool {
            class: class.to_string(),
            pool,
            needed,
            available,
        });
    }
    Ok(())
}

fn keep_ids(manifest: &Manifest, keep: &HashSet<&str>) -> Manifest {
    Manifest {
        records: manifest
            .records
            .iter()
            .filter(|r| keep.contains(r.id.as_str()))
            .map(|r| {
                let mut r = r.clone();
                r.split = Split::Train;
                r
            })
            .collect(),
        classes: manifest.classes.clone(),
    }
}

/// Draws `round(p·n)` similar and `n − round(p·n)` diverse images per class.
///
/// Each pool is shuffled once per (seed, class) and sampled by prefix, so
/// raising `p` by `1/n` swaps exactly one diverse image for a similar one.
/// Records keep manifest order.
pub fn sample_mixture(
    partition: &PartitionLabels,
    manifest: &Manifest,
    spec: &MixtureSpec,
) -> Result<Manifest> {
    spec.validate()?;
    let k = spec.similar_count();
    let mut keep = HashSet::new();
    for (ci, class) in manifest.classes.iter().enumerate() {
        let similar = partition.pool(class, Subset::Similar);
        let diverse = partition.pool(class, Subset::Diverse);
        check_pool(class, "similar", k, similar.len())?;
        check_pool(class, "diverse", spec.n_per_class - k, diverse.len())?;
        let ci = ci as u64;
        keep.extend(shuffled(&similar, spec.seed, &[rng::TAG_SIMILAR, ci]).into_iter().take(k));
        keep.extend(
            shuffled(&diverse, spec.seed, &[rng::TAG_DIVERSE, ci])
                .into_iter()
                .take(spec.n_per_class - k),
        );
    }
    Ok(keep_ids(manifest, &keep))
}

/// Uniform class-balanced subset of the train split.
pub fn sample_random(manifest: &Manifest, n_per_class: usize, seed: u64) -> Result<Manifest> {
    let mut keep = HashSet::new();
    for (ci, class) in manifest.classes.iter().enumerate() {
        let pool: Vec<&str> = manifest
            .records
            .iter()
            .filter(|r| r.split == Split::Train && &r.class_label == class)
            .map(|r| r.id.as_str())
            .collect();
        check_pool(class, "train", n_per_class, pool.len())?;
        keep.extend(
            shuffled(&pool, seed, &[rng::TAG_RANDOM, ci as u64])
                .into_iter()
                .take(n_per_class),
        );
    }
    Ok(keep_ids(manifest, &keep))
}
