//! End-to-end experiments: the similar/diverse mixture sweep with its random
//! and full-pool baselines, and child-vs-parent style diversity comparisons.

mod diversity;
mod report;
mod sweep;

pub use diversity::{
    run_diversity_comparison, run_diversity_report, write_embedding_csv, DiversityOptions,
    DiversityReport,
};
pub use report::{read_report, write_report, ReportPaths};
pub use sweep::{run_mixture_sweep, sweep_descriptors, SweepInputs};

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::classifier::TrainConfig;
use crate::diversity::Embedding2D;
use crate::error::{Error, Result};
use crate::corpus::Manifest;
use crate::gist::GistParams;

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

fn default_p_grid() -> Vec<f64> {
    vec![0.0, 0.25, 0.5, 0.75, 1.0]
}
fn default_n_grid() -> Vec<usize> {
    vec![25, 50, 100, 200]
}
fn default_seeds() -> Vec<u64> {
    (0..5).collect()
}
fn yes() -> bool {
    true
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    #[serde(default = "default_p_grid")]
    pub p_grid: Vec<f64>,
    #[serde(default = "default_n_grid")]
    pub n_grid: Vec<usize>,
    #[serde(default = "default_seeds")]
    pub seeds: Vec<u64>,
    /// One size-matched uniform subset per (n, seed).
    #[serde(default = "yes")]
    pub include_random: bool,
    /// The whole train pool, once per seed.
    #[serde(default = "yes")]
    pub include_full: bool,
    /// Also embed the train pool with MDS (cubic in pool size).
    #[serde(default)]
    pub embed_pool: bool,
}

impl Default for SweepConfig {
    fn default() -> Self {
        SweepConfig {
            p_grid: default_p_grid(),
            n_grid: default_n_grid(),
            seeds: default_seeds(),
            include_random: true,
            include_full: true,
            embed_pool: false,
        }
    }
}

impl SweepConfig {
    pub fn validate(&self) -> Result<()> {
        if self.p_grid.is_empty() || self.n_grid.is_empty() || self.seeds.is_empty() {
            return Err(Error::Validation("sweep grids must be non-empty".into()));
        }
        if let Some(p) = self.p_grid.iter().find(|p| !(0.0..=1.0).contains(*p)) {
            return Err(Error::Validation(format!("sweep.p_grid: {p} outside [0, 1]")));
        }
        if let Some(n) = self.n_grid.iter().find(|&&n| n < 2) {
            return Err(Error::Validation(format!("sweep.n_grid: {n} is below 2")));
        }
        Ok(())
    }
}

/// Everything a `sweep` run needs. Relative paths are resolved against the
/// directory of the config file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub train_manifest: PathBuf,
    /// Manifest holding the test split; defaults to `train_manifest`.
    #[serde(default)]
    pub test_manifest: Option<PathBuf>,
    #[serde(default)]
    pub gist: GistParams,
    #[serde(default)]
    pub sweep: SweepConfig,
    #[serde(default)]
    pub train: TrainConfig,
    pub out_dir: PathBuf,
    #[serde(default)]
    pub cache_dir: Option<PathBuf>,
}

impl ExperimentConfig {
    pub fn resolve_paths(&mut self, base: &Path) {
        let join = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        join(&mut self.train_manifest);
        if let Some(p) = self.test_manifest.as_mut() {
            join(p);
        }
        join(&mut self.out_dir);
        if let Some(p) = self.cache_dir.as_mut() {
            join(p);
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.gist.validate()?;
        self.sweep.validate()?;
        self.train.validate()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CellKind {
    Mixture,
    Random,
    Original,
}

/// One trained-and-evaluated model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellRecord {
    pub kind: CellKind,
    /// Similar fraction; `None` for baselines.
    pub p: Option<f64>,
    /// Images per class in the training subset.
    pub n: usize,
    pub seed: u64,
    pub top1_accuracy: f64,
    /// Mean over classes of the within-class mean pairwise descriptor distance.
    pub mean_pair_dist: f64,
    /// Mean over classes of the within-class top-10 covariance eigenvalue sum.
    pub eig10_sum: f64,
}

impl CellRecord {
    /// The `p` column: the fraction, or `random` / `original`.
    pub fn p_label(&self) -> String {
        match (self.kind, self.p) {
            (CellKind::Mixture, Some(p)) => p.to_string(),
            (CellKind::Random, _) => "random".into(),
            _ => "original".into(),
        }
    }
}

/// Mean and sample standard deviation (n − 1 divisor; 0 for one seed) over seeds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AggregateRecord {
    pub kind: CellKind,
    pub p: Option<f64>,
    pub n: usize,
    pub seeds: usize,
    pub mean_accuracy: f64,
    pub std_accuracy: f64,
    pub mean_pair_dist: f64,
    pub eig10_sum: f64,
}

impl AggregateRecord {
    pub fn p_label(&self) -> String {
        CellRecord {
            kind: self.kind,
            p: self.p,
            n: 0,
            seed: 0,
            top1_accuracy: 0.0,
            mean_pair_dist: 0.0,
            eig10_sum: 0.0,
        }
        .p_label()
    }
}

/// Groups cells by (kind, p, n) in first-appearance order.
pub fn aggregate(cells: &[CellRecord]) -> Vec<AggregateRecord> {
    let mut groups: Vec<(CellKind, Option<f64>, usize, Vec<&CellRecord>)> = Vec::new();
    for c in cells {
        match groups
            .iter_mut()
            .find(|g| g.0 == c.kind && g.1 == c.p && g.2 == c.n)
        {
            Some(g) => g.3.push(c),
            None => groups.push((c.kind, c.p, c.n, vec![c])),
        }
    }
    groups
        .into_iter()
        .map(|(kind, p, n, members)| {
            let k = members.len() as f64;
            let mean = |f: fn(&CellRecord) -> f64| members.iter().map(|c| f(c)).sum::<f64>() / k;
            let mean_accuracy = mean(|c| c.top1_accuracy);
            let std_accuracy = if members.len() > 1 {
                (members
                    .iter()
                    .map(|c| (c.top1_accuracy - mean_accuracy).powi(2))
                    .sum::<f64>()
                    / (k - 1.0))
                    .sqrt()
            } else {
                0.0
            };
            AggregateRecord {
                kind,
                p,
                n,
                seeds: members.len(),
                mean_accuracy,
                std_accuracy,
                mean_pair_dist: mean(|c| c.mean_pair_dist),
                eig10_sum: mean(|c| c.eig10_sum),
            }
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub version: String,
    /// Seconds since the Unix epoch. Only ever written to `report.json`.
    #[serde(default)]
    pub created_unix: Option<u64>,
    pub classes: Vec<String>,
    pub gist: GistParams,
    pub sweep: SweepConfig,
    pub train: TrainConfig,
    pub cells: Vec<CellRecord>,
    pub aggregates: Vec<AggregateRecord>,
    #[serde(default)]
    pub embeddings: Vec<NamedEmbedding>,
}

impl ExperimentReport {
    pub fn aggregate_for(&self, kind: CellKind, p: Option<f64>, n: usize) -> Option<&AggregateRecord> {
        self.aggregates
            .iter()
            .find(|a| a.kind == kind && a.p == p && a.n == n)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NamedEmbedding {
    pub name: String,
    pub embedding: Embedding2D,
    /// Per-point class label, aligned with `embedding.ids`.
    pub classes: Vec<String>,
    pub size_fractions: Vec<Option<f64>>,
}

fn fnv(parts: impl Iterator<Item = String>) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for s in parts {
        for b in s.bytes().chain(std::iter::once(0)) {
            h = (h ^ b as u64).wrapping_mul(0x0100_0000_01b3);
        }
    }
    h
}

pub(crate) fn cache_file(dir: &Path, tag: &str, m: &Manifest, params: &GistParams) -> PathBuf {
    let key = fnv(m.records.iter().flat_map(|r| [r.id.clone(), r.path.display().to_string()]));
    dir.join(format!("{tag}-{:016x}-{key:016x}.gstc", params.params_hash()))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cell(kind: CellKind, p: Option<f64>, n: usize, seed: u64, acc: f64) -> CellRecord {
        CellRecord {
            kind,
            p,
            n,
            seed,
            top1_accuracy: acc,
            mean_pair_dist: acc * 2.0,
            eig10_sum: 1.0,
        }
    }

    #[test]
    fn aggregates_match_hand_averages() {
        let cells = vec![
            cell(CellKind::Mixture, Some(0.5), 25, 0, 0.5),
            cell(CellKind::Mixture, Some(0.5), 25, 1, 0.7),
            cell(CellKind::Random, None, 25, 0, 0.4),
            cell(CellKind::Mixture, Some(0.5), 25, 2, 0.6),
        ];
        let agg = aggregate(&cells);
        assert_eq!(agg.len(), 2);
        assert!((agg[0].mean_accuracy - 0.6).abs() < 1e-12);
        assert!((agg[0].std_accuracy - 0.1).abs() < 1e-12);
        assert_eq!(agg[0].seeds, 3);
        assert_eq!(agg[1].std_accuracy, 0.0);
        assert_eq!(agg[1].p_label(), "random");
    }

    #[test]
    fn sweep_config_defaults_and_validation() {
        let s: SweepConfig = serde_json::from_str("{}").unwrap();
        assert_eq!(s, SweepConfig::default());
        assert_eq!(s.seeds.len(), 5);
        let bad = SweepConfig {
            p_grid: vec![1.5],
            ..SweepConfig::default()
        };
        assert!(bad.validate().unwrap_err().is_validation());
        assert!(serde_json::from_str::<SweepConfig>(r#"{"p": [0]}"#).is_err());
    }

    #[test]
    fn config_paths_resolve_against_base() {
        let mut c: ExperimentConfig =
            serde_json::from_str(r#"{"train_manifest": "m.jsonl", "out_dir": "/abs/out"}"#).unwrap();
        c.resolve_paths(Path::new("/cfg"));
        assert_eq!(c.train_manifest, PathBuf::from("/cfg/m.jsonl"));
        assert_eq!(c.out_dir, PathBuf::from("/abs/out"));
    }
}
