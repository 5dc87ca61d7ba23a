use std::fs;
use std::path::{Path, PathBuf};

use divmix::corpus::{load_manifest, split_manifest, Manifest, Split};
use divmix::experiment::{
    read_report, run_diversity_comparison, run_diversity_report, run_mixture_sweep, write_report,
    DiversityOptions, ExperimentConfig,
};
use divmix::gist::{batch_descriptors, GistParams};
use divmix::partition::{sample_mixture, split_similar_diverse, MixtureSpec};
use divmix::synth::{generate_corpus, CorpusConfig};
use divmix::Error;
use serde::{Deserialize, Serialize};

use crate::config::resolve;

pub const CACHE_ENV: &str = "DIVMIX_CACHE_DIR";

/// `gist`: extract descriptors for a manifest into `out_dir/descriptors.gstc`.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GistJob {
    pub manifest: PathBuf,
    #[serde(default)]
    pub split: Option<Split>,
    #[serde(default)]
    pub gist: GistParams,
    pub out_dir: PathBuf,
}

fn default_name() -> String {
    "set".into()
}

/// `diversity`: distances, histogram, spectrum and MDS for one image set.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DiversityJob {
    pub manifest: PathBuf,
    #[serde(default)]
    pub split: Option<Split>,
    #[serde(default = "default_name")]
    pub name: String,
    #[serde(default)]
    pub gist: GistParams,
    #[serde(default)]
    pub diversity: DiversityOptions,
    pub out_dir: PathBuf,
    #[serde(default)]
    pub cache_dir: Option<PathBuf>,
}

fn default_names() -> [String; 2] {
    ["a".into(), "b".into()]
}

/// `compare`: two image sets side by side on a shared histogram range.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CompareJob {
    pub manifest_a: PathBuf,
    pub manifest_b: PathBuf,
    #[serde(default)]
    pub split_a: Option<Split>,
    #[serde(default)]
    pub split_b: Option<Split>,
    #[serde(default = "default_names")]
    pub names: [String; 2],
    #[serde(default)]
    pub gist: GistParams,
    #[serde(default)]
    pub diversity: DiversityOptions,
    pub out_dir: PathBuf,
    #[serde(default)]
    pub cache_dir: Option<PathBuf>,
}

/// `partition`: similar/diverse labels for the train split, plus an optional
/// sampled mixture manifest.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PartitionJob {
    pub manifest: PathBuf,
    #[serde(default)]
    pub gist: GistParams,
    #[serde(default)]
    pub mixture: Option<MixtureSpec>,
    pub out_dir: PathBuf,
    #[serde(default)]
    pub cache_dir: Option<PathBuf>,
}

fn ensure_dir(dir: &Path) -> divmix::Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir.display().to_string(), e))
}

/// Writes the effective configuration next to the outputs.
fn echo<T: Serialize>(out_dir: &Path, cfg: &T) -> divmix::Result<()> {
    ensure_dir(out_dir)?;
    let path = out_dir.join("config.json");
    fs::write(&path, serde_json::to_string_pretty(cfg)? + "\n")
        .map_err(|e| Error::io(path.display().to_string(), e))
}

/// Config value, then `DIVMIX_CACHE_DIR`, then `out_dir/cache`.
fn cache_dir(configured: &Option<PathBuf>, out_dir: &Path) -> PathBuf {
    configured
        .clone()
        .or_else(|| std::env::var_os(CACHE_ENV).map(PathBuf::from))
        .unwrap_or_else(|| out_dir.join("cache"))
}

fn manifest_split(path: &Path, split: Option<Split>) -> divmix::Result<Manifest> {
    let m = load_manifest(path)?;
    let m = match split {
        Some(s) => split_manifest(&m, s),
        None => m,
    };
    if m.is_empty() {
        return Err(Error::Validation(format!(
            "{}: no records{}",
            path.display(),
            split.map(|s| format!(" in split `{s}`")).unwrap_or_default()
        )));
    }
    Ok(m)
}

pub fn synth(mut cfg: CorpusConfig, base: &Path) -> divmix::Result<()> {
    resolve(base, &mut cfg.out_dir);
    let manifest = generate_corpus(&cfg)?;
    echo(&cfg.out_dir, &cfg)?;
    log::info!("images rendered: {}", manifest.len());
    println!("{}", cfg.out_dir.join("manifest.jsonl").display());
    Ok(())
}

pub fn gist(mut job: GistJob, base: &Path) -> divmix::Result<()> {
    resolve(base, &mut job.manifest);
    resolve(base, &mut job.out_dir);
    let m = manifest_split(&job.manifest, job.split)?;
    echo(&job.out_dir, &job)?;
    let path = job.out_dir.join("descriptors.gstc");
    let set = batch_descriptors(&m, &job.gist, Some(&path))?;
    log::info!("images processed: {} ({} dims)", set.len(), set.dim);
    println!("{}", path.display());
    Ok(())
}

pub fn diversity(mut job: DiversityJob, base: &Path) -> divmix::Result<()> {
    resolve(base, &mut job.manifest);
    resolve(base, &mut job.out_dir);
    if let Some(c) = job.cache_dir.as_mut() {
        resolve(base, c);
    }
    let m = manifest_split(&job.manifest, job.split)?;
    echo(&job.out_dir, &job)?;
    let cache = cache_dir(&job.cache_dir, &job.out_dir);
    let report = run_diversity_report(
        &m,
        &job.name,
        &job.gist,
        &job.diversity,
        Some(&cache),
        Some(&job.out_dir),
    )?;
    let path = job.out_dir.join(format!("summary_{}.json", job.name));
    fs::write(&path, serde_json::to_string_pretty(&report.summary)?)
        .map_err(|e| Error::io(path.display().to_string(), e))?;
    let s = &report.summary;
    println!(
        "{}: n={} mean distance {:.6} top-{} eigen-sum {:.6}",
        s.name,
        s.n,
        s.mean_distance,
        job.diversity.top_k,
        s.eigen_sum()
    );
    Ok(())
}

pub fn compare(mut job: CompareJob, base: &Path) -> divmix::Result<()> {
    resolve(base, &mut job.manifest_a);
    resolve(base, &mut job.manifest_b);
    resolve(base, &mut job.out_dir);
    if let Some(c) = job.cache_dir.as_mut() {
        resolve(base, c);
    }
    let a = manifest_split(&job.manifest_a, job.split_a)?;
    let b = manifest_split(&job.manifest_b, job.split_b)?;
    echo(&job.out_dir, &job)?;
    let cache = cache_dir(&job.cache_dir, &job.out_dir);
    let cmp = run_diversity_comparison(
        &a,
        &b,
        (&job.names[0], &job.names[1]),
        &job.gist,
        &job.diversity,
        Some(&cache),
        Some(&job.out_dir),
    )?;
    let dominated = cmp.dominance.iter().filter(|&&d| d).count();
    println!(
        "{} - {}: mean distance {:+.6}, eigen-sum {:+.6}, eigenvalue dominance {}/{}",
        cmp.a.name,
        cmp.b.name,
        cmp.mean_distance_delta(),
        cmp.eigen_sum_delta(),
        dominated,
        cmp.dominance.len()
    );
    Ok(())
}

pub fn partition(mut job: PartitionJob, base: &Path) -> divmix::Result<()> {
    resolve(base, &mut job.manifest);
    resolve(base, &mut job.out_dir);
    if let Some(c) = job.cache_dir.as_mut() {
        resolve(base, c);
    }
    let train = manifest_split(&job.manifest, Some(Split::Train))?;
    echo(&job.out_dir, &job)?;
    let cache = cache_dir(&job.cache_dir, &job.out_dir);
    ensure_dir(&cache)?;
    let cache_file = cache.join(format!("partition-{:016x}.gstc", job.gist.params_hash()));
    let set = batch_descriptors(&train, &job.gist, Some(&cache_file))?;
    let labels = split_similar_diverse(&set, &train)?;
    let csv_path = job.out_dir.join("partition.csv");
    labels.write_csv(&csv_path)?;
    println!("{}", csv_path.display());
    if let Some(spec) = &job.mixture {
        let mix = sample_mixture(&labels, &train, spec)?;
        let path = job.out_dir.join("mixture.jsonl");
        mix.write_jsonl(&path)?;
        log::info!("mixture: {} images ({} similar per class)", mix.len(), spec.similar_count());
        println!("{}", path.display());
    }
    Ok(())
}

pub fn sweep(mut cfg: ExperimentConfig, base: &Path) -> divmix::Result<()> {
    cfg.resolve_paths(base);
    cfg.validate()?;
    let train = load_manifest(&cfg.train_manifest)?;
    let test = match &cfg.test_manifest {
        Some(p) => load_manifest(p)?,
        None => train.clone(),
    };
    echo(&cfg.out_dir, &cfg)?;
    let cache = cache_dir(&cfg.cache_dir, &cfg.out_dir);
    let mut report = run_mixture_sweep(&train, &test, &cfg.gist, &cfg.sweep, &cfg.train, Some(&cache))?;
    report.created_unix = std::time::SystemTime::now()
        .duration_since(std::time::UNIX_EPOCH)
        .ok()
        .map(|d| d.as_secs());
    let paths = write_report(&report, &cfg.out_dir)?;
    debug_assert_eq!(read_report(&paths.report_json).ok().as_ref(), Some(&report));
    for a in &report.aggregates {
        println!(
            "p={:<8} n={:<4} accuracy {:.4} ± {:.4} ({} seeds)",
            a.p_label(),
            a.n,
            a.mean_accuracy,
            a.std_accuracy,
            a.seeds
        );
    }
    println!("{}", paths.cells.display());
    Ok(())
}
