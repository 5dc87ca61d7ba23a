use std::path::Path;
use std::sync::atomic::{AtomicUsize, Ordering};

use super::{aggregate, cache_file, CellKind, CellRecord, ExperimentReport, NamedEmbedding, SweepConfig, VERSION};
use crate::classifier::{standardize, train_softmax, TrainConfig};
use crate::corpus::{split_manifest, Manifest, Split};
use crate::diversity::{mds_embed, pairwise_distances, pca_spectrum};
use crate::error::{Error, Result};
use crate::gist::{batch_descriptors, DescriptorSet, GistParams};
use crate::partition::{sample_mixture, sample_random, split_similar_diverse, MixtureSpec, PartitionLabels};
use crate::{parallel, rng};

/// Train pool and test set with their descriptors, rows aligned with records.
pub struct SweepInputs<'a> {
    pub train: &'a Manifest,
    pub train_set: &'a DescriptorSet,
    pub test: &'a Manifest,
    pub test_set: &'a DescriptorSet,
}

#[derive(Debug, Clone, Copy)]
enum Job {
    Mixture { p: f64, n: usize, seed: u64 },
    Random { n: usize, seed: u64 },
    Original { seed: u64 },
}

/// Computes (or loads cached) descriptors for the train split of
/// `train_manifest` and the test split of `test_manifest`, then runs the sweep.
pub fn run_mixture_sweep(
    train_manifest: &Manifest,
    test_manifest: &Manifest,
    params: &GistParams,
    sweep: &SweepConfig,
    train_cfg: &TrainConfig,
    cache_dir: Option<&Path>,
) -> Result<ExperimentReport> {
    let train = split_manifest(train_manifest, Split::Train);
    let test = split_manifest(test_manifest, Split::Test);
    if train.is_empty() {
        return Err(Error::Validation("train split is empty".into()));
    }
    if test.is_empty() {
        return Err(Error::Validation("test split is empty".into()));
    }
    if let Some(dir) = cache_dir {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir.display().to_string(), e))?;
    }
    let train_cache = cache_dir.map(|d| cache_file(d, "train", &train, params));
    let test_cache = cache_dir.map(|d| cache_file(d, "test", &test, params));
    let train_set = batch_descriptors(&train, params, train_cache.as_deref())?;
    let test_set = batch_descriptors(&test, params, test_cache.as_deref())?;
    let inputs = SweepInputs {
        train: &train,
        train_set: &train_set,
        test: &test,
        test_set: &test_set,
    };
    sweep_descriptors(&inputs, params, sweep, train_cfg)
}

/// Runs every cell of the grid on precomputed descriptors. Cells run in
/// parallel; the report lists them in grid order regardless of completion order.
pub fn sweep_descriptors(
    inputs: &SweepInputs<'_>,
    params: &GistParams,
    sweep: &SweepConfig,
    train_cfg: &TrainConfig,
) -> Result<ExperimentReport> {
    sweep.validate()?;
    train_cfg.validate()?;
    let partition = split_similar_diverse(inputs.train_set, inputs.train)?;
    check_pools(&partition, inputs.train, sweep)?;

    let mut jobs = Vec::new();
    for &n in &sweep.n_grid {
        for &p in &sweep.p_grid {
            jobs.extend(sweep.seeds.iter().map(|&seed| Job::Mixture { p, n, seed }));
        }
        if sweep.include_random {
            jobs.extend(sweep.seeds.iter().map(|&seed| Job::Random { n, seed }));
        }
    }
    if sweep.include_full {
        jobs.extend(sweep.seeds.iter().map(|&seed| Job::Original { seed }));
    }

    let test_labels: Vec<String> = inputs
        .test
        .records
        .iter()
        .map(|r| r.class_label.clone())
        .collect();
    let done = AtomicUsize::new(0);
    let total = jobs.len();
    let results = parallel::map(&jobs, |job| {
        let r = run_cell(inputs, &partition, &test_labels, train_cfg, *job);
        let k = done.fetch_add(1, Ordering::Relaxed) + 1;
        log::info!("cells completed: {k}/{total}");
        r
    });
    let cells = results.into_iter().collect::<Result<Vec<_>>>()?;

    let mut embeddings = Vec::new();
    if sweep.embed_pool {
        let dm = pairwise_distances(inputs.train_set)?;
        embeddings.push(NamedEmbedding {
            name: "pool".into(),
            embedding: mds_embed(&dm)?,
            classes: inputs.train.records.iter().map(|r| r.class_label.clone()).collect(),
            size_fractions: inputs.train.records.iter().map(|r| r.size_fraction).collect(),
        });
    }

    Ok(ExperimentReport {
        version: VERSION.to_string(),
        created_unix: None,
        classes: inputs.train.classes.clone(),
        gist: params.clone(),
        sweep: sweep.clone(),
        train: train_cfg.clone(),
        aggregates: aggregate(&cells),
        cells,
        embeddings,
    })
}

fn check_pools(partition: &PartitionLabels, train: &Manifest, sweep: &SweepConfig) -> Result<()> {
    for &n in &sweep.n_grid {
        for &p in &sweep.p_grid {
            let spec = MixtureSpec { p, n_per_class: n, seed: 0 };
            if let Err(e) = sample_mixture(partition, train, &spec) {
                return Err(Error::Validation(format!("cell p={p} n={n}: {e}")));
            }
        }
        if sweep.include_random {
            if let Err(e) = sample_random(train, n, 0) {
                return Err(Error::Validation(format!("random cell n={n}: {e}")));
            }
        }
    }
    Ok(())
}

fn run_cell(
    inputs: &SweepInputs<'_>,
    partition: &PartitionLabels,
    test_labels: &[String],
    train_cfg: &TrainConfig,
    job: Job,
) -> Result<CellRecord> {
    let (kind, p, seed, subset) = match job {
        Job::Mixture { p, n, seed } => {
            let spec = MixtureSpec { p, n_per_class: n, seed };
            (CellKind::Mixture, Some(p), seed, sample_mixture(partition, inputs.train, &spec)?)
        }
        Job::Random { n, seed } => (CellKind::Random, None, seed, sample_random(inputs.train, n, seed)?),
        Job::Original { seed } => (CellKind::Original, None, seed, inputs.train.clone()),
    };
    let set = inputs
        .train_set
        .select_ids(subset.records.iter().map(|r| r.id.as_str()))?;
    let labels: Vec<String> = subset.records.iter().map(|r| r.class_label.clone()).collect();
    let n = subset
        .classes
        .iter()
        .map(|c| labels.iter().filter(|l| *l == c).count())
        .max()
        .unwrap_or(0);

    let (x, test, _) = standardize(&set, &[inputs.test_set])?;
    let cfg = TrainConfig {
        seed: rng::derive_seed(train_cfg.seed, &[seed]),
        ..train_cfg.clone()
    };
    let model = train_softmax(&x, &labels, &subset.classes, &cfg)?.model;
    let eval = model.evaluate(&test[0], test_labels)?;
    let (mean_pair_dist, eig10_sum) = within_class_stats(&set, &labels, &subset.classes)?;
    Ok(CellRecord {
        kind,
        p,
        n,
        seed,
        top1_accuracy: eval.top1_accuracy,
        mean_pair_dist,
        eig10_sum,
    })
}

/// Class-averaged mean pairwise distance and top-10 eigenvalue sum.
fn within_class_stats(set: &DescriptorSet, labels: &[String], classes: &[String]) -> Result<(f64, f64)> {
    let (mut dist, mut eig, mut k) = (0.0, 0.0, 0.0);
    for c in classes {
        let rows: Vec<usize> = (0..labels.len()).filter(|&i| &labels[i] == c).collect();
        if rows.len() < 2 {
            continue;
        }
        let sub = set.select(&rows);
        dist += pairwise_distances(&sub)?.mean();
        eig += pca_spectrum(&sub, 10)?.eigenvalues.iter().sum::<f64>();
        k += 1.0;
    }
    if k == 0.0 {
        return Ok((0.0, 0.0));
    }
    Ok((dist / k, eig / k))
}
