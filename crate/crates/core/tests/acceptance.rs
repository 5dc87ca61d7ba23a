//! End-to-end acceptance run. Prints one PASS/FAIL line per criterion and
//! exits non-zero if any criterion fails.

use std::f64::consts::PI;
use std::path::PathBuf;
use std::time::{Duration, Instant};

use divmix::classifier::{gradient_check, standardize, train_softmax, FeatureMatrix, TrainConfig};
use divmix::corpus::{GrayImage, ImageRecord, Manifest, Split};
use divmix::diversity::{mds_embed, pairwise_distances, pca_spectrum};
use divmix::experiment::{sweep_descriptors, write_report, CellKind, ExperimentReport, SweepConfig, SweepInputs};
use divmix::gist::{batch_descriptors, read_cache, DescriptorSet, GistExtractor, GistParams};
use divmix::synth::{render_view, sample_viewpoints, ObjectSpec, ViewDistribution};
use divmix::partition::{sample_mixture, split_similar_diverse, MixtureSpec};
use divmix::{parallel, rng};
use rand::Rng;

struct Outcome {
    pass: bool,
    detail: String,
}

fn rel_l2(a: &[f64], b: &[f64]) -> f64 {
    let num: f64 = a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum();
    let den: f64 = a.iter().map(|x| x * x).sum();
    (num / den).sqrt()
}

fn grating(n: usize, freq: f64, angle: f64) -> GrayImage {
    let (s, c) = angle.sin_cos();
    let pixels = (0..n * n)
        .map(|i| {
            let (y, x) = ((i / n) as f64, (i % n) as f64);
            0.5 + 0.4 * (2.0 * PI * freq * (x * c + y * s)).cos()
        })
        .collect();
    GrayImage::new(n, n, pixels).unwrap()
}

fn descriptor_suite() -> Outcome {
    let params = GistParams::default();
    let ex = GistExtractor::new(&params).unwrap();
    let n = params.image_side;
    let per_filter = params.blocks * params.blocks;

    let flat = ex.describe(&GrayImage::filled(n, n, 0.42)).unwrap();
    let flat_max = flat.values.iter().fold(0.0f64, |m, v| m.max(v.abs()));

    let mut argmax_ok = 0;
    for o in 0..8 {
        let d = ex.describe(&grating(n, 0.25, o as f64 * PI / 8.0)).unwrap();
        let pooled: Vec<f64> = d.values.chunks(per_filter).map(|c| c.iter().sum()).collect();
        let best = (0..pooled.len())
            .max_by(|&a, &b| pooled[a].total_cmp(&pooled[b]))
            .unwrap();
        if best == o {
            argmax_ok += 1;
        }
    }

    let mut worst_perm: f64 = 0.0;
    for s in 0..4 {
        let f = 0.25 / 2f64.powi(s);
        let h = ex.describe(&grating(n, f, 0.0)).unwrap().values;
        let v = ex.describe(&grating(n, f, PI / 2.0)).unwrap().values;
        let mut permuted = vec![0.0; h.len()];
        for scale in 0..4 {
            for o in 0..8 {
                let src = (scale * 8 + o) * per_filter;
                let dst = (scale * 8 + (o + 4) % 8) * per_filter;
                permuted[dst..dst + per_filter].copy_from_slice(&h[src..src + per_filter]);
            }
        }
        worst_perm = worst_perm.max(rel_l2(&v, &permuted));
    }
    Outcome {
        pass: flat_max < 1e-9 && argmax_ok == 8 && worst_perm < 0.02,
        detail: format!(
            "constant max {flat_max:.1e} (< 1e-9); orientation argmax {argmax_ok}/8; 90-degree permutation rel L2 {worst_perm:.4} (< 0.02)"
        ),
    }
}

fn set_from(rows: &[Vec<f64>]) -> DescriptorSet {
    let ids = (0..rows.len()).map(|i| format!("r{i}")).collect();
    DescriptorSet::from_rows(ids, rows, 0).unwrap()
}

fn numerical_oracles() -> Outcome {
    let mut r = rng::stream(2, &[]);
    // pairwise distances vs a naive loop
    let mut dist_err: f64 = 0.0;
    for trial in 0..5 {
        let n = 10 + trial * 10;
        let rows: Vec<Vec<f64>> = (0..n).map(|_| (0..32).map(|_| r.random_range(-3.0..3.0)).collect()).collect();
        let set = set_from(&rows);
        let dm = pairwise_distances(&set).unwrap();
        for i in 0..n {
            for j in 0..n {
                let naive: f64 = set
                    .row(i)
                    .iter()
                    .zip(set.row(j))
                    .map(|(&a, &b)| (a as f64 - b as f64).powi(2))
                    .sum::<f64>()
                    .sqrt();
                let got = dm.get(i, j);
                let err = if naive == 0.0 { got.abs() } else { (got - naive).abs() / naive };
                dist_err = dist_err.max(err);
            }
        }
    }

    // PCA spectrum vs nalgebra on 20x20 data, and the trace identity
    let (mut eig_err, mut trace_err): (f64, f64) = (0.0, 0.0);
    for _ in 0..10 {
        let rows: Vec<Vec<f64>> = (0..20).map(|_| (0..20).map(|_| r.random_range(-1.0..1.0)).collect()).collect();
        let set = set_from(&rows);
        let spec = pca_spectrum(&set, 20).unwrap();
        let x: Vec<f64> = set.data.iter().map(|&v| v as f64).collect();
        let m = nalgebra::DMatrix::from_row_slice(20, 20, &x);
        let mean = m.row_mean();
        let centered = nalgebra::DMatrix::from_fn(20, 20, |i, j| m[(i, j)] - mean[j]);
        let cov = centered.transpose() * &centered / 20.0;
        let mut oracle: Vec<f64> = cov.clone().symmetric_eigenvalues().iter().map(|v| v.max(0.0)).collect();
        oracle.sort_by(|a, b| b.total_cmp(a));
        let scale = oracle[0];
        for (a, b) in spec.eigenvalues.iter().zip(&oracle) {
            eig_err = eig_err.max((a - b).abs() / scale);
        }
        let sum: f64 = spec.eigenvalues.iter().sum();
        trace_err = trace_err.max((sum - cov.trace()).abs() / cov.trace());
    }

    // classical MDS of planar points
    let (mut mds_err, mut stress): (f64, f64) = (0.0, 0.0);
    for trial in 0..5 {
        let n = 8 + trial * 8;
        let rows: Vec<Vec<f64>> = (0..n).map(|_| vec![r.random_range(-5.0..5.0), r.random_range(-2.0..2.0)]).collect();
        let dm = pairwise_distances(&set_from(&rows)).unwrap();
        let e = mds_embed(&dm).unwrap();
        stress = stress.max(e.stress);
        for i in 0..n {
            for j in i + 1..n {
                let [xi, yi] = e.coords[i];
                let [xj, yj] = e.coords[j];
                let d = ((xi - xj).powi(2) + (yi - yj).powi(2)).sqrt();
                mds_err = mds_err.max((d - dm.get(i, j)).abs());
            }
        }
    }
    Outcome {
        pass: dist_err < 1e-12 && eig_err < 1e-8 && trace_err < 1e-9 && mds_err < 1e-9 && stress < 1e-9,
        detail: format!(
            "distance rel err {dist_err:.1e}; eigenvalue rel err {eig_err:.1e}; trace err {trace_err:.1e}; MDS distance err {mds_err:.1e}, stress {stress:.1e}"
        ),
    }
}

fn gradient_suite() -> Outcome {
    let mut worst: f64 = 0.0;
    for seed in 0..20u64 {
        let mut r = rng::stream(seed, &[99]);
        let rows = r.random_range(4..=20);
        let dim = r.random_range(2..=20);
        let c = r.random_range(2..=5);
        let classes: Vec<String> = (0..c).map(|i| format!("c{i}")).collect();
        let x = FeatureMatrix::new(
            rows,
            dim,
            (0..rows * dim).map(|_| r.random_range(-2.0..2.0)).collect(),
            0,
        )
        .unwrap();
        let labels: Vec<String> = (0..rows).map(|i| classes[i % c].clone()).collect();
        let cfg = TrainConfig {
            l2: r.random_range(0.0..0.1),
            seed,
            ..TrainConfig::default()
        };
        worst = worst.max(gradient_check(&x, &labels, &classes, &cfg).unwrap());
    }
    Outcome {
        pass: worst < 1e-4,
        detail: format!("max relative error over 20 instances {worst:.2e} (< 1e-4)"),
    }
}

/// Renders and describes `count` views per object in memory.
fn corpus(
    objects: &[ObjectSpec],
    dist: &ViewDistribution,
    split: Split,
    count: usize,
    seed: u64,
    ex: &GistExtractor,
) -> (Manifest, DescriptorSet) {
    let mut jobs = Vec::new();
    for (ci, obj) in objects.iter().enumerate() {
        let s = rng::derive_seed(seed, &[ci as u64, split as u64]);
        for (i, v) in sample_viewpoints(dist, count, s).into_iter().enumerate() {
            jobs.push((obj, i, v));
        }
    }
    let side = ex.params().image_side;
    let rows = parallel::map(&jobs, |(obj, _, v)| {
        let img = render_view(obj, v, side).unwrap();
        ex.describe(&img).unwrap().values
    });
    let records: Vec<ImageRecord> = jobs
        .iter()
        .map(|(obj, i, v)| {
            let id = format!("{}_{}_{i:05}", obj.name, split.as_str());
            ImageRecord {
                path: PathBuf::from(&id),
                id,
                class_label: obj.name.clone(),
                split,
                bbox: None,
                size_fraction: Some(v.scale),
            }
        })
        .collect();
    let ids = records.iter().map(|r| r.id.clone()).collect();
    let set = DescriptorSet::from_rows(ids, &rows, ex.params().params_hash()).unwrap();
    let classes = objects.iter().map(|o| o.name.clone()).collect();
    (Manifest::new(records, Some(classes)).unwrap(), set)
}

fn class_mean_distance(m: &Manifest, set: &DescriptorSet, class: &str) -> f64 {
    let idx: Vec<usize> = (0..m.len()).filter(|&i| m.records[i].class_label == class).collect();
    pairwise_distances(&set.select(&idx)).unwrap().mean()
}

fn diversity_reproduction() -> Outcome {
    let ex = GistExtractor::new(&GistParams::default()).unwrap();
    let objects = [ObjectSpec::car(), ObjectSpec::ball()];
    let (mut dist_wins, mut eig_wins, mut gap_wins) = (0, 0, 0);
    let (mut car_gap, mut ball_gap) = (0.0, 0.0);
    for seed in 0..20u64 {
        let (cm, cs) = corpus(&objects, &ViewDistribution::child_like(), Split::Train, 200, seed, &ex);
        let (pm, ps) = corpus(&objects, &ViewDistribution::parent_like(), Split::Train, 200, seed + 1000, &ex);
        let cd = pairwise_distances(&cs).unwrap().mean();
        let pd = pairwise_distances(&ps).unwrap().mean();
        let ce: f64 = pca_spectrum(&cs, 10).unwrap().eigenvalues.iter().sum();
        let pe: f64 = pca_spectrum(&ps, 10).unwrap().eigenvalues.iter().sum();
        dist_wins += (cd > pd) as usize;
        eig_wins += (ce > pe) as usize;
        let cg = class_mean_distance(&cm, &cs, "car") - class_mean_distance(&pm, &ps, "car");
        let bg = class_mean_distance(&cm, &cs, "ball") - class_mean_distance(&pm, &ps, "ball");
        car_gap += cg / 20.0;
        ball_gap += bg / 20.0;
        gap_wins += (cg > bg) as usize;
    }
    Outcome {
        pass: dist_wins >= 19 && eig_wins >= 19 && gap_wins >= 15,
        detail: format!(
            "child > parent: mean distance {dist_wins}/20, top-10 eigen-sum {eig_wins}/20 (>= 19); car gap > ball gap {gap_wins}/20 (>= 15; mean gaps {car_gap:.4} vs {ball_gap:.4})"
        ),
    }
}

fn mixture_corpus() -> (Manifest, DescriptorSet, Manifest, DescriptorSet) {
    let ex = GistExtractor::new(&GistParams::default()).unwrap();
    let objects = ["car", "ball", "table", "airplane"].map(|n| ObjectSpec::preset(n).unwrap());
    let (tm, ts) = corpus(&objects, &ViewDistribution::child_like(), Split::Train, 400, 2024, &ex);
    let (em, es) = corpus(&objects, &ViewDistribution::canonical(), Split::Test, 100, 2024, &ex);
    (tm, ts, em, es)
}

fn acc(r: &ExperimentReport, kind: CellKind, p: Option<f64>, n: usize) -> f64 {
    r.aggregate_for(kind, p, n).map(|a| a.mean_accuracy).unwrap_or(f64::NAN)
}

fn mixture_reproduction(r: &ExperimentReport) -> Outcome {
    let m = |p: f64, n: usize| acc(r, CellKind::Mixture, Some(p), n);
    let gap25 = m(0.0, 25) - m(1.0, 25);
    let gap200 = m(0.0, 200) - m(1.0, 200);
    let best_mid = [0.25, 0.5, 0.75].map(|p| m(p, 100)).into_iter().fold(f64::MIN, f64::max);
    let ends = m(0.0, 100).max(m(1.0, 100));
    let a = gap25 >= 0.03;
    let b = best_mid >= ends - 0.01;
    let c = gap200.abs() < gap25.abs();
    let mut table = String::new();
    for n in [25, 50, 100, 200] {
        let row: Vec<String> = [0.0, 0.25, 0.5, 0.75, 1.0]
            .iter()
            .map(|&p| format!("{:.3}", m(p, n)))
            .collect();
        table += &format!(
            "\n      n={n:>3}: p=0..1 [{}], random {:.3}",
            row.join(", "),
            acc(r, CellKind::Random, None, n)
        );
    }
    Outcome {
        pass: a && b && c,
        detail: format!(
            "(a) p0 - p1 at n=25 = {:.1} pts (>= 3) {}; (b) best mixed {:.3} vs max ends {:.3} at n=100 {}; (c) gap n=200 {:.1} pts vs n=25 {:.1} pts {}{table}",
            gap25 * 100.0,
            ok(a),
            best_mid,
            ends,
            ok(b),
            gap200 * 100.0,
            gap25 * 100.0,
            ok(c)
        ),
    }
}

/// Spec-level properties of the sweep that are reported but not scored.
fn sweep_properties(r: &ExperimentReport, inputs: &SweepInputs<'_>) -> String {
    let original = acc(r, CellKind::Original, None, 400);
    let best25 = r
        .sweep
        .p_grid
        .iter()
        .map(|&p| acc(r, CellKind::Mixture, Some(p), 25))
        .fold(f64::MIN, f64::max);

    let mut monotone = true;
    for &n in &r.sweep.n_grid {
        let d: Vec<f64> = r
            .sweep
            .p_grid
            .iter()
            .map(|&p| r.aggregate_for(CellKind::Mixture, Some(p), n).unwrap().mean_pair_dist)
            .collect();
        monotone &= d.windows(2).all(|w| w[1] <= w[0]);
    }

    let partition = split_similar_diverse(inputs.train_set, inputs.train).unwrap();
    let spec = MixtureSpec {
        p: 0.5,
        n_per_class: 100,
        seed: 0,
    };
    let subset = sample_mixture(&partition, inputs.train, &spec).unwrap();
    let set = inputs
        .train_set
        .select_ids(subset.records.iter().map(|r| r.id.as_str()))
        .unwrap();
    let labels: Vec<String> = subset.records.iter().map(|r| r.class_label.clone()).collect();
    let (x, _, _) = standardize(&set, &[]).unwrap();
    let cfg = TrainConfig {
        learning_rate: 0.01,
        ..TrainConfig::default()
    };
    let hist = train_softmax(&x, &labels, &subset.classes, &cfg).unwrap().loss_history;
    let loss_monotone = hist.windows(2).all(|w| w[1] <= w[0]);
    format!(
        "\n      [info] original {original:.3} >= best n=25 {best25:.3} - 0.15: {}; mean pair distance non-increasing in p: {}; loss non-increasing at lr 0.01: {}",
        ok(original >= best25 - 0.15),
        ok(monotone),
        ok(loss_monotone)
    )
}

fn random_baseline(r: &ExperimentReport) -> Outcome {
    let best = r
        .sweep
        .p_grid
        .iter()
        .map(|&p| acc(r, CellKind::Mixture, Some(p), 100))
        .fold(f64::MIN, f64::max);
    let random = acc(r, CellKind::Random, None, 100);
    Outcome {
        pass: best >= random,
        detail: format!("best mixture {best:.3} vs random {random:.3} at n=100"),
    }
}

fn determinism(inputs: &SweepInputs<'_>) -> Outcome {
    let sweep = SweepConfig {
        p_grid: vec![0.0, 0.5, 1.0],
        n_grid: vec![25],
        seeds: vec![0, 1],
        ..SweepConfig::default()
    };
    let cfg = TrainConfig {
        epochs: 30,
        ..TrainConfig::default()
    };
    let mut outputs = Vec::new();
    for threads in [1, 3, 8] {
        let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap();
        let dir = tempfile::tempdir().unwrap();
        let report = pool
            .install(|| sweep_descriptors(inputs, &GistParams::default(), &sweep, &cfg))
            .unwrap();
        let paths = write_report(&report, dir.path()).unwrap();
        outputs.push(std::fs::read(paths.cells).unwrap());
    }
    let same = outputs.windows(2).all(|w| w[0] == w[1]);
    Outcome {
        pass: same,
        detail: format!("cells.csv byte-identical at 1, 3 and 8 threads: {same}"),
    }
}

fn cache_integrity() -> Outcome {
    use divmix::synth::{generate_corpus, CorpusConfig, DistributionEntry, ObjectEntry};
    let dir = tempfile::tempdir().unwrap();
    let cfg = CorpusConfig {
        objects: vec![ObjectEntry::Preset("car".into()), ObjectEntry::Preset("bottle".into())],
        distributions: [(Split::Train, DistributionEntry::Preset("child".into()))]
            .into_iter()
            .collect(),
        counts: [(Split::Train, 10)].into_iter().collect(),
        seed: 5,
        side: 64,
        out_dir: dir.path().to_path_buf(),
    };
    let m = generate_corpus(&cfg).unwrap();
    let params = GistParams {
        image_side: 64,
        ..GistParams::default()
    };
    let cache = dir.path().join("d.gstc");
    let fresh = batch_descriptors(&m, &params, Some(&cache)).unwrap();
    let loaded = read_cache(&cache).unwrap();
    let bitwise = fresh.ids == loaded.ids
        && fresh.data.iter().zip(&loaded.data).all(|(a, b)| a.to_bits() == b.to_bits());

    let mut bytes = std::fs::read(&cache).unwrap();
    let at = bytes.len() - 4 - 7;
    bytes[at] ^= 0x40;
    std::fs::write(&cache, &bytes).unwrap();
    let detected = read_cache(&cache).is_err();
    let recomputed = batch_descriptors(&m, &params, Some(&cache)).unwrap();
    let healed = read_cache(&cache).is_ok();
    let same = recomputed == fresh;
    Outcome {
        pass: bitwise && detected && healed && same,
        detail: format!(
            "bitwise roundtrip {bitwise}; corruption detected {detected}; recomputed equal {same}; cache rewritten {healed}"
        ),
    }
}

fn ok(b: bool) -> &'static str {
    if b {
        "ok"
    } else {
        "FAIL"
    }
}

fn main() {
    let mut failures = 0;
    let mut line = |num: usize, name: &str, limit: Duration, f: &mut dyn FnMut() -> Outcome| {
        let t = Instant::now();
        let o = f();
        let el = t.elapsed();
        let pass = o.pass && el <= limit;
        if !pass {
            failures += 1;
        }
        println!(
            "[{}] {num}. {name}: {} ({:.1}s, limit {}s)",
            if pass { "PASS" } else { "FAIL" },
            o.detail,
            el.as_secs_f64(),
            limit.as_secs()
        );
    };
    line(1, "descriptor correctness", Duration::from_secs(30), &mut descriptor_suite);
    line(2, "numerical oracles", Duration::from_secs(60), &mut numerical_oracles);
    line(3, "gradient check", Duration::from_secs(30), &mut gradient_suite);
    line(4, "child vs parent diversity", Duration::from_secs(600), &mut diversity_reproduction);

    let mut built = None;
    line(5, "mixture sweep", Duration::from_secs(1800), &mut || {
        let t = Instant::now();
        let (tm, ts, em, es) = mixture_corpus();
        let inputs = SweepInputs {
            train: &tm,
            train_set: &ts,
            test: &em,
            test_set: &es,
        };
        let report = sweep_descriptors(&inputs, &GistParams::default(), &SweepConfig::default(), &TrainConfig::default())
            .expect("mixture sweep");
        let mut o = mixture_reproduction(&report);
        o.detail += &sweep_properties(&report, &inputs);
        o.detail += &format!("\n      corpus + sweep wall time {:.1}s", t.elapsed().as_secs_f64());
        built = Some((tm, ts, em, es, report));
        o
    });
    let (tm, ts, em, es, report) = built.unwrap();
    let inputs = SweepInputs {
        train: &tm,
        train_set: &ts,
        test: &em,
        test_set: &es,
    };
    line(6, "random baseline", Duration::from_secs(1800), &mut || random_baseline(&report));
    line(7, "determinism", Duration::from_secs(600), &mut || determinism(&inputs));
    line(8, "cache integrity", Duration::from_secs(60), &mut cache_integrity);

    if failures > 0 {
        println!("{failures} acceptance criteria failed");
        std::process::exit(1);
    }
    println!("all acceptance criteria passed");
}
