use std::collections::HashSet;
use std::path::PathBuf;

use divmix::corpus::{ImageRecord, Manifest, Split};
use divmix::diversity::{distance_histogram, pairwise_distances, DistanceMatrix};
use divmix::gist::{read_cache, write_cache, DescriptorSet};
use divmix::partition::{sample_mixture, split_similar_diverse, MixtureSpec, Subset};
use proptest::prelude::*;

fn rows_strategy(max_rows: usize, dim: usize) -> impl Strategy<Value = Vec<Vec<f64>>> {
    prop::collection::vec(prop::collection::vec(-10.0f64..10.0, dim), 2..max_rows)
}

fn set(rows: &[Vec<f64>]) -> DescriptorSet {
    let ids = (0..rows.len()).map(|i| format!("img{i}")).collect();
    DescriptorSet::from_rows(ids, rows, 9).unwrap()
}

fn manifest(labels: &[usize]) -> Manifest {
    let records = labels
        .iter()
        .enumerate()
        .map(|(i, &c)| ImageRecord {
            id: format!("img{i}"),
            path: PathBuf::from(format!("img{i}.png")),
            class_label: format!("class{c}"),
            split: Split::Train,
            bbox: None,
            size_fraction: None,
        })
        .collect();
    Manifest::new(records, None).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig {
        cases: 64,
        failure_persistence: None,
        ..ProptestConfig::default()
    })]

    #[test]
    fn condensed_index_is_a_bijection(n in 2usize..40) {
        let mut seen = HashSet::new();
        for i in 0..n {
            for j in i + 1..n {
                let k = DistanceMatrix::index(n, i, j);
                prop_assert!(k < n * (n - 1) / 2);
                prop_assert!(seen.insert(k));
            }
        }
    }

    #[test]
    fn distances_are_a_metric_sample(rows in rows_strategy(12, 4)) {
        let dm = pairwise_distances(&set(&rows)).unwrap();
        let n = rows.len();
        for i in 0..n {
            prop_assert_eq!(dm.get(i, i), 0.0);
            for j in 0..n {
                prop_assert_eq!(dm.get(i, j), dm.get(j, i));
                for k in 0..n {
                    prop_assert!(dm.get(i, k) <= dm.get(i, j) + dm.get(j, k) + 1e-9);
                }
            }
        }
    }

    #[test]
    fn default_histogram_counts_every_pair(rows in rows_strategy(30, 3), bins in 1usize..40) {
        let dm = pairwise_distances(&set(&rows)).unwrap();
        let h = distance_histogram(&dm, bins, None).unwrap();
        let n = rows.len() as u64;
        prop_assert_eq!(h.total, n * (n - 1) / 2);
        prop_assert_eq!(h.counts.iter().sum::<u64>(), h.total);
        prop_assert_eq!(h.bin_edges.len(), bins + 1);
    }

    #[test]
    fn partition_is_exhaustive_and_balanced(
        labels in prop::collection::vec(0usize..3, 0..40),
        seed in any::<u64>(),
    ) {
        let labels: Vec<usize> = [0, 0, 1, 1, 2, 2].into_iter().chain(labels).collect();
        let m = manifest(&labels);
        let mut r = divmix::rng::stream(seed, &[]);
        let rows: Vec<Vec<f64>> = labels
            .iter()
            .map(|_| (0..3).map(|_| rand::Rng::random_range(&mut r, -1.0..1.0)).collect())
            .collect();
        let p = split_similar_diverse(&set(&rows), &m).unwrap();
        prop_assert_eq!(p.entries.len(), labels.len());
        prop_assert_eq!(p.assignment.len(), labels.len());
        for class in &m.classes {
            let total = m.class_records(class).count();
            let (s, d) = p.per_class_counts[class];
            prop_assert_eq!(s + d, total);
            prop_assert_eq!(s, total.div_ceil(2));
            prop_assert_eq!(p.pool(class, Subset::Similar).len(), s);
        }
    }

    #[test]
    fn mixture_counts_follow_rounding(p_num in 0usize..=8, n in 2usize..6, seed in any::<u64>()) {
        let labels: Vec<usize> = (0..24).map(|i| i % 2).collect();
        let m = manifest(&labels);
        let rows: Vec<Vec<f64>> = (0..24).map(|i| vec![i as f64, (i * i % 7) as f64]).collect();
        let part = split_similar_diverse(&set(&rows), &m).unwrap();
        let spec = MixtureSpec { p: p_num as f64 / 8.0, n_per_class: n, seed };
        let mix = sample_mixture(&part, &m, &spec).unwrap();
        let k = spec.similar_count();
        for class in &m.classes {
            let ids: Vec<&str> = mix.class_records(class).map(|r| r.id.as_str()).collect();
            prop_assert_eq!(ids.len(), n);
            let similar = ids.iter().filter(|id| part.assignment[**id] == Subset::Similar).count();
            prop_assert_eq!(similar, k);
        }
    }

    #[test]
    fn cache_roundtrip_is_bitwise(rows in rows_strategy(10, 6)) {
        let s = set(&rows);
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.gstc");
        write_cache(&path, &s).unwrap();
        let back = read_cache(&path).unwrap();
        prop_assert_eq!(&back.ids, &s.ids);
        prop_assert!(back.data.iter().zip(&s.data).all(|(a, b)| a.to_bits() == b.to_bits()));
        prop_assert_eq!(back.params_hash, s.params_hash);
    }
}
