use super::{label_indices, EvalResult, FeatureMatrix};
use crate::error::{Error, Result};

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// k-nearest-neighbour classification under Euclidean distance.
///
/// Vote ties resolve to the class whose tied neighbours have the smallest mean
/// distance, then to the lowest class index.
pub fn knn_evaluate(
    train: &FeatureMatrix,
    train_labels: &[String],
    test: &FeatureMatrix,
    test_labels: &[String],
    classes: &[String],
    k: usize,
) -> Result<EvalResult> {
    if k == 0 || k > train.rows {
        return Err(Error::Validation(format!(
            "k = {k} must be in 1..={}",
            train.rows
        )));
    }
    if train.params_hash != test.params_hash || train.dim != test.dim {
        return Err(Error::ParamsMismatch(train.params_hash, test.params_hash));
    }
    let ytrain = label_indices(classes, train_labels)?;
    let ytest = label_indices(classes, test_labels)?;
    let pred = crate::parallel::map_range(test.rows, |i| {
        let q = test.row(i);
        let mut d: Vec<(f64, usize)> = (0..train.rows)
            .map(|j| (sq_dist(q, train.row(j)).sqrt(), j))
            .collect();
        d.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        let mut votes = vec![0usize; classes.len()];
        let mut dist_sum = vec![0.0; classes.len()];
        for &(dist, j) in &d[..k] {
            votes[ytrain[j]] += 1;
            dist_sum[ytrain[j]] += dist;
        }
        let mut best = 0;
        for c in 1..classes.len() {
            let better = votes[c] > votes[best]
                || (votes[c] == votes[best]
                    && votes[c] > 0
                    && dist_sum[c] / (votes[c] as f64) < dist_sum[best] / (votes[best] as f64));
            if better {
                best = c;
            }
        }
        best
    });
    Ok(EvalResult::from_predictions(classes, &ytest, &pred))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn names(v: &[&str]) -> Vec<String> {
        v.iter().map(|s| s.to_string()).collect()
    }

    #[test]
    fn one_nn_memorizes_training_set() {
        let x = FeatureMatrix::new(4, 2, vec![0., 0., 1., 0., 5., 5., 6., 5.], 0).unwrap();
        let labels = names(&["a", "a", "b", "b"]);
        let r = knn_evaluate(&x, &labels, &x, &labels, &names(&["a", "b"]), 1).unwrap();
        assert_eq!(r.top1_accuracy, 1.0);
    }

    #[test]
    fn tie_goes_to_closer_class() {
        // query at 0: class b neighbour at 1.0, class a neighbour at 2.0
        let train = FeatureMatrix::new(2, 1, vec![2.0, -1.0], 0).unwrap();
        let test = FeatureMatrix::new(1, 1, vec![0.0], 0).unwrap();
        let classes = names(&["a", "b"]);
        let r = knn_evaluate(&train, &names(&["a", "b"]), &test, &names(&["b"]), &classes, 2).unwrap();
        assert_eq!(r.top1_accuracy, 1.0);
    }

    #[test]
    fn full_tie_goes_to_lowest_index() {
        let train = FeatureMatrix::new(2, 1, vec![1.0, -1.0], 0).unwrap();
        let test = FeatureMatrix::new(1, 1, vec![0.0], 0).unwrap();
        let classes = names(&["a", "b"]);
        let r = knn_evaluate(&train, &names(&["b", "a"]), &test, &names(&["a"]), &classes, 2).unwrap();
        assert_eq!(r.top1_accuracy, 1.0);
    }

    #[test]
    fn rejects_bad_k() {
        let x = FeatureMatrix::new(1, 1, vec![0.0], 0).unwrap();
        let l = names(&["a"]);
        assert!(knn_evaluate(&x, &l, &x, &l, &l, 0).is_err());
        assert!(knn_evaluate(&x, &l, &x, &l, &l, 2).is_err());
    }
}
