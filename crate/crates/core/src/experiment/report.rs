use std::fs;
use std::path::{Path, PathBuf};

use super::{write_embedding_csv, ExperimentReport};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct ReportPaths {
    pub cells: PathBuf,
    pub aggregate: PathBuf,
    pub report_json: PathBuf,
    pub embeddings: Vec<PathBuf>,
}

fn finish(mut w: csv::Writer<fs::File>, path: &Path) -> Result<()> {
    w.flush().map_err(|e| Error::io(path.display().to_string(), e))
}

/// Writes `cells.csv`, `aggregate.csv`, `report.json` and one
/// `embedding_<name>.csv` per embedding into `out_dir`.
pub fn write_report(report: &ExperimentReport, out_dir: &Path) -> Result<ReportPaths> {
    fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir.display().to_string(), e))?;

    let cells = out_dir.join("cells.csv");
    let mut w = csv::Writer::from_path(&cells)?;
    w.write_record(["p", "n", "seed", "accuracy", "mean_pair_dist", "eig10_sum"])?;
    for c in &report.cells {
        w.write_record([
            c.p_label(),
            c.n.to_string(),
            c.seed.to_string(),
            c.top1_accuracy.to_string(),
            c.mean_pair_dist.to_string(),
            c.eig10_sum.to_string(),
        ])?;
    }
    finish(w, &cells)?;

    let aggregate = out_dir.join("aggregate.csv");
    let mut w = csv::Writer::from_path(&aggregate)?;
    w.write_record([
        "p",
        "n",
        "seeds",
        "mean_accuracy",
        "std_accuracy",
        "mean_pair_dist",
        "eig10_sum",
    ])?;
    for a in &report.aggregates {
        w.write_record([
            a.p_label(),
            a.n.to_string(),
            a.seeds.to_string(),
            a.mean_accuracy.to_string(),
            a.std_accuracy.to_string(),
            a.mean_pair_dist.to_string(),
            a.eig10_sum.to_string(),
        ])?;
    }
    finish(w, &aggregate)?;

    let report_json = out_dir.join("report.json");
    let json = serde_json::to_string_pretty(report)?;
    fs::write(&report_json, json).map_err(|e| Error::io(report_json.display().to_string(), e))?;

    let mut embeddings = Vec::new();
    for e in &report.embeddings {
        let path = out_dir.join(format!("embedding_{}.csv", e.name));
        write_embedding_csv(&path, e, None)?;
        embeddings.push(path);
    }
    Ok(ReportPaths {
        cells,
        aggregate,
        report_json,
        embeddings,
    })
}

pub fn read_report(path: &Path) -> Result<ExperimentReport> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path.display().to_string(), e))?;
    Ok(serde_json::from_str(&text)?)
}

#[cfg(test)]
mod tests {
    use super::super::*;
    use super::*;
    use crate::diversity::Embedding2D;

    fn report(cells: Vec<CellRecord>) -> ExperimentReport {
        ExperimentReport {
            version: VERSION.into(),
            created_unix: Some(1_700_000_000),
            classes: vec!["a".into(), "b".into()],
            gist: Default::default(),
            sweep: Default::default(),
            train: Default::default(),
            aggregates: aggregate(&cells),
            cells,
            embeddings: vec![],
        }
    }

    #[test]
    fn empty_report_writes_headers_only() {
        let dir = tempfile::tempdir().unwrap();
        let paths = write_report(&report(vec![]), dir.path()).unwrap();
        let cells = fs::read_to_string(&paths.cells).unwrap();
        assert_eq!(cells, "p,n,seed,accuracy,mean_pair_dist,eig10_sum\n");
        assert_eq!(fs::read_to_string(&paths.aggregate).unwrap().lines().count(), 1);
        assert_eq!(read_report(&paths.report_json).unwrap(), report(vec![]));
    }

    #[test]
    fn roundtrip_and_aggregate_recompute() {
        let mut cells = Vec::new();
        for seed in 0..3u64 {
            for &p in &[0.0, 0.1, 1.0 / 3.0] {
                cells.push(CellRecord {
                    kind: CellKind::Mixture,
                    p: Some(p),
                    n: 25,
                    seed,
                    top1_accuracy: 0.1 + p + seed as f64 / 7.0,
                    mean_pair_dist: 1.0 / (seed as f64 + 3.0),
                    eig10_sum: p * p,
                });
            }
            cells.push(CellRecord {
                kind: CellKind::Random,
                p: None,
                n: 25,
                seed,
                top1_accuracy: 0.3,
                mean_pair_dist: 0.2,
                eig10_sum: 0.1,
            });
        }
        let mut r = report(cells);
        r.embeddings.push(NamedEmbedding {
            name: "pool".into(),
            embedding: Embedding2D {
                ids: vec!["x".into(), "y".into(), "z".into()],
                coords: vec![[0.1, -0.2], [1.0 / 3.0, 0.0], [2.0, 5.0]],
                stress: 1e-17,
            },
            classes: vec!["a".into(), "a".into(), "b".into()],
            size_fractions: vec![Some(0.25), None, Some(0.5)],
        });
        let dir = tempfile::tempdir().unwrap();
        let paths = write_report(&r, dir.path()).unwrap();
        assert_eq!(read_report(&paths.report_json).unwrap(), r);
        assert_eq!(paths.embeddings.len(), 1);

        // recompute means from the CSV text
        let mut rd = csv::Reader::from_path(&paths.cells).unwrap();
        let rows: Vec<csv::StringRecord> = rd.records().map(|x| x.unwrap()).collect();
        for a in &r.aggregates {
            let vals: Vec<f64> = rows
                .iter()
                .filter(|row| row[0] == a.p_label() && row[1] == a.n.to_string())
                .map(|row| row[3].parse().unwrap())
                .collect();
            let mean = vals.iter().sum::<f64>() / vals.len() as f64;
            assert!((mean - a.mean_accuracy).abs() < 1e-12);
        }
    }
}
