use std::fs;

use irt_ensemble::combiners::{run_all_combiners, GreedyConfig, Method};
use irt_ensemble::commands::{cmd_detect, cmd_ensemble, cmd_experiment, cmd_irt_report};
use irt_ensemble::config::RunConfig;
use irt_ensemble::detectors::{run_all, DetectorConfig};
use irt_ensemble::eval::{auc, ExperimentReport};
use irt_ensemble::io;
use irt_ensemble::irt::{irt_ensemble, latent_trait, FitConfig, ItemParams};
use irt_ensemble::model::{logit, normalize_columns, LogitScores, DEFAULT_EPSILON};
use irt_ensemble::synth::{gen_example, ExperimentKind};
use ndarray::{concatenate, Array2, Axis};

fn top_k(scores: &[f64], k: usize) -> Vec<usize> {
    let mut o: Vec<usize> = (0..scores.len()).collect();
    o.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]));
    let mut top = o[..k].to_vec();
    top.sort_unstable();
    top
}

#[test]
fn annulus_anomalies_get_the_highest_traits() {
    let hits = (0..10)
        .filter(|&seed| {
            let ds = gen_example(seed).unwrap();
            let m = run_all(&ds, &DetectorConfig::t1()).unwrap();
            let r = irt_ensemble(&m, DEFAULT_EPSILON, &FitConfig::default()).unwrap();
            top_k(&r.scores, 3) == [97, 98, 99]
        })
        .count();
    assert!(hits >= 8, "{hits}/10");
}

#[test]
fn all_combiners_separate_annulus_anomalies() {
    let ds = gen_example(4).unwrap();
    let m = run_all(&ds, &DetectorConfig::t1()).unwrap();
    let results = run_all_combiners(&m, &GreedyConfig::new(3, 1..=10).unwrap(), &FitConfig::default()).unwrap();
    let names: Vec<&str> = results.iter().map(|r| r.method.as_str()).collect();
    assert_eq!(names, Method::ALL.map(Method::name));
    for r in &results {
        assert!(auc(&r.scores, ds.labels().unwrap()).unwrap() > 0.95, "{}", r.method);
    }
}

/// A point that only the low-discrimination detectors flag ranks below the
/// planted anomalies.
#[test]
fn weak_detectors_are_discounted() {
    let ds = gen_example(2).unwrap();
    let m = run_all(&ds, &DetectorConfig::t1()).unwrap();
    let x = normalize_columns(&m, DEFAULT_EPSILON).unwrap().into_values();
    let e = DEFAULT_EPSILON;
    let boundary = Array2::from_shape_vec(
        (1, 7),
        [0.48, 0.56, 0.62, 1.0, 0.98, 0.74, 1.0].map(|v: f64| v.clamp(e, 1.0 - e)).to_vec(),
    )
    .unwrap();
    let x = concatenate(Axis(0), &[x.view(), boundary.view()]).unwrap();
    let z = LogitScores::from_values(x.mapv(logit)).unwrap();
    // KNN-AGG, LOF, COF, INFLO, KDEOS, LDF, LDOF
    let items: Vec<ItemParams> = [
        (1.6, 3.3, 0.7),
        (14.0, 3.3, 0.9),
        (0.9, 2.7, 0.5),
        (0.3, 7.7, 0.1),
        (1.1, 0.0, 1.3),
        (6.2, 2.4, 0.9),
        (0.6, 5.8, 0.4),
    ]
    .iter()
    .map(|&(a, b, g)| ItemParams::new(a, b, g).unwrap())
    .collect();
    let theta = latent_trait(&z, &items).unwrap();
    for anomaly in 97..100 {
        assert!(theta[100] < theta[anomaly], "anomaly {anomaly}");
    }
}

#[test]
fn commands_round_trip_through_files() {
    let tmp = tempfile::tempdir().unwrap();
    let ds = gen_example(7).unwrap();
    let data = tmp.path().join("example.csv");
    io::write_dataset(io::create_writer(&data).unwrap(), &ds).unwrap();
    let cfg = RunConfig {
        out_dir: tmp.path().join("out"),
        ..RunConfig::default()
    };

    let det = cmd_detect(&data, &cfg).unwrap();
    let direct = run_all(&io::read_dataset(fs::File::open(&data).unwrap(), "x").unwrap(), &DetectorConfig::t1()).unwrap();
    assert_eq!(det.scores, direct);

    // re-emitting the score file is byte-identical
    let first = fs::read(&det.path).unwrap();
    let (m, labels) = io::read_scores(first.as_slice()).unwrap();
    let mut again = Vec::new();
    io::write_scores(&mut again, &m, labels.as_deref()).unwrap();
    assert_eq!(first, again);

    let ens = cmd_ensemble(&det.path, &cfg).unwrap();
    let aucs = ens.aucs.unwrap();
    assert_eq!(aucs.len(), 7);
    for (r, (name, a)) in ens.results.iter().zip(&aucs) {
        assert_eq!(&r.method, name);
        assert_eq!(*a, auc(&r.scores, ds.labels().unwrap()).unwrap());
    }
    let avg = &ens.results[1].scores;
    let x = normalize_columns(&m, DEFAULT_EPSILON).unwrap();
    for (i, row) in x.values().outer_iter().enumerate() {
        assert!((avg[i] - row.mean().unwrap()).abs() < 1e-12);
    }

    let rep = cmd_irt_report(&det.path, &cfg).unwrap();
    let theta = io::read_theta(fs::File::open(cfg.out_dir.join("theta.csv")).unwrap()).unwrap();
    assert_eq!(theta, rep.model.theta);
    let (_, items) = io::read_items(fs::File::open(cfg.out_dir.join("items.csv")).unwrap()).unwrap();
    assert_eq!(items, rep.model.items);
}

#[test]
fn experiment_report_is_complete_and_plots_do_not_feed_csvs() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = RunConfig {
        iterations: 3,
        repetitions: 2,
        seed: 8,
        out_dir: tmp.path().join("a"),
        ..RunConfig::default()
    };
    let out = cmd_experiment(ExperimentKind::Ex2, &cfg).unwrap();
    assert_eq!(out.run.report.rows().len(), 3 * 2 * 7);
    assert!(out.run.report.is_complete());
    let csv = fs::read(cfg.out_dir.join("report.csv")).unwrap();
    let parsed = ExperimentReport::read_tidy_csv(csv.as_slice()).unwrap();
    assert_eq!(parsed.rows(), out.run.report.rows());

    fs::remove_file(cfg.out_dir.join("auc_ex2.svg")).unwrap();
    let cfg_b = RunConfig { out_dir: tmp.path().join("b"), ..cfg.clone() };
    cmd_experiment(ExperimentKind::Ex2, &cfg_b).unwrap();
    for f in ["report.csv", "summary.csv", "paired_differences.csv", "top2.csv"] {
        assert_eq!(
            fs::read(cfg.out_dir.join(f)).unwrap(),
            fs::read(cfg_b.out_dir.join(f)).unwrap(),
            "{f}"
        );
    }
}
