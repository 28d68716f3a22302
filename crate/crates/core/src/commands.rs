//! File-to-file commands behind the `irtens` binary. Each reads its inputs,
//! writes its outputs under `cfg.out_dir` and returns what it computed.

use std::fs::{self, OpenOptions};
use std::io::Write;
use std::path::{Path, PathBuf};

use crate::combiners::{run_method, Method};
use crate::config::RunConfig;
use crate::detectors::run_all;
use crate::error::Result;
use crate::eval::{
    auc, false_positive_simulation, paired_difference_table, top2_significance,
    FalsePositiveSummary, GroupKey, PairedDifference,
};
use crate::experiment::{run_experiment, ExperimentRun};
use crate::io;
use crate::irt::{fit_scores, IrtModel};
use crate::model::{EnsembleResult, ScoreMatrix};
use crate::svg::auc_line_chart;
use crate::synth::{ExperimentKind, ExperimentSpec};

fn out_path(cfg: &RunConfig, file: &str) -> Result<PathBuf> {
    fs::create_dir_all(&cfg.out_dir)?;
    Ok(cfg.out_dir.join(file))
}

pub struct DetectOutput {
    pub path: PathBuf,
    pub scores: ScoreMatrix,
}

/// Scores a dataset CSV with all seven detectors into `scores.csv`. Labels
/// in the input are carried over.
pub fn cmd_detect(dataset: &Path, cfg: &RunConfig) -> Result<DetectOutput> {
    let ds = io::read_dataset(io::open_reader(dataset)?, &io::stem(dataset))?;
    let m = run_all(&ds, &cfg.detector_config(ds.n_obs()))?;
    let path = out_path(cfg, "scores.csv")?;
    io::write_scores(io::create_writer(&path)?, &m, ds.labels())?;
    Ok(DetectOutput { path, scores: m })
}

pub struct EnsembleOutput {
    pub path: PathBuf,
    pub results: Vec<EnsembleResult>,
    /// AUC per method when the score file carries labels.
    pub aucs: Option<Vec<(String, f64)>>,
    /// `Some(false)` when the IRT ensemble ran and hit `max_iter`.
    pub irt_converged: Option<bool>,
}

/// Applies the configured combiners to a score CSV, writing `ensemble.csv`.
/// With labels, AUCs are appended to `auc_summary.csv`.
pub fn cmd_ensemble(scores: &Path, cfg: &RunConfig) -> Result<EnsembleOutput> {
    let (m, labels) = io::read_scores(io::open_reader(scores)?)?;
    let greedy = cfg.greedy()?;
    let results = cfg
        .method
        .methods()
        .into_iter()
        .map(|meth| run_method(meth, &m, &greedy, &cfg.fit, cfg.epsilon))
        .collect::<Result<Vec<_>>>()?;
    let path = out_path(cfg, "ensemble.csv")?;
    io::write_ensembles(io::create_writer(&path)?, &results, labels.as_deref())?;
    let aucs = match &labels {
        Some(l) => {
            let rows = results
                .iter()
                .map(|r| Ok((r.method.clone(), auc(&r.scores, l)?)))
                .collect::<Result<Vec<_>>>()?;
            append_auc_summary(&out_path(cfg, "auc_summary.csv")?, &io::stem(scores), &rows)?;
            Some(rows)
        }
        None => None,
    };
    let irt_converged = results
        .iter()
        .find(|r| r.method == Method::Irt.name())
        .map(|r| r.params.get("converged").is_none_or(|c| c == "true"));
    Ok(EnsembleOutput {
        path,
        results,
        aucs,
        irt_converged,
    })
}

fn append_auc_summary(path: &Path, source: &str, rows: &[(String, f64)]) -> Result<()> {
    let fresh = !path.exists();
    let mut f = OpenOptions::new().create(true).append(true).open(path)?;
    if fresh {
        writeln!(f, "source,method,auc")?;
    }
    for (method, a) in rows {
        writeln!(f, "{source},{method},{a}")?;
    }
    Ok(())
}

pub struct ExperimentOutput {
    pub run: ExperimentRun,
    /// IRT minus every other method, pooled then per iteration.
    pub differences: Vec<PairedDifference>,
    pub files: Vec<PathBuf>,
}

impl ExperimentOutput {
    pub fn unconverged_cells(&self) -> usize {
        self.run.cells.iter().filter(|c| !c.irt_converged).count()
    }
}

/// Runs the full synthetic grid and writes `config.txt`, `report.csv`,
/// `summary.csv`, `paired_differences.csv`, `top2.csv` and an SVG chart of
/// mean AUC by iteration.
pub fn cmd_experiment(kind: ExperimentKind, cfg: &RunConfig) -> Result<ExperimentOutput> {
    cfg.validate()?;
    let spec = ExperimentSpec::new(kind, cfg.iterations, cfg.repetitions, cfg.seed)?;
    let run = run_experiment(&spec, &cfg.experiment())?;
    let report = &run.report;
    let mut files = Vec::new();
    let mut file = |name: &str| -> Result<PathBuf> {
        let p = out_path(cfg, name)?;
        files.push(p.clone());
        Ok(p)
    };

    io::write_text(&file("config.txt")?, &cfg.to_kv_string())?;
    report.write_tidy_csv(io::create_writer(&file("report.csv")?)?)?;
    report.write_summary_csv(io::create_writer(&file("summary.csv")?)?)?;
    let differences = paired_difference_table(report, Method::Irt.name())?;
    io::write_paired_differences(
        io::create_writer(&file("paired_differences.csv")?)?,
        &differences,
    )?;
    let top2 = top2_significance(report, GroupKey::Iteration)?;
    io::write_top2(io::create_writer(&file("top2.csv")?)?, &top2)?;
    let svg_name = format!("auc_{}.svg", kind.name().to_lowercase());
    io::write_text(&file(&svg_name)?, &auc_line_chart(report, kind.name()))?;
    Ok(ExperimentOutput {
        run,
        differences,
        files,
    })
}

pub struct IrtReportOutput {
    pub detector_names: Vec<String>,
    pub model: IrtModel,
}

/// Fits the IRT model to a score CSV and writes `items.csv`, `theta.csv`
/// and `fit.csv`.
pub fn cmd_irt_report(scores: &Path, cfg: &RunConfig) -> Result<IrtReportOutput> {
    let (m, _) = io::read_scores(io::open_reader(scores)?)?;
    let (model, _) = fit_scores(&m, cfg.epsilon, &cfg.fit)?;
    io::write_items(
        io::create_writer(&out_path(cfg, "items.csv")?)?,
        m.detector_names(),
        &model.items,
    )?;
    io::write_theta(io::create_writer(&out_path(cfg, "theta.csv")?)?, &model.theta)?;
    io::write_fit_summary(io::create_writer(&out_path(cfg, "fit.csv")?)?, &model)?;
    Ok(IrtReportOutput {
        detector_names: m.detector_names().to_vec(),
        model,
    })
}

/// Equal-performance calibration, written to `fp_sim.csv`.
pub fn cmd_fp_sim(
    n_sources: usize,
    n_datasets: usize,
    n_methods: usize,
    reps: usize,
    cfg: &RunConfig,
) -> Result<FalsePositiveSummary> {
    let s = false_positive_simulation(n_sources, n_datasets, n_methods, reps, cfg.seed)?;
    let mut body = String::from("repetition,false_positives\n");
    for (r, c) in s.counts.iter().enumerate() {
        body.push_str(&format!("{},{c}\n", r + 1));
    }
    io::write_text(&out_path(cfg, "fp_sim.csv")?, &body)?;
    Ok(s)
}
