//! Runs a synthetic experiment grid: generate, detect, combine, score.

use rayon::prelude::*;

use crate::combiners::{run_all_combiners_eps, GreedyConfig, Method};
use crate::detectors::{run_all, DetectorConfig, Regime};
use crate::error::Result;
use crate::eval::{auc, ExperimentReport, ReportRow};
use crate::irt::{fit_scores, FitConfig, ItemParams};
use crate::model::{LabeledDataset, ScoreMatrix, DEFAULT_EPSILON};
use crate::synth::{generate, ExperimentKind, ExperimentSpec};

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub regime: Regime,
    /// Overrides the detector sizes of `regime` when set.
    pub detectors: Option<DetectorConfig>,
    /// Greedy κ. `None` uses the planted anomaly count.
    pub kappa: Option<usize>,
    pub kappa_range: std::ops::RangeInclusive<usize>,
    pub fit: FitConfig,
    pub epsilon: f64,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            regime: Regime::T1,
            detectors: None,
            kappa: None,
            kappa_range: 1..=10,
            fit: FitConfig::default(),
            epsilon: DEFAULT_EPSILON,
        }
    }
}

impl ExperimentConfig {
    pub fn detector_config(&self, n_obs: usize) -> DetectorConfig {
        self.detectors
            .unwrap_or_else(|| DetectorConfig::for_regime(self.regime, n_obs))
    }

    fn greedy(&self, default_kappa: usize) -> Result<GreedyConfig> {
        GreedyConfig::new(self.kappa.unwrap_or(default_kappa), self.kappa_range.clone())
    }
}

/// Everything measured on one (iteration, repetition) cell.
#[derive(Debug, Clone, PartialEq)]
pub struct CellOutcome {
    pub iteration: usize,
    pub repetition: usize,
    /// AUC per method in [`Method::ALL`] order.
    pub aucs: Vec<f64>,
    /// Fitted IRT item parameters, one per detector.
    pub items: Vec<ItemParams>,
    pub irt_converged: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentRun {
    pub spec: ExperimentSpec,
    pub detector_names: Vec<String>,
    pub cells: Vec<CellOutcome>,
    pub report: ExperimentReport,
}

/// Detector scores, all seven ensembles and their AUCs on a labeled dataset.
pub fn evaluate_dataset(
    ds: &LabeledDataset,
    cfg: &ExperimentConfig,
    kappa: usize,
) -> Result<(ScoreMatrix, Vec<f64>, Vec<ItemParams>, bool)> {
    let labels = ds.labels().ok_or_else(|| {
        crate::Error::InvalidInput(format!("dataset `{}` has no labels", ds.name()))
    })?;
    let m = run_all(ds, &cfg.detector_config(ds.n_obs()))?;
    let results = run_all_combiners_eps(&m, &cfg.greedy(kappa)?, &cfg.fit, cfg.epsilon)?;
    let aucs = results
        .iter()
        .map(|r| auc(&r.scores, labels))
        .collect::<Result<Vec<f64>>>()?;
    let (model, _) = fit_scores(&m, cfg.epsilon, &cfg.fit)?;
    Ok((m, aucs, model.items, model.converged))
}

pub fn run_cell(
    kind: ExperimentKind,
    iteration: usize,
    repetition: usize,
    seed: u64,
    cfg: &ExperimentConfig,
) -> Result<(CellOutcome, Vec<String>)> {
    let ds = generate(kind, iteration, repetition, seed)?;
    let (m, aucs, items, irt_converged) = evaluate_dataset(&ds, cfg, kind.n_anomalies())?;
    Ok((
        CellOutcome {
            iteration,
            repetition,
            aucs,
            items,
            irt_converged,
        },
        m.detector_names().to_vec(),
    ))
}

/// Runs every cell in parallel and collects results in (iteration,
/// repetition) order, so the report does not depend on scheduling.
pub fn run_experiment(spec: &ExperimentSpec, cfg: &ExperimentConfig) -> Result<ExperimentRun> {
    let cells = spec.cells();
    let outcomes: Vec<(CellOutcome, Vec<String>)> = cells
        .par_iter()
        .map(|&(it, rep)| run_cell(spec.experiment, it, rep, spec.seed, cfg))
        .collect::<Result<_>>()?;
    let detector_names = outcomes
        .first()
        .map(|o| o.1.clone())
        .unwrap_or_default();
    let mut report = ExperimentReport::new(Method::names());
    let name = spec.experiment.name();
    for (cell, _) in &outcomes {
        for (m, &a) in Method::ALL.iter().zip(&cell.aucs) {
            report.push(ReportRow {
                experiment: name.to_string(),
                iteration: cell.iteration,
                repetition: cell.repetition,
                method: m.name().to_string(),
                auc: a,
            })?;
        }
    }
    Ok(ExperimentRun {
        spec: *spec,
        detector_names,
        cells: outcomes.into_iter().map(|o| o.0).collect(),
        report,
    })
}
