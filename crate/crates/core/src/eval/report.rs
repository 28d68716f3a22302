//! Tidy AUC reports and their aggregations.

use std::collections::BTreeMap;
use std::io::{Read, Write};

use super::ttest::{t_test_paired_diff, t_test_two_sample, TTest, SIGNIFICANCE_LEVEL};
use super::{mean, sample_sd};
use crate::error::{invalid, Error, Result};

/// One cell of an experiment grid.
#[derive(Debug, Clone, PartialEq)]
pub struct ReportRow {
    pub experiment: String,
    pub iteration: usize,
    pub repetition: usize,
    pub method: String,
    pub auc: f64,
}

/// Mean and SD of AUC for one method at one iteration.
#[derive(Debug, Clone, PartialEq)]
pub struct SummaryRow {
    pub experiment: String,
    pub iteration: usize,
    pub method: String,
    pub n: usize,
    pub mean: f64,
    pub sd: f64,
}

/// Rows of (experiment, iteration, repetition, method, auc) with a fixed
/// method order.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ExperimentReport {
    methods: Vec<String>,
    rows: Vec<ReportRow>,
}

type CellKey = (String, usize, usize);

impl ExperimentReport {
    pub fn new(methods: Vec<String>) -> Self {
        Self {
            methods,
            rows: Vec::new(),
        }
    }

    pub fn methods(&self) -> &[String] {
        &self.methods
    }

    pub fn rows(&self) -> &[ReportRow] {
        &self.rows
    }

    pub fn push(&mut self, row: ReportRow) -> Result<()> {
        if !(0.0..=1.0).contains(&row.auc) {
            return invalid(format!("AUC {} outside [0, 1]", row.auc));
        }
        if !self.methods.contains(&row.method) {
            return invalid(format!("unknown method `{}`", row.method));
        }
        self.rows.push(row);
        Ok(())
    }

    pub fn extend(&mut self, rows: impl IntoIterator<Item = ReportRow>) -> Result<()> {
        rows.into_iter().try_for_each(|r| self.push(r))
    }

    fn method_index(&self, m: &str) -> usize {
        self.methods.iter().position(|x| x == m).unwrap_or(usize::MAX)
    }

    /// Sorts rows by experiment, iteration, repetition, then method order.
    pub fn sort(&mut self) {
        let methods = self.methods.clone();
        let idx = |m: &str| methods.iter().position(|x| x == m).unwrap_or(usize::MAX);
        self.rows.sort_by(|a, b| {
            (&a.experiment, a.iteration, a.repetition, idx(&a.method)).cmp(&(
                &b.experiment,
                b.iteration,
                b.repetition,
                idx(&b.method),
            ))
        });
    }

    /// Per-cell AUCs in method order. `None` marks a method missing from the cell.
    fn cells(&self) -> BTreeMap<CellKey, Vec<Option<f64>>> {
        let mut cells: BTreeMap<CellKey, Vec<Option<f64>>> = BTreeMap::new();
        for r in &self.rows {
            let v = cells
                .entry((r.experiment.clone(), r.iteration, r.repetition))
                .or_insert_with(|| vec![None; self.methods.len()]);
            v[self.method_index(&r.method)] = Some(r.auc);
        }
        cells
    }

    /// Cells lacking at least one method.
    pub fn missing_cells(&self) -> Vec<(String, usize, usize)> {
        self.cells()
            .into_iter()
            .filter(|(_, v)| v.iter().any(Option::is_none))
            .map(|(k, _)| k)
            .collect()
    }

    pub fn is_complete(&self) -> bool {
        self.missing_cells().is_empty()
    }

    /// Pooled AUCs of one method in one experiment, in cell order.
    pub fn aucs(&self, experiment: &str, method: &str) -> Vec<f64> {
        let mut v: Vec<(usize, usize, f64)> = self
            .rows
            .iter()
            .filter(|r| r.experiment == experiment && r.method == method)
            .map(|r| (r.iteration, r.repetition, r.auc))
            .collect();
        v.sort_by_key(|x| (x.0, x.1));
        v.into_iter().map(|x| x.2).collect()
    }

    pub fn experiments(&self) -> Vec<String> {
        let mut e: Vec<String> = self.rows.iter().map(|r| r.experiment.clone()).collect();
        e.sort();
        e.dedup();
        e
    }

    /// Mean and SD per (experiment, iteration, method).
    pub fn summary(&self) -> Vec<SummaryRow> {
        let mut groups: BTreeMap<(String, usize, usize), Vec<f64>> = BTreeMap::new();
        for r in &self.rows {
            groups
                .entry((r.experiment.clone(), r.iteration, self.method_index(&r.method)))
                .or_default()
                .push(r.auc);
        }
        groups
            .into_iter()
            .map(|((experiment, iteration, m), v)| SummaryRow {
                experiment,
                iteration,
                method: self.methods[m].clone(),
                n: v.len(),
                mean: mean(&v),
                sd: sample_sd(&v),
            })
            .collect()
    }

    /// Pooled mean AUC per method in one experiment, in method order.
    pub fn pooled_means(&self, experiment: &str) -> Vec<(String, f64)> {
        self.methods
            .iter()
            .map(|m| (m.clone(), mean(&self.aucs(experiment, m))))
            .collect()
    }

    pub fn write_tidy_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(["experiment", "iteration", "repetition", "method", "auc"])?;
        for r in &self.rows {
            out.write_record([
                r.experiment.clone(),
                r.iteration.to_string(),
                r.repetition.to_string(),
                r.method.clone(),
                r.auc.to_string(),
            ])?;
        }
        out.flush()?;
        Ok(())
    }

    pub fn write_summary_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(["experiment", "iteration", "method", "n", "mean_auc", "sd_auc"])?;
        for s in self.summary() {
            out.write_record([
                s.experiment,
                s.iteration.to_string(),
                s.method,
                s.n.to_string(),
                s.mean.to_string(),
                s.sd.to_string(),
            ])?;
        }
        out.flush()?;
        Ok(())
    }

    /// Reads a tidy CSV. Methods are ordered by first appearance.
    pub fn read_tidy_csv<R: Read>(r: R) -> Result<Self> {
        let mut rdr = csv::Reader::from_reader(r);
        let mut raw = Vec::new();
        for rec in rdr.records() {
            let rec = rec?;
            if rec.len() != 5 {
                return invalid(format!("expected 5 fields, got {}", rec.len()));
            }
            let num = |i: usize| -> Result<usize> {
                rec[i]
                    .parse()
                    .map_err(|_| Error::InvalidInput(format!("bad integer `{}`", &rec[i])))
            };
            let auc: f64 = rec[4]
                .parse()
                .map_err(|_| Error::InvalidInput(format!("bad AUC `{}`", &rec[4])))?;
            raw.push(ReportRow {
                experiment: rec[0].to_string(),
                iteration: num(1)?,
                repetition: num(2)?,
                method: rec[3].to_string(),
                auc,
            });
        }
        let mut methods: Vec<String> = Vec::new();
        for r in &raw {
            if !methods.contains(&r.method) {
                methods.push(r.method.clone());
            }
        }
        let mut rep = Self::new(methods);
        rep.extend(raw)?;
        Ok(rep)
    }
}

/// How rows are grouped for the best-versus-second test.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GroupKey {
    /// One group per experiment (or dataset source), pooling all cells.
    Experiment,
    /// One group per (experiment, iteration).
    Iteration,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Top2Result {
    pub group: String,
    pub best: String,
    pub second: String,
    pub test: TTest,
    pub significant: bool,
}

/// For each group, tests the method with the highest mean AUC against the
/// runner-up with a pooled one-sided two-sample test.
///
/// When both samples are constant the test is undefined; it is reported as
/// significant exactly when the best mean is strictly larger.
pub fn top2_significance(report: &ExperimentReport, key: GroupKey) -> Result<Vec<Top2Result>> {
    if report.methods.len() < 2 {
        return invalid("need at least 2 methods");
    }
    let mut groups: BTreeMap<(String, usize), Vec<Vec<f64>>> = BTreeMap::new();
    let mut sorted = report.clone();
    sorted.sort();
    for r in &sorted.rows {
        let g = match key {
            GroupKey::Experiment => (r.experiment.clone(), 0),
            GroupKey::Iteration => (r.experiment.clone(), r.iteration),
        };
        groups
            .entry(g)
            .or_insert_with(|| vec![Vec::new(); report.methods.len()])[report.method_index(&r.method)]
            .push(r.auc);
    }
    let mut out = Vec::with_capacity(groups.len());
    for ((exp, it), samples) in groups {
        let (best, second) = super::ttest::top_two(&samples);
        let (a, b) = (&samples[best], &samples[second]);
        let test = match t_test_two_sample(a, b) {
            Ok(t) => t,
            Err(Error::Degenerate(_)) => {
                let df = (a.len() + b.len()) as f64 - 2.0;
                let better = mean(a) > mean(b);
                TTest {
                    t: if better { f64::INFINITY } else { 0.0 },
                    df,
                    p: if better { 0.0 } else { 0.5 },
                }
            }
            Err(e) => return Err(e),
        };
        let group = match key {
            GroupKey::Experiment => exp,
            GroupKey::Iteration => format!("{exp}/{it}"),
        };
        out.push(Top2Result {
            group,
            best: report.methods[best].clone(),
            second: report.methods[second].clone(),
            significant: test.p < SIGNIFICANCE_LEVEL,
            test,
        });
    }
    Ok(out)
}

/// Paired comparison of a reference method against one other method.
/// `iteration` is `None` for the test pooled across all iterations.
#[derive(Debug, Clone, PartialEq)]
pub struct PairedDifference {
    pub experiment: String,
    pub iteration: Option<usize>,
    pub method: String,
    pub n: usize,
    pub mean_diff: f64,
    pub sd_diff: f64,
    pub test: TTest,
}

fn paired_test(diffs: &[f64]) -> Result<TTest> {
    match t_test_paired_diff(diffs) {
        Err(Error::Degenerate(_)) => {
            let m = mean(diffs);
            Ok(TTest {
                t: m.signum() * f64::INFINITY,
                df: diffs.len() as f64 - 1.0,
                p: if m > 0.0 { 0.0 } else { 1.0 },
            })
        }
        r => r,
    }
}

/// `reference − method` AUC differences per cell, tested one-sided for a
/// positive mean. Emits the pooled test per experiment followed by one test
/// per iteration. Cells missing either method are skipped.
pub fn paired_difference_table(
    report: &ExperimentReport,
    reference: &str,
) -> Result<Vec<PairedDifference>> {
    let r = report.method_index(reference);
    if r == usize::MAX {
        return invalid(format!("reference method `{reference}` not in report"));
    }
    let cells = report.cells();
    let mut out = Vec::new();
    for exp in report.experiments() {
        let exp_cells: Vec<(&CellKey, &Vec<Option<f64>>)> =
            cells.iter().filter(|(k, _)| k.0 == exp).collect();
        let mut iterations: Vec<usize> = exp_cells.iter().map(|(k, _)| k.1).collect();
        iterations.dedup();
        for (m, name) in report.methods.iter().enumerate() {
            if m == r {
                continue;
            }
            let diffs_for = |it: Option<usize>| -> Vec<f64> {
                exp_cells
                    .iter()
                    .filter(|(k, _)| it.is_none_or(|i| k.1 == i))
                    .filter_map(|(_, v)| Some(v[r]? - v[m]?))
                    .collect()
            };
            let groups = std::iter::once(None).chain(iterations.iter().map(|&i| Some(i)));
            for it in groups {
                let d = diffs_for(it);
                if d.len() < 2 {
                    continue;
                }
                out.push(PairedDifference {
                    experiment: exp.clone(),
                    iteration: it,
                    method: name.clone(),
                    n: d.len(),
                    mean_diff: mean(&d),
                    sd_diff: sample_sd(&d),
                    test: paired_test(&d)?,
                });
            }
        }
    }
    Ok(out)
}

/// Fraction of cells (datasets) on which each method has the highest AUC.
/// Ties go to the method listed first. Incomplete cells are skipped.
pub fn best_method_proportions(report: &ExperimentReport) -> Vec<(String, f64)> {
    let mut wins = vec![0usize; report.methods.len()];
    let mut total = 0usize;
    for v in report.cells().values() {
        let Some(aucs): Option<Vec<f64>> = v.iter().copied().collect() else {
            continue;
        };
        let mut best = 0;
        for (j, &a) in aucs.iter().enumerate().skip(1) {
            if a > aucs[best] {
                best = j;
            }
        }
        wins[best] += 1;
        total += 1;
    }
    report
        .methods
        .iter()
        .zip(wins)
        .map(|(m, w)| {
            let p = if total == 0 { 0.0 } else { w as f64 / total as f64 };
            (m.clone(), p)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn row(exp: &str, it: usize, rep: usize, m: &str, auc: f64) -> ReportRow {
        ReportRow {
            experiment: exp.into(),
            iteration: it,
            repetition: rep,
            method: m.into(),
            auc,
        }
    }

    fn methods(names: &[&str]) -> Vec<String> {
        names.iter().map(|s| s.to_string()).collect()
    }

    #[test]
    fn rejects_bad_rows() {
        let mut r = ExperimentReport::new(methods(&["A"]));
        assert!(r.push(row("E", 1, 1, "A", 1.2)).is_err());
        assert!(r.push(row("E", 1, 1, "B", 0.5)).is_err());
    }

    #[test]
    fn detects_missing_cells() {
        let mut r = ExperimentReport::new(methods(&["A", "B"]));
        r.push(row("E", 1, 1, "A", 0.5)).unwrap();
        r.push(row("E", 1, 1, "B", 0.5)).unwrap();
        r.push(row("E", 1, 2, "A", 0.5)).unwrap();
        assert_eq!(r.missing_cells(), vec![("E".to_string(), 1, 2)]);
    }

    #[test]
    fn tidy_round_trip() {
        let mut r = ExperimentReport::new(methods(&["IRT", "Average"]));
        r.push(row("EX1", 1, 1, "IRT", 0.9123456789)).unwrap();
        r.push(row("EX1", 1, 1, "Average", 1.0 / 3.0)).unwrap();
        let mut buf = Vec::new();
        r.write_tidy_csv(&mut buf).unwrap();
        let back = ExperimentReport::read_tidy_csv(buf.as_slice()).unwrap();
        assert_eq!(back, r);
        let mut again = Vec::new();
        back.write_tidy_csv(&mut again).unwrap();
        assert_eq!(buf, again);
    }

    #[test]
    fn summary_by_iteration() {
        let mut r = ExperimentReport::new(methods(&["B", "A"]));
        for (rep, a) in [(1, 0.6), (2, 0.8)] {
            r.push(row("E", 1, rep, "A", a)).unwrap();
            r.push(row("E", 1, rep, "B", 0.5)).unwrap();
        }
        let s = r.summary();
        assert_eq!(s.len(), 2);
        assert_eq!(s[0].method, "B");
        assert!((s[1].mean - 0.7).abs() < 1e-12);
        assert!((s[1].sd - 0.02f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn dominating_method_is_significant() {
        let mut r = ExperimentReport::new(methods(&["A", "B", "C"]));
        for rep in 0..10 {
            let j = rep as f64 * 0.001;
            r.push(row("S", 1, rep, "A", 0.9 + j)).unwrap();
            r.push(row("S", 1, rep, "B", 0.6 - j)).unwrap();
            r.push(row("S", 1, rep, "C", 0.5 + j)).unwrap();
        }
        let t = top2_significance(&r, GroupKey::Experiment).unwrap();
        assert_eq!(t[0].best, "A");
        assert_eq!(t[0].second, "B");
        assert!(t[0].significant);
    }

    #[test]
    fn identical_methods_not_significant() {
        let mut r = ExperimentReport::new(methods(&["A", "B"]));
        for rep in 0..5 {
            for m in ["A", "B"] {
                r.push(row("S", 1, rep, m, 0.7)).unwrap();
            }
        }
        let t = top2_significance(&r, GroupKey::Iteration).unwrap();
        assert_eq!(t[0].group, "S/1");
        assert_eq!(t[0].best, "A");
        assert!(!t[0].significant);
        assert_eq!(t[0].test.p, 0.5);
    }

    #[test]
    fn paired_table_pools_and_splits() {
        let mut r = ExperimentReport::new(methods(&["IRT", "Avg"]));
        let vals = [(1, 0.9, 0.8), (1, 0.85, 0.8), (2, 0.7, 0.72), (2, 0.75, 0.7)];
        for (rep, &(it, a, b)) in vals.iter().enumerate() {
            r.push(row("E", it, rep, "IRT", a)).unwrap();
            r.push(row("E", it, rep, "Avg", b)).unwrap();
        }
        let t = paired_difference_table(&r, "IRT").unwrap();
        assert_eq!(t.len(), 3);
        assert_eq!(t[0].iteration, None);
        assert_eq!(t[0].n, 4);
        let d = [0.1, 0.05, -0.02, 0.05];
        assert!((t[0].mean_diff - d.iter().sum::<f64>() / 4.0).abs() < 1e-12);
        assert_eq!(t[1].iteration, Some(1));
        assert_eq!(t[2].iteration, Some(2));
        assert!(paired_difference_table(&r, "nope").is_err());
    }

    #[test]
    fn best_method_ties_to_first() {
        let mut r = ExperimentReport::new(methods(&["A", "B"]));
        r.push(row("d1", 1, 1, "A", 0.7)).unwrap();
        r.push(row("d1", 1, 1, "B", 0.7)).unwrap();
        r.push(row("d2", 1, 1, "A", 0.6)).unwrap();
        r.push(row("d2", 1, 1, "B", 0.8)).unwrap();
        let p = best_method_proportions(&r);
        assert_eq!(p, vec![("A".into(), 0.5), ("B".into(), 0.5)]);
    }

    proptest! {
        #[test]
        fn proportions_sum_to_one(aucs in prop::collection::vec(prop::collection::vec(0u8..5, 4), 1..30)) {
            let ms = methods(&["A", "B", "C", "D"]);
            let mut r = ExperimentReport::new(ms.clone());
            for (d, cell) in aucs.iter().enumerate() {
                for (m, &a) in ms.iter().zip(cell) {
                    r.push(row(&format!("d{d}"), 1, 1, m, a as f64 / 4.0)).unwrap();
                }
            }
            let s: f64 = best_method_proportions(&r).iter().map(|p| p.1).sum();
            prop_assert!((s - 1.0).abs() < 1e-12);
        }
    }
}
