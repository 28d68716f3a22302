//! Performance metric, significance tests and detector-correlation
//! diagnostics.

mod report;
pub mod special;
mod ttest;

pub use report::{
    best_method_proportions, paired_difference_table, top2_significance, ExperimentReport,
    GroupKey, PairedDifference, ReportRow, SummaryRow, Top2Result,
};
pub use ttest::{
    false_positive_simulation, t_test_paired_diff, t_test_two_sample, FalsePositiveSummary, TTest,
    SIGNIFICANCE_LEVEL,
};

use ndarray::{Array2, ArrayView1, ArrayView2};

use crate::error::{invalid, Result};

pub fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

/// Sample standard deviation (n - 1 denominator). Zero for fewer than two values.
pub fn sample_sd(v: &[f64]) -> f64 {
    if v.len() < 2 {
        return 0.0;
    }
    let m = mean(v);
    (v.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (v.len() - 1) as f64).sqrt()
}

/// Pearson correlation. A zero-variance input correlates 0 with anything.
pub fn pearson(a: ArrayView1<'_, f64>, b: ArrayView1<'_, f64>) -> f64 {
    let n = a.len() as f64;
    let ma = a.sum() / n;
    let mb = b.sum() / n;
    let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
    for (&x, &y) in a.iter().zip(b.iter()) {
        let (dx, dy) = (x - ma, y - mb);
        sab += dx * dy;
        saa += dx * dx;
        sbb += dy * dy;
    }
    if saa == 0.0 || sbb == 0.0 {
        return 0.0;
    }
    (sab / (saa.sqrt() * sbb.sqrt())).clamp(-1.0, 1.0)
}

/// Pairwise Pearson correlations between columns, with a unit diagonal.
pub fn correlation_matrix(m: ArrayView2<'_, f64>) -> Array2<f64> {
    let n = m.ncols();
    let mut out = Array2::eye(n);
    for a in 0..n {
        for b in a + 1..n {
            let r = pearson(m.column(a), m.column(b));
            out[[a, b]] = r;
            out[[b, a]] = r;
        }
    }
    out
}

/// Area under the ROC curve via the Mann-Whitney rank statistic. Tied scores
/// share their mid-rank, so a tied positive-negative pair counts one half.
pub fn auc(scores: &[f64], labels: &[u8]) -> Result<f64> {
    if scores.len() != labels.len() {
        return invalid(format!(
            "{} scores for {} labels",
            scores.len(),
            labels.len()
        ));
    }
    if scores.iter().any(|s| !s.is_finite()) {
        return invalid("scores must be finite");
    }
    let n_pos = labels.iter().filter(|&&l| l == 1).count();
    let n_neg = labels.iter().filter(|&&l| l == 0).count();
    if n_pos + n_neg != labels.len() {
        return invalid("labels must be 0 or 1");
    }
    if n_pos == 0 || n_neg == 0 {
        return invalid("AUC needs at least one positive and one negative label");
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));

    // Sum of doubled mid-ranks keeps the arithmetic in integers.
    let mut pos_rank_x2: u64 = 0;
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && scores[order[j + 1]] == scores[order[i]] {
            j += 1;
        }
        // 1-based ranks i+1..=j+1, mid-rank doubled = i + j + 2
        let mid_x2 = (i + j + 2) as u64;
        let pos_in_group = order[i..=j].iter().filter(|&&o| labels[o] == 1).count() as u64;
        pos_rank_x2 += mid_x2 * pos_in_group;
        i = j + 1;
    }
    let (p, q) = (n_pos as u64, n_neg as u64);
    let u_x2 = pos_rank_x2 - p * (p + 1);
    Ok(u_x2 as f64 / (2 * p * q) as f64)
}

/// Counts entries of the detector correlation matrix strictly above each
/// threshold, minus the `n` diagonal ones. Off-diagonal pairs count twice.
pub fn correlation_counts(m: ArrayView2<'_, f64>, thresholds: &[f64]) -> Vec<usize> {
    let corr = correlation_matrix(m);
    let n = m.ncols();
    thresholds
        .iter()
        .map(|&t| {
            let above = corr.iter().filter(|&&r| r > t).count();
            above.saturating_sub(n)
        })
        .collect()
}

/// The thresholds behind the Cor70/Cor80/Cor90 diagnostics.
pub const COR_THRESHOLDS: [f64; 3] = [0.7, 0.8, 0.9];
