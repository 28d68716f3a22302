//! Benchmark score combiners and the fixed seven-method roster.

use std::fmt;
use std::ops::RangeInclusive;
use std::str::FromStr;

use ndarray::{Array1, Array2, ArrayView2, Axis};
use rayon::prelude::*;

use crate::error::{invalid, Error, Result};
use crate::eval::pearson;
use crate::irt::{irt_ensemble, FitConfig};
use crate::model::{normalize_columns, EnsembleResult, ScoreMatrix, DEFAULT_EPSILON};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Method {
    Irt,
    Average,
    Greedy,
    GreedyAvg,
    Icwa,
    Max,
    Thresh,
}

impl Method {
    /// Roster in report order.
    pub const ALL: [Method; 7] = [
        Method::Irt,
        Method::Average,
        Method::Greedy,
        Method::GreedyAvg,
        Method::Icwa,
        Method::Max,
        Method::Thresh,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Method::Irt => "IRT",
            Method::Average => "Average",
            Method::Greedy => "Greedy",
            Method::GreedyAvg => "Greedy-Avg",
            Method::Icwa => "ICWA",
            Method::Max => "Max",
            Method::Thresh => "Thresh",
        }
    }

    pub fn names() -> Vec<String> {
        Self::ALL.iter().map(|m| m.name().to_string()).collect()
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let key: String = s
            .chars()
            .filter(|c| c.is_ascii_alphanumeric())
            .collect::<String>()
            .to_ascii_lowercase();
        Ok(match key.as_str() {
            "irt" => Method::Irt,
            "average" | "avg" | "mean" => Method::Average,
            "greedy" => Method::Greedy,
            "greedyavg" => Method::GreedyAvg,
            "icwa" => Method::Icwa,
            "max" | "maximum" => Method::Max,
            "thresh" => Method::Thresh,
            _ => return invalid(format!("unknown ensemble method `{s}`")),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GreedyConfig {
    /// Expected number of anomalies.
    pub kappa: usize,
    /// κ values averaged by Greedy-Avg.
    pub kappa_range: RangeInclusive<usize>,
}

impl Default for GreedyConfig {
    fn default() -> Self {
        Self {
            kappa: 5,
            kappa_range: 1..=10,
        }
    }
}

impl GreedyConfig {
    pub fn new(kappa: usize, kappa_range: RangeInclusive<usize>) -> Result<Self> {
        if kappa == 0 {
            return invalid("kappa must be at least 1");
        }
        if kappa_range.is_empty() || *kappa_range.start() == 0 {
            return invalid("kappa range must be nonempty and start at 1 or more");
        }
        Ok(Self { kappa, kappa_range })
    }

    /// Checks `κ < N` and clips the range to `1..=N-1`.
    fn checked(&self, n: usize) -> Result<RangeInclusive<usize>> {
        if self.kappa == 0 || self.kappa >= n {
            return invalid(format!("kappa = {} must lie in 1..{n}", self.kappa));
        }
        let hi = (*self.kappa_range.end()).min(n - 1);
        let lo = *self.kappa_range.start();
        if lo == 0 || lo > hi {
            return invalid(format!(
                "kappa range {lo}..={} is empty for N = {n}",
                self.kappa_range.end()
            ));
        }
        Ok(lo..=hi)
    }
}

/// Affinity propagation settings.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ApConfig {
    pub damping: f64,
    pub max_iter: usize,
    /// Sweeps the exemplar set must stay unchanged to count as converged.
    pub convergence_iter: usize,
    /// Size of the index-ordered offset that breaks ties, relative to the
    /// similarity scale.
    pub tie_break: f64,
    /// Diagonal of the similarity matrix. `None` uses the median off-diagonal similarity.
    pub preference: Option<f64>,
}

impl Default for ApConfig {
    fn default() -> Self {
        Self {
            damping: 0.9,
            max_iter: 1000,
            convergence_iter: 50,
            tie_break: 1e-9,
            preference: None,
        }
    }
}

/// Row means.
pub fn row_mean(x: ArrayView2<'_, f64>) -> Vec<f64> {
    x.mean_axis(Axis(1))
        .map(|m| m.to_vec())
        .unwrap_or_else(|| vec![0.0; x.nrows()])
}

pub fn row_max(x: ArrayView2<'_, f64>) -> Vec<f64> {
    x.rows()
        .into_iter()
        .map(|r| r.fold(f64::NEG_INFINITY, |a, &b| a.max(b)))
        .collect()
}

/// `Σ_j x_ij · 1[x_ij > mean_j]`.
pub fn thresh_sum(x: ArrayView2<'_, f64>) -> Vec<f64> {
    let means: Vec<f64> = x
        .columns()
        .into_iter()
        .map(|c| c.sum() / c.len() as f64)
        .collect();
    x.rows()
        .into_iter()
        .map(|r| {
            r.iter()
                .zip(&means)
                .filter(|(v, m)| v > m)
                .map(|(v, _)| v)
                .sum()
        })
        .collect()
}

fn mean_of_columns(x: ArrayView2<'_, f64>, cols: &[usize]) -> Array1<f64> {
    let mut acc = Array1::zeros(x.nrows());
    for &c in cols {
        acc += &x.column(c);
    }
    acc / cols.len() as f64
}

/// Binary pseudo-target marking the `kappa` rows with the largest row mean,
/// ties to the lower row index. `None` when every row mean is equal.
pub fn pseudo_target(x: ArrayView2<'_, f64>, kappa: usize) -> Option<Array1<f64>> {
    let rm = row_mean(x);
    if rm.iter().all(|&v| v == rm[0]) {
        return None;
    }
    let mut order: Vec<usize> = (0..rm.len()).collect();
    order.sort_by(|&a, &b| rm[b].total_cmp(&rm[a]).then(a.cmp(&b)));
    let mut t = Array1::zeros(rm.len());
    for &i in &order[..kappa.min(rm.len())] {
        t[i] = 1.0;
    }
    Some(t)
}

/// Detectors ordered by decreasing correlation with `target`, ties to the
/// lower index.
pub fn scan_order(x: ArrayView2<'_, f64>, target: &Array1<f64>) -> Vec<usize> {
    let corr: Vec<f64> = x
        .columns()
        .into_iter()
        .map(|c| pearson(c, target.view()))
        .collect();
    let mut order: Vec<usize> = (0..corr.len()).collect();
    order.sort_by(|&a, &b| corr[b].total_cmp(&corr[a]).then(a.cmp(&b)));
    order
}

/// Greedy detector selection on normalized scores. Returns the selected
/// columns in the order they were accepted, or `None` when the pseudo-target
/// is constant.
///
/// Starts from the detector most correlated with the target and accepts each
/// further candidate if the correlation of the ensemble mean with the target
/// does not drop.
pub fn greedy_select(x: ArrayView2<'_, f64>, kappa: usize) -> Option<Vec<usize>> {
    let target = pseudo_target(x, kappa)?;
    let order = scan_order(x, &target);
    let mut selected = vec![order[0]];
    let mut current = pearson(x.column(order[0]), target.view());
    for &c in &order[1..] {
        selected.push(c);
        let r = pearson(mean_of_columns(x, &selected).view(), target.view());
        if r >= current {
            current = r;
        } else {
            selected.pop();
        }
    }
    Some(selected)
}

fn greedy_scores(x: ArrayView2<'_, f64>, kappa: usize) -> Vec<f64> {
    match greedy_select(x, kappa) {
        Some(sel) => mean_of_columns(x, &sel).to_vec(),
        None => {
            log::warn!("greedy: all row means tied, falling back to the average");
            row_mean(x)
        }
    }
}

/// Output of [`affinity_propagation`].
#[derive(Debug, Clone, PartialEq)]
pub struct ApResult {
    pub exemplars: Vec<usize>,
    /// Exemplar index for every point.
    pub labels: Vec<usize>,
    pub iterations: usize,
    pub converged: bool,
}

impl ApResult {
    /// Members of each cluster, ordered by exemplar.
    pub fn clusters(&self) -> Vec<Vec<usize>> {
        self.exemplars
            .iter()
            .map(|&e| {
                (0..self.labels.len())
                    .filter(|&i| self.labels[i] == e)
                    .collect()
            })
            .collect()
    }
}

/// Median of the off-diagonal entries.
pub fn median_off_diagonal(s: ArrayView2<'_, f64>) -> f64 {
    let n = s.nrows();
    let mut v: Vec<f64> = (0..n)
        .flat_map(|i| (0..n).filter(move |&k| k != i).map(move |k| (i, k)))
        .map(|(i, k)| s[[i, k]])
        .collect();
    if v.is_empty() {
        return 0.0;
    }
    v.sort_by(f64::total_cmp);
    let m = v.len() / 2;
    if v.len().is_multiple_of(2) {
        0.5 * (v[m - 1] + v[m])
    } else {
        v[m]
    }
}

/// Assigns every point to its most similar exemplar; exemplars keep themselves.
pub fn assign_to_exemplars(s: ArrayView2<'_, f64>, exemplars: &[usize]) -> Vec<usize> {
    (0..s.nrows())
        .map(|i| {
            if exemplars.contains(&i) {
                return i;
            }
            let mut best = exemplars[0];
            for &e in &exemplars[1..] {
                if s[[i, e]] > s[[i, best]] {
                    best = e;
                }
            }
            best
        })
        .collect()
}

/// Net similarity of an exemplar set: preferences of the exemplars plus each
/// other point's similarity to its assigned exemplar.
pub fn net_similarity(s: ArrayView2<'_, f64>, exemplars: &[usize]) -> f64 {
    let labels = assign_to_exemplars(s, exemplars);
    labels.iter().enumerate().map(|(i, &e)| s[[i, e]]).sum()
}

/// Groups of interchangeable points: equal similarities to and from every
/// other point, and mutual similarity above `pref`. Each group is listed
/// by ascending index.
fn duplicate_groups(s: ArrayView2<'_, f64>, pref: f64) -> Vec<Vec<usize>> {
    let n = s.nrows();
    let tol = 1e-12 * s.iter().fold(1.0f64, |a, v| a.max(v.abs()));
    let same = |i: usize, j: usize| {
        s[[i, j]] > pref
            && s[[j, i]] > pref
            && (0..n).filter(|&k| k != i && k != j).all(|k| {
                (s[[i, k]] - s[[j, k]]).abs() <= tol && (s[[k, i]] - s[[k, j]]).abs() <= tol
            })
    };
    let mut groups: Vec<Vec<usize>> = Vec::new();
    for i in 0..n {
        match groups.iter_mut().find(|g| same(g[0], i)) {
            Some(g) => g.push(i),
            None => groups.push(vec![i]),
        }
    }
    groups
}

/// Affinity propagation over a similarity matrix whose diagonal is replaced
/// by the preference.
///
/// Interchangeable points are merged into one weighted point first, which
/// leaves the net similarity of every configuration that keeps them together
/// unchanged. A tiny deterministic offset, decreasing in column index, breaks
/// remaining ties toward lower indices. Without convergence every point
/// becomes its own exemplar.
pub fn affinity_propagation(sim: ArrayView2<'_, f64>, cfg: &ApConfig) -> Result<ApResult> {
    let n = sim.nrows();
    if n == 0 || sim.ncols() != n {
        return invalid("similarity matrix must be square and nonempty");
    }
    if !(0.5..1.0).contains(&cfg.damping) {
        return invalid(format!("damping must lie in [0.5, 1), got {}", cfg.damping));
    }
    if sim.iter().any(|v| !v.is_finite()) {
        return invalid("similarities must be finite");
    }
    let singletons = |iterations, converged| ApResult {
        exemplars: (0..n).collect(),
        labels: (0..n).collect(),
        iterations,
        converged,
    };
    if n == 1 {
        return Ok(singletons(0, true));
    }

    let pref = cfg.preference.unwrap_or_else(|| median_off_diagonal(sim));
    let off = sim[[0, 1]];
    let all_tied = (0..n).all(|i| (0..n).all(|k| i == k || sim[[i, k]] == off));
    if all_tied {
        // every configuration ties on net similarity unless the preference decides
        if pref >= off {
            return Ok(singletons(0, true));
        }
        return Ok(ApResult {
            exemplars: vec![0],
            labels: vec![0; n],
            iterations: 0,
            converged: true,
        });
    }
    let groups = duplicate_groups(sim, pref);
    let g = groups.len();
    let mut s = Array2::<f64>::zeros((g, g));
    for (a, ga) in groups.iter().enumerate() {
        for (b, gb) in groups.iter().enumerate() {
            s[[a, b]] = if a == b {
                pref + ga[1..].iter().map(|&j| sim[[j, ga[0]]]).sum::<f64>()
            } else {
                ga.iter().map(|&i| sim[[i, gb[0]]]).sum()
            };
        }
    }
    if g == 1 {
        return Ok(ApResult {
            exemplars: vec![0],
            labels: vec![0; n],
            iterations: 0,
            converged: true,
        });
    }

    let Some((ex, iterations)) = ap_messages(s, cfg) else {
        log::warn!(
            "affinity propagation did not converge in {} sweeps, using singleton clusters",
            cfg.max_iter
        );
        return Ok(singletons(cfg.max_iter, false));
    };
    let mut labels = vec![0; n];
    for (gi, e) in ex.iter().enumerate() {
        for &i in &groups[gi] {
            labels[i] = groups[*e][0];
        }
    }
    let mut exemplars: Vec<usize> = ex
        .iter()
        .enumerate()
        .filter(|(gi, e)| gi == *e)
        .map(|(gi, _)| groups[gi][0])
        .collect();
    exemplars.sort_unstable();
    Ok(ApResult {
        exemplars,
        labels,
        iterations,
        converged: true,
    })
}

/// Message passing on a similarity matrix with preferences on the diagonal.
/// Returns each point's exemplar and the sweep count, or `None` without
/// convergence.
fn ap_messages(mut s: Array2<f64>, cfg: &ApConfig) -> Option<(Vec<usize>, usize)> {
    let n = s.nrows();
    let scale = s.iter().fold(0.0f64, |a, v| a.max(v.abs())).max(1.0);
    let delta = cfg.tie_break * scale;
    for ((_, k), v) in s.indexed_iter_mut() {
        *v -= delta * k as f64 / n as f64;
    }

    let lam = cfg.damping;
    let mut r = Array2::<f64>::zeros((n, n));
    let mut a = Array2::<f64>::zeros((n, n));
    let mut last: Vec<usize> = Vec::new();
    let mut stable = 0;
    for it in 1..=cfg.max_iter {
        for i in 0..n {
            let (mut first, mut first_k, mut second) =
                (f64::NEG_INFINITY, 0, f64::NEG_INFINITY);
            for k in 0..n {
                let v = a[[i, k]] + s[[i, k]];
                if v > first {
                    second = first;
                    first = v;
                    first_k = k;
                } else if v > second {
                    second = v;
                }
            }
            for k in 0..n {
                let other = if k == first_k { second } else { first };
                r[[i, k]] = lam * r[[i, k]] + (1.0 - lam) * (s[[i, k]] - other);
            }
        }
        for k in 0..n {
            let pos: f64 = (0..n)
                .filter(|&i| i != k)
                .map(|i| r[[i, k]].max(0.0))
                .sum();
            for i in 0..n {
                let new = if i == k {
                    pos
                } else {
                    (r[[k, k]] + pos - r[[i, k]].max(0.0)).min(0.0)
                };
                a[[i, k]] = lam * a[[i, k]] + (1.0 - lam) * new;
            }
        }
        let ex: Vec<usize> = (0..n).filter(|&k| a[[k, k]] + r[[k, k]] > 0.0).collect();
        if ex == last && !ex.is_empty() {
            stable += 1;
        } else {
            stable = 1;
            last = ex;
        }
        if stable >= cfg.convergence_iter && !last.is_empty() {
            return Some((assign_to_exemplars(s.view(), &last), it));
        }
    }
    None
}

/// Cluster-weighted average: mean over clusters of within-cluster column means.
pub fn icwa_scores(x: ArrayView2<'_, f64>, cfg: &ApConfig) -> Result<(Vec<f64>, ApResult)> {
    let n = x.ncols();
    let mut sim = Array2::eye(n);
    for a in 0..n {
        for b in a + 1..n {
            let r = pearson(x.column(a), x.column(b));
            sim[[a, b]] = r;
            sim[[b, a]] = r;
        }
    }
    let ap = affinity_propagation(sim.view(), cfg)?;
    let clusters = ap.clusters();
    let mut acc = Array1::zeros(x.nrows());
    for c in &clusters {
        acc += &mean_of_columns(x, c);
    }
    Ok(((acc / clusters.len() as f64).to_vec(), ap))
}

fn normalized(m: &ScoreMatrix) -> Result<Array2<f64>> {
    Ok(normalize_columns(m, DEFAULT_EPSILON)?.into_values())
}

pub fn average(m: &ScoreMatrix) -> Result<EnsembleResult> {
    let x = normalized(m)?;
    Ok(EnsembleResult::new(Method::Average.name(), row_mean(x.view())))
}

pub fn maximum(m: &ScoreMatrix) -> Result<EnsembleResult> {
    let x = normalized(m)?;
    Ok(EnsembleResult::new(Method::Max.name(), row_max(x.view())))
}

pub fn thresh(m: &ScoreMatrix) -> Result<EnsembleResult> {
    let x = normalized(m)?;
    Ok(EnsembleResult::new(Method::Thresh.name(), thresh_sum(x.view())))
}

pub fn greedy(m: &ScoreMatrix, cfg: &GreedyConfig) -> Result<EnsembleResult> {
    cfg.checked(m.n_obs())?;
    let x = normalized(m)?;
    let scores = greedy_scores(x.view(), cfg.kappa);
    let sel = greedy_select(x.view(), cfg.kappa).unwrap_or_default();
    let names: Vec<&str> = sel
        .iter()
        .map(|&j| m.detector_names()[j].as_str())
        .collect();
    Ok(EnsembleResult::new(Method::Greedy.name(), scores)
        .with_param("kappa", cfg.kappa)
        .with_param("selected", names.join(";")))
}

pub fn greedy_avg(m: &ScoreMatrix, cfg: &GreedyConfig) -> Result<EnsembleResult> {
    let range = cfg.checked(m.n_obs())?;
    let x = normalized(m)?;
    let mut acc = Array1::<f64>::zeros(m.n_obs());
    let count = range.clone().count();
    for k in range.clone() {
        acc += &Array1::from(greedy_scores(x.view(), k));
    }
    Ok(
        EnsembleResult::new(Method::GreedyAvg.name(), (acc / count as f64).to_vec())
            .with_param("kappa_range", format!("{}..={}", range.start(), range.end())),
    )
}

pub fn icwa(m: &ScoreMatrix) -> Result<EnsembleResult> {
    icwa_with(m, &ApConfig::default())
}

pub fn icwa_with(m: &ScoreMatrix, cfg: &ApConfig) -> Result<EnsembleResult> {
    let x = normalized(m)?;
    let (scores, ap) = icwa_scores(x.view(), cfg)?;
    Ok(EnsembleResult::new(Method::Icwa.name(), scores)
        .with_param("clusters", ap.exemplars.len())
        .with_param("converged", ap.converged))
}

/// Runs one method.
pub fn run_method(
    method: Method,
    m: &ScoreMatrix,
    greedy_cfg: &GreedyConfig,
    irt_cfg: &FitConfig,
    epsilon: f64,
) -> Result<EnsembleResult> {
    match method {
        Method::Irt => irt_ensemble(m, epsilon, irt_cfg),
        Method::Average => average(m),
        Method::Greedy => greedy(m, greedy_cfg),
        Method::GreedyAvg => greedy_avg(m, greedy_cfg),
        Method::Icwa => icwa(m),
        Method::Max => maximum(m),
        Method::Thresh => thresh(m),
    }
}

/// All seven ensembles in [`Method::ALL`] order, evaluated in parallel.
pub fn run_all_combiners(
    m: &ScoreMatrix,
    greedy_cfg: &GreedyConfig,
    irt_cfg: &FitConfig,
) -> Result<Vec<EnsembleResult>> {
    run_all_combiners_eps(m, greedy_cfg, irt_cfg, DEFAULT_EPSILON)
}

pub fn run_all_combiners_eps(
    m: &ScoreMatrix,
    greedy_cfg: &GreedyConfig,
    irt_cfg: &FitConfig,
    epsilon: f64,
) -> Result<Vec<EnsembleResult>> {
    Method::ALL
        .par_iter()
        .map(|&meth| run_method(meth, m, greedy_cfg, irt_cfg, epsilon))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn matrix(x: Array2<f64>) -> ScoreMatrix {
        let names = (0..x.ncols()).map(|j| format!("d{j}")).collect();
        ScoreMatrix::new(x, names).unwrap()
    }

    #[test]
    fn elementwise_examples() {
        let x = array![[0.2, 0.4], [0.6, 0.8]];
        assert_eq!(row_mean(x.view()), vec![0.30000000000000004, 0.7]);
        assert_eq!(row_max(array![[0.2, 0.9, 0.1]].view()), vec![0.9]);
        let t = thresh_sum(array![[0.1], [0.9]].view());
        assert_eq!(t, vec![0.0, 0.9]);
        let flat = thresh_sum(array![[0.3, 0.1], [0.3, 0.9]].view());
        assert_eq!(flat, vec![0.0, 0.9]);
    }

    #[test]
    fn identical_columns_reproduce_the_column() {
        let col = [1.0, 4.0, 2.0, 8.0, 3.0];
        let m = matrix(Array2::from_shape_fn((5, 3), |(i, _)| col[i]));
        let norm = normalize_columns(&m, DEFAULT_EPSILON).unwrap().into_values();
        let c = norm.column(0).to_vec();
        for r in [average(&m), maximum(&m), greedy(&m, &GreedyConfig::new(1, 1..=3).unwrap())] {
            let r = r.unwrap();
            for (a, b) in r.scores.iter().zip(&c) {
                assert!((a - b).abs() < 1e-12);
            }
        }
        let ic = icwa(&m).unwrap();
        for (a, b) in ic.scores.iter().zip(&c) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn greedy_picks_the_matching_detector() {
        let n = 40;
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let target: Vec<f64> = (0..n).map(|i| if i < 4 { 1.0 } else { 0.0 }).collect();
        let x = Array2::from_shape_fn((n, 4), |(i, j)| {
            if j == 2 {
                target[i]
            } else {
                rng.random_range(0.0..1.0)
            }
        });
        let sel = greedy_select(x.view(), 4).unwrap();
        assert_eq!(sel, vec![2]);
    }

    #[test]
    fn greedy_tied_rows_fall_back_to_average() {
        let x = array![[0.2, 0.8], [0.8, 0.2], [0.5, 0.5]];
        assert!(greedy_select(x.view(), 1).is_none());
        assert_eq!(greedy_scores(x.view(), 1), row_mean(x.view()));
    }

    #[test]
    fn greedy_rejects_large_kappa() {
        let m = matrix(array![[0.0, 1.0], [1.0, 0.0], [2.0, 2.0]]);
        assert!(greedy(&m, &GreedyConfig::new(3, 1..=2).unwrap()).is_err());
        assert!(GreedyConfig::new(0, 1..=2).is_err());
        assert!(GreedyConfig::new(1, RangeInclusive::new(3, 2)).is_err());
    }

    fn naive_corr(a: &[f64], b: &[f64]) -> f64 {
        let n = a.len() as f64;
        let ma = a.iter().sum::<f64>() / n;
        let mb = b.iter().sum::<f64>() / n;
        let cov: f64 = a.iter().zip(b).map(|(x, y)| (x - ma) * (y - mb)).sum();
        let va: f64 = a.iter().map(|x| (x - ma).powi(2)).sum();
        let vb: f64 = b.iter().map(|y| (y - mb).powi(2)).sum();
        if va == 0.0 || vb == 0.0 {
            0.0
        } else {
            cov / (va.sqrt() * vb.sqrt())
        }
    }

    /// Correlation of every subset mean with the target, indexed by bitmask.
    fn subset_table(x: &Array2<f64>, t: &[f64]) -> Vec<f64> {
        let (n_obs, n) = x.dim();
        (0..1usize << n)
            .map(|mask| {
                let cols: Vec<usize> = (0..n).filter(|j| mask >> j & 1 == 1).collect();
                if cols.is_empty() {
                    return f64::NAN;
                }
                let m: Vec<f64> = (0..n_obs)
                    .map(|i| cols.iter().map(|&j| x[[i, j]]).sum::<f64>() / cols.len() as f64)
                    .collect();
                naive_corr(&m, t)
            })
            .collect()
    }

    #[test]
    fn greedy_matches_exhaustive_subset_replay() {
        for seed in 0..40 {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let n = 2 + (seed as usize % 4);
            let base: Vec<f64> = (0..30).map(|_| rng.random_range(0.0..1.0)).collect();
            let x = Array2::from_shape_fn((30, n), |(i, j)| {
                base[i] * (j as f64 * 0.2) + rng.random_range(0.0..1.0)
            });
            let kappa = 1 + seed as usize % 5;
            let t = pseudo_target(x.view(), kappa).unwrap();
            let table = subset_table(&x, t.as_slice().unwrap());
            let order = scan_order(x.view(), &t);
            // replay the scan on the brute-force table
            let mut mask = 1usize << order[0];
            for &c in &order[1..] {
                let cand = mask | 1 << c;
                if table[cand] >= table[mask] {
                    mask = cand;
                }
            }
            let sel = greedy_select(x.view(), kappa).unwrap();
            let got: usize = sel.iter().map(|&j| 1usize << j).sum();
            assert_eq!(got, mask, "seed {seed}");
        }
    }

    #[test]
    fn greedy_avg_singleton_range() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let m = matrix(Array2::from_shape_fn((25, 4), |_| rng.random_range(0.0..1.0)));
        let cfg = GreedyConfig::new(3, 3..=3).unwrap();
        assert_eq!(greedy_avg(&m, &cfg).unwrap().scores, greedy(&m, &cfg).unwrap().scores);
    }

    #[test]
    fn greedy_avg_is_mean_of_greedy() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let m = matrix(Array2::from_shape_fn((25, 5), |_| rng.random_range(0.0..1.0)));
        let cfg = GreedyConfig::new(2, 1..=4).unwrap();
        let avg = greedy_avg(&m, &cfg).unwrap().scores;
        let runs: Vec<Vec<f64>> = (1..=4)
            .map(|k| greedy(&m, &GreedyConfig::new(k, 1..=4).unwrap()).unwrap().scores)
            .collect();
        for i in 0..25 {
            let o = runs.iter().map(|r| r[i]).sum::<f64>() / 4.0;
            assert!((avg[i] - o).abs() < 1e-12);
        }
    }

    #[test]
    fn ap_duplicate_pairs_form_two_clusters() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let a: Vec<f64> = (0..12).map(|_| rng.random_range(0.0..1.0)).collect();
        let b: Vec<f64> = (0..12).map(|_| rng.random_range(0.0..1.0)).collect();
        let x = Array2::from_shape_fn((12, 4), |(i, j)| match j {
            0 => a[i],
            1 => 2.0 * a[i] + 1.0,
            2 => b[i],
            _ => b[i] - 3.0,
        });
        let (scores, ap) = icwa_scores(x.view(), &ApConfig::default()).unwrap();
        assert!(ap.converged);
        assert_eq!(ap.clusters(), vec![vec![0, 1], vec![2, 3]]);
        for i in 0..12 {
            let expect = 0.5 * (0.5 * (x[[i, 0]] + x[[i, 1]]) + 0.5 * (x[[i, 2]] + x[[i, 3]]));
            assert!((scores[i] - expect).abs() < 1e-12);
        }
    }

    #[test]
    fn ap_uncorrelated_gives_singletons() {
        // mutually orthogonal centered columns
        let x = array![
            [1.0, 1.0, 1.0],
            [1.0, -1.0, -1.0],
            [-1.0, 1.0, -1.0],
            [-1.0, -1.0, 1.0]
        ];
        let (scores, ap) = icwa_scores(x.view(), &ApConfig::default()).unwrap();
        assert_eq!(ap.exemplars.len(), 3);
        assert_eq!(scores, row_mean(x.view()));
    }

    /// Canonical partition: every point labelled by the lowest index in its cluster.
    fn partition(labels: &[usize]) -> Vec<usize> {
        labels
            .iter()
            .map(|&l| (0..labels.len()).find(|&j| labels[j] == l).unwrap())
            .collect()
    }

    /// Exhaustive search over exemplar sets. Returns the partition with the
    /// highest net similarity and its lead over the best different partition.
    pub(crate) fn brute_partition(s: ArrayView2<'_, f64>) -> (Vec<usize>, f64) {
        let n = s.nrows();
        let mut best: Vec<(f64, Vec<usize>)> = Vec::new();
        for mask in 1usize..1 << n {
            let ex: Vec<usize> = (0..n).filter(|j| mask >> j & 1 == 1).collect();
            let v = net_similarity(s, &ex);
            let p = partition(&assign_to_exemplars(s, &ex));
            match best.iter_mut().find(|b| b.1 == p) {
                Some(b) => b.0 = b.0.max(v),
                None => best.push((v, p)),
            }
        }
        best.sort_by(|a, b| b.0.total_cmp(&a.0));
        let margin = best.get(1).map_or(f64::INFINITY, |b| best[0].0 - b.0);
        (best.swap_remove(0).1, margin)
    }

    /// Detector columns drawn as noisy copies of a few latent signals.
    pub(crate) fn clustered_similarity(seed: u64, n: usize) -> Array2<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let n_latent = rng.random_range(1..=3.min(n));
        let latent: Vec<Vec<f64>> = (0..n_latent)
            .map(|_| (0..12).map(|_| rng.random_range(-1.0..1.0)).collect())
            .collect();
        let x = Array2::from_shape_fn((12, n), |(i, j)| {
            latent[j % n_latent][i] + 0.3 * rng.random_range(-1.0..1.0)
        });
        let mut s = Array2::eye(n);
        for a in 0..n {
            for b in 0..n {
                if a != b {
                    s[[a, b]] = pearson(x.column(a), x.column(b));
                }
            }
        }
        s
    }

    #[test]
    fn ap_matches_brute_force_exemplars() {
        let mut checked = 0;
        for seed in 0..200 {
            let n = 3 + seed as usize % 4;
            let sim = clustered_similarity(seed, n);
            let mut s = sim.clone();
            let pref = median_off_diagonal(sim.view());
            for i in 0..n {
                s[[i, i]] = pref;
            }
            let (best, margin) = brute_partition(s.view());
            // near-ties between partitions have no well-defined answer
            if margin < 0.05 {
                continue;
            }
            checked += 1;
            let ap = affinity_propagation(sim.view(), &ApConfig::default()).unwrap();
            assert!(ap.converged, "seed {seed}");
            assert_eq!(partition(&ap.labels), best, "seed {seed}");
            let net = net_similarity(s.view(), &ap.exemplars);
            assert!(net >= net_similarity(s.view(), &(0..n).collect::<Vec<_>>()) - 1e-12);
        }
        assert!(checked > 80);
    }

    #[test]
    fn roster_order_and_lengths() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let m = matrix(Array2::from_shape_fn((30, 5), |_| rng.random_range(0.0..1.0)));
        let g = GreedyConfig::new(3, 1..=10).unwrap();
        let f = FitConfig::default();
        let all = run_all_combiners(&m, &g, &f).unwrap();
        let names: Vec<&str> = all.iter().map(|r| r.method.as_str()).collect();
        assert_eq!(names, ["IRT", "Average", "Greedy", "Greedy-Avg", "ICWA", "Max", "Thresh"]);
        assert!(all.iter().all(|r| r.scores.len() == 30));
        for (r, meth) in all.iter().zip(Method::ALL) {
            assert_eq!(r.scores, run_method(meth, &m, &g, &f, DEFAULT_EPSILON).unwrap().scores);
        }
    }

    #[test]
    fn method_parsing() {
        assert_eq!("greedy-avg".parse::<Method>().unwrap(), Method::GreedyAvg);
        assert_eq!("IRT".parse::<Method>().unwrap(), Method::Irt);
        assert!("median".parse::<Method>().is_err());
    }

    proptest! {
        #[test]
        fn elementwise_oracles(seed in 0u64..1000, n_obs in 2usize..20, n_det in 1usize..8) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let x = Array2::from_shape_fn((n_obs, n_det), |_| rng.random_range(0.0..1.0));
            let avg = row_mean(x.view());
            let mx = row_max(x.view());
            let th = thresh_sum(x.view());
            for i in 0..n_obs {
                let mut s = 0.0;
                let mut m = f64::NEG_INFINITY;
                let mut t = 0.0;
                for j in 0..n_det {
                    s += x[[i, j]];
                    m = m.max(x[[i, j]]);
                    let cm = (0..n_obs).map(|r| x[[r, j]]).sum::<f64>() / n_obs as f64;
                    if x[[i, j]] > cm {
                        t += x[[i, j]];
                    }
                }
                prop_assert!((avg[i] - s / n_det as f64).abs() < 1e-12);
                prop_assert_eq!(mx[i], m);
                prop_assert!((th[i] - t).abs() < 1e-12);
            }
        }

        #[test]
        fn affine_maps_keep_rankings(seed in 0u64..200, a in 0.1f64..10.0, b in -5.0f64..5.0) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let x = Array2::from_shape_fn((20, 4), |_| rng.random_range(0.0..1.0));
            let m1 = matrix(x.clone());
            let m2 = matrix(x.mapv(|v| a * v + b));
            let g = GreedyConfig::new(3, 1..=5).unwrap();
            for meth in [Method::Average, Method::Max, Method::Thresh, Method::Greedy, Method::GreedyAvg, Method::Icwa] {
                let r1 = run_method(meth, &m1, &g, &FitConfig::default(), DEFAULT_EPSILON).unwrap();
                let r2 = run_method(meth, &m2, &g, &FitConfig::default(), DEFAULT_EPSILON).unwrap();
                for (u, v) in r1.scores.iter().zip(&r2.scores) {
                    prop_assert!((u - v).abs() < 1e-9);
                }
            }
        }

        #[test]
        fn permutation_equivariance(seed in 0u64..200) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let x = Array2::from_shape_fn((15, 5), |_| rng.random_range(0.0..1.0));
            let obs_perm: Vec<usize> = (0..15).rev().collect();
            let det_perm = [3, 0, 4, 1, 2];
            let y = Array2::from_shape_fn((15, 5), |(i, j)| x[[obs_perm[i], det_perm[j]]]);
            for f in [row_mean, row_max, thresh_sum] {
                let fx = f(x.view());
                let fy = f(y.view());
                for i in 0..15 {
                    prop_assert!((fy[i] - fx[obs_perm[i]]).abs() < 1e-12);
                }
            }
        }
    }
}
