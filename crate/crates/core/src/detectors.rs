//! Nearest-neighbor anomaly scorers. Every scorer returns one finite value per
//! point, larger meaning more anomalous.
//!
//! Ratios of two zero quantities (duplicated points) are defined as 1; a
//! positive value over zero is replaced by the largest finite score in the
//! vector so the output stays finite.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use ndarray::Array2;
use rayon::prelude::*;

use crate::error::{invalid, Error, Result};
use crate::model::{LabeledDataset, ScoreMatrix};
use crate::neighbors::NeighborIndex;

/// Neighborhood sizes shared by the detectors.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DetectorConfig {
    pub k: usize,
    pub k_min: usize,
    pub k_max: usize,
}

/// The two neighborhood-size regimes used for benchmarking.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Regime {
    /// Small fixed neighborhoods: k = k_min = 5, k_max = 10.
    T1,
    /// Neighborhoods growing with N: k = k_min = max(ceil(N/10), 50), k_max = k + 10.
    T2,
}

impl FromStr for Regime {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "t1" => Ok(Regime::T1),
            "t2" => Ok(Regime::T2),
            other => invalid(format!("unknown regime `{other}` (expected t1 or t2)")),
        }
    }
}

impl DetectorConfig {
    pub fn new(k: usize, k_min: usize, k_max: usize) -> Result<Self> {
        if k == 0 || k_min == 0 {
            return invalid("k and k_min must be at least 1");
        }
        if k_min > k_max {
            return invalid(format!("k_min = {k_min} exceeds k_max = {k_max}"));
        }
        Ok(Self { k, k_min, k_max })
    }

    pub fn t1() -> Self {
        Self {
            k: 5,
            k_min: 5,
            k_max: 10,
        }
    }

    pub fn t2(n_obs: usize) -> Self {
        let k = n_obs.div_ceil(10).max(50);
        Self {
            k,
            k_min: k,
            k_max: k + 10,
        }
    }

    pub fn for_regime(regime: Regime, n_obs: usize) -> Self {
        match regime {
            Regime::T1 => Self::t1(),
            Regime::T2 => Self::t2(n_obs),
        }
    }

    /// Shrinks every size to at most N - 1 so the config is valid for `n_obs` points.
    pub fn clamped(self, n_obs: usize) -> Result<Self> {
        if n_obs < 2 {
            return invalid(format!("need at least 2 observations, got {n_obs}"));
        }
        let cap = n_obs - 1;
        let out = Self {
            k: self.k.min(cap),
            k_min: self.k_min.min(cap),
            k_max: self.k_max.min(cap),
        };
        if out != self {
            log::warn!("detector neighborhoods clamped to N - 1 = {cap}");
        }
        Ok(out)
    }

    /// Neighbor-list depth an index must provide for every detector.
    pub fn depth(&self) -> usize {
        self.k.max(self.k_max)
    }
}

/// The seven scorers, in output column order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Detector {
    KnnAgg,
    Lof,
    Cof,
    Inflo,
    Kdeos,
    Ldf,
    Ldof,
}

impl Detector {
    pub const ALL: [Detector; 7] = [
        Detector::KnnAgg,
        Detector::Lof,
        Detector::Cof,
        Detector::Inflo,
        Detector::Kdeos,
        Detector::Ldf,
        Detector::Ldof,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Detector::KnnAgg => "KNN-AGG",
            Detector::Lof => "LOF",
            Detector::Cof => "COF",
            Detector::Inflo => "INFLO",
            Detector::Kdeos => "KDEOS",
            Detector::Ldf => "LDF",
            Detector::Ldof => "LDOF",
        }
    }

    pub fn score(self, idx: &NeighborIndex<'_>, cfg: &DetectorConfig) -> Result<Vec<f64>> {
        match self {
            Detector::KnnAgg => knn_agg(idx, cfg.k_min, cfg.k_max),
            Detector::Lof => lof(idx, cfg.k),
            Detector::Cof => cof(idx, cfg.k),
            Detector::Inflo => inflo(idx, cfg.k),
            Detector::Kdeos => kdeos(idx, cfg.k_min, cfg.k_max),
            Detector::Ldf => ldf(idx, cfg.k, LDF_H, LDF_C),
            Detector::Ldof => ldof(idx, cfg.k),
        }
    }
}

impl fmt::Display for Detector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Default LDF bandwidth multiplier.
pub const LDF_H: f64 = 1.0;
/// Default LDF comparison constant.
pub const LDF_C: f64 = 0.1;

fn check_k(idx: &NeighborIndex<'_>, k: usize) -> Result<()> {
    if k == 0 || k > idx.k_max() {
        return invalid(format!(
            "neighborhood size {k} outside 1..={} supported by the index",
            idx.k_max()
        ));
    }
    Ok(())
}

fn check_range(idx: &NeighborIndex<'_>, k_min: usize, k_max: usize) -> Result<()> {
    check_k(idx, k_min)?;
    check_k(idx, k_max)?;
    if k_min > k_max {
        return invalid(format!("k_min = {k_min} exceeds k_max = {k_max}"));
    }
    Ok(())
}

fn safe_ratio(num: f64, den: f64) -> f64 {
    if den == 0.0 {
        if num == 0.0 {
            1.0
        } else {
            f64::INFINITY
        }
    } else {
        num / den
    }
}

fn cap_infinite(mut scores: Vec<f64>) -> Vec<f64> {
    let cap = scores
        .iter()
        .copied()
        .filter(|v| v.is_finite())
        .fold(f64::NAN, f64::max);
    let cap = if cap.is_nan() { 1.0 } else { cap };
    for v in &mut scores {
        if !v.is_finite() {
            *v = cap;
        }
    }
    scores
}

fn mean(v: impl ExactSizeIterator<Item = f64>) -> f64 {
    let n = v.len() as f64;
    v.sum::<f64>() / n
}

/// Sum of the k-th neighbor distances for k in `k_min..=k_max`.
pub fn knn_agg(idx: &NeighborIndex<'_>, k_min: usize, k_max: usize) -> Result<Vec<f64>> {
    check_range(idx, k_min, k_max)?;
    Ok((0..idx.len())
        .map(|i| idx.neighbor_dists(i, k_max)[k_min - 1..].iter().sum())
        .collect())
}

/// Local outlier factor with MinPts = `k`.
pub fn lof(idx: &NeighborIndex<'_>, k: usize) -> Result<Vec<f64>> {
    check_k(idx, k)?;
    // mean reachability distance is 1 / lrd
    let mean_reach: Vec<f64> = (0..idx.len())
        .map(|p| {
            let nb = idx.neighbors(p, k);
            let d = idx.neighbor_dists(p, k);
            mean(nb.iter().zip(d).map(|(&o, &dpo)| dpo.max(idx.kdist(o, k))))
        })
        .collect();
    let scores = (0..idx.len())
        .map(|p| {
            // lrd(o) / lrd(p) = reach(p) / reach(o)
            let nb = idx.neighbors(p, k);
            mean(nb.iter().map(|&o| safe_ratio(mean_reach[p], mean_reach[o])))
        })
        .collect();
    Ok(cap_infinite(scores))
}

/// Average chaining distance of `p` along the set-based nearest path through
/// its `k` nearest neighbors.
fn average_chaining_distance(idx: &NeighborIndex<'_>, p: usize, k: usize) -> f64 {
    let nb = idx.neighbors(p, k);
    let mut to_path: Vec<f64> = idx.neighbor_dists(p, k).to_vec();
    let mut used = vec![false; k];
    let weight = 2.0 / (k * (k + 1)) as f64;
    let mut total = 0.0;
    for step in 1..=k {
        let (next, cost) = (0..k)
            .filter(|&c| !used[c])
            .map(|c| (c, to_path[c]))
            .min_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)))
            .expect("unused neighbor remains");
        used[next] = true;
        total += weight * (k + 1 - step) as f64 * cost;
        for c in 0..k {
            if !used[c] {
                to_path[c] = to_path[c].min(idx.distance(nb[next], nb[c]));
            }
        }
    }
    total
}

/// Connectivity-based outlier factor.
pub fn cof(idx: &NeighborIndex<'_>, k: usize) -> Result<Vec<f64>> {
    check_k(idx, k)?;
    let ac: Vec<f64> = (0..idx.len())
        .into_par_iter()
        .map(|p| average_chaining_distance(idx, p, k))
        .collect();
    let scores = (0..idx.len())
        .map(|p| {
            let nb = idx.neighbors(p, k);
            let nb_mean = mean(nb.iter().map(|&o| ac[o]));
            safe_ratio(ac[p], nb_mean)
        })
        .collect();
    Ok(cap_infinite(scores))
}

/// Influenced outlierness over the union of k-nearest and reverse k-nearest
/// neighbors. Density is 1 / k-distance.
pub fn inflo(idx: &NeighborIndex<'_>, k: usize) -> Result<Vec<f64>> {
    check_k(idx, k)?;
    let rev = idx.reverse_neighbors(k);
    let scores = (0..idx.len())
        .map(|p| {
            let mut space: Vec<usize> = idx.neighbors(p, k).to_vec();
            space.extend(rev[p].iter().copied());
            space.sort_unstable();
            space.dedup();
            // den(o) / den(p) = kdist(p) / kdist(o)
            let kp = idx.kdist(p, k);
            mean(space.iter().map(|&o| safe_ratio(kp, idx.kdist(o, k))))
        })
        .collect();
    Ok(cap_infinite(scores))
}

/// Reference length used to keep `h^-dim` kernel normalizers representable.
/// Returns `None` when every k-distance is zero.
fn kernel_scale(idx: &NeighborIndex<'_>, k: usize) -> Option<f64> {
    let s = mean((0..idx.len()).map(|i| idx.kdist(i, k)));
    (s > 0.0).then_some(s)
}

/// Gaussian kernel in `dim` dimensions with bandwidth `h` measured in units of
/// `scale`. The constant factor is common to all points and cancels in every
/// ratio the detectors form.
fn gaussian_kernel(dist: f64, h: f64, scale: f64, dim: usize) -> f64 {
    let h = h.max(1e-9 * scale);
    let norm = (2.0 * PI).powf(-(dim as f64) / 2.0) * (h / scale).powi(-(dim as i32));
    norm * (-(dist * dist) / (2.0 * h * h)).exp()
}

/// Kernel density outlier score.
///
/// For each k in the range, the density at `p` is the mean Gaussian kernel
/// contribution of its k neighbors, each with bandwidth equal to that
/// neighbor's k-distance. Densities are averaged over the range and the score
/// is how many neighborhood standard deviations `p` falls below the mean
/// density of its `k_max` neighbors.
pub fn kdeos(idx: &NeighborIndex<'_>, k_min: usize, k_max: usize) -> Result<Vec<f64>> {
    check_range(idx, k_min, k_max)?;
    let Some(scale) = kernel_scale(idx, k_max) else {
        return Ok(vec![0.0; idx.len()]);
    };
    let dim = idx.dim();
    let range = (k_max - k_min + 1) as f64;
    let density: Vec<f64> = (0..idx.len())
        .map(|p| {
            let nb = idx.neighbors(p, k_max);
            let d = idx.neighbor_dists(p, k_max);
            (k_min..=k_max)
                .map(|k| {
                    let s: f64 = (0..k)
                        .map(|c| gaussian_kernel(d[c], idx.kdist(nb[c], k), scale, dim))
                        .sum();
                    s / k as f64
                })
                .sum::<f64>()
                / range
        })
        .collect();
    Ok((0..idx.len())
        .map(|p| {
            let nb = idx.neighbors(p, k_max);
            let m = mean(nb.iter().map(|&o| density[o]));
            let var = mean(nb.iter().map(|&o| (density[o] - m).powi(2)));
            let sd = var.sqrt();
            // spread at rounding level means the neighborhood is homogeneous
            if sd > 1e-10 * m.abs() {
                (m - density[p]) / sd
            } else {
                0.0
            }
        })
        .collect())
}

/// Local density factor: a kernel-density analogue of LOF with reachability
/// smoothed bandwidths. Bounded above by `1 / c`.
pub fn ldf(idx: &NeighborIndex<'_>, k: usize, h: f64, c: f64) -> Result<Vec<f64>> {
    check_k(idx, k)?;
    if !(h > 0.0) || !(c > 0.0) {
        return invalid(format!("LDF needs h > 0 and c > 0, got h = {h}, c = {c}"));
    }
    let Some(scale) = kernel_scale(idx, k) else {
        return Ok(vec![1.0 / (1.0 + c); idx.len()]);
    };
    let dim = idx.dim();
    let lde: Vec<f64> = (0..idx.len())
        .map(|p| {
            let nb = idx.neighbors(p, k);
            let d = idx.neighbor_dists(p, k);
            mean(nb.iter().zip(d).map(|(&o, &dpo)| {
                let ko = idx.kdist(o, k);
                gaussian_kernel(dpo.max(ko), h * ko, scale, dim)
            }))
        })
        .collect();
    let scores = (0..idx.len())
        .map(|p| {
            let nb_mean = mean(idx.neighbors(p, k).iter().map(|&o| lde[o]));
            safe_ratio(nb_mean, lde[p] + c * nb_mean)
        })
        .collect();
    Ok(cap_infinite(scores))
}

/// Local distance-based outlier factor: mean distance to the k neighbors over
/// the mean pairwise distance among them. Needs `k >= 2`.
pub fn ldof(idx: &NeighborIndex<'_>, k: usize) -> Result<Vec<f64>> {
    check_k(idx, k)?;
    if k < 2 {
        return invalid("LDOF needs k >= 2");
    }
    let scores = (0..idx.len())
        .map(|p| {
            let nb = idx.neighbors(p, k);
            let to_p = mean(idx.neighbor_dists(p, k).iter().copied());
            let mut inner = 0.0;
            for a in 0..k {
                for b in a + 1..k {
                    inner += idx.distance(nb[a], nb[b]);
                }
            }
            let inner = inner / (k * (k - 1) / 2) as f64;
            safe_ratio(to_p, inner)
        })
        .collect();
    Ok(cap_infinite(scores))
}

/// Runs all seven detectors and assembles their scores column-wise in
/// [`Detector::ALL`] order.
///
/// A detector that fails contributes a zero column and a warning.
pub fn run_all(ds: &LabeledDataset, cfg: &DetectorConfig) -> Result<ScoreMatrix> {
    let cfg = cfg.clamped(ds.n_obs())?;
    let idx = NeighborIndex::build(ds.features(), cfg.depth())?;
    run_all_indexed(&idx, &cfg)
}

pub fn run_all_indexed(idx: &NeighborIndex<'_>, cfg: &DetectorConfig) -> Result<ScoreMatrix> {
    let columns: Vec<Vec<f64>> = Detector::ALL
        .par_iter()
        .map(|det| match det.score(idx, cfg) {
            Ok(v) if v.iter().all(|x| x.is_finite()) => v,
            Ok(_) => {
                log::warn!("{det} produced non-finite scores; using a zero column");
                vec![0.0; idx.len()]
            }
            Err(e) => {
                log::warn!("{det} failed ({e}); using a zero column");
                vec![0.0; idx.len()]
            }
        })
        .collect();
    let mut scores = Array2::zeros((idx.len(), columns.len()));
    for (j, col) in columns.iter().enumerate() {
        for (i, v) in col.iter().enumerate() {
            scores[[i, j]] = *v;
        }
    }
    ScoreMatrix::new(
        scores,
        Detector::ALL.iter().map(|d| d.name().to_string()).collect(),
    )
}
