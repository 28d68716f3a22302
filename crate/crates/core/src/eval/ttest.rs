//! One-sided Student t-tests and the equal-performance false-positive
//! calibration.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;

use super::special::student_t_sf;
use super::{mean, sample_sd};
use crate::error::{invalid, Error, Result};

pub const SIGNIFICANCE_LEVEL: f64 = 0.05;

/// Test statistic, degrees of freedom and one-sided p-value for `H_a: μ > 0`
/// (paired) or `H_a: μ_a > μ_b` (two-sample).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TTest {
    pub t: f64,
    pub df: f64,
    pub p: f64,
}

impl TTest {
    pub fn significant(&self) -> bool {
        self.p < SIGNIFICANCE_LEVEL
    }
}

/// One-sample test of `mean(diffs) > 0`.
///
/// All-zero differences give `t = 0, p = 0.5`. Nonzero constant differences
/// have no defined statistic and are rejected.
pub fn t_test_paired_diff(diffs: &[f64]) -> Result<TTest> {
    if diffs.len() < 2 {
        return invalid(format!("need at least 2 differences, got {}", diffs.len()));
    }
    if diffs.iter().any(|d| !d.is_finite()) {
        return invalid("differences must be finite");
    }
    let n = diffs.len() as f64;
    let df = n - 1.0;
    let m = mean(diffs);
    let sd = sample_sd(diffs);
    if sd == 0.0 {
        if m == 0.0 {
            return Ok(TTest { t: 0.0, df, p: 0.5 });
        }
        return Err(Error::Degenerate(
            "constant nonzero differences have zero variance".into(),
        ));
    }
    let t = m / (sd / n.sqrt());
    Ok(TTest {
        t,
        df,
        p: student_t_sf(t, df),
    })
}

/// Pooled-variance test of `mean(a) > mean(b)`.
///
/// Samples with zero pooled variance give `t = 0, p = 0.5` when the means
/// agree and are rejected otherwise.
pub fn t_test_two_sample(a: &[f64], b: &[f64]) -> Result<TTest> {
    if a.len() < 2 || b.len() < 2 {
        return invalid("each sample needs at least 2 values");
    }
    if a.iter().chain(b).any(|v| !v.is_finite()) {
        return invalid("samples must be finite");
    }
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let df = na + nb - 2.0;
    let (ma, mb) = (mean(a), mean(b));
    let (sa, sb) = (sample_sd(a), sample_sd(b));
    let pooled = ((na - 1.0) * sa * sa + (nb - 1.0) * sb * sb) / df;
    let se = (pooled * (1.0 / na + 1.0 / nb)).sqrt();
    let diff = ma - mb;
    if se == 0.0 {
        if diff == 0.0 {
            return Ok(TTest { t: 0.0, df, p: 0.5 });
        }
        return Err(Error::Degenerate(
            "both samples constant with different means".into(),
        ));
    }
    let t = diff / se;
    Ok(TTest {
        t,
        df,
        p: student_t_sf(t, df),
    })
}

/// Mean and SD of false-positive counts across repetitions.
#[derive(Debug, Clone, PartialEq)]
pub struct FalsePositiveSummary {
    pub counts: Vec<usize>,
    pub mean: f64,
    pub sd: f64,
}

/// Count of sources whose best-vs-second test comes out significant when
/// every method's performance is drawn from the same N(0, 1).
fn false_positives_once(
    rng: &mut ChaCha8Rng,
    n_sources: usize,
    n_datasets: usize,
    n_methods: usize,
) -> usize {
    let mut count = 0;
    let mut perf = vec![vec![0.0; n_datasets]; n_methods];
    for _ in 0..n_sources {
        for row in perf.iter_mut() {
            for v in row.iter_mut() {
                *v = StandardNormal.sample(rng);
            }
        }
        if n_methods < 2 {
            continue;
        }
        let (best, second) = top_two(&perf);
        if let Ok(t) = t_test_two_sample(&perf[best], &perf[second]) {
            if t.significant() {
                count += 1;
            }
        }
    }
    count
}

/// Indices of the two highest-mean samples, ties to the lower index.
pub(crate) fn top_two(samples: &[Vec<f64>]) -> (usize, usize) {
    let means: Vec<f64> = samples.iter().map(|s| mean(s)).collect();
    let mut order: Vec<usize> = (0..samples.len()).collect();
    order.sort_by(|&a, &b| means[b].total_cmp(&means[a]).then(a.cmp(&b)));
    (order[0], order[1])
}

/// Repeats the equal-performance calibration `reps` times. Each repetition
/// owns an independent stream of one seeded generator.
pub fn false_positive_simulation(
    n_sources: usize,
    n_datasets: usize,
    n_methods: usize,
    reps: usize,
    seed: u64,
) -> Result<FalsePositiveSummary> {
    if reps == 0 || n_sources == 0 || n_methods == 0 {
        return invalid("sources, methods and repetitions must be positive");
    }
    if n_datasets < 2 {
        return invalid("need at least 2 datasets per source");
    }
    let counts: Vec<usize> = (0..reps)
        .into_par_iter()
        .map(|r| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(r as u64);
            false_positives_once(&mut rng, n_sources, n_datasets, n_methods)
        })
        .collect();
    let as_f: Vec<f64> = counts.iter().map(|&c| c as f64).collect();
    Ok(FalsePositiveSummary {
        mean: mean(&as_f),
        sd: sample_sd(&as_f),
        counts,
    })
}
