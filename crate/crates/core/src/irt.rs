//! Continuous response model fitted by EM, with the latent trait of each
//! observation used as its ensemble anomaly score.
//!
//! Item `j` (a detector) relates the logit response `z` of an observation with
//! latent trait `θ` through the density
//!
//! ```text
//! f(z | θ) = |α γ| / √(2π) · exp(-α²/2 · (θ - β - γ z)²)
//! ```
//!
//! Only the product `α γ` has to be positive, so detectors that rank
//! observations in reverse order are kept (with `α, γ < 0`) rather than
//! dropped.
//!
//! Estimation alternates a closed-form E-step under a standard normal trait
//! prior with a closed-form M-step that maximizes the expected complete-data
//! log-likelihood
//!
//! ```text
//! E = N Σ_j (ln|α_j| + ln|γ_j|) - ½ Σ_i Σ_j α_j² ((β_j + γ_j z_ij - μ_i)² + σ²)
//! ```
//!
//! under a flat prior on the item parameters.

use std::f64::consts::PI;

use ndarray::{ArrayView1, Axis};

use crate::error::{invalid, Error, Result};
use crate::model::{normalize_columns, to_logit, EnsembleResult, LogitScores, ScoreMatrix};

/// Parameters of one item (detector).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ItemParams {
    /// Discrimination.
    pub alpha: f64,
    /// Difficulty: the trait level at which the logit response is centred on 0.
    pub beta: f64,
    /// Scaling coefficient on the logit response.
    pub gamma: f64,
}

impl ItemParams {
    pub fn new(alpha: f64, beta: f64, gamma: f64) -> Result<Self> {
        let item = Self { alpha, beta, gamma };
        if !item.is_valid() {
            return invalid(format!(
                "item parameters need finite values with alpha * gamma > 0, got ({alpha}, {beta}, {gamma})"
            ));
        }
        Ok(item)
    }

    pub fn is_valid(&self) -> bool {
        self.alpha.is_finite()
            && self.beta.is_finite()
            && self.gamma.is_finite()
            && self.alpha * self.gamma > 0.0
    }

    fn max_abs_diff(&self, other: &Self) -> f64 {
        (self.alpha - other.alpha)
            .abs()
            .max((self.beta - other.beta).abs())
            .max((self.gamma - other.gamma).abs())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FitConfig {
    pub max_iter: usize,
    /// Stop once no item parameter moves by more than this between iterations.
    pub tol: f64,
    pub init_alpha: f64,
    pub init_beta: f64,
    pub init_gamma: f64,
}

impl Default for FitConfig {
    fn default() -> Self {
        Self {
            max_iter: 100,
            tol: 1e-6,
            init_alpha: 1.0,
            init_beta: 0.0,
            init_gamma: 1.0,
        }
    }
}

impl FitConfig {
    pub fn validate(&self) -> Result<()> {
        if self.max_iter == 0 {
            return invalid("max_iter must be at least 1");
        }
        if !(self.tol > 0.0) {
            return invalid(format!("tol must be positive, got {}", self.tol));
        }
        ItemParams::new(self.init_alpha, self.init_beta, self.init_gamma).map(|_| ())
    }
}

/// A fitted model: item parameters plus per-observation latent traits.
#[derive(Debug, Clone, PartialEq)]
pub struct IrtModel {
    pub items: Vec<ItemParams>,
    /// Maximum-likelihood latent trait per observation.
    pub theta: Vec<f64>,
    /// Posterior standard deviation of the trait from the last E-step.
    pub posterior_sd: f64,
    /// Marginal log-likelihood after every M-step.
    pub log_likelihood_trace: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
}

impl IrtModel {
    /// Decomposes the latent trait into per-item offsets and weights so that
    /// `θ_i = Σ_j (ζ_j + ω_j z_ij)`. Returns `(ζ, ω)`.
    pub fn trait_weights(&self) -> (Vec<f64>, Vec<f64>) {
        trait_weights(&self.items)
    }
}

/// `(ζ_j, ω_j) = (α_j² β_j, α_j² γ_j) / Σ_k α_k²`.
pub fn trait_weights(items: &[ItemParams]) -> (Vec<f64>, Vec<f64>) {
    let total: f64 = items.iter().map(|it| it.alpha * it.alpha).sum();
    items
        .iter()
        .map(|it| {
            let w = it.alpha * it.alpha / total;
            (w * it.beta, w * it.gamma)
        })
        .unzip()
}

/// Density of logit response `z` given trait `theta`.
pub fn crm_density(z: f64, theta: f64, item: &ItemParams) -> f64 {
    let r = theta - item.beta - item.gamma * z;
    (item.alpha * item.gamma).abs() / (2.0 * PI).sqrt()
        * (-0.5 * item.alpha * item.alpha * r * r).exp()
}

fn check_items(z: &LogitScores, items: &[ItemParams]) -> Result<()> {
    if items.len() != z.n_items() {
        return invalid(format!(
            "{} items for {} response columns",
            items.len(),
            z.n_items()
        ));
    }
    if let Some(bad) = items.iter().position(|it| !it.is_valid()) {
        return invalid(format!("item {bad} violates alpha * gamma > 0"));
    }
    Ok(())
}

/// Posterior mean of every trait and the shared posterior SD, under a
/// standard normal prior.
///
/// Each item contributes a Gaussian likelihood in θ with mean `β + γ z` and
/// precision `α²`, so the posterior is Gaussian with precision `1 + Σ α²`.
pub fn e_step(z: &LogitScores, items: &[ItemParams]) -> Result<(Vec<f64>, f64)> {
    check_items(z, items)?;
    let precision = 1.0 + items.iter().map(|it| it.alpha * it.alpha).sum::<f64>();
    let mu = z
        .values()
        .axis_iter(Axis(0))
        .map(|row| {
            row.iter()
                .zip(items)
                .map(|(&zij, it)| it.alpha * it.alpha * (it.beta + it.gamma * zij))
                .sum::<f64>()
                / precision
        })
        .collect();
    Ok((mu, precision.sqrt().recip()))
}

/// Expected complete-data log-likelihood, constants dropped.
pub fn expected_log_likelihood(
    z: &LogitScores,
    mu: &[f64],
    sigma: f64,
    items: &[ItemParams],
) -> f64 {
    let n = z.n_obs() as f64;
    items
        .iter()
        .zip(z.values().axis_iter(Axis(1)))
        .map(|(it, col)| {
            let resid: f64 = col
                .iter()
                .zip(mu)
                .map(|(&zij, &m)| (it.beta + it.gamma * zij - m).powi(2) + sigma * sigma)
                .sum();
            n * (it.alpha.abs().ln() + it.gamma.abs().ln()) - 0.5 * it.alpha * it.alpha * resid
        })
        .sum()
}

/// Log-likelihood of the responses with the trait integrated out against its
/// standard normal prior. EM never decreases this quantity.
pub fn marginal_log_likelihood(z: &LogitScores, items: &[ItemParams]) -> f64 {
    let n_items = items.len() as f64;
    let log_scale: f64 = items
        .iter()
        .map(|it| (it.alpha * it.gamma).abs().ln())
        .sum::<f64>()
        - 0.5 * n_items * (2.0 * PI).ln();
    let precision = 1.0 + items.iter().map(|it| it.alpha * it.alpha).sum::<f64>();
    z.values()
        .axis_iter(Axis(0))
        .map(|row| {
            let (mut b, mut c) = (0.0, 0.0);
            for (&zij, it) in row.iter().zip(items) {
                let a2 = it.alpha * it.alpha;
                let m = it.beta + it.gamma * zij;
                b += a2 * m;
                c += a2 * m * m;
            }
            log_scale - 0.5 * precision.ln() + 0.5 * (b * b / precision - c)
        })
        .sum()
}

/// Sufficient statistics of one item's M-step.
struct ColumnMoments {
    z_mean: f64,
    mu_mean: f64,
    s_zz: f64,
    s_zmu: f64,
    s_mumu: f64,
}

fn moments(col: ArrayView1<'_, f64>, mu: &[f64]) -> ColumnMoments {
    let n = mu.len() as f64;
    let z_mean = col.sum() / n;
    let mu_mean = mu.iter().sum::<f64>() / n;
    let (mut s_zz, mut s_zmu, mut s_mumu) = (0.0, 0.0, 0.0);
    for (&zi, &mi) in col.iter().zip(mu) {
        let dz = zi - z_mean;
        let dm = mi - mu_mean;
        s_zz += dz * dz;
        s_zmu += dz * dm;
        s_mumu += dm * dm;
    }
    ColumnMoments {
        z_mean,
        mu_mean,
        s_zz,
        s_zmu,
        s_mumu,
    }
}

/// Maximizes the expected log-likelihood item by item.
///
/// Setting the three partial derivatives to zero gives, with centred sums
/// `S`, the closed form
///
/// ```text
/// γ = (S_μμ + N σ²) / S_zμ
/// β = mean(μ) - γ mean(z)
/// α² = N / Σ_i ((β + γ z_i - μ_i)² + σ²)
/// ```
///
/// and `α` then takes the sign of `γ`. An item whose responses are constant,
/// or uncorrelated with `μ`, keeps its previous parameters.
pub fn m_step(
    z: &LogitScores,
    mu: &[f64],
    sigma: f64,
    prev: &[ItemParams],
) -> Result<Vec<ItemParams>> {
    check_items(z, prev)?;
    let n_obs = z.n_obs();
    if n_obs < 2 {
        return invalid("m_step needs at least 2 observations");
    }
    if mu.len() != n_obs {
        return invalid(format!("{} trait means for {n_obs} observations", mu.len()));
    }
    if !(sigma >= 0.0 && sigma.is_finite()) || mu.iter().any(|m| !m.is_finite()) {
        return Err(Error::Numerical("non-finite E-step output".into()));
    }
    let n = n_obs as f64;
    z.values()
        .axis_iter(Axis(1))
        .zip(prev)
        .enumerate()
        .map(|(j, (col, old))| {
            let m = moments(col, mu);
            if m.s_zz == 0.0 || m.s_zmu == 0.0 {
                log::debug!("item {j}: singular update, keeping previous parameters");
                return Ok(*old);
            }
            let gamma = (m.s_mumu + n * sigma * sigma) / m.s_zmu;
            let beta = m.mu_mean - gamma * m.z_mean;
            let resid: f64 = col
                .iter()
                .zip(mu)
                .map(|(&zi, &mi)| (beta + gamma * zi - mi).powi(2))
                .sum::<f64>()
                + n * sigma * sigma;
            let alpha_sq = n / resid;
            if !(alpha_sq.is_finite() && alpha_sq > 0.0) {
                return Err(Error::Numerical(format!(
                    "item {j}: discrimination diverged (residual {resid})"
                )));
            }
            // the sign of the discrimination follows the scaling coefficient
            let alpha = gamma.signum() * alpha_sq.sqrt();
            Ok(ItemParams { alpha, beta, gamma })
        })
        .collect()
}

/// Maximum-likelihood trait given fixed item parameters:
/// `θ_i = Σ_j α_j² (β_j + γ_j z_ij) / Σ_j α_j²`.
pub fn latent_trait(z: &LogitScores, items: &[ItemParams]) -> Result<Vec<f64>> {
    check_items(z, items)?;
    let total: f64 = items.iter().map(|it| it.alpha * it.alpha).sum();
    if !(total > 0.0) {
        return invalid("latent trait needs at least one item with nonzero discrimination");
    }
    Ok(z.values()
        .axis_iter(Axis(0))
        .map(|row| {
            row.iter()
                .zip(items)
                .map(|(&zij, it)| it.alpha * it.alpha * (it.beta + it.gamma * zij))
                .sum::<f64>()
                / total
        })
        .collect())
}

/// Fits item parameters by EM and returns them with the latent traits.
///
/// The trait axis is oriented so that most items increase with it, so larger
/// θ means the detectors collectively score the observation as more
/// anomalous. Reversing a minority of detectors therefore leaves θ unchanged.
pub fn fit(z: &LogitScores, cfg: &FitConfig) -> Result<IrtModel> {
    cfg.validate()?;
    let (n_obs, n_items) = (z.n_obs(), z.n_items());
    if n_obs < 2 {
        return invalid(format!("need at least 2 observations, got {n_obs}"));
    }
    if n_items < 2 {
        return invalid(format!("need at least 2 items, got {n_items}"));
    }
    let constant: Vec<usize> = z
        .values()
        .axis_iter(Axis(1))
        .enumerate()
        .filter(|(_, col)| col.iter().all(|&v| v == col[0]))
        .map(|(j, _)| j)
        .collect();
    if constant.len() == n_items {
        return Err(Error::Degenerate(
            "every response column is constant".into(),
        ));
    }
    if !constant.is_empty() {
        log::warn!("constant response columns {constant:?} keep their initial parameters");
    }

    let init = ItemParams {
        alpha: cfg.init_alpha,
        beta: cfg.init_beta,
        gamma: cfg.init_gamma,
    };
    let mut items = vec![init; n_items];
    let mut trace = Vec::new();
    let mut converged = false;
    let mut iterations = 0;
    let mut sigma = 1.0;
    while iterations < cfg.max_iter {
        iterations += 1;
        let (mu, sd) = e_step(z, &items)?;
        sigma = sd;
        let next = m_step(z, &mu, sigma, &items)?;
        let delta = items
            .iter()
            .zip(&next)
            .map(|(a, b)| a.max_abs_diff(b))
            .fold(0.0, f64::max);
        items = next;
        trace.push(marginal_log_likelihood(z, &items));
        if delta < cfg.tol {
            converged = true;
            break;
        }
    }
    if !converged {
        log::debug!("EM stopped after {iterations} iterations without converging");
    }

    if orientation(&items) < 0.0 {
        for it in &mut items {
            *it = ItemParams {
                alpha: -it.alpha,
                beta: -it.beta,
                gamma: -it.gamma,
            };
        }
    }

    let theta = latent_trait(z, &items)?;
    Ok(IrtModel {
        items,
        theta,
        posterior_sd: sigma,
        log_likelihood_trace: trace,
        iterations,
        converged,
    })
}

/// Positive when most items increase with the trait. Ties fall back to the
/// discrimination-weighted direction `Σ α² γ`.
fn orientation(items: &[ItemParams]) -> f64 {
    let votes: i64 = items.iter().map(|it| it.gamma.signum() as i64).sum();
    if votes != 0 {
        votes as f64
    } else {
        items.iter().map(|it| it.alpha * it.alpha * it.gamma).sum()
    }
}

/// Normalizes raw scores, fits the model and returns it with the logit
/// responses it was fitted to.
pub fn fit_scores(
    m: &ScoreMatrix,
    epsilon: f64,
    cfg: &FitConfig,
) -> Result<(IrtModel, LogitScores)> {
    if m.n_detectors() < 2 {
        return invalid("the IRT ensemble needs at least 2 detectors");
    }
    let z = to_logit(&normalize_columns(m, epsilon)?);
    let model = fit(&z, cfg)?;
    Ok((model, z))
}

/// The IRT ensemble: latent traits of the fitted model as anomaly scores.
pub fn irt_ensemble(m: &ScoreMatrix, epsilon: f64, cfg: &FitConfig) -> Result<EnsembleResult> {
    let (model, _) = fit_scores(m, epsilon, cfg)?;
    Ok(EnsembleResult::new("IRT", model.theta)
        .with_param("epsilon", epsilon)
        .with_param("iterations", model.iterations)
        .with_param("converged", model.converged))
}

/// Draws traits `θ ~ N(0, 1)` and logit responses from the model with the
/// given items. Returns `(θ, z)`.
pub fn simulate(items: &[ItemParams], n_obs: usize, seed: u64) -> Result<(Vec<f64>, LogitScores)> {
    use rand::SeedableRng;
    use rand_distr::{Distribution, StandardNormal};

    if let Some(bad) = items.iter().find(|it| !it.is_valid()) {
        return invalid(format!("invalid item {bad:?}"));
    }
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let theta: Vec<f64> = (0..n_obs).map(|_| StandardNormal.sample(&mut rng)).collect();
    let z = ndarray::Array2::from_shape_fn((n_obs, items.len()), |(i, j)| {
        let it = &items[j];
        // θ - β - γ z ~ N(0, 1/α²)
        let e: f64 = StandardNormal.sample(&mut rng);
        (theta[i] - it.beta - e / it.alpha.abs()) / it.gamma
    });
    Ok((theta, LogitScores::from_values(z)?))
}
